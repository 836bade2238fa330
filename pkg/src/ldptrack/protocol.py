"""Online client and server of the longitudinal estimation protocol.

Each client samples one dyadic order h, and at every multiple of 2^h
reports a single perturbed bit for the window that just closed: non-zero
window sums consume the next coordinate of a noise vector pre-drawn from
the composed randomizer at init, zero sums are reported as fresh fair
coin flips.  The server buckets users by order, scales the per-window bit
sums by (1 + log2 d) / gap and assembles estimates along the dyadic
decomposition of each time step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
from mpmath import mpf

from .dyadic import DyadicInterval, decompose, is_power_of_two
from .errors import ProtocolError, SparsityError
from .randomizer import RandomizerConfig, compose_randomize, futurerand_config

__all__ = [
    "ClientState",
    "ClientReport",
    "ServerState",
    "EstimateSeries",
    "ReportRecord",
    "client_init",
    "client_step",
    "server_init",
    "server_register",
    "server_step",
    "server_scale",
    "write_reports",
    "read_reports",
]


@dataclass
class ClientState:
    """Per-user protocol state; driven by one thread via client_step."""

    h: int
    L: int
    d: int
    k: int
    eps: float
    cfg: RandomizerConfig
    b_tilde: np.ndarray
    rng: np.random.Generator
    nnz: int = 0
    window_acc: int = 0
    next_t: int = 1
    # sample-one transform: when set, derivative entries at any other time
    # are dropped before windowing.
    keep_time: int | None = None
    filter_deltas: bool = False


@dataclass(frozen=True)
class ClientReport:
    """Everything one user sends: the sampled order plus one bit per window."""

    user: int
    h: int
    horizon: int
    timed_bits: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        step = 1 << self.h
        expected = [step * (j + 1) for j in range(self.horizon >> self.h)]
        if [t for t, _ in self.timed_bits] != expected:
            raise ValueError(
                f"need one bit at each multiple of {step} up to {self.horizon}"
            )
        if any(b not in (-1, 1) for _, b in self.timed_bits):
            raise ValueError("bits must be -1 or +1")


def client_init(k: int, d: int, eps: float, rng: np.random.Generator,
                cfg: RandomizerConfig | None = None) -> ClientState:
    """Sample the order uniformly and pre-draw the noise vector R~(1^k)."""
    if not is_power_of_two(d):
        raise ValueError(f"horizon d={d} must be a power of two")
    if cfg is None:
        cfg = futurerand_config(k, eps, L=max(d, k))
    if cfg.k != k:
        raise ValueError(f"config built for k={cfg.k}, client asked k={k}")
    h = int(rng.integers(0, d.bit_length()))
    b_tilde = compose_randomize(np.ones(k, dtype=np.int8), cfg, rng)
    return ClientState(h=h, L=d >> h, d=d, k=k, eps=eps, cfg=cfg,
                       b_tilde=b_tilde, rng=rng)


def client_step(state: ClientState, t: int, delta: int) -> int | None:
    """Feed the derivative entry for time t; returns a bit at window ends.

    Raises SparsityError if the stream produces more than k non-zero
    window sums at the sampled order, which valid inputs cannot do.
    """
    if t != state.next_t:
        raise ProtocolError(f"expected t={state.next_t}, got t={t}")
    if not 1 <= t <= state.d:
        raise ProtocolError(f"t={t} outside [1, {state.d}]")
    if delta not in (-1, 0, 1):
        raise ValueError(f"delta must be -1, 0 or +1, got {delta}")
    state.next_t += 1
    if state.filter_deltas and t != state.keep_time:
        delta = 0
    state.window_acc += delta
    if t % (1 << state.h) != 0:
        return None
    v = state.window_acc
    state.window_acc = 0
    if v == 0:
        return int(state.rng.integers(0, 2)) * 2 - 1
    if v not in (-1, 1):
        raise ValueError(f"window sum {v} at t={t}: input is not a valid derivative")
    if state.nnz >= state.k:
        raise SparsityError(
            f"more than k={state.k} non-zero window sums at order {state.h}"
        )
    bit = int(v * state.b_tilde[state.nnz])
    state.nnz += 1
    return bit


# ---------------------------------------------------------------------------
# server


@dataclass
class ServerState:
    d: int
    k: int
    eps: float
    scale: mpf
    buckets: dict[int, set[int]] = field(default_factory=dict)
    h_of: dict[int, int] = field(default_factory=dict)
    bit_sums: dict[tuple[int, int], int] = field(default_factory=dict)
    next_t: int = 1

    @property
    def sigma_hat(self) -> dict[DyadicInterval, float]:
        """Scaled estimates of the population window sums seen so far."""
        return {
            DyadicInterval(order=h, index=j, horizon=self.d):
                float(self.scale * s)
            for (h, j), s in self.bit_sums.items()
        }


def server_scale(d: int, gap_value: mpf, extra_factor: int = 1) -> mpf:
    """(1 + log2 d) * extra_factor / gap, in extended precision."""
    return mpf(d.bit_length()) * extra_factor / mpf(gap_value)


def server_init(d: int, k: int, eps: float, gap_value: mpf,
                extra_factor: int = 1) -> ServerState:
    if not is_power_of_two(d):
        raise ValueError(f"horizon d={d} must be a power of two")
    scale = server_scale(d, gap_value, extra_factor)
    buckets = {h: set() for h in range(d.bit_length())}
    return ServerState(d=d, k=k, eps=eps, scale=scale, buckets=buckets)


def server_register(state: ServerState, user: int, h: int) -> None:
    if user in state.h_of:
        raise ProtocolError(f"user {user} already registered")
    if h not in state.buckets:
        raise ProtocolError(f"order {h} outside [0, {state.d.bit_length() - 1}]")
    state.h_of[user] = h
    state.buckets[h].add(user)


def server_step(state: ServerState, t: int,
                reports: Iterable[tuple[int, int]]) -> float:
    """Ingest the bits due at time t and return the estimate of f(t).

    Exactly the users whose 2^h divides t must report, once each.  Window
    bit sums are kept as exact integers; the common scale is applied when
    estimates are read out.
    """
    if t != state.next_t:
        raise ProtocolError(f"expected t={state.next_t}, got t={t}")
    state.next_t += 1
    due = {u for u, h in state.h_of.items() if t % (1 << h) == 0}
    seen: set[int] = set()
    sums: dict[int, int] = {}
    for user, bit in reports:
        if user not in state.h_of:
            raise ProtocolError(f"report from unregistered user {user}")
        if user not in due:
            raise ProtocolError(f"user {user} has no report due at t={t}")
        if user in seen:
            raise ProtocolError(f"duplicate report from user {user} at t={t}")
        if bit not in (-1, 1):
            raise ValueError(f"bit must be -1 or +1, got {bit}")
        seen.add(user)
        sums[state.h_of[user]] = sums.get(state.h_of[user], 0) + bit
    missing = due - seen
    if missing:
        raise ProtocolError(f"missing reports at t={t} from users {sorted(missing)}")
    for h in range(state.d.bit_length()):
        if t % (1 << h) == 0:
            state.bit_sums[(h, t >> h)] = sums.get(h, 0)
    total = 0
    for iv in decompose(t, state.d):
        total += state.bit_sums[(iv.order, iv.index)]
    return float(state.scale * total)


@dataclass(frozen=True)
class EstimateSeries:
    """Estimates f_hat(1..d) produced by a full server run."""

    estimates: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.estimates, dtype=np.float64)


# ---------------------------------------------------------------------------
# wire format: one NDJSON object per emitted bit


@dataclass(frozen=True)
class ReportRecord:
    user: int
    h: int
    t: int
    bit: int

    def to_json(self) -> str:
        return json.dumps({"user": self.user, "h": self.h,
                           "t": self.t, "bit": self.bit})

    @classmethod
    def from_json(cls, line: str) -> "ReportRecord":
        obj = json.loads(line)
        if set(obj) != {"user", "h", "t", "bit"}:
            raise ValueError(f"record keys {sorted(obj)} != ['bit', 'h', 't', 'user']")
        rec = cls(user=int(obj["user"]), h=int(obj["h"]),
                  t=int(obj["t"]), bit=int(obj["bit"]))
        if rec.bit not in (-1, 1):
            raise ValueError(f"bit must be -1 or +1, got {rec.bit}")
        return rec


def write_reports(records: Sequence[ReportRecord], fp: IO[str]) -> None:
    for rec in records:
        fp.write(rec.to_json())
        fp.write("\n")


def read_reports(fp: IO[str]) -> list[ReportRecord]:
    return [ReportRecord.from_json(line) for line in fp if line.strip()]
