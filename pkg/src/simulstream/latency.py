"""Time-based Average Lagging and the latency-regularised objective."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .stream import Number, Trace, as_ms

FLAVORS = ("nca", "ca")


@dataclass(frozen=True)
class ALInput:
    delays_ms: tuple
    num_frames: int
    frame_period_ms: Fraction
    reference_length: int
    full_read_token_index: int

    def __post_init__(self):
        object.__setattr__(self, "delays_ms", tuple(as_ms(d) for d in self.delays_ms))
        object.__setattr__(self, "frame_period_ms", as_ms(self.frame_period_ms))
        if self.reference_length < 1:
            raise ValueError("reference_length must be >= 1")
        if not 1 <= self.full_read_token_index <= len(self.delays_ms):
            raise ValueError(
                f"tau = {self.full_read_token_index} outside 1..{len(self.delays_ms)}"
            )
        for a, b in zip(self.delays_ms, self.delays_ms[1:]):
            if b < a:
                raise ValueError("delays must be non-decreasing")


def full_read_index(frames_read: Sequence[int], num_frames: int) -> int:
    """1-based index of the first token emitted after the whole source was read.

    Falls back to the hypothesis length when every token came earlier.
    """
    if not frames_read:
        raise ValueError("empty hypothesis has no full-read token")
    for i, n in enumerate(frames_read, start=1):
        if n >= num_frames:
            return i
    return len(frames_read)


def tau_full_read(trace: Trace) -> int:
    return full_read_index([d.frames_read for d in trace.delays], trace.num_frames)


def average_lagging(inp: ALInput) -> Fraction:
    """Mean lag behind an oracle that spends ``|X| * T_s / |Y*|`` ms per token.

    Sums over tokens ``1..tau`` only; the result is signed.
    """
    tau = inp.full_read_token_index
    rate = Fraction(inp.num_frames, inp.reference_length) * inp.frame_period_ms
    total = sum(inp.delays_ms[i - 1] - rate * (i - 1) for i in range(1, tau + 1))
    return Fraction(total) / tau


def trace_delays(trace: Trace, flavor: str = "nca") -> list:
    if flavor not in FLAVORS:
        raise ValueError(f"latency flavor must be one of {FLAVORS}")
    if flavor == "nca":
        return [d.d_nca_ms for d in trace.delays]
    if not trace.has_ca:
        raise ValueError(f"trace {trace.stream_id!r} has no computation-aware delays")
    return [d.d_ca_ms for d in trace.delays]


def trace_average_lagging(
    trace: Trace, reference_length: Optional[int] = None, flavor: str = "nca"
) -> Fraction:
    """AL of one session; without a reference, ``|Y*|`` falls back to ``|Y|``."""
    delays = trace_delays(trace, flavor)
    if reference_length is None:
        reference_length = len(delays)
    return average_lagging(
        ALInput(
            delays_ms=tuple(delays),
            num_frames=trace.num_frames,
            frame_period_ms=trace.frame_period_ms,
            reference_length=reference_length,
            full_read_token_index=tau_full_read(trace),
        )
    )


@dataclass(frozen=True)
class ObjectiveInput:
    neg_log_likelihood: Number
    latency_cost_ms: Number
    lam: Number

    def __post_init__(self):
        if self.neg_log_likelihood < 0:
            raise ValueError("negative log-likelihood must be >= 0")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


def regularized_objective(inp: ObjectiveInput):
    """``nll + lambda * max(C, 0)``: only positive latency is penalised."""
    return inp.neg_log_likelihood + inp.lam * max(inp.latency_cost_ms, 0)
