"""Pre-decision modules: decide at which encoder states the policy is consulted."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .stream import Number, as_ms, encoder_state_count, fmt_ms

LEVELS = ("word", "phoneme")


@dataclass(frozen=True)
class TriggerDecision:
    state_index: int
    probability: Fraction

    @property
    def fired(self) -> bool:
        return self.probability > Fraction(1, 2)


@dataclass(frozen=True)
class FixedPreDecision:
    """Trigger every ``step_ms`` of speech."""

    step_ms: Fraction
    frame_period_ms: Fraction
    subsample_factor: int = 4

    def __post_init__(self):
        object.__setattr__(self, "step_ms", as_ms(self.step_ms))
        object.__setattr__(self, "frame_period_ms", as_ms(self.frame_period_ms))
        if self.subsample_factor < 1:
            raise ValueError("subsample_factor must be >= 1")
        if self.frame_period_ms <= 0:
            raise ValueError("frame_period_ms must be > 0")
        ratio = self.step_ms / self.frame_period_ms
        if self.step_ms <= 0 or ratio.denominator != 1:
            raise ValueError(
                f"step {self.step_ms}ms is not a positive multiple of the "
                f"{self.frame_period_ms}ms frame period"
            )

    @property
    def descriptor(self) -> str:
        return f"fixed:{fmt_ms(self.step_ms)}"

    @property
    def trigger_period(self) -> int:
        """Smallest state index that fires; exactly its multiples fire."""
        state_ms = self.subsample_factor * self.frame_period_ms
        scale = math.lcm(state_ms.denominator, self.step_ms.denominator)
        a = int(state_ms * scale)
        step = int(self.step_ms * scale)
        return step // math.gcd(a, step)


@dataclass(frozen=True)
class Segment:
    label: str
    start_ms: Fraction
    end_ms: Fraction

    def __post_init__(self):
        object.__setattr__(self, "start_ms", as_ms(self.start_ms))
        object.__setattr__(self, "end_ms", as_ms(self.end_ms))
        if self.end_ms <= self.start_ms:
            raise ValueError(
                f"segment {self.label!r}: end {self.end_ms} <= start {self.start_ms}"
            )

    @property
    def duration_ms(self) -> Fraction:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class AlignmentTable:
    """Map from encoder state ``j`` (1-based) to the index of its source label."""

    level: str
    state_labels: tuple
    subsample_factor: int = 4

    def __post_init__(self):
        object.__setattr__(self, "state_labels", tuple(self.state_labels))
        if self.level not in LEVELS:
            raise ValueError(f"alignment level must be one of {LEVELS}, got {self.level!r}")
        for j in range(1, len(self.state_labels)):
            if self.state_labels[j] < self.state_labels[j - 1]:
                raise ValueError(f"label index decreases at state {j + 1}")

    @property
    def num_states(self) -> int:
        return len(self.state_labels)

    @property
    def descriptor(self) -> str:
        return f"flexible:{self.level}"

    def label(self, state_index: int) -> int:
        if not 1 <= state_index <= self.num_states:
            raise IndexError(
                f"state {state_index} outside alignment table of {self.num_states} states"
            )
        return self.state_labels[state_index - 1]


PreDecision = Union[FixedPreDecision, AlignmentTable]


def fixed_trigger(state_index: int, config: FixedPreDecision) -> TriggerDecision:
    if state_index < 1:
        raise ValueError("state_index must be >= 1")
    elapsed = state_index * config.subsample_factor * config.frame_period_ms
    p = Fraction(1) if elapsed % config.step_ms == 0 else Fraction(0)
    return TriggerDecision(state_index, p)


def flexible_trigger(state_index: int, table: AlignmentTable) -> TriggerDecision:
    # State 1 has no predecessor to compare against; it never triggers.
    current = table.label(state_index)
    if state_index == 1 or current == table.label(state_index - 1):
        return TriggerDecision(state_index, Fraction(0))
    return TriggerDecision(state_index, Fraction(1))


def trigger(state_index: int, pre: PreDecision) -> TriggerDecision:
    if isinstance(pre, FixedPreDecision):
        return fixed_trigger(state_index, pre)
    return flexible_trigger(state_index, pre)


def decision_points(pre: PreDecision, num_frames: int) -> list:
    """``(state_index, forced)`` for every decision point of a full stream.

    The final entry is the end-of-stream trigger; it is marked forced unless
    the last state fired on the stream's final frame anyway.
    """
    r_e = pre.subsample_factor
    num_states = encoder_state_count(num_frames, r_e)
    points = [(j, False) for j in range(1, num_states + 1) if trigger(j, pre).fired]
    last_fired_on_final_frame = (
        points and points[-1][0] == num_states and num_frames % r_e == 0
    )
    if not last_fired_on_final_frame:
        points.append((num_states, True))
    return points


def build_alignment_table(
    segments: Sequence[Segment],
    num_states: int,
    subsample_factor: int,
    frame_period_ms: Number,
    level: str = "word",
) -> AlignmentTable:
    """Label each encoder state with the segment containing its midpoint.

    States falling in silence keep the previous segment's label; states before
    the first segment take the first segment's label.
    """
    if num_states < 0:
        raise ValueError("num_states must be >= 0")
    if not segments:
        raise ValueError("alignment needs at least one segment")
    for prev, seg in zip(segments, segments[1:]):
        if seg.start_ms < prev.start_ms:
            raise ValueError("segments must be sorted by start_ms")
        if seg.start_ms < prev.end_ms:
            raise ValueError(f"segments {prev.label!r} and {seg.label!r} overlap")

    width = subsample_factor * as_ms(frame_period_ms)
    labels = []
    seg_idx = 0
    current = 0
    for j in range(1, num_states + 1):
        mid = (j - Fraction(1, 2)) * width
        while seg_idx < len(segments) and segments[seg_idx].end_ms <= mid:
            seg_idx += 1
        if seg_idx < len(segments) and segments[seg_idx].start_ms <= mid:
            current = seg_idx
        elif seg_idx > 0:
            # in a gap (or past the end): inherit the last segment that started
            current = max(current, seg_idx - 1)
        labels.append(current)
    return AlignmentTable(level, tuple(labels), subsample_factor)


@dataclass(frozen=True)
class BoundaryStats:
    mean_segment_ms: Fraction
    count: int


def boundary_stats(segment_lists: Iterable[Sequence[Segment]]) -> BoundaryStats:
    total = Fraction(0)
    count = 0
    for segments in segment_lists:
        for seg in segments:
            total += seg.duration_ms
            count += 1
    if count == 0:
        raise ValueError("boundary_stats needs at least one segment")
    return BoundaryStats(total / count, count)
