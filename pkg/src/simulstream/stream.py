"""Timed source streams, encoder-state bookkeeping and session traces.

All times are milliseconds held as :class:`fractions.Fraction` so that delay
and lagging arithmetic is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import NamedTuple, Optional, Sequence, Union

Number = Union[int, float, str, Fraction]


def as_ms(value: Number) -> Fraction:
    """Coerce a millisecond quantity to an exact rational.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``
    rather than the nearest binary fraction.
    """
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as milliseconds")


def fmt_ms(value: Fraction) -> str:
    """Short label for a time value: ``280`` or ``12.5``."""
    return str(value.numerator) if value.denominator == 1 else str(float(value))


@dataclass(frozen=True)
class SourceStream:
    """Source features ``x_1..x_|X|`` arriving one frame every ``frame_period_ms``."""

    id: str
    num_frames: int
    frame_period_ms: Fraction
    features: Optional[Sequence] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "frame_period_ms", as_ms(self.frame_period_ms))
        if self.num_frames < 1:
            raise ValueError(f"stream {self.id!r}: num_frames must be >= 1")
        if self.frame_period_ms <= 0:
            raise ValueError(f"stream {self.id!r}: frame_period_ms must be > 0")
        if self.features is not None and len(self.features) != self.num_frames:
            raise ValueError(
                f"stream {self.id!r}: {len(self.features)} feature rows for "
                f"{self.num_frames} frames"
            )

    @property
    def duration_ms(self) -> Fraction:
        return self.num_frames * self.frame_period_ms


def encoder_state_count(frames_read: int, subsample_factor: int) -> int:
    """Number of encoder states available after ``frames_read`` frames.

    One state per ``subsample_factor`` consumed frames; leftover frames do not
    form a partial state.
    """
    if subsample_factor < 1:
        raise ValueError("subsample_factor must be >= 1")
    if frames_read < 0:
        raise ValueError("frames_read must be >= 0")
    return frames_read // subsample_factor


@dataclass
class EncoderStateSeq:
    """Streaming view of the encoder output ``H``."""

    subsample_factor: int
    num_states: int = 0

    def __post_init__(self):
        if self.subsample_factor < 1:
            raise ValueError("subsample_factor must be >= 1")

    def update(self, frames_read: int) -> int:
        """Catch up with ``frames_read``; returns how many states were added."""
        target = encoder_state_count(frames_read, self.subsample_factor)
        if target < self.num_states:
            raise ValueError("frames_read went backwards")
        added = target - self.num_states
        self.num_states = target
        return added


def nca_delay(frames_read: int, frame_period_ms: Number) -> Fraction:
    """Non-computation-aware delay: speech time covered by ``frames_read`` frames."""
    return as_ms(frame_period_ms) * frames_read


@dataclass
class Hypothesis:
    tokens: list = field(default_factory=list)
    finished: bool = False

    def append(self, token: str) -> None:
        if self.finished:
            raise ValueError("hypothesis is finished; tokens are append-only until END")
        self.tokens.append(token)

    def __len__(self):
        return len(self.tokens)


class DelayRecord(NamedTuple):
    """Delays of the ``token_index``-th emitted token (1-based).

    ``d_ca_ms`` is ``None`` only for traces produced elsewhere that carry no
    computation-aware timing.
    """

    token_index: int
    frames_read: int
    d_nca_ms: Fraction
    d_ca_ms: Optional[Fraction]


class ReadEvent(NamedTuple):
    frame: int


class TriggerEvent(NamedTuple):
    state: int
    forced: bool = False


class WriteEvent(NamedTuple):
    token: str
    delay: DelayRecord


Event = Union[ReadEvent, TriggerEvent, WriteEvent]


@dataclass
class Trace:
    """READ/TRIGGER/WRITE log of one session plus the delay list ``D``."""

    stream_id: str
    num_frames: int
    frame_period_ms: Fraction
    events: list = field(default_factory=list)
    delays: list = field(default_factory=list)
    source_exhausted_at_event: Optional[int] = None

    def __post_init__(self):
        self.frame_period_ms = as_ms(self.frame_period_ms)

    def read(self, frame: int) -> None:
        self.events.append(ReadEvent(frame))
        if frame == self.num_frames:
            self.source_exhausted_at_event = len(self.events) - 1

    def trigger(self, state: int, forced: bool = False) -> None:
        self.events.append(TriggerEvent(state, forced))

    def write(self, token: str, frames_read: int, d_ca_ms: Optional[Fraction]) -> DelayRecord:
        record = DelayRecord(
            token_index=len(self.delays) + 1,
            frames_read=frames_read,
            d_nca_ms=self.frame_period_ms * frames_read,
            d_ca_ms=d_ca_ms,
        )
        self.events.append(WriteEvent(token, record))
        self.delays.append(record)
        return record

    @property
    def tokens(self) -> list:
        return [e.token for e in self.events if isinstance(e, WriteEvent)]

    @property
    def frames_read(self) -> int:
        return sum(1 for e in self.events if isinstance(e, ReadEvent))

    @property
    def has_ca(self) -> bool:
        return all(d.d_ca_ms is not None for d in self.delays)


def validate_trace(trace: Trace) -> list:
    """Check every Trace/DelayRecord invariant; returns one message per violation."""
    problems = []
    writes = []
    last_frame = 0
    for pos, event in enumerate(trace.events):
        if isinstance(event, ReadEvent):
            if event.frame != last_frame + 1:
                problems.append(
                    f"event {pos}: READ frame {event.frame} after frame {last_frame} "
                    "(frames must be contiguous from 1)"
                )
            last_frame = event.frame
        elif isinstance(event, WriteEvent):
            writes.append(event)
            if event.delay.frames_read > last_frame:
                problems.append(
                    f"token {event.delay.token_index}: frames_read "
                    f"{event.delay.frames_read} exceeds the {last_frame} frames read"
                )
    if last_frame > trace.num_frames:
        problems.append(f"{last_frame} frames read from a {trace.num_frames}-frame stream")

    if len(writes) != len(trace.delays):
        problems.append(
            f"{len(trace.delays)} delay records for {len(writes)} WRITE events"
        )
    else:
        for event, record in zip(writes, trace.delays):
            if event.delay != record:
                problems.append(
                    f"token {record.token_index}: WRITE event delay disagrees with delays list"
                )

    prev = None
    for expected_index, record in enumerate(trace.delays, start=1):
        tag = f"token {record.token_index}"
        if record.token_index != expected_index:
            problems.append(f"{tag}: expected token_index {expected_index}")
        if record.d_nca_ms != trace.frame_period_ms * record.frames_read:
            problems.append(
                f"{tag}: d_nca {record.d_nca_ms} != T_s * n = "
                f"{trace.frame_period_ms * record.frames_read}"
            )
        if record.d_ca_ms is not None and record.d_ca_ms < record.d_nca_ms:
            problems.append(f"{tag}: d_ca {record.d_ca_ms} < d_nca {record.d_nca_ms}")
        if prev is not None and record.frames_read < prev.frames_read:
            problems.append(
                f"{tag}: frames_read {record.frames_read} < {prev.frames_read} of the "
                "previous token (n must be monotonic)"
            )
        prev = record
    return problems
