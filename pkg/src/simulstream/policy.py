"""READ/WRITE policies over pre-decision units: wait-k and multi-head monotonic attention."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Union

HALT_THRESHOLD = Fraction(1, 2)


def halts(p) -> bool:
    """A head halts on a unit once its stepwise probability reaches 0.5."""
    return 2 * p >= 1


class Action(enum.Enum):
    READ = "READ"
    WRITE = "WRITE"


Decision = Action


@dataclass(frozen=True)
class PolicyContext:
    tokens_written: int
    units_read: int
    source_done: bool = False
    hypothesis_finished: bool = False

    def __post_init__(self):
        if self.tokens_written < 0 or self.units_read < 0:
            raise ValueError("tokens_written and units_read must be >= 0")


@dataclass(frozen=True)
class WaitKSpec:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"wait-k needs k >= 1, got {self.k}")

    name = "wait-k"

    @property
    def params(self) -> str:
        return f"k={self.k}"


def waitk_decide(ctx: PolicyContext, spec: WaitKSpec) -> Action:
    """Write the i-th token once ``k + i - 1`` units have been read."""
    if ctx.source_done or ctx.units_read - ctx.tokens_written >= spec.k:
        return Action.WRITE
    return Action.READ


# Stepwise sources map (target step i, source unit j), both 1-based, to a
# halting probability.
StepwiseSource = Callable[[int, int], Fraction]


@dataclass(frozen=True)
class WaitKStepwise:
    """Deterministic head that halts exactly where wait-k would write."""

    k: int

    def __call__(self, i: int, j: int) -> int:
        return 1 if j >= self.k + i - 1 else 0

    @property
    def descriptor(self) -> str:
        return f"waitk:{self.k}"


@dataclass(frozen=True)
class TableStepwise:
    table: Mapping
    default: Fraction = Fraction(0)
    name: str = "table"

    def __call__(self, i: int, j: int) -> Fraction:
        return self.table.get((i, j), self.default)

    @property
    def descriptor(self) -> str:
        return f"table:{self.name}"


def stepwise_from_waitk(k: int) -> WaitKStepwise:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return WaitKStepwise(k)


def stepwise_from_table(
    table: Mapping, default=0, name: str = "table"
) -> TableStepwise:
    checked = {}
    for (i, j), p in table.items():
        checked[(int(i), int(j))] = _probability(p, f"p({i},{j})")
    return TableStepwise(checked, _probability(default, "default"), name)


def _probability(p, what: str) -> Fraction:
    value = p if isinstance(p, Fraction) else Fraction(repr(p) if isinstance(p, float) else p)
    if not 0 <= value <= 1:
        raise ValueError(f"{what} = {p} is not a probability")
    return value


@dataclass(frozen=True)
class MMASpec:
    heads: tuple

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(self.heads))
        if not self.heads:
            raise ValueError("MMA needs at least one head")

    name = "mma"

    @property
    def params(self) -> str:
        return "heads=" + ",".join(
            getattr(h, "descriptor", type(h).__name__) for h in self.heads
        )


@dataclass(frozen=True)
class MMAState:
    """Last examined/halted source unit per head (0 before the first unit)."""

    head_positions: tuple

    @classmethod
    def initial(cls, num_heads: int) -> "MMAState":
        return cls((0,) * num_heads)


def mma_decide(ctx: PolicyContext, spec: MMASpec, state: MMAState) -> tuple:
    """Slowest-head rule: WRITE only once every head has halted within the read units.

    Each head scans forward from its previous position and halts at the first
    unit with ``p >= 0.5``. Positions never move backwards.
    """
    i = ctx.tokens_written + 1
    positions = []
    all_halted = True
    for head, prev in zip(spec.heads, state.head_positions):
        j = max(prev, 1)
        if j > ctx.units_read:
            # nothing readable yet for this head
            positions.append(prev)
            all_halted = False
            continue
        while not halts(head(i, j)) and j < ctx.units_read:
            j += 1
        if not halts(head(i, j)):
            all_halted = False
        positions.append(j)

    if all_halted:
        return Action.WRITE, MMAState(tuple(positions))
    if ctx.source_done:
        forced = tuple(max(p, ctx.units_read) for p in positions)
        return Action.WRITE, MMAState(forced)
    return Action.READ, MMAState(tuple(positions))


PolicySpec = Union[WaitKSpec, MMASpec]


@dataclass
class PolicyRunner:
    """Session-local wrapper that carries MMA head state between consults."""

    spec: PolicySpec
    state: Optional[MMAState] = field(default=None)

    def __post_init__(self):
        if isinstance(self.spec, MMASpec) and self.state is None:
            self.state = MMAState.initial(len(self.spec.heads))

    def decide(self, ctx: PolicyContext) -> Action:
        if isinstance(self.spec, WaitKSpec):
            return waitk_decide(ctx, self.spec)
        action, self.state = mma_decide(ctx, self.spec, self.state)
        return action


def parse_heads(spec: str, table_loader: Callable[[str], Mapping] = None) -> list:
    """Parse ``waitk:2,waitk:4,table:PATH[@DEFAULT]`` into stepwise sources."""
    heads = []
    for item in filter(None, (s.strip() for s in spec.split(","))):
        kind, _, arg = item.partition(":")
        if kind == "waitk":
            heads.append(stepwise_from_waitk(int(arg)))
        elif kind == "table":
            path, default = arg, "0"
            if "@" in arg:
                path, default = arg.rsplit("@", 1)
            if table_loader is None:
                raise ValueError("table heads need a table loader")
            heads.append(stepwise_from_table(table_loader(path), Fraction(default), name=path))
        else:
            raise ValueError(f"unknown head kind {kind!r} in {item!r}")
    if not heads:
        raise ValueError(f"no heads in {spec!r}")
    return heads


def describe(spec: PolicySpec) -> tuple:
    return spec.name, spec.params

