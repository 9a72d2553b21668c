"""Token-producing agents that stand in for a translation decoder.

An agent's ``next_token`` returns the next target token, or ``None`` to end
the hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Protocol, Sequence


class AgentError(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentContext:
    tokens: tuple
    frames_read: int
    units_read: int
    num_frames: int
    features: Optional[Sequence] = None


class Agent(Protocol):
    def next_token(self, context: AgentContext) -> Optional[str]: ...


class OracleAgent:
    """Emits the reference verbatim, then END."""

    def __init__(self, reference: Sequence[str]):
        if not reference:
            raise ValueError("oracle agent needs a non-empty reference")
        self.reference = tuple(reference)
        self._ended = False

    def next_token(self, context: AgentContext) -> Optional[str]:
        if self._ended:
            raise AgentError("agent called after END")
        i = len(context.tokens)
        if i >= len(self.reference):
            self._ended = True
            return None
        return self.reference[i]


class CoverageOracleAgent(OracleAgent):
    """Reference token ``i`` is only known once ``ceil(i/|ref| * |X|)`` frames were read.

    Earlier writes produce ``placeholder``, so quality grows with the amount of
    source each token waited for.
    """

    def __init__(self, reference: Sequence[str], num_frames: int, placeholder: str = "<unk>"):
        super().__init__(reference)
        if num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        self.num_frames = num_frames
        self.placeholder = placeholder

    def required_frames(self, position: int) -> int:
        return math.ceil(Fraction(position, len(self.reference)) * self.num_frames)

    def next_token(self, context: AgentContext) -> Optional[str]:
        token = super().next_token(context)
        if token is None:
            return None
        position = len(context.tokens) + 1
        if context.frames_read >= self.required_frames(position):
            return token
        return self.placeholder


def oracle_agent(reference: Sequence[str]) -> OracleAgent:
    return OracleAgent(reference)


def coverage_oracle_agent(
    reference: Sequence[str], num_frames: int, placeholder: str = "<unk>"
) -> CoverageOracleAgent:
    return CoverageOracleAgent(reference, num_frames, placeholder)


AGENT_KINDS = ("oracle", "coverage")


def make_agent(kind: str, reference: Sequence[str], num_frames: int, placeholder: str = "<unk>"):
    if kind == "oracle":
        return OracleAgent(reference)
    if kind == "coverage":
        return CoverageOracleAgent(reference, num_frames, placeholder)
    raise ValueError(f"unknown agent {kind!r}; expected one of {AGENT_KINDS}")
