"""Corpus-level BLEU over whitespace tokens."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class EvalPair:
    hypothesis: tuple
    reference: tuple

    def __post_init__(self):
        object.__setattr__(self, "hypothesis", tuple(self.hypothesis))
        object.__setattr__(self, "reference", tuple(self.reference))
        if not self.reference:
            raise ValueError("reference must be non-empty")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(pairs: Iterable, max_order: int = 4, smooth: bool = False) -> float:
    """BLEU in [0, 100] from corpus-pooled clipped n-gram counts.

    ``pairs`` holds :class:`EvalPair` or ``(hypothesis, reference)`` token
    sequences. With ``smooth`` set, orders >= 2 use add-one counts.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = ref_len = 0
    n_pairs = 0
    for pair in pairs:
        if not isinstance(pair, EvalPair):
            pair = EvalPair(*pair)
        n_pairs += 1
        hyp_len += len(pair.hypothesis)
        ref_len += len(pair.reference)
        for n in range(1, max_order + 1):
            hyp_counts = _ngrams(pair.hypothesis, n)
            ref_counts = _ngrams(pair.reference, n)
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            totals[n - 1] += sum(hyp_counts.values())
    if n_pairs == 0:
        raise ValueError("corpus_bleu needs at least one pair")
    if hyp_len == 0:
        return 0.0

    log_precision = 0.0
    for n in range(1, max_order + 1):
        m, t = matches[n - 1], totals[n - 1]
        if smooth and n >= 2:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_precision += math.log(m / t) / max_order
    brevity = min(0.0, 1.0 - ref_len / hyp_len)
    return 100.0 * math.exp(log_precision + brevity)
