"""Seeded synthetic corpora for desk-scale sweeps."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .formats import Alignment
from .predecision import Segment
from .stream import SourceStream


@dataclass
class SyntheticCorpus:
    streams: list
    references: dict
    alignments: dict


def synthetic_corpus(
    n: int,
    seed: int = 0,
    min_frames: int = 300,
    max_frames: int = 1500,
    frame_period_ms: int = 10,
    ms_per_token=(270, 270),
    word_ms: int = 270,
    pause_prob: float = 0.0,
) -> SyntheticCorpus:
    """Build ``n`` utterances with references paced at ``ms_per_token`` and word alignments.

    Each utterance draws its token pace uniformly from the ``ms_per_token``
    range, so a constant pair gives a uniform speaking rate. Word durations
    are uniform in ``[word_ms / 2, 3 * word_ms / 2]`` ms; a word shorter than
    ``word_ms / 2`` at the end of the utterance is merged into its predecessor.
    """
    rng = random.Random(seed)
    width = len(str(max(n - 1, 0)))
    streams, refs, aligns = [], {}, {}
    for u in range(n):
        utt_id = f"utt{u:0{width}d}"
        frames = rng.randint(min_frames, max_frames)
        duration = frames * frame_period_ms
        pace = rng.uniform(*ms_per_token)
        n_tokens = max(1, round(duration / pace))
        streams.append(SourceStream(utt_id, frames, frame_period_ms))
        refs[utt_id] = [f"t{i}" for i in range(n_tokens)]

        bounds = []
        cursor = 0
        while cursor < duration:
            length = rng.randint(word_ms // 2, word_ms * 3 // 2)
            end = min(cursor + length, duration)
            if bounds and end - cursor < word_ms // 2:
                bounds[-1] = (bounds[-1][0], end)
            else:
                bounds.append((cursor, end))
            cursor = end
            if pause_prob and rng.random() < pause_prob:
                cursor += rng.randint(20, 200)
        segments = tuple(
            Segment(f"w{i}", start, end) for i, (start, end) in enumerate(bounds) if end > start
        )
        aligns[utt_id] = Alignment(utt_id, "word", segments)
    return SyntheticCorpus(streams, refs, aligns)
