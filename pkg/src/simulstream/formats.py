"""On-disk formats: manifests, references, alignments, stepwise tables,
feature files, traces and CSV reports.

Every text format except the reference TSV and the report is one JSON object
per line, keyed by utterance id.
"""

from __future__ import annotations

import csv
import io
import json
import re
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .predecision import LEVELS, Segment
from .stream import (
    DelayRecord,
    ReadEvent,
    SourceStream,
    Trace,
    TriggerEvent,
    WriteEvent,
    as_ms,
)


class FormatError(ValueError):
    pass


def _json_lines(path) -> Iterator[tuple]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line, parse_float=Fraction)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None


def encode_number(value):
    """JSON-safe exact number: int, float when it round-trips, else ``"p/q"``."""
    value = Fraction(value)
    if value.denominator == 1:
        return value.numerator
    as_float = float(value)
    if Fraction(repr(as_float)) == value:
        return as_float
    return f"{value.numerator}/{value.denominator}"


# -- manifest -----------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    num_frames: int
    frame_period_ms: Fraction
    feature_file: Optional[str] = None
    alignment_id: Optional[str] = None

    def to_stream(self) -> SourceStream:
        return SourceStream(self.id, self.num_frames, self.frame_period_ms)


def read_manifest(path) -> list:
    entries = []
    seen = set()
    for lineno, rec in _json_lines(path):
        try:
            entry = ManifestEntry(
                id=str(rec["id"]),
                num_frames=int(rec["num_frames"]),
                frame_period_ms=as_ms(rec["frame_period_ms"]),
                feature_file=rec.get("feature_file"),
                alignment_id=rec.get("alignment_id"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad manifest entry ({exc})") from None
        if entry.num_frames < 1:
            raise FormatError(f"{path}:{lineno}: num_frames must be >= 1")
        if entry.id in seen:
            raise FormatError(f"{path}:{lineno}: duplicate id {entry.id!r}")
        seen.add(entry.id)
        entries.append(entry)
    if not entries:
        raise FormatError(f"{path}: empty manifest")
    return entries


def write_manifest(path, entries: Iterable[ManifestEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            rec = {
                "id": e.id,
                "num_frames": e.num_frames,
                "frame_period_ms": encode_number(e.frame_period_ms),
            }
            if e.feature_file is not None:
                rec["feature_file"] = e.feature_file
            if e.alignment_id is not None:
                rec["alignment_id"] = e.alignment_id
            fh.write(json.dumps(rec) + "\n")


# -- references ---------------------------------------------------------------


def read_references(path) -> dict:
    refs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'id<TAB>text'")
            utt_id, text = line.split("\t", 1)
            if utt_id in refs:
                raise FormatError(f"{path}:{lineno}: duplicate id {utt_id!r}")
            tokens = text.split()
            if not tokens:
                raise FormatError(f"{path}:{lineno}: empty reference for {utt_id!r}")
            refs[utt_id] = tokens
    return refs


def write_references(path, refs: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id, tokens in refs.items():
            fh.write(f"{utt_id}\t{' '.join(tokens)}\n")


# -- alignments / stepwise tables ---------------------------------------------


@dataclass(frozen=True)
class Alignment:
    id: str
    level: str
    segments: tuple


def read_alignments(path) -> dict:
    out = {}
    for lineno, rec in _json_lines(path):
        try:
            level = rec.get("level", "word")
            if level not in LEVELS:
                raise ValueError(f"level {level!r}")
            segments = tuple(
                Segment(str(s["label"]), as_ms(s["start_ms"]), as_ms(s["end_ms"]))
                for s in rec["segments"]
            )
            utt_id = str(rec["id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad alignment record ({exc})") from None
        if utt_id in out:
            raise FormatError(f"{path}:{lineno}: duplicate id {utt_id!r}")
        out[utt_id] = Alignment(utt_id, level, segments)
    return out


def write_alignments(path, alignments: Iterable[Alignment]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in alignments:
            rec = {
                "id": a.id,
                "level": a.level,
                "segments": [
                    {
                        "label": s.label,
                        "start_ms": encode_number(s.start_ms),
                        "end_ms": encode_number(s.end_ms),
                    }
                    for s in a.segments
                ],
            }
            fh.write(json.dumps(rec) + "\n")


def read_stepwise_table(path) -> dict:
    table = {}
    for lineno, rec in _json_lines(path):
        try:
            key = (int(rec["i"]), int(rec["j"]))
            table[key] = Fraction(rec["p"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad stepwise record ({exc})") from None
    return table


# -- feature files ------------------------------------------------------------

FEATURE_MAGIC = b"SSTF"
_FEATURE_HEADER = struct.Struct("<4sII4x")


def write_features(path, features) -> None:
    arr = np.ascontiguousarray(features, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("features must be a [frames x dim] matrix")
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_features(path) -> np.ndarray:
    """Load a ``[frames x dim]`` float32 matrix written by :func:`write_features`."""
    data = Path(path).read_bytes()
    if len(data) < _FEATURE_HEADER.size:
        raise FormatError(f"{path}: truncated feature header")
    magic, frames, dim = _FEATURE_HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    body = data[_FEATURE_HEADER.size :]
    if len(body) != frames * dim * 4:
        raise FormatError(f"{path}: expected {frames}x{dim} floats, found {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").reshape(frames, dim)


# -- traces -------------------------------------------------------------------


def trace_to_record(trace: Trace, config: Optional[dict] = None) -> dict:
    events = []
    for e in trace.events:
        if isinstance(e, ReadEvent):
            events.append({"t": "R", "frame": e.frame})
        elif isinstance(e, TriggerEvent):
            events.append({"t": "T", "state": e.state, "forced": e.forced})
        else:
            w = {
                "t": "W",
                "token": e.token,
                "n": e.delay.frames_read,
                "d_nca": encode_number(e.delay.d_nca_ms),
            }
            if e.delay.d_ca_ms is not None:
                w["d_ca"] = encode_number(e.delay.d_ca_ms)
            events.append(w)
    rec = {
        "id": trace.stream_id,
        "num_frames": trace.num_frames,
        "frame_period_ms": encode_number(trace.frame_period_ms),
        "events": events,
    }
    if config is not None:
        rec["config"] = config
    return rec


def trace_to_json(trace: Trace, config: Optional[dict] = None) -> str:
    return json.dumps(trace_to_record(trace, config), ensure_ascii=False)


def record_to_trace(rec: dict) -> tuple:
    """Inverse of :func:`trace_to_record`; returns ``(trace, config)``."""
    trace = Trace(str(rec["id"]), int(rec["num_frames"]), as_ms(rec["frame_period_ms"]))
    for ev in rec["events"]:
        kind = ev.get("t")
        if kind == "R":
            trace.read(int(ev["frame"]))
        elif kind == "T":
            trace.trigger(int(ev["state"]), bool(ev.get("forced", False)))
        elif kind == "W":
            d_ca = ev.get("d_ca")
            record = DelayRecord(
                token_index=len(trace.delays) + 1,
                frames_read=int(ev["n"]),
                d_nca_ms=as_ms(ev["d_nca"]),
                d_ca_ms=None if d_ca is None else as_ms(d_ca),
            )
            trace.events.append(WriteEvent(str(ev["token"]), record))
            trace.delays.append(record)
        else:
            raise FormatError(f"unknown event type {kind!r} in trace {trace.stream_id!r}")
    return trace, rec.get("config", {})


def read_traces(path) -> list:
    out = []
    for lineno, rec in _json_lines(path):
        try:
            out.append(record_to_trace(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad trace record ({exc})") from None
    return out


def write_traces(path_or_fh, items: Iterable[tuple]) -> None:
    """Write ``(trace, config)`` pairs, one JSON line each."""
    if isinstance(path_or_fh, (str, Path)):
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            write_traces(fh, items)
        return
    for trace, config in items:
        path_or_fh.write(trace_to_json(trace, config) + "\n")


# -- report -------------------------------------------------------------------

REPORT_HEADER = (
    "policy",
    "params",
    "pre_decision",
    "cost_model",
    "agent",
    "bleu",
    "al_nca_ms",
    "al_ca_ms",
    "mean_ca_gap_ms",
    "ref_fallback",
)


def _natural_key(text: str) -> tuple:
    return tuple(
        (0, int(part), "") if part.isdigit() else (1, 0, part)
        for part in re.split(r"(\d+)", text)
        if part
    )


def row_sort_key(row) -> tuple:
    return (
        row.policy,
        _natural_key(row.params),
        _natural_key(row.pre_decision),
        _natural_key(row.cost_model),
        row.agent,
    )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, float, Fraction)):
        return f"{float(value):.3f}"
    return str(value)


def format_report(rows: Iterable) -> str:
    """CSV text with a fixed header; rows sorted by policy name then params."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for row in sorted(rows, key=row_sort_key):
        writer.writerow(
            [
                row.policy,
                row.params,
                row.pre_decision,
                row.cost_model,
                row.agent,
                _cell(row.bleu),
                _cell(row.al_nca_ms),
                _cell(row.al_ca_ms),
                _cell(row.mean_ca_gap_ms),
                _cell(row.ref_fallback),
            ]
        )
    return buf.getvalue()
