"""Session simulation: stream frames, fire pre-decision triggers, consult the policy,
and log per-token NCA/CA delays under a deterministic cost model."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from .agents import AgentContext, AgentError, make_agent
from .bleu import corpus_bleu
from .latency import trace_average_lagging
from .policy import Action, PolicyContext, PolicyRunner, PolicySpec
from .predecision import (
    AlignmentTable,
    FixedPreDecision,
    PreDecision,
    build_alignment_table,
    trigger,
)
from .stream import ReadEvent, SourceStream, Trace, as_ms, encoder_state_count, fmt_ms

logger = logging.getLogger(__name__)

ENCODER_MODES = ("incremental", "recompute")
CLOCKS = ("realtime", "sequential")


class SessionError(RuntimeError):
    pass


@dataclass(frozen=True)
class CostModel:
    """Simulated computation costs in milliseconds.

    ``incremental`` charges ``cost_per_state_ms`` once per new encoder state.
    ``recompute`` re-encodes the whole prefix at every decision point, costing
    ``cost_per_state_ms`` times the number of states available.

    With the ``realtime`` clock, computation overlaps with waiting for speech:
    reading frame ``t`` sets ``now = max(now, t * T_s)``. With ``sequential``,
    every frame adds ``T_s`` on top of all computation so far, so the CA delay
    is speech duration plus cumulative compute.
    """

    encoder_mode: str = "incremental"
    cost_per_state_ms: Fraction = Fraction(0)
    cost_per_decision_ms: Fraction = Fraction(0)
    cost_per_token_ms: Fraction = Fraction(0)
    clock: str = "realtime"
    wall: bool = False

    def __post_init__(self):
        for name in ("cost_per_state_ms", "cost_per_decision_ms", "cost_per_token_ms"):
            value = as_ms(getattr(self, name))
            if value < 0:
                raise ValueError(f"{name} must be >= 0")
            object.__setattr__(self, name, value)
        if self.encoder_mode not in ENCODER_MODES:
            raise ValueError(f"encoder_mode must be one of {ENCODER_MODES}")
        if self.clock not in CLOCKS:
            raise ValueError(f"clock must be one of {CLOCKS}")

    @classmethod
    def parse(cls, spec: str) -> "CostModel":
        """Parse ``zero``, ``wall`` or ``MODE[:STATE][,decision=D][,token=T][,clock=C][,wall]``.

        >>> CostModel.parse("recompute:2").cost_per_state_ms
        Fraction(2, 1)
        """
        spec = spec.strip()
        if spec == "zero":
            return cls()
        if spec == "wall":
            return cls(wall=True)
        mode, _, rest = spec.partition(":")
        kwargs = {"encoder_mode": mode}
        keys = {
            "state": "cost_per_state_ms",
            "decision": "cost_per_decision_ms",
            "token": "cost_per_token_ms",
            "clock": "clock",
        }
        for pos, item in enumerate(filter(None, (s.strip() for s in rest.split(",")))):
            if item == "wall":
                kwargs["wall"] = True
            elif "=" in item:
                key, value = item.split("=", 1)
                if key not in keys:
                    raise ValueError(f"unknown cost-model key {key!r} in {spec!r}")
                kwargs[keys[key]] = value if key == "clock" else as_ms(value)
            elif pos == 0:
                kwargs["cost_per_state_ms"] = as_ms(item)
            else:
                raise ValueError(f"cannot parse cost-model item {item!r} in {spec!r}")
        return cls(**kwargs)

    @property
    def descriptor(self) -> str:
        if self.is_zero:
            # every zero-cost variant runs on the speech clock alone
            return "zero"
        parts = [fmt_ms(self.cost_per_state_ms)]
        if self.cost_per_decision_ms:
            parts.append(f"decision={fmt_ms(self.cost_per_decision_ms)}")
        if self.cost_per_token_ms:
            parts.append(f"token={fmt_ms(self.cost_per_token_ms)}")
        if self.clock != "realtime":
            parts.append(f"clock={self.clock}")
        if self.wall:
            parts.append("wall")
        return f"{self.encoder_mode}:" + ",".join(parts)

    @property
    def is_zero(self) -> bool:
        return not (
            self.wall
            or self.cost_per_state_ms
            or self.cost_per_decision_ms
            or self.cost_per_token_ms
        )


class SimClock:
    """Monotone session clock counting integer ticks of ``1/scale`` ms."""

    def __init__(self, scale: int = 1):
        self.scale = scale
        self.ticks = 0

    @property
    def now_ms(self) -> Fraction:
        return Fraction(self.ticks, self.scale)

    def to_ticks(self, ms) -> int:
        ticks = Fraction(ms) * self.scale
        if ticks.denominator != 1:
            raise ValueError(f"{ms}ms is not representable at scale {self.scale}")
        return int(ticks)

    def advance(self, ticks: int) -> int:
        if ticks < 0:
            raise ValueError("clock cannot move backwards")
        self.ticks += ticks
        return self.ticks

    def wait_until(self, ticks: int) -> int:
        if ticks > self.ticks:
            self.ticks = ticks
        return self.ticks


def _tick_scale(*values: Fraction, wall: bool = False) -> int:
    scale = 10**6 if wall else 1
    for v in values:
        scale = math.lcm(scale, v.denominator)
    return scale


@dataclass
class SessionConfig:
    pre_decision: PreDecision
    policy: PolicySpec
    agent: object
    cost_model: CostModel = field(default_factory=CostModel)
    max_tokens: int = 1000

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def _check_config(stream: SourceStream, config: SessionConfig) -> int:
    pre = config.pre_decision
    r_e = pre.subsample_factor
    if isinstance(pre, FixedPreDecision):
        if pre.frame_period_ms != stream.frame_period_ms:
            raise SessionError(
                f"stream {stream.id!r}: pre-decision frame period {pre.frame_period_ms}ms "
                f"!= stream frame period {stream.frame_period_ms}ms"
            )
    else:
        expected = encoder_state_count(stream.num_frames, r_e)
        if pre.num_states != expected:
            raise SessionError(
                f"stream {stream.id!r}: alignment table has {pre.num_states} states, "
                f"stream has {expected}"
            )
    return r_e


def run_session(stream: SourceStream, config: SessionConfig) -> Trace:
    """Simulate one utterance and return its trace.

    Frames are read one at a time. Every ``r_e`` frames an encoder state is
    produced and the pre-decision module is asked whether to trigger; the last
    frame always triggers. On a trigger the policy is consulted until it says
    READ (several WRITEs per trigger are allowed). Each WRITE asks the agent
    for a token and records ``n``, ``d_nca = T_s * n`` and ``d_ca = now``.
    The session ends when the agent returns END or ``max_tokens`` is reached.
    """
    r_e = _check_config(stream, config)
    costs = config.cost_model
    pre = config.pre_decision
    N = stream.num_frames
    clock = SimClock(
        _tick_scale(
            stream.frame_period_ms,
            costs.cost_per_state_ms,
            costs.cost_per_decision_ms,
            costs.cost_per_token_ms,
            wall=costs.wall,
        )
    )
    scale = clock.scale
    frame_ticks = clock.to_ticks(stream.frame_period_ms)
    state_ticks = clock.to_ticks(costs.cost_per_state_ms)
    decision_ticks = clock.to_ticks(costs.cost_per_decision_ms)
    token_ticks = clock.to_ticks(costs.cost_per_token_ms)
    wall_ticks_per_ns = clock.scale // 10**6 if costs.wall else 0
    realtime = costs.clock == "realtime"
    recompute = costs.encoder_mode == "recompute"
    fixed_period = pre.trigger_period if isinstance(pre, FixedPreDecision) else None

    trace = Trace(stream.id, N, stream.frame_period_ms)
    policy = PolicyRunner(config.policy)
    agent = config.agent
    tokens = []
    states = 0
    units = 0

    events = trace.events
    now = 0  # clock ticks; mirrors SimClock semantics without per-frame calls
    for frame in range(1, N + 1):
        events.append(ReadEvent(frame))
        if realtime:
            arrival = frame * frame_ticks
            if arrival > now:
                now = arrival
        else:
            now += frame_ticks

        fired = False
        if frame % r_e == 0:
            states += 1
            if not recompute:
                now += state_ticks
            if fixed_period is not None:
                fired = states % fixed_period == 0
            else:
                fired = trigger(states, pre).fired
        source_done = frame == N
        if not (fired or source_done):
            continue

        if source_done:
            trace.source_exhausted_at_event = len(events) - 1
        units += 1
        trace.trigger(states, forced=not fired)
        if recompute:
            now += state_ticks * states

        finished = False
        while len(tokens) < config.max_tokens:
            ctx = PolicyContext(len(tokens), units, source_done)
            started = time.perf_counter_ns() if costs.wall else 0
            action = policy.decide(ctx)
            now += decision_ticks
            if action is Action.READ:
                if source_done:
                    raise SessionError(f"stream {stream.id!r}: policy READ after source end")
                if costs.wall:
                    now += (time.perf_counter_ns() - started) * wall_ticks_per_ns
                break
            agent_ctx = AgentContext(
                tokens=tuple(tokens),
                frames_read=frame,
                units_read=units,
                num_frames=N,
                features=None if stream.features is None else stream.features[:frame],
            )
            try:
                token = agent.next_token(agent_ctx)
            except AgentError as exc:
                raise SessionError(f"stream {stream.id!r}: {exc}") from exc
            now += token_ticks
            if costs.wall:
                now += (time.perf_counter_ns() - started) * wall_ticks_per_ns
            if token is None:
                finished = True
                break
            tokens.append(token)
            trace.write(token, frame, Fraction(now, scale))
        else:
            finished = True
        if finished:
            break
    return trace


@dataclass(frozen=True)
class FlexiblePreDecision:
    """Oracle boundaries for a corpus: per-stream segments turned into tables on demand."""

    level: str
    segments: Mapping
    subsample_factor: int = 4

    @property
    def descriptor(self) -> str:
        return f"flexible:{self.level}"

    def table_for(self, stream: SourceStream) -> AlignmentTable:
        try:
            segments = self.segments[stream.id]
        except KeyError:
            raise SessionError(f"no alignment for stream {stream.id!r}") from None
        return build_alignment_table(
            segments,
            encoder_state_count(stream.num_frames, self.subsample_factor),
            self.subsample_factor,
            stream.frame_period_ms,
            self.level,
        )


@dataclass(frozen=True)
class SweepConfig:
    """One point of a sweep; agents and alignment tables are built per stream."""

    policy: PolicySpec
    pre_decision: Union[FixedPreDecision, FlexiblePreDecision]
    cost_model: CostModel = field(default_factory=CostModel)
    agent: str = "oracle"
    max_tokens: int = 1000
    placeholder: str = "<unk>"

    def session_for(self, stream: SourceStream, reference: Sequence[str]) -> SessionConfig:
        pre = self.pre_decision
        if isinstance(pre, FlexiblePreDecision):
            pre = pre.table_for(stream)
        elif pre.frame_period_ms != stream.frame_period_ms:
            pre = FixedPreDecision(pre.step_ms, stream.frame_period_ms, pre.subsample_factor)
        agent = make_agent(self.agent, reference, stream.num_frames, self.placeholder)
        return SessionConfig(pre, self.policy, agent, self.cost_model, self.max_tokens)

    def echo(self) -> dict:
        return {
            "policy": self.policy.name,
            "params": self.policy.params,
            "pre_decision": self.pre_decision.descriptor,
            "cost_model": self.cost_model.descriptor,
            "agent": self.agent,
        }


@dataclass(frozen=True)
class SweepRow:
    policy: str
    params: str
    pre_decision: str
    cost_model: str
    agent: str
    bleu: Optional[float]
    al_nca_ms: Fraction
    al_ca_ms: Optional[Fraction]
    mean_ca_gap_ms: Optional[Fraction]
    ref_fallback: bool
    sessions: int


def summarize(
    traces: Sequence[Trace],
    references: Optional[Mapping] = None,
    echo: Optional[Mapping] = None,
    latency: str = "both",
) -> SweepRow:
    """Corpus metrics for one configuration.

    AL columns are means of per-session AL; the CA gap is the mean of
    ``d_ca - d_nca`` over every emitted token. Without references, BLEU is
    left empty and ``|Y*|`` falls back to the hypothesis length.
    """
    if not traces:
        raise ValueError("no traces to summarize")
    echo = dict(echo or {})
    want_ca = latency in ("both", "ca")
    want_nca = latency in ("both", "nca")
    if latency not in ("both", "ca", "nca"):
        raise ValueError(f"unknown latency flavor {latency!r}")

    with_ca = [t.has_ca for t in traces]
    if want_ca and not all(with_ca):
        missing = sorted(t.stream_id for t in traces if not t.has_ca)
        raise ValueError(
            "computation-aware latency requested but traces lack CA delays: "
            + ", ".join(missing[:5])
        )

    pairs = []
    al_nca = []
    al_ca = []
    gaps = []
    for trace in traces:
        if not trace.delays:
            raise ValueError(f"trace {trace.stream_id!r} has no emitted tokens")
        ref_len = None
        if references is not None:
            if trace.stream_id not in references:
                raise ValueError(f"no reference for trace {trace.stream_id!r}")
            ref = references[trace.stream_id]
            ref_len = len(ref)
            pairs.append((trace.tokens, ref))
        if want_nca:
            al_nca.append(trace_average_lagging(trace, ref_len, "nca"))
        if want_ca:
            al_ca.append(trace_average_lagging(trace, ref_len, "ca"))
            gaps.extend(d.d_ca_ms - d.d_nca_ms for d in trace.delays)

    return SweepRow(
        policy=echo.get("policy", ""),
        params=echo.get("params", ""),
        pre_decision=echo.get("pre_decision", ""),
        cost_model=echo.get("cost_model", ""),
        agent=echo.get("agent", ""),
        bleu=corpus_bleu(pairs) if pairs else None,
        al_nca_ms=sum(al_nca, Fraction(0)) / len(al_nca) if al_nca else None,
        al_ca_ms=sum(al_ca, Fraction(0)) / len(al_ca) if al_ca else None,
        mean_ca_gap_ms=sum(gaps, Fraction(0)) / len(gaps) if gaps else None,
        ref_fallback=references is None,
        sessions=len(traces),
    )


def default_workers() -> int:
    env = os.environ.get("SIMULSTREAM_THREADS")
    if env:
        workers = int(env)
        if workers < 1:
            raise ValueError("SIMULSTREAM_THREADS must be >= 1")
        return workers
    return os.cpu_count() or 1


def _run_task(task) -> Trace:
    stream, config, reference = task
    try:
        return run_session(stream, config.session_for(stream, reference))
    except SessionError:
        raise
    except Exception as exc:
        raise SessionError(f"stream {stream.id!r}: {exc}") from exc


def run_corpus(
    streams: Sequence[SourceStream],
    configs: Sequence[SweepConfig],
    references: Mapping,
    workers: Optional[int] = None,
) -> list:
    """Traces for every (config, stream); one list per config, sorted by stream id."""
    if not streams or not configs:
        raise ValueError("need at least one stream and one config")
    ordered = sorted(streams, key=lambda s: s.id)
    for stream in ordered:
        if stream.id not in references:
            raise SessionError(f"no reference for stream {stream.id!r}")
    tasks = [(s, c, references[s.id]) for c in configs for s in ordered]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_task, tasks, chunksize=chunk))
    else:
        traces = [_run_task(t) for t in tasks]
    n = len(ordered)
    return [traces[i * n : (i + 1) * n] for i in range(len(configs))]


def run_sweep(
    streams: Sequence[SourceStream],
    configs: Sequence[SweepConfig],
    references: Mapping,
    workers: Optional[int] = None,
) -> list:
    """One :class:`SweepRow` per config, in the order given."""
    per_config = run_corpus(streams, configs, references, workers)
    rows = []
    for config, traces in zip(configs, per_config):
        rows.append(summarize(traces, references, config.echo()))
        logger.debug("swept %s %s over %d streams", config.policy.name, config.policy.params, len(traces))
    return rows


ECHO_KEYS = ("policy", "params", "pre_decision", "cost_model", "agent")


def report_rows(
    items: Sequence[tuple],
    references: Optional[Mapping] = None,
    latency: str = "both",
) -> list:
    """Group ``(trace, config)`` pairs by their configuration echo and summarize each group."""
    if not items:
        raise ValueError("no traces to report")
    groups = {}
    for trace, config in items:
        key = tuple(str(config.get(k, "")) for k in ECHO_KEYS)
        group = groups.setdefault(key, {})
        if trace.stream_id in group:
            raise ValueError(f"duplicate trace for stream {trace.stream_id!r} in group {key}")
        group[trace.stream_id] = trace
    rows = []
    for key, group in groups.items():
        traces = [group[sid] for sid in sorted(group)]
        rows.append(summarize(traces, references, dict(zip(ECHO_KEYS, key)), latency))
    return rows
