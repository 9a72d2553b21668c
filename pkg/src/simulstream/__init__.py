"""Deterministic simulator and metrics for simultaneous speech-translation policies."""

from .agents import AgentContext, AgentError, CoverageOracleAgent, OracleAgent, coverage_oracle_agent, oracle_agent
from .bleu import EvalPair, corpus_bleu
from .latency import (
    ALInput,
    ObjectiveInput,
    average_lagging,
    full_read_index,
    regularized_objective,
    tau_full_read,
    trace_average_lagging,
)
from .policy import (
    Action,
    MMASpec,
    MMAState,
    PolicyContext,
    WaitKSpec,
    mma_decide,
    stepwise_from_table,
    stepwise_from_waitk,
    waitk_decide,
)
from .predecision import (
    AlignmentTable,
    FixedPreDecision,
    Segment,
    TriggerDecision,
    boundary_stats,
    build_alignment_table,
    decision_points,
    fixed_trigger,
    flexible_trigger,
)
from .simulator import (
    CostModel,
    FlexiblePreDecision,
    SessionConfig,
    SessionError,
    SweepConfig,
    SweepRow,
    report_rows,
    run_corpus,
    run_session,
    run_sweep,
    summarize,
)
from .stream import (
    DelayRecord,
    EncoderStateSeq,
    Hypothesis,
    SourceStream,
    Trace,
    encoder_state_count,
    nca_delay,
    validate_trace,
)

__version__ = "0.1.0"
