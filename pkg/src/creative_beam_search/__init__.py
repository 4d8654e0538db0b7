"""Creative beam search: diverse candidate generation plus a
rotation-calibrated self-vote, with the A/B study harness used to
evaluate it against plain nucleus sampling."""

from .decode import (
    Beam,
    DecodeConfig,
    SamplingConfig,
    beam_search,
    diverse_beam_search,
    diverse_beam_search_with_trace,
    greedy_decode,
    hamming_penalty,
    nucleus_filter,
    sample_nucleus,
    top_k_candidates,
)
from .judge import Candidate, EvalPrompt, Verdict, Vote, aggregate, build_eval_prompts, judge, parse_vote
from .model import (
    ChatMessage,
    LanguageModel,
    NgramLM,
    Role,
    TableLM,
    UnknownTokenError,
    Vocabulary,
    detokenize,
    render_chat,
    tokenize,
    train_ngram,
)
from .pipeline import CbsConfig, CbsResult, ConfigError, run_cbs, run_standard
from .remote import LogprobServer, RemoteLM, RemoteProtocolError, RemoteTransportError
from .study import (
    AlreadyAnsweredError,
    Arm,
    Choice,
    ComparisonRecord,
    Preference,
    RecordLog,
    RecordNotFoundError,
    StatsTable,
    StudyService,
    compute_stats,
    random_retention_probability,
)

__version__ = "0.1.0"

__all__ = [
    "AlreadyAnsweredError",
    "Arm",
    "Beam",
    "Candidate",
    "CbsConfig",
    "CbsResult",
    "ChatMessage",
    "Choice",
    "ComparisonRecord",
    "ConfigError",
    "DecodeConfig",
    "EvalPrompt",
    "LanguageModel",
    "LogprobServer",
    "NgramLM",
    "Preference",
    "RecordLog",
    "RecordNotFoundError",
    "RemoteLM",
    "RemoteProtocolError",
    "RemoteTransportError",
    "Role",
    "SamplingConfig",
    "StatsTable",
    "StudyService",
    "TableLM",
    "UnknownTokenError",
    "Verdict",
    "Vocabulary",
    "Vote",
    "aggregate",
    "beam_search",
    "build_eval_prompts",
    "compute_stats",
    "detokenize",
    "diverse_beam_search",
    "diverse_beam_search_with_trace",
    "greedy_decode",
    "hamming_penalty",
    "judge",
    "nucleus_filter",
    "parse_vote",
    "random_retention_probability",
    "render_chat",
    "run_cbs",
    "run_standard",
    "sample_nucleus",
    "tokenize",
    "top_k_candidates",
    "train_ngram",
]
