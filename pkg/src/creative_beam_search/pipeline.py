"""End-to-end generate-and-test pipeline and its configuration.

One run renders the instruction prompt, generates a diverse candidate set
with diverse beam search, asks the model itself to pick the most creative
candidate via the rotation-calibrated vote, and returns the winner. The
standard-sampling arm shares the identical rendered prompt.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .decode import (
    DecodeConfig,
    SamplingConfig,
    diverse_beam_search,
    sample_nucleus,
    top_k_candidates,
)
from .judge import DEFAULT_MAX_JUDGE_TOKENS, Candidate, Verdict, judge
from .model import ChatMessage, LanguageModel, Role, detokenize, render_chat

GENERATION_INSTRUCTION = "Provide only one answer without any explanation."


class ConfigError(ValueError):
    """A configuration file or flag set could not be validated."""


@dataclass(frozen=True)
class CbsConfig:
    """Full pipeline configuration; defaults reproduce the reference setup."""

    decode: DecodeConfig = field(default_factory=DecodeConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    max_judge_tokens: int = DEFAULT_MAX_JUDGE_TOKENS
    model: str = "table"
    remote_endpoint: str | None = None
    ngram_corpus: str | None = None
    ngram_order: int = 2
    ngram_alpha: float = 1.0

    def __post_init__(self):
        if self.max_judge_tokens < 1:
            raise ConfigError("max_judge_tokens must be >= 1")
        if self.model not in ("table", "ngram", "remote"):
            raise ConfigError(f"unknown model selector: {self.model!r}")


@dataclass(frozen=True)
class CbsResult:
    output_text: str
    candidates: tuple[Candidate, ...]
    verdict: Verdict
    dbs_top1_text: str
    cbs_equals_dbs: bool

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def generation_messages(user_input: str) -> list[ChatMessage]:
    """The single user message both pipeline arms are prompted with."""
    return [ChatMessage(Role.USER, f"{user_input}. {GENERATION_INSTRUCTION}")]


def run_cbs(
    model: LanguageModel,
    user_input: str,
    cfg: CbsConfig,
    judge_model: LanguageModel | None = None,
) -> CbsResult:
    """Generate candidates, self-judge, and return the elected output.

    ``judge_model`` defaults to the generating model (self-evaluation);
    passing a different model is useful for scripted judges in tests.
    """
    judge_model = judge_model if judge_model is not None else model
    prompt_ids = render_chat(generation_messages(user_input), model.vocabulary)
    beams = diverse_beam_search(model, prompt_ids, cfg.decode)
    k = min(cfg.decode.num_candidates, len(beams))
    candidates = top_k_candidates(beams, k, model.vocabulary)
    verdict = judge(judge_model, user_input, candidates, cfg.max_judge_tokens)
    output_text = candidates[verdict.winner].text
    dbs_top1_text = candidates[0].text
    return CbsResult(
        output_text=output_text,
        candidates=tuple(candidates),
        verdict=verdict,
        dbs_top1_text=dbs_top1_text,
        cbs_equals_dbs=output_text == dbs_top1_text,
    )


def run_standard(model: LanguageModel, user_input: str, cfg: CbsConfig) -> str:
    """The baseline arm: nucleus sampling from the identical rendered prompt."""
    prompt_ids = render_chat(generation_messages(user_input), model.vocabulary)
    out = sample_nucleus(model, prompt_ids, cfg.sampling, cfg.decode.max_new_tokens)
    if out and out[-1] == model.vocabulary.eos:
        out = out[:-1]
    return detokenize(out, model.vocabulary)


# Flat key = value config file; every key mirrors a config field.
_INT_KEYS = {"beam_budget", "num_groups", "max_new_tokens", "num_candidates",
             "seed", "max_judge_tokens", "ngram_order"}
_FLOAT_KEYS = {"diversity_penalty", "temperature", "top_p", "ngram_alpha"}
_STR_KEYS = {"model", "remote_endpoint", "ngram_corpus"}


def parse_config_text(text: str, overrides: dict | None = None) -> CbsConfig:
    """Build a CbsConfig from flat ``key = value`` lines plus overrides."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer, got {value!r}")
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be a number, got {value!r}")
        elif key in _STR_KEYS:
            values[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    decode_fields = {k: values.pop(k) for k in
                     ("beam_budget", "num_groups", "diversity_penalty",
                      "max_new_tokens", "num_candidates") if k in values}
    sampling_fields = {k: values.pop(k) for k in
                       ("temperature", "top_p", "seed") if k in values}
    try:
        return CbsConfig(
            decode=DecodeConfig(**decode_fields),
            sampling=SamplingConfig(**sampling_fields),
            **values,  # type: ignore[arg-type]
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, overrides: dict | None = None) -> CbsConfig:
    """Read a flat config file (optional) and apply CLI overrides."""
    if path is None:
        return parse_config_text("", overrides)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, overrides)
