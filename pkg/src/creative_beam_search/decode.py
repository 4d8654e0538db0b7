"""Decoding strategies: greedy, temperature + nucleus sampling, beam search,
and diverse beam search with Hamming diversity.

Scoring conventions shared by every strategy here:
  - scores are cumulative log-probabilities, never length-normalized;
  - zero-probability continuations (-inf) are never selectable, even when
    every finite alternative carries a diversity penalty;
  - exact score ties break by lexicographic token-id order, which makes
    all strategies fully deterministic (sampling is deterministic per seed).
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .judge import Candidate
from .model import NEG_INF, LanguageModel, Vocabulary, detokenize


@dataclass(frozen=True)
class Beam:
    """One hypothesis: generated tokens (prompt excluded) plus its scores.

    ``logprob`` is the raw cumulative model log-probability; ``dbs_score``
    subtracts the accumulated diversity penalties, so dbs_score <= logprob
    always. Finished beams end in eos and are never extended again.
    """

    tokens: tuple[int, ...]
    logprob: float
    dbs_score: float
    finished: bool
    group: int = 0


@dataclass(frozen=True)
class DecodeConfig:
    """Diverse-beam-search knobs, defaulting to the reference configuration."""

    beam_budget: int = 8
    num_groups: int = 8
    diversity_penalty: float = 10.0
    max_new_tokens: int = 256
    num_candidates: int = 4

    def __post_init__(self):
        if self.beam_budget < 1:
            raise ValueError("beam_budget must be >= 1")
        if self.num_groups < 1 or self.beam_budget % self.num_groups != 0:
            raise ValueError("beam_budget must be a positive multiple of num_groups")
        if self.diversity_penalty < 0:
            raise ValueError("diversity_penalty must be nonnegative")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if not 1 <= self.num_candidates <= self.beam_budget:
            raise ValueError("num_candidates must be in [1, beam_budget]")

    @property
    def group_size(self) -> int:
        return self.beam_budget // self.num_groups


@dataclass(frozen=True)
class SamplingConfig:
    """Baseline sampler knobs, defaulting to the reference configuration."""

    temperature: float = 1.0
    top_p: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")


def greedy_decode(model: LanguageModel, prompt: Sequence[int], max_new_tokens: int) -> list[int]:
    """Append the arg-max token (lowest id on ties) until eos or the cap."""
    eos = model.vocabulary.eos
    out: list[int] = []
    prefix = list(prompt)
    for _ in range(max_new_tokens):
        logprobs = model.next_logprobs(prefix)
        best = max(range(len(logprobs)), key=lambda i: (logprobs[i], -i))
        out.append(best)
        prefix.append(best)
        if best == eos:
            break
    return out


@dataclass(frozen=True)
class NucleusResult:
    probs: tuple[float, ...]
    support: tuple[int, ...]


def nucleus_filter(probs: Sequence[float], top_p: float) -> NucleusResult:
    """Keep the smallest descending-mass prefix reaching ``top_p``, renormalized.

    The support is the unique minimal prefix of the probability-sorted
    tokens whose cumulative mass is >= top_p; the top token is always
    kept. top_p=1 is the identity (full support, vector unchanged).
    """
    if not 0 < top_p <= 1:
        raise ValueError("top_p must be in (0, 1]")
    if top_p >= 1.0:
        return NucleusResult(tuple(probs), tuple(range(len(probs))))
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
    support: list[int] = []
    cumulative = 0.0
    for i in order:
        if cumulative >= top_p:
            break
        support.append(i)
        cumulative += probs[i]
    mass = math.fsum(probs[i] for i in support)
    filtered = [0.0] * len(probs)
    for i in support:
        filtered[i] = probs[i] / mass
    return NucleusResult(tuple(filtered), tuple(support))


def _softmax_with_temperature(logprobs: Sequence[float], temperature: float) -> list[float]:
    scaled = [lp / temperature if lp != NEG_INF else NEG_INF for lp in logprobs]
    peak = max(scaled)
    weights = [math.exp(s - peak) if s != NEG_INF else 0.0 for s in scaled]
    total = math.fsum(weights)
    return [w / total for w in weights]


def sample_nucleus(
    model: LanguageModel,
    prompt: Sequence[int],
    cfg: SamplingConfig,
    max_new_tokens: int,
) -> list[int]:
    """Temperature-scale, nucleus-filter, and sample each step (seeded).

    Temperature divides the log-probabilities before the nucleus filter
    is applied. The draw uses a generator seeded once per call, so the
    whole output sequence is a deterministic function of (model, prompt,
    cfg, max_new_tokens).
    """
    rng = random.Random(cfg.seed)
    eos = model.vocabulary.eos
    out: list[int] = []
    prefix = list(prompt)
    for _ in range(max_new_tokens):
        logprobs = model.next_logprobs(prefix)
        probs = _softmax_with_temperature(logprobs, cfg.temperature)
        filtered = nucleus_filter(probs, cfg.top_p)
        draw = rng.random()
        cumulative = 0.0
        token = filtered.support[-1]
        for i in filtered.support:
            cumulative += filtered.probs[i]
            if draw < cumulative:
                token = i
                break
        out.append(token)
        prefix.append(token)
        if token == eos:
            break
    return out


def _beam_sort_key(beam: Beam) -> tuple[float, tuple[int, ...]]:
    return (-beam.dbs_score, beam.tokens)


def beam_search(
    model: LanguageModel,
    prompt: Sequence[int],
    beam_budget: int,
    max_new_tokens: int,
) -> list[Beam]:
    """Width-B search by cumulative log-probability.

    Finished beams are frozen and keep competing for the B slots by their
    final score. Returns every surviving beam, best first (ties by
    lexicographic token ids).
    """
    if beam_budget < 1:
        raise ValueError("beam_budget must be >= 1")
    eos = model.vocabulary.eos
    prompt = list(prompt)
    beams = [Beam(tokens=(), logprob=0.0, dbs_score=0.0, finished=False)]
    for _ in range(max_new_tokens):
        if all(b.finished for b in beams):
            break
        pool = [b for b in beams if b.finished]
        for beam in beams:
            if beam.finished:
                continue
            logprobs = model.next_logprobs(prompt + list(beam.tokens))
            for token, lp in enumerate(logprobs):
                if lp == NEG_INF:
                    continue
                pool.append(
                    Beam(
                        tokens=beam.tokens + (token,),
                        logprob=beam.logprob + lp,
                        dbs_score=beam.dbs_score + lp,
                        finished=token == eos,
                    )
                )
        pool.sort(key=_beam_sort_key)
        beams = pool[:beam_budget]
    return sorted(beams, key=_beam_sort_key)


def hamming_penalty(token: int, prior_selections: Sequence[int] | Counter) -> int:
    """Number of times ``token`` was already selected by earlier groups this step."""
    if isinstance(prior_selections, Counter):
        return prior_selections[token]
    return sum(1 for t in prior_selections if t == token)


@dataclass(frozen=True)
class StepSelection:
    """Tokens one group appended at one step, with the penalties charged."""

    group: int
    tokens: tuple[int, ...]
    penalties: tuple[int, ...]


def diverse_beam_search_with_trace(
    model: LanguageModel,
    prompt: Sequence[int],
    cfg: DecodeConfig,
) -> tuple[list[Beam], list[list[StepSelection]]]:
    """Diverse beam search, also returning the per-step selection log.

    At each step the groups run in index order. Group g scores each of
    its (B/G) * |V| continuations by cumulative log-probability minus
    diversity_penalty times the Hamming count of that token among the
    selections already made by groups 0..g-1 at this step, then keeps the
    top B/G by that augmented score. Finished beams are frozen: they stay
    in their group's slots at their final score and contribute nothing to
    later penalty pools.

    The trace holds, per step and per group, the tokens the group
    appended and the penalty counts charged; beam.logprob - beam.dbs_score
    equals diversity_penalty times the penalties replayable from it.
    """
    eos = model.vocabulary.eos
    prompt = list(prompt)
    groups: list[list[Beam]] = [
        [Beam(tokens=(), logprob=0.0, dbs_score=0.0, finished=False, group=g)]
        for g in range(cfg.num_groups)
    ]
    trace: list[list[StepSelection]] = []
    for _ in range(cfg.max_new_tokens):
        if all(b.finished for group in groups for b in group):
            break
        step_log: list[StepSelection] = []
        selected_so_far: Counter[int] = Counter()
        for g in range(cfg.num_groups):
            # Pool entries: (beam, penalty charged, extended this step?).
            # Beams that finished at an earlier step are carried frozen;
            # they appended nothing now and feed no later penalty pool.
            pool: list[tuple[Beam, int, bool]] = [
                (b, 0, False) for b in groups[g] if b.finished
            ]
            for beam in groups[g]:
                if beam.finished:
                    continue
                logprobs = model.next_logprobs(prompt + list(beam.tokens))
                for token, lp in enumerate(logprobs):
                    if lp == NEG_INF:
                        continue
                    penalty = selected_so_far[token]
                    pool.append(
                        (
                            Beam(
                                tokens=beam.tokens + (token,),
                                logprob=beam.logprob + lp,
                                dbs_score=beam.dbs_score + lp - cfg.diversity_penalty * penalty,
                                finished=token == eos,
                                group=g,
                            ),
                            penalty,
                            True,
                        )
                    )
            pool.sort(key=lambda item: _beam_sort_key(item[0]))
            kept = pool[: cfg.group_size]
            groups[g] = [beam for beam, _, _ in kept]
            new_tokens = tuple(beam.tokens[-1] for beam, _, fresh in kept if fresh)
            new_penalties = tuple(pen for _, pen, fresh in kept if fresh)
            step_log.append(StepSelection(group=g, tokens=new_tokens, penalties=new_penalties))
            selected_so_far.update(new_tokens)
        trace.append(step_log)
    beams = sorted((b for group in groups for b in group), key=_beam_sort_key)
    return beams, trace


def diverse_beam_search(
    model: LanguageModel,
    prompt: Sequence[int],
    cfg: DecodeConfig,
) -> list[Beam]:
    """Diverse beam search; see diverse_beam_search_with_trace for the rule."""
    beams, _ = diverse_beam_search_with_trace(model, prompt, cfg)
    return beams


def top_k_candidates(beams: Sequence[Beam], k: int, vocab: Vocabulary) -> list[Candidate]:
    """First k beams by diversity-adjusted score, converted to Candidates.

    Rank 0 is the best beam; ties break by lexicographic token ids. A
    trailing eos is dropped from the detokenized text.
    """
    if k > len(beams):
        raise ValueError(f"requested {k} candidates from {len(beams)} beams")
    ranked = sorted(beams, key=_beam_sort_key)[:k]
    eos = vocab.eos
    out = []
    for rank, beam in enumerate(ranked):
        tokens = beam.tokens[:-1] if beam.tokens and beam.tokens[-1] == eos else beam.tokens
        out.append(
            Candidate(
                text=detokenize(tokens, vocab),
                dbs_rank=rank,
                dbs_score=beam.dbs_score,
                logprob=beam.logprob,
            )
        )
    return out
