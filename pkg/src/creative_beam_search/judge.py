"""Self-evaluation of candidate answers with positional-bias calibration.

K prompts are built by rotating the K candidates through the display
positions (a Latin square: every candidate occupies every position exactly
once), each prompt is answered greedily, and the votes are tallied. A
judge that votes by position alone therefore produces a uniform tally,
and the tie falls back to the generation-time ranking.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .model import ChatMessage, LanguageModel, Role, UnknownTokenError, detokenize, render_chat

QUESTION_TEMPLATE = 'Which of the following is the most creative answer to "{user_input}"?'
ANSWER_INSTRUCTION = "Provide only the number of the most creative answer without any explanation."

DEFAULT_MAX_JUDGE_TOKENS = 8

_DIGIT_RUN = re.compile(r"\d+")


@dataclass(frozen=True)
class Candidate:
    """A completed hypothesis as presented to the judge."""

    text: str
    dbs_rank: int
    dbs_score: float
    logprob: float


@dataclass(frozen=True)
class EvalPrompt:
    """One rotated evaluation prompt.

    ``origin[i]`` is the candidate index displayed at position i (0-based);
    for rotation r that is (i + r) mod K.
    """

    rotation: int
    ordered_texts: tuple[str, ...]
    origin: tuple[int, ...]
    text: str


@dataclass(frozen=True)
class Vote:
    rotation: int
    chosen_position: int | None  # 1-based display position, None when invalid
    mapped_candidate: int | None


@dataclass(frozen=True)
class Verdict:
    counts: tuple[int, ...]
    winner: int
    tie_broken: bool
    invalid_votes: int


def build_eval_prompts(user_input: str, candidates: Sequence[Candidate]) -> list[EvalPrompt]:
    """Compose the K rotated prompts for ``candidates``.

    Candidates must carry distinct contiguous ranks starting at 0. Their
    texts are embedded verbatim (multi-line texts keep their line breaks
    after the position label).
    """
    if not candidates:
        raise ValueError("cannot build evaluation prompts for zero candidates")
    ranks = sorted(c.dbs_rank for c in candidates)
    if ranks != list(range(len(candidates))):
        raise ValueError(f"candidate ranks must be contiguous from 0, got {ranks}")
    k = len(candidates)
    prompts = []
    for rotation in range(k):
        origin = tuple((i + rotation) % k for i in range(k))
        ordered_texts = tuple(candidates[idx].text for idx in origin)
        lines = [QUESTION_TEMPLATE.format(user_input=user_input)]
        lines.extend(f"{i + 1}) {text}" for i, text in enumerate(ordered_texts))
        lines.append(ANSWER_INSTRUCTION)
        prompts.append(
            EvalPrompt(
                rotation=rotation,
                ordered_texts=ordered_texts,
                origin=origin,
                text="\n".join(lines),
            )
        )
    return prompts


def parse_vote(judge_output: str, k: int) -> int | None:
    """First maximal digit run of the trimmed output, if it lands in [1, k]."""
    match = _DIGIT_RUN.search(judge_output.strip())
    if match is None:
        return None
    position = int(match.group())
    return position if 1 <= position <= k else None


def aggregate(votes: Sequence[Vote], candidates: Sequence[Candidate]) -> Verdict:
    """Plurality over mapped votes; ties go to the smallest dbs_rank.

    When every vote is invalid the rank-0 candidate wins and the verdict
    is flagged as tie-broken.
    """
    counts = [0] * len(candidates)
    invalid = 0
    for vote in votes:
        if vote.mapped_candidate is None:
            invalid += 1
            continue
        if not 0 <= vote.mapped_candidate < len(candidates):
            raise ValueError(f"vote maps to candidate {vote.mapped_candidate}, out of range")
        counts[vote.mapped_candidate] += 1
    best = max(counts)
    leaders = [i for i, c in enumerate(counts) if c == best]
    winner = min(leaders, key=lambda i: candidates[i].dbs_rank)
    return Verdict(
        counts=tuple(counts),
        winner=winner,
        tie_broken=len(leaders) > 1,
        invalid_votes=invalid,
    )


def judge(
    model: LanguageModel,
    user_input: str,
    candidates: Sequence[Candidate],
    max_judge_tokens: int = DEFAULT_MAX_JUDGE_TOKENS,
) -> Verdict:
    """Run the K rotated prompts through ``model`` greedily and aggregate.

    Greedy decoding keeps the vote deterministic. A prompt the model
    cannot render (out-of-vocabulary text) counts as an invalid vote;
    backend errors propagate.
    """
    from .decode import greedy_decode  # local import: decode depends on judge types

    votes = []
    eos = model.vocabulary.eos
    for prompt in build_eval_prompts(user_input, candidates):
        try:
            prompt_ids = render_chat(
                [ChatMessage(Role.USER, prompt.text)], model.vocabulary
            )
            reply_ids = greedy_decode(model, prompt_ids, max_judge_tokens)
        except UnknownTokenError:
            votes.append(Vote(rotation=prompt.rotation, chosen_position=None, mapped_candidate=None))
            continue
        if reply_ids and reply_ids[-1] == eos:
            reply_ids = reply_ids[:-1]
        position = parse_vote(detokenize(reply_ids, model.vocabulary), len(candidates))
        mapped = prompt.origin[position - 1] if position is not None else None
        votes.append(Vote(rotation=prompt.rotation, chosen_position=position, mapped_candidate=mapped))
    return aggregate(votes, candidates)
