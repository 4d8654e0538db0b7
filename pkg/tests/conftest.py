from __future__ import annotations

import math
import re
import threading
import time
from random import Random
from typing import Sequence

import pytest

from creative_beam_search.model import NEG_INF, LanguageModel, TableLM, Vocabulary

# Canonical four-token fixture used throughout: last-token-conditioned
# table over (a, b, c, </s>). Kept as an explicit literal here so the
# tests do not depend on the package's demo copy of the same numbers.
TINY_ROWS: dict[str | None, tuple[float, float, float, float]] = {
    None: (0.5, 0.4, 0.1, 0.0),
    "a": (0.1, 0.2, 0.2, 0.5),
    "b": (0.6, 0.1, 0.1, 0.2),
    "c": (0.25, 0.25, 0.25, 0.25),
    # Decoding never extends past eos; the row only keeps every context
    # resolvable for direct next_logprobs queries.
    "</s>": (0.5, 0.4, 0.1, 0.0),
}

A, B, C, EOS = 0, 1, 2, 3


def tiny_vocab() -> Vocabulary:
    return Vocabulary(tokens=("a", "b", "c", "</s>"), bos=0, eos=3)


def tiny_table_lm() -> TableLM:
    return TableLM(tiny_vocab(), {k: list(v) for k, v in TINY_ROWS.items()})


@pytest.fixture
def tiny_lm() -> TableLM:
    return tiny_table_lm()


def covering_vocab(*texts: str, extra: Sequence[str] = ()) -> Vocabulary:
    """Vocabulary containing every whitespace unit of the given texts."""
    words: list[str] = ["<s>", "</s>"]
    for text in list(texts) + list(extra):
        for unit in text.split():
            if unit not in words:
                words.append(unit)
    return Vocabulary(tokens=tuple(words), bos=0, eos=1)


def random_table_lm(rng: Random, vocab_size: int) -> TableLM:
    """Random last-token table with strictly positive rows (plus eos)."""
    tokens = tuple(f"t{i}" for i in range(vocab_size - 1)) + ("</s>",)
    vocab = Vocabulary(tokens=tokens, bos=0, eos=vocab_size - 1)
    conditionals: dict[str | None, list[float]] = {}
    for key in [None, *tokens]:
        weights = [rng.uniform(0.05, 1.0) for _ in range(vocab_size)]
        total = sum(weights)
        conditionals[key] = [w / total for w in weights]
    return TableLM(vocab, conditionals)


def enumerate_leaves(
    model: LanguageModel, prompt: Sequence[int], max_len: int
) -> list[tuple[tuple[int, ...], float, bool]]:
    """Brute-force oracle: every finite-probability sequence that either
    ends in eos or hits the length cap, sorted by (-logprob, tokens)."""
    eos = model.vocabulary.eos
    leaves: list[tuple[tuple[int, ...], float, bool]] = []

    def walk(tokens: list[int], logprob: float) -> None:
        if tokens and tokens[-1] == eos:
            leaves.append((tuple(tokens), logprob, True))
            return
        if len(tokens) == max_len:
            leaves.append((tuple(tokens), logprob, False))
            return
        logprobs = model.next_logprobs(list(prompt) + tokens)
        for t, lp in enumerate(logprobs):
            if lp == NEG_INF:
                continue
            walk(tokens + [t], logprob + lp)

    walk([], 0.0)
    leaves.sort(key=lambda leaf: (-leaf[1], leaf[0]))
    return leaves


def naive_diverse_beam_search(
    model: LanguageModel,
    prompt: Sequence[int],
    beam_budget: int,
    num_groups: int,
    penalty_scale: float,
    max_new_tokens: int,
) -> list[tuple[tuple[int, ...], int, float, float, bool]]:
    """Deliberately plain re-statement of the group-sequential step rule.

    Returns (tokens, group, logprob, score, finished) tuples sorted by
    (-score, tokens). Kept structurally independent of the package
    implementation so the two can cross-check each other.
    """
    eos = model.vocabulary.eos
    group_size = beam_budget // num_groups
    groups: list[list[dict]] = [
        [{"tokens": [], "logprob": 0.0, "score": 0.0, "done": False}]
        for _ in range(num_groups)
    ]
    for _ in range(max_new_tokens):
        if all(h["done"] for grp in groups for h in grp):
            break
        chosen_this_step: list[tuple[int, int]] = []  # (group, token)
        for g in range(num_groups):
            options: list[tuple[float, tuple[int, ...], dict, int | None]] = []
            for hyp in groups[g]:
                if hyp["done"]:
                    options.append((hyp["score"], tuple(hyp["tokens"]), hyp, None))
                    continue
                logprobs = model.next_logprobs(list(prompt) + hyp["tokens"])
                for t in range(len(logprobs)):
                    if logprobs[t] == NEG_INF:
                        continue
                    repeats = 0
                    for gg, tok in chosen_this_step:
                        if gg < g and tok == t:
                            repeats += 1
                    new = {
                        "tokens": hyp["tokens"] + [t],
                        "logprob": hyp["logprob"] + logprobs[t],
                        "score": hyp["score"] + logprobs[t] - penalty_scale * repeats,
                        "done": t == eos,
                    }
                    options.append((new["score"], tuple(new["tokens"]), new, t))
            options.sort(key=lambda o: (-o[0], o[1]))
            kept = options[:group_size]
            groups[g] = [o[2] for o in kept]
            for _, _, _, token in kept:
                if token is not None:
                    chosen_this_step.append((g, token))
    flat = [
        (tuple(h["tokens"]), g, h["logprob"], h["score"], h["done"])
        for g, grp in enumerate(groups)
        for h in grp
    ]
    flat.sort(key=lambda item: (-item[3], item[0]))
    return flat


class ScriptedReplyLM(LanguageModel):
    """Emits a fixed reply (then eos) after any prompt. Judge stub."""

    def __init__(self, vocabulary: Vocabulary, reply_text: str):
        self.vocabulary = vocabulary
        self._reply = [vocabulary.id_of(w) for w in reply_text.split()] + [vocabulary.eos]

    def _emit_after(self, prefix: Sequence[int]) -> int:
        for k in range(len(self._reply) - 1, 0, -1):
            if k <= len(prefix) and list(prefix[-k:]) == self._reply[:k]:
                return self._reply[k]
        return self._reply[0]

    def next_logprobs(self, prefix: Sequence[int]) -> list[float]:
        self._check_prefix(prefix)
        row = [NEG_INF] * len(self.vocabulary)
        row[self._emit_after(prefix)] = 0.0
        return row


_LABEL = re.compile(r"^\d+\)$")


class FavoriteTextJudgeLM(LanguageModel):
    """Judge stub that votes for the display position of a favorite text.

    Locates the favorite candidate in the rendered prompt (a "<n>)" label
    immediately before it, another label or the closing instruction right
    after it) and replies with that position's number. Falls back to "1"
    if the favorite is not found.
    """

    def __init__(self, vocabulary: Vocabulary, favorite_text: str):
        self.vocabulary = vocabulary
        self._favorite = favorite_text.split()

    def _position_digits(self, words: list[str]) -> str:
        fav = self._favorite
        for j in range(1, len(words) - len(fav) + 1):
            if words[j : j + len(fav)] != fav or not _LABEL.match(words[j - 1]):
                continue
            after = j + len(fav)
            if after < len(words) and not (_LABEL.match(words[after]) or words[after] == "Provide"):
                continue
            return words[j - 1][:-1]
        return "1"

    def next_logprobs(self, prefix: Sequence[int]) -> list[float]:
        self._check_prefix(prefix)
        words = [self.vocabulary.token_of(i) for i in prefix]
        reply = [self.vocabulary.id_of(self._position_digits(words)), self.vocabulary.eos]
        emit = reply[0]
        for k in range(len(reply) - 1, 0, -1):
            if k <= len(prefix) and list(prefix[-k:]) == reply[:k]:
                emit = reply[k]
                break
        row = [NEG_INF] * len(self.vocabulary)
        row[emit] = 0.0
        return row


class UvicornThread:
    """Run a FastAPI app on an ephemeral port in a daemon thread."""

    def __init__(self, app):
        import uvicorn

        config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self.server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self.server.run, daemon=True)
        self.base_url = ""

    def __enter__(self) -> "UvicornThread":
        self._thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start within 10s")
            time.sleep(0.01)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        self.base_url = f"http://127.0.0.1:{port}"
        return self

    def __exit__(self, *exc_info) -> None:
        self.server.should_exit = True
        self._thread.join(timeout=10)


def assert_close(actual: float, expected: float, tol: float = 1e-9) -> None:
    assert math.isfinite(actual) and math.isfinite(expected) and abs(actual - expected) <= tol, (
        f"{actual} != {expected} within {tol}"
    )
