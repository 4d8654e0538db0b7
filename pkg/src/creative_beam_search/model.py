"""Vocabulary, tokenization, chat rendering, and desk-scale language models.

All models are deterministic: the same prefix always yields the same
next-token log-probability vector, and that vector always normalizes to 1.
Zero-probability tokens carry a log-probability of -inf and can never be
selected by any decoding strategy.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

NEG_INF = float("-inf")

# Tolerance for validating stored probability tables at construction time.
_TABLE_SUM_TOL = 1e-9


class UnknownTokenError(ValueError):
    """A whitespace-delimited unit of text is not in the vocabulary."""

    def __init__(self, unit: str):
        super().__init__(f"unknown token: {unit!r}")
        self.unit = unit


@dataclass(frozen=True)
class Vocabulary:
    """An ordered list of distinct token strings with bos/eos markers."""

    tokens: tuple[str, ...]
    bos: int
    eos: int

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            dupes = [t for t, n in Counter(self.tokens).items() if n > 1]
            raise ValueError(f"duplicate tokens in vocabulary: {dupes}")
        for name, idx in (("bos", self.bos), ("eos", self.eos)):
            if not 0 <= idx < len(self.tokens):
                raise ValueError(f"{name} id {idx} outside vocabulary of size {len(self.tokens)}")
        if self.bos == self.eos:
            raise ValueError("bos and eos must be distinct")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index  # type: ignore[attr-defined]

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownTokenError(token) from None

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise ValueError(f"token id {token_id} outside vocabulary of size {len(self.tokens)}")
        return self.tokens[token_id]

    @property
    def eos_token(self) -> str:
        return self.tokens[self.eos]


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Whitespace-split ``text`` and map each unit to its token id.

    Raises UnknownTokenError naming the first unit missing from the
    vocabulary. The empty string maps to the empty sequence.
    """
    return [vocab.id_of(unit) for unit in text.split()]


def detokenize(ids: Sequence[int], vocab: Vocabulary) -> str:
    """Join token strings with single spaces (inverse of tokenize up to whitespace)."""
    return " ".join(vocab.token_of(i) for i in ids)


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self):
        if not isinstance(self.role, Role):
            object.__setattr__(self, "role", Role(self.role))
        if self.role is Role.USER and not self.content:
            raise ValueError("user messages must have non-empty content")


def render_chat(messages: Sequence[ChatMessage], vocab: Vocabulary) -> list[int]:
    """Render messages to token ids using the literal "role: content" template.

    The template keeps each message's content contiguous in the token
    stream; distinct message lists render to distinct sequences up to
    whitespace normalization of the contents.
    """
    if not messages:
        raise ValueError("cannot render an empty message list")
    text = "".join(f"{m.role.value}: {m.content}\n" for m in messages)
    return tokenize(text, vocab)


class LanguageModel(ABC):
    """Deterministic next-token log-probability source over a fixed vocabulary."""

    vocabulary: Vocabulary

    @abstractmethod
    def next_logprobs(self, prefix: Sequence[int]) -> list[float]:
        """Log-probabilities of every vocabulary token following ``prefix``.

        The returned vector has length ``len(vocabulary)`` and its
        exponentials sum to 1 within 1e-6; zero-probability tokens are -inf.
        """

    def _check_prefix(self, prefix: Sequence[int]) -> None:
        size = len(self.vocabulary)
        for i in prefix:
            if not 0 <= i < size:
                raise ValueError(f"token id {i} outside vocabulary of size {size}")


def _log_row(probs: Sequence[float]) -> tuple[float, ...]:
    return tuple(math.log(p) if p > 0.0 else NEG_INF for p in probs)


class TableLM(LanguageModel):
    """Model defined by an explicit conditional table keyed on the last token.

    ``conditionals`` maps a context key to a probability vector over the
    full vocabulary. The key is either None (empty prefix) or a token
    string (the last token of the prefix). Every token must appear as a
    key so that any prefix resolves, and every vector must sum to 1.
    """

    def __init__(self, vocabulary: Vocabulary, conditionals: Mapping[str | None, Sequence[float]]):
        self.vocabulary = vocabulary
        rows: dict[int | None, tuple[float, ...]] = {}
        for key, probs in conditionals.items():
            key_id = None if key is None else vocabulary.id_of(key)
            if len(probs) != len(vocabulary):
                raise ValueError(
                    f"row for context {key!r} has length {len(probs)}, expected {len(vocabulary)}"
                )
            total = math.fsum(probs)
            if abs(total - 1.0) > _TABLE_SUM_TOL:
                raise ValueError(f"row for context {key!r} sums to {total!r}, not 1")
            if any(p < 0 for p in probs):
                raise ValueError(f"row for context {key!r} has negative entries")
            rows[key_id] = tuple(float(p) for p in probs)
        missing = [None] + list(range(len(vocabulary)))
        unresolved = [k for k in missing if k not in rows]
        if unresolved:
            names = ["<empty>" if k is None else vocabulary.token_of(k) for k in unresolved]
            raise ValueError(f"unresolvable context keys: {names}")
        self._probs = rows
        self._logprobs = {k: _log_row(v) for k, v in rows.items()}

    def probs(self, prefix: Sequence[int]) -> tuple[float, ...]:
        self._check_prefix(prefix)
        key = prefix[-1] if prefix else None
        return self._probs[key]

    def next_logprobs(self, prefix: Sequence[int]) -> list[float]:
        self._check_prefix(prefix)
        key = prefix[-1] if prefix else None
        return list(self._logprobs[key])


class NgramLM(LanguageModel):
    """Add-alpha-smoothed n-gram model over a fixed vocabulary.

    Conditions on the last ``order - 1`` tokens of the prefix (fewer near
    the sequence start, mirroring how training counts the corpus head).
    Smoothing over the full vocabulary guarantees every conditional
    distribution sums to 1 and every token has positive probability.
    """

    def __init__(
        self,
        vocabulary: Vocabulary,
        order: int,
        alpha: float,
        pair_counts: Mapping[tuple[tuple[int, ...], int], int],
        context_totals: Mapping[tuple[int, ...], int],
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.vocabulary = vocabulary
        self.order = order
        self.alpha = alpha
        self._pairs = dict(pair_counts)
        self._totals = dict(context_totals)

    def _context(self, prefix: Sequence[int]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return tuple(prefix[-(self.order - 1):])

    def conditional(self, prefix: Sequence[int], token_id: int) -> float:
        ctx = self._context(prefix)
        size = len(self.vocabulary)
        total = self._totals.get(ctx, 0)
        count = self._pairs.get((ctx, token_id), 0)
        return (count + self.alpha) / (total + self.alpha * size)

    def next_logprobs(self, prefix: Sequence[int]) -> list[float]:
        self._check_prefix(prefix)
        ctx = self._context(prefix)
        size = len(self.vocabulary)
        total = self._totals.get(ctx, 0)
        denom = total + self.alpha * size
        out = []
        for t in range(size):
            count = self._pairs.get((ctx, t), 0)
            out.append(math.log((count + self.alpha) / denom))
        return out


def train_ngram(corpus: str, vocabulary: Vocabulary, order: int, alpha: float) -> NgramLM:
    """Count (context, token) pairs in ``corpus`` and build an NgramLM.

    Contexts are the preceding ``order - 1`` tokens, truncated at the
    corpus head (the first token is counted under the empty context).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    ids = tokenize(corpus, vocabulary)
    if not ids:
        raise ValueError("corpus is empty")
    pair_counts: Counter[tuple[tuple[int, ...], int]] = Counter()
    context_totals: Counter[tuple[int, ...]] = Counter()
    span = order - 1
    for i, token in enumerate(ids):
        ctx = tuple(ids[max(0, i - span):i]) if span else ()
        pair_counts[(ctx, token)] += 1
        context_totals[ctx] += 1
    return NgramLM(vocabulary, order, alpha, pair_counts, context_totals)
