"""Built-in desk-scale models for the CLI and for end-to-end runs.

The core next-token behavior is a four-token table (a, b, c, eos). The
demo vocabulary additionally carries every token the prompt templates can
produce for inputs made of core tokens (role markers, instruction words,
position labels, digits, quoted/punctuated variants), all with zero
probability, so the full pipeline renders and runs without a real model.
"""

from __future__ import annotations

from .model import TableLM, Vocabulary, train_ngram

CORE_TOKENS = ("a", "b", "c")
EOS_TOKEN = "</s>"
BOS_TOKEN = "<s>"

# Next-token distributions over (a, b, c, eos), keyed by the last token.
CORE_ROWS: dict[str | None, tuple[float, float, float, float]] = {
    None: (0.5, 0.4, 0.1, 0.0),
    "a": (0.1, 0.2, 0.2, 0.5),
    "b": (0.6, 0.1, 0.1, 0.2),
    "c": (0.25, 0.25, 0.25, 0.25),
}

_TEMPLATE_WORDS = (
    "user:", "system:", "assistant:",
    "Which", "of", "the", "following", "is", "most", "creative", "answer", "to",
    "Provide", "only", "one", "number", "without", "any", "explanation.", ".",
)
_MAX_POSITIONS = 8


def demo_vocab() -> Vocabulary:
    tokens: list[str] = [BOS_TOKEN, *CORE_TOKENS, EOS_TOKEN]
    tokens.extend(_TEMPLATE_WORDS)
    for t in CORE_TOKENS:
        tokens.extend((f"{t}.", f'"{t}', f'{t}"?', f'"{t}"?'))
    for i in range(1, _MAX_POSITIONS + 1):
        tokens.extend((str(i), f"{i})"))
    return Vocabulary(
        tokens=tuple(tokens),
        bos=tokens.index(BOS_TOKEN),
        eos=tokens.index(EOS_TOKEN),
    )


def demo_table_lm() -> TableLM:
    """Core table behavior embedded in the template-covering vocabulary.

    Tokens outside the core four have zero probability everywhere, and
    any context outside the core falls back to the empty-prefix row, so
    generation behaves exactly like the four-token core table.
    """
    vocab = demo_vocab()

    def widen(row: tuple[float, float, float, float]) -> list[float]:
        full = [0.0] * len(vocab)
        for value, name in zip(row, (*CORE_TOKENS, EOS_TOKEN)):
            full[vocab.id_of(name)] = value
        return full

    conditionals: dict[str | None, list[float]] = {None: widen(CORE_ROWS[None])}
    for token in vocab.tokens:
        row = CORE_ROWS.get(token, CORE_ROWS[None])
        conditionals[token] = widen(row)
    return TableLM(vocab, conditionals)


DEMO_CORPUS = " ".join(
    [
        "a b a c b a </s>",
        "b a b c a </s>",
        "c c a b </s>",
        "a b b a </s>",
        "b c a a c </s>",
    ]
)


def demo_ngram_lm(order: int = 2, alpha: float = 1.0):
    return train_ngram(DEMO_CORPUS, demo_vocab(), order, alpha)
