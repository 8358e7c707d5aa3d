"""Token-level helpers shared by graph labeling, ROUGE and cloze construction."""

from __future__ import annotations

import string
from functools import lru_cache
from importlib import resources

STOPWORDS_VERSION = 1
BLANK = "___"

_PUNCT = set(string.punctuation) | {"``", "''", "--", "-lrb-", "-rrb-"}


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    text = resources.files("kgsum.resources").joinpath("stopwords.txt").read_text("utf-8")
    words = (line.strip() for line in text.splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


def is_content_word(token: str, stop: frozenset[str] | set[str] | None = None) -> bool:
    """A lowercased token that is not a stopword, punctuation or a number."""
    tok = token.lower()
    if stop is None:
        stop = stopwords()
    if not tok or tok in stop or tok in _PUNCT:
        return False
    if all(ch in string.punctuation for ch in tok):
        return False
    stripped = tok.replace(",", "").replace(".", "")
    if stripped.isdigit():
        return False
    return True


def content_words(tokens, stop=None) -> set[str]:
    return {t.lower() for t in tokens if is_content_word(t, stop)}


def n_words(text: str) -> int:
    return len(text.split())
