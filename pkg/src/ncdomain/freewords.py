"""Words in the free semigroup on n generators.

A word is a tuple of 1-based letter indices; the empty tuple is the unit
``g_0``.  Words are ordered graded-lexicographically: shorter words come
first and words of equal length compare letter by letter.

Every degree block of a series is stored as a flat array indexed by the
lexicographic rank of a word among the words of that length, so the helpers
``word_index`` and ``word_from_index`` are the bridge between the two views.
"""
from __future__ import annotations

import os
from itertools import combinations, product
from typing import Iterator, Sequence

from .errors import CapacityError, ValidationError

Word = tuple[int, ...]

DEFAULT_WORD_CAP = 10**7
WORD_CAP_ENV = "NCDOMAIN_WORD_CAP"


def word_cap() -> int:
    """Current enumeration cap, read from the environment on every call."""
    raw = os.environ.get(WORD_CAP_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_WORD_CAP
    try:
        cap = int(float(raw))
    except ValueError:
        raise ValidationError(f"{WORD_CAP_ENV} must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValidationError(f"{WORD_CAP_ENV} must be positive")
    return cap


def check_capacity(count: int, what: str = "words") -> None:
    cap = word_cap()
    if count > cap:
        raise CapacityError(f"{what}: {count} exceeds the word cap {cap}")


def as_word(letters: Sequence[int], n: int | None = None) -> Word:
    """Normalize a letter sequence to a ``Word``, validating letters against ``n``."""
    w = tuple(int(x) for x in letters)
    for x in w:
        if x < 1 or (n is not None and x > n):
            raise ValidationError(f"letter {x} out of range for n={n}")
    return w


def word_concat(u: Word, v: Word) -> Word:
    return tuple(u) + tuple(v)


def word_key(w: Word) -> tuple[int, Word]:
    """Sort key realizing the graded-lex order."""
    return (len(w), tuple(w))


def word_compare(u: Word, v: Word) -> int:
    """Return -1, 0 or 1 as ``u`` is less than, equal to or greater than ``v``."""
    ku, kv = word_key(u), word_key(v)
    if ku < kv:
        return -1
    if ku > kv:
        return 1
    return 0


def count_words(n: int, k: int) -> int:
    return n**k


def count_words_upto(n: int, k: int) -> int:
    """Number of words of length at most ``k``."""
    if k < 0:
        return 0
    if n == 1:
        return k + 1
    return (n ** (k + 1) - 1) // (n - 1)


def words_of_length(n: int, k: int) -> list[Word]:
    """All ``n**k`` words of length ``k`` in ascending order."""
    if n < 1 or k < 0:
        raise ValidationError("need n >= 1 and k >= 0")
    check_capacity(n**k)
    return [tuple(w) for w in product(range(1, n + 1), repeat=k)]


def words_upto(n: int, k: int) -> list[Word]:
    """All words of length at most ``k`` in ascending order."""
    check_capacity(count_words_upto(n, k))
    out: list[Word] = []
    for j in range(k + 1):
        out.extend(words_of_length(n, j))
    return out


def iter_words_upto(n: int, k: int) -> Iterator[Word]:
    for j in range(k + 1):
        yield from product(range(1, n + 1), repeat=j)


def word_factorizations(w: Word, k: int) -> list[tuple[Word, ...]]:
    """All ways to write ``w`` as a product of ``k`` nonempty words.

    Factorizations are produced in lexicographic order of the cut positions,
    so shorter leading factors come first.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    w = tuple(w)
    L = len(w)
    if k > L:
        return []
    out = []
    for cuts in combinations(range(1, L), k - 1):
        bounds = (0,) + cuts + (L,)
        out.append(tuple(w[bounds[i]:bounds[i + 1]] for i in range(k)))
    return out


def word_index(w: Word, n: int) -> int:
    """Lexicographic rank of ``w`` among words of its length."""
    idx = 0
    for x in w:
        idx = idx * n + (x - 1)
    return idx


def word_from_index(idx: int, n: int, k: int) -> Word:
    letters = [0] * k
    for p in range(k - 1, -1, -1):
        idx, r = divmod(idx, n)
        letters[p] = r + 1
    return tuple(letters)


def basis_offset(n: int, k: int) -> int:
    """Position of the first length-``k`` word in the graded-lex enumeration."""
    return count_words_upto(n, k - 1)


def basis_index(w: Word, n: int) -> int:
    """Position of ``w`` in the graded-lex enumeration of all words."""
    return basis_offset(n, len(w)) + word_index(w, n)


def format_word(w: Word, symbol: str = "Z") -> str:
    if not w:
        return "1"
    return "".join(f"{symbol}{x}" for x in w)
