import itertools

import pytest
from hypothesis import given, strategies as st

from ncdomain import freewords as fw
from ncdomain.errors import CapacityError, ValidationError


def test_counts():
    assert fw.count_words(2, 3) == 8
    assert fw.count_words_upto(2, 3) == 15
    assert fw.count_words_upto(1, 5) == 6
    assert fw.count_words_upto(3, 0) == 1


def test_graded_lex_order():
    ws = fw.words_upto(2, 2)
    assert ws == [(), (1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)]
    assert sorted(reversed(ws), key=fw.word_key) == ws
    assert fw.word_compare((2,), (1, 1)) == -1
    assert fw.word_compare((1, 2), (1, 2)) == 0
    assert fw.word_compare((2, 1), (1, 2)) == 1


def test_iter_matches_list():
    assert list(fw.iter_words_upto(3, 3)) == fw.words_upto(3, 3)


@given(st.integers(1, 4), st.integers(0, 4), st.data())
def test_index_roundtrip(n, k, data):
    idx = data.draw(st.integers(0, n**k - 1))
    w = fw.word_from_index(idx, n, k)
    assert len(w) == k
    assert fw.word_index(w, n) == idx
    assert fw.basis_index(w, n) == fw.basis_offset(n, k) + idx


def test_basis_index_matches_enumeration():
    for pos, w in enumerate(fw.words_upto(3, 3)):
        assert fw.basis_index(w, 3) == pos


def test_concat_and_format():
    assert fw.word_concat((1, 2), (3,)) == (1, 2, 3)
    assert fw.format_word(()) == "1"
    assert "Z1" in fw.format_word((1, 2))


@given(st.lists(st.integers(1, 3), min_size=0, max_size=6), st.integers(1, 7))
def test_factorizations_brute_force(w, k):
    w = tuple(w)
    got = fw.word_factorizations(w, k)
    expected = []
    # every composition of len(w) into k positive parts
    for parts in itertools.product(range(1, len(w) + 1), repeat=k):
        if sum(parts) != len(w):
            continue
        pos, fac = 0, []
        for p in parts:
            fac.append(w[pos:pos + p])
            pos += p
        expected.append(tuple(fac))
    assert sorted(got) == sorted(expected)
    assert len(set(got)) == len(got)
    for fac in got:
        assert sum(fac, ()) == w


def test_factorizations_bad_k():
    with pytest.raises(ValidationError):
        fw.word_factorizations((1,), 0)


def test_as_word_validation():
    assert fw.as_word([1, 2], 2) == (1, 2)
    with pytest.raises(ValidationError):
        fw.as_word([0], 2)
    with pytest.raises(ValidationError):
        fw.as_word([3], 2)


def test_capacity_cap(monkeypatch):
    monkeypatch.setenv("NCDOMAIN_WORD_CAP", "100")
    assert fw.word_cap() == 100
    with pytest.raises(CapacityError):
        fw.words_upto(2, 7)
