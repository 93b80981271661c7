import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csgen.cmi import (
    GROUP_LABELS, CmiHistogram, cmi, cmi_bucket, format_report, group, histogram, histogram_distance, report_json,
)
from csgen.corpus import Corpus, LanguageTag, Sentence, Token

A, B, NV = LanguageTag.LANG_A, LanguageTag.LANG_B, LanguageTag.NON_VERBAL
SURFACE = {A: "中", B: "en", NV: "(laugh)"}


def sent(*tags):
    return Sentence(tuple(Token(SURFACE[t], t) for t in tags))


def brute_force_cmi(tags):
    """Direct evaluation of the index from raw tag counts."""
    n = len(tags)
    u = tags.count(NV)
    w = [tags.count(A), tags.count(B)]
    if n == u:
        return 0
    return 100 * (1 - max(w) / (n - u))


def test_monolingual_is_zero():
    assert cmi(sent(A, A, A, A, A)).value == 0


def test_only_nonverbal_is_zero():
    s = cmi(sent(NV, NV))
    assert (s.value, s.n, s.u) == (0, 2, 2)


def test_empty_sentence():
    s = cmi(Sentence())
    assert (s.value, s.n, s.u) == (0, 0, 0)
    assert group(Sentence()) is None


def test_three_to_one():
    assert cmi(sent(A, A, A, B)).value == 25.0


def test_nonverbal_excluded_from_denominator():
    assert cmi(sent(A, A, A, B, NV, NV)).value == 25.0


@pytest.mark.parametrize("value,bucket", [
    (0, 1), (1e-9, 2), (15, 2), (15 + 1e-9, 3), (30, 3), (30 + 1e-9, 4), (45, 4), (45 + 1e-9, 5), (50, 5),
])
def test_bucket_boundaries(value, bucket):
    assert cmi_bucket(value) == bucket


def test_bucket_out_of_range():
    with pytest.raises(ValueError):
        cmi_bucket(50.5)


def test_group_english_dominant_c2():
    # 1 A among 10 verbal tokens -> CMI 10
    g = group(sent(*([B] * 9 + [A])))
    assert (g.dominant, g.bucket, g.label) == (B, 2, "EN-C2")


def test_group_monolingual_c1():
    assert group(sent(A, A)).label == "ZH-C1"


def test_group_tie_goes_to_first_verbal_token():
    assert cmi(sent(A, B, A, B)).value == 50.0
    assert group(sent(NV, A, B, B, A)).label == "ZH-C5"
    assert group(sent(B, A)).label == "EN-C5"


def test_group_exact_at_fifteen():
    # 17 of 20 dominant -> exactly 15 in rationals, 15.000000000000002 in floats
    s = sent(*([A] * 17 + [B] * 3))
    assert cmi(s).exact == Fraction(15)
    assert group(s).bucket == 2


def test_histogram_examples():
    h = histogram(Corpus((sent(A, A, A),)))
    assert h.as_dict()["ZH-C1"] == 1.0
    empty = histogram(Corpus())
    assert all(m == 0 for m in empty.masses)
    c2 = sent(*([A] * 9 + [B]))  # CMI 10
    c3 = sent(A, A, A, B)  # CMI 25
    h = histogram(Corpus((c2, c2, c3, c3)))
    assert h.as_dict()["ZH-C2"] == 0.5 and h.as_dict()["ZH-C3"] == 0.5


def test_histogram_empty_bin():
    h = histogram(Corpus((sent(NV), sent(A))))
    assert h.as_dict()["EMPTY"] == 0.5


def test_histogram_distance_examples():
    h = CmiHistogram.from_masses({"ZH-C2": 1.0})
    assert histogram_distance(h, h) == 0
    assert histogram_distance(h, CmiHistogram.from_masses({"EN-C4": 1.0})) == 1.0
    assert histogram_distance(h, CmiHistogram.from_masses({"ZH-C2": 0.5, "ZH-C3": 0.5})) == 0.5


tags_strategy = st.lists(st.sampled_from([A, B, NV]), max_size=30)


@given(tags_strategy)
def test_cmi_matches_brute_force(tags):
    assert cmi(sent(*tags)).value == brute_force_cmi(tags)


@given(tags_strategy)
def test_cmi_range_and_max(tags):
    v = cmi(sent(*tags)).value
    assert 0 <= v <= 50
    if v == 50:
        assert tags.count(A) == tags.count(B) > 0


@given(st.floats(0, 50))
def test_buckets_partition(value):
    hits = [b for b, (lo, hi) in enumerate([(0, 0), (0, 15), (15, 30), (30, 45), (45, 50)], 1)
            if (value == 0 if b == 1 else lo < value <= hi)]
    assert hits == [cmi_bucket(value)]


@given(st.lists(tags_strategy, min_size=1, max_size=20))
def test_histogram_normalized(corpus_tags):
    h = histogram(Corpus(tuple(sent(*t) for t in corpus_tags)))
    assert abs(sum(h.masses) - 1) <= 1e-12
    assert all(0 <= m <= 1 for m in h.masses)


def test_report_formats():
    hist = {"real": histogram(Corpus((sent(A, A, A, B), sent(B))))}
    text = format_report(hist)
    assert text.splitlines()[0].split() == ["group", "real"]
    assert [l.split()[0] for l in text.splitlines()[1:12]] == list(GROUP_LABELS)
    payload = json.loads(report_json(hist))
    assert payload["corpora"]["real"]["percent"]["ZH-C3"] == 50.0
    assert payload["corpora"]["real"]["percent"]["EN-C1"] == 50.0
