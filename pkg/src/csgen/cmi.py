"""Code-Mixing Index per utterance, dominant-language CMI groups, and corpus histograms.

CMI = 100 * (1 - max_lang_count / (n - u)) for n > u, else 0, where ``u`` counts
non-verbal tokens. Buckets are C1 = 0, C2 = (0,15], C3 = (15,30], C4 = (30,45],
C5 = (45,50].
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable

from .corpus import Corpus, LanguageTag, Sentence

BUCKET_UPPER = (0, 15, 30, 45, 50)
GROUP_LABELS = (
    "ZH-C1", "ZH-C2", "ZH-C3", "ZH-C4", "ZH-C5",
    "EN-C1", "EN-C2", "EN-C3", "EN-C4", "EN-C5",
    "EMPTY",
)
EMPTY_BIN = len(GROUP_LABELS) - 1
_PREFIX = {LanguageTag.LANG_A: "ZH", LanguageTag.LANG_B: "EN"}


@dataclass(frozen=True)
class CmiScore:
    value: float
    n: int
    u: int
    dominant_count: int

    @property
    def exact(self) -> Fraction:
        """CMI as an exact rational, used for bucketing."""
        if self.n == self.u:
            return Fraction(0)
        verbal = self.n - self.u
        return Fraction(100 * (verbal - self.dominant_count), verbal)


@dataclass(frozen=True)
class CmiGroup:
    dominant: LanguageTag
    bucket: int  # 1..5

    @property
    def label(self) -> str:
        return f"{_PREFIX[self.dominant]}-C{self.bucket}"

    @property
    def index(self) -> int:
        return GROUP_LABELS.index(self.label)


def _counts(sentence: Sentence) -> tuple[int, int, int, int]:
    n = len(sentence)
    u = a = b = 0
    for tok in sentence:
        if tok.tag is LanguageTag.NON_VERBAL:
            u += 1
        elif tok.tag is LanguageTag.LANG_A:
            a += 1
        else:
            b += 1
    return n, u, a, b


def cmi(sentence: Sentence) -> CmiScore:
    n, u, a, b = _counts(sentence)
    dominant = max(a, b)
    if n > u:
        value = 100 * (1 - dominant / (n - u))
    else:
        value = 0.0
    return CmiScore(float(value), n, u, dominant)


def cmi_bucket(value: Real) -> int:
    """Bucket 1..5 for a CMI value in [0, 50]; intervals are left-open, right-closed."""
    if value < 0 or value > 50:
        raise ValueError(f"CMI value {value} outside [0, 50]")
    if value == 0:
        return 1
    for bucket, upper in enumerate(BUCKET_UPPER[1:], start=2):
        if value <= upper:
            return bucket
    raise AssertionError("unreachable")


def dominant_language(sentence: Sentence) -> LanguageTag | None:
    """Language with more verbal tokens; ties go to the first verbal token's language."""
    _, _, a, b = _counts(sentence)
    if a == b == 0:
        return None
    if a != b:
        return LanguageTag.LANG_A if a > b else LanguageTag.LANG_B
    for tok in sentence:
        if tok.tag is not LanguageTag.NON_VERBAL:
            return tok.tag
    return None


def group(sentence: Sentence) -> CmiGroup | None:
    dom = dominant_language(sentence)
    if dom is None:
        return None
    return CmiGroup(dom, cmi_bucket(cmi(sentence).exact))


@dataclass(frozen=True)
class CmiHistogram:
    """Mass over the ten groups plus the EMPTY bin, in ``GROUP_LABELS`` order."""

    masses: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(GROUP_LABELS, self.masses))

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "CmiHistogram":
        counts = tuple(int(c) for c in counts)
        if len(counts) != len(GROUP_LABELS):
            raise ValueError(f"expected {len(GROUP_LABELS)} bins")
        total = sum(counts)
        masses = tuple(c / total for c in counts) if total else (0.0,) * len(counts)
        return cls(masses, counts)

    @classmethod
    def from_masses(cls, masses: dict[str, float]) -> "CmiHistogram":
        unknown = set(masses) - set(GROUP_LABELS)
        if unknown:
            raise ValueError(f"unknown group labels {sorted(unknown)}")
        return cls(tuple(float(masses.get(k, 0.0)) for k in GROUP_LABELS), (0,) * len(GROUP_LABELS))


def histogram(corpus: Corpus | Iterable[Sentence]) -> CmiHistogram:
    counts = [0] * len(GROUP_LABELS)
    for sent in corpus:
        g = group(sent)
        counts[EMPTY_BIN if g is None else g.index] += 1
    return CmiHistogram.from_counts(counts)


def histogram_distance(a: CmiHistogram, b: CmiHistogram) -> float:
    """Total variation distance over the eleven bins."""
    return 0.5 * sum(abs(x - y) for x, y in zip(a.masses, b.masses))


def report_rows(histograms: dict[str, CmiHistogram]) -> list[dict]:
    rows = []
    for i, label in enumerate(GROUP_LABELS):
        row = {"group": label}
        for name, h in histograms.items():
            row[name] = round(100 * h.masses[i], 2)
        rows.append(row)
    return rows


def format_report(histograms: dict[str, CmiHistogram]) -> str:
    """Aligned plain-text table of group percentages, one column per corpus."""
    names = list(histograms)
    widths = [max(len(n), 7) for n in names]
    lines = ["group  " + "  ".join(n.rjust(w) for n, w in zip(names, widths))]
    for row in report_rows(histograms):
        cells = "  ".join(f"{row[n]:.2f}".rjust(w) for n, w in zip(names, widths))
        lines.append(f"{row['group']:<7}" + cells)
    totals = "  ".join(str(histograms[n].total).rjust(w) for n, w in zip(names, widths))
    lines.append(f"{'N':<7}" + totals)
    return "\n".join(lines) + "\n"


def report_json(histograms: dict[str, CmiHistogram]) -> str:
    payload = {
        "groups": list(GROUP_LABELS),
        "corpora": {
            name: {
                "sentences": h.total,
                "percent": {k: round(100 * m, 2) for k, m in zip(GROUP_LABELS, h.masses)},
            }
            for name, h in histograms.items()
        },
    }
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
