"""Dictionary-based distant labeling and distant-label quality measurement.

Matching is greedy leftmost-longest exact token-sequence matching with no
overlaps: scanning each sentence left to right, the longest dictionary
surface starting at the current position labels all covered tokens and the
scan resumes after the match.  When two entries share a surface, the entry
earliest in dictionary order wins.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import Corpus, Dictionary, Sentence


@dataclass(frozen=True)
class ClassQuality:
    precision: float
    recall: float
    matched_count: int  # tokens distant-labeled with this class
    gold_count: int     # tokens gold-labeled with this class


@dataclass(frozen=True)
class LabelQualityReport:
    per_class: dict[int, ClassQuality]
    class_names: tuple[str, ...]

    def to_json_dict(self) -> dict:
        """Flat JSON object keyed by class name."""
        return {
            self.class_names[cid - 1]: {
                "precision": q.precision,
                "recall": q.recall,
                "matched_count": q.matched_count,
                "gold_count": q.gold_count,
            }
            for cid, q in sorted(self.per_class.items())
        }


def _surface_lookup(
    dictionary: Dictionary, class_map: dict[int, int], case_sensitive: bool
) -> tuple[dict[tuple[str, ...], int], int]:
    """Map surface -> class id; first entry wins on duplicate surfaces."""
    lookup: dict[tuple[str, ...], int] = {}
    max_len = 0
    for surface, cid in dictionary.entries:
        key = surface if case_sensitive else tuple(t.lower() for t in surface)
        if key not in lookup:
            lookup[key] = class_map[cid]
            max_len = max(max_len, len(key))
    return lookup, max_len


def _match_sentence(
    sentence: Sentence,
    lookup: dict[tuple[str, ...], int],
    max_len: int,
    case_sensitive: bool,
) -> list[int]:
    texts = sentence.texts()
    if not case_sensitive:
        texts = [t.lower() for t in texts]
    n = len(texts)
    labels = [0] * n
    i = 0
    while i < n:
        matched = False
        for length in range(min(max_len, n - i), 0, -1):
            cid = lookup.get(tuple(texts[i:i + length]))
            if cid is not None:
                labels[i:i + length] = [cid] * length
                i += length
                matched = True
                break
        if not matched:
            i += 1
    return labels


def annotate(corpus: Corpus, dictionary: Dictionary, case_sensitive: bool = True) -> Corpus:
    """Fill the distant label table by dictionary matching.

    The dictionary's classes are aligned to the corpus by name; a
    dictionary class unknown to the corpus is an error.  Existing distant
    labels are replaced.
    """
    if not dictionary.entries:
        raise ValueError("dictionary is empty")
    class_map = {
        cid: corpus.class_id(dictionary.class_name(cid))
        for cid in {c for _, c in dictionary.entries}
    }
    lookup, max_len = _surface_lookup(dictionary, class_map, case_sensitive)
    table = [
        _match_sentence(sent, lookup, max_len, case_sensitive)
        for sent in corpus.sentences
    ]
    return corpus.with_distant(table)


def label_quality(distant: Corpus, gold: Corpus) -> LabelQualityReport:
    """Token-level precision/recall of distant labels against gold.

    precision_i = |distant i and gold i| / |distant i|,
    recall_i    = |distant i and gold i| / |gold i|;
    a zero denominator yields 1.0 by convention (vacuously correct).
    """
    if distant.class_names != gold.class_names:
        raise ValueError("class name mismatch between corpora")
    if distant.distant is None or gold.gold is None:
        raise ValueError("need a distant table and a gold table")
    shape_d = [len(s) for s in distant.sentences]
    shape_g = [len(s) for s in gold.sentences]
    if shape_d != shape_g:
        raise ValueError("token structure mismatch between corpora")

    k = distant.num_classes
    matched = [0] * (k + 1)
    correct = [0] * (k + 1)
    gold_n = [0] * (k + 1)
    for drow, grow in zip(distant.distant, gold.gold):
        for d, g in zip(drow, grow):
            if d > 0:
                matched[d] += 1
                if d == g:
                    correct[d] += 1
            if g > 0:
                gold_n[g] += 1

    per_class = {}
    for cid in range(1, k + 1):
        p = correct[cid] / matched[cid] if matched[cid] else 1.0
        r = correct[cid] / gold_n[cid] if gold_n[cid] else 1.0
        per_class[cid] = ClassQuality(p, r, matched[cid], gold_n[cid])
    return LabelQualityReport(per_class=per_class, class_names=distant.class_names)
