"""Synthetic corpora with known ground truth, priors, and confidence scores.

Tokens are drawn i.i.d. from a discrete mixture: a class label y in 0..k
(0 = background) followed by a surface string from that class's emission
distribution.  Because features hash the surface string, controlling which
strings each class emits controls the class-conditional feature
distributions exactly:

* class-i *exclusive* surfaces are chosen so their hashed embeddings
  cluster around coordinate axis i-1 (candidates are ranked by cosine and
  the most aligned kept; `separation` scales the candidate pool and hence
  the cluster tightness);
* *ambiguous* surfaces are emitted by class i and by the background with
  masses arranged so their entity posterior equals `ambiguous_lambda`;
* a small `leak` mass makes every entity class occasionally emit
  background surfaces, so the true confidence lambda(s) = p(y > 0 | s) is
  strictly positive for every surface.

The emitted dictionary lists, per class, the exclusive surfaces in
selection order followed by the ambiguous ones, interleaved round-robin
across classes so that a prefix subset keeps per-class coverage roughly
equal to the prefix fraction.

Bookkeeping records the exact emission model and the exact per-surface
token counts of the generated corpus, so distant-label precision/recall
for any (single-token) dictionary, oracle priors, and the true lambda
table are all computable without re-scanning the corpus.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from .data import Corpus, Dictionary, corpus_from_texts
from .distant import ClassQuality
from .features import hashed_embedding


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 2
    n_sentences: int = 2000
    sentence_len: tuple[int, int] = (6, 12)
    entity_pool: int = 100
    background_pool: int = 400
    ambiguous_per_class: int = 2
    priors: tuple[float, ...] = (0.12, 0.12)
    coverage: float = 1.0
    separation: float = 4.0
    ambiguous_mass: float = 0.05
    ambiguous_lambda: float = 0.5
    leak: float = 0.02
    hard_negative_fraction: float = 0.30
    hard_negative_band: tuple[float, float] = (0.20, 0.35)
    embed_dim: int = 4
    embed_seed: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("need at least one positive class")
        if len(self.priors) != self.num_classes:
            raise ValueError("one prior per positive class required")
        if any(not 0.0 < p < 1.0 for p in self.priors) or sum(self.priors) >= 1.0:
            raise ValueError("priors must lie in (0,1) and sum below 1")
        if not 0.0 < self.coverage <= 1.0:
            raise ValueError("coverage must lie in (0, 1]")
        if self.separation < 0.0:
            raise ValueError("separation must be >= 0")
        if self.entity_pool < 1 or self.background_pool < 1:
            raise ValueError("pools must be non-empty")
        if self.num_classes > self.embed_dim:
            raise ValueError("embed_dim must be >= num_classes for axis separation")
        if self.sentence_len[0] < 1 or self.sentence_len[0] > self.sentence_len[1]:
            raise ValueError("invalid sentence length range")
        if not 0.0 <= self.leak < 0.5 or not 0.0 <= self.ambiguous_mass < 0.5:
            raise ValueError("leak and ambiguous_mass must lie in [0, 0.5)")
        if self.ambiguous_per_class and not 0.0 < self.ambiguous_lambda < 1.0:
            raise ValueError("ambiguous_lambda must lie in (0, 1)")
        if not 0.0 <= self.hard_negative_fraction <= 1.0:
            raise ValueError("hard_negative_fraction must lie in [0, 1]")
        lo, hi = self.hard_negative_band
        if not 0.0 <= lo < hi < 1.0:
            raise ValueError("hard_negative_band must satisfy 0 <= lo < hi < 1")


@dataclass(frozen=True)
class Bookkeeping:
    """Exact generation record: emission model plus realized token counts."""

    class_names: tuple[str, ...]
    surfaces: tuple[str, ...]
    emission: np.ndarray        # (k+1, n_surfaces) class-conditional p(s | y=c)
    priors: tuple[float, ...]   # pi_1..pi_k as configured
    counts: np.ndarray          # (k+1, n_surfaces) realized token counts
    lam: np.ndarray             # (n_surfaces,) true p(y > 0 | s)
    fingerprint: str
    class_pools: tuple[tuple[str, ...], ...]  # dictionary-eligible, in pool order
    spec: SynthSpec

    @property
    def surface_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.surfaces)}

    @property
    def token_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def true_priors(self) -> tuple[float, ...]:
        """Realized gold class fractions (what oracle_priors must return)."""
        per_class = self.token_counts
        total = per_class.sum()
        return tuple(float(per_class[c]) / total for c in range(1, len(per_class)))

    def predicted_label_quality(self, dictionary: Dictionary) -> dict[str, ClassQuality]:
        """Token precision/recall the matcher must reproduce exactly.

        Valid for single-token surfaces (the only kind this generator
        emits); first dictionary entry wins on duplicates, mirroring the
        matcher's tie rule.
        """
        index = self.surface_index
        label_of: dict[int, int] = {}
        for surface, cid in dictionary.entries:
            if len(surface) != 1:
                raise ValueError("generated corpora use single-token surfaces only")
            si = index.get(surface[0])
            if si is not None and si not in label_of:
                label_of[si] = cid
        k = len(self.class_names)
        matched = np.zeros(k + 1)
        correct = np.zeros(k + 1)
        for si, cid in label_of.items():
            matched[cid] += self.counts[:, si].sum()
            correct[cid] += self.counts[cid, si]
        gold = self.token_counts
        out = {}
        for cid in range(1, k + 1):
            p = correct[cid] / matched[cid] if matched[cid] else 1.0
            r = correct[cid] / gold[cid] if gold[cid] else 1.0
            out[self.class_names[cid - 1]] = ClassQuality(
                float(p), float(r), int(matched[cid]), int(gold[cid])
            )
        return out


class GeneratedData(NamedTuple):
    corpus: Corpus
    dictionary: Dictionary
    lam_table: list[np.ndarray]
    bookkeeping: Bookkeeping


def _pick_clustered(
    prefix: str, count: int, axis: int, dim: int, seed: int, separation: float
) -> list[str]:
    """Candidate strings ranked by embedding alignment with one axis."""
    multiplier = 1 + int(round(25.0 * separation))
    names = [f"{prefix}{n:05d}" for n in range(count * multiplier)]
    cos = np.array([hashed_embedding(s, dim, seed)[axis] for s in names])
    order = np.argsort(-cos, kind="stable")[:count]
    return [names[i] for i in sorted(order)]


def _pick_background(
    count: int,
    k: int,
    dim: int,
    seed: int,
    separation: float,
    hard_fraction: float,
    hard_band: tuple[float, float],
) -> list[str]:
    """Background surfaces: mostly pushed away from every class axis, plus
    a hard-negative share whose alignment with one class axis falls inside
    hard_band, below the entity clusters but well above the bulk."""
    multiplier = 1 + int(round(5.0 * separation))
    names = [f"bgw{n:05d}" for n in range(count * multiplier)]
    vecs = np.array([hashed_embedding(s, dim, seed) for s in names])
    n_hard = int(round(hard_fraction * count))
    chosen: list[int] = []
    taken = np.zeros(len(names), dtype=bool)
    lo, hi = hard_band
    cap = vecs[:, :k].max(axis=1) <= hi  # strongest alignment stays in band
    for axis in range(k):
        want = n_hard // k + (1 if axis < n_hard % k else 0)
        in_band = np.flatnonzero(
            (vecs[:, axis] >= lo) & (vecs[:, axis] <= hi) & cap & ~taken
        )
        if len(in_band) < want:
            raise ValueError(
                "inconsistent spec: not enough hard-negative candidates; "
                "lower hard_negative_fraction or raise separation"
            )
        picked = in_band[:want]
        chosen.extend(int(i) for i in picked)
        taken[picked] = True
    worst = vecs[:, :k].max(axis=1)
    worst[taken] = np.inf
    easy = np.argsort(worst, kind="stable")[: count - len(chosen)]
    chosen.extend(int(i) for i in easy)
    return [names[i] for i in sorted(chosen)]


def _fingerprint(sentences: list[list[str]], gold: list[list[int]]) -> str:
    h = hashlib.blake2b(digest_size=16)
    for texts, row in zip(sentences, gold):
        h.update("\x1f".join(texts).encode("utf-8"))
        h.update(bytes(row))
        h.update(b"\n")
    return h.hexdigest()


def generate(spec: SynthSpec) -> GeneratedData:
    """Sample a corpus with gold labels plus its dictionary, true lambda
    table, and bookkeeping."""
    k = spec.num_classes
    rng = np.random.default_rng(spec.seed)

    pools = [
        _pick_clustered(f"e{i}w", spec.entity_pool, i - 1, spec.embed_dim,
                        spec.embed_seed, spec.separation)
        for i in range(1, k + 1)
    ]
    ambiguous = [
        [f"amb{i}w{n:03d}" for n in range(spec.ambiguous_per_class)]
        for i in range(1, k + 1)
    ]
    background = _pick_background(
        spec.background_pool, k, spec.embed_dim, spec.embed_seed, spec.separation,
        spec.hard_negative_fraction, spec.hard_negative_band,
    )

    surfaces: list[str] = []
    for i in range(k):
        surfaces.extend(pools[i])
        surfaces.extend(ambiguous[i])
    bg_start = len(surfaces)
    surfaces.extend(background)
    n_surf = len(surfaces)
    index = {s: j for j, s in enumerate(surfaces)}

    pi0 = 1.0 - sum(spec.priors)
    emission = np.zeros((k + 1, n_surf))
    amb_mass = spec.ambiguous_mass if spec.ambiguous_per_class else 0.0
    bg_budget = 1.0
    for i in range(1, k + 1):
        excl_mass = 1.0 - amb_mass - spec.leak
        if excl_mass <= 0.0:
            raise ValueError("ambiguous_mass + leak leave no mass for exclusive surfaces")
        for s in pools[i - 1]:
            emission[i, index[s]] = excl_mass / spec.entity_pool
        for s in ambiguous[i - 1]:
            a = amb_mass / spec.ambiguous_per_class
            emission[i, index[s]] = a
            # background mass making p(y > 0 | s) == ambiguous_lambda
            b = spec.priors[i - 1] * a * (1.0 - spec.ambiguous_lambda) / (
                pi0 * spec.ambiguous_lambda
            )
            emission[0, index[s]] = b
            bg_budget -= b
        if spec.leak:
            for s in background:
                emission[i, index[s]] += spec.leak / spec.background_pool
    if bg_budget <= 0.0:
        raise ValueError(
            "inconsistent spec: ambiguous emission leaves no background mass"
        )
    for s in background:
        emission[0, index[s]] += bg_budget / spec.background_pool

    full_priors = np.array([pi0, *spec.priors])
    joint = full_priors[:, None] * emission          # p(y = c, s)
    marginal = joint.sum(axis=0)
    lam = joint[1:].sum(axis=0) / marginal

    lengths = rng.integers(spec.sentence_len[0], spec.sentence_len[1] + 1,
                           size=spec.n_sentences)
    n_tokens = int(lengths.sum())
    classes = rng.choice(k + 1, size=n_tokens, p=full_priors)
    surface_ids = np.empty(n_tokens, dtype=np.int64)
    for c in range(k + 1):
        mask = classes == c
        if mask.any():
            surface_ids[mask] = rng.choice(n_surf, size=int(mask.sum()), p=emission[c])

    counts = np.zeros((k + 1, n_surf), dtype=np.int64)
    np.add.at(counts, (classes, surface_ids), 1)
    for c in range(1, k + 1):
        if counts[c].sum() == 0:
            raise ValueError(
                f"inconsistent spec: class {c} drew no tokens; "
                "increase n_sentences or priors"
            )

    sentences: list[list[str]] = []
    gold: list[list[int]] = []
    lam_table: list[np.ndarray] = []
    pos = 0
    for length in lengths:
        ids = surface_ids[pos:pos + length]
        sentences.append([surfaces[j] for j in ids])
        gold.append([int(c) for c in classes[pos:pos + length]])
        lam_table.append(lam[ids].copy())
        pos += length

    class_names = tuple(f"E{i}" for i in range(1, k + 1))
    corpus = corpus_from_texts(sentences, class_names, gold=gold)

    class_pools = tuple(tuple(pools[i] + ambiguous[i]) for i in range(k))
    dictionary = _build_dictionary(class_pools, class_names, spec.coverage)

    book = Bookkeeping(
        class_names=class_names,
        surfaces=tuple(surfaces),
        emission=emission,
        priors=spec.priors,
        counts=counts,
        lam=lam,
        fingerprint=_fingerprint(sentences, gold),
        class_pools=class_pools,
        spec=spec,
    )
    return GeneratedData(corpus, dictionary, lam_table, book)


def _build_dictionary(
    class_pools: tuple[tuple[str, ...], ...],
    class_names: tuple[str, ...],
    coverage: float,
) -> Dictionary:
    """Round-robin interleave of per-class pool prefixes."""
    kept = [pool[:math.ceil(coverage * len(pool))] for pool in class_pools]
    entries: list[tuple[tuple[str, ...], int]] = []
    for row in range(max(len(p) for p in kept)):
        for cid, pool in enumerate(kept, start=1):
            if row < len(pool):
                entries.append(((pool[row],), cid))
    return Dictionary(entries=tuple(entries), class_names=class_names)


def true_lambda(corpus: Corpus, bookkeeping: Bookkeeping) -> list[np.ndarray]:
    """Exact per-token entity posterior for a generated corpus."""
    sentences = [s.texts() for s in corpus.sentences]
    if corpus.gold is None:
        raise ValueError("not a generated corpus (gold labels missing)")
    fp = _fingerprint(sentences, [list(row) for row in corpus.gold])
    if fp != bookkeeping.fingerprint:
        raise ValueError("corpus does not match this bookkeeping record")
    index = bookkeeping.surface_index
    return [
        np.array([bookkeeping.lam[index[t]] for t in texts]) for texts in sentences
    ]


@dataclass(frozen=True)
class GaussianMixtureSampler:
    """Continuous mixture with known densities for the decomposition check.

    Component 0 is the negative class; components 1..k are positive with
    the given priors.  lambda(x) > 0 everywhere since Gaussians share
    full support.
    """

    means: np.ndarray  # (k+1, d)
    sigma: float
    priors: tuple[float, ...]

    @property
    def full_priors(self) -> np.ndarray:
        return np.array([1.0 - sum(self.priors), *self.priors])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comps = rng.choice(len(self.full_priors), size=n, p=self.full_priors)
        noise = rng.standard_normal((n, self.means.shape[1]))
        return self.means[comps] + self.sigma * noise

    def sample_class(self, i: int, rng: np.random.Generator, n: int) -> np.ndarray:
        noise = rng.standard_normal((n, self.means.shape[1]))
        return self.means[i] + self.sigma * noise

    def lam(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        d2 = ((x[:, None, :] - self.means[None, :, :]) ** 2).sum(axis=2)
        logw = -d2 / (2.0 * self.sigma ** 2) + np.log(self.full_priors)[None, :]
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        return w[:, 1:].sum(axis=1) / w.sum(axis=1)

    @classmethod
    def default(cls) -> "GaussianMixtureSampler":
        means = np.array([[0.0, 0.0], [2.5, 0.0], [0.0, 2.5]])
        return cls(means=means, sigma=1.0, priors=(0.15, 0.15))


class SurfaceMixtureSampler:
    """Discrete sampler over a generated corpus's surface mixture.

    Samples are surface indices; pair with a decision function and lambda
    lookup that accept index arrays.
    """

    def __init__(self, bookkeeping: Bookkeeping):
        self._emission = bookkeeping.emission
        full = np.array([1.0 - sum(bookkeeping.priors), *bookkeeping.priors])
        self._marginal = (full[:, None] * self._emission).sum(axis=0)
        self._marginal /= self._marginal.sum()
        self._lam = bookkeeping.lam
        self.priors = bookkeeping.priors

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(len(self._marginal), size=n, p=self._marginal)

    def sample_class(self, i: int, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(len(self._marginal), size=n, p=self._emission[i])

    def lam(self, ids: np.ndarray) -> np.ndarray:
        return self._lam[np.asarray(ids, dtype=np.int64)]


def bookkeeping_json_dict(book: Bookkeeping, lambda_path: str) -> dict:
    """JSON sidecar: counts, true priors, and the lambda table location."""
    spec_dict = asdict(book.spec)
    spec_dict["sentence_len"] = list(book.spec.sentence_len)
    spec_dict["priors"] = list(book.spec.priors)
    return {
        "class_names": list(book.class_names),
        "configured_priors": list(book.priors),
        "true_priors": list(book.true_priors()),
        "token_counts": [int(c) for c in book.token_counts],
        "n_surfaces": len(book.surfaces),
        "fingerprint": book.fingerprint,
        "lambda_table": lambda_path,
        "spec": spec_dict,
    }
