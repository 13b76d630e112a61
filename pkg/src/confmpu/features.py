"""Token feature vectors: deterministic embeddings plus dictionary lexicon bits.

Each token's vector is the concatenation of

* the mean of token embeddings over a symmetric context window, and
* an n-bit lexicon vector where bit j (1-based) is 1 iff some j-gram of
  the sentence covering the token exactly matches a dictionary surface of
  length j, regardless of entity class.

Layout is ``[embedding | lexicon bits]`` so the bits can be masked out for
no-lexicon ablations (see ``zero_lexicon_bits``).

Embeddings come either from a fixed hash of the token text (unit-norm,
reproducible across processes) or from a word2vec-style text file, with
the hashed vector as out-of-vocabulary fallback.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .data import Corpus, Dictionary, ParseError, Sentence, Token


@dataclass(frozen=True)
class FeatureConfig:
    embed_dim: int = 4         # matches the synthetic generator's default
    window: int = 3            # lexicon n-gram bits
    embed_source: str = "hashed"  # "hashed" | "file"
    embed_seed: int = 0
    embed_path: str | None = None
    context_radius: int = 0

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.context_radius < 0:
            raise ValueError("context_radius must be >= 0")
        if self.embed_source not in ("hashed", "file"):
            raise ValueError(f"unknown embed_source {self.embed_source!r}")
        if self.embed_source == "file" and not self.embed_path:
            raise ValueError("embed_source 'file' requires embed_path")

    @property
    def dim(self) -> int:
        return self.embed_dim + self.window


def hashed_embedding(text: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-random unit-norm vector for a token string.

    Stable across processes and platforms: the RNG is seeded from a
    blake2b digest of (seed, text), never from Python's salted hash().
    """
    digest = hashlib.blake2b(
        f"{seed}\x00{text}".encode("utf-8"), digest_size=16
    ).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


@lru_cache(maxsize=8)
def _load_embedding_file(path: str, dim: int) -> dict[str, tuple[float, ...]]:
    table: dict[str, tuple[float, ...]] = {}
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    start = 0
    if lines and len(lines[0].split(" ")) == 2:
        # word2vec text header "vocab_size dim"
        head = lines[0].split(" ")
        if all(f.isdigit() for f in head):
            if int(head[1]) != dim:
                raise ParseError(path, 1, f"embedding dim {head[1]} != configured {dim}")
            start = 1
    for line_no, raw in enumerate(lines[start:], start=start + 1):
        if raw == "":
            continue
        fields = raw.split(" ")
        if len(fields) != dim + 1:
            raise ParseError(path, line_no, f"expected token + {dim} values, got {len(fields)}")
        try:
            vec = tuple(float(f) for f in fields[1:])
        except ValueError:
            raise ParseError(path, line_no, "non-numeric embedding value") from None
        table[fields[0]] = vec
    return table


def embed(token: Token | str, cfg: FeatureConfig) -> np.ndarray:
    """Embedding vector of length cfg.embed_dim for one token."""
    text = token.text if isinstance(token, Token) else token
    if cfg.embed_source == "file":
        table = _load_embedding_file(cfg.embed_path, cfg.embed_dim)
        if text in table:
            return np.array(table[text], dtype=np.float64)
    return hashed_embedding(text, cfg.embed_dim, cfg.embed_seed)


def lexicon_features(sentence: Sentence, dictionary: Dictionary, window: int) -> np.ndarray:
    """(len(sentence), window) 0/1 matrix of class-agnostic n-gram hits."""
    if window < 1:
        raise ValueError("window must be >= 1")
    by_length: dict[int, set[tuple[str, ...]]] = {}
    for surface, _cid in dictionary.entries:
        if len(surface) <= window:
            by_length.setdefault(len(surface), set()).add(surface)
    texts = sentence.texts()
    n = len(texts)
    bits = np.zeros((n, window), dtype=np.float64)
    for j, surfaces in by_length.items():
        for start in range(0, n - j + 1):
            if tuple(texts[start:start + j]) in surfaces:
                bits[start:start + j, j - 1] = 1.0
    return bits


def _window_mean(emb: np.ndarray, radius: int) -> np.ndarray:
    """Row-wise mean over [p-radius, p+radius] clipped at sentence bounds."""
    if radius == 0:
        return emb
    n = emb.shape[0]
    csum = np.vstack([np.zeros((1, emb.shape[1])), np.cumsum(emb, axis=0)])
    lo = np.maximum(np.arange(n) - radius, 0)
    hi = np.minimum(np.arange(n) + radius + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


def featurize(corpus: Corpus, dictionary: Dictionary, cfg: FeatureConfig) -> list[np.ndarray]:
    """Per-sentence feature matrices of shape (len, embed_dim + window)."""
    cache: dict[str, np.ndarray] = {}

    def emb_of(text: str) -> np.ndarray:
        v = cache.get(text)
        if v is None:
            v = embed(text, cfg)
            cache[text] = v
        return v

    out = []
    for sent in corpus.sentences:
        emb = np.stack([emb_of(t) for t in sent.texts()])
        emb = _window_mean(emb, cfg.context_radius)
        bits = lexicon_features(sent, dictionary, cfg.window)
        out.append(np.hstack([emb, bits]))
    return out


def zero_lexicon_bits(features: list[np.ndarray], cfg: FeatureConfig) -> list[np.ndarray]:
    """Copy of the feature table with the lexicon bits zeroed (ablation hook)."""
    out = []
    for mat in features:
        m = mat.copy()
        m[:, cfg.embed_dim:] = 0.0
        out.append(m)
    return out


def write_features_csv(corpus: Corpus, features: list[np.ndarray], path: str | Path) -> None:
    """Debug dump: one token per row with sentence/position/text prefix."""
    rows = ["sentence,position,token," + ",".join(
        f"x{i}" for i in range(features[0].shape[1]))]
    for si, (sent, mat) in enumerate(zip(corpus.sentences, features)):
        for p, tok in enumerate(sent.tokens):
            vals = ",".join(repr(float(v)) for v in mat[p])
            rows.append(f"{si},{p},{tok.text},{vals}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")
