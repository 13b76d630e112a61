"""Corpus and dictionary I/O plus the canonical in-memory data model.

All types are frozen dataclasses: immutable after construction and safe to
share across threads.

File formats (UTF-8, ``\\n`` line endings):

Corpus TSV
    The first line declares the positive classes, e.g.::

        #classes: Chemical,Disease

    Class ids 1..k follow declaration order; id 0 is the negative class,
    written ``O`` on disk.  Token lines carry one, two, or three
    tab-separated columns: ``token``, ``token<TAB>gold``, or
    ``token<TAB>gold<TAB>distant``.  In the distant column ``O`` means
    *unlabeled* (not matched by the dictionary), which is semantically
    distinct from a gold ``O`` (a true negative).  Sentences are separated
    by a single blank line.  A corpus holding only distant labels is
    written with an explicit ``#columns: distant`` header because a bare
    two-column file defaults to gold.

Dictionary
    One entry per line, ``surface<TAB>class``.  Multi-word surfaces are
    split on single spaces into token sequences.  Entry order is load
    order and is significant: coverage subsetting takes a prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

NEGATIVE = 0  # gold "not an entity" / distant "not matched"; "O" on disk


class ParseError(ValueError):
    """Raised for malformed corpus, dictionary, or embedding files."""

    def __init__(self, path: str | Path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


@dataclass(frozen=True)
class Token:
    text: str
    sentence_index: int
    position: int

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("sentence must contain at least one token")
        for p, tok in enumerate(self.tokens):
            if tok.position != p:
                raise ValueError("token positions must be consecutive from 0")

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Corpus:
    """Sentences plus optional parallel gold / distant label tables.

    Label tables hold one int per token: 0 for Negative (gold) or
    Unlabeled (distant), 1..k for positive classes.
    """

    sentences: tuple[Sentence, ...]
    class_names: tuple[str, ...]
    gold: tuple[tuple[int, ...], ...] | None = None
    distant: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if not self.class_names:
            raise ValueError("corpus must declare at least one class")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("duplicate class names")
        for table, name in ((self.gold, "gold"), (self.distant, "distant")):
            if table is None:
                continue
            if len(table) != len(self.sentences):
                raise ValueError(f"{name} table does not align with sentences")
            for sent, row in zip(self.sentences, table):
                if len(row) != len(sent):
                    raise ValueError(f"{name} row length mismatch")
                if any(v < 0 or v > self.num_classes for v in row):
                    raise ValueError(f"{name} label id out of range")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def class_id(self, name: str) -> int:
        try:
            return self.class_names.index(name) + 1
        except ValueError:
            raise ValueError(f"unknown class name: {name!r}") from None

    def with_distant(self, table: list[list[int]] | tuple) -> "Corpus":
        return replace(self, distant=tuple(tuple(row) for row in table))

    def with_gold(self, table: list[list[int]] | tuple) -> "Corpus":
        return replace(self, gold=tuple(tuple(row) for row in table))


@dataclass(frozen=True)
class Dictionary:
    """Ordered gazetteer entries: (surface token sequence, class id 1..k)."""

    entries: tuple[tuple[tuple[str, ...], int], ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        k = len(self.class_names)
        for surface, cid in self.entries:
            if not surface or any(not t for t in surface):
                raise ValueError("dictionary surface must be non-empty")
            if not 1 <= cid <= k:
                raise ValueError(f"class id {cid} out of range 1..{k}")

    def __len__(self) -> int:
        return len(self.entries)

    def class_name(self, cid: int) -> str:
        return self.class_names[cid - 1]


def corpus_from_texts(
    sentences: list[list[str]],
    class_names: list[str] | tuple[str, ...],
    gold: list[list[int]] | None = None,
    distant: list[list[int]] | None = None,
) -> Corpus:
    """Convenience constructor from plain token strings."""
    sent_objs = tuple(
        Sentence(tuple(Token(t, si, p) for p, t in enumerate(texts)))
        for si, texts in enumerate(sentences)
    )
    return Corpus(
        sentences=sent_objs,
        class_names=tuple(class_names),
        gold=None if gold is None else tuple(tuple(r) for r in gold),
        distant=None if distant is None else tuple(tuple(r) for r in distant),
    )


_COLUMN_LAYOUTS = {
    "gold": ("gold",),
    "distant": ("distant",),
    "gold,distant": ("gold", "distant"),
}


def load_corpus(path: str | Path) -> Corpus:
    """Parse a corpus TSV file.

    Raises ParseError with the offending line number for malformed lines,
    unknown class names, or an empty corpus.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    if not lines or not lines[0].startswith("#classes:"):
        raise ParseError(path, 1, "first line must be '#classes: name1,name2,...'")
    class_names = tuple(n.strip() for n in lines[0][len("#classes:"):].split(",") if n.strip())
    if not class_names:
        raise ParseError(path, 1, "no class names declared")
    name_to_id = {n: i + 1 for i, n in enumerate(class_names)}

    start = 1
    layout: tuple[str, ...] | None = None
    if len(lines) > 1 and lines[1].startswith("#columns:"):
        decl = lines[1][len("#columns:"):].strip()
        if decl not in _COLUMN_LAYOUTS:
            raise ParseError(path, 2, f"unknown column declaration {decl!r}")
        layout = _COLUMN_LAYOUTS[decl]
        start = 2

    def parse_label(field: str, line_no: int) -> int:
        if field == "O":
            return NEGATIVE
        if field not in name_to_id:
            raise ParseError(path, line_no, f"unknown class name {field!r}")
        return name_to_id[field]

    sentences: list[list[str]] = []
    gold_rows: list[list[int]] = []
    distant_rows: list[list[int]] = []
    cur_toks: list[str] = []
    cur_gold: list[int] = []
    cur_distant: list[int] = []
    n_cols: int | None = None

    def flush():
        if cur_toks:
            sentences.append(list(cur_toks))
            gold_rows.append(list(cur_gold))
            distant_rows.append(list(cur_distant))
            cur_toks.clear()
            cur_gold.clear()
            cur_distant.clear()

    for offset, raw in enumerate(lines[start:]):
        line_no = start + offset + 1
        if raw == "":
            flush()
            continue
        cols = raw.split("\t")
        if n_cols is None:
            n_cols = len(cols)
            if layout is None:
                if n_cols == 1:
                    layout = ()
                elif n_cols == 2:
                    layout = ("gold",)
                elif n_cols == 3:
                    layout = ("gold", "distant")
                else:
                    raise ParseError(path, line_no, f"expected 1-3 columns, got {n_cols}")
            if len(layout) != n_cols - 1:
                raise ParseError(
                    path, line_no,
                    f"{n_cols} columns do not match declared layout {','.join(layout)}",
                )
        elif len(cols) != n_cols:
            raise ParseError(path, line_no, f"expected {n_cols} columns, got {len(cols)}")
        if not cols[0]:
            raise ParseError(path, line_no, "empty token")
        cur_toks.append(cols[0])
        for field, kind in zip(cols[1:], layout):
            value = parse_label(field, line_no)
            (cur_gold if kind == "gold" else cur_distant).append(value)
    flush()

    if not sentences:
        raise ParseError(path, len(lines), "empty corpus")
    assert layout is not None
    return corpus_from_texts(
        sentences,
        class_names,
        gold=gold_rows if "gold" in layout else None,
        distant=distant_rows if "distant" in layout else None,
    )


def dumps_corpus(corpus: Corpus) -> str:
    """Render a corpus in the canonical TSV form (inverse of load_corpus)."""
    out = ["#classes: " + ",".join(corpus.class_names)]
    has_gold = corpus.gold is not None
    has_distant = corpus.distant is not None
    if has_distant and not has_gold:
        out.append("#columns: distant")
    for si, sent in enumerate(corpus.sentences):
        if si > 0:
            out.append("")
        for p, tok in enumerate(sent.tokens):
            cols = [tok.text]
            if has_gold:
                g = corpus.gold[si][p]
                cols.append("O" if g == NEGATIVE else corpus.class_names[g - 1])
            if has_distant:
                d = corpus.distant[si][p]
                cols.append("O" if d == NEGATIVE else corpus.class_names[d - 1])
            out.append("\t".join(cols))
    return "\n".join(out) + "\n"


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(dumps_corpus(corpus), encoding="utf-8")


def load_dictionary(
    path: str | Path,
    class_names: list[str] | tuple[str, ...] | None = None,
) -> Dictionary:
    """Parse a dictionary file.

    When class_names is given, unknown class names raise ParseError;
    otherwise classes are assigned ids in order of first appearance.
    """
    path = Path(path)
    known: list[str] = list(class_names) if class_names is not None else []
    fixed = class_names is not None
    entries: list[tuple[tuple[str, ...], int]] = []
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").split("\n"), start=1):
        if raw == "":
            continue
        cols = raw.split("\t")
        if len(cols) != 2:
            raise ParseError(path, line_no, f"expected 2 columns, got {len(cols)}")
        surface = tuple(t for t in cols[0].split(" ") if t)
        if not surface:
            raise ParseError(path, line_no, "blank surface")
        cname = cols[1]
        if not cname:
            raise ParseError(path, line_no, "blank class name")
        if cname not in known:
            if fixed:
                raise ParseError(path, line_no, f"unknown class name {cname!r}")
            known.append(cname)
        entries.append((surface, known.index(cname) + 1))
    return Dictionary(entries=tuple(entries), class_names=tuple(known))


def dumps_dictionary(dictionary: Dictionary) -> str:
    lines = [
        " ".join(surface) + "\t" + dictionary.class_name(cid)
        for surface, cid in dictionary.entries
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def write_dictionary(dictionary: Dictionary, path: str | Path) -> None:
    Path(path).write_text(dumps_dictionary(dictionary), encoding="utf-8")


def subset_dictionary(dictionary: Dictionary, fraction: float) -> Dictionary:
    """First ceil(fraction * len) entries, original order.

    ceil means a positive fraction never yields an empty dictionary.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = math.ceil(fraction * len(dictionary.entries))
    return Dictionary(entries=dictionary.entries[:n], class_names=dictionary.class_names)
