"""Binary character matrices: expert cognates, automatic clusters plus
unigram/concept characters, and binarised multiple alignments.

Cells hold 1, 0 or ``MISSING`` (-1). Builders return raw matrices;
:func:`prune` removes uninformative columns before export.
"""
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from .errors import ConfigError, EmptyInputError, InputError, ParseError
from .msa import Msa, MsaConfig, align_all
from .phmm import Model
from .wordlist import GAP, WordForm, Wordlist

log = logging.getLogger(__name__)

MISSING = -1
_SYMBOL = {1: "1", 0: "0", MISSING: "?"}
_VALUE = {"1": 1, "0": 0, "?": MISSING, "-": MISSING}


@dataclass
class CharMatrix:
    taxa: list[str]
    labels: list[str]
    cells: np.ndarray  # int8, (len(taxa), len(labels))

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int8).reshape(len(self.taxa), len(self.labels))

    @property
    def shape(self):
        return self.cells.shape

    def column(self, label: str) -> dict[str, int]:
        k = self.labels.index(label)
        return dict(zip(self.taxa, self.cells[:, k].tolist()))

    def validate(self) -> "CharMatrix":
        if len(set(self.taxa)) != len(self.taxa):
            raise InputError("duplicate taxa")
        if len(set(self.labels)) != len(self.labels):
            dup = sorted({x for x in self.labels if self.labels.count(x) > 1})
            raise InputError(f"duplicate character labels: {dup[:5]}")
        if self.cells.size:
            if np.any(np.all(self.cells == MISSING, axis=0)):
                raise InputError("all-missing character present")
            empty = np.all(self.cells == MISSING, axis=1)
            if np.any(empty):
                raise InputError(f"taxa without data: {[t for t, e in zip(self.taxa, empty) if e]}")
        return self

    def select(self, keep: np.ndarray) -> "CharMatrix":
        keep = np.asarray(keep, dtype=bool)
        return CharMatrix(list(self.taxa), [l for l, k in zip(self.labels, keep) if k], self.cells[:, keep])

    def equals(self, other: "CharMatrix") -> bool:
        return self.taxa == other.taxa and self.labels == other.labels and np.array_equal(self.cells, other.cells)


def concatenate(blocks: Sequence[CharMatrix], taxa: Sequence[str]) -> CharMatrix:
    taxa = list(taxa)
    for b in blocks:
        if b.taxa != taxa:
            raise InputError("blocks must share the taxon order")
    if not blocks:
        return CharMatrix(taxa, [], np.zeros((len(taxa), 0)))
    return CharMatrix(taxa, [l for b in blocks for l in b.labels], np.hstack([b.cells for b in blocks]))


def _code_partition(
    concept: str, kind: str, groups: Sequence[tuple[str, Sequence[WordForm]]], present: set[str], taxa: list[str]
) -> CharMatrix:
    """One character per group: 1 if the taxon has a member, 0 if it has
    another form for the concept, missing otherwise."""
    labels = []
    cols = []
    for name, members in groups:
        holders = {f.doculect for f in members}
        labels.append(f"{concept}:{kind}:{name}")
        cols.append([1 if t in holders else (0 if t in present else MISSING) for t in taxa])
    cells = np.array(cols, dtype=np.int8).T if cols else np.zeros((len(taxa), 0))
    return CharMatrix(taxa, labels, cells)


def build_cc(wl: Wordlist, taxa: Sequence[str] | None = None) -> CharMatrix:
    """One character per expert cognate set, concepts in label order."""
    if not wl.forms:
        raise EmptyInputError("empty wordlist")
    unlabeled = [f for f in wl.forms if not f.cognate_set]
    if unlabeled:
        shown = ", ".join(f"{f.form_id}({f.doculect}/{f.concept})" for f in unlabeled[:10])
        raise InputError(f"{len(unlabeled)} forms lack a cognate set: {shown}")
    taxa = list(taxa or wl.taxa())
    blocks = []
    for concept, forms in sorted(wl.by_concept().items()):
        sets: dict[str, list[WordForm]] = defaultdict(list)
        for f in forms:
            sets[f.cognate_set].append(f)
        present = {f.doculect for f in forms}
        blocks.append(_code_partition(concept, "cogset", sorted(sets.items()), present, taxa))
    return concatenate(blocks, taxa)


# ---------------------------------------------------------------------------
# automatic clustering


@dataclass(frozen=True)
class CognateCluster:
    concept: str
    members: tuple[tuple[WordForm, ...], ...]
    source: str = "automatic"

    def is_partition_of(self, forms: Sequence[WordForm]) -> bool:
        flat = [f for group in self.members for f in group]
        return len(flat) == len(set(flat)) and set(flat) == set(forms)


def label_propagation(
    probabilities: np.ndarray, threshold: float = 0.5, seed: int = 0, max_sweeps: int = 100
) -> list[list[int]]:
    """Cluster nodes of a weighted graph by asynchronous label propagation.

    Edges are node pairs with probability >= ``threshold``. Each sweep
    visits nodes in a seeded random order; a node takes the label with the
    largest summed edge weight among its neighbours, keeping its own label
    when it is among the best and otherwise taking the smallest. Returned
    clusters are the connected pieces of each label class, sorted by their
    smallest node.
    """
    p = np.asarray(probabilities, dtype=float)
    n = p.shape[0]
    adj = (p >= threshold) & ~np.eye(n, dtype=bool)
    nbrs = [np.flatnonzero(adj[i]) for i in range(n)]
    labels = np.arange(n)
    rng = np.random.default_rng(seed)
    for _ in range(max_sweeps):
        changed = False
        for v in rng.permutation(n):
            if not len(nbrs[v]):
                continue
            tally: dict[int, float] = defaultdict(float)
            for u in nbrs[v]:
                tally[int(labels[u])] += p[v, u]
            top = max(tally.values())
            best = sorted(l for l, w in tally.items() if w == top)
            new = labels[v] if labels[v] in best else best[0]
            if new != labels[v]:
                labels[v] = new
                changed = True
        if not changed:
            break

    clusters = []
    seen = np.zeros(n, dtype=bool)
    for start in range(n):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        stack = [start]
        while stack:
            v = stack.pop()
            for u in nbrs[v]:
                if not seen[u] and labels[u] == labels[start]:
                    seen[u] = True
                    comp.append(int(u))
                    stack.append(u)
        clusters.append(sorted(comp))
    return sorted(clusters)


Scorer = Callable[[Sequence[WordForm], Sequence[WordForm]], np.ndarray]


def model_scorer(model: Model) -> Scorer:
    def score(left, right):
        return np.atleast_1d(model.probability(left, right))

    return score


def cluster_concept(forms: Sequence[WordForm], scorer: Scorer, threshold: float = 0.5, seed: int = 0) -> CognateCluster:
    forms = sorted(forms)
    n = len(forms)
    probs = np.zeros((n, n))
    if n > 1:
        ii, jj = np.triu_indices(n, 1)
        pr = np.asarray(scorer([forms[i] for i in ii], [forms[j] for j in jj]), dtype=float)
        if np.any((pr < 0) | (pr > 1)):
            raise InputError("cognate probabilities must lie in [0, 1]")
        probs[ii, jj] = pr
        probs[jj, ii] = pr
    groups = label_propagation(probs, threshold, seed)
    return CognateCluster(forms[0].concept, tuple(tuple(forms[i] for i in g) for g in groups))


@dataclass(frozen=True)
class PmiConfig:
    threshold: float = 0.5
    seed: int = 0
    unigrams: bool = True


def unigram_block(wl: Wordlist, taxa: Sequence[str] | None = None) -> CharMatrix:
    """For each (concept, sound class): 1 if some form for the concept
    contains the class, 0 if the taxon has forms but none contain it,
    missing if the taxon has no form for the concept."""
    taxa = list(taxa or wl.taxa())
    idx = wl.by_doculect()
    symbols = wl.alphabet.symbols
    blocks = []
    for concept in sorted(wl.concepts):
        labels = [f"{concept}:unigram:{s}" for s in symbols]
        cells = np.full((len(taxa), len(symbols)), MISSING, dtype=np.int8)
        for r, t in enumerate(taxa):
            forms = idx.get(t, {}).get(concept)
            if forms:
                seen = set("".join(f.segments for f in forms))
                cells[r] = [1 if s in seen else 0 for s in symbols]
        blocks.append(CharMatrix(taxa, labels, cells))
    return concatenate(blocks, taxa)


def build_pmi(
    wl: Wordlist,
    model: Model | None = None,
    config: PmiConfig = PmiConfig(),
    scorer: Scorer | None = None,
    taxa: Sequence[str] | None = None,
) -> CharMatrix:
    """Automatic-cluster characters followed by unigram/concept characters."""
    if not wl.forms:
        raise EmptyInputError("empty wordlist")
    if scorer is None:
        if model is None:
            raise ConfigError("build_pmi needs a trained model or a scorer")
        scorer = model_scorer(model)
    taxa = list(taxa or wl.taxa())
    blocks = []
    for concept, forms in sorted(wl.by_concept().items()):
        cl = cluster_concept(forms, scorer, config.threshold, config.seed)
        present = {f.doculect for f in forms}
        groups = [(str(k + 1), members) for k, members in enumerate(cl.members)]
        blocks.append(_code_partition(concept, "autoset", groups, present, taxa))
    if config.unigrams:
        blocks.append(unigram_block(wl, taxa))
    return concatenate(blocks, taxa)


# ---------------------------------------------------------------------------
# MSA binarisation


def binarize_msa(msa: Msa, taxa: Sequence[str]) -> CharMatrix:
    """Presence and per-class characters for every alignment column.

    Columns are numbered from 1. Synonym rows of one taxon are combined by
    taking the maximum; taxa without a row are missing throughout.
    """
    taxa = list(taxa)
    rows_of: dict[str, list[str]] = defaultdict(list)
    for form, row in msa.rows:
        rows_of[form.doculect].append(row)
    labels = []
    cols = []
    for k in range(msa.width):
        cells = [r[k] for _, r in msa.rows]
        classes = sorted({c for c in cells if c != GAP})
        labels.append(f"{msa.concept}:presence:c{k + 1}")
        cols.append([max((r[k] != GAP for r in rows_of[t]), default=MISSING) if t in rows_of else MISSING for t in taxa])
        for s in classes:
            labels.append(f"{msa.concept}:class:c{k + 1}={s}")
            cols.append([max(int(r[k] == s) for r in rows_of[t]) if t in rows_of else MISSING for t in taxa])
    cells = np.array(cols, dtype=np.int8).T if cols else np.zeros((len(taxa), 0))
    return CharMatrix(taxa, labels, cells)


def matrix_from_msas(msas: Sequence[Msa], taxa: Sequence[str]) -> CharMatrix:
    return concatenate([binarize_msa(m, taxa) for m in sorted(msas, key=lambda m: m.concept)], taxa)


def build_msa_matrix(
    wl: Wordlist, model: Model, config: MsaConfig = MsaConfig(), threads: int = 1
) -> tuple[CharMatrix, list[Msa]]:
    if not wl.forms:
        raise EmptyInputError("empty wordlist")
    msas = align_all(wl, model, config, threads)
    return matrix_from_msas(msas, wl.taxa()), msas


# ---------------------------------------------------------------------------
# pruning and export


@dataclass
class PruneReport:
    raw: int
    duplicates: int = 0
    constant: int = 0
    kept: int = 0
    dropped: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        return [
            f"raw_columns\t{self.raw}",
            f"dropped_duplicate\t{self.duplicates}",
            f"dropped_constant\t{self.constant}",
            f"columns\t{self.kept}",
        ]


def _single_class_duplicates(labels: Sequence[str]) -> np.ndarray:
    """Mask of class characters that are the only class in their column."""
    per_col: dict[str, list[int]] = defaultdict(list)
    for k, lab in enumerate(labels):
        concept, kind, detail = lab.rsplit(":", 2)
        if kind == "class":
            per_col[f"{concept}:{detail.split('=', 1)[0]}"].append(k)
    mask = np.zeros(len(labels), dtype=bool)
    for ks in per_col.values():
        if len(ks) == 1:
            mask[ks[0]] = True
    return mask


def constant_columns(cells: np.ndarray) -> np.ndarray:
    obs = cells != MISSING
    ones = np.sum((cells == 1) & obs, axis=0)
    zeros = np.sum((cells == 0) & obs, axis=0)
    return (ones == 0) | (zeros == 0)


def prune(m: CharMatrix) -> tuple[CharMatrix, PruneReport]:
    """Drop single-class duplicates, then constant columns."""
    report = PruneReport(raw=len(m.labels))
    dup = _single_class_duplicates(m.labels)
    const = constant_columns(m.cells) & ~dup
    report.duplicates = int(dup.sum())
    report.constant = int(const.sum())
    drop = dup | const
    report.dropped = [l for l, d in zip(m.labels, drop) if d]
    out = m.select(~drop)
    report.kept = len(out.labels)
    return out, report


def write_phylip(m: CharMatrix, stream: TextIO):
    if not m.taxa or not m.labels:
        raise EmptyInputError("cannot export an empty matrix")
    for t in m.taxa:
        if not t or any(ch.isspace() for ch in t):
            raise InputError(f"taxon name {t!r} is empty or contains whitespace")
    width = max(len(t) for t in m.taxa)
    stream.write(f"{len(m.taxa)} {len(m.labels)}\n")
    for t, row in zip(m.taxa, m.cells):
        stream.write(f"{t.ljust(width)}  {''.join(_SYMBOL[int(v)] for v in row)}\n")


def export_phylip(m: CharMatrix, path):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            write_phylip(m, fh)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def read_phylip(stream: TextIO, labels: Sequence[str] | None = None) -> CharMatrix:
    lines = [ln for ln in stream.read().splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty PHYLIP file")
    try:
        ntax, nchar = (int(x) for x in lines[0].split())
    except ValueError:
        raise ParseError(f"bad PHYLIP header {lines[0]!r}", 1) from None
    if len(lines) - 1 != ntax:
        raise ParseError(f"header announces {ntax} taxa, found {len(lines) - 1}")
    taxa = []
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) < 2:
            raise ParseError("row without data", lineno)
        seq = "".join(parts[1:])
        if len(seq) != nchar:
            raise ParseError(f"row for {parts[0]} has {len(seq)} characters, expected {nchar}", lineno)
        try:
            rows.append([_VALUE[c] for c in seq])
        except KeyError as exc:
            raise ParseError(f"invalid state {exc.args[0]!r}", lineno) from None
        taxa.append(parts[0])
    labels = list(labels) if labels is not None else [f"c{k + 1}" for k in range(nchar)]
    return CharMatrix(taxa, labels, np.array(rows, dtype=np.int8).reshape(ntax, nchar))


def write_labels(m: CharMatrix, stream: TextIO):
    for k, lab in enumerate(m.labels, start=1):
        stream.write(f"{k}\t{lab}\n")


def read_labels(stream: TextIO) -> list[str]:
    return [ln.rstrip("\n").split("\t", 1)[1] for ln in stream if ln.strip()]


def write_csv(m: CharMatrix, stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["taxon", *m.labels])
    for t, row in zip(m.taxa, m.cells):
        writer.writerow([t, *(_SYMBOL[int(v)] for v in row)])


def load_matrix(path, labels_path=None) -> CharMatrix:
    labels = None
    if labels_path is not None and Path(labels_path).exists():
        with open(labels_path, encoding="utf-8") as fh:
            labels = read_labels(fh)
    with open(path, encoding="utf-8") as fh:
        return read_phylip(fh, labels)
