"""Consistency-based multiple alignment of one concept's word forms.

Pairwise Viterbi alignments feed a T-Coffee style library: every matched
position pair gets the pair's percent identity as weight, and one round of
library extension adds, through every third form, the minimum of the two
weights linking the positions. Profiles are then merged along a UPGMA guide
tree with a gap-free-cost dynamic programme that maximises summed library
weight.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .errors import DomainError, EmptyInputError, ParseError
from .phmm import Model, PairwiseAlignment, viterbi_align
from .wordlist import GAP, WordForm, Wordlist

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MsaConfig:
    identity_floor: float = 0.1
    extension_rounds: int = 1


class ConsistencyLibrary:
    """Position-pair weights between the forms of one concept."""

    def __init__(self, forms: Sequence[WordForm]):
        self.forms = list(forms)
        self.index = {f: i for i, f in enumerate(self.forms)}
        self.pairs: dict[tuple[int, int], np.ndarray] = {}

    def matrix(self, i: int, j: int) -> np.ndarray | None:
        """Weights between positions of form ``i`` (rows) and form ``j``."""
        if i < j:
            return self.pairs.get((i, j))
        w = self.pairs.get((j, i))
        return None if w is None else w.T

    def weight(self, a: WordForm, p: int, b: WordForm, q: int) -> float:
        w = self.matrix(self.index[a], self.index[b])
        return 0.0 if w is None else float(w[p, q])

    def _slot(self, i: int, j: int) -> np.ndarray:
        key = (min(i, j), max(i, j))
        if key not in self.pairs:
            self.pairs[key] = np.zeros((len(self.forms[key[0]]), len(self.forms[key[1]])))
        return self.pairs[key]

    def add(self, i: int, p: int, j: int, q: int, w: float):
        if i < j:
            self._slot(i, j)[p, q] += w
        else:
            self._slot(i, j)[q, p] += w

    def extend(self) -> "ConsistencyLibrary":
        n = len(self.forms)
        out = ConsistencyLibrary(self.forms)
        for i, j in itertools.combinations(range(n), 2):
            acc = None
            direct = self.pairs.get((i, j))
            if direct is not None:
                acc = direct.copy()
            for c in range(n):
                if c == i or c == j:
                    continue
                w_ic = self.matrix(i, c)
                w_cj = self.matrix(c, j)
                if w_ic is None or w_cj is None:
                    continue
                through = np.minimum(w_ic[:, :, None], w_cj[None, :, :]).sum(axis=1)
                acc = through if acc is None else acc + through
            if acc is not None and acc.any():
                out.pairs[(i, j)] = acc
        return out


def percent_identity(aln: PairwiseAlignment) -> float:
    matches = [(x, y) for x, y in aln.columns if x != GAP and y != GAP]
    if not matches:
        return 0.0
    return sum(x == y for x, y in matches) / len(matches)


def build_library(
    alignments: Sequence[PairwiseAlignment],
    forms: Sequence[WordForm] | None = None,
    config: MsaConfig = MsaConfig(),
) -> ConsistencyLibrary:
    """Primary library from Match columns, then ``extension_rounds`` of extension."""
    if forms is None:
        forms = sorted({f for a in alignments for f in (a.left, a.right)})
    concepts = {f.concept for f in forms}
    if len(concepts) > 1:
        raise DomainError(f"library spans several concepts: {sorted(concepts)}")
    lib = ConsistencyLibrary(forms)
    seen = set()
    for aln in alignments:
        i, j = lib.index[aln.left], lib.index[aln.right]
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DomainError(f"pair {aln.left} / {aln.right} aligned twice")
        seen.add(key)
        w = max(config.identity_floor, percent_identity(aln))
        for p, q in aln.positions:
            if p is not None and q is not None:
                lib.add(i, p, j, q, w)
    for _ in range(config.extension_rounds):
        lib = lib.extend()
    return lib


# ---------------------------------------------------------------------------
# guide tree


def guide_tree(forms: Sequence[WordForm], similarity: np.ndarray):
    """UPGMA on ``max(similarity) - similarity``.

    Returns a nested tuple of form indices (leaves are ints). Forms are
    assumed sorted, so index order is the lexicographic tie-break.
    """
    n = len(forms)
    if n < 1:
        raise EmptyInputError("guide tree needs at least one form")
    if n == 1:
        return 0
    sim = np.asarray(similarity, dtype=float)
    dist = np.nanmax(sim) - sim
    clusters: list = list(range(n))
    keys = [(i,) for i in range(n)]
    sizes = [1] * n
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    active = list(range(n))
    while len(active) > 1:
        best = None
        for x, y in itertools.combinations(active, 2):
            cand = (d[x, y], min(keys[x], keys[y]), max(keys[x], keys[y]))
            if best is None or cand < best[0]:
                best = (cand, x, y)
        _, x, y = best
        if keys[y] < keys[x]:
            x, y = y, x
        clusters[x] = (clusters[x], clusters[y])
        for z in active:
            if z not in (x, y):
                d[x, z] = d[z, x] = (sizes[x] * d[x, z] + sizes[y] * d[y, z]) / (sizes[x] + sizes[y])
        sizes[x] += sizes[y]
        keys[x] = tuple(sorted(keys[x] + keys[y]))
        active.remove(y)
    return clusters[active[0]]


def merge_order(tree) -> list[tuple]:
    """Post-order list of merges ``(left, right)`` of a nested-tuple tree."""
    out = []

    def walk(t):
        if isinstance(t, tuple):
            walk(t[0])
            walk(t[1])
            out.append(t)

    walk(tree)
    return out


# ---------------------------------------------------------------------------
# progressive alignment


@dataclass(frozen=True)
class Msa:
    concept: str
    rows: tuple[tuple[WordForm, str], ...]

    @property
    def width(self) -> int:
        return len(self.rows[0][1]) if self.rows else 0

    def column(self, k: int) -> list[str]:
        return [r[k] for _, r in self.rows]

    def validate(self):
        w = self.width
        for form, row in self.rows:
            if len(row) != w:
                raise DomainError(f"row for {form} has length {len(row)} != {w}")
            if row.replace(GAP, "") != form.segments:
                raise DomainError(f"row {row!r} does not reproduce {form.segments!r}")
        for k in range(w):
            if all(c == GAP for c in self.column(k)):
                raise DomainError(f"column {k} is all gaps")
        return self

    def __str__(self):
        return "\n".join(f"{f.doculect}\t{r}" for f, r in self.rows)


class _Profile:
    def __init__(self, rows: list[int], cols: np.ndarray):
        self.rows = rows
        self.cols = cols  # (len(rows), width) of segment positions, -1 for gaps

    @classmethod
    def leaf(cls, i: int, length: int):
        return cls([i], np.arange(length)[None, :])


def _profile_scores(lib: ConsistencyLibrary, p: _Profile, q: _Profile) -> np.ndarray:
    score = np.zeros((p.cols.shape[1], q.cols.shape[1]))
    for r, pr in zip(p.rows, p.cols):
        for s, qs in zip(q.rows, q.cols):
            w = lib.matrix(r, s)
            if w is None:
                continue
            sub = w[pr[:, None], qs[None, :]]
            sub = np.where((pr[:, None] >= 0) & (qs[None, :] >= 0), sub, 0.0)
            score += sub
    return score


def _align_profiles(lib: ConsistencyLibrary, p: _Profile, q: _Profile) -> _Profile:
    s = _profile_scores(lib, p, q)
    n, m = s.shape
    h = np.zeros((n + 1, m + 1))
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            h[i, j] = max(h[i - 1, j - 1] + s[i - 1, j - 1], h[i - 1, j], h[i, j - 1])
    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and h[i, j] == h[i - 1, j - 1] + s[i - 1, j - 1]:
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and h[i, j] == h[i - 1, j]:
            pairs.append((i - 1, None))
            i -= 1
        else:
            pairs.append((None, j - 1))
            j -= 1
    pairs.reverse()
    gap_p = np.full(len(p.rows), -1)
    gap_q = np.full(len(q.rows), -1)
    cols = np.array(
        [np.concatenate([p.cols[:, u] if u is not None else gap_p, q.cols[:, v] if v is not None else gap_q]) for u, v in pairs]
    ).T
    return _Profile(p.rows + q.rows, cols)


def progressive_align(forms: Sequence[WordForm], lib: ConsistencyLibrary, tree) -> Msa:
    """Merge profiles bottom-up along ``tree``; output rows follow ``forms`` order."""
    forms = list(forms)
    if not forms:
        raise EmptyInputError("nothing to align")
    concept = forms[0].concept

    def build(t) -> _Profile:
        if isinstance(t, tuple):
            return _align_profiles(lib, build(t[0]), build(t[1]))
        return _Profile.leaf(t, len(forms[t]))

    prof = build(tree)
    order = np.argsort(prof.rows, kind="stable")
    rows = []
    for k in order:
        f = forms[prof.rows[k]]
        rows.append((f, "".join(GAP if p < 0 else f.segments[p] for p in prof.cols[k])))
    return Msa(concept, tuple(rows)).validate()


def cross_language_pairs(forms: Sequence[WordForm]) -> list[tuple[int, int]]:
    return [(i, j) for i, j in itertools.combinations(range(len(forms)), 2) if forms[i].doculect != forms[j].doculect]


def align_forms(forms: Sequence[WordForm], model: Model, config: MsaConfig = MsaConfig()) -> Msa:
    forms = sorted(forms)
    if not forms:
        raise EmptyInputError("no forms to align")
    if len(forms) == 1:
        return Msa(forms[0].concept, ((forms[0], forms[0].segments),))
    n = len(forms)
    ii, jj = np.triu_indices(n, 1)
    lo = model.log_odds([forms[i] for i in ii], [forms[j] for j in jj])
    sim = np.zeros((n, n))
    sim[ii, jj] = lo
    sim[jj, ii] = lo
    np.fill_diagonal(sim, np.nan)
    alns = [viterbi_align(model.params, forms[i], forms[j]) for i, j in cross_language_pairs(forms)]
    lib = build_library(alns, forms, config)
    return progressive_align(forms, lib, guide_tree(forms, sim))


def align_concept(wl: Wordlist, concept: str, model: Model, config: MsaConfig = MsaConfig()) -> Msa:
    forms = [f for f in wl.forms if f.concept == concept]
    if not forms:
        raise EmptyInputError(f"no forms for concept {concept!r}")
    return align_forms(forms, model, config)


def align_all(wl: Wordlist, model: Model, config: MsaConfig = MsaConfig(), threads: int = 1) -> list[Msa]:
    groups = wl.by_concept()
    concepts = sorted(groups)

    def run(c):
        return align_forms(groups[c], model, config)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run, concepts))
    return [run(c) for c in concepts]


# ---------------------------------------------------------------------------
# file format


def write_msa(msa: Msa, stream: TextIO):
    stream.write(f"# concept {msa.concept} width {msa.width}\n")
    for form, row in msa.rows:
        stream.write(f"{form.doculect}\t{form.form_id}\t{row}\n")


def read_msa(stream: TextIO) -> Msa:
    header = stream.readline().rstrip("\n")
    parts = header.split(" ")
    if len(parts) < 5 or parts[:2] != ["#", "concept"] or parts[-2] != "width":
        raise ParseError(f"bad MSA header {header!r}")
    concept = " ".join(parts[2:-2])
    rows = []
    for line in stream:
        if not line.strip():
            continue
        doc, fid, row = line.rstrip("\n").split("\t")
        rows.append((WordForm(doc, concept, row.replace(GAP, ""), form_id=fid), row))
    msa = Msa(concept, tuple(rows))
    if msa.width != int(parts[-1]):
        raise ParseError("MSA width does not match header")
    return msa.validate()
