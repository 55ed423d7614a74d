"""Trees: Newick I/O, restriction to a taxon set, neighbour joining and the
generalised quartet distance.

Quartet resolutions are read off leaf-to-leaf edge counts with the four-point
condition, so they do not depend on where a tree is rooted.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .charmatrix import MISSING, CharMatrix
from .errors import DomainError, ParseError

log = logging.getLogger(__name__)

AB_CD, AC_BD, AD_BC, STAR = 0, 1, 2, 3
TOPOLOGY_NAMES = ("AB|CD", "AC|BD", "AD|BC", "star")


@dataclass(eq=False)
class Node:
    name: str = ""
    children: list["Node"] = field(default_factory=list)
    length: float | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def postorder(self) -> Iterator["Node"]:
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done or node.is_leaf:
                yield node
            else:
                stack.append((node, True))
                stack.extend((c, False) for c in reversed(node.children))

    def leaf_labels(self) -> list[str]:
        return [n.name for n in self.postorder() if n.is_leaf]

    def copy(self) -> "Node":
        return Node(self.name, [c.copy() for c in self.children], self.length)


@dataclass(eq=False)
class PhyloTree:
    root: Node

    def postorder(self) -> Iterator[Node]:
        return self.root.postorder()

    def leaf_labels(self) -> list[str]:
        return self.root.leaf_labels()

    def leaves(self) -> list[Node]:
        return [n for n in self.postorder() if n.is_leaf]

    def internal_nodes(self) -> list[Node]:
        return [n for n in self.postorder() if not n.is_leaf]

    def is_binary(self) -> bool:
        """Binary as an unrooted tree: a trifurcating root is allowed."""
        for n in self.internal_nodes():
            limit = 3 if n is self.root else 2
            if len(n.children) > limit:
                return False
        return True

    def validate(self) -> "PhyloTree":
        labels = self.leaf_labels()
        if any(not l for l in labels):
            raise DomainError("unlabeled leaf")
        if len(set(labels)) != len(labels):
            raise DomainError("duplicate leaf labels")
        for n in self.internal_nodes():
            if len(n.children) < 2:
                raise DomainError("internal node with fewer than two children")
        return self

    def to_newick(self, lengths: bool = True) -> str:
        return _write(self.root, lengths) + ";"

    def __str__(self):
        return self.to_newick()


# ---------------------------------------------------------------------------
# Newick

_PUNCT = set("(),:;[]'")


def _quote(name: str) -> str:
    if not name or not (set(name) & _PUNCT or any(c.isspace() for c in name)):
        return name
    return "'" + name.replace("'", "''") + "'"


def _write(node: Node, lengths: bool) -> str:
    s = _quote(node.name)
    if node.children:
        s = "(" + ",".join(_write(c, lengths) for c in node.children) + ")" + s
    if lengths and node.length is not None:
        s += f":{node.length:.10g}"
    return s


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip(self):
        t = self.text
        while self.pos < len(t):
            if t[self.pos].isspace():
                self.pos += 1
            elif t[self.pos] == "[":
                end = t.find("]", self.pos)
                if end < 0:
                    raise ParseError("unterminated comment", self.pos)
                self.pos = end + 1
            else:
                break

    def expect(self, ch: str):
        if self.peek() != ch:
            got = self.peek() or "end of input"
            raise ParseError(f"expected {ch!r}, got {got!r}", self.pos)
        self.pos += 1

    def label(self) -> str:
        self.skip()
        t = self.text
        if self.pos < len(t) and t[self.pos] == "'":
            out = []
            self.pos += 1
            while True:
                if self.pos >= len(t):
                    raise ParseError("unterminated quoted label", self.pos)
                if t[self.pos] == "'":
                    if t[self.pos + 1 : self.pos + 2] == "'":
                        out.append("'")
                        self.pos += 2
                        continue
                    self.pos += 1
                    return "".join(out)
                out.append(t[self.pos])
                self.pos += 1
        start = self.pos
        while self.pos < len(t) and t[self.pos] not in _PUNCT and not t[self.pos].isspace():
            self.pos += 1
        return t[start : self.pos]

    def length(self) -> float | None:
        if self.peek() != ":":
            return None
        self.pos += 1
        start = self.pos
        raw = self.label()
        try:
            return float(raw)
        except ValueError:
            raise ParseError(f"bad branch length {raw!r}", start) from None

    def subtree(self) -> Node:
        node = Node()
        if self.peek() == "(":
            self.pos += 1
            node.children.append(self.subtree())
            while self.peek() == ",":
                self.pos += 1
                node.children.append(self.subtree())
            self.expect(")")
        elif self.peek() in (")", ",", ";", ""):
            raise ParseError("missing leaf label", self.pos)
        node.name = self.label()
        node.length = self.length()
        return node


def _suppress_unary(node: Node) -> Node:
    """Collapse chains of single-child nodes, summing branch lengths."""
    while len(node.children) == 1:
        child = node.children[0]
        if node.length is not None or child.length is not None:
            child.length = (node.length or 0.0) + (child.length or 0.0)
        node = child
    node.children = [_suppress_unary(c) for c in node.children]
    return node


def parse_newick(text: str) -> PhyloTree:
    r = _Reader(text)
    root = r.subtree()
    r.expect(";")
    if r.peek():
        raise ParseError("trailing text after ';'", r.pos)
    root = _suppress_unary(root)
    seen = set()
    for leaf in root.postorder():
        if leaf.is_leaf:
            if not leaf.name:
                raise ParseError("unlabeled leaf")
            if leaf.name in seen:
                raise ParseError(f"duplicate leaf label {leaf.name!r}", text.find(leaf.name, text.find(leaf.name) + 1))
            seen.add(leaf.name)
    return PhyloTree(root)


def read_newick(path) -> PhyloTree:
    with open(path, encoding="utf-8") as fh:
        return parse_newick(fh.read())


def restrict(tree: PhyloTree, taxa: Iterable[str]) -> PhyloTree:
    """Induced subtree on ``taxa`` with degree-two nodes suppressed."""
    keep = set(taxa)

    def prune(node: Node) -> Node | None:
        if node.is_leaf:
            return Node(node.name, [], node.length) if node.name in keep else None
        kids = [k for k in (prune(c) for c in node.children) if k is not None]
        if not kids:
            return None
        return Node(node.name, kids, node.length)

    root = prune(tree.root)
    if root is None or len(root.leaf_labels()) < 2:
        raise DomainError("fewer than two leaves survive restriction")
    root = _suppress_unary(root)
    root.length = None
    return PhyloTree(root)


# ---------------------------------------------------------------------------
# quartets


def leaf_distances(tree: PhyloTree, labels: Sequence[str]) -> np.ndarray:
    """Edge-count distances between the given leaves."""
    nodes = list(tree.postorder())
    ids = {id(n): k for k, n in enumerate(nodes)}
    adj: list[list[int]] = [[] for _ in nodes]
    for n in nodes:
        for c in n.children:
            adj[ids[id(n)]].append(ids[id(c)])
            adj[ids[id(c)]].append(ids[id(n)])
    by_name = {n.name: ids[id(n)] for n in nodes if n.is_leaf}
    try:
        targets = [by_name[l] for l in labels]
    except KeyError as exc:
        raise DomainError(f"unknown leaf {exc.args[0]!r}") from None
    out = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for r, src in enumerate(targets):
        dist = [-1] * len(nodes)
        dist[src] = 0
        frontier = [src]
        while frontier:
            nxt = []
            for v in frontier:
                for u in adj[v]:
                    if dist[u] < 0:
                        dist[u] = dist[v] + 1
                        nxt.append(u)
            frontier = nxt
        out[r] = [dist[t] for t in targets]
    return out


def _topologies(d: np.ndarray, q: np.ndarray) -> np.ndarray:
    a, b, c, e = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    s1 = d[a, b] + d[c, e]
    s2 = d[a, c] + d[b, e]
    s3 = d[a, e] + d[b, c]
    out = np.full(len(q), STAR, dtype=np.int8)
    out[(s1 < s2) & (s1 < s3)] = AB_CD
    out[(s2 < s1) & (s2 < s3)] = AC_BD
    out[(s3 < s1) & (s3 < s2)] = AD_BC
    return out


@dataclass(frozen=True)
class QuartetTopology:
    labels: tuple[str, str, str, str]
    resolution: int

    @property
    def resolved(self) -> bool:
        return self.resolution != STAR

    def __str__(self):
        a, b, c, d = self.labels
        return {AB_CD: f"{a}{b}|{c}{d}", AC_BD: f"{a}{c}|{b}{d}", AD_BC: f"{a}{d}|{b}{c}"}.get(self.resolution, "star")


def quartet_topology(tree: PhyloTree, labels: Sequence[str]) -> QuartetTopology:
    labels = tuple(labels)
    if len(labels) != 4 or len(set(labels)) != 4:
        raise DomainError("a quartet needs four distinct leaves")
    d = leaf_distances(tree, labels)
    return QuartetTopology(labels, int(_topologies(d, np.array([[0, 1, 2, 3]]))[0]))


@dataclass(frozen=True)
class GqdResult:
    value: float
    resolved_both: int
    differing: int
    mode: str
    stderr: float | None = None

    def line(self) -> str:
        out = f"gqd\t{self.value!r}\t{self.resolved_both}\t{self.differing}\t{self.mode}"
        if self.stderr is not None:
            out += f"\t{self.stderr!r}"
        return out


def _count(dg: np.ndarray, di: np.ndarray, q: np.ndarray) -> tuple[int, int, int]:
    """(resolved in both, resolved differently, resolved in gold)"""
    tg = _topologies(dg, q)
    ti = _topologies(di, q)
    both = (tg != STAR) & (ti != STAR)
    return int(both.sum()), int((both & (tg != ti)).sum()), int((tg != STAR).sum())


def _exact_chunks(n: int) -> Iterator[np.ndarray]:
    for a in range(n - 3):
        rest = itertools.combinations(range(a + 1, n), 3)
        tail = np.fromiter(itertools.chain.from_iterable(rest), dtype=np.int64).reshape(-1, 3)
        yield np.hstack([np.full((len(tail), 1), a), tail])


def sample_quartets(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` uniformly random 4-subsets of ``range(n)``."""
    out = rng.integers(n, size=(size, 4))
    while True:
        s = np.sort(out, axis=1)
        bad = np.any(s[:, 1:] == s[:, :-1], axis=1)
        if not bad.any():
            return out
        out[bad] = rng.integers(n, size=(int(bad.sum()), 4))


def gqd(
    gold: PhyloTree,
    inferred: PhyloTree,
    mode: str = "exact",
    samples: int = 10_000,
    seed: int = 0,
    threads: int = 1,
) -> GqdResult:
    """Fraction of quartets resolved in both trees that are resolved differently.

    Both trees are first restricted to their shared leaves. ``mode`` is
    ``"exact"`` (all quartets) or ``"sampled"`` (``samples`` quartets drawn
    uniformly, reported with a binomial standard error).
    """
    shared = sorted(set(gold.leaf_labels()) & set(inferred.leaf_labels()))
    if len(shared) < 4:
        raise DomainError(f"need at least 4 shared leaves, have {len(shared)}")
    if not inferred.is_binary():
        log.warning("inferred tree is not binary")
    g = restrict(gold, shared)
    t = restrict(inferred, shared)
    dg = leaf_distances(g, shared)
    di = leaf_distances(t, shared)
    n = len(shared)
    if mode == "exact":
        chunks = list(_exact_chunks(n))
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                counts = list(pool.map(lambda q: _count(dg, di, q), chunks))
        else:
            counts = [_count(dg, di, q) for q in chunks]
        both, diff, resolved_gold = (sum(c[k] for c in counts) for k in range(3))
    elif mode == "sampled":
        q = sample_quartets(n, samples, np.random.default_rng(seed))
        both, diff, resolved_gold = _count(dg, di, q)
    else:
        raise DomainError(f"unknown GQD mode {mode!r}")
    if both == 0:
        raise DomainError("no quartet is resolved in both trees; GQD undefined")
    if t.is_binary() and resolved_gold != both:
        raise DomainError("binary inferred tree left a quartet unresolved")
    value = diff / both
    stderr = math.sqrt(value * (1.0 - value) / both) if mode == "sampled" else None
    return GqdResult(value, both, diff, mode, stderr)


# ---------------------------------------------------------------------------
# tree construction


def random_binary_tree(labels: Sequence[str], rng: np.random.Generator) -> PhyloTree:
    """Random rooted binary tree by repeatedly joining two random subtrees."""
    nodes = [Node(l) for l in labels]
    if len(nodes) < 2:
        raise DomainError("need at least two labels")
    while len(nodes) > 1:
        i, j = sorted(rng.choice(len(nodes), size=2, replace=False).tolist())
        b = nodes.pop(j)
        a = nodes.pop(i)
        nodes.append(Node("", [a, b]))
    return PhyloTree(nodes[0])


def hamming_distances(m: CharMatrix) -> np.ndarray:
    """Mismatch fraction over mutually observed cells."""
    obs = (m.cells != MISSING).astype(np.int64)
    ones = (m.cells == 1).astype(np.int64)
    zeros = (m.cells == 0).astype(np.int64)
    shared = obs @ obs.T
    mismatch = ones @ zeros.T + zeros @ ones.T
    bad = [(m.taxa[i], m.taxa[j]) for i, j in zip(*np.nonzero(shared == 0)) if i < j]
    if bad:
        shown = ", ".join(f"{a}/{b}" for a, b in bad[:10])
        raise DomainError(f"{len(bad)} taxon pairs share no observed characters: {shown}")
    return mismatch / shared


def neighbor_joining(m: CharMatrix | None = None, distances: np.ndarray | None = None, taxa: Sequence[str] | None = None) -> PhyloTree:
    """Neighbour joining on a character matrix (or a precomputed distance matrix).

    Taxa are processed in label order and ties in the Q criterion go to the
    lowest index pair, so the output depends only on the data. The last
    three nodes are joined under a trifurcating root.
    """
    if distances is None:
        if m is None:
            raise DomainError("neighbor_joining needs a matrix or distances")
        order = np.argsort(m.taxa, kind="stable")
        m = CharMatrix([m.taxa[i] for i in order], m.labels, m.cells[order])
        d = hamming_distances(m)
        taxa = m.taxa
    else:
        if taxa is None:
            raise DomainError("taxa are required with a distance matrix")
        order = np.argsort(list(taxa), kind="stable")
        d = np.asarray(distances, dtype=float)[np.ix_(order, order)]
        taxa = [taxa[i] for i in order]
    n = len(taxa)
    if n < 3:
        raise DomainError("neighbour joining needs at least 3 taxa")
    nodes = [Node(t) for t in taxa]
    d = d.astype(float).copy()
    active = list(range(n))
    while len(active) > 3:
        k = len(active)
        sub = d[np.ix_(active, active)]
        r = sub.sum(axis=1)
        q = (k - 2) * sub - r[:, None] - r[None, :]
        iu = np.triu_indices(k, 1)
        best = int(np.argmin(q[iu]))
        i, j = iu[0][best], iu[1][best]
        dij = sub[i, j]
        li = 0.5 * dij + (r[i] - r[j]) / (2 * (k - 2))
        lj = dij - li
        a, b = active[i], active[j]
        nodes[a].length = max(li, 0.0)
        nodes[b].length = max(lj, 0.0)
        new = Node("", [nodes[a], nodes[b]])
        newd = 0.5 * (d[a] + d[b] - dij)
        d = np.pad(d, ((0, 1), (0, 1)))
        d[-1, :-1] = newd
        d[:-1, -1] = newd
        d[-1, -1] = 0.0
        nodes.append(new)
        active = [x for x in active if x not in (a, b)] + [len(nodes) - 1]
    a, b, c = active
    la = 0.5 * (d[a, b] + d[a, c] - d[b, c])
    lb = d[a, b] - la
    lc = d[a, c] - la
    for x, length in ((a, la), (b, lb), (c, lc)):
        nodes[x].length = max(length, 0.0)
    return PhyloTree(Node("", [nodes[a], nodes[b], nodes[c]]))
