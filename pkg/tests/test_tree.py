import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import leaf_partitions, quartet_by_splits
from phylolex.charmatrix import MISSING, CharMatrix
from phylolex.errors import DomainError, ParseError
from phylolex.tree import (
    AB_CD,
    AC_BD,
    STAR,
    Node,
    PhyloTree,
    gqd,
    hamming_distances,
    neighbor_joining,
    parse_newick,
    quartet_topology,
    random_binary_tree,
    restrict,
)


def names(n):
    return [f"t{k:02d}" for k in range(n)]


def collapse_some(tree, rng, prob):
    """Randomly contract internal edges to create polytomies."""

    def walk(node):
        kids = []
        for c in node.children:
            walk(c)
            if c.children and rng.random() < prob:
                kids.extend(c.children)
            else:
                kids.append(c)
        node.children = kids

    walk(tree.root)
    return tree


def reroot_at_leaf_parent(tree, label):
    """Same unrooted tree, rooted next to ``label``."""
    nodes = list(tree.postorder())
    parent = {id(c): n for n in nodes for c in n.children}
    leaf = next(n for n in nodes if n.name == label)

    def hang(node, came_from):
        out = Node(node.name)
        nbrs = list(node.children) + ([parent[id(node)]] if id(node) in parent else [])
        for nb in nbrs:
            if nb is not came_from:
                out.children.append(hang(nb, node))
        return out

    new = PhyloTree(hang(parent[id(leaf)], None))
    return restrict(new, new.leaf_labels())


# --- Newick ------------------------------------------------------------------


def test_parse_simple():
    t = parse_newick("((A,B),C);")
    assert sorted(t.leaf_labels()) == ["A", "B", "C"]
    assert len(t.internal_nodes()) == 2
    assert [len(n.children) for n in t.internal_nodes()] == [2, 2]


def test_parse_polytomy():
    t = parse_newick("(A,B,C);")
    assert len(t.root.children) == 3


def test_parse_lengths_labels_quotes_comments():
    t = parse_newick("(('Nanai (Najkhin)':0.5,B:1e-2)inner:2,[comment]C);")
    assert t.leaf_labels() == ["Nanai (Najkhin)", "B", "C"]
    inner = t.root.children[0]
    assert inner.name == "inner" and inner.length == 2.0
    assert inner.children[1].length == 0.01
    again = parse_newick(t.to_newick())
    assert again.to_newick() == t.to_newick()


def test_parse_suppresses_unary_nodes():
    t = parse_newick("(((A,B)),C);")
    assert all(len(n.children) >= 2 for n in t.internal_nodes())


@pytest.mark.parametrize("text", ["((A,B),(A,C));", "((A,B),C;", "((A,B),C)", "(A,,B);", "(A,B);x", "(A:x,B);"])
def test_parse_errors(text):
    with pytest.raises(ParseError) as info:
        parse_newick(text)
    assert info.value.position is None or info.value.position >= 0


def test_duplicate_label_reports_position():
    with pytest.raises(ParseError, match="duplicate") as info:
        parse_newick("((A,B),(A,C));")
    assert info.value.position == 8


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 20), st.integers(0, 10**6), st.floats(0, 0.6))
def test_newick_roundtrip(n, seed, collapse):
    rng = np.random.default_rng(seed)
    t = collapse_some(random_binary_tree(names(n), rng), rng, collapse)
    for node in t.postorder():
        node.length = float(rng.uniform(0, 2))
    again = parse_newick(t.to_newick())
    assert again.to_newick() == t.to_newick()
    assert leaf_partitions(again) == leaf_partitions(t)


# --- restriction -------------------------------------------------------------


def test_restrict_examples():
    t = parse_newick("((A,B),(C,D));")
    assert leaf_partitions(restrict(t, "ABCD")) == leaf_partitions(t)
    r = restrict(t, {"A", "B", "C"})
    assert sorted(r.leaf_labels()) == ["A", "B", "C"]
    assert r.to_newick() == "((A,B),C);"
    with pytest.raises(DomainError):
        restrict(t, {"A"})


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 20), st.integers(0, 10**6))
def test_restrict_leaves_no_unary_nodes(n, seed):
    rng = np.random.default_rng(seed)
    t = random_binary_tree(names(n), rng)
    keep = [l for l in names(n) if rng.random() < 0.5] or names(2)
    if len(keep) < 2:
        keep = names(2)
    r = restrict(t, keep)
    assert sorted(r.leaf_labels()) == sorted(keep)
    assert all(len(node.children) >= 2 for node in r.internal_nodes())


# --- quartets ----------------------------------------------------------------


def test_quartet_examples():
    assert quartet_topology(parse_newick("((A,B),(C,D));"), "ABCD").resolution == AB_CD
    assert quartet_topology(parse_newick("(A,B,C,D);"), "ABCD").resolution == STAR
    assert quartet_topology(parse_newick("(((A,B),C),D);"), "ABCD").resolution == AB_CD
    assert quartet_topology(parse_newick("((A,C),(B,D));"), "ABCD").resolution == AC_BD
    assert str(quartet_topology(parse_newick("((A,B),(C,D));"), "ABCD")) == "AB|CD"
    with pytest.raises(DomainError):
        quartet_topology(parse_newick("((A,B),(C,D));"), "ABCE")


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 12), st.integers(0, 10**6), st.floats(0, 0.7))
def test_quartets_match_split_oracle(n, seed, collapse):
    rng = np.random.default_rng(seed)
    t = collapse_some(random_binary_tree(names(n), rng), rng, collapse)
    for q in itertools.combinations(names(n), 4):
        assert quartet_topology(t, q).resolution == quartet_by_splits(t, q)


# --- GQD ---------------------------------------------------------------------


def brute_gqd(gold, inferred):
    both = diff = 0
    for q in itertools.combinations(sorted(gold.leaf_labels()), 4):
        a, b = quartet_by_splits(gold, q), quartet_by_splits(inferred, q)
        if a != 3 and b != 3:
            both += 1
            diff += a != b
    return diff / both, both, diff


def test_gqd_identical_is_zero():
    t = random_binary_tree(names(15), np.random.default_rng(0))
    res = gqd(t, t)
    assert res.value == 0.0 and res.differing == 0 and res.resolved_both == 1365


def test_gqd_star_gold_undefined():
    star = parse_newick("(A,B,C,D,E);")
    with pytest.raises(DomainError, match="undefined"):
        gqd(star, parse_newick("((A,B),(C,(D,E)));"))


def test_gqd_too_few_shared_leaves():
    with pytest.raises(DomainError):
        gqd(parse_newick("((A,B),(C,D));"), parse_newick("((E,F),(G,H));"))


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 11), st.integers(0, 10**6), st.floats(0, 0.7))
def test_gqd_matches_brute_force(n, seed, collapse):
    rng = np.random.default_rng(seed)
    gold = collapse_some(random_binary_tree(names(n), rng), rng, collapse)
    inferred = random_binary_tree(names(n), rng)
    try:
        expected = brute_gqd(gold, inferred)
    except ZeroDivisionError:
        with pytest.raises(DomainError):
            gqd(gold, inferred)
        return
    res = gqd(gold, inferred)
    assert (res.value, res.resolved_both, res.differing) == expected


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 14), st.integers(0, 10**6))
def test_gqd_symmetric_and_root_free(n, seed):
    rng = np.random.default_rng(seed)
    a = random_binary_tree(names(n), rng)
    b = random_binary_tree(names(n), rng)
    assert gqd(a, b).value == gqd(b, a).value
    assert gqd(reroot_at_leaf_parent(a, "t03"), b).value == gqd(a, b).value


def test_gqd_restricts_to_shared_leaves():
    gold = parse_newick("((A,B),((C,D),X));")
    inferred = parse_newick("((A,C),(B,(D,Y)));")
    res = gqd(gold, inferred)
    assert res.resolved_both == 1 and res.differing == 1


def test_gqd_threads_and_sampling():
    rng = np.random.default_rng(3)
    a = random_binary_tree(names(18), rng)
    b = random_binary_tree(names(18), rng)
    assert gqd(a, b, threads=4) == gqd(a, b, threads=1)
    s1 = gqd(a, b, "sampled", samples=2000, seed=5)
    s2 = gqd(a, b, "sampled", samples=2000, seed=5)
    assert s1 == s2
    assert s1.stderr is not None and s1.stderr > 0
    assert len(s1.line().split("\t")) == 6
    assert len(gqd(a, b).line().split("\t")) == 5
    with pytest.raises(DomainError):
        gqd(a, b, mode="fast")


def test_gqd_chance_level_small():
    rng = np.random.default_rng(20)
    gold = random_binary_tree(names(20), rng)
    vals = [gqd(gold, random_binary_tree(names(20), rng), "sampled", 500, seed=k).value for k in range(200)]
    assert abs(np.mean(vals) - 2 / 3) < 0.03


def test_gqd_warns_on_nonbinary_inferred(caplog):
    gold = parse_newick("((A,B),(C,(D,E)));")
    res = gqd(gold, parse_newick("((A,B),C,D,E);"))
    assert "not binary" in caplog.text
    assert res.resolved_both < 5


# --- neighbour joining -------------------------------------------------------


def test_nj_additive_four_taxa():
    # ((A:1,B:2):3,(C:1.5,D:0.5)) as path lengths
    taxa = ["A", "B", "C", "D"]
    d = np.array([[0, 3, 5.5, 4.5], [3, 0, 6.5, 5.5], [5.5, 6.5, 0, 2], [4.5, 5.5, 2, 0]])
    t = neighbor_joining(distances=d, taxa=taxa)
    assert quartet_topology(t, taxa).resolution == AB_CD
    lengths = {n.name: n.length for n in t.leaves()}
    assert lengths["A"] == pytest.approx(1.0) and lengths["B"] == pytest.approx(2.0)
    assert lengths["C"] == pytest.approx(1.5) and lengths["D"] == pytest.approx(0.5)


def test_nj_three_taxa():
    m = CharMatrix(["A", "B", "C"], ["x", "y"], [[1, 0], [0, 1], [1, 1]])
    t = neighbor_joining(m)
    assert sorted(t.leaf_labels()) == ["A", "B", "C"] and len(t.root.children) == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 10), st.integers(0, 10**6))
def test_nj_recovers_additive_trees_and_ignores_input_order(n, seed):
    rng = np.random.default_rng(seed)
    true = random_binary_tree(names(n), rng)
    for node in true.postorder():
        node.length = float(rng.uniform(0.5, 2.0))
    labels = names(n)
    nodes = list(true.postorder())
    parent = {id(c): p for p in nodes for c in p.children}

    def path_to_root(leaf):
        out, node = {}, leaf
        acc = 0.0
        while True:
            out[id(node)] = acc
            if id(node) not in parent:
                return out
            acc += node.length
            node = parent[id(node)]

    leaves = {l.name: l for l in true.leaves()}
    d = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        pi, pj = path_to_root(leaves[labels[i]]), path_to_root(leaves[labels[j]])
        d[i, j] = d[j, i] = min(pi[k] + pj[k] for k in pi if k in pj)
    t = neighbor_joining(distances=d, taxa=labels)
    assert leaf_partitions(t) == leaf_partitions(restrict(true, labels))
    perm = rng.permutation(n)
    t2 = neighbor_joining(distances=d[np.ix_(perm, perm)], taxa=[labels[k] for k in perm])
    assert t2.to_newick() == t.to_newick()


def test_hamming_ignores_missing():
    m = CharMatrix(["A", "B", "C"], list("wxyz"), [[1, 0, MISSING, 1], [1, 1, 0, MISSING], [0, 0, 0, 1]])
    d = hamming_distances(m)
    assert d[0, 1] == pytest.approx(1 / 2)
    assert d[0, 2] == pytest.approx(1 / 3)
    assert d[1, 2] == pytest.approx(2 / 3)


def test_nj_undefined_distance_lists_taxa():
    m = CharMatrix(["A", "B", "C"], ["x", "y"], [[1, MISSING], [MISSING, 1], [1, 0]])
    with pytest.raises(DomainError, match="A/B"):
        neighbor_joining(m)


def test_random_binary_tree_is_binary():
    t = random_binary_tree(names(30), np.random.default_rng(1))
    assert t.is_binary() and sorted(t.leaf_labels()) == names(30)
    t.validate()
