import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LOUSE_ALPHABET, SOUTHERN, edit_similarity, louse_gold_msa, projected_alignments
from phylolex import phmm
from phylolex.errors import DomainError, ParseError
from phylolex.msa import (
    MsaConfig,
    Msa,
    align_concept,
    align_forms,
    build_library,
    cross_language_pairs,
    guide_tree,
    merge_order,
    percent_identity,
    progressive_align,
    read_msa,
    write_msa,
)
from phylolex.wordlist import GAP, Alphabet, WordForm, Wordlist

NO_EXT = MsaConfig(extension_rounds=0)


def aln(a, b, pairs):
    return phmm.PairwiseAlignment(a, b, tuple(pairs), 0.0)


def diag_model(alphabet=Alphabet(), corpus=("pataku", "mino")):
    return phmm.Model(phmm.init_params(alphabet), phmm.fit_null(corpus, alphabet, 0.5), phmm.LogisticHead())


def test_identical_pair_weights_one():
    a, b = WordForm("A", "x", "kum"), WordForm("B", "x", "kum")
    lib = build_library([aln(a, b, zip("kum", "kum"))], [a, b], NO_EXT)
    for p, q in itertools.product(range(3), repeat=2):
        assert lib.weight(a, p, b, q) == (1.0 if p == q else 0.0)


def test_percent_identity_and_floor():
    a, b = WordForm("A", "x", "pat"), WordForm("B", "x", "kit")
    al = aln(a, b, [("p", "k"), ("a", "i"), ("t", "t")])
    assert percent_identity(al) == pytest.approx(1 / 3)
    c, d = WordForm("A", "x", "pa"), WordForm("B", "x", "ki")
    lib = build_library([aln(c, d, [("p", "k"), ("a", "i")])], [c, d], NO_EXT)
    assert lib.weight(c, 0, d, 0) == 0.1


def test_gap_columns_carry_no_weight():
    a, b = WordForm("A", "x", "kum"), WordForm("B", "x", "ku")
    lib = build_library([aln(a, b, [("k", "k"), ("u", "u"), ("m", GAP)])], [a, b], NO_EXT)
    assert lib.matrix(0, 1)[2].sum() == 0.0


def test_extension_is_transitive():
    a, b, c = WordForm("A", "x", "ka"), WordForm("B", "x", "ka"), WordForm("C", "x", "ka")
    alns = [aln(a, b, zip("ka", "ka")), aln(b, c, zip("ka", "ka"))]
    assert build_library(alns, [a, b, c], NO_EXT).weight(a, 0, c, 0) == 0.0
    assert build_library(alns, [a, b, c]).weight(a, 0, c, 0) > 0.0


def test_extension_hand_computed():
    a, b, c = WordForm("A", "x", "pat"), WordForm("B", "x", "pet"), WordForm("C", "x", "at")
    alns = [
        aln(a, b, [("p", "p"), ("a", "e"), ("t", "t")]),  # identity 2/3
        aln(a, c, [("p", GAP), ("a", "a"), ("t", "t")]),  # identity 1
        aln(b, c, [("p", GAP), ("e", "a"), ("t", "t")]),  # identity 1/2
    ]
    forms = [a, b, c]
    primary = {}
    for al in alns:
        w = max(0.1, percent_identity(al))
        for p, q in al.positions:
            if p is not None and q is not None:
                primary[(al.left, p, al.right, q)] = w
                primary[(al.right, q, al.left, p)] = w

    def w0(x, p, y, q):
        return primary.get((x, p, y, q), 0.0)

    lib = build_library(alns, forms)
    for x, y in itertools.permutations(forms, 2):
        for p in range(len(x)):
            for q in range(len(y)):
                expected = w0(x, p, y, q) + sum(
                    min(w0(x, p, z, k), w0(z, k, y, q)) for z in forms if z not in (x, y) for k in range(len(z))
                )
                assert lib.weight(x, p, y, q) == pytest.approx(expected, abs=1e-12)
    # e.g. a1~c0 directly (1.0) plus via b: min(2/3, 1/2)
    assert lib.weight(a, 1, c, 0) == pytest.approx(1.0 + 0.5)


def test_library_errors():
    a, b = WordForm("A", "x", "ka"), WordForm("B", "y", "ka")
    with pytest.raises(DomainError):
        build_library([aln(a, b, zip("ka", "ka"))], [a, b])
    c = WordForm("B", "x", "ka")
    twice = [aln(a, c, zip("ka", "ka")), aln(c, a, zip("ka", "ka"))]
    with pytest.raises(DomainError):
        build_library(twice, [a, c])


def sim_from_dist(d):
    s = -np.asarray(d, dtype=float)
    np.fill_diagonal(s, np.nan)
    return s


def forms_n(n):
    return [WordForm(f"L{k}", "x", "pa") for k in range(n)]


def test_guide_tree_small():
    assert guide_tree(forms_n(2), sim_from_dist([[0, 1], [1, 0]])) == (0, 1)
    d = [[0, 1, 3], [1, 0, 3], [3, 3, 0]]
    assert guide_tree(forms_n(3), sim_from_dist(d)) == ((0, 1), 2)
    d = [[0, 3, 1], [3, 0, 3], [1, 3, 0]]
    assert guide_tree(forms_n(3), sim_from_dist(d)) == ((0, 2), 1)


def test_guide_tree_uses_average_linkage():
    # single linkage would attach 2 to (0, 1) at 3; UPGMA sees (9 + 3) / 2 = 6 > 4
    d = [[0, 2, 3, 10], [2, 0, 9, 10], [3, 9, 0, 4], [10, 10, 4, 0]]
    tree = guide_tree(forms_n(4), sim_from_dist(d))
    assert tree == ((0, 1), (2, 3))
    assert merge_order(tree) == [(0, 1), (2, 3), ((0, 1), (2, 3))]


def test_guide_tree_ties_lexicographic():
    d = np.ones((4, 4)) - np.eye(4)
    assert guide_tree(forms_n(4), sim_from_dist(d)) == (((0, 1), 2), 3)


def test_identical_forms_gapless():
    forms = [WordForm(f"L{k}", "x", "tikti") for k in range(4)]
    msa = align_forms(forms, diag_model())
    assert msa.width == 5
    assert all(row == "tikti" for _, row in msa.rows)


def test_gapfree_equal_length_library_gives_gapfree_msa():
    forms = sorted([WordForm("A", "x", "pata"), WordForm("B", "x", "kuti"), WordForm("C", "x", "pami")])
    alns = [aln(x, y, zip(x.segments, y.segments)) for x, y in itertools.combinations(forms, 2)]
    lib = build_library(alns, forms)
    msa = progressive_align(forms, lib, guide_tree(forms, edit_similarity(forms)))
    assert all(GAP not in row for _, row in msa.rows)


def test_single_form_concept():
    wl = Wordlist((WordForm("A", "x", "ku"), WordForm("A", "y", "pa")))
    msa = align_concept(wl, "x", diag_model())
    assert msa.width == 2 and len(msa.rows) == 1


def test_two_identical_forms():
    wl = Wordlist((WordForm("A", "x", "kum"), WordForm("B", "x", "kum")))
    msa = align_concept(wl, "x", diag_model())
    assert [r for _, r in msa.rows] == ["kum", "kum"]


def test_synonyms_are_rows_but_not_aligned_pairwise():
    forms = [WordForm("A", "x", "kum"), WordForm("A", "x", "tik"), WordForm("B", "x", "kum")]
    assert cross_language_pairs(forms) == [(0, 2), (1, 2)]
    msa = align_forms(forms, diag_model())
    assert len(msa.rows) == 3


def test_align_is_deterministic():
    rng = np.random.default_rng(1)
    forms = [WordForm(f"L{k}", "x", "".join(rng.choice(list("ptkaiu"), rng.integers(3, 7)))) for k in range(4)]
    model = diag_model()
    first = align_forms(forms, model)
    for _ in range(3):
        assert align_forms(list(reversed(forms)), model) == first


forms_strategy = st.lists(st.text(st.sampled_from("ptkmaiu"), min_size=1, max_size=7), min_size=2, max_size=6)


@settings(max_examples=60, deadline=None)
@given(forms_strategy, st.integers(0, 100))
def test_msa_invariants(words, seed):
    forms = [WordForm(f"L{k}", "x", w) for k, w in enumerate(words)]
    model = phmm.Model(
        phmm.init_params(Alphabet(), seed=seed, noise=0.5), phmm.fit_null(words, Alphabet(), 0.5), phmm.LogisticHead()
    )
    msa = align_forms(forms, model)
    msa.validate()
    assert sorted(f.segments for f, _ in msa.rows) == sorted(words)
    assert all(any(c != GAP for c in msa.column(k)) for k in range(msa.width))


@settings(max_examples=60, deadline=None)
@given(forms_strategy)
def test_library_symmetric(words):
    forms = sorted({WordForm(f"L{k}", "x", w) for k, w in enumerate(words)})
    params = phmm.init_params(Alphabet())
    alns = [phmm.viterbi_align(params, forms[i], forms[j]) for i, j in cross_language_pairs(forms)]
    lib = build_library(alns, forms)
    for x, y in itertools.combinations(forms, 2):
        for p in range(len(x)):
            for q in range(len(y)):
                assert lib.weight(x, p, y, q) == lib.weight(y, q, x, p)


def test_louse_from_favourable_library():
    gold = louse_gold_msa()
    forms = sorted(f for f, _ in gold.rows)
    lib = build_library(projected_alignments(gold), forms)
    msa = progressive_align(forms, lib, guide_tree(forms, edit_similarity(forms)))
    assert dict((f.doculect, r) for f, r in msa.rows) == dict((f.doculect, r) for f, r in gold.rows)


def test_louse_pipeline_groups_southern_initials():
    from conftest import louse_wordlist

    wl = louse_wordlist()
    model = diag_model(LOUSE_ALPHABET, [f.segments for f in wl.forms])
    msa = align_concept(wl, "louse", model)
    rows = {f.doculect: r for f, r in msa.rows}
    first = {d: rows[d].index("t") for d in SOUTHERN}
    assert len(set(first.values())) == 1


def test_msa_file_roundtrip():
    gold = louse_gold_msa()
    buf = io.StringIO()
    write_msa(gold, buf)
    assert buf.getvalue().splitlines()[0] == "# concept louse width 8"
    assert read_msa(io.StringIO(buf.getvalue())) == gold
    with pytest.raises(ParseError):
        read_msa(io.StringIO("# concept louse width 9\nA\t1\tku\n"))


def test_validate_catches_bad_rows():
    f = WordForm("A", "x", "ku")
    with pytest.raises(DomainError):
        Msa("x", ((f, "k-"),)).validate()
    with pytest.raises(DomainError):
        Msa("x", ((f, "k-u"), (WordForm("B", "x", "pa"), "p-a"))).validate()
