import io
import itertools
from pathlib import Path

import numpy as np
import pytest

from phylolex import phmm
from phylolex.msa import read_msa
from phylolex.pairing import levenshtein_norm, related_pairs, sample_training_pairs
from phylolex.simulate import SimConfig, simulate
from phylolex.wordlist import GAP, Alphabet, read_wordlist

FIXTURES = Path(__file__).parent / "fixtures"
LOUSE_ALPHABET = Alphabet(extra="I")
NORTHERN = ("Even", "Kilen", "Negidal", "Oroch", "Udihe")
SOUTHERN = ("Nanai", "Orok", "Ulch")

# training set-up shared by the end-to-end checks
ACCEPT_TRAIN = phmm.TrainConfig(learning_rate=0.01, batch_size=64, epochs=10, seed=42)
HOLDOUT = 0.2


def louse_wordlist():
    return read_wordlist(FIXTURES / "louse.tsv", alphabet=LOUSE_ALPHABET).wordlist


def louse_gold_msa():
    with open(FIXTURES / "louse.msa", encoding="utf-8") as fh:
        return read_msa(fh)


def projected_alignments(msa):
    """Pairwise alignments read off a reference MSA (cross-language pairs only)."""
    out = []
    for (fa, ra), (fb, rb) in itertools.combinations(msa.rows, 2):
        if fa.doculect == fb.doculect:
            continue
        cols = tuple((x, y) for x, y in zip(ra, rb) if not (x == GAP and y == GAP))
        out.append(phmm.PairwiseAlignment(fa, fb, cols, float("nan")))
    return out


def edit_similarity(forms):
    n = len(forms)
    sim = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        sim[i, j] = sim[j, i] = -levenshtein_norm(forms[i].segments, forms[j].segments)
    np.fill_diagonal(sim, np.nan)
    return sim


def split_pairs(pairs, holdout=HOLDOUT):
    n_hold = int(round(holdout * len(pairs)))
    return [tuple(p) for p in pairs[: len(pairs) - n_hold]], [tuple(p) for p in pairs[len(pairs) - n_hold :]]


@pytest.fixture(scope="session")
def louse():
    return louse_wordlist()


@pytest.fixture(scope="session")
def synthetic():
    """(wordlist, generating tree) of the 12-language, 40-concept simulation."""
    return simulate(SimConfig(languages=12, concepts=40, seed=42))


@pytest.fixture(scope="session")
def synthetic_training(synthetic):
    wl, _ = synthetic
    related = related_pairs(wl, 0.7, seed=42)
    pairs = list(sample_training_pairs(wl, related, seed=42))
    train, held = split_pairs(pairs)
    model, report = phmm.train(train, ACCEPT_TRAIN, alphabet=wl.alphabet)
    return model, report, train, held


def text_stream(text):
    return io.StringIO(text)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
