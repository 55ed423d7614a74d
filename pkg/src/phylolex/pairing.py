"""Mining pHMM training pairs from a wordlist.

Languages are compared with a calibrated mean normalised Levenshtein
distance; pairs below a threshold count as probably related, and their
synonymous word pairs become positive examples. Negative examples are random
word pairs with differing meanings.
"""
from __future__ import annotations

import itertools
import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import DomainError, EmptyInputError
from .wordlist import WordForm, Wordlist

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.7
DEFAULT_CALIBRATION = 1000


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def levenshtein_norm(a: str, b: str) -> float:
    """Unit-cost edit distance divided by the longer length."""
    if not a or not b:
        raise DomainError("levenshtein_norm needs nonempty sequences")
    return levenshtein(a, b) / max(len(a), len(b))


@dataclass(frozen=True)
class LanguagePairDistance:
    doculect_a: str
    doculect_b: str
    distance: float
    shared_concepts: int


def pair_seed(seed: int, a: str, b: str) -> list[int]:
    """Seed material for one unordered doculect pair."""
    lo, hi = sorted((a, b))
    return [seed, zlib.crc32(f"{lo}\t{hi}".encode())]


def _distance(
    forms_a: dict[str, list[WordForm]],
    forms_b: dict[str, list[WordForm]],
    a: str,
    b: str,
    seed: int,
    calibration_size: int,
) -> LanguagePairDistance:
    if a > b:
        a, b, forms_a, forms_b = b, a, forms_b, forms_a
    shared = sorted(set(forms_a) & set(forms_b))
    if not shared:
        raise DomainError(f"no shared concepts between {a} and {b}")
    num = sum(
        min(levenshtein_norm(x.segments, y.segments) for x in forms_a[c] for y in forms_b[c]) for c in shared
    ) / len(shared)

    # calibration pool: cross-concept pairs, indexed without materialising them
    left = [(c, f.segments) for c in sorted(forms_a) for f in forms_a[c]]
    right = [(c, f.segments) for c in sorted(forms_b) for f in forms_b[c]]
    total = len(left) * len(right)
    n_same = sum(len(forms_a[c]) * len(forms_b[c]) for c in shared)
    n_cross = total - n_same
    if n_cross == 0:
        raise DomainError(f"no cross-concept pairs to calibrate {a}/{b}")
    if n_cross <= calibration_size:
        sample = [(x, y) for (cx, x), (cy, y) in itertools.product(left, right) if cx != cy]
    else:
        rng = np.random.default_rng(pair_seed(seed, a, b))
        chosen: set[int] = set()
        sample = []
        while len(sample) < calibration_size:
            k = int(rng.integers(total))
            if k in chosen:
                continue
            (cx, x), (cy, y) = left[k // len(right)], right[k % len(right)]
            if cx == cy:
                continue
            chosen.add(k)
            sample.append((x, y))
    den = sum(levenshtein_norm(x, y) for x, y in sample) / len(sample)
    if den == 0:
        raise DomainError(f"zero calibration mean for {a}/{b}")
    return LanguagePairDistance(a, b, num / den, len(shared))


def language_distance(
    wl: Wordlist, a: str, b: str, seed: int = 0, calibration_size: int = DEFAULT_CALIBRATION
) -> LanguagePairDistance:
    """Mean minimal synonym distance over a cross-concept calibration mean.

    The calibration sample is drawn with a seed derived from ``seed`` and the
    unordered pair, so ``language_distance(a, b) == language_distance(b, a)``.
    """
    if a == b:
        raise DomainError("language_distance needs two distinct doculects")
    idx = wl.by_doculect()
    if a not in idx or b not in idx:
        raise DomainError(f"unknown doculect {a if a not in idx else b!r}")
    return _distance(idx[a], idx[b], a, b, seed, calibration_size)


def all_distances(
    wl: Wordlist, seed: int = 0, calibration_size: int = DEFAULT_CALIBRATION, threads: int = 1
) -> list[LanguagePairDistance]:
    """Distances for every doculect pair sharing a concept, sorted by pair."""
    idx = wl.by_doculect()
    names = sorted(idx)
    jobs = [(a, b) for a, b in itertools.combinations(names, 2) if set(idx[a]) & set(idx[b])]

    def run(job):
        a, b = job
        try:
            return _distance(idx[a], idx[b], a, b, seed, calibration_size)
        except DomainError as exc:
            log.warning("skipping %s/%s: %s", a, b, exc)
            return None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    return [r for r in results if r is not None]


def related_pairs(
    wl: Wordlist,
    threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
    calibration_size: int = DEFAULT_CALIBRATION,
    threads: int = 1,
    distances: list[LanguagePairDistance] | None = None,
) -> list[LanguagePairDistance]:
    if not threshold > 0:
        raise DomainError("threshold must be positive")
    if distances is None:
        distances = all_distances(wl, seed, calibration_size, threads)
    return [d for d in distances if d.distance < threshold]


def write_related(pairs: Iterable[LanguagePairDistance], stream: TextIO):
    for d in sorted(pairs, key=lambda d: (d.doculect_a, d.doculect_b)):
        stream.write(f"{d.doculect_a}\t{d.doculect_b}\t{d.distance!r}\n")


@dataclass(frozen=True)
class TrainingPair:
    a: WordForm
    b: WordForm
    label: int

    def __iter__(self):
        return iter((self.a.segments, self.b.segments, self.label))


def sample_training_pairs(wl: Wordlist, related: Iterable, seed: int = 0) -> Iterator[TrainingPair]:
    """Balanced positive/negative pairs in a seeded shuffled order.

    Positives are all synonymous cross-language pairs of the related
    doculect pairs. Negatives are drawn uniformly from all word pairs with
    differing concepts, without replacement unless the pool is too small.
    """
    pairs = sorted({tuple(sorted((p.doculect_a, p.doculect_b) if isinstance(p, LanguagePairDistance) else p)) for p in related})
    if not pairs:
        raise EmptyInputError("no related doculect pairs")
    idx = wl.by_doculect()
    positives = []
    for a, b in pairs:
        for c in sorted(set(idx.get(a, {})) & set(idx.get(b, {}))):
            for x in idx[a][c]:
                for y in idx[b][c]:
                    positives.append((x, y))
    if not positives:
        raise EmptyInputError("related pairs share no concepts")

    forms = sorted(wl.forms)
    n = len(forms)
    concept_sizes = wl.by_concept()
    pool = (n * n - sum(len(v) ** 2 for v in concept_sizes.values())) // 2
    if pool == 0:
        raise EmptyInputError("no word pairs with differing concepts")
    rng = np.random.default_rng(seed)
    replace = pool < len(positives)
    if replace:
        log.warning("only %d negative pairs available for %d positives; sampling with replacement", pool, len(positives))
    seen: set[tuple[int, int]] = set()
    negatives = []
    while len(negatives) < len(positives):
        i, j = (int(v) for v in rng.integers(n, size=2))
        if forms[i].concept == forms[j].concept:
            continue
        key = (min(i, j), max(i, j))
        if not replace:
            if key in seen:
                continue
            seen.add(key)
        negatives.append((forms[i], forms[j]))

    items = [TrainingPair(x, y, 1) for x, y in positives] + [TrainingPair(x, y, 0) for x, y in negatives]
    for k in rng.permutation(len(items)):
        yield items[k]


def write_training_pairs(pairs: Iterable[TrainingPair], stream: TextIO):
    for p in pairs:
        stream.write(f"{p.a.segments}\t{p.b.segments}\t{p.label}\n")


def read_training_pairs(stream: TextIO) -> list[tuple[str, str, int]]:
    out = []
    for line in stream:
        if line.strip():
            a, b, lab = line.rstrip("\n").split("\t")
            out.append((a, b, int(lab)))
    return out

