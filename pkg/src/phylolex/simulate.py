"""Synthetic wordlists evolved along a known tree.

Used as ground truth for end-to-end recovery checks: every concept starts as
a random root word and evolves down a random binary tree through lexical
replacement, regular (lineage-wide) sound changes, sporadic substitutions and
indels. Cognate-set labels follow the replacement events.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import Node, PhyloTree, random_binary_tree
from .wordlist import Alphabet, WordForm, Wordlist

CONSONANTS = tuple("pbfvmwtdszcnrlSjykgxNqh")
VOWELS = tuple("ieEauo")


@dataclass(frozen=True)
class SimConfig:
    languages: int = 12
    concepts: int = 40
    seed: int = 42
    branch_min: float = 0.6
    branch_max: float = 1.2
    replacement_rate: float = 0.12
    regular_change_rate: float = 1.0
    substitution_rate: float = 0.08
    indel_rate: float = 0.05
    min_length: int = 3
    max_length: int = 7
    missing_prob: float = 0.03
    synonym_prob: float = 0.02


def _random_word(rng, cfg: SimConfig) -> str:
    n = int(rng.integers(cfg.min_length, cfg.max_length + 1))
    out = []
    vowel = bool(rng.random() < 0.3)
    for _ in range(n):
        pool = VOWELS if vowel else CONSONANTS
        out.append(pool[int(rng.integers(len(pool)))])
        vowel = not vowel if rng.random() < 0.85 else vowel
    return "".join(out)


def _same_class(sym: str, rng) -> str:
    pool = VOWELS if sym in VOWELS else CONSONANTS
    while True:
        c = pool[int(rng.integers(len(pool)))]
        if c != sym:
            return c


def _evolve(lexicon: dict, t: float, rng, cfg: SimConfig, counter: dict) -> dict:
    out = {}
    for concept, (word, cog) in lexicon.items():
        if rng.random() < 1 - np.exp(-cfg.replacement_rate * t):
            counter[concept] += 1
            word, cog = _random_word(rng, cfg), f"{concept}-{counter[concept]}"
        out[concept] = [word, cog]
    for _ in range(int(rng.poisson(cfg.regular_change_rate * t))):
        symbols = sorted({c for w, _ in out.values() for c in w})
        src = symbols[int(rng.integers(len(symbols)))]
        dst = _same_class(src, rng)
        for entry in out.values():
            entry[0] = entry[0].replace(src, dst)
    p_sub = 1 - np.exp(-cfg.substitution_rate * t)
    p_indel = 1 - np.exp(-cfg.indel_rate * t)
    for entry in out.values():
        w = list(entry[0])
        for k in range(len(w)):
            if rng.random() < p_sub:
                w[k] = _same_class(w[k], rng)
        if rng.random() < p_indel:
            if len(w) > cfg.min_length and rng.random() < 0.5:
                del w[int(rng.integers(len(w)))]
            else:
                pool = VOWELS if rng.random() < 0.4 else CONSONANTS
                w.insert(int(rng.integers(len(w) + 1)), pool[int(rng.integers(len(pool)))])
        entry[0] = "".join(w)
    return {c: tuple(v) for c, v in out.items()}


def simulate(cfg: SimConfig = SimConfig()) -> tuple[Wordlist, PhyloTree]:
    """Return the leaf wordlist and the generating tree (with branch lengths)."""
    rng = np.random.default_rng(cfg.seed)
    names = [f"L{k + 1:02d}" for k in range(cfg.languages)]
    tree = random_binary_tree(names, rng)
    for node in tree.postorder():
        if node is not tree.root:
            node.length = float(rng.uniform(cfg.branch_min, cfg.branch_max))
    concepts = [f"c{k + 1:03d}" for k in range(cfg.concepts)]
    counter = {c: 1 for c in concepts}
    root_lex = {c: (_random_word(rng, cfg), f"{c}-1") for c in concepts}

    leaves: dict[str, dict] = {}

    def descend(node: Node, lex: dict):
        if node.is_leaf:
            leaves[node.name] = lex
            return
        for child in node.children:
            descend(child, _evolve(lex, child.length, rng, cfg, counter))

    descend(tree.root, root_lex)

    forms = []
    fid = 0
    for lang in names:
        for c in concepts:
            if rng.random() < cfg.missing_prob:
                continue
            word, cog = leaves[lang][c]
            fid += 1
            forms.append(WordForm(lang, c, word, cog, str(fid)))
            if rng.random() < cfg.synonym_prob:
                counter[c] += 1
                fid += 1
                forms.append(WordForm(lang, c, _random_word(rng, cfg), f"{c}-{counter[c]}", str(fid)))
    return Wordlist(tuple(forms), Alphabet()), tree
