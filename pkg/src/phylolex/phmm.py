"""Pair hidden Markov model over sound-class sequences.

States are Match (emits a symbol pair), GapX (emits a symbol of the first
sequence against a gap) and GapY (emits a symbol of the second sequence).
A silent Start row and an End column complete the transition table::

    rows:    Start, Match, GapX, GapY
    columns: Match, GapX, GapY, End

All tables are stored as unconstrained logits and normalised with a softmax
(the whole match table is one distribution, the gap table another, each
transition row its own). Gradients of the log-likelihood with respect to the
log-probabilities are the posterior expected counts, obtained from a batched
forward-backward pass; the softmax Jacobian turns them into logit gradients.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit, log_softmax

from .errors import ConfigError, DomainError, TrainingError
from .wordlist import GAP, Alphabet, WordForm

log = logging.getLogger(__name__)

MATCH, GAPX, GAPY = 0, 1, 2
STATE_NAMES = ("M", "X", "Y")
START_ROW = 0
END_COL = 3
FORMAT = "phylolex-phmm"
FORMAT_VERSION = 1

_NEG = -np.inf


@dataclass(frozen=True, eq=False)
class PairHmmParams:
    alphabet: Alphabet
    match_logits: np.ndarray  # (K, K)
    gap_logits: np.ndarray  # (K,)
    trans_logits: np.ndarray  # (4, 4)

    @cached_property
    def log_match(self) -> np.ndarray:
        return log_softmax(self.match_logits, axis=None)

    @cached_property
    def log_gap(self) -> np.ndarray:
        return log_softmax(self.gap_logits)

    @cached_property
    def log_trans(self) -> np.ndarray:
        return log_softmax(self.trans_logits, axis=1)

    def symmetric_log_match(self) -> np.ndarray:
        """Symmetrised match log-probabilities, for reporting only."""
        p = np.exp(self.log_match)
        with np.errstate(divide="ignore"):
            return np.log(0.5 * (p + p.T))

    def best_partners(self, symbol: str, n: int = 10) -> list[tuple[str, float]]:
        row = self.log_match[self.alphabet.index[symbol]]
        order = np.argsort(-row, kind="stable")[:n]
        return [(self.alphabet.symbols[k], float(row[k])) for k in order]

    def equals(self, other: "PairHmmParams") -> bool:
        return (
            self.alphabet == other.alphabet
            and np.array_equal(self.match_logits, other.match_logits)
            and np.array_equal(self.gap_logits, other.gap_logits)
            and np.array_equal(self.trans_logits, other.trans_logits)
        )


@dataclass(frozen=True, eq=False)
class NullModelParams:
    alphabet: Alphabet
    unigram: np.ndarray  # log-probabilities, (K,)
    continue_prob: float

    def __post_init__(self):
        if not 0.0 < self.continue_prob < 1.0:
            raise DomainError("continue_prob must lie strictly between 0 and 1")

    def equals(self, other: "NullModelParams") -> bool:
        return (
            self.alphabet == other.alphabet
            and np.array_equal(self.unigram, other.unigram)
            and self.continue_prob == other.continue_prob
        )


@dataclass(frozen=True)
class LogisticHead:
    weight: float = 1.0
    bias: float = 0.0


@dataclass(frozen=True)
class PairwiseAlignment:
    left: WordForm | str
    right: WordForm | str
    columns: tuple[tuple[str, str], ...]
    viterbi_logprob: float
    log_odds: float = math.nan

    @property
    def positions(self) -> list[tuple[int | None, int | None]]:
        """Column-wise segment indices, ``None`` where the cell is a gap."""
        out = []
        i = j = 0
        for x, y in self.columns:
            pi = pj = None
            if x != GAP:
                pi, i = i, i + 1
            if y != GAP:
                pj, j = j, j + 1
            out.append((pi, pj))
        return out

    @property
    def states(self) -> list[int]:
        return [MATCH if x != GAP and y != GAP else (GAPX if x != GAP else GAPY) for x, y in self.columns]

    def __str__(self):
        return "".join(x for x, _ in self.columns) + "\n" + "".join(y for _, y in self.columns)


def _segments(x) -> str:
    return x.segments if isinstance(x, WordForm) else x


def init_params(alphabet: Alphabet, seed: int = 0, diagonal: float = 2.0, noise: float = 0.01) -> PairHmmParams:
    """Diagonal-biased match logits, near-uniform elsewhere."""
    rng = np.random.default_rng(seed)
    k = len(alphabet)
    match = diagonal * np.eye(k) + noise * rng.standard_normal((k, k))
    gap = noise * rng.standard_normal(k)
    trans = noise * rng.standard_normal((4, 4))
    return PairHmmParams(alphabet, match, gap, trans)


# ---------------------------------------------------------------------------
# batched dynamic programming


def _encode(alphabet: Alphabet, seqs: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    if lengths.size and lengths.min() < 1:
        raise DomainError("sequences must be nonempty")
    width = int(lengths.max()) if lengths.size else 0
    codes = np.zeros((len(seqs), width), dtype=np.int64)
    for r, s in enumerate(seqs):
        try:
            codes[r, : len(s)] = [alphabet.index[c] for c in s]
        except KeyError as exc:
            raise DomainError(f"symbol {exc.args[0]!r} not in alphabet") from None
    return codes, lengths


class _Batch:
    """Forward (and optionally backward) tables for a batch of pairs."""

    def __init__(self, params: PairHmmParams, left: Sequence[str], right: Sequence[str]):
        self.A, self.la = _encode(params.alphabet, left)
        self.B, self.lb = _encode(params.alphabet, right)
        self.lm, self.lg, self.lt = params.log_match, params.log_gap, params.log_trans
        self.eM = self.lm[self.A[:, :, None], self.B[:, None, :]]
        self.gX = self.lg[self.A]
        self.gY = self.lg[self.B]
        self._forward()

    def _forward(self):
        lt, eM, gX, gY = self.lt, self.eM, self.gX, self.gY
        nb, n = self.A.shape
        m = self.B.shape[1]
        f = np.full((3, nb, n + 1, m + 1), _NEG)

        def into(t, cells):
            # cells: f[s] values at the predecessor cell, for s in M, X, Y
            acc = cells[0] + lt[1, t]
            acc = np.logaddexp(acc, cells[1] + lt[2, t])
            return np.logaddexp(acc, cells[2] + lt[3, t])

        with np.errstate(invalid="ignore"):
            for i in range(n + 1):
                for j in range(m + 1):
                    if i and j:
                        prev = lt[START_ROW, MATCH] if i == 1 and j == 1 else into(MATCH, f[:, :, i - 1, j - 1])
                        f[MATCH, :, i, j] = eM[:, i - 1, j - 1] + prev
                    if i:
                        prev = lt[START_ROW, GAPX] if i == 1 and j == 0 else into(GAPX, f[:, :, i - 1, j])
                        f[GAPX, :, i, j] = gX[:, i - 1] + prev
                    if j:
                        prev = lt[START_ROW, GAPY] if i == 0 and j == 1 else into(GAPY, f[:, :, i, j - 1])
                        f[GAPY, :, i, j] = gY[:, j - 1] + prev
        self.f = f
        idx = np.arange(nb)
        last = f[:, idx, self.la, self.lb]  # (3, nb)
        z = last[0] + lt[1, END_COL]
        z = np.logaddexp(z, last[1] + lt[2, END_COL])
        self.logz = np.logaddexp(z, last[2] + lt[3, END_COL])

    def backward(self):
        lt, eM, gX, gY = self.lt, self.eM, self.gX, self.gY
        nb, n = self.A.shape
        m = self.B.shape[1]
        bk = np.full((3, nb, n + 1, m + 1), _NEG)
        la, lb = self.la, self.lb
        with np.errstate(invalid="ignore"):
            for i in range(n, -1, -1):
                for j in range(m, -1, -1):
                    outside = (i > la) | (j > lb)
                    at_end = (i == la) & (j == lb)
                    for s in range(3):
                        acc = np.where(at_end, lt[1 + s, END_COL], _NEG)
                        if i < n and j < m:
                            acc = np.logaddexp(acc, lt[1 + s, MATCH] + eM[:, i, j] + bk[MATCH, :, i + 1, j + 1])
                        if i < n:
                            acc = np.logaddexp(acc, lt[1 + s, GAPX] + gX[:, i] + bk[GAPX, :, i + 1, j])
                        if j < m:
                            acc = np.logaddexp(acc, lt[1 + s, GAPY] + gY[:, j] + bk[GAPY, :, i, j + 1])
                        bk[s, :, i, j] = np.where(outside, _NEG, acc)
        self.bk = bk
        return bk

    def expected_counts(self, weights: np.ndarray, k: int):
        """Weighted posterior usage counts of every log-probability entry."""
        f, bk, lt = self.f, self.bk, self.lt
        lz = self.logz[:, None, None]
        w = weights[:, None, None]
        A, B = self.A, self.B
        n, m = A.shape[1], B.shape[1]

        cm = np.zeros((k, k))
        cg = np.zeros(k)
        ct = np.zeros((4, 4))
        with np.errstate(invalid="ignore", under="ignore"):
            post_m = np.exp(f[MATCH, :, 1:, 1:] + bk[MATCH, :, 1:, 1:] - lz) * w
            np.add.at(cm, (np.broadcast_to(A[:, :, None], post_m.shape), np.broadcast_to(B[:, None, :], post_m.shape)), post_m)
            post_x = (np.exp(f[GAPX, :, 1:, :] + bk[GAPX, :, 1:, :] - lz) * w).sum(axis=2)
            np.add.at(cg, A, post_x)
            post_y = (np.exp(f[GAPY, :, :, 1:] + bk[GAPY, :, :, 1:] - lz) * w).sum(axis=1)
            np.add.at(cg, B, post_y)

            # transitions into Match / GapX / GapY from emitting states
            tail_m = self.eM + bk[MATCH, :, 1:, 1:] - lz
            tail_x = self.gX[:, :, None] + bk[GAPX, :, 1:, :] - lz
            tail_y = self.gY[:, None, :] + bk[GAPY, :, :, 1:] - lz
            for s in range(3):
                ct[1 + s, MATCH] = (np.exp(f[s, :, :-1, :-1] + lt[1 + s, MATCH] + tail_m) * w).sum()
                ct[1 + s, GAPX] = (np.exp(f[s, :, :-1, :] + lt[1 + s, GAPX] + tail_x) * w).sum()
                ct[1 + s, GAPY] = (np.exp(f[s, :, :, :-1] + lt[1 + s, GAPY] + tail_y) * w).sum()
            wv = weights
            ct[START_ROW, MATCH] = (np.exp(lt[0, MATCH] + tail_m[:, 0, 0]) * wv).sum()
            ct[START_ROW, GAPX] = (np.exp(lt[0, GAPX] + tail_x[:, 0, 0]) * wv).sum()
            ct[START_ROW, GAPY] = (np.exp(lt[0, GAPY] + tail_y[:, 0, 0]) * wv).sum()
            idx = np.arange(A.shape[0])
            for s in range(3):
                ct[1 + s, END_COL] = (np.exp(f[s, idx, self.la, self.lb] + lt[1 + s, END_COL] - self.logz) * wv).sum()
        return cm, cg, ct


def forward_batch(params: PairHmmParams, left: Sequence, right: Sequence) -> np.ndarray:
    """log P(a, b) for each pair, summing over all alignments."""
    left = [_segments(x) for x in left]
    right = [_segments(x) for x in right]
    if not left:
        return np.zeros(0)
    return _Batch(params, left, right).logz


def forward_logprob(params: PairHmmParams, a, b) -> float:
    return float(forward_batch(params, [a], [b])[0])


def viterbi_align(params: PairHmmParams, a, b, null: NullModelParams | None = None) -> PairwiseAlignment:
    """Most probable alignment path.

    Equal scores are resolved by preferring Match, then GapX, then GapY,
    both for the final state and for predecessors.
    """
    sa, sb = _segments(a), _segments(b)
    if not sa or not sb:
        raise DomainError("sequences must be nonempty")
    idx = params.alphabet.index
    try:
        xa = [idx[c] for c in sa]
        xb = [idx[c] for c in sb]
    except KeyError as exc:
        raise DomainError(f"symbol {exc.args[0]!r} not in alphabet") from None
    lm, lg, lt = params.log_match.tolist(), params.log_gap.tolist(), params.log_trans.tolist()
    n, m = len(sa), len(sb)
    neg = -math.inf
    v = [[[neg] * (m + 1) for _ in range(n + 1)] for _ in range(3)]
    ptr = [[[-1] * (m + 1) for _ in range(n + 1)] for _ in range(3)]

    def best(t, i, j):
        bs, bv = -1, neg
        for s in range(3):
            cand = v[s][i][j] + lt[1 + s][t]
            if cand > bv:
                bs, bv = s, cand
        return bs, bv

    for i in range(n + 1):
        for j in range(m + 1):
            if i and j:
                if i == 1 and j == 1:
                    s, prev = -1, 0.0 + lt[START_ROW][MATCH]
                else:
                    s, prev = best(MATCH, i - 1, j - 1)
                v[MATCH][i][j] = lm[xa[i - 1]][xb[j - 1]] + prev
                ptr[MATCH][i][j] = s
            if i:
                if i == 1 and j == 0:
                    s, prev = -1, 0.0 + lt[START_ROW][GAPX]
                else:
                    s, prev = best(GAPX, i - 1, j)
                v[GAPX][i][j] = lg[xa[i - 1]] + prev
                ptr[GAPX][i][j] = s
            if j:
                if i == 0 and j == 1:
                    s, prev = -1, 0.0 + lt[START_ROW][GAPY]
                else:
                    s, prev = best(GAPY, i, j - 1)
                v[GAPY][i][j] = lg[xb[j - 1]] + prev
                ptr[GAPY][i][j] = s
    state, score = best(END_COL, n, m)
    if state < 0:
        raise DomainError("no alignment path has nonzero probability")

    cols = []
    i, j = n, m
    while state >= 0:
        prev = ptr[state][i][j]
        if state == MATCH:
            cols.append((sa[i - 1], sb[j - 1]))
            i, j = i - 1, j - 1
        elif state == GAPX:
            cols.append((sa[i - 1], GAP))
            i -= 1
        else:
            cols.append((GAP, sb[j - 1]))
            j -= 1
        state = prev
    cols.reverse()
    lo = math.nan
    if null is not None:
        lo = forward_logprob(params, sa, sb) - null_logprob(null, sa, sb)
    return PairwiseAlignment(a, b, tuple(cols), score, lo)


def path_logprob(params: PairHmmParams, columns: Sequence[tuple[str, str]]) -> float:
    """Score a fixed alignment path, accumulating in the same order as Viterbi."""
    idx = params.alphabet.index
    lm, lg, lt = params.log_match.tolist(), params.log_gap.tolist(), params.log_trans.tolist()
    acc = 0.0
    prev_row = START_ROW
    for x, y in columns:
        if x != GAP and y != GAP:
            state, e = MATCH, lm[idx[x]][idx[y]]
        elif x != GAP:
            state, e = GAPX, lg[idx[x]]
        elif y != GAP:
            state, e = GAPY, lg[idx[y]]
        else:
            raise DomainError("gap-gap column")
        acc = e + (acc + lt[prev_row][state])
        prev_row = 1 + state
    return acc + lt[prev_row][END_COL]


# ---------------------------------------------------------------------------
# null model, log-odds, logistic head


def null_logprob(null: NullModelParams, a, b) -> float:
    sa, sb = _segments(a), _segments(b)
    if not sa or not sb:
        raise DomainError("sequences must be nonempty")
    idx = null.alphabet.index
    try:
        emit = sum(null.unigram[idx[c]] for c in sa) + sum(null.unigram[idx[c]] for c in sb)
    except KeyError as exc:
        raise DomainError(f"symbol {exc.args[0]!r} not in alphabet") from None
    eta = null.continue_prob
    return float(emit + (len(sa) + len(sb)) * math.log(eta) + 2 * math.log1p(-eta))


def null_batch(null: NullModelParams, left: Sequence, right: Sequence) -> np.ndarray:
    return np.array([null_logprob(null, a, b) for a, b in zip(left, right)])


def fit_null(sequences: Iterable[str], alphabet: Alphabet, pseudocount: float = 0.0) -> NullModelParams:
    """Closed-form maximum-likelihood unigram and geometric length model."""
    counts = np.full(len(alphabet), float(pseudocount))
    n_seq = 0
    n_tok = 0
    for s in sequences:
        s = _segments(s)
        n_seq += 1
        n_tok += len(s)
        for c in s:
            counts[alphabet.index[c]] += 1
    if n_seq == 0 or counts.sum() == 0:
        raise TrainingError("cannot fit null model on an empty corpus")
    with np.errstate(divide="ignore"):
        unigram = np.log(counts / counts.sum())
    mean_len = n_tok / n_seq
    return NullModelParams(alphabet, unigram, mean_len / (mean_len + 1.0))


def log_odds(params: PairHmmParams, null: NullModelParams, a, b) -> float:
    return forward_logprob(params, a, b) - null_logprob(null, a, b)


def log_odds_batch(params, null, left, right) -> np.ndarray:
    return forward_batch(params, left, right) - null_batch(null, left, right)


def classify(head: LogisticHead, lo):
    out = expit(head.weight * np.asarray(lo, dtype=float) + head.bias)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    null_pseudocount: float = 0.5
    init_diagonal: float = 2.0
    init_noise: float = 0.01


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    accuracy: float = math.nan

    def lines(self) -> list[str]:
        out = [f"{i}\t{loss!r}" for i, loss in enumerate(self.losses)]
        out.append(f"# final_accuracy\t{self.accuracy!r}")
        return out


@dataclass(frozen=True, eq=False)
class Model:
    params: PairHmmParams
    null: NullModelParams
    head: LogisticHead

    def log_odds(self, left, right) -> np.ndarray:
        return log_odds_batch(self.params, self.null, left, right)

    def probability(self, left, right) -> np.ndarray:
        return classify(self.head, self.log_odds(left, right))

    def equals(self, other: "Model") -> bool:
        return self.params.equals(other.params) and self.null.equals(other.null) and self.head == other.head


def _pack(params: PairHmmParams, head: LogisticHead) -> np.ndarray:
    return np.concatenate(
        [params.match_logits.ravel(), params.gap_logits, params.trans_logits.ravel(), [head.weight, head.bias]]
    )


def _unpack(vec: np.ndarray, alphabet: Alphabet) -> tuple[PairHmmParams, LogisticHead]:
    k = len(alphabet)
    a = k * k
    match = vec[:a].reshape(k, k).copy()
    gap = vec[a : a + k].copy()
    trans = vec[a + k : a + k + 16].reshape(4, 4).copy()
    return PairHmmParams(alphabet, match, gap, trans), LogisticHead(float(vec[-2]), float(vec[-1]))


def loss_and_grad(params: PairHmmParams, null: NullModelParams, head: LogisticHead, left, right, labels):
    """Mean binary cross-entropy of the batch and its gradient (packed order)."""
    left = [_segments(x) for x in left]
    right = [_segments(x) for x in right]
    y = np.asarray(labels, dtype=float)
    batch = _Batch(params, left, right)
    lo = batch.logz - null_batch(null, left, right)
    z = head.weight * lo + head.bias
    nb = len(y)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    resid = expit(z) - y
    d_lo = resid * head.weight / nb
    batch.backward()
    k = len(params.alphabet)
    cm, cg, ct = batch.expected_counts(d_lo, k)
    pm = np.exp(params.log_match)
    pg = np.exp(params.log_gap)
    pt = np.exp(params.log_trans)
    g_match = cm - cm.sum() * pm
    g_gap = cg - cg.sum() * pg
    g_trans = ct - ct.sum(axis=1, keepdims=True) * pt
    g_w = float(np.mean(resid * lo))
    g_b = float(np.mean(resid))
    grad = np.concatenate([g_match.ravel(), g_gap, g_trans.ravel(), [g_w, g_b]])
    return loss, grad, lo


def batch_loss(params, null, head, left, right, labels) -> float:
    y = np.asarray(labels, dtype=float)
    z = head.weight * log_odds_batch(params, null, left, right) + head.bias
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def train(
    pairs: Iterable[tuple],
    config: TrainConfig = TrainConfig(),
    alphabet: Alphabet | None = None,
    init: tuple[PairHmmParams, LogisticHead] | None = None,
) -> tuple[Model, TrainReport]:
    """Fit the pair-HMM and logistic head by minimising binary cross-entropy.

    ``pairs`` yields ``(a, b, label)``. The null model is fitted on every
    training token first and then frozen. Batches are taken in stream order
    for the first epoch and in a seeded permutation for later ones.
    """
    data = [(_segments(a), _segments(b), int(lab)) for a, b, lab in pairs]
    if not data:
        raise TrainingError("no training pairs")
    labels = {lab for _, _, lab in data}
    if labels != {0, 1}:
        raise TrainingError(f"training stream must contain both labels, got {sorted(labels)}")
    if config.batch_size < 1 or config.epochs < 0:
        raise ConfigError("batch_size must be >= 1 and epochs >= 0")
    if alphabet is None:
        alphabet = init[0].alphabet if init else None
    if alphabet is None:
        raise ConfigError("an alphabet or initial parameters are required")

    null = fit_null((s for a, b, _ in data for s in (a, b)), alphabet, config.null_pseudocount)
    if init is None:
        params = init_params(alphabet, config.seed, config.init_diagonal, config.init_noise)
        head = LogisticHead()
    else:
        params, head = init
    theta = _pack(params, head)
    mom = np.zeros_like(theta)
    vel = np.zeros_like(theta)
    rng = np.random.default_rng(config.seed)
    report = TrainReport()
    step = 0
    order = np.arange(len(data))
    for epoch in range(config.epochs):
        if epoch > 0:
            order = rng.permutation(len(data))
        for start in range(0, len(data), config.batch_size):
            chunk = [data[t] for t in order[start : start + config.batch_size]]
            left, right, ys = zip(*chunk)
            params, head = _unpack(theta, alphabet)
            loss, grad, _ = loss_and_grad(params, null, head, left, right, ys)
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise TrainingError(f"non-finite loss or gradient at batch {step}: loss={loss}")
            step += 1
            mom = config.beta1 * mom + (1 - config.beta1) * grad
            vel = config.beta2 * vel + (1 - config.beta2) * grad * grad
            mhat = mom / (1 - config.beta1**step)
            vhat = vel / (1 - config.beta2**step)
            theta = theta - config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)
            report.losses.append(loss)
    params, head = _unpack(theta, alphabet)
    model = Model(params, null, head)
    report.accuracy = accuracy(model, data)
    log.info("trained on %d pairs in %d steps, accuracy %.4f", len(data), step, report.accuracy)
    return model, report


def accuracy(model: Model, data: Sequence[tuple], chunk: int = 512) -> float:
    hits = 0
    for start in range(0, len(data), chunk):
        left, right, ys = zip(*data[start : start + chunk])
        p = np.atleast_1d(model.probability(left, right))
        hits += int(np.sum((p >= 0.5) == (np.asarray(ys) == 1)))
    return hits / len(data)


# ---------------------------------------------------------------------------
# persistence


def model_to_dict(model: Model) -> dict:
    p, nl, h = model.params, model.null, model.head
    return {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "alphabet": "".join(p.alphabet.symbols),
        "match_logits": p.match_logits.tolist(),
        "gap_logits": p.gap_logits.tolist(),
        "trans_logits": p.trans_logits.tolist(),
        "null_unigram": nl.unigram.tolist(),
        "null_continue": nl.continue_prob,
        "head_weight": h.weight,
        "head_bias": h.bias,
    }


def model_from_dict(d: dict) -> Model:
    if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model format {d.get('format')!r} version {d.get('version')!r}")
    alphabet = Alphabet(d["alphabet"])
    params = PairHmmParams(
        alphabet,
        np.array(d["match_logits"], dtype=float),
        np.array(d["gap_logits"], dtype=float),
        np.array(d["trans_logits"], dtype=float),
    )
    null = NullModelParams(alphabet, np.array(d["null_unigram"], dtype=float), float(d["null_continue"]))
    return Model(params, null, LogisticHead(float(d["head_weight"]), float(d["head_bias"])))


def save_model(model: Model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> Model:
    try:
        with open(path, encoding="utf-8") as fh:
            return model_from_dict(json.load(fh))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read model file {path}: {exc}") from exc


def with_head(model: Model, head: LogisticHead) -> Model:
    return replace(model, head=head)
