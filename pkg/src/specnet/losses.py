"""Training objectives over dual-frequency graph embeddings.

The central object is the frequency kernel

    k(x, y) = z_{x,l} . z_{y,l} + z_{x,g} . z_{y,g}

the sum of per-band cosines of two embeddings with unit-norm components,
bounded by 2 in absolute value. On top of it sit an MMD estimator pair
(biased/unbiased) for reporting, a contrastive objective over mined
cross-domain pairs, a class-repulsion term averaging the kernel between
anchors and opposite-class samples, and the usual cross entropy. The
differentiable losses are built from autodiff primitives; reporting
quantities are plain numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .datasets import derive_seed
from .errors import ContractViolation
from .model import LAMBDA_DEFAULT, DualEmbedding

__all__ = [
    "ContrastiveBatch",
    "LossWeights",
    "frequency_kernel",
    "frequency_kernel_value",
    "frequency_gram",
    "weighted_concat",
    "gaussian_kernel",
    "mmd2",
    "smmi_loss",
    "smmi_decomposed",
    "fmmd_loss",
    "cross_entropy",
    "total_loss",
    "kernel_property_audit",
]

FMMD_SIGNS = ("repulsive", "paper")
SMMI_VARIANTS = ("corrected", "verbatim")


@dataclass(frozen=True)
class ContrastiveBatch:
    """One contrastive unit: positive cross-domain pairs pulled together
    against a shared negative pool."""

    positives: tuple
    negatives: tuple
    tau: float
    lambda_low: float = LAMBDA_DEFAULT
    lambda_high: float = LAMBDA_DEFAULT

    def __post_init__(self):
        if len(self.positives) < 1:
            raise ContractViolation("contrastive batch needs at least one pair")
        if len(self.negatives) < 1:
            raise ContractViolation("contrastive batch needs at least one negative")
        if not self.tau > 0.0:
            raise ContractViolation(f"temperature must be positive, got {self.tau}")
        if self.lambda_low < 0.0 or self.lambda_high < 0.0:
            raise ContractViolation("stream weights must be non-negative")


@dataclass(frozen=True)
class LossWeights:
    """Mixing weights of the combined objective, plus the sign convention
    of the class-repulsion term."""

    gamma1: float
    gamma2: float
    fmmd_sign: str = "repulsive"

    def __post_init__(self):
        if self.gamma1 < 0.0 or self.gamma2 < 0.0:
            raise ContractViolation("loss weights must be non-negative")
        if self.fmmd_sign not in FMMD_SIGNS:
            raise ContractViolation(
                f"fmmd_sign must be one of {FMMD_SIGNS}, got {self.fmmd_sign!r}"
            )


def _component_data(e: DualEmbedding) -> tuple[np.ndarray, np.ndarray]:
    low = e.low.data if isinstance(e.low, ad.Tensor) else np.asarray(e.low, dtype=np.float64)
    high = e.high.data if isinstance(e.high, ad.Tensor) else np.asarray(e.high, dtype=np.float64)
    return low, high


def _check_nonzero(e: DualEmbedding) -> None:
    low, high = _component_data(e)
    if float(low @ low) < 1e-24 or float(high @ high) < 1e-24:
        raise ContractViolation("embedding has a zero-norm component")


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def frequency_kernel(x: DualEmbedding, y: DualEmbedding) -> ad.Tensor:
    """Sum of per-band inner products; with unit-norm components this is
    the sum of the two band cosines, so |k| <= 2."""
    _check_nonzero(x)
    _check_nonzero(y)
    return ad.add(ad.dot(x.low, y.low), ad.dot(x.high, y.high))


def frequency_kernel_value(x: DualEmbedding, y: DualEmbedding) -> float:
    """Plain-number variant of frequency_kernel for reporting paths."""
    xl, xg = _component_data(x)
    yl, yg = _component_data(y)
    return float(xl @ yl + xg @ yg)


def _stack(embeddings) -> tuple[np.ndarray, np.ndarray]:
    lows, highs = [], []
    for e in embeddings:
        low, high = _component_data(e)
        lows.append(low)
        highs.append(high)
    return np.stack(lows), np.stack(highs)


def frequency_gram(xs, ys) -> np.ndarray:
    """Kernel matrix K[i, j] = k(xs[i], ys[j]) in one shot."""
    Xl, Xg = _stack(xs)
    Yl, Yg = _stack(ys)
    return Xl @ Yl.T + Xg @ Yg.T


def weighted_concat(e: DualEmbedding, lambda_low: float = LAMBDA_DEFAULT,
                    lambda_high: float = LAMBDA_DEFAULT) -> np.ndarray:
    """The flat vector (lambda_l * z_low ; lambda_g * z_high)."""
    low, high = _component_data(e)
    return np.concatenate([lambda_low * low, lambda_high * high])


def gaussian_kernel(x: DualEmbedding, y: DualEmbedding, sigma: float,
                    lambda_low: float = LAMBDA_DEFAULT,
                    lambda_high: float = LAMBDA_DEFAULT) -> float:
    """Baseline RBF kernel exp(-||x - y||^2 / (2 sigma^2)) on the weighted
    concatenated embeddings."""
    if not sigma > 0.0:
        raise ContractViolation(f"bandwidth must be positive, got {sigma}")
    d = weighted_concat(x, lambda_low, lambda_high) - weighted_concat(
        y, lambda_low, lambda_high)
    return float(math.exp(-float(d @ d) / (2.0 * sigma * sigma)))


# ---------------------------------------------------------------------------
# MMD estimators (reporting)
# ---------------------------------------------------------------------------


def _sorted_mean(values: np.ndarray) -> float:
    """Mean over a value multiset, summation order fixed by sorting.

    Makes mmd2 exactly symmetric in its arguments and makes the biased
    X = X estimate collapse to exactly 0.0 (all three means become the
    same float).
    """
    flat = np.sort(values, axis=None)
    return float(flat.sum() / flat.size)


def mmd2(X, Y, kernel: str = "frequency", estimator: str = "unbiased",
         sigma: float = 1.0, lambda_low: float = LAMBDA_DEFAULT,
         lambda_high: float = LAMBDA_DEFAULT) -> float:
    """Squared maximum mean discrepancy between two embedding samples.

    kernel is 'frequency', 'gaussian', or any callable k(x, y) -> float.
    The biased V-statistic keeps the diagonal of the within-set means and
    needs one point per side; the unbiased U-statistic drops it and needs
    two. Reporting-only: no gradients flow through this.
    """
    X = list(X)
    Y = list(Y)
    if estimator not in ("biased", "unbiased"):
        raise ContractViolation(f"unknown estimator {estimator!r}")
    minimum = 1 if estimator == "biased" else 2
    if len(X) < minimum or len(Y) < minimum:
        raise ContractViolation(
            f"{estimator} estimator needs at least {minimum} samples per side"
        )

    if kernel == "frequency":
        def gram(A, B):
            return frequency_gram(A, B)
    elif kernel == "gaussian":
        def gram(A, B):
            Wa = np.stack([weighted_concat(e, lambda_low, lambda_high) for e in A])
            Wb = np.stack([weighted_concat(e, lambda_low, lambda_high) for e in B])
            sq = (
                np.sum(Wa**2, axis=1)[:, None]
                + np.sum(Wb**2, axis=1)[None, :]
                - 2.0 * (Wa @ Wb.T)
            )
            return np.exp(-np.maximum(sq, 0.0) / (2.0 * sigma * sigma))
    elif callable(kernel):
        def gram(A, B):
            return np.array([[float(kernel(a, b)) for b in B] for a in A])
    else:
        raise ContractViolation(f"unknown kernel {kernel!r}")

    Kxx = gram(X, X)
    Kyy = gram(Y, Y)
    Kxy = gram(X, Y)
    if estimator == "biased":
        return _sorted_mean(Kxx) + _sorted_mean(Kyy) - 2.0 * _sorted_mean(Kxy)
    n, m = len(X), len(Y)
    off_x = Kxx[~np.eye(n, dtype=bool)]
    off_y = Kyy[~np.eye(m, dtype=bool)]
    return _sorted_mean(off_x) + _sorted_mean(off_y) - 2.0 * _sorted_mean(Kxy)


# ---------------------------------------------------------------------------
# Contrastive objective
# ---------------------------------------------------------------------------


def _pair_similarity(a: DualEmbedding, b: DualEmbedding, ll2: float, lg2: float) -> ad.Tensor:
    return ad.add(
        ad.scale(ad.dot(a.low, b.low), ll2),
        ad.scale(ad.dot(a.high, b.high), lg2),
    )


def _negative_similarities(anchor: DualEmbedding, neg_low: ad.Tensor,
                           neg_high: ad.Tensor, ll2: float, lg2: float) -> ad.Tensor:
    return ad.add(
        ad.scale(ad.matmul(neg_low, anchor.low), ll2),
        ad.scale(ad.matmul(neg_high, anchor.high), lg2),
    )


def smmi_loss(batch: ContrastiveBatch, variant: str = "corrected") -> ad.Tensor:
    """Contrastive loss over positive cross-domain pairs.

    Per pair (s, t): the positive similarity over temperature, minus the
    log of a sum of exponentiated negative similarities, negated; the
    batch value is the mean over pairs. Similarities are inner products of
    the weighted concatenations, so sim(i, j) = ll^2 cos_l + lg^2 cos_g
    exactly. The log term sums exp(sim(s, n)/tau) plus, under 'corrected',
    exp(sim(t, n)/tau) over the same negatives; 'verbatim' instead adds
    the single term exp(sim(t, t)/tau), a constant in the negatives.
    Stabilized via logsumexp.
    """
    if variant not in SMMI_VARIANTS:
        raise ContractViolation(f"unknown smmi variant {variant!r}")
    ll2 = batch.lambda_low**2
    lg2 = batch.lambda_high**2
    inv_tau = 1.0 / batch.tau
    for e in batch.negatives:
        _check_nonzero(e)
    neg_low = ad.stack_rows([e.low for e in batch.negatives])
    neg_high = ad.stack_rows([e.high for e in batch.negatives])

    total = None
    for s, t in batch.positives:
        _check_nonzero(s)
        _check_nonzero(t)
        pos = _pair_similarity(s, t, ll2, lg2)
        sims_s = _negative_similarities(s, neg_low, neg_high, ll2, lg2)
        if variant == "corrected":
            second = ad.scale(_negative_similarities(t, neg_low, neg_high, ll2, lg2),
                              inv_tau)
        else:
            second = ad.reshape(ad.scale(_pair_similarity(t, t, ll2, lg2), inv_tau),
                                (1,))
        logits = ad.concat([ad.scale(sims_s, inv_tau), second])
        pair_loss = ad.add(ad.logsumexp(logits), ad.neg(ad.scale(pos, inv_tau)))
        total = pair_loss if total is None else ad.add(total, pair_loss)
    return ad.scale(total, 1.0 / len(batch.positives))


def smmi_decomposed(batch: ContrastiveBatch) -> float:
    """Per-band surrogate of the contrastive loss (reporting only).

    For each band: the mean positive cosine minus half the mean of the
    two anchor-negative cosines, scaled by -(lambda^2 / tau); the two band
    terms add. Attraction and repulsion cancel when all cosines are equal.
    """
    ll2 = batch.lambda_low**2
    lg2 = batch.lambda_high**2
    Sl, Sg = _stack([p[0] for p in batch.positives])
    Tl, Tg = _stack([p[1] for p in batch.positives])
    Nl, Ng = _stack(batch.negatives)

    pos_low = float(np.mean(np.sum(Sl * Tl, axis=1)))
    pos_high = float(np.mean(np.sum(Sg * Tg, axis=1)))
    rep_low = 0.5 * float(np.mean(Sl @ Nl.T) + np.mean(Tl @ Nl.T))
    rep_high = 0.5 * float(np.mean(Sg @ Ng.T) + np.mean(Tg @ Ng.T))
    return (
        -(ll2 / batch.tau) * (pos_low - rep_low)
        - (lg2 / batch.tau) * (pos_high - rep_high)
    )


# ---------------------------------------------------------------------------
# Class-repulsion term
# ---------------------------------------------------------------------------


def _mean_kernel(a_low, a_high, b_low, b_high, count_a: int, count_b: int) -> ad.Tensor:
    K = ad.add(
        ad.matmul(a_low, ad.transpose(b_low)),
        ad.matmul(a_high, ad.transpose(b_high)),
    )
    return ad.scale(ad.row_sum(ad.row_sum(K)), 1.0 / (count_a * count_b))


def fmmd_loss(source_embeds, target_embeds, negative_embeds,
              sign: str = "repulsive") -> ad.Tensor:
    """Mean frequency-kernel similarity between anchors and negatives.

    B = mean over (source, negative) pairs of k + mean over (target,
    negative) pairs of k. sign='repulsive' returns +B, so minimizing
    pushes opposite-class samples away from both domains; sign='paper'
    returns -B, rewarding proximity to the negatives instead.
    """
    if sign not in FMMD_SIGNS:
        raise ContractViolation(f"fmmd sign must be one of {FMMD_SIGNS}, got {sign!r}")
    source_embeds = tuple(source_embeds)
    target_embeds = tuple(target_embeds)
    negative_embeds = tuple(negative_embeds)
    if not source_embeds or not target_embeds or not negative_embeds:
        raise ContractViolation("fmmd_loss needs non-empty source/target/negative sets")
    for e in (*source_embeds, *target_embeds, *negative_embeds):
        _check_nonzero(e)
    Sl = ad.stack_rows([e.low for e in source_embeds])
    Sg = ad.stack_rows([e.high for e in source_embeds])
    Tl = ad.stack_rows([e.low for e in target_embeds])
    Tg = ad.stack_rows([e.high for e in target_embeds])
    Nl = ad.stack_rows([e.low for e in negative_embeds])
    Ng = ad.stack_rows([e.high for e in negative_embeds])
    base = ad.add(
        _mean_kernel(Sl, Sg, Nl, Ng, len(source_embeds), len(negative_embeds)),
        _mean_kernel(Tl, Tg, Nl, Ng, len(target_embeds), len(negative_embeds)),
    )
    return base if sign == "repulsive" else ad.neg(base)


# ---------------------------------------------------------------------------
# Cross entropy and combination
# ---------------------------------------------------------------------------


def cross_entropy(logits: ad.Tensor, labels) -> ad.Tensor:
    """Mean softmax cross entropy of (batch, classes) logits."""
    return ad.softmax_cross_entropy(logits, np.asarray(labels, dtype=np.int64))


def total_loss(ce: ad.Tensor, smmi: ad.Tensor, fmmd: ad.Tensor,
               weights: LossWeights) -> ad.Tensor:
    """ce + gamma1 * smmi + gamma2 * fmmd."""
    return ad.add(
        ce,
        ad.add(ad.scale(smmi, weights.gamma1), ad.scale(fmmd, weights.gamma2)),
    )


# ---------------------------------------------------------------------------
# Kernel property audit
# ---------------------------------------------------------------------------


def kernel_property_audit(sample_count: int, seed: int, dim: int = 64) -> dict:
    """Empirical check of the frequency kernel's analytic properties.

    Draws pairs of embeddings with uniform unit-sphere components and
    reports: (a) the maximum |k| against the bound 2; (b) the maximum
    observed Lipschitz ratio |k(x,y) - k(x',y')| / (||x-x'|| + ||y-y'||),
    whose supremum on unit-norm inputs is sqrt(2) and must stay under
    2 + 1e-6; (c) the spread of disjoint batch means of k around each
    other, which estimates the stability of the distribution constant the
    kernel expectation defines, bounded by 3/sqrt(batch size). Returns a
    JSON-ready dict.
    """
    if sample_count < 1000:
        raise ContractViolation("audit needs at least 1000 samples")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "kernel-audit")))

    def unit_rows(n):
        M = rng.standard_normal((n, dim))
        return M / np.sqrt(np.sum(M**2, axis=1, keepdims=True))

    Xl, Xg = unit_rows(sample_count), unit_rows(sample_count)
    Yl, Yg = unit_rows(sample_count), unit_rows(sample_count)
    k_values = np.sum(Xl * Yl, axis=1) + np.sum(Xg * Yg, axis=1)
    max_abs = float(np.abs(k_values).max())

    # second draw for the Lipschitz ratio
    Xl2, Xg2 = unit_rows(sample_count), unit_rows(sample_count)
    Yl2, Yg2 = unit_rows(sample_count), unit_rows(sample_count)
    k2 = np.sum(Xl2 * Yl2, axis=1) + np.sum(Xg2 * Yg2, axis=1)
    dx = np.sqrt(np.sum((Xl - Xl2) ** 2, axis=1) + np.sum((Xg - Xg2) ** 2, axis=1))
    dy = np.sqrt(np.sum((Yl - Yl2) ** 2, axis=1) + np.sum((Yg - Yg2) ** 2, axis=1))
    denom = dx + dy
    keep = denom > 1e-9
    ratios = np.abs(k_values[keep] - k2[keep]) / denom[keep]
    max_ratio = float(ratios.max()) if ratios.size else 0.0

    batch_count = 10
    batch_size = sample_count // batch_count
    means = [
        float(np.mean(k_values[b * batch_size:(b + 1) * batch_size]))
        for b in range(batch_count)
    ]
    spread = float(max(means) - min(means))
    concentration_bound = 3.0 / math.sqrt(batch_size)

    return {
        "sample_count": int(sample_count),
        "seed": int(seed),
        "dim": int(dim),
        "max_abs_kernel": max_abs,
        "kernel_bound": 2.0,
        "bounded_ok": bool(max_abs <= 2.0),
        "max_lipschitz_ratio": max_ratio,
        "lipschitz_bound": 2.0 + 1e-6,
        "lipschitz_ok": bool(max_ratio <= 2.0 + 1e-6),
        "mean_kernel_value": float(np.mean(k_values)),
        "batch_count": int(batch_count),
        "batch_size": int(batch_size),
        "max_batch_mean_gap": spread,
        "concentration_bound": concentration_bound,
        "concentration_ok": bool(spread <= concentration_bound),
        "all_ok": bool(
            max_abs <= 2.0
            and max_ratio <= 2.0 + 1e-6
            and spread <= concentration_bound
        ),
    }
