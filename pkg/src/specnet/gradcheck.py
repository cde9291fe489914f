"""Central finite-difference verification of the reverse-mode gradients.

Every loss the trainer can compose is rebuilt here on a small random
model and batch, differentiated twice: once by the tape, once by central
differences on individual parameter coordinates. The comparison metric
|a - b| / max(|a|, |b|, 1e-3) folds the absolute tolerance for
near-zero gradients into a single relative threshold.

Dropout masks are drawn once per case and replayed on every forward
evaluation, so the perturbed losses stay differentiable functions of the
parameters alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .datasets import derive_seed
from .errors import ContractViolation
from .losses import ContrastiveBatch, cross_entropy, fmmd_loss, smmi_loss
from .model import ModelConfig, classify, dual_encode_features, init_params, wrap_params
from .spectral import graph_band_features
from .synth import make_synthetic_graphs

__all__ = [
    "LOSS_TYPES",
    "GradCheckCase",
    "make_case",
    "analytic_gradients",
    "numeric_gradient",
    "relative_error",
    "check_case",
    "gradcheck_report",
]

LOSS_TYPES = ("ce", "smmi", "fmmd_paper", "fmmd_repulsive", "combined")

FD_STEP = 1e-5
GRAD_TOL = 1e-5


@dataclass(frozen=True)
class GradCheckCase:
    """A frozen forward problem: model shape, parameters, band features,
    dropout masks, and the batch roles each graph plays."""

    cfg: ModelConfig
    params: dict
    features: tuple
    masks: tuple
    source_ids: tuple
    source_labels: tuple
    target_ids: tuple
    tau: float
    gamma1: float
    gamma2: float


def make_case(seed: int, graph_count: int = 6, hidden_dim: int = 8,
              embed_dim: int = 8, layers: int = 2, dropout: float = 0.3,
              rho: float = 0.5) -> GradCheckCase:
    if graph_count < 4:
        raise ContractViolation("a gradient-check case needs at least 4 graphs")
    graphs = make_synthetic_graphs(graph_count, derive_seed(seed, "graphs"))
    vocab = 1 + max(l for g in graphs for l in g.node_labels)
    cfg = ModelConfig(
        feature_dim=vocab,
        hidden_dim=hidden_dim,
        embed_dim=embed_dim,
        layers=layers,
        classes=2,
        dropout=dropout,
    )
    params = init_params(cfg, derive_seed(seed, "params"))
    features = tuple(graph_band_features(g, rho, vocab) for g in graphs)
    mask_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "masks")))
    masks = []
    for feats in features:
        n = feats.adjacency.shape[0]
        masks.append({
            stream: [
                (mask_rng.random((n, hidden_dim)) >= dropout).astype(np.float64)
                for _ in range(layers)
            ]
            for stream in ("low", "high")
        })
    half = graph_count // 2
    source_ids = tuple(range(half))
    target_ids = tuple(range(half, graph_count))
    return GradCheckCase(
        cfg=cfg,
        params=params,
        features=features,
        masks=tuple(masks),
        source_ids=source_ids,
        source_labels=tuple(graphs[i].class_label for i in source_ids),
        target_ids=target_ids,
        tau=0.1,
        gamma1=0.5,
        gamma2=0.5,
    )


def analytic_gradients(case: GradCheckCase, loss_name: str):
    """Tape gradients per parameter name, plus the loss value."""
    tape = ad.Tape()
    wrapped = wrap_params(case.params, tape)
    embs = {
        i: dual_encode_features(wrapped, case.cfg, case.features[i],
                                case.masks[i])
        for i in (*case.source_ids, *case.target_ids)
    }
    loss = _compose(case, loss_name, wrapped, embs)
    grads = tape.backward(loss)
    named = {}
    for name in case.params:
        g = grads.get(wrapped[name].node_id)
        named[name] = np.zeros_like(case.params[name]) if g is None else g
    return named, float(loss.data)


def _compose(case, loss_name, wrapped, embs):
    def ce_term():
        logits = ad.stack_rows([classify(wrapped, case.cfg, embs[i])
                                for i in case.source_ids])
        return cross_entropy(logits, list(case.source_labels))

    def smmi_term():
        pairs = tuple(zip(case.source_ids[:2], case.target_ids[:2]))
        paired = {i for pair in pairs for i in pair}
        rest = [embs[i] for i in embs if i not in paired]
        if not rest:
            rest = [embs[case.target_ids[-1]]]
        batch = ContrastiveBatch(
            positives=tuple((embs[s], embs[t]) for s, t in pairs),
            negatives=tuple(rest),
            tau=case.tau,
        )
        return smmi_loss(batch)

    def fmmd_term(sign):
        S = [embs[i] for i in case.source_ids[:2]]
        T = [embs[i] for i in case.target_ids[:2]]
        N = [embs[case.source_ids[-1]], embs[case.target_ids[-1]]]
        return fmmd_loss(S, T, N, sign)

    if loss_name == "ce":
        return ce_term()
    if loss_name == "smmi":
        return smmi_term()
    if loss_name == "fmmd_paper":
        return fmmd_term("paper")
    if loss_name == "fmmd_repulsive":
        return fmmd_term("repulsive")
    if loss_name == "combined":
        total = ce_term()
        total = ad.add(total, ad.scale(smmi_term(), case.gamma1))
        total = ad.add(total, ad.scale(fmmd_term("repulsive"), case.gamma2))
        return total
    raise ContractViolation(f"unknown loss type {loss_name!r}")


def loss_value(case: GradCheckCase, loss_name: str) -> float:
    """Loss on the current parameters, no tape."""
    wrapped = wrap_params(case.params)
    embs = {
        i: dual_encode_features(wrapped, case.cfg, case.features[i],
                                case.masks[i])
        for i in (*case.source_ids, *case.target_ids)
    }
    return float(_compose(case, loss_name, wrapped, embs).data)


def numeric_gradient(case: GradCheckCase, loss_name: str, name: str,
                     flat_index: int, step: float = FD_STEP) -> float:
    arr = case.params[name]
    orig = arr.flat[flat_index]
    arr.flat[flat_index] = orig + step
    f_plus = loss_value(case, loss_name)
    arr.flat[flat_index] = orig - step
    f_minus = loss_value(case, loss_name)
    arr.flat[flat_index] = orig
    return (f_plus - f_minus) / (2.0 * step)


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-3)


def check_case(case: GradCheckCase, loss_name: str,
               sample_per_tensor: int | None = 3, seed: int = 0,
               step: float = FD_STEP):
    """Compare tape against finite differences on one case.

    sample_per_tensor picks that many coordinates from every parameter
    tensor (None checks all of them). Returns (max error, coordinate
    count).
    """
    named, _ = analytic_gradients(case, loss_name)
    rng = np.random.Generator(np.random.PCG64(
        derive_seed(seed, "coords", loss_name)))
    worst = 0.0
    checked = 0
    for name in sorted(case.params):
        size = case.params[name].size
        if sample_per_tensor is None or sample_per_tensor >= size:
            coords = range(size)
        else:
            coords = sorted(
                int(c) for c in
                rng.choice(size, size=sample_per_tensor, replace=False))
        flat = named[name].reshape(-1)
        for idx in coords:
            fd = numeric_gradient(case, loss_name, name, idx, step)
            worst = max(worst, relative_error(float(flat[idx]), fd))
            checked += 1
    return worst, checked


def gradcheck_report(seed: int = 0, batches: int = 20,
                     sample_per_tensor: int = 3,
                     step: float = FD_STEP) -> dict:
    """Run every loss type over many random cases; JSON-ready summary."""
    if batches < 1:
        raise ContractViolation("need at least one batch")
    per_batch = []
    per_loss_max = {name: 0.0 for name in LOSS_TYPES}
    coords_total = 0
    for b in range(batches):
        case_seed = derive_seed(seed, "case", b)
        case = make_case(case_seed)
        errors = {}
        for loss_name in LOSS_TYPES:
            worst, checked = check_case(case, loss_name, sample_per_tensor,
                                        seed=case_seed, step=step)
            errors[loss_name] = worst
            per_loss_max[loss_name] = max(per_loss_max[loss_name], worst)
            coords_total += checked
        per_batch.append({"batch": b, "case_seed": case_seed,
                          "errors": errors})
    overall = max(per_loss_max.values())
    return {
        "seed": seed,
        "batches": batches,
        "step": step,
        "threshold": GRAD_TOL,
        "loss_types": list(LOSS_TYPES),
        "coordinates_checked": coords_total,
        "per_loss_max": per_loss_max,
        "per_batch": per_batch,
        "max_relative_error": overall,
        "all_ok": overall <= GRAD_TOL,
    }
