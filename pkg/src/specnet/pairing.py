"""Cross-domain pair mining and negative selection.

The target domain carries no labels during training, so supervision is
manufactured here: positive pairs are mutual nearest neighbors between
the frozen source and target embeddings under the frequency kernel, and
negative pools hold batch members of the opposite label, where targets
contribute their classifier pseudo-label only above a confidence
threshold. Every choice is deterministic given the embeddings.

Anchors and pools are addressed by keys: ("s", i) for the i-th source
train graph, ("t", j) for the j-th target train graph.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .losses import frequency_gram
from .model import ModelConfig, classify, wrap_params

__all__ = [
    "PairingPlan",
    "CONFIDENCE_THRESHOLD",
    "pseudo_label",
    "mine_positive_pairs",
    "select_negatives",
    "build_pairing_plan",
    "dump_pairing_plan",
]

CONFIDENCE_THRESHOLD = 0.8


@dataclass(frozen=True, eq=False)
class PairingPlan:
    """One epoch's supervision structure.

    positives pairs source index i with target index j (mutual nearest
    neighbors). negatives_for maps each pair anchor key to its pool-level
    negative candidates; at step time the trainer intersects a candidate
    list with the current batch. pseudo_labels/confidences cover the
    target train graphs in order.
    """

    positives: tuple
    pseudo_labels: np.ndarray
    confidences: np.ndarray
    negatives_for: dict

    def partner_of(self) -> dict:
        return {("s", i): ("t", j) for i, j in self.positives}


def pseudo_label(target_embeds, params: dict, cfg: ModelConfig):
    """Classifier-assigned labels for unlabeled target embeddings.

    Returns (labels, confidences): the argmax of the softmax logits (ties
    resolve to the lower label) and the winning probability.
    """
    target_embeds = list(target_embeds)
    if not target_embeds:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    wrapped = wrap_params(params)
    logits = np.stack([classify(wrapped, cfg, e).data for e in target_embeds])
    m = logits.max(axis=1, keepdims=True)
    z = np.exp(logits - m)
    probs = z / z.sum(axis=1, keepdims=True)
    labels = np.argmax(probs, axis=1).astype(np.int64)
    confidences = probs[np.arange(len(target_embeds)), labels]
    return labels, confidences


def mine_positive_pairs(source_embeds, target_embeds):
    """Mutual-nearest-neighbor pairs under the frequency kernel.

    Source i pairs with its most similar target j iff i is also j's most
    similar source; argmax ties break toward the lower index. Output is
    sorted by source index. May be empty (no mutual agreement).
    """
    source_embeds = list(source_embeds)
    target_embeds = list(target_embeds)
    if not source_embeds or not target_embeds:
        raise ContractViolation("pair mining needs non-empty embedding lists")
    K = frequency_gram(source_embeds, target_embeds)
    best_target = np.argmax(K, axis=1)
    best_source = np.argmax(K, axis=0)
    pairs = []
    for i, j in enumerate(best_target):
        if best_source[j] == i:
            pairs.append((int(i), int(j)))
    return pairs


def select_negatives(anchor, members, labels: dict, confidences: dict,
                     threshold: float = CONFIDENCE_THRESHOLD, exclude=()):
    """Negative keys for one anchor out of a member pool.

    labels maps key -> {0,1}; confidences maps key -> [0,1] (source keys
    carry 1.0, their labels are ground truth). A member qualifies when its
    label differs from the anchor's and its confidence clears the
    threshold. Fallback when nothing qualifies: every member except the
    anchor and the excluded keys.
    """
    banned = {anchor, *exclude}
    anchor_label = labels[anchor]
    out = [
        m for m in members
        if m not in banned
        and confidences[m] >= threshold
        and labels[m] != anchor_label
    ]
    if not out:
        out = [m for m in members if m not in banned]
    return out


def build_pairing_plan(source_embeds, source_labels, target_embeds,
                       params: dict, cfg: ModelConfig,
                       threshold: float = CONFIDENCE_THRESHOLD) -> PairingPlan:
    """Mine pairs and per-anchor negative candidates over the epoch pool.

    The pool is all source train graphs plus all target train graphs; the
    negative candidates of both anchors of a pair exclude the pair itself.
    """
    plabels, confs = pseudo_label(target_embeds, params, cfg)
    positives = mine_positive_pairs(source_embeds, target_embeds)

    members = [("s", i) for i in range(len(source_embeds))]
    members += [("t", j) for j in range(len(target_embeds))]
    labels = {("s", i): int(source_labels[i]) for i in range(len(source_embeds))}
    labels.update({("t", j): int(plabels[j]) for j in range(len(target_embeds))})
    confidences = {("s", i): 1.0 for i in range(len(source_embeds))}
    confidences.update({("t", j): float(confs[j]) for j in range(len(target_embeds))})

    negatives_for = {}
    for i, j in positives:
        s_key, t_key = ("s", i), ("t", j)
        negatives_for[s_key] = tuple(select_negatives(
            s_key, members, labels, confidences, threshold, exclude=(t_key,)))
        negatives_for[t_key] = tuple(select_negatives(
            t_key, members, labels, confidences, threshold, exclude=(s_key,)))
    return PairingPlan(
        positives=tuple(positives),
        pseudo_labels=plabels,
        confidences=confs,
        negatives_for=negatives_for,
    )


def dump_pairing_plan(plan: PairingPlan, path: str) -> None:
    """Debug CSV: one row per positive pair with its candidate counts."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "source_index", "target_index", "target_pseudo_label",
            "target_confidence", "source_anchor_candidates",
            "target_anchor_candidates",
        ])
        for i, j in plan.positives:
            writer.writerow([
                i, j, int(plan.pseudo_labels[j]),
                repr(float(plan.confidences[j])),
                len(plan.negatives_for[("s", i)]),
                len(plan.negatives_for[("t", j)]),
            ])
