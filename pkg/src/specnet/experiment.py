"""Training loop, evaluation, transfer matrices, ablations, and sweeps.

A run is a pure function of (config, dataset bytes): all randomness flows
from sha256-derived child seeds, batches are rebuilt identically on
repeat, and result CSVs contain no wall-clock data, so repeating a
command yields byte-identical files. Wall-clock timing lives only in the
JSON manifest.

Each epoch: freeze the parameters, embed every train graph in eval mode,
rebuild the pairing plan, then walk shuffled source chunks; each chunk is
joined by its mined target partners plus random target fill to an equal
count. Per step the objective is cross entropy on the batch's source
graphs, plus the contrastive term over mined pairs whose partner landed
in the batch, plus the class-repulsion term per class, weighted by
gamma1/gamma2.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import autodiff as ad
from .datasets import (
    DomainSplit,
    GraphDataset,
    dataset_hash,
    derive_seed,
    parse_tudataset,
    split_domains,
)
from .errors import ContractViolation, NumericalError
from .graphs import structural_profile
from .losses import (
    FMMD_SIGNS,
    SMMI_VARIANTS,
    ContrastiveBatch,
    cross_entropy,
    fmmd_loss,
    smmi_loss,
)
from .model import (
    LAMBDA_DEFAULT,
    ModelConfig,
    classify,
    dual_encode_features,
    init_params,
    load_params,
    save_params,
    wrap_params,
)
from .pairing import build_pairing_plan
from .spectral import domain_energy_profile, graph_band_features

__all__ = [
    "ExperimentConfig",
    "SeedResult",
    "RunResult",
    "config_hash",
    "prepare_features",
    "train_single_seed",
    "train_run",
    "evaluate",
    "evaluate_checkpoint",
    "MATRIX_TASKS",
    "run_transfer_matrix",
    "ablate",
    "sweep",
    "emit_analysis",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run. Hash this, get the run."""

    dataset: str
    data_root: str = ""
    statistic: str = "edge_density"
    k: int = 4
    source: int = 0
    target: int = 1
    layers: int = 3
    hidden_dim: int = 64
    embed_dim: int = 64
    dropout: float = 0.3
    lr: float = 0.001
    epochs: int = 200
    batch_size: int = 32
    tau: float = 0.1
    gamma1: float = 0.5
    gamma2: float = 0.5
    lambda_low: float = LAMBDA_DEFAULT
    lambda_high: float = LAMBDA_DEFAULT
    rho: float = 0.5
    fmmd_sign: str = "repulsive"
    smmi_variant: str = "corrected"
    seeds: tuple = (0, 1, 2, 3, 4)
    use_smmi: bool = True
    use_fmmd: bool = True
    share_streams: bool = False
    confidence_threshold: float = 0.8
    split_seed: int = 0
    train_fraction: float = 0.8
    desk_scale: bool = False
    desk_graphs: int = 300
    desk_epochs: int = 50

    def __post_init__(self):
        if self.source == self.target:
            raise ContractViolation("source and target domains must differ")
        if not (0 <= self.source < self.k and 0 <= self.target < self.k):
            raise ContractViolation("domain index out of range")
        if self.batch_size < 2 or self.batch_size % 2 != 0:
            raise ContractViolation("batch size must be an even number >= 2")
        if self.epochs < 1 or self.desk_epochs < 1:
            raise ContractViolation("epoch counts must be positive")
        if not self.tau > 0.0:
            raise ContractViolation("temperature must be positive")
        if self.gamma1 < 0.0 or self.gamma2 < 0.0:
            raise ContractViolation("loss weights must be non-negative")
        if self.fmmd_sign not in FMMD_SIGNS:
            raise ContractViolation(f"bad fmmd_sign {self.fmmd_sign!r}")
        if self.smmi_variant not in SMMI_VARIANTS:
            raise ContractViolation(f"bad smmi_variant {self.smmi_variant!r}")
        if not self.seeds:
            raise ContractViolation("need at least one seed")
        if not (0.0 < self.train_fraction < 1.0):
            raise ContractViolation("train fraction must lie in (0, 1)")
        if self.desk_graphs < 4:
            raise ContractViolation("desk-scale domains need at least 4 graphs")

    @property
    def effective_epochs(self) -> int:
        return self.desk_epochs if self.desk_scale else self.epochs

    def model_config(self, feature_dim: int) -> ModelConfig:
        return ModelConfig(
            feature_dim=feature_dim,
            hidden_dim=self.hidden_dim,
            embed_dim=self.embed_dim,
            layers=self.layers,
            classes=2,
            dropout=self.dropout,
            lambda_low=self.lambda_low,
            lambda_high=self.lambda_high,
            share_streams=self.share_streams,
        )


@dataclass(frozen=True)
class SeedResult:
    seed: int
    accuracy: float
    epoch_ce: tuple
    epoch_smmi: tuple
    epoch_fmmd: tuple
    epoch_total: tuple
    eval_counts: dict


@dataclass(frozen=True)
class RunResult:
    config_hash: str
    accuracies: tuple
    mean_accuracy: float
    std_accuracy: float
    seed_results: tuple
    wall_clock: float


def config_hash(cfg: ExperimentConfig) -> str:
    payload = ";".join(f"{f.name}={getattr(cfg, f.name)!r}" for f in fields(cfg))
    return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Data plumbing
# ---------------------------------------------------------------------------


def load_dataset(cfg: ExperimentConfig) -> GraphDataset:
    return parse_tudataset(cfg.data_root, cfg.dataset)


def build_split(cfg: ExperimentConfig, ds: GraphDataset) -> DomainSplit:
    return split_domains(ds, cfg.statistic, cfg.k, cfg.split_seed, cfg.train_fraction)


def domain_partitions(cfg: ExperimentConfig, split: DomainSplit, domain: int):
    """(train indices, test indices) of a domain, optionally subsampled to
    the desk-scale budget. The subsample is a function of the split seed
    only, so every seed and run variant sees the same graphs."""
    members = split.domain_indices(domain, "all")
    if cfg.desk_scale and len(members) > cfg.desk_graphs:
        rng = np.random.Generator(np.random.PCG64(
            derive_seed(cfg.split_seed, "desk", domain, cfg.desk_graphs)))
        chosen = rng.choice(len(members), size=cfg.desk_graphs, replace=False)
        members = [members[i] for i in sorted(chosen)]
    is_test = split.is_test
    train = [i for i in members if not is_test[i]]
    test = [i for i in members if is_test[i]]
    return train, test


def prepare_features(ds: GraphDataset, indices, rho: float, cache: dict | None = None) -> dict:
    """Band features per graph index; pure per graph, so one cache serves
    every seed, domain pair, and sweep cell at the same rho."""
    cache = {} if cache is None else cache
    vocab = ds.vocab_size
    for idx in indices:
        if idx not in cache:
            cache[idx] = graph_band_features(ds.graphs[idx], rho, vocab)
    return cache


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def _draw_masks(rng, mcfg: ModelConfig, node_count: int):
    if mcfg.dropout <= 0.0:
        return None
    out = {}
    for stream in ("low", "high"):
        out[stream] = [
            (rng.random((node_count, mcfg.hidden_dim)) >= mcfg.dropout).astype(np.float64)
            for _ in range(mcfg.layers)
        ]
    return out


def _mean_terms(terms):
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return ad.scale(total, 1.0 / len(terms))


def train_single_seed(cfg: ExperimentConfig, ds: GraphDataset, split: DomainSplit,
                      seed: int, features: dict) -> tuple:
    """One full training run; returns (params, SeedResult)."""
    src_train, _ = domain_partitions(cfg, split, cfg.source)
    tgt_train, tgt_test = domain_partitions(cfg, split, cfg.target)
    if not src_train or not tgt_train:
        raise ContractViolation("training needs non-empty source and target domains")
    prepare_features(ds, [*src_train, *tgt_train, *tgt_test], cfg.rho, features)

    mcfg = cfg.model_config(ds.vocab_size)
    params = init_params(mcfg, derive_seed(seed, "model"))
    opt = ad.Adam(params, lr=cfg.lr)
    src_labels = [ds.graphs[i].class_label for i in src_train]
    half = cfg.batch_size // 2
    counters = {"ce": 0, "smmi": 0, "fmmd": 0}
    epoch_rows = []

    for epoch in range(cfg.effective_epochs):
        frozen = wrap_params(params)
        src_embs = [dual_encode_features(frozen, mcfg, features[i]) for i in src_train]
        tgt_embs = [dual_encode_features(frozen, mcfg, features[j]) for j in tgt_train]
        plan = build_pairing_plan(src_embs, src_labels, tgt_embs, params, mcfg,
                                  cfg.confidence_threshold)
        pair_of = {i: j for i, j in plan.positives}

        shuffle_rng = np.random.Generator(np.random.PCG64(
            derive_seed(seed, "shuffle", epoch)))
        order = [int(v) for v in shuffle_rng.permutation(len(src_train))]
        step_rows = []

        for step, chunk in enumerate(_chunks(order, half)):
            tgt_in = []
            for i in chunk:
                j = pair_of.get(i)
                if j is not None and j not in tgt_in:
                    tgt_in.append(j)
            need = half - len(tgt_in)
            if need > 0:
                remaining = [j for j in range(len(tgt_train)) if j not in tgt_in]
                if remaining:
                    fill_rng = np.random.Generator(np.random.PCG64(
                        derive_seed(seed, "fill", epoch, step)))
                    pick = fill_rng.choice(len(remaining),
                                           size=min(need, len(remaining)),
                                           replace=False)
                    tgt_in.extend(remaining[p] for p in sorted(pick))

            batch_keys = [("s", i) for i in chunk] + [("t", j) for j in tgt_in]
            batch_set = set(batch_keys)
            tape = ad.Tape()
            wrapped = wrap_params(params, tape)
            mask_rng = np.random.Generator(np.random.PCG64(
                derive_seed(seed, "dropout", epoch, step)))
            embs = {}
            for key in batch_keys:
                idx = src_train[key[1]] if key[0] == "s" else tgt_train[key[1]]
                feats = features[idx]
                masks = _draw_masks(mask_rng, mcfg, feats.adjacency.shape[0])
                embs[key] = dual_encode_features(wrapped, mcfg, feats, masks)

            logits = ad.stack_rows([classify(wrapped, mcfg, embs[("s", i)])
                                    for i in chunk])
            ce = cross_entropy(logits, [src_labels[i] for i in chunk])
            counters["ce"] += 1
            total = ce
            smmi_value = 0.0
            fmmd_value = 0.0

            if cfg.use_smmi and cfg.gamma1 > 0.0:
                pair_terms = []
                for i in chunk:
                    j = pair_of.get(i)
                    if j is None or ("t", j) not in batch_set:
                        continue
                    pair = {("s", i), ("t", j)}
                    cand = [k for k in plan.negatives_for[("s", i)]
                            if k in batch_set]
                    if not cand:
                        cand = [k for k in batch_keys if k not in pair]
                    if not cand:
                        continue
                    batch_obj = ContrastiveBatch(
                        positives=((embs[("s", i)], embs[("t", j)]),),
                        negatives=tuple(embs[k] for k in cand),
                        tau=cfg.tau,
                        lambda_low=cfg.lambda_low,
                        lambda_high=cfg.lambda_high,
                    )
                    pair_terms.append(smmi_loss(batch_obj, cfg.smmi_variant))
                    counters["smmi"] += 1
                if pair_terms:
                    smmi = _mean_terms(pair_terms)
                    smmi_value = float(smmi.data)
                    total = ad.add(total, ad.scale(smmi, cfg.gamma1))

            if cfg.use_fmmd and cfg.gamma2 > 0.0:
                confident = {
                    j for j in tgt_in
                    if plan.confidences[j] >= cfg.confidence_threshold
                }
                label_of = {("s", i): src_labels[i] for i in chunk}
                label_of.update(
                    {("t", j): int(plan.pseudo_labels[j]) for j in confident})
                class_terms = []
                for c in (0, 1):
                    S = [embs[("s", i)] for i in chunk if src_labels[i] == c]
                    T = [embs[("t", j)] for j in tgt_in
                         if j in confident and int(plan.pseudo_labels[j]) == c]
                    N = [embs[key] for key in batch_keys
                         if key in label_of and label_of[key] != c]
                    if S and T and N:
                        class_terms.append(fmmd_loss(S, T, N, cfg.fmmd_sign))
                        counters["fmmd"] += 1
                if class_terms:
                    fmmd = _mean_terms(class_terms)
                    fmmd_value = float(fmmd.data)
                    total = ad.add(total, ad.scale(fmmd, cfg.gamma2))

            try:
                grads = tape.backward(total)
            except NumericalError as err:
                raise NumericalError(
                    f"training diverged at epoch {epoch} step {step}: {err}")
            named = {}
            for name in params:
                g = grads.get(wrapped[name].node_id)
                if g is not None:
                    named[name] = g
            opt.step(named)
            step_rows.append((float(ce.data), smmi_value, fmmd_value,
                              float(total.data)))

        k = len(step_rows)
        epoch_rows.append(tuple(sum(r[c] for r in step_rows) / k for c in range(4)))

    accuracy = evaluate(params, mcfg, ds, tgt_test, features)
    result = SeedResult(
        seed=seed,
        accuracy=accuracy,
        epoch_ce=tuple(r[0] for r in epoch_rows),
        epoch_smmi=tuple(r[1] for r in epoch_rows),
        epoch_fmmd=tuple(r[2] for r in epoch_rows),
        epoch_total=tuple(r[3] for r in epoch_rows),
        eval_counts=dict(counters),
    )
    return params, result


def evaluate(params: dict, mcfg: ModelConfig, ds: GraphDataset, indices,
             features: dict) -> float:
    """Argmax-logit accuracy over a set of graph indices, dropout off."""
    indices = list(indices)
    if not indices:
        raise ContractViolation("cannot evaluate an empty index set")
    wrapped = wrap_params(params)
    correct = 0
    for idx in indices:
        emb = dual_encode_features(wrapped, mcfg, features[idx])
        logits = classify(wrapped, mcfg, emb).data
        if int(np.argmax(logits)) == ds.graphs[idx].class_label:
            correct += 1
    return correct / len(indices)


def evaluate_checkpoint(cfg: ExperimentConfig, ds: GraphDataset,
                        split: DomainSplit, checkpoint_path: str,
                        domain: int, partition: str) -> float:
    """Load a checkpoint and score one domain partition."""
    mcfg = cfg.model_config(ds.vocab_size)
    params = load_params(checkpoint_path, mcfg)
    train, test = domain_partitions(cfg, split, domain)
    indices = {"train": train, "test": test, "all": train + test}[partition]
    features = prepare_features(ds, indices, cfg.rho)
    return evaluate(params, mcfg, ds, indices, features)


def train_run(cfg: ExperimentConfig, ds: GraphDataset | None = None,
              split: DomainSplit | None = None, features: dict | None = None,
              out_dir: str | None = None) -> RunResult:
    """Train every seed of a config; optionally write artifacts.

    Artifacts under out_dir: checkpoint_seed{N}.bin, losses.csv,
    results.csv (both byte-stable) and manifest.json (carries timing).
    """
    started = time.perf_counter()
    if ds is None:
        ds = load_dataset(cfg)
    if split is None:
        split = build_split(cfg, ds)
    features = {} if features is None else features

    seed_results = []
    final_params = {}
    for seed in cfg.seeds:
        params, res = train_single_seed(cfg, ds, split, seed, features)
        seed_results.append(res)
        final_params[seed] = params

    accs = tuple(r.accuracy for r in seed_results)
    result = RunResult(
        config_hash=config_hash(cfg),
        accuracies=accs,
        mean_accuracy=float(np.mean(accs)),
        std_accuracy=float(np.std(accs)),
        seed_results=tuple(seed_results),
        wall_clock=time.perf_counter() - started,
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        mcfg = cfg.model_config(ds.vocab_size)
        for seed in cfg.seeds:
            save_params(os.path.join(out_dir, f"checkpoint_seed{seed}.bin"),
                        mcfg, final_params[seed])
        _write_losses_csv(os.path.join(out_dir, "losses.csv"), seed_results)
        _write_results_csv(os.path.join(out_dir, "results.csv"), result)
        _write_manifest(os.path.join(out_dir, "manifest.json"), cfg, ds, result)
    return result


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------


def _write_losses_csv(path: str, seed_results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "epoch", "ce", "smmi", "fmmd", "total"])
        for res in seed_results:
            for epoch in range(len(res.epoch_total)):
                w.writerow([
                    res.seed, epoch,
                    repr(res.epoch_ce[epoch]), repr(res.epoch_smmi[epoch]),
                    repr(res.epoch_fmmd[epoch]), repr(res.epoch_total[epoch]),
                ])


def _write_results_csv(path: str, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "target_test_accuracy"])
        for res in result.seed_results:
            w.writerow([res.seed, repr(res.accuracy)])
        w.writerow(["mean", repr(result.mean_accuracy)])
        w.writerow(["std", repr(result.std_accuracy)])


def _result_payload(result: RunResult) -> dict:
    return {
        "config_hash": result.config_hash,
        "accuracies": list(result.accuracies),
        "mean_accuracy": result.mean_accuracy,
        "std_accuracy": result.std_accuracy,
        "eval_counts": [r.eval_counts for r in result.seed_results],
    }


def _write_manifest(path: str, cfg: ExperimentConfig, ds: GraphDataset,
                    result: RunResult, extra: dict | None = None) -> None:
    payload = {
        "config": asdict(cfg),
        "config_hash": config_hash(cfg),
        "dataset_hash": dataset_hash(ds),
        "results": _result_payload(result),
        "timing": {"wall_clock_seconds": result.wall_clock},
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Transfer matrix / ablation / sweep
# ---------------------------------------------------------------------------

MATRIX_TASKS = (
    (0, 1), (1, 0), (0, 2), (2, 0), (0, 3), (3, 0),
    (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2),
)


def _run_cell(args):
    cfg, ds, split = args
    return train_run(cfg, ds, split)


def _run_cells(cells, ds, split, jobs: int):
    """Evaluate many configs, memoized by config hash; order-stable."""
    unique = {}
    for cfg in cells:
        unique.setdefault(config_hash(cfg), cfg)
    if jobs > 1 and len(unique) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_cell,
                                 [(c, ds, split) for c in unique.values()]))
        results = dict(zip(unique.keys(), outs))
    else:
        features = {}
        results = {h: train_run(c, ds, split, features)
                   for h, c in unique.items()}
    return [results[config_hash(cfg)] for cfg in cells]


def run_transfer_matrix(cfg: ExperimentConfig, ds: GraphDataset | None = None,
                        split: DomainSplit | None = None,
                        out_dir: str | None = None, jobs: int = 1):
    """All 12 ordered domain pairs of a k=4 split, plus their average."""
    if cfg.k != 4:
        raise ContractViolation("the transfer matrix is defined for k = 4")
    if ds is None:
        ds = load_dataset(cfg)
    if split is None:
        split = build_split(cfg, ds)
    cells = [replace(cfg, source=s, target=t) for s, t in MATRIX_TASKS]
    results = _run_cells(cells, ds, split, jobs)
    rows = [(f"{s}-{t}", res.mean_accuracy, res.std_accuracy)
            for (s, t), res in zip(MATRIX_TASKS, results)]
    average = float(np.mean([r[1] for r in rows]))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "matrix.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["task", "mean_accuracy", "std_accuracy"])
            for task, mean, std in rows:
                w.writerow([task, repr(mean), repr(std)])
            w.writerow(["average", repr(average), ""])
    return rows, average


def ablate(cfg: ExperimentConfig, ds: GraphDataset | None = None,
           split: DomainSplit | None = None, out_dir: str | None = None):
    """Full objective vs the two single-term removals, same seeds."""
    if ds is None:
        ds = load_dataset(cfg)
    if split is None:
        split = build_split(cfg, ds)
    variants = (
        ("full", cfg),
        ("no_smmi", replace(cfg, use_smmi=False, gamma1=0.0)),
        ("no_fmmd", replace(cfg, use_fmmd=False, gamma2=0.0)),
    )
    features = {}
    results = {}
    for name, vcfg in variants:
        results[name] = train_run(vcfg, ds, split, features)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "ablation.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variant", "mean_accuracy", "std_accuracy",
                        "smmi_evals", "fmmd_evals"])
            for name, _ in variants:
                res = results[name]
                smmi_evals = sum(r.eval_counts["smmi"] for r in res.seed_results)
                fmmd_evals = sum(r.eval_counts["fmmd"] for r in res.seed_results)
                w.writerow([name, repr(res.mean_accuracy),
                            repr(res.std_accuracy), smmi_evals, fmmd_evals])
    return results


def sweep(cfg: ExperimentConfig, tau_grid, gamma_grid,
          ds: GraphDataset | None = None, split: DomainSplit | None = None,
          out_dir: str | None = None, jobs: int = 1):
    """Cartesian (tau, gamma) sensitivity grid; gamma drives both loss
    weights. Duplicate grid points run once (memoized by config hash)."""
    tau_grid = list(tau_grid)
    gamma_grid = list(gamma_grid)
    if not tau_grid or not gamma_grid:
        raise ContractViolation("sweep grids must be non-empty")
    if ds is None:
        ds = load_dataset(cfg)
    if split is None:
        split = build_split(cfg, ds)
    cells = [replace(cfg, tau=t, gamma1=g, gamma2=g)
             for t in tau_grid for g in gamma_grid]
    results = _run_cells(cells, ds, split, jobs)
    rows = []
    pos = 0
    for t in tau_grid:
        for g in gamma_grid:
            res = results[pos]
            rows.append((t, g, res.mean_accuracy, res.std_accuracy))
            pos += 1
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "gamma", "mean_accuracy", "std_accuracy"])
            for t, g, mean, std in rows:
                w.writerow([repr(float(t)), repr(float(g)), repr(mean), repr(std)])
    return rows


# ---------------------------------------------------------------------------
# Spectral / structural analysis emission
# ---------------------------------------------------------------------------


def emit_analysis(ds: GraphDataset, split: DomainSplit, rho: float,
                  out_dir: str) -> dict:
    """Write the three analysis CSVs; returns the summary numbers.

    energy.csv: per-domain band-energy profile. spectral_diff.csv: the
    absolute profile gap of every unordered domain pair. cyclomatic.csv:
    per-domain cyclomatic min/max/mean plus a value:count histogram.
    """
    os.makedirs(out_dir, exist_ok=True)
    vocab = ds.vocab_size
    k = split.k
    domains = [[ds.graphs[i] for i in split.domain_indices(d)] for d in range(k)]

    profiles = [domain_energy_profile(domains[d], vocab, rho) for d in range(k)]
    with open(os.path.join(out_dir, "energy.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["domain", "low_energy", "high_energy"])
        for d, p in enumerate(profiles):
            w.writerow([d, repr(p.low_energy), repr(p.high_energy)])

    with open(os.path.join(out_dir, "spectral_diff.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["domain_a", "domain_b", "delta_low", "delta_high"])
        for a in range(k):
            for b in range(a + 1, k):
                dl = abs(profiles[a].low_energy - profiles[b].low_energy)
                dh = abs(profiles[a].high_energy - profiles[b].high_energy)
                w.writerow([a, b, repr(dl), repr(dh)])

    cyclo_overall = 0
    with open(os.path.join(out_dir, "cyclomatic.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["domain", "min", "max", "mean", "histogram"])
        for d in range(k):
            values = [structural_profile(g).cyclomatic for g in domains[d]]
            cyclo_overall = max(cyclo_overall, max(values))
            hist = {}
            for v in values:
                hist[v] = hist.get(v, 0) + 1
            hist_text = ";".join(f"{v}:{hist[v]}" for v in sorted(hist))
            w.writerow([d, min(values), max(values),
                        repr(float(np.mean(values))), hist_text])

    return {
        "dataset": ds.name,
        "cyclomatic_max": cyclo_overall,
        "profiles": [(p.low_energy, p.high_energy) for p in profiles],
    }
