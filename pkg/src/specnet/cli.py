"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
Configuration comes from an optional `key = value` file (--config) whose
keys mirror ExperimentConfig fields; command-line flags override file
values. The SPECNET_LOG environment variable (error, info, debug)
controls log verbosity. All artifacts land under --out, and repeating a
command with the same inputs rewrites them byte-identically.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .datasets import parse_tudataset, save_split, split_domains
from .errors import ContractViolation, DataError, NumericalError, UsageError
from .experiment import (
    ExperimentConfig,
    ablate,
    build_split,
    emit_analysis,
    evaluate_checkpoint,
    run_transfer_matrix,
    sweep,
    train_run,
)
from .gradcheck import GRAD_TOL, gradcheck_report
from .losses import FMMD_SIGNS, kernel_property_audit

__all__ = ["main", "dispatch", "read_config_file", "build_config"]

log = logging.getLogger("specnet")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

DEFAULT_TAU_GRID = (0.05, 0.1, 0.2, 0.4, 0.8)

KERNEL_AUDIT_SAMPLES = 100000

_INT_KEYS = frozenset({
    "k", "source", "target", "layers", "hidden_dim", "embed_dim", "epochs",
    "batch_size", "split_seed", "desk_graphs", "desk_epochs",
})
_FLOAT_KEYS = frozenset({
    "dropout", "lr", "tau", "gamma1", "gamma2", "lambda_low", "lambda_high",
    "rho", "confidence_threshold", "train_fraction",
})
_STR_KEYS = frozenset({"dataset", "data_root", "statistic", "fmmd_sign",
                       "smmi_variant"})
_BOOL_KEYS = frozenset({"use_smmi", "use_fmmd", "share_streams", "desk_scale"})
_INT_TUPLE_KEYS = frozenset({"seeds"})
# Keys consumed by the CLI itself rather than ExperimentConfig.
_FLOAT_TUPLE_KEYS = frozenset({"tau_grid", "gamma_grid"})
_EXTRA_INT_KEYS = frozenset({"gradcheck_batches", "gradcheck_samples"})


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage as UsageError instead of exiting."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def read_config_file(path: str) -> dict:
    """Parse a `key = value` config file into a raw string dict."""
    if not os.path.exists(path):
        raise DataError(f"missing config file: {path}")
    values = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{ln}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            if not key:
                raise UsageError(f"{path}:{ln}: empty key")
            values[key] = val.strip()
    return values


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise UsageError(f"config key {key!r}: expected a boolean, got {text!r}")


def _coerce(key: str, text: str):
    try:
        if key in _INT_KEYS or key in _EXTRA_INT_KEYS:
            return int(text)
        if key in _FLOAT_KEYS:
            return float(text)
        if key in _STR_KEYS:
            return text
        if key in _BOOL_KEYS:
            return _parse_bool(key, text)
        if key in _INT_TUPLE_KEYS:
            return tuple(int(part.strip()) for part in text.split(",") if part.strip())
        if key in _FLOAT_TUPLE_KEYS:
            return tuple(float(part.strip()) for part in text.split(",") if part.strip())
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse value {text!r}")
    raise UsageError(f"unknown config key {key!r}")


def build_config(args, require_data: bool = True):
    """Merge the config file and flag overrides into an ExperimentConfig.

    Returns (config, extras) where extras holds the CLI-level keys
    (tau_grid, gamma_grid, gradcheck_*) that ExperimentConfig does not
    carry. --seed sets the split seed and, unless the file pins `seeds`,
    shifts the training seed tuple to start there.
    """
    raw = {}
    if args.config:
        raw = read_config_file(args.config)
    coerced = {k: _coerce(k, v) for k, v in raw.items()}
    extras = {k: coerced.pop(k) for k in (*_FLOAT_TUPLE_KEYS, *_EXTRA_INT_KEYS)
              if k in coerced}

    if args.data is not None:
        coerced["data_root"] = args.data
    if args.name is not None:
        coerced["dataset"] = args.name
    for flag in ("source", "target", "tau", "gamma1", "gamma2", "rho"):
        value = getattr(args, flag)
        if value is not None:
            coerced[flag] = value
    if args.fmmd_sign is not None:
        coerced["fmmd_sign"] = args.fmmd_sign
    if args.desk_scale:
        coerced["desk_scale"] = True
    if args.seed is not None:
        coerced["split_seed"] = args.seed
        if "seeds" not in coerced:
            count = len(ExperimentConfig.__dataclass_fields__["seeds"].default)
            coerced["seeds"] = tuple(args.seed + i for i in range(count))

    if "dataset" not in coerced:
        raise UsageError("dataset name required: pass --name or set dataset= in the config")
    if require_data and not coerced.get("data_root"):
        raise UsageError("dataset root required: pass --data or set data_root= in the config")
    try:
        cfg = ExperimentConfig(**coerced)
    except TypeError as err:
        raise UsageError(str(err))
    return cfg, extras


def _load(cfg: ExperimentConfig):
    ds = parse_tudataset(cfg.data_root, cfg.dataset)
    return ds, build_split(cfg, ds)


def _need_out(args) -> str:
    if not args.out:
        raise UsageError("this command writes artifacts: pass --out <dir>")
    return args.out


def _write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_prepare(args) -> int:
    if not args.data or not args.name:
        raise UsageError("prepare requires --data and --name")
    ds = parse_tudataset(args.data, args.name)
    s = ds.summary()
    print(f"{s['name']}: {s['graphs']} graphs")
    print(f"mean nodes {s['mean_nodes']:.2f}, mean edges {s['mean_edges']:.2f}, "
          f"{s['classes']} classes, node-label vocabulary {s['node_label_vocab']}")
    if args.out:
        _write_json(os.path.join(args.out, "summary.json"), s)
    return 0


def _cmd_split(args) -> int:
    cfg, _ = build_config(args)
    out = _need_out(args)
    ds = parse_tudataset(cfg.data_root, cfg.dataset)
    split = split_domains(ds, cfg.statistic, cfg.k, cfg.split_seed,
                          cfg.train_fraction)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "split.txt")
    save_split(split, path)
    sizes = [len(split.domain_indices(d)) for d in range(split.k)]
    print(f"wrote {path}")
    print(f"{split.k} domains by {split.statistic}, sizes {sizes}")
    return 0


def _cmd_analyze(args) -> int:
    cfg, _ = build_config(args)
    out = _need_out(args)
    ds, split = _load(cfg)
    summary = emit_analysis(ds, split, cfg.rho, out)
    print(f"wrote energy.csv, spectral_diff.csv, cyclomatic.csv under {out}")
    print(f"max cyclomatic number: {summary['cyclomatic_max']}")
    return 0


def _cmd_train(args) -> int:
    cfg, _ = build_config(args)
    out = _need_out(args)
    ds, split = _load(cfg)
    log.info("training %s %d->%d, %d seeds, %d epochs", cfg.dataset,
             cfg.source, cfg.target, len(cfg.seeds), cfg.effective_epochs)
    result = train_run(cfg, ds, split, out_dir=out)
    print(f"target test accuracy {result.mean_accuracy:.4f} "
          f"+/- {result.std_accuracy:.4f} over seeds {list(cfg.seeds)}")
    return 0


def _cmd_eval(args) -> int:
    cfg, _ = build_config(args)
    out = _need_out(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    path = os.path.join(out, f"checkpoint_seed{seed}.bin")
    ds, split = _load(cfg)
    accuracy = evaluate_checkpoint(cfg, ds, split, path, cfg.target, "test")
    print(f"domain {cfg.target} test accuracy {accuracy:.4f} ({path})")
    return 0


def _cmd_matrix(args) -> int:
    cfg, _ = build_config(args)
    out = _need_out(args)
    ds, split = _load(cfg)
    rows, average = run_transfer_matrix(cfg, ds, split, out_dir=out,
                                        jobs=args.jobs)
    for task, mean, std in rows:
        print(f"{task}: {mean:.4f} +/- {std:.4f}")
    print(f"average: {average:.4f}")
    return 0


def _cmd_ablate(args) -> int:
    cfg, _ = build_config(args)
    out = _need_out(args)
    ds, split = _load(cfg)
    results = ablate(cfg, ds, split, out_dir=out)
    for name in ("full", "no_smmi", "no_fmmd"):
        res = results[name]
        print(f"{name}: {res.mean_accuracy:.4f} +/- {res.std_accuracy:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    cfg, extras = build_config(args)
    out = _need_out(args)
    tau_grid = extras.get("tau_grid", DEFAULT_TAU_GRID)
    gamma_grid = extras.get("gamma_grid", (cfg.gamma1,))
    ds, split = _load(cfg)
    rows = sweep(cfg, tau_grid, gamma_grid, ds, split, out_dir=out,
                 jobs=args.jobs)
    best = max(rows, key=lambda r: r[2])
    print(f"swept {len(rows)} cells; best tau={best[0]} gamma={best[1]} "
          f"accuracy {best[2]:.4f}")
    return 0


def _cmd_gradcheck(args) -> int:
    extras = {}
    if args.config:
        raw = read_config_file(args.config)
        extras = {k: _coerce(k, v) for k, v in raw.items()
                  if k in _EXTRA_INT_KEYS}
    seed = args.seed if args.seed is not None else 0
    batches = extras.get("gradcheck_batches", 20)
    samples = extras.get("gradcheck_samples", 3)
    report = gradcheck_report(seed=seed, batches=batches,
                              sample_per_tensor=samples)
    print(f"max relative error {report['max_relative_error']:.3e} over "
          f"{report['coordinates_checked']} coordinates "
          f"({report['batches']} batches)")
    if args.out:
        _write_json(os.path.join(args.out, "gradcheck.json"), report)
    if not report["all_ok"]:
        raise NumericalError(
            f"gradient check failed: max relative error "
            f"{report['max_relative_error']:.3e} > {GRAD_TOL:.0e}")
    return 0


def _cmd_audit_kernel(args) -> int:
    seed = args.seed if args.seed is not None else 0
    report = kernel_property_audit(KERNEL_AUDIT_SAMPLES, seed)
    print(f"|k| max {report['max_abs_kernel']:.6f} (bound {report['kernel_bound']}), "
          f"Lipschitz ratio max {report['max_lipschitz_ratio']:.6f}, "
          f"batch-mean gap max {report['max_batch_mean_gap']:.6f}")
    if args.out:
        _write_json(os.path.join(args.out, "kernel_audit.json"), report)
    if not report["all_ok"]:
        raise NumericalError("kernel property audit failed")
    return 0


_HANDLERS = {
    "prepare": _cmd_prepare,
    "split": _cmd_split,
    "analyze": _cmd_analyze,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "matrix": _cmd_matrix,
    "ablate": _cmd_ablate,
    "sweep": _cmd_sweep,
    "gradcheck": _cmd_gradcheck,
    "audit-kernel": _cmd_audit_kernel,
}

_COMMAND_HELP = {
    "prepare": "parse a dataset and print its summary",
    "split": "build a quantile domain split and write its manifest",
    "analyze": "write band-energy, profile-gap, and cyclomatic CSVs",
    "train": "train one transfer task over all seeds",
    "eval": "score a saved checkpoint on a target test partition",
    "matrix": "run all 12 ordered domain pairs and their average",
    "ablate": "compare the full objective against single-term removals",
    "sweep": "grid the temperature and loss-weight sensitivity",
    "gradcheck": "verify tape gradients against finite differences",
    "audit-kernel": "verify kernel bounds on random embeddings",
}


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--data", help="dataset root directory (default: none)")
    common.add_argument("--name", help="dataset name, e.g. Mutagenicity (default: none)")
    common.add_argument("--out", help="output directory for artifacts (default: none)")
    common.add_argument("--config", help="key = value config file (default: none)")
    common.add_argument("--seed", type=int, help="base random seed (default 0)")
    common.add_argument("--jobs", type=int, default=1,
                        help="parallel worker processes (default 1)")
    common.add_argument("--source", type=int, help="source domain index (default 0)")
    common.add_argument("--target", type=int, help="target domain index (default 1)")
    common.add_argument("--tau", type=float, help="contrastive temperature (default 0.1)")
    common.add_argument("--gamma1", type=float, help="contrastive loss weight (default 0.5)")
    common.add_argument("--gamma2", type=float, help="class-repulsion loss weight (default 0.5)")
    common.add_argument("--rho", type=float, help="low-band spectrum fraction (default 0.5)")
    common.add_argument("--fmmd-sign", choices=sorted(FMMD_SIGNS),
                        help="repulsion term sign convention (default repulsive)")
    common.add_argument("--desk-scale", action="store_const", const=True,
                        help="subsample domains and shorten training (default off)")

    parser = _Parser(prog="specnet",
                     description="spectral graph domain adaptation toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name in _HANDLERS:
        sub.add_parser(name, parents=[common], help=_COMMAND_HELP[name],
                       description=_COMMAND_HELP[name])
    return parser


def _setup_logging() -> None:
    name = os.environ.get("SPECNET_LOG", "error").lower()
    if name not in LOG_LEVELS:
        raise UsageError(
            f"SPECNET_LOG must be one of error, info, debug (got {name!r})")
    logging.basicConfig(level=LOG_LEVELS[name],
                        format="%(levelname)s %(name)s: %(message)s")


def dispatch(argv) -> int:
    """Parse argv and run one command; raises the toolkit error types."""
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    return _HANDLERS[args.command](args)


def main(argv=None) -> int:
    try:
        return dispatch(sys.argv[1:] if argv is None else list(argv))
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except ContractViolation as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
