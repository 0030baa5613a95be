"""Command-line entry point: ``ill <subcommand> ...``.

Exit codes: 0 on success, 1 on a usage error, 2 on a data or contract error.
Options resolve as flag > ``--config`` JSON value > built-in default, and the
resolved values are echoed into the ``run_summary.json`` every run writes.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (Dataset, ingest_external, read_model, read_world, write_model, write_rows, write_trace,
                     write_world)
from .errors import ContractError, DataFormatError, DivergedError, FactorizationError
from .experiments import (FIG1C_COLUMNS, LEARNERS, SWEEP_COLUMNS, SWEEP_WORLD, SweepConfig, hinge_trainer,
                          model_scores, run_fig1c, run_seen_fraction_sweep, summarize_sweep)
from .learners import (ConseConfig, HingeConfig, RankNetConfig, train_conse, train_eszsl,
                       train_hinge, train_ranknet)
from .learners.common import suggest_step
from .metrics import BinSpec, distance_bins, hamming_loss, miap, topk_prf
from .pacbound import GAP_COLUMNS, BoundInput, bound_report, gap_experiment
from .synthgen import SynthConfig, generate_world, make_world

SUMMARY_NAME = "run_summary.json"
DATA_ERRORS = (ContractError, DataFormatError, FactorizationError, DivergedError, FileNotFoundError,
               IsADirectoryError, json.JSONDecodeError)

TRAIN_DEFAULTS = {
    "hinge": {"epochs": 1000, "step0": None, "step_base": 4.0, "batch": "full"},
    "ranknet": {"epochs": 60, "step0": None, "step_base": 256.0, "gamma": 0.0, "batch": "full"},
    "eszsl": {"gamma_label": 0.1, "gamma_data": 0.1},
    "conse": {"t": 5, "reg": 1e-3, "epochs": 300},
}


class UsageError(Exception):
    def __init__(self, message: str, reported: bool = False):
        super().__init__(message)
        self.reported = reported


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message, reported=True)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DataFormatError(f"{path}: config must be a JSON object")
    return data


def _resolve(defaults: dict, config: dict, args) -> dict:
    """Merge defaults, then config values, then any flag that was actually given."""
    unknown = set(config) - set(defaults)
    if unknown:
        raise ContractError(f"unknown config keys: {sorted(unknown)}")
    out = dict(defaults)
    out.update(config)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def _write_summary(path, subcommand: str, config: dict, seeds, outputs: dict, started: float) -> Path:
    """Write the run summary; a directory argument gets ``run_summary.json`` inside it."""
    path = Path(path)
    if path.suffix != ".json":
        path.mkdir(parents=True, exist_ok=True)
        path = path / SUMMARY_NAME
    summary = {
        "subcommand": subcommand,
        "version": __version__,
        "config": config,
        "seeds": list(seeds),
        "outputs": {k: str(v) for k, v in outputs.items()},
        "timings": {"total_seconds": time.perf_counter() - started},
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _synth_config(args, config: dict) -> SynthConfig:
    flags = {"d": args.d, "n": args.n, "k": args.k, "dirichlet_alpha": args.alpha, "m_train": args.m_train,
             "m_test": args.m_test, "l_seen": args.l_seen, "l_unseen": args.l_unseen,
             "flip_prob": args.flip_prob}
    merged = dict(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return SynthConfig.from_dict(merged)


def _add_world_flags(p):
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, help="mixture components")
    p.add_argument("--alpha", type=float, help="Dirichlet concentration of the mixture weights")
    p.add_argument("--m-train", type=int)
    p.add_argument("--m-test", type=int)
    p.add_argument("--l-seen", type=int)
    p.add_argument("--l-unseen", type=int)
    p.add_argument("--flip-prob", type=float)


# -- subcommands ----------------------------------------------------------------

def cmd_gen(args, started):
    cfg = _synth_config(args, _load_config(args.config))
    cfg.seed = args.seed
    draw = generate_world(cfg, args.seed)
    out = Path(args.out)
    manifest = write_world(out, draw)
    outputs = {name: out / rel for name, rel in manifest["files"].items()}
    outputs["manifest"] = out / "manifest.json"
    _write_summary(out, "gen", cfg.to_dict(), [args.seed], outputs, started)


TRAIN_FLAGS = ("epochs", "step0", "step_base", "batch", "gamma", "gamma_label", "gamma_data", "t", "reg")


def _train_config(args) -> dict:
    defaults = TRAIN_DEFAULTS[args.learner]
    stray = [f for f in TRAIN_FLAGS if getattr(args, f) is not None and f not in defaults]
    if stray:
        flags = ", ".join("--" + f.replace("_", "-") for f in stray)
        raise UsageError(f"{flags} not used by the {args.learner} learner")
    return _resolve(defaults, _load_config(args.config), args)


def cmd_train(args, started):
    hp = _train_config(args)
    ds = read_world(args.data)
    x, labels, y = ds.train_x, ds.seen, ds.train_y
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    outputs = {"model": out, "sidecar": out.with_suffix(".json")}
    meta = {"learner": args.learner, "seed": args.seed, **hp}
    if args.learner in ("hinge", "ranknet"):
        step0 = hp["step0"] if hp["step0"] is not None else suggest_step(x, labels, hp["step_base"])
        meta["step0"] = step0
        if args.learner == "hinge":
            model, trace = train_hinge(x, labels, y, HingeConfig(hp["epochs"], step0, hp["batch"], args.seed))
        else:
            cfg = RankNetConfig(hp["epochs"], step0, hp["gamma"], hp["batch"], args.seed)
            model, trace = train_ranknet(x, labels, y, cfg)
        meta["objective"] = trace.final_objective
        trace_path = out.with_suffix(".trace.csv")
        write_trace(trace_path, trace)
        outputs["trace"] = trace_path
    elif args.learner == "eszsl":
        model = train_eszsl(x, labels, y, hp["gamma_label"], hp["gamma_data"])
    else:
        t = min(int(hp["t"]), labels.shape[0])
        meta["t"] = t
        model = train_conse(x, labels, y, t, ConseConfig(epochs=hp["epochs"], reg=hp["reg"]))
    write_model(out, model, meta)
    _write_summary(out.with_suffix(".run_summary.json"), "train", {**meta, "data": str(args.data)},
                   [args.seed], outputs, started)


def _check_model_fits(model, ds: Dataset):
    d, n = ds.train_x.shape[1], ds.seen.shape[1]
    if (model.n, model.d) != (n, d):
        raise ContractError(f"model expects n={model.n}, d={model.d} (V is {model.n}x{model.d}) but the "
                            f"dataset has n={n}, d={d} (features {ds.test_x.shape}, labels {ds.seen.shape})")


def cmd_eval(args, started):
    model = read_model(args.model)
    ds = read_world(args.data)
    _check_model_fits(model, ds)
    if args.labels == "seen":
        labels, truth = ds.seen, ds.test_y_seen.values
    elif args.labels == "unseen":
        labels, truth = ds.unseen, ds.test_y_unseen.values
    else:
        labels, truth = ds.all_labels, ds.test_y.values
    if labels.shape[0] == 0 or ds.test_x.shape[0] == 0:
        raise ContractError(f"the dataset has no test data for the {args.labels!r} labels")
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(metrics) - {"hamming", "miap", "topk"}
    if unknown:
        raise UsageError(f"unknown metrics: {sorted(unknown)}")
    scores = model_scores(model, ds.test_x, labels)
    pred = np.where(scores > 0, 1, -1)
    result = {"labels": args.labels, "m_test": int(ds.test_x.shape[0]), "l": int(labels.shape[0])}
    if "hamming" in metrics:
        result["hamming"] = hamming_loss(pred, truth)
    if "miap" in metrics:
        result["miap"] = miap(scores, truth)
    if "topk" in metrics:
        p, r, f1 = topk_prf(scores, truth, args.k)
        result.update({"k": args.k, "precision_at_k": p, "recall_at_k": r, "f1_at_k": f1})
    if args.bins is not None:
        all_scores = model_scores(model, ds.test_x, ds.all_labels)
        all_pred = np.where(all_scores > 0, 1, -1)
        groups = distance_bins(ds.seen, ds.unseen, BinSpec(bin_size=args.bins))
        result["bins"] = [{"group_index": i, "group_kind": g.kind, "size": int(g.indices.size),
                           "mean_distance": g.mean_distance,
                           "hamming": hamming_loss(all_pred[:, g.indices], ds.test_y.values[:, g.indices])}
                          for i, g in enumerate(groups)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({k: v for k, v in result.items() if k != "bins"}, sort_keys=True))
    config = {"model": str(args.model), "data": str(args.data), "metrics": metrics, "k": args.k,
              "labels": args.labels, "bins": args.bins}
    _write_summary(out.with_suffix(".run_summary.json"), "eval", config, [], {"report": out}, started)


def _seed_list(args) -> list[int]:
    return [args.seed + i for i in range(args.n_seeds)]


def cmd_fig1c(args, started):
    cfg = _synth_config(args, _load_config(args.config))
    seeds = _seed_list(args)

    def learner(draw):
        step0 = suggest_step(draw.train_x, draw.seen, args.step_base)
        cfg_h = HingeConfig(epochs=args.epochs, step0=step0, seed=draw.world.seed)
        return train_hinge(draw.train_x, draw.seen, draw.train_y, cfg_h)[0]

    curve = run_fig1c(cfg, bins=BinSpec(bin_size=args.bin_size), seeds=seeds, learner=learner,
                      against=args.against)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "fig1c.csv", curve.rows(), FIG1C_COLUMNS)
    config = {"world": cfg.to_dict(), "epochs": args.epochs, "step_base": args.step_base,
              "bin_size": args.bin_size, "against": args.against}
    _write_summary(out, "fig1c", config, seeds, {"curve": out / "fig1c.csv"}, started)


def cmd_sweep(args, started):
    seeds = _seed_list(args)
    defaults = asdict(SweepConfig())
    defaults.pop("seeds")
    flags = {"fractions": args.fractions, "learners": args.learners, "k": args.topk,
             "ranknet_epochs": args.epochs}
    config = _load_config(args.config)
    world_cfg = config.pop("world", None)
    unknown = set(config) - set(defaults)
    if unknown:
        raise ContractError(f"unknown config keys: {sorted(unknown)}")
    resolved = {**defaults, **config, **{k: v for k, v in flags.items() if v is not None}}
    sweep = SweepConfig(seeds=seeds, **resolved)
    if args.data is not None:
        source = read_world(args.data)
        source_desc = {"data": str(args.data)}
    else:
        source = SynthConfig.from_dict(world_cfg) if world_cfg else SWEEP_WORLD
        source_desc = {"world": source.to_dict()}
    rows = run_seen_fraction_sweep(source, sweep)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "sweep.csv", rows, SWEEP_COLUMNS)
    summary = summarize_sweep(rows)
    write_rows(out / "sweep_summary.csv", summary, list(summary[0]) if summary else None)
    _write_summary(out, "sweep", {**sweep.to_dict(), **source_desc}, seeds,
                   {"rows": out / "sweep.csv", "summary": out / "sweep_summary.csv"}, started)


def cmd_bound(args, started):
    rep = bound_report(BoundInput(args.m, args.l, args.d, args.n, args.delta))
    print(f"epsilon1 = {rep['epsilon1']:.12g}")
    print(f"epsilon2 = {rep['epsilon2']:.12g}")
    print(f"bound    = {rep['bound']:.12g}")
    print(f"vacuous  = {str(rep['vacuous']).lower()}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bound.json", "w") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
        fh.write("\n")
    config = {"m": args.m, "l": args.l, "d": args.d, "n": args.n, "delta": args.delta}
    _write_summary(out, "bound", config, [], {"report": out / "bound.json"}, started)


def cmd_gap(args, started):
    cfg = _synth_config(args, _load_config(args.config))
    world = make_world(cfg, args.seed)
    grid = [(m, l) for m in args.m_values for l in args.l_values]
    records = gap_experiment(grid, args.trials, world, hinge_trainer(args.epochs, args.step_base),
                             args.delta, args.m_mc, args.l_mc, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "gap.csv", [r.to_row() for r in records], GAP_COLUMNS)
    config = {"world": cfg.to_dict(), "m_values": args.m_values, "l_values": args.l_values,
              "trials": args.trials, "delta": args.delta, "m_mc": args.m_mc, "l_mc": args.l_mc,
              "epochs": args.epochs, "step_base": args.step_base}
    _write_summary(out, "gap", config, [args.seed], {"records": out / "gap.csv"}, started)


def cmd_ingest(args, started):
    if (args.test_features is None) != (args.test_annotations is None):
        raise UsageError("--test-features and --test-annotations go together")
    manifest = ingest_external(args.features, args.labels, args.annotations, args.out,
                               args.test_features, args.test_annotations)
    out = Path(args.out)
    config = {"features": str(args.features), "labels": str(args.labels),
              "annotations": str(args.annotations), "test_features": args.test_features,
              "test_annotations": args.test_annotations}
    outputs = {name: out / rel for name, rel in manifest["files"].items()}
    _write_summary(out, "ingest", config, [], outputs, started)


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ill", description="Infinite-label learning with label codes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset directory")
    p.add_argument("--config", help="JSON file with synthetic world settings")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_world_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="fit a model on a dataset's seen labels")
    p.add_argument("--learner", choices=LEARNERS, required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model CSV path; a .json sidecar is written next to it")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="JSON file with hyperparameters")
    p.add_argument("--epochs", type=int)
    p.add_argument("--step0", type=float, help="initial step; overrides --step-base")
    p.add_argument("--step-base", type=float, help="initial step relative to the data scale")
    p.add_argument("--batch", help="mini-batch size or 'full'")
    p.add_argument("--gamma", type=float, help="RankNet regularizer")
    p.add_argument("--gamma-label", type=float)
    p.add_argument("--gamma-data", type=float)
    p.add_argument("--t", type=int, help="ConSE top-T")
    p.add_argument("--reg", type=float, help="ConSE classifier regularizer")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on a dataset's test split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--metrics", default="hamming,miap,topk")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--labels", choices=("seen", "unseen", "all"), default="all")
    p.add_argument("--bins", type=int, help="also report Hamming loss per distance bin of this size")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fig1c", help="Hamming loss by distance to the seen labels")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-seeds", type=int, default=5)
    p.add_argument("--config", help="JSON file with synthetic world settings")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--step-base", type=float, default=4.0)
    p.add_argument("--bin-size", type=int, default=500)
    p.add_argument("--against", choices=("flipped", "noiseless"), default="flipped")
    _add_world_flags(p)
    p.set_defaults(func=cmd_fig1c)

    p = sub.add_parser("sweep", help="metrics versus the fraction of labels seen in training")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-seeds", type=int, default=5)
    p.add_argument("--config", help="JSON file with sweep settings (and an optional 'world' object)")
    p.add_argument("--data", help="dataset directory to sweep over instead of the synthetic world")
    p.add_argument("--fractions", type=_floats)
    p.add_argument("--learners", type=lambda s: [v for v in s.split(",") if v])
    p.add_argument("--topk", type=int)
    p.add_argument("--epochs", type=int, help="RankNet epochs")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bound", help="evaluate the generalization bound")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--out", default=".", help="directory for bound.json and the run summary")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("gap", help="measured generalization gap versus the bound")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="JSON file with synthetic world settings")
    p.add_argument("--m-values", type=_ints, default=[100, 500, 2000])
    p.add_argument("--l-values", type=_ints, default=[10, 50, 200])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--m-mc", type=int, default=2000)
    p.add_argument("--l-mc", type=int, default=2000)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--step-base", type=float, default=4.0)
    _add_world_flags(p)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("ingest", help="validate external CSVs into a dataset directory")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--test-features")
    p.add_argument("--test-annotations")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        args.func(args, started)
    except UsageError as exc:
        if not exc.reported:
            print(f"ill: error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"ill: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
