"""Command-line surface: kernel building, selection, synthetic studies,
trend CSVs and mixture training.

Every command writes JSON/CSV outputs plus a run manifest with a config
digest.  Errors print a structured JSON object on stderr; exit code 2
flags configuration problems, 3 numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DivergedLoss, NotPositiveDefinite, PrismError
from .kernels import (
    apply_scaling,
    clip_nonnegative,
    compute_kernel,
    load_features,
    load_kernel,
    save_kernel,
)
from .learn import MixtureModel, load_training_manifest, train
from .measures import MeasureSpec, preset
from .optimize import BudgetConfig, lazy_greedy, naive_greedy, stochastic_greedy
from .pipeline import TargetedJob, run_partitioned, run_targeted
from .synthbench import (
    DEFAULT_STD_GRID,
    collection_kernel,
    generate_collection,
    save_collection,
    trend_study,
    write_trend_csv,
)

_CONFIG_EXIT = 2
_NUMERIC_EXIT = 3

_METRIC_ALIASES = {"dot": "dot", "cosine": "cosine", "rbf": "euclidean_rbf"}


def _resolve_threads(args) -> int:
    env = os.environ.get("PRISM_THREADS")
    if env is not None:
        return int(env)
    if getattr(args, "threads", None):
        return args.threads
    return os.cpu_count() or 1


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _write_manifest(args, outputs, started) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}
    manifest = {
        "command": args.command,
        "config_digest": _digest(cfg),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "threads": _resolve_threads(args),
        "wall_clock_s": round(time.time() - started, 3),
        "outputs": [str(o) for o in outputs],
    }
    out = Path(outputs[0])
    manifest_path = out.with_name(out.name + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2))


def _load_features_arg(path):
    path = Path(path)
    fmt = "csv" if path.suffix == ".csv" else "binary_f32"
    return load_features(path, format=fmt)


def _spec_from_args(args) -> MeasureSpec:
    if getattr(args, "preset", None):
        return preset(args.preset)
    params = {}
    if args.lam is not None:
        params["lam"] = args.lam
    if args.eta is not None:
        params["eta"] = args.eta
    if args.nu is not None:
        params["nu"] = args.nu
    if getattr(args, "psi", None):
        params["psi"] = args.psi
    if args.variant:
        return MeasureSpec(family=args.family.upper(), variant=args.variant.upper(), **params)
    return MeasureSpec.from_name(args.family, **params)


def cmd_kernel(args) -> list:
    fv = _load_features_arg(args.features_v)
    fq = _load_features_arg(args.features_q) if args.features_q else None
    fp = _load_features_arg(args.features_p) if args.features_p else None
    k = compute_kernel(fv, fq, fp, metric=_METRIC_ALIASES[args.metric], sigma=args.sigma)
    if args.eta != 1.0 or args.nu != 1.0:
        k = apply_scaling(k, args.eta, args.nu)
    if args.clip:
        k = clip_nonnegative(k)
    save_kernel(args.out, k)
    return [args.out]


def cmd_select(args) -> list:
    spec = _spec_from_args(args)
    if args.kernel:
        kernel = load_kernel(args.kernel)
        cfg = BudgetConfig(budget=args.budget)
        if args.algo == "naive":
            sel = naive_greedy(spec, kernel, cfg)
        elif args.algo == "stochastic":
            sel = stochastic_greedy(spec, kernel, cfg, seed=args.seed, epsilon=args.epsilon)
        else:
            sel = lazy_greedy(spec, kernel, cfg)
    else:
        if not args.features_v:
            raise argparse.ArgumentTypeError("either --kernel or --features-v is required")
        job = TargetedJob(
            unlabeled_features=_load_features_arg(args.features_v),
            spec=spec,
            budget=args.budget,
            target_features=_load_features_arg(args.features_q) if args.features_q else None,
            private_features=_load_features_arg(args.features_p) if args.features_p else None,
            partitions=args.partitions,
            seed=args.seed,
            metric=_METRIC_ALIASES[args.metric],
            algo=args.algo,
            epsilon=args.epsilon,
        )
        sel = run_partitioned(job) if args.partitions > 1 else run_targeted(job)
    Path(args.out).write_text(json.dumps(sel.to_json(), indent=2))
    return [args.out]


def cmd_synth(args) -> list:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for i, seed in enumerate(args.seeds):
        std = args.std_dev_grid[i % len(args.std_dev_grid)]
        c = generate_collection(seed, std_dev=std)
        cpath = outdir / f"collection_{seed}.json"
        save_collection(cpath, c)
        save_kernel(outdir / f"kernel_{seed}", collection_kernel(c))
        outputs.append(cpath)
    return outputs


def cmd_trend(args) -> list:
    if args.specs:
        spec_objs = [MeasureSpec.from_json(s) for s in json.loads(Path(args.specs).read_text())]
    else:
        spec_objs = [
            MeasureSpec.from_name(n)
            for n in ("flqmi", "flvmi", "gcmi", "flcg", "gccg", "logdetcg")
        ]
    rows = trend_study(
        spec_objs,
        eta_grid=args.eta_grid,
        nu_grid=args.nu_grid,
        budgets=args.budgets,
        n_collections=args.collections,
        seed=args.seed,
    )
    write_trend_csv(rows, args.out)
    return [args.out]


def cmd_learn(args) -> list:
    examples = load_training_manifest(args.train_manifest)
    if args.model:
        model = MixtureModel.from_json(json.loads(Path(args.model).read_text()))
    else:
        model = MixtureModel(
            components=[MeasureSpec.from_name("flqmi"), MeasureSpec.from_name("gcmi")],
            weights=np.array([1.0, 1.0]),
            reg=args.reg,
        )
    report = train(
        model, examples, epochs=args.epochs, lr=args.lr, momentum=args.momentum, seed=args.seed
    )
    Path(args.out).write_text(json.dumps(report.to_json(), indent=2))
    return [args.out]


def _float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prismsel")
    ap.add_argument("--threads", type=int, default=None, help="worker bound (PRISM_THREADS overrides)")
    sub = ap.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="build and save a kernel archive")
    k.add_argument("--features-v", required=True)
    k.add_argument("--features-q")
    k.add_argument("--features-p")
    k.add_argument("--metric", choices=sorted(_METRIC_ALIASES), default="cosine")
    k.add_argument("--sigma", type=float, default=None)
    k.add_argument("--eta", type=float, default=1.0)
    k.add_argument("--nu", type=float, default=1.0)
    k.add_argument("--clip", action="store_true")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_kernel)

    s = sub.add_parser("select", help="greedy subset selection")
    s.add_argument("--kernel")
    s.add_argument("--features-v")
    s.add_argument("--features-q")
    s.add_argument("--features-p")
    s.add_argument("--metric", choices=sorted(_METRIC_ALIASES), default="cosine")
    s.add_argument("--family", default="flqmi", help="family or short measure name")
    s.add_argument("--variant", default=None)
    s.add_argument("--lambda", dest="lam", type=float, default=None)
    s.add_argument("--eta", type=float, default=None)
    s.add_argument("--nu", type=float, default=None)
    s.add_argument("--psi", default=None)
    s.add_argument("--preset")
    s.add_argument("--budget", type=int, required=True)
    s.add_argument("--algo", choices=("naive", "lazy", "stochastic"), default="lazy")
    s.add_argument("--epsilon", type=float, default=0.01)
    s.add_argument("--partitions", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select)

    y = sub.add_parser("synth", help="generate synthetic collections")
    y.add_argument("--seeds", type=_int_list, default=list(range(10)))
    y.add_argument("--std-dev-grid", type=_float_list, default=list(DEFAULT_STD_GRID))
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--out", required=True)
    y.set_defaults(func=cmd_synth)

    t = sub.add_parser("trend", help="parameter trend study CSV")
    t.add_argument("--specs", help="JSON file with a list of measure specs")
    t.add_argument("--eta-grid", type=_float_list, default=[0.0, 0.5, 1.0, 2.0])
    t.add_argument("--nu-grid", type=_float_list, default=[0.0, 0.5, 1.0, 2.0])
    t.add_argument("--budgets", type=_int_list, default=list(range(5, 45, 5)))
    t.add_argument("--collections", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_trend)

    l = sub.add_parser("learn", help="train a measure mixture")
    l.add_argument("--train-manifest", required=True)
    l.add_argument("--model", help="initial MixtureModel JSON")
    l.add_argument("--epochs", type=int, default=20)
    l.add_argument("--lr", type=float, default=0.01)
    l.add_argument("--momentum", type=float, default=0.9)
    l.add_argument("--reg", type=float, default=0.0)
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--out", required=True)
    l.set_defaults(func=cmd_learn)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        started = time.time()
        outputs = args.func(args)
        _write_manifest(args, outputs, started)
        return 0
    except (NotPositiveDefinite, DivergedLoss) as e:
        _emit_error(e, _NUMERIC_EXIT)
        return _NUMERIC_EXIT
    except (PrismError, argparse.ArgumentTypeError, FileNotFoundError, KeyError, ValueError) as e:
        _emit_error(e, _CONFIG_EXIT)
        return _CONFIG_EXIT


def _emit_error(e, code) -> None:
    sys.stderr.write(
        json.dumps({"error": type(e).__name__, "message": str(e), "exit_code": code}) + "\n"
    )


if __name__ == "__main__":
    sys.exit(main())
