"""Command-line entry point.

Every subcommand writes newline-delimited JSON records to stdout (or
``--output``). Runs over a dataset end with a ``kind: summary`` record.
Exit codes: 0 success, 2 bad input, 3 model not large-spread, 4 resource cap.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .bench import run_bench
from .data import LabeledDataset, load_dataset, stratified_split, write_csv
from .errors import InputError, SpreadGBTError
from .model import Attacker
from .modelio import load_model, save_model
from .oracle import SSPInstance, ssp_gadget, ssp_solve_bruteforce
from .trainer import LEAF_GRID, TrainConfig, fit, grid_fit
from .verifier import ENGINES, Verifier, verify_dataset

log = logging.getLogger("spreadgbt")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite(v):
    # JSON has no infinities
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


class RecordWriter:
    def __init__(self, stream):
        self.stream = stream

    def write(self, record: dict) -> None:
        clean = {k: _finite(v) for k, v in record.items()}
        self.stream.write(json.dumps(clean, default=_json_default, sort_keys=False) + "\n")
        self.stream.flush()


@contextmanager
def _records(path):
    if path in (None, "-"):
        yield RecordWriter(sys.stdout)
    else:
        with open(path, "w") as fh:
            yield RecordWriter(fh)


# -- argument helpers ------------------------------------------------------

def _attacker(args) -> Attacker:
    return Attacker.parse(args.norm, args.budget, args.precision_ell)


def _add_attacker(p, required=True):
    p.add_argument("--norm", required=required, help="inf or an integer p >= 0")
    p.add_argument("--budget", type=float, required=required, help="perturbation budget k")
    p.add_argument("--precision-ell", type=int, default=6,
                   help="decimal digits kept for fractional Lp weights (ignored for 0 and inf)")


def _add_model(p):
    p.add_argument("model", help="native JSON model or LightGBM dump")
    p.add_argument("--link", choices=["identity", "logistic"],
                   help="override the stored inverse link")
    p.add_argument("--tau", type=float, help="override the stored decision threshold")


def _add_dataset(p, name="data"):
    p.add_argument(name, help="CSV with a header row, or libsvm rows")
    p.add_argument("--format", choices=["csv", "libsvm"], help="default: from the suffix")
    p.add_argument("--label", default="label", help="label column of a CSV file")


def _load_model(args):
    return load_model(args.model, link=args.link, tau=args.tau)


def _load_data(path, args, n_features=None) -> LabeledDataset:
    return load_dataset(path, args.format, args.label, n_features)


def _load_pair(args):
    ens = _load_model(args)
    ds = _load_data(args.data, args, ens.n_features)
    if ds.n_features != ens.n_features:
        raise InputError(f"dataset has {ds.n_features} features, model expects {ens.n_features}")
    return ens, ds


# -- subcommands -----------------------------------------------------------

def cmd_train(args, out: RecordWriter) -> int:
    train = _load_data(args.train, args)
    d = train.n_features
    valid = _load_data(args.valid, args, d) if args.valid else None
    if valid is not None and valid.n_features != d:
        raise InputError(f"validation set has {valid.n_features} features, training has {d}")
    spread = None
    if args.norm is not None or args.budget is not None:
        if args.norm is None or args.budget is None:
            raise InputError("--norm and --budget must be given together")
        spread = _attacker(args)
    cfg = TrainConfig(max_trees=args.max_trees, learning_rate=args.learning_rate,
                      max_leaves=args.max_leaves, min_samples_per_leaf=args.min_samples_per_leaf,
                      early_stopping_rounds=args.early_stopping_rounds, spread=spread,
                      reg_lambda=args.reg_lambda, link=args.link_out, seed=args.seed)
    Xv = valid.X if valid is not None else None
    yv = valid.y if valid is not None else None
    if args.grid:
        if valid is None:
            raise InputError("--grid needs a validation set")
        acc, leaves, res = grid_fit(train.X, train.y, Xv, yv, cfg, LEAF_GRID)
        out.write({"kind": "grid", "selected_max_leaves": leaves, "valid_accuracy": acc})
    else:
        res = fit(train.X, train.y, Xv, yv, cfg)
    save_model(res.ensemble, args.out)
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.jsonl")
    with open(log_path, "w") as fh:
        for entry in res.log:
            fh.write(json.dumps(entry) + "\n")
    rec = {"kind": "summary", "model": str(args.out), "log": str(log_path),
           "trees": res.ensemble.n_trees, "nodes": res.ensemble.n_nodes,
           "stop_reason": res.stop_reason, "best_round": res.best_round}
    if spread is not None:
        rec["large_spread"] = Verifier(res.ensemble, spread, check_spread=False).spread.is_large_spread
    out.write(rec)
    return 0


def cmd_spread(args, out: RecordWriter) -> int:
    ens = _load_model(args)
    rep = Verifier(ens, _attacker(args), check_spread=False).spread
    out.write({"kind": "spread", **rep.to_record(), "detail": rep.describe()})
    return 0


def _summary(res, engine, attacker, elapsed):
    return {**res.to_record(), "engine": engine, "norm": attacker.norm_name,
            "budget": attacker.k, "wall_time_s": round(elapsed, 6)}


def cmd_verify(args, out: RecordWriter) -> int:
    ens, ds = _load_pair(args)
    attacker = _attacker(args)
    engine = args.engine
    ver = Verifier(ens, attacker, check_spread=(engine != "oracle"), max_cells=args.max_cells)
    kw = {}
    if engine == "oracle":
        kw = {"timeout_ms": args.timeout_ms, "max_tuples": args.max_tuples}
    t0 = time.perf_counter()
    res = verify_dataset(ens, ds.X, ds.y, attacker, engine, args.workers, ver, **kw)
    elapsed = time.perf_counter() - t0
    for r in res.reports:
        out.write(r.to_record())
    out.write(_summary(res, engine, attacker, elapsed))
    return 0


def cmd_attack(args, out: RecordWriter) -> int:
    """BV on every instance; emit a witness for each one that can be flipped."""
    ens, ds = _load_pair(args)
    attacker = _attacker(args)
    ver = Verifier(ens, attacker, max_cells=args.max_cells)
    t0 = time.perf_counter()
    res = verify_dataset(ens, ds.X, ds.y, attacker, "bv", args.workers, ver)
    elapsed = time.perf_counter() - t0
    n_witness = 0
    for r in res.reports:
        if r.status not in ("not_robust", "misclassified"):
            continue
        x = ds.X[r.index]
        z = x + r.delta_opt
        pred = ens.classify(z)
        n_witness += 1
        out.write({"kind": "witness", "index": r.index, "label": r.label,
                   "status": r.status, "delta": r.delta_opt, "perturbed": z,
                   "perturbed_prediction": pred, "flipped": bool(pred != r.label),
                   "norm_value": float(np.linalg.norm(r.delta_opt, ord=attacker.p))
                   if attacker.p != 0 else int(np.count_nonzero(r.delta_opt))})
    out.write({**_summary(res, "bv", attacker, elapsed), "witnesses": n_witness})
    return 0


def cmd_oracle(args, out: RecordWriter) -> int:
    args.engine = "oracle"
    return cmd_verify(args, out)


def cmd_gadget(args, out: RecordWriter) -> int:
    """Write the hard-instance model and its single instance as ordinary files."""
    inst = SSPInstance(tuple(args.values), args.target)
    p = math.inf if args.norm == "inf" else int(args.norm)
    ens, x, attacker, y = ssp_gadget(inst, p, args.precision_ell)
    save_model(ens, args.out_model)
    write_csv(LabeledDataset(x[None, :], np.array([y])), args.out_data)
    rec = {"kind": "gadget", "model": str(args.out_model), "data": str(args.out_data),
           "norm": attacker.norm_name, "budget": attacker.k, "label": y,
           "n_trees": ens.n_trees, "n_features": ens.n_features}
    if len(inst.values) <= 20:
        rec["subset_exists"] = ssp_solve_bruteforce(inst)
    out.write(rec)
    return 0


def cmd_bench(args, out: RecordWriter) -> int:
    attacker = _attacker(args)
    rows = run_bench(args.trees, args.depth, attacker, n_instances=args.instances,
                     seed=args.seed, run_oracle=not args.no_oracle,
                     n_features=args.features, max_tuples=args.max_tuples,
                     value_range=args.value_range)
    for r in rows:
        out.write(r.to_record())
    return 0


def cmd_split(args, out: RecordWriter) -> int:
    ds = _load_data(args.data, args)
    parts = stratified_split(ds, tuple(args.fractions), args.seed)
    prefix = args.out_prefix
    for name, part in zip(("train", "valid", "test"), parts):
        path = f"{prefix}{name}.csv"
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        write_csv(part, path, args.label)
        out.write({"kind": "split", "part": name, "path": path, "rows": len(part)})
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spreadgbt",
                                 description="Robustness verification for large-spread tree ensembles")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a boosted ensemble, optionally large-spread")
    _add_dataset(p, "train")
    p.add_argument("--valid", help="validation set (enables early stopping)")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--log", help="training log (default: <out>.log.jsonl)")
    p.add_argument("--norm", help="attacker norm for the spread constraint")
    p.add_argument("--budget", type=float, help="attacker budget for the spread constraint")
    p.add_argument("--precision-ell", type=int, default=6, help=argparse.SUPPRESS)
    p.add_argument("--grid", action="store_true",
                   help=f"try max_leaves in {list(LEAF_GRID)} and keep the best on validation")
    p.add_argument("--max-trees", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--max-leaves", type=int, default=16)
    p.add_argument("--min-samples-per-leaf", type=int, default=20)
    p.add_argument("--early-stopping-rounds", type=int, default=50)
    p.add_argument("--reg-lambda", type=float, default=1.0)
    p.add_argument("--link-out", choices=["identity", "logistic"], default="logistic",
                   help="inverse link stored in the model")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("spread", help="report the p-spread of a model")
    _add_model(p)
    _add_attacker(p)
    p.set_defaults(func=cmd_spread)

    for name, func, helptext in (("verify", cmd_verify, "verify every instance of a dataset"),
                                 ("attack", cmd_attack, "emit optimal evasion witnesses"),
                                 ("oracle", cmd_oracle, "exhaustive verification, any model")):
        p = sub.add_parser(name, help=helptext)
        _add_model(p)
        _add_dataset(p)
        _add_attacker(p)
        if name == "verify":
            p.add_argument("--engine", choices=ENGINES, default="ev")
        if name != "attack":
            p.add_argument("--timeout-ms", type=float, help="per-instance oracle deadline")
            p.add_argument("--max-tuples", type=int, default=10 ** 6,
                           help="oracle leaf-tuple cap")
        p.add_argument("--max-cells", type=int, help="knapsack table cell cap")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--output", help="write records here instead of stdout")
        p.set_defaults(func=func)

    p = sub.add_parser("gadget", help="write a subset-sum hard instance as model + data")
    p.add_argument("--values", type=int, nargs="+", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--norm", default="1", choices=["0", "1", "2", "3", "4"])
    p.add_argument("--precision-ell", type=int, default=3)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-data", required=True)
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("bench", help="time EV against the oracle on generated models")
    _add_attacker(p)
    p.add_argument("--trees", type=int, nargs="+", default=[2, 4, 6, 8, 10, 12, 14])
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--features", type=int, help="default: twice the tree count")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--value-range", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tuples", type=int, default=10 ** 7)
    p.add_argument("--no-oracle", action="store_true")
    p.add_argument("--output", help="write records here instead of stdout")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("split", help="stratified train/valid/test split")
    _add_dataset(p)
    p.add_argument("--fractions", type=float, nargs=3, default=[0.55, 0.15, 0.30])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True, help="files are <prefix>{train,valid,test}.csv")
    p.set_defaults(func=cmd_split)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        with _records(getattr(args, "output", None)) as out:
            return args.func(args, out)
    except SpreadGBTError as e:
        print(f"spreadgbt: error: {e}", file=sys.stderr)
        return e.exit_code
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except OSError as e:
        print(f"spreadgbt: error: {e}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
