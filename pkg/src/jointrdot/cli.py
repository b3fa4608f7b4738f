"""Command-line front end: ``gen-data``, ``train``, ``eval`` and ``report``.

Settings come from flags, then an optional ``--config`` file of ``key = value``
lines, then built-in defaults. Exit status is 0 on success, 2 for usage or
validation errors and 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import codec, data, rdot
from ._io import atomic_write_bytes, atomic_write_text
from .errors import EmptyInput, InvalidBeta, InvalidParams, RdotError
from .transforms import read_bank, write_bank

DEFAULT_QPS = (26, 27, 28, 29, 30, 31)
NA = "NA"


class UsageError(Exception):
    pass


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _str_list(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return list(text)
    return [p.strip() for p in str(text).split(",") if p.strip()]


# name -> (type, default) per command; flags default to None so that a config
# value can fill in whatever the command line left out
SETTINGS = {
    "gen-data": {
        "modes": (_str_list, list(data.MODES)),
        "blocks": (int, 10000),
        "size": (int, 8),
        "seed": (int, 0),
        "rho_along": (float, data.SynthParams.rho_along),
        "rho_across": (float, data.SynthParams.rho_across),
        "sigma": (float, data.SynthParams.sigma),
        "ramp": (float, data.SynthParams.ramp),
        "mixture_weight": (float, 0.0),
        "mixture_angle": (float, None),
        "out_dir": (str, "."),
    },
    "train": {
        "method": (str, "joint"),
        "learner": (str, "spgt"),
        "qp": (int, rdot.DEFAULT_QP),
        "n_secondary": (int, None),
        "beta": (float, rdot.DEFAULT_BETA),
        "max_iter": (int, rdot.DEFAULT_MAX_ITER),
        "tol": (float, rdot.DEFAULT_TOL),
        "report": (str, None),
    },
    "eval": {
        "qps": (_int_list, list(DEFAULT_QPS)),
        "label": (str, None),
        "out_csv": (str, None),
        "out_json": (str, None),
        "exhaustive": (lambda v: str(v).lower() in ("1", "true", "yes", "on"), False),
    },
    "report": {
        "out_json": (str, "report.json"),
        "out_csv": (str, "report.csv"),
        "series_csv": (str, None),
    },
}


def read_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from the defaults."""
    table = SETTINGS[args.command]
    config = read_config(args.config) if args.config else {}
    unknown = sorted(set(config) - set(table))
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    for name, (kind, default) in table.items():
        if getattr(args, name, None) is not None:
            continue
        if name in config:
            try:
                setattr(args, name, kind(config[name]))
            except ValueError as exc:
                raise UsageError(f"bad config value for {name}: {config[name]!r}") from exc
        else:
            setattr(args, name, default)
    return args


def _flag(p, name, kind=str, **kw):
    p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointrdot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write seeded synthetic residual datasets (one RSD1 file per mode)")
    _flag(g, "modes", _str_list, help="comma-separated mode labels (default: all 12)")
    _flag(g, "blocks", int, help="blocks per mode (default 10000)")
    _flag(g, "size", int, help="block size N, one of 4, 8, 16, 32 (default 8)")
    _flag(g, "seed", int, help="generator seed (default 0)")
    _flag(g, "rho_along", float)
    _flag(g, "rho_across", float)
    _flag(g, "sigma", float)
    _flag(g, "ramp", float)
    _flag(g, "mixture_weight", float, help="probability of the second component (default 0)")
    _flag(g, "mixture_angle", float, help="angle of the second component (default: mode angle + 90)")
    _flag(g, "out_dir", str, help="output directory (default .)")

    t = sub.add_parser("train", help="learn a six-slot transform bank from one dataset")
    _flag(t, "method", str, help="joint or tree (default joint)")
    _flag(t, "learner", str, help="spgt or sepklt (default spgt)")
    _flag(t, "qp", int, help="training QP (default 28)")
    _flag(t, "n_secondary", int, help="secondary size (default N*N/4)")
    _flag(t, "beta", float)
    _flag(t, "max_iter", int)
    _flag(t, "tol", float)
    _flag(t, "report", str, help="report JSON path (default: bank path with .json)")
    t.add_argument("dataset")
    t.add_argument("bank")

    e = sub.add_parser("eval", help="RD curves and BD-rate of a bank against the DCT/ADST baseline")
    _flag(e, "qps", _int_list, help="comma list or range, e.g. 26-31 (default 26..31)")
    _flag(e, "label", str, help="method name for the outputs (default: bank file stem)")
    _flag(e, "out_csv", str, help="curve CSV (default: bank path with .rd.csv)")
    _flag(e, "out_json", str, help="BD-rate JSON (default: bank path with .bd.json)")
    e.add_argument("--exhaustive", dest="exhaustive", action="store_const", const=True, default=None,
                   help="pick the cheapest of all six slots instead of primary-then-secondary")
    e.add_argument("bank")
    e.add_argument("dataset")

    r = sub.add_parser("report", help="merge eval outputs into a method x mode grid")
    _flag(r, "out_json", str)
    _flag(r, "out_csv", str)
    _flag(r, "series_csv", str, help="per-iteration RD totals from train reports")
    r.add_argument("inputs", nargs="+", help="eval JSON, grid JSON or train report JSON files")

    for p in (g, t, e, r):
        p.add_argument("--config", default=None, help="key = value settings file")
    return parser


def _say(text: str) -> None:
    print(text, flush=True)


def _warn(text: str) -> None:
    print(f"warning: {text}", file=sys.stderr, flush=True)


def cmd_gen_data(args) -> int:
    for m in args.modes:
        data.check_mode(m)
    if args.size not in data.BLOCK_SIZES:
        raise InvalidParams(f"--size must be one of {data.BLOCK_SIZES}")
    out_dir = Path(args.out_dir)
    for mode in args.modes:
        mixture = None
        if args.mixture_weight > 0:
            angle = args.mixture_angle
            if angle is None:
                angle = (data.MODE_ANGLES.get(mode, 0.0) + 90.0) % 180.0
            mixture = data.Mixture(args.mixture_weight, angle)
        params = data.SynthParams(args.rho_along, args.rho_across, args.sigma, args.ramp, mixture=mixture)
        ds = data.synth_residuals(mode, args.blocks, args.size, params, args.seed)
        payload = data.dataset_to_bytes(ds)
        path = out_dir / f"{mode}.rsd"
        atomic_write_bytes(path, payload)
        _say(f"{path}\tmode={mode}\tN={args.size}\tM={args.blocks}\tsha256={hashlib.sha256(payload).hexdigest()}")
    return 0


def cmd_train(args) -> int:
    if args.method not in ("joint", "tree"):
        raise InvalidParams("--method must be joint or tree")
    if args.learner not in ("spgt", "sepklt"):
        raise InvalidParams("--learner must be spgt or sepklt")
    learner = rdot.Learner(args.learner)
    ds = data.read_dataset(args.dataset)
    if len(ds) == 0:
        raise EmptyInput("dataset has no blocks")
    q = rdot.QuantConfig(args.qp)
    bank, _, report = rdot.train(args.method, ds.as_float(), q, learner, n_secondary=args.n_secondary,
                                 beta=args.beta, max_iter=args.max_iter, tol=args.tol, mode_label=ds.mode)
    write_bank(bank, args.bank)
    report_path = args.report or str(Path(args.bank).with_suffix(".json"))
    atomic_write_text(report_path, report.to_json())
    _say(f"RD_Total {report.final_rd_total!r} iterations={report.iteration_count} "
         f"converged={report.converged} clusters={report.cluster_sizes}")
    return 0


def cmd_eval(args) -> int:
    if len(args.qps) < 4:
        raise InvalidParams(f"BD-rate needs at least 4 QPs, got {len(args.qps)}")
    bank = read_bank(args.bank)
    ds = data.read_dataset(args.dataset)
    if ds.block_size != bank.block_size:
        raise InvalidParams(f"bank is for {bank.block_size}x{bank.block_size} blocks, dataset has {ds.block_size}")
    label = args.label or Path(args.bank).stem
    blocks = ds.as_float()
    base = codec.evaluate(blocks, codec.Baseline(bank.block_size), args.qps)
    test = codec.evaluate(blocks, bank, args.qps, exhaustive=args.exhaustive)
    bd = codec.bd_rate(base, test)

    stem = Path(args.bank)
    csv_text = codec.curve_to_csv(base, "baseline") + codec.curve_to_csv(test, label).split("\n", 1)[1]
    atomic_write_text(args.out_csv or str(stem.with_suffix(".rd.csv")), csv_text)
    summary = {
        "method": label,
        "mode": ds.mode or bank.mode_label,
        "block_size": bank.block_size,
        "qps": list(args.qps),
        "bd_rate": bd.percent,
        "overlap_interval": list(bd.overlap_interval),
    }
    atomic_write_text(args.out_json or str(stem.with_suffix(".bd.json")),
                      json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _say(f"BD-rate {label} vs baseline [{summary['mode']}]: {bd.percent:+.4f}%")
    return 0


def grid_to_csv(grid: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method"] + grid["modes"])
    for method in grid["methods"]:
        row = grid["bd_rate"][method]
        w.writerow([method] + [v if v == NA else repr(float(v)) for v in (row[m] for m in grid["modes"])])
    return buf.getvalue()


def cmd_report(args) -> int:
    cells: dict = {}
    series = []
    for path in args.inputs:
        doc = json.loads(Path(path).read_text())
        if "methods" in doc and "bd_rate" in doc and isinstance(doc["bd_rate"], dict):
            for method in doc["methods"]:
                for mode, value in doc["bd_rate"][method].items():
                    if value != NA:
                        cells.setdefault(method, {})[mode] = float(value)
                    else:
                        cells.setdefault(method, {})
        elif "bd_rate" in doc and "method" in doc:
            cells.setdefault(doc["method"], {})[doc["mode"]] = float(doc["bd_rate"])
        elif "iterations" in doc:
            series.append((Path(path).stem, doc))
        else:
            raise InvalidParams(f"{path}: not an eval, grid or train report JSON")

    if not cells and not series:
        raise InvalidParams("no usable inputs")
    methods = sorted(cells)
    grid = {"modes": list(data.MODES), "methods": methods, "bd_rate": {}}
    for method in methods:
        row = {m: cells[method].get(m, NA) for m in data.MODES}
        missing = [m for m, v in row.items() if v == NA]
        if missing:
            _warn(f"{method}: no result for {', '.join(missing)} (marked {NA})")
        grid["bd_rate"][method] = row
    if methods:
        atomic_write_text(args.out_json, json.dumps(grid, indent=2, sort_keys=True) + "\n")
        atomic_write_text(args.out_csv, grid_to_csv(grid))
        _say(f"wrote {args.out_json} and {args.out_csv} ({len(methods)} methods x {len(data.MODES)} modes)")

    if series:
        if not args.series_csv:
            _warn("train reports given but no --series-csv; RD series not written")
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["run", "method", "learner", "mode", "iteration", "rd_total"])
            for name, doc in series:
                for k, v in enumerate(doc["iterations"]):
                    w.writerow([name, doc.get("method", ""), doc.get("learner", ""), doc.get("mode", ""),
                                k, repr(float(v))])
            atomic_write_text(args.series_csv, buf.getvalue())
            _say(f"wrote {args.series_csv} ({len(series)} runs)")
    return 0


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = resolve(args)
    except (UsageError, OSError) as exc:
        parser.error(str(exc))
    # BLAS stays single-threaded; block-level parallelism comes from RDOT_THREADS
    with threadpool_limits(limits=1):
        try:
            return COMMANDS[args.command](args)
        except (InvalidParams, InvalidBeta, UsageError) as exc:
            print(f"jointrdot {args.command}: error: {exc}", file=sys.stderr)
            return 2
        except (RdotError, OSError) as exc:
            print(f"jointrdot {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1


if __name__ == "__main__":
    sys.exit(main())
