"""Command-line entry point: batch reports as JSON, optional 2D SVG figures."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from decregions import __version__
from decregions.certify import certify
from decregions.connectivity import (
    PathPreconditionError, analyze, build_adjacency, class_pieces, component_report,
    connected_components, find_path,
)
from decregions.geometry import EPS_FEAS, RANK_TOL, GeometryError, Polyhedron
from decregions.lp import LPError
from decregions.netmodel import LeakyReLU, NetworkError, builtin, load_network
from decregions.preimage import PreimageSizeError, decision_region_backward
from decregions.regions import UnsupportedActivation, box_bound_of, enumerate_cells
from decregions.svg import render_union
from decregions.train import GENERATORS, TrainConfig, TrainingDiverged, dataset_from_csv, train

EXIT_OK, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 2, 3


class CliError(Exception):
    def __init__(self, code: str, message: str, exit_code: int = EXIT_PRECONDITION):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code


# (exception type, module-qualified code, exit code); first match wins
_ERRORS = (
    (CliError, None, None),
    (NetworkError, "netmodel.invalid_network", EXIT_PRECONDITION),
    (UnsupportedActivation, "regions.unsupported_activation", EXIT_PRECONDITION),
    (PreimageSizeError, "preimage.too_many_orthants", EXIT_PRECONDITION),
    (PathPreconditionError, "connectivity.path_precondition", EXIT_PRECONDITION),
    (TrainingDiverged, "train.diverged", EXIT_NUMERICAL),
    (LPError, "lp.numerical_failure", EXIT_NUMERICAL),
    (GeometryError, "geometry.invalid_input", EXIT_PRECONDITION),
    (OSError, "cli.io_error", EXIT_PRECONDITION),
    (ValueError, "cli.invalid_argument", EXIT_PRECONDITION),
)


def _network(args):
    if args.builtin is not None:
        try:
            return builtin(args.builtin), {"builtin": args.builtin}
        except KeyError as e:
            raise CliError("netmodel.unknown_builtin", str(e.args[0])) from None
    if args.network is None:
        raise CliError("cli.missing_network", "one of --network or --builtin is required")
    return load_network(Path(args.network).read_bytes()), {"path": str(args.network)}


def _settings(args, **extra) -> dict:
    out = {"box_half_width": args.box, "eps": args.eps, "rank_tol": args.rank_tol,
           "engine": args.engine, "seed": args.seed}
    out.update(extra)
    return out


def _class_list(args, net) -> list[int]:
    if args.class_index is None:
        return list(range(1, net.n_classes + 1))
    if not 1 <= args.class_index <= net.n_classes:
        raise CliError("cli.bad_class", f"class {args.class_index} not in 1..{net.n_classes}")
    return [args.class_index]


def _write_svg(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def cmd_certify(args) -> dict:
    net, source = _network(args)
    return {"network": source, "settings": _settings(args), "certificate":
            certify(net, args.rank_tol).to_json()}


def cmd_regions(args) -> dict:
    net, source = _network(args)
    box = Polyhedron.box(net.input_dim, args.box)
    cells = enumerate_cells(net, box, args.eps)
    if args.svg and net.input_dim == 2:
        _write_svg(args.svg, render_union(((k, [c.cell]) for k, c in enumerate(cells)),
                                          args.box, f"{len(cells)} activation regions"))
    return {"network": source, "settings": _settings(args, engine="forward"),
            "count": len(cells), "cells": [c.to_json() for c in cells]}


def cmd_connectivity(args) -> dict:
    net, source = _network(args)
    reports = analyze(net, args.box, args.eps, args.engine)
    classes = _class_list(args, net)
    if args.svg and net.input_dim == 2:
        # every component gets its own palette slot, in class order
        groups, slot = [], 0
        half = max(reports[j].box_half_width for j in classes)
        box = Polyhedron.box(2, half)
        for j in classes:
            pieces = class_pieces(net, j, box, args.eps, args.engine)
            graph = build_adjacency(pieces, net, j, args.eps, box_bound_of(box))
            for ids in connected_components(graph):
                groups.append((slot, [pieces[n] for n in ids]))
                slot += 1
        _write_svg(args.svg, render_union(groups, half, "components"))
    return {"network": source, "settings": _settings(args),
            "classes": [reports[j].to_json() for j in classes]}


def cmd_preimage(args) -> dict:
    net, source = _network(args)
    j = args.class_index or 1
    box = Polyhedron.box(net.input_dim, args.box)
    _, trace = decision_region_backward(net, j, box, args.eps)
    if args.svg:
        stem = Path(args.svg)
        for i, stage in enumerate(trace.stages):
            if stage.union.dim != 2:
                continue
            out = stem.with_name(f"{stem.stem}-{i:02d}-{stage.label}{stem.suffix or '.svg'}")
            _write_svg(out, render_union([(j - 1, stage.union.pieces)], args.box, stage.title))
    return {"network": source, "settings": _settings(args, engine="backward"),
            "trace": trace.to_json()}


def cmd_path(args) -> dict:
    net, source = _network(args)
    j = args.class_index or 1
    x, y = np.array(args.x, float), np.array(args.y, float)
    for name, p in (("--x", x), ("--y", y)):
        if p.shape != (net.input_dim,):
            raise CliError("cli.bad_point", f"{name} needs {net.input_dim} coordinates")
        if np.abs(p).max() >= args.box:
            raise CliError("cli.bad_point", f"{name} lies outside the analysis box")
    box = Polyhedron.box(net.input_dim, args.box)
    pieces = class_pieces(net, j, box, args.eps, args.engine)
    report, graph = component_report(pieces, net, j, box, args.eps, with_hulls=False)
    result = find_path(graph, pieces, x, y, net, j, args.samples, args.eps)
    if args.svg and net.input_dim == 2:
        groups = [(k, [pieces[n] for n in c.pieces]) for k, c in enumerate(report.components)]
        line = result.polyline if hasattr(result, "polyline") else None
        _write_svg(args.svg, render_union(groups, args.box, f"class {j}", line))
    return {"network": source, "settings": _settings(args, samples_per_segment=args.samples),
            "class_index": j, "x": x.tolist(), "y": y.tolist(), "result": result.to_json()}


def _widths(text: str) -> list[int]:
    try:
        w = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad width list {text!r}") from None
    if not w or min(w) < 1:
        raise argparse.ArgumentTypeError("widths must be positive integers")
    return w


def cmd_train(args) -> dict:
    seed = args.seed if args.seed is not None else 0
    if args.data:
        ds = dataset_from_csv(Path(args.data).read_text(encoding="utf-8"), args.data, seed)
    else:
        ds = GENERATORS[args.generator](args.n_per_class, seed)
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, momentum=args.momentum,
                      batch_size=args.batch_size, seed=seed)
    t0 = time.perf_counter()
    net, history = train(ds, args.widths, LeakyReLU(args.alpha), cfg)
    elapsed = time.perf_counter() - t0
    if args.save:
        Path(args.save).write_text(net.dumps(), encoding="utf-8")
    if args.history:
        Path(args.history).write_text(history.to_csv(), encoding="utf-8")
    out = {"dataset": {"name": ds.name, "size": len(ds), "seed": seed},
           "settings": _settings(args, seed=seed, widths=args.widths, alpha=args.alpha,
                                 epochs=args.epochs, learning_rate=args.lr,
                                 momentum=args.momentum, batch_size=args.batch_size),
           "training": {"final_loss": history.loss[-1], "final_errors": history.errors[-1],
                        "seconds": round(elapsed, 3)},
           "network": net.to_json(),
           "certificate": certify(net, args.rank_tol).to_json()}
    if net.input_dim == 2:
        reports = analyze(net, args.box, args.eps, args.engine)
        out["classes"] = [r.to_json() for r in reports.values()]
    return out


COMMANDS = {"certify": cmd_certify, "regions": cmd_regions, "connectivity": cmd_connectivity,
            "preimage": cmd_preimage, "path": cmd_path, "train": cmd_train}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--network", metavar="PATH", help="network JSON file")
    src.add_argument("--builtin", metavar="NAME",
                     help="eq4-nonpyramidal, eq5-relu, lowrank-strips(A), tight-2-3-2(A)")
    common.add_argument("--class", dest="class_index", type=int, metavar="J",
                        help="1-based class index")
    common.add_argument("--box", type=float, default=8.0, metavar="B",
                        help="analysis box half-width (default 8)")
    common.add_argument("--eps", type=float, default=EPS_FEAS, metavar="E",
                        help="interior slack threshold")
    common.add_argument("--rank-tol", type=float, default=RANK_TOL, metavar="T")
    common.add_argument("--engine", choices=("forward", "backward"), default="forward")
    common.add_argument("--svg", metavar="PATH", help="write a 2D SVG figure")
    common.add_argument("--json", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, metavar="S")

    p = argparse.ArgumentParser(prog="decregions", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("certify", parents=[common], help="check the connectivity hypotheses")
    sub.add_parser("regions", parents=[common], help="enumerate activation regions")
    sub.add_parser("connectivity", parents=[common], help="count decision-region components")
    sub.add_parser("preimage", parents=[common], help="backward construction trace")
    pp = sub.add_parser("path", parents=[common], help="path certificate between two points")
    pp.add_argument("--x", type=float, nargs="+", required=True, metavar="X")
    pp.add_argument("--y", type=float, nargs="+", required=True, metavar="Y")
    pp.add_argument("--samples", type=int, default=256, help="validation samples per segment")
    tp = sub.add_parser("train", parents=[common], help="train a small MLP, then analyze it")
    tp.add_argument("--generator", choices=sorted(GENERATORS), default="two_islands")
    tp.add_argument("--data", metavar="CSV", help="train on a CSV dataset instead")
    tp.add_argument("--n-per-class", type=int, default=100)
    tp.add_argument("--widths", type=_widths, default=[2], help="hidden widths, e.g. 5,3")
    tp.add_argument("--alpha", type=float, default=0.1, help="leaky ReLU slope")
    tp.add_argument("--epochs", type=int, default=1000)
    tp.add_argument("--lr", type=float, default=0.1)
    tp.add_argument("--momentum", type=float, default=0.9)
    tp.add_argument("--batch-size", type=int, default=32)
    tp.add_argument("--save", metavar="PATH", help="write the trained network JSON")
    tp.add_argument("--history", metavar="PATH", help="write per-epoch loss/errors CSV")
    return p


def _emit(report: dict, path) -> None:
    text = json.dumps(report, indent=2, allow_nan=False, default=_jsonable) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def _clean(v):
    # JSON has no infinities; report them as null
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.box <= 0:
        print("error: --box must be positive", file=sys.stderr)
        return EXIT_PRECONDITION
    try:
        report = COMMANDS[args.command](args)
        report = {"command": args.command, "version": __version__, **_clean(report)}
        _emit(report, args.json)
    except Exception as e:
        for kind, code, status in _ERRORS:
            if isinstance(e, kind):
                code = code or e.code
                status = status or e.exit_code
                err = {"error": {"code": code, "message": str(e)}}
                sys.stderr.write(json.dumps(err) + "\n")
                return status
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
