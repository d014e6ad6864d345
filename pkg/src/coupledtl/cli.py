"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .deep import encode, fit_deep, map_codes
from .errors import DataError, NumericalError
from .fileutil import atomic_write
from .matching import (
    METRICS,
    cmc_compute,
    enroll,
    identify,
    rank_k_accuracy,
    read_rankings_csv,
    write_cmc_csv,
    write_rankings_csv,
)
from .storage import (
    DatasetManifest,
    default_config_text,
    load_config,
    load_manifest,
    load_matrix,
    load_model,
    parse_config,
    save_labels,
    save_manifest,
    save_matrix,
    save_model,
)
from .synthetic import SyntheticSpec, gen_synthetic_coupled, split_columns

log = logging.getLogger("coupledtl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
TRACE_COLUMNS = ("layer", "stage", "iteration", "residual", "frob_penalty", "logdet_penalty", "coupling", "total")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _direction(text):
    norm = text.replace("->", "to").replace("_", "").lower()
    if norm not in ("1to2", "2to1"):
        raise argparse.ArgumentTypeError("direction must be 1to2 or 2to1")
    return norm


def cmd_gen_synth(args):
    spec = SyntheticSpec(args.dim, args.subjects, args.samples, args.noise, args.cond, args.seed, args.tau)
    x1, x2, labels, truth = gen_synthetic_coupled(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = np.array(labels)
    ext = ".bin" if args.binary else ".csv"
    for split, idx in zip(("train", "gallery", "probe"), split_columns(args.subjects, args.samples)):
        save_matrix(out / f"{split}_x1{ext}", x1[:, idx])
        save_matrix(out / f"{split}_x2{ext}", x2[:, idx])
        save_labels(out / f"{split}_labels.txt", labels[idx])
        save_manifest(
            out / f"{split}.manifest",
            DatasetManifest(split, out / f"{split}_labels.txt", out / f"{split}_x1{ext}", out / f"{split}_x2{ext}"),
        )
    for name in ("t1", "t2", "m12", "m21"):
        save_matrix(out / f"truth_{name}.bin", getattr(truth, name))
    print(f"wrote {x1.shape[1]} paired samples ({args.subjects} subjects) to {out}")
    return EXIT_OK


def _write_trace(path, report):
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)

        def rows(layer, stage, costs):
            for i, c in enumerate(costs, start=1):
                w.writerow([layer, stage, i] + [repr(v) for v in
                           (c.residual, c.frob_penalty, c.logdet_penalty, c.coupling, c.total)])

        for j, (c1, c2) in enumerate(report.uncoupled, start=1):
            rows(j, "domain1", c1)
            rows(j, "domain2", c2)
        rows(len(report.uncoupled) + 1, "coupled", report.coupled)


def cmd_train(args):
    config = load_config(args.config) if args.config else parse_config(default_config_text())
    manifest = load_manifest(args.manifest)
    x1, _ = manifest.load(1)
    x2, _ = manifest.load(2)
    model, report = fit_deep(x1, x2, config.kind, config.schedule())
    save_model(args.out, model)
    if args.trace:
        _write_trace(args.trace, report)
    final = report.coupled[-1]
    print(f"trained {config.kind} model, depth {model.depth}, dim {model.dim}; "
          f"final cost {final.total:.6g} after {len(report.coupled)} sweeps")
    return EXIT_OK


def cmd_encode(args):
    model = load_model(args.model)
    z = encode(model, load_matrix(args.input), args.domain, threshold=args.threshold)
    save_matrix(args.out, z)
    return EXIT_OK


def cmd_map(args):
    model = load_model(args.model)
    save_matrix(args.out, map_codes(model, load_matrix(args.input), args.direction))
    return EXIT_OK


def cmd_match(args):
    model = load_model(args.model)
    gallery_domain = args.gallery_domain
    probe_domain = 3 - gallery_domain
    gx, glabels = load_manifest(args.gallery).load(gallery_domain)
    px, plabels = load_manifest(args.probe).load(probe_domain)
    gallery = enroll(encode(model, gx, gallery_domain), glabels, args.metric)
    direction = f"{probe_domain}to{gallery_domain}"
    probes = map_codes(model, encode(model, px, probe_domain), direction)
    results = identify(gallery, probes, plabels)
    write_rankings_csv(args.out, results)
    print(f"rank-1 accuracy {rank_k_accuracy(results, 1):.4f} over {len(results)} probes")
    return EXIT_OK


def cmd_eval_cmc(args):
    results = read_rankings_csv(args.rankings)
    curve = cmc_compute(results, args.max_rank)
    if args.out:
        write_cmc_csv(args.out, curve)
    for k in args.k or [1, 10]:
        print(f"rank-{k}: {rank_k_accuracy(results, k):.4f}")
    return EXIT_OK


def cmd_inspect(args):
    if args.defaults:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    if not args.model:
        raise UsageError("inspect: a model path or --defaults is required")
    model = load_model(args.model)
    print(f"kind: {model.kind}")
    print(f"depth: {model.depth}")
    print(f"dim: {model.dim}")
    for j, (l1, l2) in enumerate(zip(model.layers1, model.layers2), start=1):
        for dom, layer in ((1, l1), (2, l2)):
            p = layer.params
            tau = layer.budget.tau if layer.budget.tau is not None else "none"
            print(f"layer {j} domain {dom}: det sign {layer.det_sign:+.0f}, log|det| {layer.logabsdet:.6g}, "
                  f"lambda {p.lam!r}, epsilon {p.epsilon!r}, mu {p.mu!r}, tau {tau}")
    maps = [("map 1->2", model.map_12)] + ([("map 2->1", model.map_21)] if model.map_21 is not None else [])
    for name, m in maps:
        sign, logdet = np.linalg.slogdet(m)
        print(f"{name}: det sign {sign:+.0f}, log|det| {logdet:.6g}, "
              f"frobenius norm {np.linalg.norm(m):.6g}, condition {np.linalg.cond(m):.6g}")
    if args.show_maps:
        for name, m in maps:
            print(f"{name}:")
            print(np.array2string(m, precision=6, max_line_width=120))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coupledtl", description="Coupled deep transform learning and identification.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-synth", help="write a planted coupled dataset")
    g.add_argument("--dim", type=int, default=32)
    g.add_argument("--subjects", type=int, default=100)
    g.add_argument("--samples", type=int, default=5)
    g.add_argument("--noise", type=float, default=0.0, help="noise std relative to signal RMS")
    g.add_argument("--cond", type=float, default=50.0, help="condition number bound")
    g.add_argument("--tau", type=int, default=None, help="latent code sparsity")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--binary", action="store_true", help="write binary matrices instead of CSV")
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_gen_synth)

    t = sub.add_parser("train", help="fit a model from a training manifest")
    t.add_argument("--manifest", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True, help="model file")
    t.add_argument("--trace", help="cost-trace CSV")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("encode", help="encode a matrix with one domain's transforms")
    e.add_argument("--model", required=True)
    e.add_argument("--input", required=True)
    e.add_argument("--domain", type=int, choices=(1, 2), required=True)
    e.add_argument("--threshold", action="store_true", help="apply each layer's sparsity budget")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_encode)

    m = sub.add_parser("map", help="map codes across domains")
    m.add_argument("--model", required=True)
    m.add_argument("--input", required=True)
    m.add_argument("--direction", type=_direction, default="1to2")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_map)

    r = sub.add_parser("match", help="identify probes against a gallery")
    r.add_argument("--model", required=True)
    r.add_argument("--gallery", required=True, help="gallery manifest")
    r.add_argument("--probe", required=True, help="probe manifest")
    r.add_argument("--gallery-domain", type=int, choices=(1, 2), default=2)
    r.add_argument("--metric", choices=METRICS, default="euclidean")
    r.add_argument("--out", required=True, help="rankings CSV")
    r.set_defaults(func=cmd_match)

    c = sub.add_parser("eval-cmc", help="CMC curve and rank-k summary from rankings")
    c.add_argument("--rankings", required=True)
    c.add_argument("--max-rank", type=int)
    c.add_argument("-k", type=int, action="append", help="report rank-k accuracy (repeatable)")
    c.add_argument("--out", help="CMC CSV")
    c.set_defaults(func=cmd_eval_cmc)

    i = sub.add_parser("inspect", help="summarize a model file")
    i.add_argument("model", nargs="?")
    i.add_argument("--defaults", action="store_true", help="print the default config")
    i.add_argument("--show-maps", action="store_true")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
