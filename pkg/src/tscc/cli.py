"""Command-line driver: ``tscc {generate,cluster,diagnose,incidence,reproduce}``.

Outputs are CSV/JSON only.  Files go to ``--output-dir``, defaulting to
``$TSCC_OUTPUT_DIR`` or the working directory.

Exit codes: 0 ok, 1 usage, 2 validation, 3 numerical failure, 4 I/O.
"""
import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from math import pi

import numpy as np

from . import __version__
from .affinity import TensorSpec, deviation_norm, perfect_weight_matrix
from .diagnostics import (
    AssumptionViolation,
    bound_constants,
    check_perturbation_bound,
    cluster_sizes,
    identification_error,
    misclassification_rate,
    perfect_embedding,
    perfect_spectrum,
    principal_angles,
    separation_factor,
    subspace_distance,
    total_variation,
)
from .incidence import EXAMPLES, analytic_bound, mc_incidence_constant
from .modelgen import (
    MixtureModel,
    builtin_sampler,
    load_model_config,
    random_lines_model,
    read_dataset_csv,
    sample_mixture,
    write_dataset_csv,
)
from .spectral import (
    EmptyClusterError,
    IsolatedPointError,
    kmeans_cluster,
    normalize_symmetric,
    row_normalize,
    run_tscc,
)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4
OUTPUT_ENV = "TSCC_OUTPUT_DIR"
SCENARIOS = ("fig1", "fig2", "utv", "ex51", "ex52", "ex53", "ex54", "spectra")

# fixed seeds of the shipped scenarios
LINES_SEED = 3
UTV_SEED = 0
MC_SEED = 2024
EX_SIGMAS = (0.05, 0.1, 0.2)

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_NUM_LIST = {"type": "array", "items": _NUM}

SCHEMAS = {
    "cluster": {
        "type": "object",
        "required": ["command", "params", "eigenvalues", "eigengap", "eigengap_collapse", "sizes"],
        "properties": {
            "command": {"const": "cluster"},
            "params": {"type": "object"},
            "eigenvalues": _NUM_LIST,
            "eigengap": _NUM,
            "eigengap_collapse": {"type": "boolean"},
            "sizes": {"type": "array", "items": {"type": "integer"}},
            "inertia": _NUM,
            "misclassification": _NUM_OR_NULL,
        },
    },
    "diagnose": {
        "type": "object",
        "required": ["command", "params", "tv", "projector_distance", "principal_angles",
                     "beta", "eigenvalues", "bound_constants", "perturbation_check"],
        "properties": {
            "command": {"const": "diagnose"},
            "params": {"type": "object"},
            "tv": _NUM,
            "projector_distance": _NUM,
            "principal_angles": _NUM_LIST,
            "beta": {"type": "object", "properties": {"U": _NUM, "T": _NUM, "V": _NUM}},
            "e_id": {"type": ["object", "null"]},
            "eigenvalues": _NUM_LIST,
            "misclassification": _NUM,
            "bound_constants": {"type": ["object", "null"]},
            "perturbation_check": {"type": ["object", "null"]},
            "violations": {"type": "array", "items": {"type": "string"}},
        },
    },
    "incidence": {
        "type": "object",
        "required": ["command", "rows"],
        "properties": {
            "command": {"const": "incidence"},
            "rows": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["kind", "params", "value", "std_error", "samples", "bound"],
                    "properties": {
                        "kind": {"type": "string"},
                        "params": {"type": "object"},
                        "value": {"type": "number", "minimum": 0},
                        "std_error": {"type": "number", "minimum": 0},
                        "samples": {"type": "integer", "minimum": 1},
                        "bound": _NUM,
                        "within_3se": {"type": "boolean"},
                    },
                },
            },
        },
    },
    "reproduce": {
        "type": "object",
        "required": ["command", "scenario", "files", "summary"],
        "properties": {
            "command": {"const": "reproduce"},
            "scenario": {"enum": list(SCENARIOS)},
            "files": {"type": "array", "items": {"type": "string"}},
            "summary": {"type": "object"},
        },
    },
    "sweep": {
        "type": "object",
        "required": ["command", "sweep", "runs"],
        "properties": {
            "command": {"type": "string"},
            "sweep": {"type": "object"},
            "runs": {"type": "array", "items": {"type": "object"}},
        },
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("%s: %s" % (self.prog, message))


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive, got %s" % text)
    return v


def _nonneg(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative, got %s" % text)
    return v


def _count(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer, got %s" % text)
    return v


def _dim(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer, got %s" % text)
    return v


def _output_dir(args):
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_matrix(path, prefix, M):
    M = np.atleast_2d(M)
    _write_rows(path, ["%s%d" % (prefix, j + 1) for j in range(M.shape[1])], M.tolist())


def _parse_sweep(text):
    """``name=v1,v2,...`` -> (name, [values])."""
    if text is None:
        return None
    name, sep, values = text.partition("=")
    if not sep or not values:
        raise UsageError("--sweep expects NAME=V1,V2,...")
    try:
        vals = [float(v) for v in values.split(",")]
    except ValueError:
        raise UsageError("--sweep values must be numbers") from None
    return name.strip().replace("-", "_"), vals


def _fan_out(args, sweep, fn):
    """Run ``fn(args_copy, tag)`` once per sweep value on a thread pool."""
    name, values = sweep
    if not hasattr(args, name):
        raise UsageError("cannot sweep unknown parameter %r" % name)
    runs = []
    for i, v in enumerate(values):
        a = argparse.Namespace(**vars(args))
        cast = type(getattr(args, name)) if getattr(args, name) is not None else float
        setattr(a, name, cast(v))
        runs.append((a, "%s_%d" % (name, i)))
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda job: fn(*job), runs))
    return {"command": args.command, "sweep": {name: values}, "runs": results}


# generate ----------------------------------------------------------------

def _cmd_generate(args):
    if args.config:
        model = load_model_config(args.config)
        if args.seed is not None or args.noise is not None:
            model = MixtureModel(model.flats, model.sizes, model.extent,
                                 model.noise if args.noise is None else args.noise,
                                 model.seed if args.seed is None else args.seed)
    elif args.model == "three_lines":
        model = random_lines_model(args.K, args.n_per_line, args.noise or 0.0,
                                   0 if args.seed is None else args.seed)
    else:
        raise UsageError("generate needs --model three_lines or --config FILE")
    ds = sample_mixture(model)
    path = args.output or os.path.join(_output_dir(args), "data.csv")
    write_dataset_csv(path, ds)
    print(path)
    return EXIT_OK


# cluster -----------------------------------------------------------------

def _read(path):
    ds = read_dataset_csv(path)
    if ds.points.shape[0] == 0:
        raise ValueError("dataset %s has no points" % path)
    return ds


def _variant(args):
    return "polar_linear" if args.linear else ("polar_power" if args.q != 1.0 else "polar_affine")


def _cluster_once(args, tag=None):
    ds = _read(args.input)
    res = run_tscc(ds.points, args.d, args.K, args.sigma, variant=_variant(args), q=args.q,
                   row_norm=args.row_norm, unnormalized=args.unnormalized,
                   restarts=args.restarts, seed=args.seed, labels=ds.labels, workers=args.workers)
    out = _output_dir(args)
    stem = "cluster" if tag is None else "cluster_%s" % tag
    _write_rows(os.path.join(out, stem + "_labels.csv"), ["label"], [[int(v)] for v in res.labels])
    report = {
        "command": "cluster",
        "params": _params(args),
        "eigenvalues": res.embedding.eigenvalues[: args.K + 1].tolist(),
        "eigengap": float(res.embedding.eigengap) if args.K < ds.points.shape[0] else 0.0,
        "eigengap_collapse": res.embedding.eigengap_collapse,
        "sizes": np.bincount(res.labels, minlength=args.K).tolist(),
        "inertia": res.clustering.inertia,
        "misclassification": None if ds.labels is None else misclassification_rate(res.labels, ds.labels),
    }
    if res.embedding.eigengap_collapse:
        print("warning: eigengap below 1e-8, the embedding is not well defined", file=sys.stderr)
    _write_json(os.path.join(out, stem + "_metrics.json"), report)
    return report


def _params(args):
    skip = {"func", "command", "output_dir", "sweep", "jobs", "workers"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _cmd_cluster(args):
    sweep = _parse_sweep(args.sweep)
    if sweep:
        report = _fan_out(args, sweep, _cluster_once)
        _write_json(os.path.join(_output_dir(args), "cluster_sweep.json"), report)
    else:
        report = _cluster_once(args)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# diagnose ----------------------------------------------------------------

def diagnose_report(points, labels, d, K, sigma, variant="polar_affine", q=1.0, restarts=20, seed=0):
    """Diagnostic record of one TSCC run against ground-truth labels."""
    labels = np.asarray(labels)
    if np.unique(labels).size != K:
        raise ValueError("ground truth has %d clusters, expected K=%d" % (np.unique(labels).size, K))
    res = run_tscc(points, d, K, sigma, variant=variant, q=q, restarts=restarts, seed=seed)
    U = res.embedding.U
    Ut = perfect_embedding(labels)
    spec = TensorSpec(variant, sigma=sigma, d=d, q=q)
    m = spec.order
    sizes = cluster_sizes(labels)
    _, x = deviation_norm(spec, points, labels)
    rows_T = row_normalize(U, "T", labels)
    report = {
        "command": "diagnose",
        "params": {"d": d, "K": K, "sigma": sigma, "variant": variant, "q": q, "seed": seed, "N": len(labels)},
        "tv": total_variation(U, labels),
        "projector_distance": subspace_distance(U, Ut),
        "principal_angles": principal_angles(U, Ut).tolist(),
        "beta": {"U": separation_factor(U, labels), "T": separation_factor(rows_T, labels),
                 "V": separation_factor(row_normalize(U, "V"), labels)},
        "e_id": None,
        "eigenvalues": res.embedding.eigenvalues[: K + 1].tolist(),
        "misclassification": misclassification_rate(res.labels, labels),
        "deviation": x,
        "bound_constants": None,
        "perturbation_check": None,
        "violations": [],
    }
    if K == 2:
        report["e_id"] = {"U": identification_error(U, labels), "T": identification_error(rows_T, labels)}
    # perfect degrees in the data order: each point gets the closed form of its cluster
    _, inv = np.unique(labels, return_inverse=True)
    pdeg = np.array([perfect_weight_matrix([s], m - 2).degrees[0] for s in sizes])[inv]
    try:
        const = bound_constants(K, m - 2, sizes, res.weights.degrees, pdeg)
    except AssumptionViolation as exc:
        report["violations"].append(str(exc))
    else:
        report["bound_constants"] = {
            "epsilon1": const.epsilon1, "epsilon2": const.epsilon2, "C0": const.C0, "C1": const.C1,
            "C2": const.C2, "delta_K_tilde": const.delta_K_tilde, "threshold": const.threshold,
        }
        chk = check_perturbation_bound(U, labels, x, const)
        report["perturbation_check"] = chk.as_dict()
    return report


def _cmd_diagnose(args):
    ds = _read(args.input)
    if ds.labels is None:
        raise ValueError("diagnose needs a dataset with a label column")
    report = diagnose_report(ds.points, ds.labels, args.d, args.K, args.sigma,
                             _variant(args), args.q, args.restarts, args.seed)
    _write_json(os.path.join(_output_dir(args), "diagnose.json"), report)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# incidence ---------------------------------------------------------------

def example_setup(example, L=1.0, theta=pi / 2, eps=None, omega=None):
    """Samplers, d, linear flag and bound keyword arguments of a named example."""
    if example == "orthogonal_lines_tscc":
        samplers = [builtin_sampler("segment", L=L), builtin_sampler("segment", L=L, theta=pi / 2)]
        return samplers, 1, False, {"L": L}
    if example == "angled_lines_tlscc":
        samplers = [builtin_sampler("segment", L=L), builtin_sampler("angled_line", L=L, theta=theta)]
        return samplers, 1, True, {"L": L, "theta": theta}
    if example == "rectangles_tlscc":
        if eps is None:
            if omega is None:
                raise ValueError("rectangles need --eps or --omega")
            eps = L / omega
        samplers = [builtin_sampler("rectangle_strip", L=L, eps=eps),
                    builtin_sampler("rectangle_strip", L=L, eps=eps, orientation="vertical")]
        return samplers, 1, True, {"omega": L / eps}
    if example == "half_disks_tlscc":
        samplers = [builtin_sampler("half_disk_3d", orientation="D1"),
                    builtin_sampler("half_disk_3d", orientation="D2")]
        return samplers, 2, True, {}
    raise ValueError("unknown example %r" % (example,))


def incidence_row(example, sigma, M, seed, workers=1, **geometry):
    samplers, d, linear, bound_kw = example_setup(example, **geometry)
    est = mc_incidence_constant(samplers, d, sigma, linear=linear, M=M, seed=seed, workers=workers)
    bound = analytic_bound(example, sigma, **bound_kw)
    rec = est.as_record(bound)
    rec["params"] = dict(rec["params"], example=example, **bound_kw)
    rec["within_3se"] = bool(est.value <= bound + 3 * est.std_error)
    return rec


def _incidence_once(args, tag=None):
    return incidence_row(args.example, args.sigma, args.samples, args.seed, args.workers,
                         L=args.L, theta=args.theta, eps=args.eps, omega=args.omega)


def _cmd_incidence(args):
    sweep = _parse_sweep(args.sweep)
    if sweep:
        rows = _fan_out(args, sweep, _incidence_once)["runs"]
    else:
        rows = [_incidence_once(args)]
    report = {"command": "incidence", "rows": rows}
    _write_json(os.path.join(_output_dir(args), "incidence.json"), report)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# reproduce ---------------------------------------------------------------

def lines_dataset(noise, seed=LINES_SEED):
    """The shipped three-line data: 25 points per line in the unit square."""
    return sample_mixture(random_lines_model(3, 25, noise, seed))


def _lines_scenario(out, name, noise, sigma):
    ds = lines_dataset(noise)
    res = run_tscc(ds.points, 1, 3, sigma)
    files = [name + "_data.csv", name + "_eigenvalues.csv", name + "_embedding.csv", name + "_labels.csv"]
    write_dataset_csv(os.path.join(out, files[0]), ds)
    _write_rows(os.path.join(out, files[1]), ["eigenvalue"], [[v] for v in res.embedding.eigenvalues])
    _write_matrix(os.path.join(out, files[2]), "u", res.embedding.U)
    _write_rows(os.path.join(out, files[3]), ["label", "truth"], zip(res.labels.tolist(), ds.labels.tolist()))
    ev = res.embedding.eigenvalues
    summary = {"seed": LINES_SEED, "noise": noise, "sigma": sigma, "top_eigenvalues": ev[:4].tolist(),
               "misclassification": misclassification_rate(res.labels, ds.labels)}
    return files, summary


def _utv_scenario(out):
    base = random_lines_model(2, 20, 0.025, UTV_SEED)
    ds = sample_mixture(MixtureModel(base.flats, [80, 20], base.extent, 0.025, UTV_SEED))
    res = run_tscc(ds.points, 1, 2, 0.2)
    U = res.embedding.U
    spaces = {"U": U, "T": row_normalize(U, "T", ds.labels), "V": row_normalize(U, "V")}
    files = ["utv_data.csv"]
    write_dataset_csv(os.path.join(out, files[0]), ds)
    summary = {"seed": UTV_SEED, "noise": 0.025, "sigma": 0.2, "beta": {}, "misclassification": {}}
    for name, rows in spaces.items():
        f = "utv_%s_rows.csv" % name
        _write_matrix(os.path.join(out, f), "r", rows)
        files.append(f)
        summary["beta"][name] = separation_factor(rows, ds.labels)
        summary["misclassification"][name] = misclassification_rate(kmeans_cluster(rows, 2).labels, ds.labels)
    b = summary["beta"]
    summary["ordering_holds"] = bool(b["U"] <= b["T"] <= b["V"])
    return files, summary


def _example_scenario(out, name, workers):
    cases = {
        "ex51": [("orthogonal_lines_tscc", {"L": 1.0})],
        "ex52": [("angled_lines_tlscc", {"L": 1.0, "theta": pi / 6}),
                 ("angled_lines_tlscc", {"L": 1.0, "theta": pi / 2})],
        "ex53": [("rectangles_tlscc", {"L": 1.0, "omega": 20.0})],
        "ex54": [("half_disks_tlscc", {})],
    }[name]
    rows = [incidence_row(ex, s, 100_000, MC_SEED, workers, **geo) for ex, geo in cases for s in EX_SIGMAS]
    f = name + "_table.csv"
    _write_rows(os.path.join(out, f), ["example", "sigma", "estimate", "std_error", "bound", "within_3se"],
                [[r["params"]["example"], r["params"]["sigma"], r["value"], r["std_error"], r["bound"],
                  r["within_3se"]] for r in rows])
    return [f], {"rows": rows, "all_within_3se": all(r["within_3se"] for r in rows)}


def _spectra_scenario(out):
    rows, ok = [], True
    for sizes, d in [((5, 5), 1), ((4, 6, 8), 0), ((6, 9), 2)]:
        W = perfect_weight_matrix(sizes, d)
        for mode in ("normalized", "unnormalized"):
            Z = normalize_symmetric(W) if mode == "normalized" else W.entries
            dense = np.sort(np.linalg.eigvalsh(Z))[::-1]
            closed = perfect_spectrum(sizes, d, mode).eigenvalues
            err = float(np.max(np.abs(dense - closed) / np.maximum(1.0, np.abs(closed))))
            ok = ok and err < 1e-9
            rows.append([" ".join(map(str, sizes)), d, mode, err, " ".join("%.12g" % v for v in dense)])
    f = "spectra.csv"
    _write_rows(os.path.join(out, f), ["sizes", "d", "mode", "max_rel_error", "eigenvalues"], rows)
    return [f], {"configurations": len(rows), "all_match": bool(ok)}


def _cmd_reproduce(args):
    out = _output_dir(args)
    s = args.scenario
    if s == "fig1":
        files, summary = _lines_scenario(out, s, 0.0, 1e-5)
    elif s == "fig2":
        files, summary = _lines_scenario(out, s, 0.025, 0.184)
    elif s == "utv":
        files, summary = _utv_scenario(out)
    elif s == "spectra":
        files, summary = _spectra_scenario(out)
    else:
        files, summary = _example_scenario(out, s, args.workers)
    report = {"command": "reproduce", "scenario": s, "files": files, "summary": summary}
    _write_json(os.path.join(out, s + "_report.json"), report)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# parser ------------------------------------------------------------------

def _tscc_flags(p):
    p.add_argument("--input", required=True, help="dataset CSV (x1..xD[,label])")
    p.add_argument("--d", type=_dim, required=True, help="flat dimension")
    p.add_argument("--K", type=_count, required=True, help="number of clusters")
    p.add_argument("--sigma", type=_positive, required=True)
    p.add_argument("--linear", action="store_true", help="linear-subspace variant (origin prepended)")
    p.add_argument("--q", type=float, default=1.0, help="curvature power (>= 1)")
    p.add_argument("--restarts", type=_count, default=20)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="tscc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--output-dir", help="default: $%s or ." % OUTPUT_ENV)
    common.add_argument("--workers", type=_count, default=1, help="threads inside one run")

    g = sub.add_parser("generate", parents=[common], help="sample a synthetic dataset")
    g.add_argument("--model", choices=["three_lines"])
    g.add_argument("--config", help="TOML model description")
    g.add_argument("--K", type=_count, default=3)
    g.add_argument("--n-per-line", type=_count, default=25)
    g.add_argument("--noise", type=_nonneg)
    g.add_argument("--seed", type=int)
    g.add_argument("--output", help="CSV path (default OUTPUT_DIR/data.csv)")
    g.set_defaults(func=_cmd_generate)

    sweep_help = "NAME=V1,V2,... runs once per value on a thread pool"
    c = sub.add_parser("cluster", parents=[common], help="run TSCC on a dataset")
    _tscc_flags(c)
    c.add_argument("--row-norm", choices=["T", "V"], default=None)
    c.add_argument("--unnormalized", action="store_true", help="skip degree normalization")
    c.add_argument("--sweep", help=sweep_help)
    c.add_argument("--jobs", type=_count, default=1, help="concurrent sweep runs")
    c.set_defaults(func=_cmd_cluster)

    dg = sub.add_parser("diagnose", parents=[common], help="diagnostics against ground truth")
    _tscc_flags(dg)
    dg.set_defaults(func=_cmd_diagnose)

    inc = sub.add_parser("incidence", parents=[common], help="Monte Carlo incidence constant vs. bound")
    inc.add_argument("--example", choices=EXAMPLES, required=True)
    inc.add_argument("--sigma", type=_positive, required=True)
    inc.add_argument("--L", type=_positive, default=1.0)
    inc.add_argument("--theta", type=_positive, default=pi / 2)
    inc.add_argument("--eps", type=_positive)
    inc.add_argument("--omega", type=_positive)
    inc.add_argument("--samples", type=int, default=100_000)
    inc.add_argument("--seed", type=int, default=0)
    inc.add_argument("--sweep", help=sweep_help)
    inc.add_argument("--jobs", type=_count, default=1)
    inc.set_defaults(func=_cmd_incidence)

    r = sub.add_parser("reproduce", parents=[common], help="run a named fixed-seed scenario")
    r.add_argument("scenario", choices=SCENARIOS)
    r.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand (one of generate, cluster, diagnose, incidence, reproduce)")
        return args.func(args)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except (np.linalg.LinAlgError, IsolatedPointError, EmptyClusterError, MemoryError,
            FloatingPointError) as exc:
        print("numerical error: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print("i/o error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print("invalid input: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
