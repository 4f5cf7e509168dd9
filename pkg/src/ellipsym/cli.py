"""Command-line interface.

Subcommands: sample, pdf, fit, crb, verify <plan>, list-plans.  The default
seed comes from the ELLIPSYM_SEED environment variable; the exit code is 0
iff every executed check passes.  CSV files use comma separators, '.'
decimals, one header row and '#'-prefixed metadata lines.
"""

import argparse
import sys

import numpy as np

from . import asymptotics, density, estimators, families, harness, sampling
from .estimators import EstimatorConfig
from .rng import default_seed


def _parse_vector(text, m=None):
    vals = np.array([float(v) for v in text.split(",")])
    if m is not None and vals.size == 1:
        vals = np.full(m, vals[0])
    return vals


def _parse_matrix(text):
    rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    return np.array(rows)


def _load_points(path):
    """Read a data CSV: '#' metadata lines, one header row, then numbers."""
    with open(path) as fh:
        rows = [line for line in fh if line.strip() and not line.startswith("#")]
    return np.loadtxt(rows[1:], delimiter=",", ndmin=2)


def _spec_from_args(args):
    kernel = families.parse_family(args.family, args.m, scale=args.scale)
    sigma = _parse_matrix(args.sigma) if args.sigma else np.eye(args.m)
    mu = _parse_vector(args.mu, args.m) if args.mu else np.zeros(args.m)
    return sampling.DistributionSpec(kernel, mu, sigma)


def _add_family_args(sub, with_spec=True):
    sub.add_argument("--family", default="gaussian", help="family spec, e.g. student(nu=3)")
    sub.add_argument("--scale", default="cov", choices=["cov", "median", "raw"])
    sub.add_argument("-m", type=int, default=2, help="dimension")
    if with_spec:
        sub.add_argument("--mu", help="symmetry center, comma separated")
        sub.add_argument("--sigma", help="scatter matrix, rows separated by ';'")


def cmd_sample(args):
    spec = _spec_from_args(args)
    batch = sampling.sample_spec(spec, args.n, args.seed, args.stream)
    sampling.export_csv(batch, args.out)
    print(f"wrote {args.n} draws to {args.out}")
    return 0


def cmd_pdf(args):
    spec = _spec_from_args(args)
    points = _load_points(args.input)
    with open(args.out, "w") as fh:
        fh.write(f"# kernel: {spec.kernel.describe()}\n")
        fh.write("log_pdf\n")
        for row in points:
            val = density.pdf_res(spec, row)
            fh.write(f"{val.log_pdf:.12g}\n")
    print(f"wrote {points.shape[0]} log-density values to {args.out}")
    return 0


def cmd_fit(args):
    data = _load_points(args.input)
    m = data.shape[1]
    known_mu = _parse_vector(args.known_mu, m) if args.known_mu else None
    cfg = EstimatorConfig(
        max_iter=args.max_iter,
        tol=args.tol,
        known_mu=known_mu,
        shape_scale=args.shape,
    )
    if args.method == "scm":
        res = estimators.sample_moments(data)
    elif args.method == "ml":
        kernel = families.parse_family(args.family, m, scale=args.scale)
        res = estimators.fit_ml(data, kernel, cfg)
    elif args.method == "maronna":
        u1, u2, _, _ = estimators.huber_weights(m, args.huber_q)
        res = estimators.fit_maronna(data, u1, u2, cfg)
    else:
        res = estimators.fit_tyler(data, cfg)
    from .matrixkit import vecs

    with open(args.out, "w") as fh:
        fh.write(f"# method: {args.method} converged: {res.converged}\n")
        fh.write("quantity,value\n")
        for j, v in enumerate(res.mu_hat):
            fh.write(f"mu_{j},{v:.12g}\n")
        for j, v in enumerate(vecs(res.sigma_hat)):
            fh.write(f"vecs_sigma_{j},{v:.12g}\n")
        fh.write(f"iterations,{res.iterations}\n")
        fh.write(f"residual,{res.residual_trace[-1]:.12g}\n")
    print(
        f"{args.method}: converged={res.converged} iterations={res.iterations} "
        f"residual={res.residual_trace[-1]:.3e}"
    )
    return 0 if res.converged else 1


def cmd_crb(args):
    kernel = families.parse_family(args.family, args.m, scale=args.scale)
    sigma = _parse_matrix(args.sigma) if args.sigma else None
    mu = _parse_vector(args.mu, args.m) if args.mu else None
    model = asymptotics.built_in_model(args.model, args.m, sigma=sigma, mu=mu)
    if args.alpha:
        alpha = _parse_vector(args.alpha)
    elif args.model == "scatter-full":
        from .matrixkit import vecs

        alpha = vecs(sigma if sigma is not None else np.eye(args.m))
    elif args.model == "scatter-scaled-identity":
        alpha = np.ones(1)
    else:
        alpha = np.zeros(model.p)
    fim = asymptotics.slepian_bangs_fim(model, kernel, alpha)
    bound = asymptotics.crb(model, kernel, alpha, n=args.n)
    with open(args.out, "w") as fh:
        fh.write(f"# model: {args.model} family: {kernel.describe()} n: {args.n}\n")
        fh.write("matrix,row," + ",".join(f"c{j}" for j in range(model.p)) + "\n")
        for i in range(model.p):
            fh.write("fim," + str(i) + "," + ",".join(f"{v:.12g}" for v in fim[i]) + "\n")
        for i in range(model.p):
            fh.write("crb," + str(i) + "," + ",".join(f"{v:.12g}" for v in bound[i]) + "\n")
    print(f"wrote FIM and CRB ({model.p}x{model.p}) to {args.out}")
    return 0


def cmd_verify(args):
    reports = harness.run_plan(args.plan, out_dir=args.out_dir, seed=args.seed)
    failures = 0
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(
            f"[{status}] {r.name}: statistic={r.statistic:.6g} "
            f"threshold={r.threshold:.6g} ({r.runtime:.2f}s) {r.detail}"
        )
        failures += not r.passed
    return 0 if failures == 0 else 1


def cmd_list_plans(args):
    for name in harness.list_plans():
        plan = harness.get_plan(name)
        print(f"{name}: {plan.description} (budget {plan.runtime_budget_s:.0f}s)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ellipsym",
        description="Elliptically symmetric distributions toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw from an elliptical law")
    _add_family_args(p)
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("pdf", help="evaluate log densities at points from CSV")
    _add_family_args(p)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pdf)

    p = sub.add_parser("fit", help="estimate location and scatter")
    p.add_argument("--method", required=True, choices=["scm", "ml", "maronna", "tyler"])
    p.add_argument("--family", default="gaussian")
    p.add_argument("--scale", default="cov", choices=["cov", "median", "raw"])
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--known-mu", dest="known_mu")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--shape", choices=["trace", "topleft", "det"])
    p.add_argument("--huber-q", type=float, default=0.9)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("crb", help="Fisher information and Cramer-Rao bound")
    p.add_argument("--model", required=True, choices=list(asymptotics.MODEL_NAMES))
    _add_family_args(p)
    p.add_argument("--alpha", help="evaluation point, comma separated")
    p.add_argument("-n", type=int, default=1, help="number of i.i.d. samples")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_crb)

    p = sub.add_parser("verify", help="run a named verification plan")
    p.add_argument("plan")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("list-plans", help="list built-in verification plans")
    p.set_defaults(func=cmd_list_plans)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = default_seed()
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
