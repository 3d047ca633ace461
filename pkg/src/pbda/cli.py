"""Command-line interface: ``pbda <subcommand> [flags]``.

Exit status is 0 on success, 1 on invalid input (including unknown flags) and
2 when the optimizer fails.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds, experiments
from . import estimators as est
from . import model_selection as ms
from .data_io import TOY_KINDS, ToySpec, gen_toy, load_csv, load_svmlight, write_csv
from .exceptions import OptimizationError, ValidationError
from .kernels import Kernel
from .training import (ALGORITHMS, HYPERPARAMETERS, OptimizerSettings, load_model, predict,
                       save_model, train)

SVMLIGHT_SUFFIXES = (".svm", ".svmlight", ".libsvm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _g(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def _emit(out, pairs, fmt):
    """Write an ordered mapping as kv lines, a 2-column CSV or JSON."""
    if fmt == "json":
        out.write(json.dumps({k: v for k, v in pairs}, indent=2, default=float) + "\n")
    elif fmt == "csv":
        out.write("name,value\n")
        for k, v in pairs:
            out.write(f"{k},{_g(v)}\n")
    else:
        for k, v in pairs:
            out.write(f"{k}={_g(v)}\n")


# --------------------------------------------------------------------------
# Data loading


def _read_header(path):
    with open(path, encoding="utf-8", newline="") as fh:
        row = next(csv.reader(fh), [])
    return [h.strip() for h in row]


def _load_labeled(path, label_column):
    if Path(path).suffix.lower() in SVMLIGHT_SUFFIXES:
        return load_svmlight(path)
    return load_csv(path, label_column)


def _load_sample(path, label_column):
    """Labeled when the file carries labels, unlabeled otherwise."""
    if Path(path).suffix.lower() in SVMLIGHT_SUFFIXES:
        return load_svmlight(path)
    return load_csv(path, label_column if label_column in _read_header(path) else None)


def _load_features(path, label_column):
    """Feature-only view of a file; a label column, if present, is dropped unread."""
    if Path(path).suffix.lower() in SVMLIGHT_SUFFIXES:
        return load_svmlight(path).unlabeled()
    if label_column in _read_header(path):
        return load_csv(path, label_column).unlabeled()
    return load_csv(path, None)


def _kernel(args):
    if args.kernel is None:
        return None
    return Kernel(args.kernel, args.gamma)


def _settings(args):
    return OptimizerSettings(max_iterations=args.max_iter, grad_sup_norm_tol=args.grad_tol,
                             rel_objective_tol=args.rel_tol, seed=args.seed)


def _hyper(args, algorithm):
    hp = {}
    for name in HYPERPARAMETERS[algorithm]:
        val = getattr(args, name)
        if val is None:
            raise ValidationError(f"--{name} is required for {algorithm}")
        hp[name] = val
    return hp


def _target_for(args, algorithm):
    if algorithm == "pbgd3":
        return _load_features(args.target, args.label_column) if args.target else None
    if not args.target:
        raise ValidationError(f"--target is required for {algorithm}")
    return _load_features(args.target, args.label_column)


# --------------------------------------------------------------------------
# Subcommands


def cmd_gen_toy(args, out):
    spec = ToySpec(args.kind, args.n_per_class, args.noise, args.rotation, args.seed)
    src, tgt = gen_toy(spec)
    write_csv(args.out_src, src, args.label_column)
    write_csv(args.out_tgt, tgt, args.label_column)
    _emit(out, [("source", args.out_src), ("target", args.out_tgt),
                ("source_size", len(src)), ("target_size", len(tgt))], args.format)


def cmd_train(args, out):
    source = _load_labeled(args.source, args.label_column)
    target = _target_for(args, args.algo)
    model = train(args.algo, source, target, _hyper(args, args.algo), _kernel(args),
                  _settings(args), convex=not args.nonconvex)
    save_model(args.out, model)
    _emit(out, [("model", args.out), ("algorithm", model.algorithm),
                ("representation", model.representation), ("kernel", model.kernel.kind),
                ("objective", model.objective_value), ("iterations", model.iterations_used),
                ("converged", model.converged), ("message", model.message)], args.format)


def cmd_predict(args, out):
    model = load_model(args.model)
    data = _load_features(args.data, args.label_column)
    pred = predict(model, data)
    text = "prediction\n" + "".join(f"{int(p)}\n" for p in pred)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)


def cmd_evaluate(args, out):
    model = load_model(args.model)
    data = _load_labeled(args.data, args.label_column)
    pairs = [("size", len(data)), ("bayes_risk", est.bayes_risk(model, data)),
             ("gibbs_risk", est.gibbs_risk(model, data)),
             ("convex_gibbs_risk", est.convex_gibbs_risk(model, data)),
             ("disagreement", est.disagreement(model, data)),
             ("joint_error", est.joint_error(model, data)), ("kl", model.kl())]
    if args.target:
        tgt = _load_features(args.target, args.label_column)
        pairs.append(("disagreement_target", est.disagreement(model, tgt)))
        pairs.append(("domain_disagreement", est.domain_disagreement(model, data, tgt)))
    _emit(out, pairs, args.format)


def _placeholder(value, origin="supplied"):
    return None if value is None else bounds.NonEstimable(value, origin)


def _empirical_report(args):
    # bound from directly supplied empirical values
    th = args.theorem
    need = {"8": ("emp_gibbs", "emp_dis", "m", "kl"), "12": ("emp_gibbs", "emp_dis", "m", "kl"),
            "9": ("emp_dis_t", "emp_joint", "m_s", "m_t", "kl"),
            "13": ("emp_dis_t", "emp_joint", "m_s", "m_t", "kl")}[th]
    missing = [n for n in need if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ValidationError(f"without --model, theorem {th} needs {flags}")
    lam, eta = _placeholder(args.lambda_rho), _placeholder(args.eta)
    if th == "8":
        return bounds.theorem8_bound(args.emp_gibbs, args.emp_dis, args.m, args.kl, args.delta,
                                     args.omega, args.a, lam)
    if th == "12":
        return bounds.corollary12_bound(args.emp_gibbs, args.emp_dis, args.m, 2 * args.kl,
                                        args.delta, args.omega, args.a, lam)
    fn = bounds.theorem9_bound if th == "9" else bounds.corollary13_bound
    kl = args.kl if th == "9" else 2 * args.kl
    return fn(args.emp_dis_t, args.emp_joint, args.m_s, args.m_t, kl, args.delta, args.b, args.c,
              _beta(args), eta)


def _beta(args):
    if args.beta_inf is None:
        raise ValidationError("--beta-inf is required for theorems 9 and 13")
    return args.beta_inf


def cmd_bounds(args, out):
    if args.model is None:
        report = _empirical_report(args)
    else:
        if not (args.source and args.target):
            raise ValidationError("--model needs --source and --target")
        model = load_model(args.model)
        source = _load_labeled(args.source, args.label_column)
        target = _load_features(args.target, args.label_column)
        lam, eta = _placeholder(args.lambda_rho), _placeholder(args.eta)
        th = args.theorem
        if th == "8":
            report = bounds.theorem8_from_samples(model, source, target, args.delta, args.omega,
                                                  args.a, lam)
        elif th == "12":
            report = bounds.corollary12_from_samples(model, source, target, args.delta,
                                                     args.omega, args.a, lam)
        elif th == "9":
            report = bounds.theorem9_from_samples(model, source, target, args.delta, args.b,
                                                  args.c, _beta(args), eta)
        else:
            report = bounds.corollary13_from_samples(model, source, target, args.delta, args.b,
                                                     args.c, _beta(args), eta)
    if args.format == "json":
        out.write(report.to_json() + "\n")
    elif args.format == "csv":
        out.write(report.to_csv())
    else:
        out.write(report.to_kv())


def _parse_axis(text):
    # name=min:max:points[:log|lin]
    name, sep, rest = text.partition("=")
    parts = rest.split(":")
    if not sep or len(parts) not in (3, 4):
        raise ValidationError(f"bad --axis {text!r}; expected name=min:max:points[:log|lin]")
    scale = parts[3] if len(parts) == 4 else "log"
    if scale not in ("log", "lin"):
        raise ValidationError(f"bad --axis scale {scale!r}")
    try:
        return ms.GridAxis(name, float(parts[0]), float(parts[1]), int(parts[2]), scale == "log")
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def cmd_grid_search(args, out):
    source = _load_labeled(args.source, args.label_column)
    target = _load_features(args.target, args.label_column) if args.target else None
    if args.axis:
        if len(args.axis) > 2:
            raise ValidationError("at most two --axis flags")
        axes = [_parse_axis(a) for a in args.axis]
        grid = ms.GridSpec(*axes)
    else:
        grid = ms.default_grid(args.algo, args.points)
    result = ms.grid_search(args.algo, source, target, grid, args.k, args.seed, args.selection,
                            _kernel(args), _settings(args), convex=not args.nonconvex)
    table = result.to_csv()
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    else:
        out.write(table)
    pairs = [(f"best.{k}", v) for k, v in result.best.items()] + [("best_score", result.best_score)]
    _emit(sys.stderr if not args.out else out, pairs, "kv")


def cmd_reverse_cv(args, out):
    source = _load_labeled(args.source, args.label_column)
    if not args.target:
        raise ValidationError("--target is required for reverse-cv")
    target = _load_features(args.target, args.label_column)
    hp = _hyper(args, args.algo)
    risk = ms.reverse_cross_validate(args.algo, source, target, hp, args.k, args.seed,
                                     _kernel(args), _settings(args), convex=not args.nonconvex)
    cv = ms.cross_validate(args.algo, source, hp, args.k, args.seed, target, _kernel(args),
                           _settings(args), convex=not args.nonconvex)
    _emit(out, [("reverse_cv_risk", risk), ("cv_risk", cv), ("k", args.k)], args.format)


def cmd_sweep_theta(args, out):
    source = _load_labeled(args.source, args.label_column)
    # target labels, when present, only feed the reference target-risk columns
    target = _load_sample(args.target, args.label_column) if args.target else None
    try:
        norms = [float(v) for v in args.norms.split(",")]
    except ValueError:
        raise ValidationError(f"bad --norms {args.norms!r}") from None
    sweep = experiments.theta_sweep(source, target, norms, args.n_theta)
    text = experiments.sweep_to_csv(sweep)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)


# --------------------------------------------------------------------------
# Parser


def _common(p, formats=("kv", "json", "csv")):
    p.add_argument("--format", choices=formats, default="kv")
    p.add_argument("--label-column", default="label")
    p.add_argument("--seed", type=int, default=0)


def _training_flags(p):
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target")
    for name in ("Omega", "A", "B", "C"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--kernel", choices=("linear", "rbf"),
                   help="train the dual form with this kernel (primal when omitted)")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--nonconvex", action="store_true",
                   help="use the original probit loss instead of its convex surrogate")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--rel-tol", type=float, default=1e-9)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-toy", help="write a synthetic (source, target) pair as CSV")
    p.add_argument("--kind", choices=TOY_KINDS, required=True)
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--rotation", type=float, default=0.0)
    p.add_argument("--out-src", required=True)
    p.add_argument("--out-tgt", required=True)
    _common(p)
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("train", help="fit a model and save it")
    _training_flags(p)
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels for a data file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="empirical risks of a model on labeled data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target")
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bounds", help="report a domain-adaptation bound")
    p.add_argument("--theorem", choices=("8", "9", "12", "13"), required=True)
    p.add_argument("--model")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--delta", type=float, default=0.05)
    for name in ("omega", "a", "b", "c"):
        p.add_argument(f"--{name}", type=float, default=1.0)
    p.add_argument("--beta-inf", type=float)
    p.add_argument("--lambda", dest="lambda_rho", type=float)
    p.add_argument("--eta", type=float)
    for name in ("emp-gibbs", "emp-dis", "emp-dis-t", "emp-joint", "kl"):
        p.add_argument(f"--{name}", type=float)
    for name in ("m", "m-s", "m-t"):
        p.add_argument(f"--{name}", type=int)
    _common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("grid-search", help="score a hyperparameter grid")
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target")
    p.add_argument("--selection", choices=("cv", "reverse_cv"), default="cv")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--axis", action="append", help="name=min:max:points[:log|lin]")
    p.add_argument("--kernel", choices=("linear", "rbf"))
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--nonconvex", action="store_true")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("reverse-cv", help="reverse validation risk of one hyperparameter tuple")
    _training_flags(p)
    p.add_argument("--k", type=int, default=5)
    _common(p)
    p.set_defaults(func=cmd_reverse_cv)

    p = sub.add_parser("sweep-theta", help="risks along w = r (cos t, sin t) for 2-d data")
    p.add_argument("--source", required=True)
    p.add_argument("--target")
    p.add_argument("--norms", default="1,2,5")
    p.add_argument("--n-theta", type=int, default=361)
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_sweep_theta)
    return parser


def run(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except OptimizationError as exc:
        print(f"pbda: optimization failed: {exc}", file=sys.stderr)
        return 2
    except (ValueError, LookupError, OSError) as exc:
        print(f"pbda: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
