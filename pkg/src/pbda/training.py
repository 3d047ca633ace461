"""PBGD3, PBDA and DALC objectives (primal and kernel dual), the minimizer and trainers.

Every objective returns ``(value, gradient)``.  The primal parameter is a weight
vector over the raw features; the dual parameter is a coefficient vector over
the rows of a Gram matrix (source rows first for the adaptation algorithms).
"""

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import optimize

from . import losses
from .data_io import LabeledSample, UnlabeledSample
from .estimators import DualPosterior, LinearPosterior
from .exceptions import OptimizationError, ValidationError
from .kernels import GramMatrix, Kernel, gram, joint_gram

ALGORITHMS = ("pbgd3", "pbda", "dalc")
HYPERPARAMETERS = {"pbgd3": ("Omega",), "pbda": ("Omega", "A"), "dalc": ("B", "C")}
MODEL_MAGIC = "PBDA-MODEL"
MODEL_VERSION = "v1"


def _check_hyper(**kwargs):
    for name, val in kwargs.items():
        if not (np.isfinite(val) and val >= 0):
            raise ValueError(f"{name} must be a finite nonnegative number, got {val}")


# --------------------------------------------------------------------------
# Margin maps: parameters -> normalized margins, and the adjoint for gradients


class _PrimalMap:
    def __init__(self, normalized):
        self.Xn = normalized

    def check(self, w):
        if w.shape != (self.Xn.shape[1],):
            raise ValueError(f"weight vector has shape {w.shape}, expected ({self.Xn.shape[1]},)")

    def margins(self, w):
        return self.Xn @ w

    def pullback(self, g):
        return self.Xn.T @ g

    def regularizer(self, w):
        # (||w||^2, gradient of ||w||^2)
        return float(w @ w), 2.0 * w


class _DualMap:
    def __init__(self, g: GramMatrix):
        self.K = g.entries
        self.norms = g.row_norms

    def check(self, alpha):
        if alpha.shape != (self.K.shape[0],):
            raise ValueError(f"alpha has shape {alpha.shape}, expected ({self.K.shape[0]},)")

    def margins(self, alpha):
        self._Ka = self.K @ alpha
        return self._Ka / self.norms

    def pullback(self, g):
        return self.K @ (g / self.norms)

    def regularizer(self, alpha):
        Ka = self.K @ alpha
        return float(alpha @ Ka), 2.0 * Ka


def _vec(x):
    return np.asarray(x, dtype=float).ravel()


def _source_loss(convex):
    return losses.convex_probit_loss if convex else losses.probit_loss


def _pbgd3(mp, params, y, Omega, convex):
    _check_hyper(Omega=Omega)
    params = _vec(params)
    mp.check(params)
    f = _source_loss(convex)(y * mp.margins(params))
    reg, dreg = mp.regularizer(params)
    value = Omega * math.fsum(f.value) + 0.5 * reg
    grad = Omega * mp.pullback(f.derivative * y) + 0.5 * dreg
    return value, grad


def objective_pbgd3_primal(w, source: LabeledSample, Omega: float, convex: bool = False):
    """Omega * sum Phi(y m_i) + ||w||^2 / 2; ``convex`` swaps in the convex surrogate."""
    return _pbgd3(_PrimalMap(source.normalized), w, source.labels, Omega, convex)


def objective_pbgd3_dual(alpha, K: GramMatrix, labels, Omega: float, convex: bool = False):
    y = np.asarray(labels, dtype=float).ravel()
    if y.shape[0] != K.size:
        raise ValueError(f"{y.shape[0]} labels for a {K.size}x{K.size} Gram matrix")
    return _pbgd3(_DualMap(K), alpha, y, Omega, convex)


def _da_map(source, target, form, K):
    if form == "primal":
        if source.dim != target.dim:
            raise ValueError(f"dimension mismatch: source {source.dim}, target {target.dim}")
        return _PrimalMap(np.vstack([source.normalized, target.normalized]))
    if form == "dual":
        if K is None:
            K = joint_gram(source, target)
        if K.size != len(source) + len(target):
            raise ValueError(f"joint Gram has size {K.size}, expected {len(source) + len(target)}")
        return _DualMap(K)
    raise ValueError(f"form must be 'primal' or 'dual', got {form!r}")


def objective_pbda(params, source: LabeledSample, target: UnlabeledSample, Omega: float,
                   A: float, form: str = "primal", gram: Optional[GramMatrix] = None,
                   convex: bool = True):
    """Omega * sum Phi~(y m^s) + A |sum Phi_d(m^s) - Phi_d(m^t)| + ||w||^2 / 2."""
    _check_hyper(Omega=Omega, A=A)
    ms = len(source)
    if ms != len(target):
        raise ValueError(f"PBDA pairs source and target examples; sizes {ms} and {len(target)}")
    mp = _da_map(source, target, form, gram)
    params = _vec(params)
    mp.check(params)
    marg = mp.margins(params)
    y = source.labels
    f = _source_loss(convex)(y * marg[:ms])
    ds = losses.disagreement_loss(marg[:ms])
    dt = losses.disagreement_loss(marg[ms:])
    gap = math.fsum(ds.value) - math.fsum(dt.value)
    s = float(np.sign(gap))  # 0 exactly at the kink
    reg, dreg = mp.regularizer(params)
    value = Omega * math.fsum(f.value) + A * abs(gap) + 0.5 * reg
    g = np.concatenate([Omega * f.derivative * y + s * A * ds.derivative,
                        -s * A * dt.derivative])
    return value, mp.pullback(g) + 0.5 * dreg


def objective_dalc(params, source: LabeledSample, target: UnlabeledSample, B: float, C: float,
                   form: str = "primal", gram: Optional[GramMatrix] = None):
    """C * sum_T Phi_d(m^t) + B * sum_S Phi_e(y m^s) + ||w||^2."""
    _check_hyper(B=B, C=C)
    ms = len(source)
    mp = _da_map(source, target, form, gram)
    params = _vec(params)
    mp.check(params)
    marg = mp.margins(params)
    y = source.labels
    e = losses.joint_error_loss(y * marg[:ms])
    d = losses.disagreement_loss(marg[ms:])
    reg, dreg = mp.regularizer(params)
    value = C * math.fsum(d.value) + B * math.fsum(e.value) + reg
    g = np.concatenate([B * e.derivative * y, C * d.derivative])
    return value, mp.pullback(g) + dreg


# --------------------------------------------------------------------------
# Minimizer


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 1000
    grad_sup_norm_tol: float = 1e-6
    rel_objective_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.grad_sup_norm_tol > 0 and self.rel_objective_tol > 0):
            raise ValueError("tolerances must be > 0")


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    message: str
    grad_sup_norm: float
    history: List[float] = field(default_factory=list)


class _NonFinite(Exception):
    pass


class _Cached:
    """Objective wrapper memoizing the last evaluation (the line search asks for f and g separately)."""

    def __init__(self, objective):
        self.objective = objective
        self.x = None
        self.calls = 0

    def __call__(self, x):
        if self.x is None or not np.array_equal(x, self.x):
            f, g = self.objective(x)
            g = _vec(g)
            self.calls += 1
            if not (np.isfinite(f) and np.all(np.isfinite(g))):
                raise _NonFinite
            self.x, self.f, self.g = np.array(x), float(f), g
        return self.f, self.g

    def value(self, x):
        return self(x)[0]

    def grad(self, x):
        return self(x)[1]


def _backtrack(fc, x, p, f, g, c1=1e-4, shrink=0.5, tries=60):
    # Armijo backtracking, used when the Wolfe search fails
    slope = float(g @ p)
    step = 1.0
    for _ in range(tries):
        if fc.value(x + step * p) <= f + c1 * step * slope:
            return step
        step *= shrink
    return None


def minimize(objective: Callable, init, settings: Optional[OptimizerSettings] = None
             ) -> MinimizeResult:
    """BFGS with a strong-Wolfe line search.

    Stops when the gradient sup-norm falls below its tolerance, when a step
    changes the objective by at most ``rel_objective_tol * max(|f|, 1)`` without
    lowering the gradient sup-norm (a stall), or after ``max_iterations``.
    A non-finite value or gradient raises :class:`OptimizationError` carrying
    the last accepted iterate.
    """
    settings = settings or OptimizerSettings()
    fc = _Cached(objective)
    x = _vec(init).copy()
    try:
        f, g = fc(x)
    except _NonFinite:
        raise OptimizationError("objective is not finite at the initial point", x, None, 0) from None
    n = x.shape[0]
    H = np.eye(n)
    history = [f]
    f_prev = f + max(abs(f), 1.0)  # old_old_fval guess for the first trial step
    it = 0
    message, converged = "maximum iterations reached", False
    try:
        while True:
            gsup = float(np.max(np.abs(g))) if n else 0.0
            if gsup <= settings.grad_sup_norm_tol:
                message, converged = "gradient sup-norm below tolerance", True
                break
            if it >= settings.max_iterations:
                break
            p = -H @ g
            if g @ p >= 0:  # lost positive definiteness
                H = np.eye(n)
                p = -g
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", optimize.OptimizeWarning)
                warnings.simplefilter("ignore", RuntimeWarning)
                step = optimize.line_search(fc.value, fc.grad, x, p, g, f, f_prev)[0]
            if step is None:
                step = _backtrack(fc, x, p, f, g)
            if step is None and not np.array_equal(H, np.eye(n)):
                H = np.eye(n)
                p = -g
                step = _backtrack(fc, x, p, f, g)
            if step is None:
                message = "line search failed to find a decrease"
                break
            x_new = x + step * p
            f_new, g_new = fc(x_new)
            s, yv = x_new - x, g_new - g
            sy = float(s @ yv)
            if sy > 1e-12 * float(np.sqrt((s @ s) * (yv @ yv))):
                if it == 0:
                    H = np.eye(n) * (sy / float(yv @ yv))
                rho = 1.0 / sy
                Hy = H @ yv
                H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                     + (rho * rho * float(yv @ Hy) + rho) * np.outer(s, s))
            f_prev, f_old = f, f
            x, f, g = x_new, f_new, g_new
            it += 1
            history.append(f)
            gsup_new = float(np.max(np.abs(g))) if n else 0.0
            if (abs(f_old - f) <= settings.rel_objective_tol * max(abs(f), 1.0)
                    and gsup_new >= gsup):
                message, converged = "stalled: relative objective change below tolerance", True
                break
    except _NonFinite:
        raise OptimizationError("objective became non-finite during the line search",
                                x, f, it) from None
    gsup = float(np.max(np.abs(g))) if n else 0.0
    return MinimizeResult(x, f, it, converged, message, gsup, history)


# --------------------------------------------------------------------------
# Trained models


@dataclass(eq=False)
class TrainedModel:
    algorithm: str
    representation: str  # "primal" or "dual"
    hyperparameters: Dict[str, float]
    coefficients: np.ndarray
    kernel: Kernel = field(default_factory=Kernel)
    support: Optional[np.ndarray] = None
    objective_value: float = float("nan")
    iterations_used: int = 0
    converged: bool = True
    message: str = ""

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.representation not in ("primal", "dual"):
            raise ValueError(f"representation must be primal or dual, got {self.representation!r}")
        self.coefficients = _vec(self.coefficients)
        if self.representation == "dual":
            if self.support is None:
                raise ValueError("a dual model needs its support points")
            self.support = np.atleast_2d(np.asarray(self.support, dtype=float))
            if self.support.shape[0] != self.coefficients.shape[0]:
                raise ValueError("one coefficient per support point expected")

    @property
    def posterior(self):
        if self.representation == "primal":
            return LinearPosterior(self.coefficients)
        return DualPosterior(self.coefficients, self.support, self.kernel)

    @property
    def dim(self) -> int:
        if self.representation == "primal":
            return self.coefficients.shape[0]
        return self.support.shape[1]

    def kl(self) -> float:
        return self.posterior.kl()

    def margins(self, sample) -> np.ndarray:
        return self.posterior.margins(sample)

    def scores(self, X) -> np.ndarray:
        X = X.features if isinstance(X, UnlabeledSample) else np.atleast_2d(np.asarray(X, float))
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: model has {self.dim}, data {X.shape[1]}")
        return self.posterior.scores(X)


def predict(model: TrainedModel, x):
    """sign of the model's score with sign(0) = +1; a single vector gives a single label."""
    single = not isinstance(x, UnlabeledSample) and np.ndim(x) == 1
    pred = np.where(model.scores(x) >= 0, 1, -1)
    return int(pred[0]) if single else pred


def _hyper(algorithm, hyperparameters):
    names = HYPERPARAMETERS[algorithm]
    missing = [n for n in names if n not in hyperparameters]
    if missing:
        raise ValueError(f"{algorithm} needs hyperparameters {names}; missing {missing}")
    vals = {n: float(hyperparameters[n]) for n in names}
    _check_hyper(**vals)
    return vals


def dual_init(source: LabeledSample, target: Optional[UnlabeledSample] = None) -> np.ndarray:
    """alpha_i = y_i / M on source rows and 1 / M on target rows."""
    y = source.labels.astype(float)
    tail = np.ones(len(target)) if target is not None else np.empty(0)
    M = len(y) + len(tail)
    return np.concatenate([y, tail]) / M


def train(algorithm: str, source: LabeledSample, target: Optional[UnlabeledSample] = None,
          hyperparameters: Optional[Dict[str, float]] = None, kernel: Optional[Kernel] = None,
          settings: Optional[OptimizerSettings] = None, convex: bool = True,
          gram_matrix: Optional[GramMatrix] = None) -> TrainedModel:
    """Fit one of the three learners.

    ``kernel=None`` trains the primal form; a :class:`Kernel` trains the dual form
    over the (source, then target) support points.  ``convex`` selects the convex
    surrogate for the source term of PBGD3 and PBDA.  A precomputed
    ``gram_matrix`` over those support points may be passed to skip its construction.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if not isinstance(source, LabeledSample):
        raise ValueError("source must be a labeled sample")
    hp = _hyper(algorithm, hyperparameters or {})
    settings = settings or OptimizerSettings()
    if algorithm != "pbgd3":
        if target is None:
            raise ValueError(f"{algorithm} needs an unlabeled target sample")
        if isinstance(target, LabeledSample):
            target = target.unlabeled()
        if target.dim != source.dim:
            raise ValueError(f"dimension mismatch: source {source.dim}, target {target.dim}")
    trainer = _TRAINERS[(algorithm, kernel is not None)]
    return trainer(source, target, hp, kernel, settings, convex, gram_matrix)


def _run(stages, init, settings):
    # chain minimize runs, each warm-started from the previous argmin
    x, total, res = init, 0, None
    for obj in stages:
        res = minimize(obj, x, settings)
        x, total = res.x, total + res.iterations
    return res, total


def _model(algorithm, rep, hp, res, iters, kernel=Kernel(), support=None):
    return TrainedModel(algorithm, rep, dict(hp), res.x, kernel, support, res.value,
                        iters, res.converged, res.message)


def _train_pbgd3_primal(source, target, hp, kernel, settings, convex, K):
    Om = hp["Omega"]
    stages = [lambda w: objective_pbgd3_primal(w, source, Om, convex=True)]
    if not convex:
        stages.append(lambda w: objective_pbgd3_primal(w, source, Om, convex=False))
    res, iters = _run(stages, np.zeros(source.dim), settings)
    return _model("pbgd3", "primal", hp, res, iters)


def _train_pbgd3_dual(source, target, hp, kernel, settings, convex, K):
    Om = hp["Omega"]
    K = K if K is not None else gram(source, kernel)
    stages = [lambda a: objective_pbgd3_dual(a, K, source.labels, Om, convex=True)]
    if not convex:
        stages.append(lambda a: objective_pbgd3_dual(a, K, source.labels, Om, convex=False))
    res, iters = _run(stages, dual_init(source), settings)
    return _model("pbgd3", "dual", hp, res, iters, kernel, source.features)


def _train_pbda_primal(source, target, hp, kernel, settings, convex, K):
    Om, A = hp["Omega"], hp["A"]
    if len(source) != len(target):
        raise ValueError(f"PBDA pairs source and target examples; sizes {len(source)} "
                         f"and {len(target)}")
    stages = [lambda w: objective_pbgd3_primal(w, source, Om, convex=True),
              lambda w: objective_pbda(w, source, target, Om, A, convex=convex)]
    res, iters = _run(stages, np.zeros(source.dim), settings)
    return _model("pbda", "primal", hp, res, iters)


def _train_pbda_dual(source, target, hp, kernel, settings, convex, K):
    Om, A = hp["Omega"], hp["A"]
    if len(source) != len(target):
        raise ValueError(f"PBDA pairs source and target examples; sizes {len(source)} "
                         f"and {len(target)}")
    K = K if K is not None else joint_gram(source, target, kernel)
    stages = [lambda a: objective_pbda(a, source, target, Om, 0.0, "dual", K, convex=True),
              lambda a: objective_pbda(a, source, target, Om, A, "dual", K, convex=convex)]
    res, iters = _run(stages, dual_init(source, target), settings)
    return _model("pbda", "dual", hp, res, iters, kernel,
                  np.vstack([source.features, target.features]))


def _train_dalc_primal(source, target, hp, kernel, settings, convex, K):
    B, C = hp["B"], hp["C"]
    stages = [lambda w: objective_dalc(w, source, target, B, C)]
    res, iters = _run(stages, np.full(source.dim, 1.0 / source.dim), settings)
    return _model("dalc", "primal", hp, res, iters)


def _train_dalc_dual(source, target, hp, kernel, settings, convex, K):
    B, C = hp["B"], hp["C"]
    K = K if K is not None else joint_gram(source, target, kernel)
    stages = [lambda a: objective_dalc(a, source, target, B, C, "dual", K)]
    res, iters = _run(stages, dual_init(source, target), settings)
    return _model("dalc", "dual", hp, res, iters, kernel,
                  np.vstack([source.features, target.features]))


_TRAINERS = {
    ("pbgd3", False): _train_pbgd3_primal, ("pbgd3", True): _train_pbgd3_dual,
    ("pbda", False): _train_pbda_primal, ("pbda", True): _train_pbda_dual,
    ("dalc", False): _train_dalc_primal, ("dalc", True): _train_dalc_dual,
}


# --------------------------------------------------------------------------
# Model files


def _g(v):
    return f"{float(v):.17g}"


def save_model(path, model: TrainedModel):
    kind = model.kernel.kind
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION} {model.algorithm} {model.representation} {kind}"]
    if kind == "rbf":
        lines.append(f"gamma {_g(model.kernel.gamma)}")
    for name, val in model.hyperparameters.items():
        lines.append(f"hyper {name} {_g(val)}")
    lines.append(f"objective {_g(model.objective_value)}")
    lines.append(f"iterations {model.iterations_used}")
    lines.append(f"coefficients {model.coefficients.shape[0]}")
    lines.extend(_g(c) for c in model.coefficients)
    if model.representation == "dual":
        n, d = model.support.shape
        lines.append(f"support {n} {d}")
        lines.extend(" ".join(_g(v) for v in row) for row in model.support)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty model file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != MODEL_MAGIC:
        raise ValidationError(f"{path}: not a model file")
    if head[1] != MODEL_VERSION:
        raise ValidationError(f"{path}: unsupported model version {head[1]}")
    _, _, algorithm, rep, kind = head
    gamma, hyper, objective, iterations = 1.0, {}, float("nan"), 0
    coefs, support = None, None
    i = 1
    try:
        while i < len(lines):
            tok = lines[i].split()
            i += 1
            if not tok:
                continue
            key = tok[0]
            if key == "gamma":
                gamma = float(tok[1])
            elif key == "hyper":
                hyper[tok[1]] = float(tok[2])
            elif key == "objective":
                objective = float(tok[1])
            elif key == "iterations":
                iterations = int(tok[1])
            elif key == "coefficients":
                n = int(tok[1])
                coefs = np.array([float(v) for v in lines[i:i + n]])
                if coefs.shape[0] != n:
                    raise ValidationError(f"{path}: truncated coefficient block")
                i += n
            elif key == "support":
                n, d = int(tok[1]), int(tok[2])
                rows = [[float(v) for v in line.split()] for line in lines[i:i + n]]
                support = np.array(rows)
                if support.shape != (n, d):
                    raise ValidationError(f"{path}: malformed support block")
                i += n
            else:
                raise ValidationError(f"{path}: line {i}: unknown record {key!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"{path}: line {i}: {exc}") from None
    if coefs is None:
        raise ValidationError(f"{path}: no coefficients")
    try:
        return TrainedModel(algorithm, rep, hyper, coefs, Kernel(kind, gamma), support,
                            objective, iterations)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
