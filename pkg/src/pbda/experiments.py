"""Toy-experiment harnesses: the theta sweeps, the rotated moons and bound-validity trials."""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import bounds
from . import estimators as est
from .data_io import LabeledSample, ToySpec, gaussian_da_holdout, gen_toy
from .kernels import Kernel
from .training import OptimizerSettings, train

SWEEP_COLUMNS = ("norm", "theta", "bayes_source", "gibbs_source", "convex_gibbs_source",
                 "dis_source", "dis_target", "domain_dis", "joint_source")
TARGET_COLUMNS = ("bayes_target", "gibbs_target")


def theta_sweep(source: LabeledSample, target=None, norms: Sequence[float] = (1.0, 2.0, 5.0),
                n_theta: int = 361) -> Dict[str, np.ndarray]:
    """Risks of w = r (cos t, sin t) for t on a uniform grid over [-pi, pi].

    Returns column arrays (one entry per (norm, theta) row).  Target columns use
    only target features, except the target risks, which need labels.
    """
    if source.dim != 2:
        raise ValueError("the theta sweep is defined for 2-d data")
    target = target if target is not None else source
    thetas = np.linspace(-np.pi, np.pi, n_theta)
    labeled_target = isinstance(target, LabeledSample)
    cols = {c: [] for c in SWEEP_COLUMNS + (TARGET_COLUMNS if labeled_target else ())}
    for r in norms:
        for t in thetas:
            w = est.LinearPosterior(r * np.array([math.cos(t), math.sin(t)]))
            d_s, d_t = est.disagreement(w, source), est.disagreement(w, target)
            row = {
                "norm": float(r), "theta": float(t),
                "bayes_source": est.bayes_risk(w, source),
                "gibbs_source": est.gibbs_risk(w, source),
                "convex_gibbs_source": est.convex_gibbs_risk(w, source),
                "dis_source": d_s, "dis_target": d_t, "domain_dis": abs(d_t - d_s),
                "joint_source": est.joint_error(w, source),
            }
            if labeled_target:
                row["bayes_target"] = est.bayes_risk(w, target)
                row["gibbs_target"] = est.gibbs_risk(w, target)
            for c in cols:
                cols[c].append(row[c])
    return {c: np.asarray(v) for c, v in cols.items()}


def sweep_to_csv(sweep: Dict[str, np.ndarray]) -> str:
    names = list(sweep)
    lines = [",".join(names)]
    for i in range(len(sweep["theta"])):
        lines.append(",".join(f"{float(sweep[c][i]):.17g}" for c in names))
    return "\n".join(lines) + "\n"


def gibbs_bayes_gap(sweep, norm: float) -> float:
    """sup over theta of |R_S(G) - R_S(B)| at one norm."""
    sel = sweep["norm"] == norm
    return float(np.max(np.abs(sweep["gibbs_source"][sel] - sweep["bayes_source"][sel])))


def argmin_theta(sweep, norm: float, values: np.ndarray) -> float:
    sel = sweep["norm"] == norm
    return float(sweep["theta"][sel][int(np.argmin(np.asarray(values)[sel]))])


def axis_distance(theta1: float, theta2: float) -> float:
    """Angle between two decision boundaries: distance modulo pi, in [0, pi/2]."""
    d = (theta1 - theta2) % math.pi
    return min(d, math.pi - d)


# --------------------------------------------------------------------------
# Rotated moons


@dataclass
class MoonsResult:
    rotation_deg: float
    errors: Dict[str, List[float]]

    def means(self) -> Dict[str, float]:
        return {a: float(np.mean(v)) for a, v in self.errors.items()}


def moons_experiment(rotation_deg: float, seeds: Sequence[int] = range(10),
                     n_per_class: int = 100, noise_sigma: float = 0.1, gamma: float = 1.0,
                     Omega: float = 1.0, A: float = 1.0, B: float = 1.0, C: float = 1.0,
                     settings: Optional[OptimizerSettings] = None) -> MoonsResult:
    """Target 0-1 error of source-only PBGD3, PBDA and DALC with an RBF kernel."""
    kernel = Kernel("rbf", gamma)
    errors = {"pbgd3": [], "pbda": [], "dalc": []}
    for seed in seeds:
        src, tgt = gen_toy(ToySpec("two_moons", n_per_class, noise_sigma, rotation_deg, seed))
        feats = tgt.unlabeled()
        models = {
            "pbgd3": train("pbgd3", src, None, {"Omega": Omega}, kernel, settings),
            "pbda": train("pbda", src, feats, {"Omega": Omega, "A": A}, kernel, settings),
            "dalc": train("dalc", src, feats, {"B": B, "C": C}, kernel, settings),
        }
        for name, model in models.items():
            errors[name].append(est.bayes_risk(model, tgt))
    return MoonsResult(rotation_deg, errors)


# --------------------------------------------------------------------------
# Empirical validity of the linear-classifier bounds


@dataclass
class ValidityTrial:
    seed: int
    pbda_target_risk: float
    corollary12: float
    dalc_target_risk: float
    corollary13: float

    @property
    def holds(self) -> bool:
        return self.pbda_target_risk <= self.corollary12 and self.dalc_target_risk <= self.corollary13


def _gaussian_da_beta_inf() -> float:
    # target negatives N((1,1), I) vs source negatives N((-1,1), I): unbounded ratio
    return bounds.beta_q_gaussian((-1.0, 1.0), (1.0, 1.0), math.inf)


def bound_validity_trials(n_trials: int = 100, n_per_class: int = 100, holdout_size: int = 10000,
                          delta: float = 0.05, omega: float = 1.0, a: float = 1.0, b: float = 1.0,
                          c: float = 1.0, hyper_pbda=None, hyper_dalc=None,
                          first_seed: int = 0) -> List[ValidityTrial]:
    """Corollary-style bounds of trained linear models vs their holdout target majority-vote risk.

    PBDA supplies the model for the disagreement-based bound and DALC the model
    for the beta-weighted one.  lambda_rho and eta come from large labeled
    holdouts; beta_inf from the closed form of the toy densities.
    """
    hyper_pbda = hyper_pbda or {"Omega": 1.0, "A": 1.0}
    hyper_dalc = hyper_dalc or {"B": 1.0, "C": 1.0}
    beta_inf = _gaussian_da_beta_inf()
    half = holdout_size // 2
    trials = []
    for seed in range(first_seed, first_seed + n_trials):
        src, tgt = gen_toy(ToySpec("gaussian_da", n_per_class, seed=seed))
        feats = tgt.unlabeled()
        t_hold = gaussian_da_holdout(half, seed + 1_000_003)
        s_hold = gen_toy(ToySpec("gaussian_supervised", half, seed=seed + 2_000_003))[0]
        pbda = train("pbda", src, feats, hyper_pbda)
        dalc = train("dalc", src, feats, hyper_dalc)
        lam = est.lambda_rho(pbda, s_hold, t_hold)
        r12 = bounds.corollary12_from_samples(
            pbda, src, feats, delta, omega, a,
            bounds.NonEstimable(lam, "holdout"))
        # both toy domains share full support, so eta_{T\S} = 0
        r13 = bounds.corollary13_from_samples(
            dalc, src, feats, delta, b, c, beta_inf, bounds.NonEstimable(0.0, "closed_form"))
        trials.append(ValidityTrial(seed, est.bayes_risk(pbda, t_hold), r12.total,
                                    est.bayes_risk(dalc, t_hold), r13.total))
    return trials
