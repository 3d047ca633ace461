"""Closed-form empirical PAC-Bayes quantities for Gaussian posteriors N(w, I).

A *margin provider* is anything with a ``margins(sample)`` method returning the
normalized margins (w . x) / ||x||.  ``LinearPosterior`` is the primal form,
``DualPosterior`` the kernel (representer) form; a plain weight vector is also
accepted wherever a provider is expected.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import losses
from .data_io import LabeledSample, UnlabeledSample
from .exceptions import UnavailableError, UndefinedBoundError
from .kernels import GramMatrix, Kernel


def _feature_matrix(sample):
    if isinstance(sample, UnlabeledSample):
        return sample.features
    return np.atleast_2d(np.asarray(sample, dtype=float))


@dataclass(frozen=True, eq=False)
class LinearPosterior:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if not np.all(np.isfinite(w)):
            raise ValueError("posterior mean must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def kl(self) -> float:
        """KL(N(w, I) || N(0, I)) = ||w||^2 / 2."""
        return 0.5 * float(self.w @ self.w)

    def margins(self, sample) -> np.ndarray:
        if isinstance(sample, UnlabeledSample):
            if sample.dim != self.w.shape[0]:
                raise ValueError(f"dimension mismatch: w has {self.w.shape[0]}, data {sample.dim}")
            return sample.normalized @ self.w
        X = _feature_matrix(sample)
        if X.shape[1] != self.w.shape[0]:
            raise ValueError(f"dimension mismatch: w has {self.w.shape[0]}, data {X.shape[1]}")
        return (X @ self.w) / np.linalg.norm(X, axis=1)

    def scores(self, X) -> np.ndarray:
        return _feature_matrix(X) @ self.w


@dataclass(frozen=True, eq=False)
class DualPosterior:
    """w = sum_j alpha_j phi(x_j) over ``support`` points in the kernel's RKHS."""

    alpha: np.ndarray
    support: np.ndarray
    kernel: Kernel
    gram: Optional[GramMatrix] = None

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).ravel()
        support = np.atleast_2d(np.array(self.support, dtype=float))
        if alpha.shape[0] != support.shape[0]:
            raise ValueError("alpha and support sizes differ")
        alpha.setflags(write=False)
        support.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "support", support)

    def _K(self):
        if self.gram is not None:
            return self.gram.entries
        return self.kernel(self.support, self.support)

    def kl(self) -> float:
        return 0.5 * float(self.alpha @ self._K() @ self.alpha)

    def scores(self, X) -> np.ndarray:
        return self.kernel(_feature_matrix(X), self.support) @ self.alpha

    def margins(self, sample) -> np.ndarray:
        X = _feature_matrix(sample)
        return self.scores(X) / np.sqrt(self.kernel.diag(X))

    def to_primal(self) -> LinearPosterior:
        """Collapse to an explicit weight vector (linear kernel only)."""
        if self.kernel.kind != "linear":
            raise ValueError("only a linear-kernel dual model has a finite primal form")
        return LinearPosterior(self.support.T @ self.alpha)


def as_provider(p):
    if hasattr(p, "margins"):
        return p
    return LinearPosterior(p)


def _nonempty(sample, name):
    if sample is None or len(_feature_matrix(sample)) == 0:
        raise ValueError(f"{name} sample is empty")


def _signed_margins(p, s: LabeledSample):
    _nonempty(s, "labeled")
    return s.labels * as_provider(p).margins(s)


def gibbs_risk(p, s: LabeledSample) -> float:
    return float(np.mean(losses.probit_loss(_signed_margins(p, s)).value))


def convex_gibbs_risk(p, s: LabeledSample) -> float:
    """Mean of the convex probit surrogate (can exceed 1)."""
    return float(np.mean(losses.convex_probit_loss(_signed_margins(p, s)).value))


def disagreement(p, u) -> float:
    """Expected disagreement; labels, if present, are ignored."""
    _nonempty(u, "unlabeled")
    return float(np.mean(losses.disagreement_loss(as_provider(p).margins(u)).value))


def joint_error(p, s: LabeledSample) -> float:
    return float(np.mean(losses.joint_error_loss(_signed_margins(p, s)).value))


def domain_disagreement(p, s, t) -> float:
    """|d_T - d_S|; the two samples may have different sizes."""
    return abs(disagreement(p, t) - disagreement(p, s))


def bayes_risk(p, s: LabeledSample) -> float:
    """0-1 error of the majority vote sign(w . x), with sign(0) = +1."""
    _nonempty(s, "labeled")
    scores = as_provider(p).margins(s)
    pred = np.where(scores >= 0, 1, -1)
    return float(np.mean(pred != s.labels))


def c_bound(gibbs_risk: float, disagreement: float) -> float:
    """1 - (1 - 2 R_G)^2 / (1 - 2 d).

    Plain arithmetic so that ``fractions.Fraction`` inputs stay exact.
    """
    if disagreement >= 0.5 or not disagreement == disagreement:
        raise UndefinedBoundError("C-bound requires disagreement < 1/2")
    return 1 - (1 - 2 * gibbs_risk) ** 2 / (1 - 2 * disagreement)


def lambda_rho(p, s_labeled: LabeledSample, t_labeled) -> float:
    """|e_T - e_S|; needs target labels, so only usable on synthetic data."""
    if not isinstance(t_labeled, LabeledSample):
        raise UnavailableError("lambda_rho needs a labeled target sample")
    return abs(joint_error(p, t_labeled) - joint_error(p, s_labeled))


def monte_carlo_gibbs(w, s: LabeledSample, n_draws: int, seed: int,
                      batch: int = 20000) -> Tuple[float, float]:
    """Average 0-1 error of h_{w'} with w' ~ N(w, I).

    Returns (estimate, standard error of the mean over draws).
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    w = np.asarray(w, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    X, y = s.features, s.labels
    err = np.empty(n_draws)
    done = 0
    while done < n_draws:
        b = min(batch, n_draws - done)
        W = w + rng.standard_normal((b, w.shape[0]))
        pred = np.where(W @ X.T >= 0, 1, -1)
        err[done:done + b] = np.mean(pred != y, axis=1)
        done += b
    est = float(np.mean(err))
    stderr = float(np.std(err, ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else float("nan")
    return est, stderr
