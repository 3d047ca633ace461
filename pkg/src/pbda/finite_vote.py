"""Brute-force PAC-Bayes quantities over an explicit finite set of voters.

This is a verification oracle, not a learner.  Every quantity is a ratio of
integer counts weighted by ``rho``; when ``rho`` holds ``fractions.Fraction``
values all results are exact rationals.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True, eq=False)
class FiniteVote:
    """``predictions[h, i]`` is voter h's ±1 output on example i."""

    predictions: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.predictions, dtype=np.int64)
        if P.ndim != 2 or P.size == 0:
            raise ValueError("predictions must be a non-empty votes x examples matrix")
        if not np.all((P == 1) | (P == -1)):
            raise ValueError("predictions must be -1 or +1")
        rho = np.asarray(self.rho)
        if rho.dtype != object:
            rho = rho.astype(float)
        if rho.shape != (P.shape[0],):
            raise ValueError("rho must have one weight per voter")
        if any(r < 0 for r in rho):
            raise ValueError("rho must be nonnegative")
        total = sum(rho)
        if isinstance(total, Fraction):
            if total != 1:
                raise ValueError("rho must sum to 1")
        elif abs(total - 1.0) > 1e-12:
            raise ValueError("rho must sum to 1")
        P.setflags(write=False)
        object.__setattr__(self, "predictions", P)
        object.__setattr__(self, "rho", rho)

    @property
    def n_votes(self) -> int:
        return self.predictions.shape[0]

    @property
    def n_examples(self) -> int:
        return self.predictions.shape[1]

    def _rate(self, counts):
        # counts / n, exact when rho is rational
        n = self.n_examples
        if self.rho.dtype == object:
            if np.ndim(counts) == 0:
                return Fraction(int(counts), n)
            return np.array([[Fraction(int(c), n) for c in row] for row in np.atleast_2d(counts)],
                            dtype=object).reshape(np.shape(counts))
        if np.ndim(counts) == 0:
            return float(counts) / n
        return np.asarray(counts, dtype=float) / n


def _labels(v: FiniteVote, labels):
    y = np.asarray(labels, dtype=np.int64).ravel()
    if y.shape[0] != v.n_examples:
        raise ValueError(f"{y.shape[0]} labels for {v.n_examples} examples")
    return y


def _same_voters(v_s: FiniteVote, v_t: FiniteVote):
    if v_s.n_votes != v_t.n_votes or list(v_s.rho) != list(v_t.rho):
        raise ValueError("both domains must share the voter set and rho")


def voter_risks(v: FiniteVote, labels) -> np.ndarray:
    y = _labels(v, labels)
    return v._rate(np.sum(v.predictions != y, axis=1))


def pair_disagreements(v: FiniteVote) -> np.ndarray:
    """Matrix of pairwise disagreement rates R(h, h')."""
    P = v.predictions
    agree_minus_disagree = P @ P.T
    counts = (v.n_examples - agree_minus_disagree) // 2
    return v._rate(counts)


def pair_joint_errors(v: FiniteVote, labels) -> np.ndarray:
    y = _labels(v, labels)
    E = (v.predictions != y).astype(np.int64)
    return v._rate(E @ E.T)


def fv_gibbs_risk(v: FiniteVote, labels):
    return v.rho @ voter_risks(v, labels)


def fv_bayes_risk(v: FiniteVote, labels):
    y = _labels(v, labels)
    vote = v.rho @ v.predictions
    pred = np.where(np.asarray([s >= 0 for s in vote]), 1, -1)
    return v._rate(np.sum(pred != y))


def fv_disagreement(v: FiniteVote):
    return v.rho @ pair_disagreements(v) @ v.rho


def fv_joint_error(v: FiniteVote, labels):
    return v.rho @ pair_joint_errors(v, labels) @ v.rho


def fv_domain_disagreement(v_s: FiniteVote, v_t: FiniteVote):
    _same_voters(v_s, v_t)
    return abs(fv_disagreement(v_t) - fv_disagreement(v_s))


def fv_hdh(v_s: FiniteVote, v_t: FiniteVote):
    """Half the HΔH distance restricted to the voter set: max |R_T(h,h') - R_S(h,h')|."""
    _same_voters(v_s, v_t)
    diff = pair_disagreements(v_t) - pair_disagreements(v_s)
    return max(abs(d) for d in diff.ravel())


def fv_bendavid_rhs(v_s: FiniteVote, labels_s, v_t: FiniteVote, labels_t, h_index: int):
    """R_S(h) + ½ d_HΔH + min_h' (R_S(h') + R_T(h')) for voter ``h_index``."""
    _same_voters(v_s, v_t)
    if not 0 <= h_index < v_s.n_votes:
        raise ValueError(f"voter index {h_index} out of range")
    rs = voter_risks(v_s, labels_s)
    rt = voter_risks(v_t, labels_t)
    mu = min(a + b for a, b in zip(rs, rt))
    return rs[h_index] + fv_hdh(v_s, v_t) + mu
