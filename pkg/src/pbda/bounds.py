"""PAC-Bayesian bound calculators and the beta_q domain divergence.

The domain-adaptation bounds contain terms no learner can estimate without
target labels (lambda_rho, eta_{T\\S}) or without the densities (beta_inf).
They are carried as :class:`NonEstimable` placeholders: a supplied value is
added to the total, an unknown one contributes 0 and stays flagged in the
report.
"""

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Optional

import numpy as np

from . import estimators as est
from .exceptions import ContractError

COROLLARY7_KINDS = ("target_disagreement", "source_joint", "domain_disagreement")


def _check_delta(delta):
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")


def _check_positive(**kwargs):
    for name, val in kwargs.items():
        if not val > 0:
            raise ValueError(f"{name} must be > 0, got {val}")


def _check_common(m, kl, delta):
    _check_delta(delta)
    if not m >= 1:
        raise ValueError(f"sample size must be >= 1, got {m}")
    if not kl >= 0:
        raise ValueError(f"kl must be >= 0, got {kl}")


def catoni_multiplier(c: float) -> float:
    """c / (1 - exp(-c))."""
    return c / -math.expm1(-c)


def _mul(a, b):
    # 0 * inf is taken as 0 (an absent term stays absent)
    if a == 0 or b == 0:
        return 0.0
    return a * b


# --------------------------------------------------------------------------
# Report structures


@dataclass
class NonEstimable:
    value: Optional[float] = None
    origin: str = "unknown"

    @property
    def known(self) -> bool:
        return self.value is not None

    @property
    def contribution(self) -> float:
        return 0.0 if self.value is None else float(self.value)


def _placeholder(x, default_origin="supplied") -> NonEstimable:
    if isinstance(x, NonEstimable):
        return x
    if x is None:
        return NonEstimable()
    return NonEstimable(float(x), default_origin)


@dataclass
class BoundConstants:
    delta: float
    kl: float
    kl_multiplier: int = 1
    m: Optional[int] = None
    m_s: Optional[int] = None
    m_t: Optional[int] = None
    omega: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None


@dataclass
class BoundReport:
    bound: str
    empirical_terms: Dict[str, float]
    constants: BoundConstants
    non_estimable: Dict[str, NonEstimable]
    terms: Dict[str, float]
    total: float
    valid_with_probability: float

    def recompute_total(self) -> float:
        return math.fsum(self.terms.values())

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "total": self.total,
            "valid_with_probability": self.valid_with_probability,
            "empirical_terms": dict(self.empirical_terms),
            "constants": {k: v for k, v in asdict(self.constants).items() if v is not None},
            "non_estimable": {k: {"value": v.value, "origin": v.origin}
                              for k, v in self.non_estimable.items()},
            "terms": dict(self.terms),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_float)

    def to_kv(self) -> str:
        lines = [f"bound={self.bound}"]
        for k, v in self.empirical_terms.items():
            lines.append(f"empirical.{k}={_fmt(v)}")
        for k, v in asdict(self.constants).items():
            if v is not None:
                lines.append(f"constant.{k}={_fmt(v)}")
        for k, v in self.non_estimable.items():
            lines.append(f"non_estimable.{k}={'unknown' if v.value is None else _fmt(v.value)}")
            lines.append(f"non_estimable.{k}.origin={v.origin}")
        for k, v in self.terms.items():
            lines.append(f"term.{k}={_fmt(v)}")
        lines.append(f"total={_fmt(self.total)}")
        lines.append(f"valid_with_probability={_fmt(self.valid_with_probability)}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["name,value"]
        for line in self.to_kv().splitlines():
            k, _, v = line.partition("=")
            rows.append(f"{k},{v}")
        return "\n".join(rows) + "\n"


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.17g}"


def _json_float(v):
    return float(v)


def _report(name, empirical, constants, non_estimable, terms, delta):
    total = math.fsum(terms.values())
    return BoundReport(name, empirical, constants, non_estimable, terms, total, 1.0 - delta)


# --------------------------------------------------------------------------
# Supervised bounds


def catoni_bound(emp_risk, m, kl, delta, omega) -> float:
    """omega/(1-e^-omega) * [emp + (KL + ln(1/delta)) / (m omega)]."""
    _check_positive(omega=omega)
    _check_common(m, kl, delta)
    return catoni_multiplier(omega) * (emp_risk + (kl + math.log(1.0 / delta)) / (m * omega))


def catoni_simplified(emp_risk, m, kl, delta, omega) -> float:
    """Looser form valid for 0 < omega < 2."""
    if not 0 < omega < 2:
        raise ValueError(f"omega must lie in (0, 2), got {omega}")
    _check_common(m, kl, delta)
    return (emp_risk + (kl + math.log(1.0 / delta)) / (m * omega)) / (1.0 - 0.5 * omega)


def corollary7_bound(kind, emp_value, m, kl, delta, constant) -> float:
    """Bounds on d_T, e_S, or the domain disagreement over paired voters (KL doubled)."""
    if kind not in COROLLARY7_KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {COROLLARY7_KINDS}")
    _check_positive(constant=constant)
    _check_common(m, kl, delta)
    if kind == "domain_disagreement":
        a = constant
        mult = catoni_multiplier(2 * a)
        return mult * (emp_value + (2 * kl + math.log(2.0 / delta)) / (m * a) + 1) - 1
    return catoni_multiplier(constant) * (emp_value + (2 * kl + math.log(1.0 / delta))
                                          / (m * constant))


# --------------------------------------------------------------------------
# Domain adaptation bounds


def theorem8_bound(emp_gibbs_s, emp_dis, m, kl, delta, omega, a,
                   lambda_rho=None, m_t=None) -> BoundReport:
    """Target Gibbs risk bound from source risk and domain disagreement.

    Requires paired samples: pass ``m_t`` to have the equal-size premise checked.
    """
    _check_positive(omega=omega, a=a)
    _check_common(m, kl, delta)
    if m_t is not None and m_t != m:
        raise ContractError(f"paired bound needs m_s == m_t, got {m} and {m_t}")
    lam = _placeholder(lambda_rho)
    wp = catoni_multiplier(omega)
    ap = catoni_multiplier(2 * a)
    terms = {
        "source_risk": wp * emp_gibbs_s,
        "domain_disagreement": ap * 0.5 * emp_dis,
        "complexity": (wp / omega + ap / a) * (kl + math.log(3.0 / delta)) / m,
        "lambda_rho": lam.contribution,
        "offset": 0.5 * (ap - 1),
    }
    return _report("theorem8",
                   {"gibbs_risk_source": emp_gibbs_s, "domain_disagreement": emp_dis},
                   BoundConstants(delta=delta, kl=kl, m=m, m_s=m, m_t=m, omega=omega, a=a),
                   {"lambda_rho": lam}, terms, delta)


def _check_beta(beta_inf):
    if beta_inf is None:
        raise ValueError("beta_inf must be supplied")
    if not beta_inf >= 1:
        raise ValueError(f"beta_inf must be >= 1, got {beta_inf}")


def theorem9_bound(emp_dis_t, emp_joint_s, m_s, m_t, kl, delta, b, c,
                   beta_inf, eta=None) -> BoundReport:
    """Target Gibbs risk bound from target disagreement and beta_inf-weighted source joint error."""
    _check_positive(b=b, c=c)
    _check_common(min(m_s, m_t), kl, delta)
    _check_beta(beta_inf)
    eta_p = _placeholder(eta)
    cp = catoni_multiplier(c)
    bp = catoni_multiplier(b) * beta_inf
    terms = {
        "target_disagreement": cp * 0.5 * emp_dis_t,
        "source_joint_error": _mul(bp, emp_joint_s),
        "eta": eta_p.contribution,
        "complexity": (cp / (m_t * c) + bp / (m_s * b)) * (2 * kl + math.log(2.0 / delta)),
    }
    return _report("theorem9",
                   {"disagreement_target": emp_dis_t, "joint_error_source": emp_joint_s},
                   BoundConstants(delta=delta, kl=kl, kl_multiplier=2, m_s=m_s, m_t=m_t, b=b, c=c),
                   {"eta_T_minus_S": eta_p,
                    "beta_inf": NonEstimable(float(beta_inf), "supplied")},
                   terms, delta)


def corollary12_bound(emp_gibbs_s, emp_dis, m, w_norm_sq, delta, omega, a,
                      lambda_rho=None, m_t=None) -> BoundReport:
    """Majority-vote (linear classifier) target risk bound underlying PBDA."""
    _check_positive(omega=omega, a=a)
    _check_common(m, w_norm_sq, delta)
    if m_t is not None and m_t != m:
        raise ContractError(f"paired bound needs m_s == m_t, got {m} and {m_t}")
    lam = _placeholder(lambda_rho)
    wp = catoni_multiplier(omega)
    ap = catoni_multiplier(2 * a)
    terms = {
        "source_risk": 2 * wp * emp_gibbs_s,
        "domain_disagreement": ap * emp_dis,
        "lambda_rho": 2 * lam.contribution,
        "complexity": 2 * (wp / omega + ap / a) * (w_norm_sq + math.log(3.0 / delta)) / m,
        "offset": ap - 1,
    }
    return _report("corollary12",
                   {"gibbs_risk_source": emp_gibbs_s, "domain_disagreement": emp_dis},
                   BoundConstants(delta=delta, kl=0.5 * w_norm_sq, m=m, m_s=m, m_t=m,
                                  omega=omega, a=a),
                   {"lambda_rho": lam}, terms, delta)


def corollary13_bound(emp_dis_t, emp_joint_s, m_s, m_t, w_norm_sq, delta, b, c,
                      beta_inf, eta=None) -> BoundReport:
    """Majority-vote (linear classifier) target risk bound underlying DALC."""
    _check_positive(b=b, c=c)
    _check_common(min(m_s, m_t), w_norm_sq, delta)
    _check_beta(beta_inf)
    eta_p = _placeholder(eta)
    cp = catoni_multiplier(c)
    bp = catoni_multiplier(b) * beta_inf
    terms = {
        "target_disagreement": cp * emp_dis_t,
        "source_joint_error": 2 * _mul(bp, emp_joint_s),
        "eta": 2 * eta_p.contribution,
        "complexity": 2 * (cp / (m_t * c) + bp / (m_s * b)) * (w_norm_sq + math.log(2.0 / delta)),
    }
    return _report("corollary13",
                   {"disagreement_target": emp_dis_t, "joint_error_source": emp_joint_s},
                   BoundConstants(delta=delta, kl=0.5 * w_norm_sq, kl_multiplier=2,
                                  m_s=m_s, m_t=m_t, b=b, c=c),
                   {"eta_T_minus_S": eta_p,
                    "beta_inf": NonEstimable(float(beta_inf), "supplied")},
                   terms, delta)


# --------------------------------------------------------------------------
# Convenience: evaluate a posterior on samples, then bound


def theorem8_from_samples(p, source, target, delta, omega, a, lambda_rho=None):
    p = est.as_provider(p)
    return theorem8_bound(est.gibbs_risk(p, source), est.domain_disagreement(p, source, target),
                          len(source), p.kl(), delta, omega, a, lambda_rho, m_t=len(target))


def theorem9_from_samples(p, source, target, delta, b, c, beta_inf, eta=None):
    p = est.as_provider(p)
    return theorem9_bound(est.disagreement(p, target), est.joint_error(p, source),
                          len(source), len(target), p.kl(), delta, b, c, beta_inf, eta)


def corollary12_from_samples(p, source, target, delta, omega, a, lambda_rho=None):
    p = est.as_provider(p)
    return corollary12_bound(est.gibbs_risk(p, source),
                             est.domain_disagreement(p, source, target),
                             len(source), 2 * p.kl(), delta, omega, a, lambda_rho,
                             m_t=len(target))


def corollary13_from_samples(p, source, target, delta, b, c, beta_inf, eta=None):
    p = est.as_provider(p)
    return corollary13_bound(est.disagreement(p, target), est.joint_error(p, source),
                             len(source), len(target), 2 * p.kl(), delta, b, c, beta_inf, eta)


# --------------------------------------------------------------------------
# beta_q divergence


def beta_q_mc(density_ratio: Callable, source_sampler: Callable, q: float, n_draws: int,
              seed: int, target_sampler: Optional[Callable] = None) -> float:
    """Monte-Carlo estimate of [E_S (T/S)^q]^(1/q).

    Samplers are called as ``sampler(rng, n) -> (x, y)`` and ``density_ratio(x, y)``
    returns T/S pointwise.  With ``target_sampler`` the expectation is rewritten as
    E_T[(T/S)^(q-1)], which has far lower variance when the ratio is heavy tailed.
    """
    _check_positive(q=q)
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    rng = np.random.default_rng(seed)
    if target_sampler is None:
        x, y = source_sampler(rng, n_draws)
        r = np.asarray(density_ratio(x, y), dtype=float)
        if np.any(r < 0):
            raise ValueError("density ratio must be nonnegative")
        moment = np.mean(r ** q)
    else:
        x, y = target_sampler(rng, n_draws)
        r = np.asarray(density_ratio(x, y), dtype=float)
        if np.any(r < 0):
            raise ValueError("density ratio must be nonnegative")
        moment = np.mean(r ** (q - 1))
    return float(moment ** (1.0 / q))


def beta_q_gaussian(mu_s, mu_t, q: float) -> float:
    """beta_q between N(mu_s, I) and N(mu_t, I): exp((q-1) ||mu_t - mu_s||^2 / 2).

    For q = inf the ratio is unbounded unless the means coincide.
    """
    _check_positive(q=q)
    d2 = float(np.sum((np.asarray(mu_t, dtype=float) - np.asarray(mu_s, dtype=float)) ** 2))
    if math.isinf(q):
        return 1.0 if d2 == 0 else math.inf
    return math.exp((q - 1) * d2 / 2)
