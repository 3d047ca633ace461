"""Analytic losses of a Gaussian posterior over linear classifiers.

All functions take a normalized margin (scalar or array) and are vectorized.
"""

from typing import NamedTuple, Union

import numpy as np
from scipy import special

from .exceptions import DomainError

ArrayLike = Union[float, np.ndarray]

SQRT2 = np.sqrt(2.0)
SQRT_2PI = np.sqrt(2.0 * np.pi)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)

#: Margins beyond this magnitude are clamped (probit tail underflows).
MARGIN_CLAMP = 38.0


class LossEval(NamedTuple):
    value: ArrayLike
    derivative: ArrayLike


def _as_finite(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name}: input must be finite")
    return arr


def _unwrap(arr, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def _erf_erfc(x):
    # signed erf(x) and erfc(|x|); the latter keeps the tails accurate
    return special.erf(x), special.erfc(np.abs(x))


def erf(x: ArrayLike) -> ArrayLike:
    arr = np.atleast_1d(_as_finite(x, "erf"))
    e, _ = _erf_erfc(arr)
    return _unwrap(e.reshape(np.shape(x)), x)


def erfc(x: ArrayLike) -> ArrayLike:
    """Complementary error function, accurate in the right tail."""
    arr = np.atleast_1d(_as_finite(x, "erfc"))
    e, c_abs = _erf_erfc(arr)
    c = np.where(arr < 0, 2.0 - c_abs, c_abs)
    return _unwrap(c.reshape(np.shape(x)), x)


def _probit_arrays(x):
    """Return (Phi(x), Phi'(x), erf(x/sqrt 2)) with clamping applied."""
    z = x / SQRT2
    e, c_abs = _erf_erfc(z)
    # Phi(x) = erfc(x/sqrt2)/2; for x < 0 use 1 - erfc(|x|/sqrt2)/2
    value = np.where(x >= 0, 0.5 * c_abs, 1.0 - 0.5 * c_abs)
    xc = np.clip(x, -2 * MARGIN_CLAMP, 2 * MARGIN_CLAMP)  # avoids overflow in x*x
    deriv = -np.exp(-0.5 * xc * xc) / SQRT_2PI
    far = np.abs(x) > MARGIN_CLAMP
    if np.any(far):
        value = np.where(far, np.where(x > 0, 0.0, 1.0), value)
        deriv = np.where(far, 0.0, deriv)
        e = np.where(far, np.sign(x), e)
    return value, deriv, e


def probit_loss(x: ArrayLike) -> LossEval:
    """Gibbs risk of N(w, I) at normalized margin ``x``: (1 - erf(x/sqrt 2)) / 2."""
    arr = np.atleast_1d(_as_finite(x, "probit_loss"))
    v, d, _ = _probit_arrays(arr)
    shape = np.shape(x)
    return LossEval(_unwrap(v.reshape(shape), x), _unwrap(d.reshape(shape), x))


def convex_probit_loss(x: ArrayLike) -> LossEval:
    """Convex relaxation max{Phi(x), 1/2 - x/sqrt(2 pi)}.

    The linear branch is used for x < 0; both sides agree at 0 to first order.
    """
    arr = np.atleast_1d(_as_finite(x, "convex_probit_loss"))
    v, d, _ = _probit_arrays(arr)
    neg = arr < 0
    v = np.where(neg, 0.5 - arr / SQRT_2PI, v)
    d = np.where(neg, -1.0 / SQRT_2PI, d)
    shape = np.shape(x)
    return LossEval(_unwrap(v.reshape(shape), x), _unwrap(d.reshape(shape), x))


def disagreement_loss(x: ArrayLike) -> LossEval:
    """Expected disagreement of two posterior draws: 2 Phi(x) Phi(-x).

    Evaluated from erfc(|x|/sqrt 2) so the tails stay accurate.
    """
    arr = np.atleast_1d(_as_finite(x, "disagreement_loss"))
    _, _, e = _probit_arrays(arr)
    # c = 2 Phi(-|x|) is tiny in the tails, so c (1 - c/2) keeps full relative accuracy
    c = _erf_erfc(np.abs(arr) / SQRT2)[1]
    v = c * (1.0 - 0.5 * c)
    xc = np.clip(arr, -2 * MARGIN_CLAMP, 2 * MARGIN_CLAMP)
    d = -_SQRT_2_OVER_PI * e * np.exp(-0.5 * xc * xc)
    far = np.abs(arr) > MARGIN_CLAMP
    if np.any(far):
        v = np.where(far, 0.0, v)
        d = np.where(far, 0.0, d)
    shape = np.shape(x)
    return LossEval(_unwrap(v.reshape(shape), x), _unwrap(d.reshape(shape), x))


def joint_error_loss(x: ArrayLike) -> LossEval:
    """Probability that two posterior draws both err: Phi(x)^2."""
    arr = np.atleast_1d(_as_finite(x, "joint_error_loss"))
    v, d, _ = _probit_arrays(arr)
    shape = np.shape(x)
    return LossEval(_unwrap((v * v).reshape(shape), x),
                    _unwrap((2.0 * v * d).reshape(shape), x))
