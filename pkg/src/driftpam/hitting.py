"""Downward-crossing (hitting) exponential functionals of the Y walk.

w(n; beta) = E_n exp{ int_0^{T_{n-1}} (xi(Y_s) + beta) ds } satisfies the
first-step recursion

    w(n) = A(n) / (1 - B(n) w(n+1)),
    A(n) = (1+h)/2 * kappa / (kappa - xi(n) - beta),
    B(n) = (1-h)/2 * kappa / (kappa - xi(n) - beta),

run backward from a tail boundary.  An optimistic tail (free field at
rate beta) and a pessimistic tail (free field at rate beta + min-atom)
give certified upper/lower profiles; the recursion is monotone in the
boundary value, and the gap contracts geometrically away from the tail.
At h = 1 the recursion has B = 0 and is exact at every site.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import BeyondCritical, DivergentFunctional
from .model import beta_cr


def free_hitting_weight(params, beta):
    """E_1 exp{beta T_0} for the free walk (xi = 0): the smaller root of
    (kappa(1-h)/2) w^2 - (kappa-beta) w + kappa(1+h)/2 = 0, defined for
    beta <= beta_cr; at h = 1 it is kappa/(kappa - beta)."""
    k, h = params.kappa, params.h
    if h == 1.0:
        if beta >= k:
            raise BeyondCritical("beta=%g >= kappa=%g at h=1" % (beta, k))
        return k / (k - beta)
    disc = (k - beta) ** 2 - k * (1.0 - h) * k * (1.0 + h)
    if disc < 0.0:
        if disc > -1e-12 * k * k:
            disc = 0.0
        else:
            raise BeyondCritical(
                "beta=%g beyond beta_cr=%g" % (beta, float(beta_cr(params, None))))
    return ((k - beta) - np.sqrt(disc)) / (k * (1.0 - h))


def free_hitting_weight_derivative(params, beta):
    """d/dbeta of the free weight; equals E_1 T_0 = 1/(kappa h) at beta=0."""
    k, h = params.kappa, params.h
    w = free_hitting_weight(params, beta)
    denom = (k - beta) - k * (1.0 - h) * w
    if denom <= 0.0:
        raise BeyondCritical("free weight derivative diverges at beta=%g" % beta)
    return w / denom


@njit(cache=True)
def _backward(xi, kappa, h, beta, w_tail):
    """Backward recursion; returns (profile, first bad index or -1)."""
    n = xi.shape[0]
    w = np.empty(n)
    a = 0.5 * (1.0 + h) * kappa
    b = 0.5 * (1.0 - h) * kappa
    wn = w_tail
    for i in range(n - 1, -1, -1):
        d = kappa - xi[i] - beta
        if d <= 0.0:
            return w, i
        denom = 1.0 - (b / d) * wn
        if denom <= 0.0:
            return w, i
        wn = (a / d) / denom
        w[i] = wn
    return w, -1


@njit(cache=True)
def _backward_deriv(xi, kappa, h, beta, w_tail, dw_tail):
    """Recursion for (w, dw/dbeta); returns (w, dw, first bad index)."""
    n = xi.shape[0]
    w = np.empty(n)
    dw = np.empty(n)
    a = 0.5 * (1.0 + h) * kappa
    b = 0.5 * (1.0 - h) * kappa
    wn, dwn = w_tail, dw_tail
    for i in range(n - 1, -1, -1):
        d = kappa - xi[i] - beta
        if d <= 0.0:
            return w, dw, i
        B = b / d
        denom = 1.0 - B * wn
        if denom <= 0.0:
            return w, dw, i
        wi = (a / d) / denom
        dwn = wi / d + wi * (B * wn / d + B * dwn) / denom
        wn = wi
        w[i] = wn
        dw[i] = dwn
    return w, dw, -1


@dataclass(frozen=True)
class HittingProfile:
    """Certified bounds on log-weights w(n; beta) for n in [lo, hi]."""

    lo: int
    hi: int
    beta: float
    lower: np.ndarray
    upper: np.ndarray
    dlower: np.ndarray = None
    dupper: np.ndarray = None

    @property
    def gap(self):
        return self.upper - self.lower

    def mid(self):
        return 0.5 * (self.lower + self.upper)


def _tail_values(params, beta, env, boundary, derivatives):
    """(w_lower_tail, w_upper_tail[, derivative tails]) per boundary mode."""
    if boundary == "bracket":
        b_min = env.model.support_min() if env.model is not None else float(
            np.min(env.values))
        w_up = free_hitting_weight(params, beta)
        w_lo = free_hitting_weight(params, beta + b_min)
        if derivatives:
            d_up = free_hitting_weight_derivative(params, beta)
            d_lo = free_hitting_weight_derivative(params, beta + b_min)
            return (w_lo, w_up, d_lo, d_up)
        return (w_lo, w_up)
    if boundary == "free":
        w = free_hitting_weight(params, beta)
        if derivatives:
            d = free_hitting_weight_derivative(params, beta)
            return (w, w, d, d)
        return (w, w)
    if boundary == "absorbing":
        if derivatives:
            return (0.0, 0.0, 0.0, 0.0)
        return (0.0, 0.0)
    raise ValueError("boundary must be 'bracket', 'free' or 'absorbing'")


def hitting_profile(env, params, beta, boundary="bracket", derivatives=False):
    """Bracketed hitting weights on the window of env.

    The recursion runs from the right edge of env down to its left edge,
    once with an optimistic tail and once with a pessimistic one.  Raises
    DivergentFunctional if the recursion blows up (beta effectively past
    critical for this environment).
    """
    bcr = beta_cr(params, env.model)
    if beta > bcr.upper - 1e-12:
        raise BeyondCritical("beta=%g too close to beta_cr upper bound %g"
                             % (beta, bcr.upper))
    xi = np.ascontiguousarray(env.values)
    tails = _tail_values(params, beta, env, boundary, derivatives)
    if derivatives:
        w_lo, w_up, d_lo, d_up = tails
        lower, dlower, bad1 = _backward_deriv(xi, params.kappa, params.h,
                                              beta, w_lo, d_lo)
        upper, dupper, bad2 = _backward_deriv(xi, params.kappa, params.h,
                                              beta, w_up, d_up)
        bad = max(bad1, bad2)
        if bad >= 0:
            raise DivergentFunctional(
                "recursion diverged at site %d (beta=%g)" % (env.lo + bad, beta))
        return HittingProfile(env.lo, env.hi, beta, lower, upper,
                              dlower, dupper)
    w_lo, w_up = tails
    lower, bad1 = _backward(xi, params.kappa, params.h, beta, w_lo)
    upper, bad2 = _backward(xi, params.kappa, params.h, beta, w_up)
    bad = max(bad1, bad2)
    if bad >= 0:
        raise DivergentFunctional(
            "recursion diverged at site %d (beta=%g)" % (env.lo + bad, beta))
    return HittingProfile(env.lo, env.hi, beta, lower, upper)
