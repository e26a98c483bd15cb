"""Quenched Lyapunov exponent via the crossing functional.

L(beta) = < log E_1 exp{ int_0^{T_0} (xi(Y_s) + beta) ds } > is estimated
by a Birkhoff average of bracketed hitting weights over a long sampled
environment.  lambda_0 is the zero of beta |-> L(-beta) on (-beta_cr, 0)
when an interior zero exists, and -beta_cr otherwise.  At h = 1 (and for
the degenerate potential at any h) the per-site weight depends only on
the local potential value, so L is evaluated as an exact expectation.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import BeyondCritical, DivergentFunctional, NumericalFailure
from .hitting import (free_hitting_weight, free_hitting_weight_derivative,
                      hitting_profile)
from .model import beta_cr, expectation, sample_environment

_EPS_LADDER = (1e-1, 1e-2, 1e-3, 1e-4)
_BCR_MARGIN = 1e-12
_DIVERGED = 1e6  # sentinel for "L = +infinity" during root finding


@dataclass(frozen=True)
class LFunctionEstimate:
    beta: float
    mean_lower: float
    mean_upper: float
    stderr: float
    n_sites: int
    deriv_lower: float = None
    deriv_upper: float = None
    exact: bool = False

    @property
    def mean(self):
        return 0.5 * (self.mean_lower + self.mean_upper)

    @property
    def half_width(self):
        return 0.5 * (self.mean_upper - self.mean_lower)

    @property
    def deriv(self):
        if self.deriv_lower is None:
            return None
        return 0.5 * (self.deriv_lower + self.deriv_upper)


@dataclass(frozen=True)
class LyapunovResult:
    value: float
    kind: str
    bracket: tuple
    residual: float
    at_boundary: bool
    shift_applied: float
    method: str
    meta: dict = field(default_factory=dict)

    @property
    def beta_root(self):
        """Root of L on the normalized scale: -(value - shift)."""
        return -(self.value - self.shift_applied)


@dataclass(frozen=True)
class PhaseReport:
    case: str                 # "A" (positive speed), "B" (critical), "C" (screening)
    speed: float
    speed_interval: tuple
    limit_at_bcr: float
    uncertainty: float
    widened: bool
    lyapunov: LyapunovResult


def _exact_kind(model, params):
    """Return 'degenerate', 'h1' or None depending on whether L(beta)
    reduces to an exact single-site expectation."""
    if model.variant == "degenerate":
        return "degenerate"
    if params.h == 1.0 and model.variant != "markov":
        return "h1"
    return None


def _exact_L(model, params, beta, derivatives=False):
    k = params.kappa
    if model.variant == "degenerate":
        val = np.log(free_hitting_weight(params, beta))
        dval = (free_hitting_weight_derivative(params, beta)
                / free_hitting_weight(params, beta)) if derivatives else None
    else:
        if beta >= k + model.esssup():
            raise BeyondCritical("beta=%g at or beyond kappa at h=1" % beta)
        val = expectation(model, lambda a: np.log(k / (k - a - beta)))
        dval = expectation(model, lambda a: 1.0 / (k - a - beta)) \
            if derivatives else None
    if derivatives:
        return val, dval
    return val


class _BirkhoffL:
    """Cached-environment evaluator of L(beta) with certified brackets.

    The environment covers [1, n_sites + trunc]; the tail pad `trunc`
    doubles until the bracket gap over the retained sites is below
    gap_tol (or the window hits max_sites).  Resampling with the same
    seed regenerates identical values on shared sites, so growing the
    pad never perturbs the retained window.
    """

    def __init__(self, model, params, n_sites, seed, gap_tol=1e-9,
                 max_sites=1_000_000):
        self.model = model
        self.params = params
        self.n_sites = int(n_sites)
        self.seed = seed
        self.gap_tol = gap_tol
        self.max_sites = int(max_sites)
        self.trunc = 512
        self.env = sample_environment(model, seed, 1, self.n_sites + self.trunc)

    def _grow(self):
        if self.n_sites + self.trunc >= self.max_sites:
            return False
        self.trunc = min(2 * self.trunc, self.max_sites - self.n_sites)
        self.env = sample_environment(self.model, self.seed, 1,
                                      self.n_sites + self.trunc)
        return True

    def __call__(self, beta, derivatives=False):
        n = self.n_sites
        while True:
            prof = hitting_profile(self.env, self.params, beta,
                                   boundary="bracket", derivatives=derivatives)
            log_lo = np.log(prof.lower[:n])
            log_up = np.log(prof.upper[:n])
            if float(np.max(log_up - log_lo)) <= self.gap_tol or not self._grow():
                break
        mid = 0.5 * (log_lo + log_up)
        stderr = float(np.std(mid) / np.sqrt(n))
        d_lo = d_up = None
        if derivatives:
            d_lo = float(np.mean(prof.dlower[:n] / prof.lower[:n]))
            d_up = float(np.mean(prof.dupper[:n] / prof.upper[:n]))
        return LFunctionEstimate(beta, float(np.mean(log_lo)),
                                 float(np.mean(log_up)), stderr, n,
                                 d_lo, d_up)


def estimate_L(model, params, beta, n_sites=100_000, seed=0, gap_tol=1e-9,
               derivatives=False, method="auto"):
    """Estimate L(beta) (and optionally L'(beta)).

    method: "auto" uses the exact single-site expectation when available
    (degenerate potential, or h = 1 with an i.i.d. potential) and the
    Birkhoff average otherwise; "birkhoff" forces sampling.
    """
    model.require_normalized()
    kind = _exact_kind(model, params) if method == "auto" else None
    if kind is not None:
        if derivatives:
            val, dval = _exact_L(model, params, beta, derivatives=True)
            return LFunctionEstimate(beta, val, val, 0.0, 0, dval, dval,
                                     exact=True)
        val = _exact_L(model, params, beta)
        return LFunctionEstimate(beta, val, val, 0.0, 0, exact=True)
    ell = _BirkhoffL(model, params, n_sites, seed, gap_tol)
    return ell(beta, derivatives=derivatives)


def _beta_top(params, model):
    """Largest rate probed before declaring a boundary exponent."""
    bc = beta_cr(params, model)
    cap = bc.value if bc.exact else bc.upper
    return cap * (1.0 - _EPS_LADDER[-1]), cap


def _safe(fun, beta):
    """fun(beta) with divergence mapped to a large positive value."""
    try:
        return fun(beta)
    except (DivergentFunctional, BeyondCritical):
        return _DIVERGED


def _root_on_bracket(fun, beta_hi, tol):
    """Zero of an increasing fun on [0, beta_hi]; fun(0) <= 0 expected."""
    f0 = _safe(fun, 0.0)
    if f0 >= -tol:
        return 0.0
    fhi = _safe(fun, beta_hi)
    if fhi <= 0.0:
        return None
    return float(optimize.brentq(lambda b: _safe(fun, b), 0.0, beta_hi,
                                 xtol=tol, rtol=8 * np.finfo(float).eps))


def lambda_quenched(model, params, seed=0, n_sites=100_000, tol=1e-10,
                    gap_tol=1e-9, method="auto"):
    """Quenched Lyapunov exponent lambda_0 (reported on the original,
    un-normalized potential scale via the recorded shift)."""
    model.require_normalized()
    shift = model.shift
    kind = _exact_kind(model, params) if method == "auto" else None
    if kind is not None:
        fun_lo = fun_up = lambda b: _exact_L(model, params, b)
        used = "exact:" + kind
    else:
        ell = _BirkhoffL(model, params, n_sites, seed, gap_tol)
        fun_lo = lambda b: ell(b).mean_lower
        fun_up = lambda b: ell(b).mean_upper
        used = "birkhoff"

    beta_hi, cap = _beta_top(params, model)
    root_up = _root_on_bracket(fun_up, beta_hi, tol)   # upper L crosses first
    if root_up is None:
        # even the optimistic estimate stays negative up to the critical rate
        value = -cap + shift
        resid = _safe(fun_up, beta_hi)
        return LyapunovResult(value, "quenched", (-cap + shift, -beta_hi + shift),
                              abs(resid) if resid != _DIVERGED else np.nan,
                              True, shift, used,
                              meta={"seed": seed, "n_sites": n_sites})
    root_lo = _root_on_bracket(fun_lo, beta_hi, tol)
    if root_lo is None:
        raise NumericalFailure(
            "bracket ends disagree near beta_cr: increase n_sites or the "
            "truncation pad (gap_tol) so both L estimates cross zero")
    beta_z = 0.5 * (root_up + root_lo)
    resid = 0.5 * (_safe(fun_lo, beta_z) + _safe(fun_up, beta_z))
    return LyapunovResult(-beta_z + shift, "quenched",
                          (-root_lo + shift, -root_up + shift),
                          abs(resid), False, shift, used,
                          meta={"seed": seed, "n_sites": n_sites})


def _L_prime(model, params, beta, seed, n_sites, gap_tol):
    est = estimate_L(model, params, beta, n_sites=n_sites, seed=seed,
                     gap_tol=gap_tol, derivatives=True)
    return est.deriv


def optimal_speed(model, params, result=None, seed=0, n_sites=100_000,
                  tol=1e-10, gap_tol=1e-9):
    """Classify the phase at beta_cr and report the optimal Gibbs speed.

    Case A (interior zero of L(-.)): speed = 1/L'(-lambda_0).
    Case B (L -> 0 at beta_cr): boundary exponent, speed interval
    [0, 1/lim L'].  Case C (L -> negative limit, screening): speed 0.
    """
    model.require_normalized()
    if result is None:
        result = lambda_quenched(model, params, seed=seed, n_sites=n_sites,
                                 tol=tol, gap_tol=gap_tol)
    beta_hi, cap = _beta_top(params, model)
    # epsilon ladder toward beta_cr for the limit diagnostic
    vals, uncs = [], []
    for eps in _EPS_LADDER:
        b = cap * (1.0 - eps)
        try:
            est = estimate_L(model, params, b, n_sites=n_sites, seed=seed,
                             gap_tol=gap_tol)
            vals.append(est.mean)
            uncs.append(est.half_width + est.stderr)
        except (DivergentFunctional, BeyondCritical):
            vals.append(np.inf)
            uncs.append(np.inf)
    limit = vals[-1]
    unc = abs(vals[-1] - vals[-2]) + uncs[-1] if np.isfinite(vals[-1]) else np.inf

    if not result.at_boundary:
        lp = _L_prime(model, params, result.beta_root, seed, n_sites, gap_tol)
        speed = 1.0 / lp
        return PhaseReport("A", speed, (speed, speed), limit, unc, False, result)
    lp_top = _L_prime(model, params, beta_hi, seed, n_sites, gap_tol)
    if limit < -2.0 * unc:
        return PhaseReport("C", 0.0, (0.0, 0.0), limit, unc, False, result)
    # limit indistinguishable from 0: critical case, interval of speeds
    widened = abs(limit) <= 2.0 * unc
    return PhaseReport("B", 0.0, (0.0, 1.0 / lp_top), limit, unc, widened,
                       result)


def _beta_grid(params, model, n_beta, beta_lo=None):
    """Grid on (beta_lo, beta_cr) refined geometrically near beta_cr."""
    _, cap = _beta_top(params, model)
    if beta_lo is None:
        beta_lo = -4.0 * params.kappa
    coarse = np.linspace(beta_lo, 0.9 * cap, n_beta)
    eps = np.geomspace(1e-1, 1e-8, 29)
    fine = cap * (1.0 - eps)
    grid = np.unique(np.concatenate([coarse, fine]))
    return grid[grid <= cap - _BCR_MARGIN]


def legendre_lambda_star(model, params, alphas, seed=0, n_sites=100_000,
                         n_beta=200, gap_tol=1e-9, beta_lo=None):
    """Legendre transform Lambda*(alpha) = sup_{beta<beta_cr}
    (beta*alpha - Lambda(beta)) with Lambda = L - L(0).

    Returns (values, at_edge) where at_edge flags alphas whose supremum
    was attained at a grid edge (the true value may be +inf there; the
    left edge is reported as +inf outright for alpha <= 0 slopes).
    """
    model.require_normalized()
    grid = _beta_grid(params, model, n_beta, beta_lo)
    kind = _exact_kind(model, params)
    if kind is not None:
        L = np.array([_safe(lambda b: _exact_L(model, params, b), b)
                      for b in grid])
    else:
        ell = _BirkhoffL(model, params, n_sites, seed, gap_tol)
        L = np.array([_safe(lambda b: ell(b).mean, b) for b in grid])
    ok = L < _DIVERGED
    grid, L = grid[ok], L[ok]
    # anchor Lambda at beta = 0 exactly
    if kind is not None:
        L0 = _exact_L(model, params, 0.0)
    else:
        L0 = ell(0.0).mean
    Lam = L - L0
    alphas = np.atleast_1d(np.asarray(alphas, float))
    objective = grid[None, :] * alphas[:, None] - Lam[None, :]
    idx = np.argmax(objective, axis=1)
    values = objective[np.arange(len(alphas)), idx]
    at_edge = (idx == 0) | (idx == len(grid) - 1)
    values = np.where(idx == 0, np.inf, values)
    return values, at_edge


def lambda_quenched_variational(model, params, alpha_hi=None, n_alpha=241,
                                n_beta=241, seed=0, n_sites=100_000,
                                gap_tol=1e-9, refine_tol=1e-3):
    """Gibbs variational form lambda_0 = sup_alpha inf_beta (-beta +
    alpha L(beta)) evaluated on nested grids; raises NumericalFailure if
    doubling the grids moves the value by more than refine_tol."""
    model.require_normalized()
    if alpha_hi is None:
        alpha_hi = 2.0 * params.kappa
    kind = _exact_kind(model, params)
    if kind is None:
        ell = _BirkhoffL(model, params, n_sites, seed, gap_tol)
        Lfun = lambda b: _safe(lambda x: ell(x).mean, b)
    else:
        Lfun = lambda b: _safe(lambda x: _exact_L(model, params, x), b)

    def value(na, nb):
        grid = _beta_grid(params, model, nb)
        L = np.array([Lfun(b) for b in grid])
        ok = L < _DIVERGED
        g, L = grid[ok], L[ok]
        alphas = np.linspace(0.0, alpha_hi, na)
        obj = -g[None, :] + alphas[:, None] * L[None, :]
        return float(np.max(np.min(obj, axis=1)))

    v1 = value(n_alpha, n_beta)
    v2 = value(2 * n_alpha - 1, 2 * n_beta - 1)
    if abs(v2 - v1) > refine_tol:
        raise NumericalFailure(
            "variational value moved by %g under grid refinement; "
            "increase n_alpha/n_beta" % abs(v2 - v1))
    return v2 + model.shift
