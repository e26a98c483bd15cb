"""Model parameters, potential distributions and environment sampling.

The walk X has generator kappa*Delta_h with

    Delta_h u(x) = (1+h)/2 * (u(x+1) - u(x)) + (1-h)/2 * (u(x-1) - u(x)),

so X steps right with probability (1+h)/2.  The time reversal Y has
generator kappa*Delta_{-h} and drifts left.  Potentials xi are i.i.d. (or
stationary Markov) fields with esssup xi = 0 after normalization; the
normalization shift is kept on the model so Lyapunov exponents can be
reported for the original field.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .errors import ConfigError

IID_VARIANTS = ("degenerate", "two_point", "finite_support", "uniform")
VARIANTS = IID_VARIANTS + ("markov",)


@dataclass(frozen=True)
class ModelParams:
    """Diffusion constant kappa > 0 and drift parameter h in (0, 1]."""

    kappa: float
    h: float

    def __post_init__(self):
        if not (self.kappa > 0):
            raise ConfigError("kappa must be positive, got %r" % (self.kappa,))
        if not (0 < self.h <= 1):
            raise ConfigError("h must lie in (0, 1], got %r" % (self.h,))

    @property
    def p_right(self):
        """Right-step probability of the X walk."""
        return 0.5 * (1.0 + self.h)

    @property
    def p_left(self):
        return 0.5 * (1.0 - self.h)


@dataclass(frozen=True)
class PotentialModel:
    """Distribution of the single-site potential.

    variant is one of
      degenerate      xi = c identically (c stored pre-normalization)
      two_point       mass q at 0, mass 1-q at -a, a > 0
      finite_support  atoms/weights, finitely many atoms
      uniform         uniform on [b, 0], b < 0
      markov          stationary finite-state Markov field (states, transition)

    shift records the additive constant removed by normalize(); all
    sampling/estimation code requires a normalized model (esssup = 0).
    """

    variant: str
    c: float = 0.0
    a: float = None
    q: float = None
    atoms: tuple = None
    weights: tuple = None
    b: float = None
    states: tuple = None
    transition: tuple = None
    shift: float = 0.0

    def __post_init__(self):
        v = self.variant
        if v not in VARIANTS:
            raise ConfigError("unknown potential variant %r" % (v,))
        if v == "two_point":
            if self.a is None or not self.a > 0:
                raise ConfigError("two_point needs a > 0")
            if self.q is None or not (0 < self.q < 1):
                raise ConfigError("two_point needs q in (0, 1)")
        elif v == "finite_support":
            if not self.atoms or not self.weights:
                raise ConfigError("finite_support needs atoms and weights")
            if len(self.atoms) != len(self.weights):
                raise ConfigError("atoms and weights length mismatch")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ConfigError("weights must be positive and sum to 1")
        elif v == "uniform":
            if self.b is None or not self.b < 0:
                raise ConfigError("uniform needs b < 0")
        elif v == "markov":
            if not self.states or self.transition is None:
                raise ConfigError("markov needs states and transition")
            P = np.asarray(self.transition, dtype=float)
            n = len(self.states)
            if P.shape != (n, n):
                raise ConfigError("transition must be %dx%d" % (n, n))
            if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
                raise ConfigError("transition rows must be stochastic")

    # ---- support / distribution helpers -------------------------------

    def esssup(self):
        if self.variant == "degenerate":
            return self.c
        if self.variant == "two_point":
            return 0.0
        if self.variant == "finite_support":
            return max(self.atoms)
        if self.variant == "uniform":
            return 0.0
        return max(self.states)

    def support_min(self):
        """Essential infimum of the single-site potential."""
        if self.variant == "degenerate":
            return self.c
        if self.variant == "two_point":
            return -self.a
        if self.variant == "finite_support":
            return min(self.atoms)
        if self.variant == "uniform":
            return self.b
        return min(self.states)

    def is_normalized(self):
        return abs(self.esssup()) <= 1e-14

    def require_normalized(self):
        if not self.is_normalized():
            raise ConfigError(
                "potential must be normalized (esssup 0); call normalize()")

    @property
    def is_iid(self):
        return self.variant in IID_VARIANTS

    def finite_atoms(self):
        """(atoms, weights) arrays for finite-support i.i.d. variants."""
        if self.variant == "degenerate":
            return np.array([self.c]), np.array([1.0])
        if self.variant == "two_point":
            return np.array([0.0, -self.a]), np.array([self.q, 1.0 - self.q])
        if self.variant == "finite_support":
            return np.asarray(self.atoms, float), np.asarray(self.weights, float)
        return None

    def stationary(self):
        """Stationary law of the markov variant."""
        P = np.asarray(self.transition, float)
        vals, vecs = np.linalg.eig(P.T)
        i = int(np.argmin(np.abs(vals - 1.0)))
        pi = np.real(vecs[:, i])
        pi = np.abs(pi)
        return pi / pi.sum()


def normalize(model):
    """Shift the potential so esssup = 0; the shift is recorded on the
    model and re-applied when Lyapunov exponents are reported."""
    s = model.esssup()
    if s == 0.0:
        return model
    total = model.shift + s
    if model.variant == "degenerate":
        return replace(model, c=0.0, shift=total)
    if model.variant == "finite_support":
        atoms = tuple(a - s for a in model.atoms)
        return replace(model, atoms=atoms, shift=total)
    if model.variant == "markov":
        states = tuple(x - s for x in model.states)
        return replace(model, states=states, shift=total)
    # two_point / uniform are normalized by construction
    return model


def expectation(model, f):
    """<f(xi(0))> under the single-site marginal (exact for finite
    support, quadrature for uniform)."""
    fa = model.finite_atoms()
    if fa is not None:
        atoms, weights = fa
        return float(np.sum(weights * np.asarray([f(a) for a in atoms])))
    if model.variant == "uniform":
        val, _ = integrate.quad(f, model.b, 0.0)
        return val / (-model.b)
    if model.variant == "markov":
        pi = model.stationary()
        return float(np.sum(pi * np.asarray([f(s) for s in model.states])))
    raise ConfigError("no marginal expectation for variant %r" % model.variant)


# ---- counter-based per-site randomness --------------------------------
#
# Each lattice site gets an independent uniform that is a pure function of
# (seed, site), so windows of different lengths agree on shared sites and
# resampling with the same seed is bit-identical.

_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M2
    z = (z ^ (z >> np.uint64(27))) * _M3
    return z ^ (z >> np.uint64(31))


def site_uniforms(seed, sites):
    """U(0,1) variates indexed by lattice site (splitmix64-style hash)."""
    s = np.asarray(sites, dtype=np.int64).view(np.uint64)
    seed_mix = np.uint64((int(seed) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF)
    z = _mix64(s * _M1 + seed_mix)
    z = _mix64(z + _M1)
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


@dataclass(frozen=True)
class EnvironmentWindow:
    """Sampled potential values on the integer interval [lo, hi]."""

    lo: int
    hi: int
    values: np.ndarray
    seed: int
    model: PotentialModel = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, float))
        if self.hi - self.lo + 1 != len(self.values):
            raise ConfigError("window length does not match values")
        self.values.setflags(write=False)

    def value(self, x):
        if not (self.lo <= x <= self.hi):
            raise IndexError("site %d outside window [%d, %d]"
                             % (x, self.lo, self.hi))
        return float(self.values[x - self.lo])

    def slice(self, lo, hi):
        if lo < self.lo or hi > self.hi:
            raise IndexError("requested [%d, %d] outside [%d, %d]"
                             % (lo, hi, self.lo, self.hi))
        return self.values[lo - self.lo: hi - self.lo + 1]


def sample_environment(model, seed, lo, hi):
    """Sample the potential on [lo, hi].

    I.i.d. variants draw one hashed uniform per site.  The markov variant
    is anchored at site 0 (sampled from the stationary law) and extended
    rightward with the transition matrix and leftward with the reversed
    chain, so windows with different endpoints still agree on shared sites.
    """
    model.require_normalized()
    if hi < lo:
        raise ConfigError("empty window [%d, %d]" % (lo, hi))
    sites = np.arange(lo, hi + 1)
    if model.is_iid:
        u = site_uniforms(seed, sites)
        if model.variant == "degenerate":
            vals = np.zeros(len(sites))
        elif model.variant == "uniform":
            vals = model.b * u
        else:
            atoms, weights = model.finite_atoms()
            idx = np.searchsorted(np.cumsum(weights), u, side="right")
            vals = atoms[np.minimum(idx, len(atoms) - 1)]
        return EnvironmentWindow(lo, hi, vals, seed, model)

    # markov: anchor at site 0, extend with forward / reversed kernels
    states = np.asarray(model.states, float)
    P = np.asarray(model.transition, float)
    pi = model.stationary()
    Prev = (P * pi[:, None]).T / pi[:, None]  # Prev[i,j] = pi[j] P[j,i] / pi[i]
    span_lo, span_hi = min(lo, 0), max(hi, 0)
    u = site_uniforms(seed, np.arange(span_lo, span_hi + 1))
    n = span_hi - span_lo + 1
    idx = np.empty(n, dtype=np.int64)
    anchor = -span_lo  # array index of site 0
    cpi = np.cumsum(pi)
    cP = np.cumsum(P, axis=1)
    cPrev = np.cumsum(Prev, axis=1)
    idx[anchor] = np.searchsorted(cpi, u[anchor], side="right")
    for k in range(anchor + 1, n):
        idx[k] = np.searchsorted(cP[idx[k - 1]], u[k], side="right")
    for k in range(anchor - 1, -1, -1):
        idx[k] = np.searchsorted(cPrev[idx[k + 1]], u[k], side="right")
    idx = np.minimum(idx, len(states) - 1)
    vals = states[idx[lo - span_lo: hi - span_lo + 1]]
    return EnvironmentWindow(lo, hi, vals, seed, model)


def shift_environment(env, k):
    """View of env shifted by k: values(x) = env.values(x + k), restricted
    to the part of the original window where both sides are defined."""
    lo = max(env.lo, env.lo - k)
    hi = min(env.hi, env.hi - k)
    if hi < lo:
        raise ConfigError("shift by %d leaves an empty window" % (k,))
    return EnvironmentWindow(lo, hi, env.slice(lo + k, hi + k), env.seed,
                             env.model)


@dataclass(frozen=True)
class BetaCritical:
    """Critical drift rate beta_cr, with a bracket when no closed form
    is available (markov variant)."""

    lower: float
    upper: float
    value: float = None
    exact: bool = True

    def __float__(self):
        if self.value is None:
            raise ValueError("beta_cr has no closed form for this model; "
                             "use the bracket [%g, %g]" % (self.lower, self.upper))
        return self.value


def beta_cr(params, model):
    """Critical rate of the downward-crossing exponential moment.

    For i.i.d. potentials with h < 1 this is kappa*(1 - sqrt(1 - h^2));
    at h = 1 it is kappa.  For the markov variant only the a priori
    bracket [0, kappa] is returned (exact=False).
    """
    k, h = params.kappa, params.h
    if model is not None and model.variant == "markov":
        return BetaCritical(0.0, k, value=None, exact=False)
    if h == 1.0:
        v = k
    else:
        v = k * (1.0 - np.sqrt((1.0 - h) * (1.0 + h)))
    return BetaCritical(v, v, value=float(v), exact=True)
