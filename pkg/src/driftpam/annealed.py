"""Annealed Lyapunov exponents of the p-th moments.

The annealed rate function on environment laws is the specific relative
entropy I(nu) = H(nu_1* | nu_0* (x) eta); for product measures it
collapses to a single-site relative entropy.  The annealed exponent is
the zero of beta |-> Lp_sup(-beta) on (-beta_cr, 0), where

    Lp_sup(beta) = sup_nu ( L(beta, nu) - I(nu)/p ).

At h = 1 the crossing weight is a function of the local potential only,
so the supremum is attained on product measures and reduces by the Gibbs
tilting identity to (1/p) log < (kappa/(kappa - xi(0) - beta))^p >.  For
h < 1 a depth-1 tilted product value is a certified lower bound, and a
finite-window transfer operator (Perron root of an s^(d-1) x s^(d-1)
matrix) gives systematically improving estimates in the depth d.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse

from .errors import BeyondCritical, ConfigError, DivergentFunctional, \
    NumericalFailure
from .hitting import free_hitting_weight
from .model import PotentialModel, beta_cr, expectation
from .quenched import LyapunovResult, lambda_quenched, _EPS_LADDER, _safe, \
    _DIVERGED


@dataclass(frozen=True)
class FiniteMeasure:
    """Probability measure on finitely many potential levels (<= 0)."""

    atoms: tuple
    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        if len(self.atoms) != len(w):
            raise ConfigError("atoms and weights length mismatch")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ConfigError("weights must be nonnegative and sum to 1")

    def arrays(self):
        return np.asarray(self.atoms, float), np.asarray(self.weights, float)


def measure_from_model(model):
    fa = model.finite_atoms()
    if fa is None:
        raise ConfigError(
            "variant %r has no finite single-site support" % model.variant)
    atoms, weights = fa
    return FiniteMeasure(tuple(atoms), tuple(weights))


def relative_entropy(mu, eta):
    """H(mu | eta) on the union of supports; +inf when mu is not
    absolutely continuous w.r.t. eta."""
    ma, mw = mu.arrays()
    ea, ew = eta.arrays()
    out = 0.0
    for a, w in zip(ma, mw):
        if w == 0.0:
            continue
        match = np.nonzero(np.isclose(ea, a, rtol=0, atol=1e-12))[0]
        if len(match) == 0 or ew[match[0]] == 0.0:
            return np.inf
        out += w * np.log(w / ew[match[0]])
    return out


def product_rate(mu, eta):
    """Specific entropy rate of the product measure mu^(x)N relative to
    the annealed reference: I(mu^(x)N) = H(mu | eta)."""
    return relative_entropy(mu, eta)


@dataclass(frozen=True)
class MarkovMeasure:
    """Stationary Markov law on a finite alphabet, for the chain-rule
    identity check: init must be invariant for transition."""

    atoms: tuple
    transition: tuple

    def arrays(self):
        P = np.asarray(self.transition, float)
        vals, vecs = np.linalg.eig(P.T)
        pi = np.abs(np.real(vecs[:, np.argmin(np.abs(vals - 1.0))]))
        return np.asarray(self.atoms, float), P, pi / pi.sum()


def entropy_chain_identity(nu, eta, n):
    """Both sides of sum_{i=1..n} H(pi_i nu | pi_{i-1} nu (x) eta)
    = H(pi_n nu | eta^n), computed by direct enumeration.  nu is either
    a FiniteMeasure (product law) or a MarkovMeasure."""
    ea, ew = eta.arrays()
    if isinstance(nu, FiniteMeasure):
        na, nw = nu.arrays()
        P = np.tile(nw, (len(na), 1))
        init = nw
        atoms = na
    else:
        atoms, P, init = nu.arrays()
    # match nu's alphabet into eta's
    eta_w = np.empty(len(atoms))
    for i, a in enumerate(atoms):
        m = np.nonzero(np.isclose(ea, a, rtol=0, atol=1e-12))[0]
        eta_w[i] = ew[m[0]] if len(m) else 0.0

    def tuple_prob(t):
        p = init[t[0]]
        for a, b in zip(t[:-1], t[1:]):
            p *= P[a, b]
        return p

    s = len(atoms)
    lhs = 0.0
    for i in range(1, n + 1):
        acc = 0.0
        for t in itertools.product(range(s), repeat=i):
            p = tuple_prob(t)
            if p == 0.0:
                continue
            prev = tuple_prob(t[:-1]) if i > 1 else 1.0
            acc += p * np.log(p / (prev * eta_w[t[-1]]))
        lhs += acc
    rhs = 0.0
    for t in itertools.product(range(s), repeat=n):
        p = tuple_prob(t)
        if p == 0.0:
            continue
        q = np.prod(eta_w[list(t)])
        rhs += p * np.log(p / q)
    return lhs, rhs


# ---- tilted products and the transfer operator -------------------------

def _site_log_weight(params, beta, atoms):
    """log of the depth-1 crossing weight per potential level, with the
    tail frozen at the free-field value (exact at h = 1 where B = 0)."""
    k, h = params.kappa, params.h
    d = k - atoms - beta
    if np.any(d <= 0.0):
        raise BeyondCritical("beta=%g reaches a potential level" % beta)
    if h == 1.0:
        return np.log(k / d)
    w_free = free_hitting_weight(params, beta)
    A = 0.5 * (1.0 + h) * k / d
    B = 0.5 * (1.0 - h) * k / d
    denom = 1.0 - B * w_free
    if np.any(denom <= 0.0):
        raise DivergentFunctional("depth-1 weight diverged at beta=%g" % beta)
    return np.log(A / denom)


@dataclass(frozen=True)
class TiltedValue:
    value: float
    beta: float
    p: float
    bound: str  # "exact" at h=1, "lower" otherwise
    maximizer: FiniteMeasure


def lp_sup_tilted(params, eta, beta, p):
    """sup over product measures of L(beta, mu^(x)) - H(mu|eta)/p using
    the depth-1 site functional: by exponential tilting the supremum is
    (1/p) log sum_i eta_i exp(p f(a_i)), attained at dmu* prop e^{pf} deta.
    Exact at h = 1; a lower bound on Lp_sup for h < 1."""
    if p <= 0:
        raise ConfigError("p must be positive")
    atoms, weights = eta.arrays()
    f = _site_log_weight(params, beta, atoms)
    m = np.max(p * f)
    z = weights * np.exp(p * f - m)
    value = (m + np.log(z.sum())) / p
    mu = z / z.sum()
    bound = "exact" if params.h == 1.0 else "lower"
    return TiltedValue(float(value), beta, p, bound,
                       FiniteMeasure(tuple(atoms), tuple(mu)))


def L_of_product(params, beta, mu, n_sites=50_000, seed=0):
    """Estimate of L(beta, mu^(x)) for a product environment law mu (not
    necessarily with esssup 0).  The field mu shifts as xi = s + xi_norm
    with s = esssup, so L_mu(beta) = L_norm(beta + s)."""
    from .model import normalize
    from .quenched import LFunctionEstimate, estimate_L
    atoms, weights = mu.arrays()
    keep = weights > 0
    atoms, weights = atoms[keep], weights[keep] / weights[keep].sum()
    pot = normalize(PotentialModel("finite_support", atoms=tuple(atoms),
                                   weights=tuple(weights)))
    est = estimate_L(pot, params, beta + pot.shift, n_sites=n_sites,
                     seed=seed)
    return LFunctionEstimate(beta, est.mean_lower, est.mean_upper, est.stderr,
                             est.n_sites, est.deriv_lower, est.deriv_upper,
                             est.exact)


@dataclass(frozen=True)
class TransferOperator:
    depth: int
    beta: float
    p: float
    size: int
    perron_root: float
    root_bracket: tuple
    iterations: int


def _window_weights(params, beta, atoms, depth, tail):
    """Depth-d crossing weights w_d(a_1..a_d) with frozen tail, as a flat
    array indexed row-major by (a_1, ..., a_d)."""
    k, h = params.kappa, params.h
    d_arr = k - atoms - beta
    if np.any(d_arr <= 0.0):
        raise BeyondCritical("beta=%g reaches a potential level" % beta)
    A = 0.5 * (1.0 + h) * k / d_arr
    B = 0.5 * (1.0 - h) * k / d_arr
    w = A / (1.0 - B * tail)
    if np.any(1.0 - B * tail <= 0.0) or np.any(w <= 0.0):
        raise DivergentFunctional("window weight diverged at beta=%g" % beta)
    for _ in range(depth - 1):
        denom = 1.0 - B[:, None] * w[None, :]
        if np.any(denom <= 0.0):
            raise DivergentFunctional("window weight diverged at beta=%g" % beta)
        w = (A[:, None] / denom).reshape(-1)
    return w


def lp_sup_transfer(params, eta, beta, p, depth=4, tol=1e-10, max_iter=100_000):
    """Transfer-operator estimate of Lp_sup(beta): (1/p) log of the
    Perron root of the matrix on (d-1)-blocks with entries
    T[(a_1..a_{d-1}), (a_2..a_d)] = eta(a_d) * w_d(a_1..a_d)^p,
    using the optimistic free-field tail.  Collatz-Wielandt ratios give
    the reported Perron-root bracket.  Exact at h = 1 for any depth."""
    if p <= 0:
        raise ConfigError("p must be positive")
    atoms, weights = eta.arrays()
    s = len(atoms)
    if s ** max(depth - 1, 0) > 200_000:
        raise ConfigError("transfer state space s^(d-1) = %d too large"
                          % s ** (depth - 1))
    tail = free_hitting_weight(params, beta)
    w = _window_weights(params, beta, atoms, depth, tail)
    wp = np.exp(p * np.log(w)).reshape(-1, s)  # rows: (a_1..a_{d-1})
    n = wp.shape[0]
    if n == 1:
        lam = float(np.dot(wp[0], weights))
        op = TransferOperator(depth, beta, p, 1, lam, (lam, lam), 0)
        return float(np.log(lam) / p), op
    data = (wp * weights[None, :]).reshape(-1)
    block = n // s  # s^(d-2)
    rows = np.arange(n)
    cols = ((rows % block)[:, None] * s + np.arange(s)[None, :]).reshape(-1)
    T = sparse.csr_matrix((data, cols, np.arange(0, n * s + 1, s)), shape=(n, n))
    x = np.ones(n)
    lam_lo = lam_hi = None
    for it in range(1, max_iter + 1):
        y = T @ x
        r = y / x
        lam_lo, lam_hi = float(np.min(r)), float(np.max(r))
        if lam_hi - lam_lo <= tol * lam_hi:
            x = y
            break
        x = y / np.max(y)
    else:
        raise NumericalFailure(
            "power iteration did not converge; Perron root in [%g, %g]"
            % (lam_lo, lam_hi))
    lam = 0.5 * (lam_lo + lam_hi)
    op = TransferOperator(depth, beta, p, n, lam, (lam_lo, lam_hi), it)
    return float(np.log(lam) / p), op


def _lp_fun(params, eta, p, method, depth):
    if method == "tilted":
        return lambda b: lp_sup_tilted(params, eta, b, p).value
    if method == "transfer":
        return lambda b: lp_sup_transfer(params, eta, b, p, depth=depth)[0]
    raise ConfigError("unknown annealed method %r" % method)


def lambda_annealed(model, params, p, method="auto", depth=4, tol=1e-10,
                    seed=0):
    """Annealed exponent lambda_p: zero of beta |-> Lp_sup(-beta) on
    (-beta_cr, 0), and -beta_cr when no interior zero exists.

    method "auto" picks the exact tilted form at h = 1 and the transfer
    operator otherwise; "tilted" at h < 1 root-finds the declared lower
    bound (the resulting exponent is then an upper bound for lambda_p).
    """
    model.require_normalized()
    if p <= 0:
        raise ConfigError("p must be positive")
    shift = model.shift
    if model.variant == "degenerate":
        # xi = 0: all moments grow at the free rate, lambda_p = shift
        return LyapunovResult(shift + 0.0, "annealed(p=%g)" % p, (shift, shift),
                              0.0, False, shift, "exact:degenerate",
                              meta={"p": p})
    if model.variant == "markov":
        raise ConfigError("annealed exponents require an i.i.d. potential")
    eta = measure_from_model(model)
    if method == "auto":
        method = "tilted" if params.h == 1.0 else "transfer"
    fun = _lp_fun(params, eta, p, method, depth)
    cap = float(beta_cr(params, model))
    beta_hi = cap * (1.0 - _EPS_LADDER[-1])
    f0 = _safe(fun, 0.0)
    fhi = _safe(fun, beta_hi)
    tag = "%s(depth=%d)" % (method, depth) if method == "transfer" else method
    if params.h == 1.0 and method == "tilted":
        tag = "tilted:exact"
    meta = {"p": p}
    if params.h == 1.0 and p != int(p):
        meta["note"] = ("non-integer p at h=1: identification with the "
                        "moment Lyapunov exponent is conjectured")
    if fhi <= 0.0:
        return LyapunovResult(-cap + shift, "annealed(p=%g)" % p,
                              (-cap + shift, -beta_hi + shift),
                              abs(fhi), True, shift, tag, meta)
    if f0 >= -tol:
        root = 0.0
    else:
        root = float(optimize.brentq(lambda b: _safe(fun, b), 0.0, beta_hi,
                                     xtol=tol,
                                     rtol=8 * np.finfo(float).eps))
    resid = abs(_safe(fun, root)) if root > 0 else abs(f0)
    return LyapunovResult(-root + shift, "annealed(p=%g)" % p,
                          (-root + shift, -root + shift), resid, False,
                          shift, tag, meta)


def lambda_annealed_maxdrift(model, params, p, tol=1e-10):
    """Maximal-drift (h = 1) moment exponent for integer p: the zero of
    beta |-> log <(kappa/(kappa + beta - xi(0)))^p> on (-kappa, 0), and
    -kappa when no interior zero exists."""
    model.require_normalized()
    if params.h != 1.0:
        raise ConfigError("maximal-drift formula requires h = 1")
    if p != int(p) or p < 1:
        raise ConfigError(
            "maximal-drift formula is proven for integer p >= 1 only; "
            "for non-integer p use lambda_annealed (conjectured at h=1)")
    k = params.kappa
    shift = model.shift

    def g(beta):
        return np.log(expectation(model,
                                  lambda a: (k / (k + beta - a)) ** p))

    hi = 0.0
    lo = -k * (1.0 - _EPS_LADDER[-1])
    if g(hi) >= -tol:
        return LyapunovResult(shift, "annealed_maxdrift(p=%d)" % int(p),
                              (shift, shift), abs(g(hi)), False, shift,
                              "maxdrift", meta={"p": p})
    if g(lo) <= 0.0:
        return LyapunovResult(-k + shift, "annealed_maxdrift(p=%d)" % int(p),
                              (-k + shift, lo + shift), abs(g(lo)), True,
                              shift, "maxdrift", meta={"p": p})
    root = float(optimize.brentq(g, lo, hi, xtol=tol,
                                 rtol=8 * np.finfo(float).eps))
    return LyapunovResult(root + shift, "annealed_maxdrift(p=%d)" % int(p),
                          (root + shift, root + shift), abs(g(root)), False,
                          shift, "maxdrift", meta={"p": p})


@dataclass(frozen=True)
class AnnealedCurve:
    ps: np.ndarray
    lambdas: np.ndarray
    lambda0: float
    monotone: bool
    p_lambda_p_convex: bool
    first_intermittent_p: float = None
    results: list = field(default_factory=list)


def intermittency_scan(model, params, p_grid, method="auto", depth=4,
                       seed=0, n_sites=100_000, tol=1e-10, gap_tol=1e-9):
    """lambda_p across a p grid plus the quenched exponent, with the
    structural checks (monotone in p, p*lambda_p convex) and the first p
    at which lambda_p strictly exceeds lambda_0 (p-intermittency)."""
    ps = np.asarray(sorted(p_grid), float)
    res = [lambda_annealed(model, params, p, method=method, depth=depth,
                           tol=tol, seed=seed) for p in ps]
    lams = np.array([r.value for r in res])
    lam0 = lambda_quenched(model, params, seed=seed, n_sites=n_sites,
                           tol=tol, gap_tol=gap_tol).value
    mono = bool(np.all(np.diff(lams) >= -1e-9))
    plp = ps * lams
    convex = True
    for i in range(1, len(ps) - 1):
        t = (ps[i] - ps[i - 1]) / (ps[i + 1] - ps[i - 1])
        chord = (1 - t) * plp[i - 1] + t * plp[i + 1]
        if plp[i] > chord + 1e-9:
            convex = False
    first = None
    gap_thresh = 1e-6
    for p, lam in zip(ps, lams):
        if lam > lam0 + gap_thresh:
            first = float(p)
            break
    return AnnealedCurve(ps, lams, lam0, mono, convex, first, res)


def continuity_at_zero(model, params, p_ladder=(1.0, 0.5, 0.2, 0.1, 0.05),
                       method="auto", depth=4, seed=0, n_sites=100_000,
                       tol=1e-10):
    """Gaps |lambda_p - lambda_0| along a decreasing p ladder; they
    should shrink (continuity of p -> lambda_p at p = 0+)."""
    ps = np.asarray(sorted(p_ladder, reverse=True), float)
    lam0 = lambda_quenched(model, params, seed=seed, n_sites=n_sites,
                           tol=tol).value
    gaps = []
    for p in ps:
        lp = lambda_annealed(model, params, p, method=method, depth=depth,
                             tol=tol, seed=seed).value
        gaps.append(abs(lp - lam0))
    gaps = np.asarray(gaps)
    shrinking = bool(np.all(np.diff(gaps) <= 1e-9))
    return ps, gaps, lam0, shrinking
