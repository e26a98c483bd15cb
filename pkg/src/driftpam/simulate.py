"""Direct numerics: lattice ODE integration and Monte Carlo.

The Cauchy problem du/dt = kappa*Delta_h u + xi*u, u(0,.) = 1, is
integrated with classical RK4 on a finite window with absorbing
boundary.  The endpoint field v(t, n) = E_0[exp{int xi(X)} 1{X_t = n}]
solves the adjoint equation started from a point mass at 0 and its total
mass reproduces u(t, 0) exactly at the discrete level (the integrator is
a polynomial in the generator matrix).  Monte Carlo routines estimate
the same quantities from exponential-holding-time walk paths.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, NumericalFailure


def _coeffs(params, kind):
    """(c_right, c_left): coefficients of the x+1 / x-1 neighbors.

    kind: 'forward'  = generator of X (drift right),
          'adjoint'  = its transpose (endpoint densities of X),
          'reversal' = generator of Y = kappa*Delta_{-h} (same neighbor
                       coefficients as 'adjoint').
    """
    k, h = params.kappa, params.h
    if kind == "forward":
        return 0.5 * (1.0 + h) * k, 0.5 * (1.0 - h) * k
    if kind in ("adjoint", "reversal"):
        return 0.5 * (1.0 - h) * k, 0.5 * (1.0 + h) * k
    raise ValueError(kind)


def default_dt(params, env):
    """Stability step: dt = 0.1 / (2 kappa + |min xi|)."""
    b = float(np.min(env.values))
    return 0.1 / (2.0 * params.kappa + abs(b))


def default_window(params, t_max, pad=50):
    return int(np.ceil(4.0 * params.kappa * t_max)) + pad


@njit(cache=True)
def _row_rhs(u, d, cr, cl, out):
    n = u.shape[0]
    for j in range(n):
        acc = d[j] * u[j]
        if j + 1 < n:
            acc += cr * u[j + 1]
        if j > 0:
            acc += cl * u[j - 1]
        out[j] = acc


@njit(cache=True)
def _rk4_steps(v, diag, cr, cl, hstep, nsteps):
    """In-place classical RK4 on each row of v (absorbing boundary)."""
    m, n = v.shape
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for i in range(m):
        u = v[i]
        d = diag[i]
        for _ in range(nsteps):
            _row_rhs(u, d, cr, cl, k1)
            for j in range(n):
                tmp[j] = u[j] + 0.5 * hstep * k1[j]
            _row_rhs(tmp, d, cr, cl, k2)
            for j in range(n):
                tmp[j] = u[j] + 0.5 * hstep * k2[j]
            _row_rhs(tmp, d, cr, cl, k3)
            for j in range(n):
                tmp[j] = u[j] + hstep * k3[j]
            _row_rhs(tmp, d, cr, cl, k4)
            for j in range(n):
                u[j] += (hstep / 6.0) * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j])


def _integrate(v0, xi, params, kind, t_values, dt):
    """RK4 snapshots of dv/dt = (op + xi) v at the sorted t_values.

    v0 and xi may be batched on a leading axis; absorbing boundary
    (sites outside the window contribute 0).
    """
    cr, cl = _coeffs(params, kind)
    v = np.atleast_2d(np.array(v0, dtype=float, copy=True))
    diag = np.ascontiguousarray(np.broadcast_to(np.atleast_2d(xi), v.shape)
                                - params.kappa)
    out = np.empty((len(t_values),) + np.shape(v0))
    t = 0.0
    for j, target in enumerate(t_values):
        span = target - t
        if span < -1e-12:
            raise ConfigError("t_values must be sorted ascending")
        nsteps = max(int(np.ceil(span / dt - 1e-12)), 0)
        if nsteps:
            _rk4_steps(v, diag, cr, cl, span / nsteps, nsteps)
        t = target
        if not np.all(np.isfinite(v)):
            raise NumericalFailure("integration blew up; reduce dt")
        out[j] = v if np.ndim(v0) == 2 else v[0]
    return out


@dataclass(frozen=True)
class SolutionField:
    lo: int
    hi: int
    times: np.ndarray
    values: np.ndarray  # shape (n_times, n_sites)
    dt: float

    def at(self, t, x):
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9:
            raise KeyError("time %g was not sampled" % t)
        return float(self.values[j, x - self.lo])


@dataclass(frozen=True)
class EndpointField(SolutionField):
    def mass(self, t=None):
        j = -1 if t is None else int(np.argmin(np.abs(self.times - t)))
        return float(self.values[j].sum())


def _resolve_window(env, params, t_max, window):
    m = default_window(params, t_max)
    if window is None:
        lo, hi = -m, m
    else:
        lo, hi = window
        if hi < m or (params.h < 1.0 and lo > -m) or lo > 0:
            raise ConfigError(
                "window [%d, %d] too small for t=%g (need half-width >= %d)"
                % (lo, hi, t_max, m))
    if lo < env.lo or hi > env.hi:
        raise ConfigError("environment does not cover the window [%d, %d]"
                          % (lo, hi))
    return lo, hi


def _resolve_dt(env, params, dt):
    cap = default_dt(params, env)
    if dt is None:
        return cap
    if dt > cap * (1.0 + 1e-12):
        raise ConfigError("dt=%g exceeds the stability cap %g" % (dt, cap))
    return dt


def solve_pde(env, params, t_max, times=None, window=None, dt=None):
    """Integrate the lattice Cauchy problem with u(0,.) = 1."""
    lo, hi = _resolve_window(env, params, t_max, window)
    dt = _resolve_dt(env, params, dt)
    if times is None:
        times = [t_max]
    times = np.asarray(times, float)
    xi = env.slice(lo, hi)
    u0 = np.ones(hi - lo + 1)
    vals = _integrate(u0, xi, params, "forward", times, dt)
    if np.any(vals < -1e-12) or np.any(vals > 1.0 + 1e-9):
        raise NumericalFailure("solution left [0, 1]; reduce dt")
    return SolutionField(lo, hi, times, vals, dt)


def endpoint_field(env, params, t_max, times=None, window=None, dt=None):
    """Integrate the endpoint-density field v with v(0,.) = delta_0."""
    lo, hi = _resolve_window(env, params, t_max, window)
    dt = _resolve_dt(env, params, dt)
    if times is None:
        times = [t_max]
    times = np.asarray(times, float)
    xi = env.slice(lo, hi)
    v0 = np.zeros(hi - lo + 1)
    v0[-lo] = 1.0
    vals = _integrate(v0, xi, params, "adjoint", times, dt)
    if np.any(vals < -1e-12):
        raise NumericalFailure("endpoint field went negative; reduce dt")
    return EndpointField(lo, hi, times, vals, dt)


@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    ci: float
    drift: float
    stationary: bool
    advice: str
    times: np.ndarray
    log_u: np.ndarray


def quenched_slope(env, params, t_max, n_points=9, drift_tol=0.01,
                   window=None, dt=None):
    """Least-squares slope of t -> log u(t, 0) over [t_max/2, t_max],
    with a thirds diagnostic: if sub-window slopes disagree by more than
    drift_tol the estimate is flagged non-stationary (increase t)."""
    grid = np.linspace(0.5 * t_max, t_max, n_points)
    sol = solve_pde(env, params, t_max, times=grid, window=window, dt=dt)
    y = np.log(sol.values[:, -sol.lo])
    A = np.vstack([grid, np.ones_like(grid)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    dof = max(len(grid) - 2, 1)
    sigma2 = float(res[0]) / dof if len(res) else 0.0
    ci = float(np.sqrt(sigma2 / np.sum((grid - grid.mean()) ** 2)))
    third = max(len(grid) // 3, 2)
    s1 = np.polyfit(grid[:third], y[:third], 1)[0]
    s3 = np.polyfit(grid[-third:], y[-third:], 1)[0]
    drift = float(abs(s3 - s1))
    ok = drift <= max(drift_tol, 4.0 * ci)
    return SlopeEstimate(slope, ci, drift, ok,
                         "" if ok else "increase t", grid, y)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    heavy_tail: bool = False


def _walk_segments(rng, n_paths, t, params, step_right_prob):
    """Segment durations and positions for walk paths started at 0
    (vectorized; extends the jump budget until all paths cover [0, t]).
    Returns (durations, seg_pos, final_pos): position during segment j
    is seg_pos[:, j], and final_pos is the location at time t."""
    k = params.kappa
    K = int(np.ceil(k * t + 8.0 * np.sqrt(k * t + 1.0) + 16))
    gaps = rng.exponential(1.0 / k, size=(n_paths, K))
    while np.any(np.sum(gaps, axis=1) < t):
        gaps = np.concatenate(
            [gaps, rng.exponential(1.0 / k, size=(n_paths, 32))], axis=1)
    arrivals = np.cumsum(gaps, axis=1)
    steps = np.where(rng.random(gaps.shape) < step_right_prob, 1, -1)
    pos = np.concatenate([np.zeros((n_paths, 1), dtype=np.int64),
                          np.cumsum(steps, axis=1)], axis=1)
    bounds = np.concatenate([np.zeros((n_paths, 1)),
                             np.minimum(arrivals, t)], axis=1)
    durations = np.diff(bounds, axis=1)
    durations = np.concatenate(
        [durations, np.maximum(t - bounds[:, -1:], 0.0)], axis=1)
    n_jumps_before_t = np.sum(arrivals < t, axis=1)
    final_pos = pos[np.arange(n_paths), n_jumps_before_t]
    return durations, pos, final_pos


def _env_lookup(env, seg_pos, durations):
    """xi values along path segments, checking that every segment with
    positive duration stays inside the environment window."""
    live = durations > 0
    bad = (seg_pos < env.lo) | (seg_pos > env.hi)
    if np.any(bad & live):
        raise ConfigError("a walk path left the environment window; "
                          "sample a wider environment")
    idx = np.clip(seg_pos - env.lo, 0, len(env.values) - 1)
    return env.values[idx]


def feynman_kac_mc(env, params, t, n_paths=10_000, seed=0, chunk=20_000):
    """Monte Carlo of u(t, 0) = E_0 exp{int_0^t xi(X_s) ds} from walk
    paths with rate-kappa exponential holding times and right-step
    probability (1+h)/2."""
    rng = np.random.default_rng([seed, 0x5FA1])
    sums = []
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        dur, pos, _ = _walk_segments(rng, m, t, params, params.p_right)
        integral = np.sum(_env_lookup(env, pos, dur) * dur, axis=1)
        sums.append(np.exp(integral))
        done += m
    w = np.concatenate(sums)
    return McEstimate(float(w.mean()), float(w.std(ddof=1) / np.sqrt(len(w))),
                      len(w))


@dataclass(frozen=True)
class GibbsSpeed:
    mean_speed: float
    t: float
    bin_edges: np.ndarray
    masses: np.ndarray


def gibbs_speed(env, params, t, bins=40, window=None, dt=None):
    """Mean speed n/t and speed histogram under the normalized endpoint
    (Gibbs) measure v(t, .) / sum v(t, .)."""
    v = endpoint_field(env, params, t, window=window, dt=dt)
    w = np.maximum(v.values[-1], 0.0)
    total = w.sum()
    if total <= 0:
        raise NumericalFailure("endpoint field has no mass")
    w = w / total
    x = np.arange(v.lo, v.hi + 1) / t
    mean_speed = float(np.sum(w * x))
    live = w > 1e-15
    span = (x[live].min(), max(x[live].max(), x[live].min() + 1e-6))
    edges = np.linspace(span[0], span[1], bins + 1)
    masses, _ = np.histogram(x, bins=edges, weights=w)
    return GibbsSpeed(mean_speed, t, edges, masses)


def _env_seed(seed, i):
    return (int(seed) * 1_000_003 + 7919 * int(i) + 13) & 0x7FFFFFFFFFFF


def annealed_moments(model, params, ps, t, n_env=1000, seed=0, n_times=8,
                     chunk=2000, dt=None, n_blocks=10):
    """Annealed moment slopes: for each p, the least-squares slope of
    (1/p) log <u(t,0)^p>_env over a t grid on [t/2, t], with a block
    stderr and a heavy-tail flag (one environment carrying > 50% of the
    p-th moment at the final time).

    Environments are sampled i.i.d. (outer loop, vectorized in chunks);
    each is integrated with the deterministic lattice scheme.
    """
    from .model import sample_environment
    model.require_normalized()
    m = default_window(params, t)
    lo, hi = (0, m) if params.h == 1.0 else (-m, m)
    grid = np.linspace(0.5 * t, t, n_times)
    samples = np.empty((n_env, n_times))
    done = 0
    while done < n_env:
        nb = min(chunk, n_env - done)
        xi = np.stack([sample_environment(model, _env_seed(seed, done + i),
                                          lo, hi).values
                       for i in range(nb)])
        if dt is None:
            dt_c = 0.1 / (2.0 * params.kappa + abs(float(xi.min())))
        else:
            dt_c = dt
        u0 = np.ones_like(xi)
        vals = _integrate(u0, xi, params, "forward", grid, dt_c)
        samples[done:done + nb] = vals[:, :, -lo].T
        done += nb
    out = {}
    blocks = np.array_split(np.arange(n_env), n_blocks)
    for p in np.atleast_1d(ps):
        up = samples ** p
        mom = up.mean(axis=0)
        y = np.log(mom) / p
        slope = float(np.polyfit(grid, y, 1)[0])
        bs = []
        for blk in blocks:
            yb = np.log(up[blk].mean(axis=0)) / p
            bs.append(np.polyfit(grid, yb, 1)[0])
        stderr = float(np.std(bs, ddof=1) / np.sqrt(len(bs)))
        heavy = bool(up[:, -1].max() > 0.5 * up[:, -1].sum())
        out[float(p)] = (McEstimate(slope, stderr, n_env, heavy), grid, y)
    return out


def annealed_moment(model, params, p, t, n_env=1000, seed=0, **kw):
    """Slope estimate of the single annealed moment exponent lambda_p."""
    return annealed_moments(model, params, [p], t, n_env=n_env, seed=seed,
                            **kw)[float(p)][0]


def time_reversal_check(env, params, n, t, dt=None):
    """Deterministic identity per environment:
    E_{-n} e^{int xi(Y)} 1{Y_t = 0}
      = ((1-h)/(1+h))^n * E_0 e^{int xi(Y)} 1{Y_t = -n}.
    Both sides are computed with the Y-generator lattice integrator on a
    shared window; returns (lhs, rhs, |lhs - rhs|)."""
    pad = default_window(params, t, pad=30)
    lo, hi = -n - pad, pad
    if lo < env.lo or hi > env.hi:
        raise ConfigError("environment must cover [%d, %d]" % (lo, hi))
    dt = _resolve_dt(env, params, dt)
    xi = env.slice(lo, hi)
    g0 = np.zeros(hi - lo + 1)
    g0[0 - lo] = 1.0                      # indicator of endpoint 0
    gn = np.zeros(hi - lo + 1)
    gn[-n - lo] = 1.0                     # indicator of endpoint -n
    lhs = _integrate(g0, xi, params, "reversal", [t], dt)[0][-n - lo]
    rhs_raw = _integrate(gn, xi, params, "reversal", [t], dt)[0][0 - lo]
    if params.h == 1.0:
        factor = 0.0 if n > 0 else 1.0
    else:
        factor = ((1.0 - params.h) / (1.0 + params.h)) ** n
    rhs = factor * rhs_raw
    return float(lhs), float(rhs), float(abs(lhs - rhs))


def branching_expectation_check(env, params, t, n_runs=200, seed=0, dt=None):
    """Particle-system check: one particle starts at every site of a
    window, moves with generator kappa*Delta_{-h} and is killed at rate
    -xi; the expected number of particles at (t, 0) equals u(t, 0).
    Returns (McEstimate over runs, PDE value)."""
    k = params.kappa
    W = int(np.ceil(k * t + 6.0 * np.sqrt(k * t + 1.0))) + 10
    starts = np.arange(-W, W + 1)
    rng = np.random.default_rng([seed, 0xB0A7])
    counts = np.empty(n_runs)
    for r in range(n_runs):
        # Y drifts left: right-step probability is (1-h)/2
        dur, pos, final = _walk_segments(rng, len(starts), t, params,
                                         params.p_left)
        # paths are simulated from 0 and shifted to their start sites
        xi_path = _env_lookup(env, pos + starts[:, None], dur)
        hazard = np.sum(-xi_path * dur, axis=1)
        alive = rng.exponential(1.0, size=len(starts)) > hazard
        counts[r] = np.sum((final + starts == 0) & alive)
    sol = solve_pde(env, params, t, dt=dt)
    u0 = sol.at(t, 0)
    est = McEstimate(float(counts.mean()),
                     float(counts.std(ddof=1) / np.sqrt(n_runs)), n_runs)
    return est, u0
