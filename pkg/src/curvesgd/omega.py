"""Curvature gauges and what they buy.

The central object is a one-parameter family of increasing concave gauges
omega_{h,r,mu,tau} used to convert a function-value gap into a squared
distance bound: omega(F(w) - F*) >= ||w - w*||^2. From a gauge we derive

* v(eta): the contraction factor earned by step size eta, defined through
  the inverse of x -> omega(x)/omega'(x) - x,
* c_alpha: the doubling constant sup_e inf_x omega(2x)/omega(x),
* estimate_delta: an empirical majorant of the gap-to-distance profile of
  an objective, whose log-log slope estimates the curvature exponent h.

Two parameterizations of the same family are supported. The default
"h_scaled" form is (2/(mu h)) (x/r)^h below r with a tangent continuation
above; the "offset" form is tau + (2/mu)(x/r)^h with its own tangent
continuation. They coincide via h_scaled(h, r, mu) = offset(h, r, mu*h,
tau=0). r = inf means the power law applies everywhere, with r^h absorbed
into mu (i.e. treated as 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

VARIANTS = ("h_scaled", "offset")


@dataclass(frozen=True)
class OmegaSpec:
    """Parameters (h, r, mu, tau) of one gauge, plus the variant flag."""

    h: float
    r: float = math.inf
    mu: float = 1.0
    tau: float = 0.0
    variant: str = "h_scaled"

    def __post_init__(self):
        if not (0.0 < self.h <= 1.0):
            raise ValueError("h must lie in (0, 1]")
        if not (self.r > 0.0):
            raise ValueError("r must be positive (math.inf allowed)")
        if not (self.mu > 0.0):
            raise ValueError("mu must be positive")
        if self.tau < 0.0:
            raise ValueError("tau must be nonnegative")
        if self.variant not in VARIANTS:
            raise ValueError("variant must be one of %s" % (VARIANTS,))
        if self.variant == "h_scaled" and self.tau != 0.0:
            raise ValueError("the h_scaled form has no offset; use variant='offset'")

    @property
    def beta(self) -> float:
        """(mu/2) h^-h (1-h)^-(1-h) r^h, with 0^0 = 1 and r^h -> 1 at r = inf."""
        h = self.h
        r_pow = 1.0 if math.isinf(self.r) else self.r ** h
        return 0.5 * self.mu * h ** (-h) * (1.0 - h) ** (-(1.0 - h)) * r_pow


def _scaled_x(spec: OmegaSpec, x):
    # (x/r)^h with the r = inf absorption convention
    if math.isinf(spec.r):
        return x
    return x / spec.r


def omega_eval(spec: OmegaSpec, x):
    """omega(x) for scalar or array x >= 0."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0):
        raise ValueError("omega is defined for x >= 0")
    z = _scaled_x(spec, xa)
    if spec.variant == "h_scaled":
        below = (2.0 / (spec.mu * spec.h)) * z ** spec.h
        if math.isinf(spec.r):
            out = below
        else:
            above = 2.0 / (spec.mu * spec.h) + (2.0 / spec.mu) * (z - 1.0)
            out = np.where(xa <= spec.r, below, above)
    else:
        below = spec.tau + (2.0 / spec.mu) * z ** spec.h
        if math.isinf(spec.r):
            out = below
        else:
            above = spec.tau + 2.0 / spec.mu + (2.0 * spec.h / spec.mu) * (z - 1.0)
            out = np.where(xa <= spec.r, below, above)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def omega_derivative(spec: OmegaSpec, x):
    """omega'(x) for x > 0; continuous across the breakpoint at r."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0.0):
        raise ValueError("omega' is defined for x > 0")
    h = spec.h
    if math.isinf(spec.r):
        if spec.variant == "h_scaled":
            out = (2.0 / spec.mu) * xa ** (h - 1.0)
        else:
            out = (2.0 * h / spec.mu) * xa ** (h - 1.0)
    else:
        z = xa / spec.r
        if spec.variant == "h_scaled":
            slope = 2.0 / (spec.mu * spec.r)
        else:
            slope = 2.0 * h / (spec.mu * spec.r)
        out = np.where(xa <= spec.r, slope * z ** (h - 1.0), slope)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def v_closed_form(spec: OmegaSpec, eta: float) -> float:
    """Closed form of the contraction map v.

    h_scaled: v(eta) = beta h eta^{1-h}; offset with tau = 0: beta eta^{1-h}.
    Limits: h = 1 gives the constant (mu/2) r (or mu/2 at r = inf). There is
    no closed form for tau > 0.
    """
    if not (0.0 < eta <= spec.r):
        raise ValueError("eta must lie in (0, r]")
    if spec.tau != 0.0:
        raise ValueError("no closed form for tau > 0; use v_numeric")
    factor = spec.beta * spec.h if spec.variant == "h_scaled" else spec.beta
    return factor * eta ** (1.0 - spec.h)


def _step_gap(spec: OmegaSpec, x: float) -> float:
    return omega_eval(spec, x) / omega_derivative(spec, x) - x


def v_numeric(spec: OmegaSpec, eta: float, max_halvings: int = 1200) -> float:
    """Invert eta = omega(x)/omega'(x) - x by bisection and return 1/omega'(x).

    The map is nondecreasing in x and, for finite r, saturates for x >= r;
    step sizes beyond the saturation value are rejected. At h = 1 the map is
    constant, so the limit value of v is returned directly.
    """
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    if spec.h == 1.0:
        x0 = 1.0 if math.isinf(spec.r) else 0.5 * spec.r
        return 1.0 / omega_derivative(spec, x0)
    if math.isinf(spec.r):
        hi = 1.0
        for _ in range(max_halvings):
            if _step_gap(spec, hi) >= eta:
                break
            hi *= 2.0
        else:
            raise ValueError("could not bracket the step map from above")
    else:
        top = _step_gap(spec, spec.r)
        if eta > top:
            if eta <= top * (1.0 + 1e-9):
                return 1.0 / omega_derivative(spec, spec.r)
            raise ValueError(
                "eta=%g exceeds the invertible range of the step map "
                "(saturates at %g)" % (eta, top)
            )
        hi = spec.r
    lo = hi
    for _ in range(max_halvings):
        if _step_gap(spec, lo) <= eta:
            break
        lo *= 0.5
    else:
        raise ValueError("could not bracket the step map from below")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if _step_gap(spec, mid) < eta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 1.0 / omega_derivative(spec, 0.5 * (lo + hi))


def c_alpha(spec: OmegaSpec, alpha: float) -> float:
    """Doubling constant of the gauge at scale alpha, 0 < alpha <= r/2.

    Closed form 1 + (2^h - 1) / ((mu tau / 2)(r/alpha)^h + 1); for tau = 0
    this is 2^h.
    """
    _validate_alpha(spec, alpha)
    h = spec.h
    if math.isinf(spec.r):
        ratio_pow = alpha ** (-h)  # r^h absorbed, so (r/alpha)^h -> alpha^-h
    else:
        ratio_pow = (spec.r / alpha) ** h
    return 1.0 + (2.0 ** h - 1.0) / (0.5 * spec.mu * spec.tau * ratio_pow + 1.0)


def c_alpha_brute(spec: OmegaSpec, alpha: float, grid_points: int = 4000) -> float:
    """Brute-force doubling constant on a log grid.

    Evaluates sup over e >= alpha of inf over x in [alpha, e] of
    omega(2x)/omega(x), with alpha included in the grid exactly.
    """
    _validate_alpha(spec, alpha)
    if math.isinf(spec.r):
        e_max = 1e4 * alpha
    else:
        e_max = max(10.0 * spec.r, 4.0 * alpha)
    grid = np.geomspace(alpha, e_max, grid_points)
    grid[0] = alpha
    ratios = omega_eval(spec, 2.0 * grid) / omega_eval(spec, grid)
    inner = np.minimum.accumulate(ratios)
    return float(inner.max())


def _validate_alpha(spec: OmegaSpec, alpha: float):
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if not math.isinf(spec.r) and alpha > 0.5 * spec.r:
        raise ValueError("alpha must not exceed r/2")


# ---------------------------------------------------------------------------
# empirical curvature estimation


@dataclass(frozen=True)
class GapFunctions:
    """Paired maps a(w) = F(w) - F_min and b(w) = ||w - w_star||^2.

    Both callables must accept a (samples, d) array and return a (samples,)
    array.
    """

    a: object
    b: object

    @classmethod
    def from_objective(cls, objective, reference):
        w_star = reference.w_star
        f_min = reference.f_min

        def a(W):
            return objective.value_many(W) - f_min

        def b(W):
            diff = W - w_star
            return np.einsum("ij,ij->i", diff, diff)

        return cls(a=a, b=b)


@dataclass(frozen=True)
class DeltaEstimate:
    """Result of estimate_delta.

    rho_values holds the raw per-level maxima (NaN where a band was empty);
    delta_values is their least concave nondecreasing majorant through the
    origin. fitted_h is the least-squares log-log slope over the lowest
    populated grid decade.
    """

    epsilon_grid: np.ndarray
    rho_values: np.ndarray
    delta_values: np.ndarray
    fitted_h: float
    band_counts: np.ndarray = field(default=None)


def _upper_concave_majorant(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Least concave majorant through (0, 0) of the finite (xs, ys) points,
    evaluated at every xs, then made nondecreasing by a running maximum."""
    finite = np.isfinite(ys)
    if not np.any(finite):
        raise ValueError("no level set produced a finite value")
    pts = [(0.0, 0.0)] + sorted(zip(xs[finite], ys[finite]))
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # pop while the middle point lies on or below the chord
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0.0:
                hull.pop()
            else:
                break
        # keep x strictly increasing; on ties keep the larger y
        if hull and p[0] == hull[-1][0]:
            if p[1] > hull[-1][1]:
                hull[-1] = p
            continue
        hull.append(p)
    hx = np.array([p[0] for p in hull])
    hy = np.array([p[1] for p in hull])
    vals = np.interp(xs, hx, hy)
    return np.maximum.accumulate(vals)


def _fit_low_decade_slope(eps: np.ndarray, delta: np.ndarray, min_points: int = 8) -> float:
    good = np.isfinite(delta) & (delta > 0.0) & (eps > 0.0)
    if np.count_nonzero(good) < 2:
        return math.nan
    e = eps[good]
    d = delta[good]
    lo = e.min()
    span = 10.0
    for _ in range(12):
        mask = e <= lo * span * (1.0 + 1e-12)
        if np.count_nonzero(mask) >= min_points or np.all(mask):
            break
        span *= 10.0
    slope = np.polyfit(np.log(e[mask]), np.log(d[mask]), 1)[0]
    return float(slope)


def estimate_delta(gap: GapFunctions, sample_region, grid=None,
                   n_samples: int = 100_000, band_rel: float = 0.02,
                   seed: int = 0) -> DeltaEstimate:
    """Empirical gap-to-distance majorant.

    Samples w uniformly over the box ``sample_region = (low, high)``, bins
    the samples into relative bands |a(w) - eps| <= band_rel * eps around
    each grid value, records the per-band maximum of b(w), and returns the
    least concave nondecreasing majorant of those maxima. Empty bands are
    reported (NaN rho, zero count), not fatal.
    """
    low, high = sample_region
    low = np.atleast_1d(np.asarray(low, dtype=float))
    high = np.atleast_1d(np.asarray(high, dtype=float))
    if low.shape != high.shape or np.any(low >= high):
        raise ValueError("sample_region must be a (low, high) box with low < high")
    rng = np.random.default_rng(seed)
    W = rng.uniform(low, high, size=(n_samples, low.size))
    av = np.asarray(gap.a(W), dtype=float)
    bv = np.asarray(gap.b(W), dtype=float)
    if grid is None:
        pos = av[av > 0.0]
        if pos.size == 0:
            raise ValueError("no sample produced a positive gap value")
        grid = np.geomspace(np.quantile(pos, 0.001), np.quantile(pos, 0.999), 48)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0.0) or np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be positive and strictly increasing")
    rho = np.full(grid.size, math.nan)
    counts = np.zeros(grid.size, dtype=int)
    for k, eps in enumerate(grid):
        mask = np.abs(av - eps) <= band_rel * eps
        counts[k] = int(np.count_nonzero(mask))
        if counts[k]:
            rho[k] = float(bv[mask].max())
    delta = _upper_concave_majorant(grid, rho)
    fitted = _fit_low_decade_slope(grid, delta)
    return DeltaEstimate(
        epsilon_grid=grid,
        rho_values=rho,
        delta_values=delta,
        fitted_h=fitted,
        band_counts=counts,
    )


def fit_curvature(objective, region_radius: float = 3.0, reference=None,
                  grid=None, n_samples: int = 100_000, seed: int = 0) -> float:
    """Estimate the curvature exponent h of an objective, clamped to [0, 1].

    The estimate is the log-log slope of the empirical delta majorant near
    zero, so delta(eps) ~ eps^h by construction: a strongly convex quadratic
    yields h near 1, a quartic-bottomed objective h near 1/2. The slope is
    invariant under rescaling of the objective, up to sampling noise.
    """
    from .objectives import solve_reference

    if reference is None:
        reference = solve_reference(objective)
    gap = GapFunctions.from_objective(objective, reference)
    d = objective.dimension
    region = (-region_radius * np.ones(d), region_radius * np.ones(d))
    est = estimate_delta(gap, region, grid=grid, n_samples=n_samples, seed=seed)
    if math.isnan(est.fitted_h):
        raise ValueError("curvature fit failed: empty delta profile")
    return min(1.0, max(0.0, est.fitted_h))
