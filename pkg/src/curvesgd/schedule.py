"""Step-size schedules and the decay envelope they earn.

Three schedule kinds share one spec type:

* constant: eta_t = eta,
* power_law: eta_t = scale / t^{1/(2-h)} for t >= 1 (the experiment grid),
* curvature_matched: eta_t = (2/(beta (2-h)))^{1/(2-h)} (t + delta)^{-1/(2-h)}
  with delta chosen so the first step honors the cap min(1/(2L), r); the
  decay exponent is the one the contraction map v(eta) = beta h eta^{1-h}
  rewards with the fastest rate envelope.

For a schedule n(t) and contraction map v, the envelope machinery exposes
M(t) = integral of n v(n), the variance integral C(t), and for the matched
schedule the closed-form majorant C_bar(t) = c (t + delta)^{-h/(2-h)} that
solves C_bar = 2 sqrt(-C_bar') / v(sqrt(-C_bar')) exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("constant", "power_law", "curvature_matched")


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""


@dataclass(frozen=True)
class ScheduleSpec:
    """One step-size schedule. Use the classmethod constructors."""

    kind: str
    eta0: float = math.nan       # constant
    scale: float = math.nan      # power_law
    h: float = math.nan          # power_law, curvature_matched
    beta: float = math.nan       # curvature_matched
    L: float = math.nan          # curvature_matched
    r: float = math.inf          # curvature_matched

    @classmethod
    def constant(cls, eta: float) -> "ScheduleSpec":
        if eta <= 0:
            raise ValueError("constant step size must be positive")
        return cls(kind="constant", eta0=float(eta))

    @classmethod
    def power_law(cls, scale: float, h: float) -> "ScheduleSpec":
        if scale <= 0:
            raise ValueError("scale must be positive")
        if not (0.0 <= h <= 1.0):
            raise ValueError("power_law exponent parameter h must lie in [0, 1]")
        return cls(kind="power_law", scale=float(scale), h=float(h))

    @classmethod
    def curvature_matched(cls, h: float, beta: float, L: float,
                          r: float = math.inf) -> "ScheduleSpec":
        if not (0.0 < h <= 1.0):
            raise ValueError("h must lie in (0, 1]")
        if beta <= 0 or L <= 0:
            raise ValueError("beta and L must be positive")
        if r <= 0:
            raise ValueError("r must be positive (math.inf allowed)")
        return cls(kind="curvature_matched", h=float(h), beta=float(beta),
                   L=float(L), r=float(r))

    @property
    def delta(self) -> float:
        """Time shift 2 max(2L, 1/r) / (beta (2-h)) of the matched schedule."""
        self._require("curvature_matched")
        cap = max(2.0 * self.L, 0.0 if math.isinf(self.r) else 1.0 / self.r)
        return 2.0 * cap / (self.beta * (2.0 - self.h))

    @property
    def envelope_constant(self) -> float:
        """Constant c with C_bar(t) = c (t + delta)^{-h/(2-h)}.

        c = (h/(2-h))^{h/(2-h)} (2/(beta h))^{2/(2-h)}, which is the unique
        constant making C_bar solve the envelope equation with
        v(eta) = beta h eta^{1-h}.
        """
        self._require("curvature_matched")
        h = self.h
        p = h / (2.0 - h)
        return p ** p * (2.0 / (self.beta * h)) ** (2.0 / (2.0 - h))

    def _require(self, kind: str):
        if self.kind != kind:
            raise ValueError("operation requires a %s schedule, got %s"
                             % (kind, self.kind))


def eta(spec: ScheduleSpec, t) -> float:
    """Step size at (real) time t. power_law requires t >= 1."""
    ta = np.asarray(t, dtype=float)
    if spec.kind == "constant":
        if np.any(ta < 0):
            raise ValueError("t must be nonnegative")
        out = np.broadcast_to(np.float64(spec.eta0), ta.shape).copy()
    elif spec.kind == "power_law":
        if np.any(ta < 1):
            raise ValueError("power_law schedules start at t = 1")
        out = spec.scale * ta ** (-1.0 / (2.0 - spec.h))
    else:
        if np.any(ta < 0):
            raise ValueError("t must be nonnegative")
        k = (2.0 / (spec.beta * (2.0 - spec.h))) ** (1.0 / (2.0 - spec.h))
        out = k * (ta + spec.delta) ** (-1.0 / (2.0 - spec.h))
    if np.ndim(t) == 0:
        return float(out)
    return out


def _eta_integrand(spec: ScheduleSpec, x: np.ndarray) -> np.ndarray:
    """Schedule as a function on [0, inf) for quadrature purposes.

    power_law is frozen at its t = 1 value below 1, matching the engine's
    mapping of iteration 0 to t = 1.
    """
    if spec.kind == "power_law":
        return eta(spec, np.maximum(np.asarray(x, dtype=float), 1.0))
    return eta(spec, x)


def schedule_v(spec: ScheduleSpec):
    """The contraction map v(eta) = beta h eta^{1-h} built into a matched
    schedule."""
    spec._require("curvature_matched")
    b, h = spec.beta, spec.h
    return lambda e: b * h * np.asarray(e, dtype=float) ** (1.0 - h)


# ---------------------------------------------------------------------------
# quadrature helpers (log-substituted composite trapezoid)

MAX_DOUBLINGS = 24


def _log_trapezoid(f, t: float, abs_tol: float = 1e-8,
                   max_doublings: int = MAX_DOUBLINGS) -> float:
    """integral of f over [0, t] via x = exp(s) - 1, interval halving with
    midpoint reuse, stopping when successive estimates differ by <= abs_tol."""
    if t == 0.0:
        return 0.0
    b = math.log1p(t)

    def g(s):
        s = np.asarray(s, dtype=float)
        x = np.expm1(s)
        return f(x) * np.exp(s)

    total = 0.5 * b * float(g(0.0) + g(b))
    n_sub = 1
    for level in range(1, max_doublings + 1):
        n_sub *= 2
        step = b / n_sub
        mids = step * np.arange(1, n_sub, 2)
        total_new = 0.5 * total + step * float(np.sum(g(mids)))
        if level >= 5 and abs(total_new - total) <= abs_tol:
            return total_new
        total = total_new
    raise QuadratureError("trapezoid refinement did not converge "
                          "(max %d doublings)" % max_doublings)


def M_of_t(spec: ScheduleSpec, t: float, v=None, method: str = "auto") -> float:
    """M(t) = integral over [0, t] of n(x) v(n(x)) dx; M(0) = 0.

    v may be omitted for a matched schedule (its own power-law map is used).
    Closed forms exist for matched schedules with the built-in v and for
    constant schedules; method='quadrature' forces the adaptive trapezoid
    route, method='closed' errors when no closed form applies.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError("unknown method %r" % (method,))
    intrinsic = v is None
    if intrinsic:
        vv = schedule_v(spec)  # raises for non-matched kinds
    else:
        vv = v
    closed = None
    if spec.kind == "curvature_matched" and intrinsic:
        closed = (2.0 * spec.h / (2.0 - spec.h)) * (
            math.log(t + spec.delta) - math.log(spec.delta)
        )
    elif spec.kind == "constant":
        closed = t * spec.eta0 * float(vv(spec.eta0))
    if method == "closed":
        if closed is None:
            raise ValueError("no closed form for this schedule and v")
        return closed
    if method == "auto" and closed is not None:
        return closed

    def integrand(x):
        n_val = _eta_integrand(spec, x)
        return n_val * np.asarray(vv(n_val), dtype=float)

    return _log_trapezoid(integrand, t)


def C_of_t(spec: ScheduleSpec, t: float, v=None, abs_tol: float = 1e-8,
           max_level: int = 21) -> float:
    """C(t) = exp(-M(t)) * integral over [0, t] of exp(M(x)) n(x)^2 dx.

    Always computed by quadrature (a cumulative trapezoid on a log-spaced
    grid, refined until successive values agree to abs_tol), so it provides
    an independent check of the closed-form envelope.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return 0.0
    vv = schedule_v(spec) if v is None else v
    smax = math.log1p(t)
    prev = None
    for level in range(6, max_level + 1):
        m = 2 ** level
        s = np.linspace(0.0, smax, m + 1)
        x = np.expm1(s)
        weight = np.exp(s)
        n_vals = _eta_integrand(spec, x)
        g = n_vals * np.asarray(vv(n_vals), dtype=float) * weight
        ds = smax / m
        cum = np.empty(m + 1)
        cum[0] = 0.0
        np.cumsum(0.5 * (g[1:] + g[:-1]) * ds, out=cum[1:])
        integrand = np.exp(cum - cum[-1]) * n_vals * n_vals * weight
        val = float((0.5 * (integrand[0] + integrand[-1]) + integrand[1:-1].sum()) * ds)
        if prev is not None and abs(val - prev) <= abs_tol:
            return val
        prev = val
    raise QuadratureError("cumulative trapezoid did not converge "
                          "(max level %d)" % max_level)


def c_bar(spec: ScheduleSpec, t: float) -> float:
    """Closed-form envelope C_bar(t) = c (t + delta)^{-h/(2-h)}."""
    spec._require("curvature_matched")
    if t < 0:
        raise ValueError("t must be nonnegative")
    p = spec.h / (2.0 - spec.h)
    return spec.envelope_constant * (t + spec.delta) ** (-p)


def exp_neg_M(spec: ScheduleSpec, t: float, v=None) -> float:
    """exp(-M(t)); closed form ((t + delta)/delta)^{-2h/(2-h)} for matched
    schedules with their built-in v."""
    if spec.kind == "curvature_matched" and v is None:
        p = 2.0 * spec.h / (2.0 - spec.h)
        return ((t + spec.delta) / spec.delta) ** (-p)
    return math.exp(-M_of_t(spec, t, v=v))


def sqrt_neg_c_bar_prime(spec: ScheduleSpec, t: float) -> float:
    """sqrt(-C_bar'(t)) from the analytic derivative of the envelope."""
    spec._require("curvature_matched")
    p = spec.h / (2.0 - spec.h)
    c = spec.envelope_constant
    return math.sqrt(c * p) * (t + spec.delta) ** (-1.0 / (2.0 - spec.h))


def ode_residual(spec: ScheduleSpec, t: float, eta_match_tol: float = 1e-10) -> float:
    """Residual C_bar(t) - 2 sqrt(-C_bar') / v(sqrt(-C_bar')) at time t.

    Also asserts that sqrt(-C_bar'(t)) reproduces the schedule's own step
    size to relative tolerance eta_match_tol; a mismatch means the envelope
    constant is inconsistent with the schedule and raises.
    """
    spec._require("curvature_matched")
    if t < 0:
        raise ValueError("t must be nonnegative")
    n_hat = sqrt_neg_c_bar_prime(spec, t)
    step = eta(spec, t)
    if abs(n_hat - step) > eta_match_tol * step:
        raise ArithmeticError(
            "sqrt(-C_bar') = %.17g disagrees with eta_t = %.17g" % (n_hat, step)
        )
    v_val = spec.beta * spec.h * n_hat ** (1.0 - spec.h)
    return c_bar(spec, t) - 2.0 * n_hat / v_val


def rate_bound(spec: ScheduleSpec, A: float, B: float, t: float) -> float:
    """Envelope bound A * C_bar(t) + B * exp(-M(t)) for a matched schedule."""
    if A < 0 or B < 0:
        raise ValueError("A and B must be nonnegative")
    return A * c_bar(spec, t) + B * exp_neg_M(spec, t)


def rate_bound_constants(spec: ScheduleSpec, noise_constant: float,
                         y0: float) -> tuple:
    """Constants (A, B) of the envelope bound for a run started at squared
    distance y0 on an objective with the given noise constant:
    A = (2N+1) exp(n(0)) and B = (2N+1) exp(M(1)) n(0)^2 + y0."""
    spec._require("curvature_matched")
    n0 = eta(spec, 0.0)
    two_n1 = 2.0 * noise_constant + 1.0
    a = two_n1 * math.exp(n0)
    b = two_n1 * math.exp(M_of_t(spec, 1.0)) * n0 * n0 + y0
    return a, b


class RateEnvelope:
    """Bundle of the rate maps M, C, C_bar and exp(-M) for one schedule.

    For non-matched schedules a contraction map v must be supplied and the
    closed-form members raise.
    """

    def __init__(self, spec: ScheduleSpec, v=None):
        self.spec = spec
        self.v = v

    def M(self, t: float, method: str = "auto") -> float:
        return M_of_t(self.spec, t, v=self.v, method=method)

    def C(self, t: float) -> float:
        return C_of_t(self.spec, t, v=self.v)

    def C_bar(self, t: float) -> float:
        return c_bar(self.spec, t)

    def exp_neg_M(self, t: float) -> float:
        return exp_neg_M(self.spec, t, v=self.v)


# ---------------------------------------------------------------------------
# text form

_MATCHED_TAG = "paper-opt"


def format_schedule(spec: ScheduleSpec) -> str:
    """Canonical text form; floats use repr so parsing is bit-exact."""
    if spec.kind == "constant":
        return "const:%r" % (spec.eta0,)
    if spec.kind == "power_law":
        return "power:scale=%r,h=%r" % (spec.scale, spec.h)
    r_text = "inf" if math.isinf(spec.r) else repr(spec.r)
    return "%s:h=%r,beta=%r,L=%r,r=%s" % (_MATCHED_TAG, spec.h, spec.beta,
                                          spec.L, r_text)


def parse_schedule(text: str) -> ScheduleSpec:
    """Parse the compact text form:

    const:0.01
    power:scale=0.1,h=0.25
    paper-opt:h=0.5,beta=1.0,L=2.0,r=inf
    """
    text = text.strip()
    if ":" not in text:
        raise ValueError("schedule %r: expected kind:params" % (text,))
    kind, _, body = text.partition(":")
    kind = kind.strip()
    if kind == "const":
        return ScheduleSpec.constant(_parse_float(body, "const step"))
    if kind == "power":
        params = _parse_kv(body, ("scale", "h"))
        return ScheduleSpec.power_law(params["scale"], params["h"])
    if kind == _MATCHED_TAG:
        params = _parse_kv(body, ("h", "beta", "L", "r"), optional=("r",))
        return ScheduleSpec.curvature_matched(
            params["h"], params["beta"], params["L"],
            params.get("r", math.inf))
    raise ValueError("schedule %r: unknown kind %r" % (text, kind))


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ValueError("could not parse %s from %r" % (what, text)) from None


def _parse_kv(body: str, keys, optional=()) -> dict:
    out = {}
    for part in body.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError("expected key=value, got %r" % (part,))
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in keys:
            raise ValueError("unknown schedule parameter %r" % (key,))
        if key in out:
            raise ValueError("duplicate schedule parameter %r" % (key,))
        out[key] = _parse_float(val, key)
    for key in keys:
        if key not in out and key not in optional:
            raise ValueError("missing schedule parameter %r" % (key,))
    return out
