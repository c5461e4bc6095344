"""Finite-sum objectives for SGD experiments.

Datasets, per-component losses (logistic, least squares, linear, quadratic),
regularizers including the exp-cosh penalty G, analytic smoothness and
strong-convexity constants, and a deterministic full-gradient reference
solver.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

REGULARIZERS = ("none", "norm2", "norm2_squared", "exp_cosh_G")

# np.exp overflows past ~709; stay clear of it so the overflow policy is ours.
EXP_SAFE_LIMIT = 700.0


class ConvergenceError(RuntimeError):
    """The reference solver did not reach its gradient tolerance."""


@dataclass(frozen=True)
class LabeledExample:
    """A single (features, label) pair."""

    features: np.ndarray
    label: float


class Dataset:
    """A fixed design matrix with one label per row.

    Labels are +-1 for classification and arbitrary reals for regression.
    ``planted_weights`` is set by synthetic generators that know the true
    coefficient vector (None otherwise).
    """

    def __init__(self, X, y, planted_weights=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if X.shape[0] < 1:
            raise ValueError("empty dataset")
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one entry per row of X")
        self.X = X
        self.y = y
        self.planted_weights = planted_weights

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def example(self, i: int) -> LabeledExample:
        return LabeledExample(self.X[i], float(self.y[i]))

    @property
    def examples(self):
        return [self.example(i) for i in range(self.size)]


def _check_dims(x, w):
    if x.shape != np.shape(w):
        raise ValueError(
            "dimension mismatch: features have shape %s, weights %s"
            % (x.shape, np.shape(w))
        )


def logistic_component_value(example: LabeledExample, w) -> float:
    """log(1 + exp(-y * <x, w>)), computed overflow-safely."""
    w = np.asarray(w, dtype=float)
    _check_dims(example.features, w)
    z = example.label * float(example.features @ w)
    return float(np.logaddexp(0.0, -z))


def logistic_component_gradient(example: LabeledExample, w) -> np.ndarray:
    """Gradient of the logistic component: -y * sigmoid(-y <x, w>) * x."""
    w = np.asarray(w, dtype=float)
    _check_dims(example.features, w)
    z = example.label * float(example.features @ w)
    # sigmoid(-z) without overflow in either tail
    s = 0.5 * (1.0 + math.tanh(-0.5 * z))
    return -example.label * s * example.features


def least_squares_component(example: LabeledExample, w):
    """Value and gradient of (a'w - b)^2."""
    w = np.asarray(w, dtype=float)
    _check_dims(example.features, w)
    r = float(example.features @ w) - example.label
    return r * r, 2.0 * r * example.features


def _check_exp_range(w: np.ndarray):
    if w.size and np.abs(w).max() > EXP_SAFE_LIMIT:
        raise OverflowError(
            "exp-cosh regularizer: |w_i| exceeds the safe exponent range (700)"
        )


def _g_terms(w: np.ndarray) -> np.ndarray:
    _check_exp_range(w)
    # expm1(w) + expm1(-w) equals e^w + e^-w - 2 with full precision near 0
    return np.expm1(w) + np.expm1(-w) - w * w


def regularizer_G_value(w):
    """G(w) = sum_i (e^{w_i} + e^{-w_i} - 2 - w_i^2); nonnegative.

    A 2-d input is treated as a batch of weight vectors (one per row) and
    yields one value per row.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim == 2:
        return np.sum(_g_terms(w), axis=1)
    return float(np.sum(_g_terms(w)))


def regularizer_G_gradient(w) -> np.ndarray:
    """Component i of grad G is e^{w_i} - e^{-w_i} - 2 w_i."""
    w = np.asarray(w, dtype=float)
    _check_exp_range(w)
    return np.expm1(w) - np.expm1(-w) - 2.0 * w


@dataclass(frozen=True)
class ReferenceSolution:
    """Minimizer data produced by solve_reference.

    noise_constant is the mean over components of the squared gradient norm
    at w_star.
    """

    w_star: np.ndarray
    f_min: float
    noise_constant: float
    gradient_norm_at_solution: float
    iterations: int = 0


class Objective:
    """Finite-sum objective F(w) = (1/n) sum_i f_i(w).

    Each component is base_i(w) + lam * reg(w): the regularizer is applied
    per component, so a stochastic gradient always carries the regularizer
    gradient. Subclasses supply the base terms. Instances are immutable
    after construction and safe to share across threads.
    """

    def __init__(self, n: int, d: int, regularizer: str = "none", lam: float = 0.0):
        if regularizer not in REGULARIZERS:
            raise ValueError("unknown regularizer %r" % (regularizer,))
        if lam < 0:
            raise ValueError("regularization weight must be nonnegative")
        self.component_count = int(n)
        self.dimension = int(d)
        self.regularizer = regularizer
        self.regularization_weight = float(lam)

    # ----- subclass hooks -------------------------------------------------
    def _base_component_value(self, i: int, w: np.ndarray) -> float:
        raise NotImplementedError

    def _base_component_gradient(self, i: int, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _base_value(self, w: np.ndarray) -> float:
        n = self.component_count
        return sum(self._base_component_value(i, w) for i in range(n)) / n

    def _base_gradient(self, w: np.ndarray) -> np.ndarray:
        n = self.component_count
        g = np.zeros(self.dimension)
        for i in range(n):
            g += self._base_component_gradient(i, w)
        return g / n

    def _base_value_rows(self, W: np.ndarray) -> np.ndarray:
        return np.array([self._base_value(W[k]) for k in range(W.shape[0])])

    def _base_component_value_rows(self, i: int, W: np.ndarray) -> np.ndarray:
        return np.array(
            [self._base_component_value(i, W[k]) for k in range(W.shape[0])]
        )

    def _base_component_gradient_rows(self, i: int, W: np.ndarray) -> np.ndarray:
        return np.stack(
            [self._base_component_gradient(i, W[k]) for k in range(W.shape[0])]
        )

    def _base_smoothness(self, region_radius: float) -> float:
        raise NotImplementedError

    def _base_known_mu(self):
        return None

    # ----- regularizer terms ----------------------------------------------
    def _reg_value(self, w: np.ndarray) -> float:
        kind = self.regularizer
        if kind == "none":
            return 0.0
        if kind == "norm2":
            return float(np.linalg.norm(w))
        if kind == "norm2_squared":
            return 0.5 * float(w @ w)
        return regularizer_G_value(w)

    def _reg_gradient(self, w: np.ndarray) -> np.ndarray:
        kind = self.regularizer
        if kind == "none":
            return np.zeros_like(w)
        if kind == "norm2":
            nrm = float(np.linalg.norm(w))
            if nrm == 0.0:
                return np.zeros_like(w)  # 0 is a valid subgradient at the kink
            return w / nrm
        if kind == "norm2_squared":
            return w.copy()
        return regularizer_G_gradient(w)

    def _reg_value_rows(self, W: np.ndarray) -> np.ndarray:
        kind = self.regularizer
        if kind == "none":
            return np.zeros(W.shape[0])
        if kind == "norm2":
            return np.linalg.norm(W, axis=1)
        if kind == "norm2_squared":
            return 0.5 * np.einsum("ij,ij->i", W, W)
        return np.array([np.sum(_g_terms(W[k])) for k in range(W.shape[0])])

    def _reg_hessian_bound(self, region_radius: float) -> float:
        kind = self.regularizer
        lam = self.regularization_weight
        if kind == "none" or lam == 0.0:
            return 0.0
        if kind == "norm2":
            return math.inf  # curvature of ||w|| is unbounded at the origin
        if kind == "norm2_squared":
            return lam
        return lam * (math.exp(region_radius) + math.exp(-region_radius) - 2.0)

    # ----- public surface ---------------------------------------------------
    def component_value(self, i: int, w) -> float:
        w = np.asarray(w, dtype=float)
        v = self._base_component_value(i, w)
        if self.regularization_weight:
            v += self.regularization_weight * self._reg_value(w)
        return v

    def component_gradient(self, i: int, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        g = self._base_component_gradient(i, w)
        if self.regularization_weight:
            g = g + self.regularization_weight * self._reg_gradient(w)
        return g

    def value(self, w) -> float:
        w = np.asarray(w, dtype=float)
        v = self._base_value(w)
        if self.regularization_weight:
            v += self.regularization_weight * self._reg_value(w)
        return v

    def gradient(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        g = self._base_gradient(w)
        if self.regularization_weight:
            g = g + self.regularization_weight * self._reg_gradient(w)
        return g

    def value_many(self, W, chunk: int = 4096) -> np.ndarray:
        """F evaluated on each row of W, in chunks to bound memory."""
        W = np.asarray(W, dtype=float)
        out = np.empty(W.shape[0])
        for lo in range(0, W.shape[0], chunk):
            block = W[lo : lo + chunk]
            vals = self._base_value_rows(block)
            if self.regularization_weight:
                vals = vals + self.regularization_weight * self._reg_value_rows(block)
            out[lo : lo + block.shape[0]] = vals
        return out

    def component_value_many(self, i: int, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        vals = self._base_component_value_rows(i, W)
        if self.regularization_weight:
            vals = vals + self.regularization_weight * self._reg_value_rows(W)
        return vals

    def component_gradient_many(self, i: int, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        grads = self._base_component_gradient_rows(i, W)
        if self.regularization_weight:
            lam = self.regularization_weight
            kind = self.regularizer
            if kind == "norm2_squared":
                grads = grads + lam * W
            elif kind == "exp_cosh_G":
                grads = grads + lam * (np.expm1(W) - np.expm1(-W) - 2.0 * W)
            elif kind == "norm2":
                nrm = np.linalg.norm(W, axis=1, keepdims=True)
                safe = np.where(nrm == 0.0, 1.0, nrm)
                grads = grads + lam * np.where(nrm == 0.0, 0.0, W / safe)
        return grads

    @property
    def known_mu(self):
        """Analytic strong-convexity constant when one is available."""
        mu = self._base_known_mu() or 0.0
        if self.regularizer == "norm2_squared":
            mu += self.regularization_weight
        return mu if mu > 0 else None

    def smoothness_bound(self, region_radius: float = 3.0) -> float:
        """Upper bound on the per-component Hessian spectral norm.

        Valid on the box {w : ||w||_inf <= region_radius}. The exp-cosh
        regularizer is smooth only on bounded regions, hence the radius.
        """
        if region_radius <= 0:
            raise ValueError("region_radius must be positive")
        return self._base_smoothness(region_radius) + self._reg_hessian_bound(
            region_radius
        )


class LogisticObjective(Objective):
    """Binary logistic regression: f_i(w) = log(1 + exp(-y_i x_i' w))."""

    def __init__(self, dataset: Dataset, regularizer: str = "none", lam: float = 0.0):
        if not np.all(np.isin(dataset.y, (-1.0, 1.0))):
            raise ValueError("logistic labels must be exactly +-1")
        super().__init__(dataset.size, dataset.dimension, regularizer, lam)
        self.X = dataset.X
        self.y = dataset.y
        self._max_row_sq = float(np.max(np.einsum("ij,ij->i", self.X, self.X)))

    def _base_component_value(self, i, w):
        z = self.y[i] * float(self.X[i] @ w)
        return float(np.logaddexp(0.0, -z))

    def _base_component_gradient(self, i, w):
        z = self.y[i] * float(self.X[i] @ w)
        s = 0.5 * (1.0 + math.tanh(-0.5 * z))
        return (-self.y[i] * s) * self.X[i]

    def _base_value(self, w):
        z = self.y * (self.X @ w)
        return float(np.mean(np.logaddexp(0.0, -z)))

    def _base_gradient(self, w):
        z = self.y * (self.X @ w)
        s = 0.5 * (1.0 + np.tanh(-0.5 * z))
        return -((self.y * s) @ self.X) / self.component_count

    def _base_value_rows(self, W):
        z = (W @ self.X.T) * self.y
        return np.mean(np.logaddexp(0.0, -z), axis=1)

    def _base_component_value_rows(self, i, W):
        z = self.y[i] * (W @ self.X[i])
        return np.logaddexp(0.0, -z)

    def _base_component_gradient_rows(self, i, W):
        z = self.y[i] * (W @ self.X[i])
        s = 0.5 * (1.0 + np.tanh(-0.5 * z))
        return (-self.y[i] * s)[:, None] * self.X[i]

    def _base_smoothness(self, region_radius):
        # sigmoid' <= 1/4, so the component Hessian is bounded by ||x_i||^2/4
        return self._max_row_sq / 4.0


class LeastSquaresObjective(Objective):
    """Squared-error components f_i(w) = (a_i' w - b_i)^2."""

    def __init__(self, dataset: Dataset, regularizer: str = "none", lam: float = 0.0):
        super().__init__(dataset.size, dataset.dimension, regularizer, lam)
        self.X = dataset.X
        self.y = dataset.y
        self._max_row_sq = float(np.max(np.einsum("ij,ij->i", self.X, self.X)))

    def _base_component_value(self, i, w):
        r = float(self.X[i] @ w) - self.y[i]
        return r * r

    def _base_component_gradient(self, i, w):
        r = float(self.X[i] @ w) - self.y[i]
        return (2.0 * r) * self.X[i]

    def _base_value(self, w):
        r = self.X @ w - self.y
        return float(r @ r) / self.component_count

    def _base_gradient(self, w):
        r = self.X @ w - self.y
        return (2.0 / self.component_count) * (r @ self.X)

    def _base_value_rows(self, W):
        R = W @ self.X.T - self.y
        return np.einsum("ij,ij->i", R, R) / self.component_count

    def _base_component_value_rows(self, i, W):
        r = W @ self.X[i] - self.y[i]
        return r * r

    def _base_component_gradient_rows(self, i, W):
        r = W @ self.X[i] - self.y[i]
        return (2.0 * r)[:, None] * self.X[i]

    def _base_smoothness(self, region_radius):
        return 2.0 * self._max_row_sq


class LinearObjective(Objective):
    """Linear components f_i(w) = c_i' w, usually paired with a regularizer.

    With rows of C summing to zero, F(w) is exactly lam * reg(w) and the
    origin is the exact minimizer for the exp-cosh regularizer.
    """

    def __init__(self, C, regularizer: str = "none", lam: float = 0.0):
        C = np.asarray(C, dtype=float)
        if C.ndim != 2:
            raise ValueError("C must be a 2-d array of component gradients")
        super().__init__(C.shape[0], C.shape[1], regularizer, lam)
        self.C = C
        self._mean_c = C.mean(axis=0)

    def _base_component_value(self, i, w):
        return float(self.C[i] @ w)

    def _base_component_gradient(self, i, w):
        return self.C[i].copy()

    def _base_value(self, w):
        return float(self._mean_c @ w)

    def _base_gradient(self, w):
        return self._mean_c.copy()

    def _base_value_rows(self, W):
        return W @ self._mean_c

    def _base_component_value_rows(self, i, W):
        return W @ self.C[i]

    def _base_component_gradient_rows(self, i, W):
        return np.broadcast_to(self.C[i], W.shape).copy()

    def _base_smoothness(self, region_radius):
        return 0.0


class QuadraticMeanObjective(Objective):
    """Components f_i(w) = (mu/2) ||w - m_i||^2 around fixed centers.

    F is mu-strongly convex with minimizer at the mean center; when the
    centers sum to zero exactly, the origin is the exact minimizer.
    """

    def __init__(self, mu: float, centers, regularizer: str = "none", lam: float = 0.0):
        centers = np.asarray(centers, dtype=float)
        if centers.ndim != 2:
            raise ValueError("centers must be a 2-d array")
        if mu <= 0:
            raise ValueError("mu must be positive")
        super().__init__(centers.shape[0], centers.shape[1], regularizer, lam)
        self.mu = float(mu)
        self.centers = centers
        self._mean_center = centers.mean(axis=0)

    def _base_component_value(self, i, w):
        diff = w - self.centers[i]
        return 0.5 * self.mu * float(diff @ diff)

    def _base_component_gradient(self, i, w):
        return self.mu * (w - self.centers[i])

    def _base_value(self, w):
        diffs = w - self.centers
        return 0.5 * self.mu * float(np.einsum("ij,ij->i", diffs, diffs).mean())

    def _base_gradient(self, w):
        return self.mu * (w - self._mean_center)

    def _base_value_rows(self, W):
        sq = np.einsum("ij,ij->i", W, W)
        csq = np.einsum("ij,ij->i", self.centers, self.centers)
        return 0.5 * self.mu * (sq - 2.0 * (W @ self._mean_center) + np.mean(csq))

    def _base_component_gradient_rows(self, i, W):
        return self.mu * (W - self.centers[i])

    def _base_component_value_rows(self, i, W):
        diffs = W - self.centers[i]
        return 0.5 * self.mu * np.einsum("ij,ij->i", diffs, diffs)

    def _base_smoothness(self, region_radius):
        return self.mu

    def _base_known_mu(self):
        return self.mu


class CallableObjective(Objective):
    """Components given directly as (value, gradient) callables.

    Handy for one-off test objectives such as F(w) = w^4 in one dimension.
    """

    def __init__(self, value_fns, grad_fns, dimension: int,
                 regularizer: str = "none", lam: float = 0.0,
                 hessian_bound=None):
        if len(value_fns) != len(grad_fns) or not value_fns:
            raise ValueError("need matching, nonempty value and gradient lists")
        super().__init__(len(value_fns), dimension, regularizer, lam)
        self._values = list(value_fns)
        self._grads = list(grad_fns)
        self._hessian_bound = hessian_bound

    def _base_component_value(self, i, w):
        return float(self._values[i](w))

    def _base_component_gradient(self, i, w):
        return np.asarray(self._grads[i](w), dtype=float)

    def _base_smoothness(self, region_radius):
        if self._hessian_bound is None:
            raise ValueError("no smoothness bound was provided for this objective")
        if callable(self._hessian_bound):
            return float(self._hessian_bound(region_radius))
        return float(self._hessian_bound)


def composite_objective(base: Objective, regularizer: str, lam: float) -> Objective:
    """A copy of ``base`` with the given per-component regularizer attached.

    The underlying data arrays are shared; objectives are immutable so this
    is safe.
    """
    if regularizer not in REGULARIZERS:
        raise ValueError("unknown regularizer %r" % (regularizer,))
    if lam < 0:
        raise ValueError("regularization weight must be nonnegative")
    clone = copy.copy(base)
    clone.regularizer = regularizer
    clone.regularization_weight = float(lam)
    return clone


def smoothness_bound(objective: Objective, region_radius: float = 3.0) -> float:
    return objective.smoothness_bound(region_radius)


def solve_reference(objective: Objective, tolerance: float = 1e-10,
                    max_iterations: int = 10 ** 6, w0=None) -> ReferenceSolution:
    """Minimize F by full-gradient descent with Armijo backtracking.

    Deterministic: repeated calls with the same inputs produce bit-identical
    output. The noise constant is the mean of ||grad f_i(w_star)||^2 over
    components.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    d = objective.dimension
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).copy()
    fw = objective.value(w)
    step = 1.0
    armijo = 1e-4
    iterations = 0
    grad_norm = math.inf
    for iterations in range(max_iterations + 1):
        g = objective.gradient(w)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= tolerance:
            break
        gg = grad_norm * grad_norm
        step = min(step * 2.0, 1e12)
        accepted = False
        floor = 16.0 * np.finfo(float).eps * max(abs(fw), 1.0)
        for _ in range(200):
            cand = w - step * g
            try:
                fc = objective.value(cand)
            except OverflowError:
                fc = math.inf
            if armijo * step * gg >= floor:
                ok = math.isfinite(fc) and fc <= fw - armijo * step * gg
            else:
                # the sufficient-decrease term is below the rounding noise
                # of F, so value comparisons can no longer certify progress
                # (and can trap the iterate on a lucky-low FP plateau);
                # certify by the gradient norm instead
                try:
                    cand_norm = float(np.linalg.norm(objective.gradient(cand)))
                except OverflowError:
                    cand_norm = math.inf
                ok = math.isfinite(fc) and cand_norm < grad_norm
            if ok:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise ConvergenceError(
                "line search failed at iteration %d (gradient norm %.3e)"
                % (iterations, grad_norm)
            )
        w = cand
        fw = fc
    else:
        raise ConvergenceError(
            "no convergence within %d iterations (gradient norm %.3e); the "
            "minimizer may be unattained or non-unique, e.g. unregularized "
            "separable logistic" % (max_iterations, grad_norm)
        )
    n = objective.component_count
    noise = 0.0
    for i in range(n):
        gi = objective.component_gradient(i, w)
        noise += float(gi @ gi)
    noise /= n
    return ReferenceSolution(
        w_star=w,
        f_min=fw,
        noise_constant=noise,
        gradient_norm_at_solution=grad_norm,
        iterations=iterations,
    )
