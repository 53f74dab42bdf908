"""Model-based derivative-free minimization over a box.

Fits linear or diagonal-quadratic interpolation surrogates to sampled
objective values, minimizes them inside an infinity-norm trust region
intersected with the variable box, and iterates under a hard cap on the
number of objective evaluations. The infinity norm is chosen so the
trust-region/box intersection stays a box and the linear subproblem is
solvable in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BoxTooThinError, SingularSystemError
from .oracle import QueryCounter

# Two proposed points closer than this (sup norm) are treated as duplicates
# and not re-evaluated.
DUPLICATE_TOL = 1e-12

_INTERP_RTOL = 1e-9


@dataclass
class BoxBounds:
    """Per-variable interval constraints; degenerate coordinates are frozen."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.float64).ravel()
        self.upper = np.asarray(self.upper, dtype=np.float64).ravel()
        if self.lower.size != self.upper.size:
            raise ValueError("lower/upper length mismatch")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, point: np.ndarray) -> np.ndarray:
        return np.clip(point, self.lower, self.upper)

    def contains(self, point: np.ndarray) -> bool:
        return bool(np.all(point >= self.lower) and np.all(point <= self.upper))


@dataclass
class TrustRegion:
    """Infinity-norm step radius with a halving shrink schedule."""

    radius: float
    shrink_factor: float = 0.5
    min_radius: float | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("trust radius must be positive")
        if not 0 < self.shrink_factor < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.min_radius is None:
            self.min_radius = 1e-4 * self.radius

    def shrink(self) -> None:
        self.radius *= self.shrink_factor


@dataclass
class SurrogateModel:
    """Local model a + g.p + 0.5 p'diag(m_diag)p around ``center``."""

    a: float
    g: np.ndarray
    m_diag: np.ndarray
    center: np.ndarray

    def value(self, p: np.ndarray) -> float:
        """Model value at center + p."""
        p = np.asarray(p, dtype=np.float64)
        return float(self.a + self.g @ p + 0.5 * (self.m_diag @ (p * p)))

    def value_at(self, point: np.ndarray) -> float:
        return self.value(np.asarray(point, dtype=np.float64) - self.center)


@dataclass
class SampleSet:
    """Interpolation points with their objective values."""

    points: np.ndarray  # (q, b)
    values: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("points must be a (q, b) array")
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=np.float64).ravel()
            if self.values.size != self.points.shape[0]:
                raise ValueError("one value per point required")

    @property
    def q(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def best_index(self) -> int:
        return int(np.argmin(self.values))

    def worst_index(self) -> int:
        return int(np.argmax(self.values))

    def replace(self, index: int, point: np.ndarray, value: float) -> None:
        self.points[index] = point
        self.values[index] = value


def build_initial_samples(
    center: np.ndarray, box: BoxBounds, q: int, delta: float
) -> SampleSet:
    """Place the initial interpolation set: center plus coordinate steps.

    q = b+1 puts one step of size ``delta`` along each coordinate, flipped to
    the negative side when the positive step leaves the box (and clipped to
    the roomier side when neither fits). q = 2b+1 puts both signed steps,
    clipped into the box; a side with no room folds onto the other side at
    half distance so the points stay distinct.
    """
    center = np.asarray(center, dtype=np.float64).ravel()
    b = center.size
    if q not in (b + 1, 2 * b + 1):
        raise ValueError(f"q must be {b + 1} or {2 * b + 1}, got {q}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if box.dim != b:
        raise ValueError("box dimension mismatch")
    if not box.contains(center):
        raise ValueError("center must lie inside the box")
    if np.all(box.width == 0):
        raise BoxTooThinError("every coordinate of the box is degenerate")

    points = [center]
    for i in range(b):
        up = box.upper[i] - center[i]
        down = center[i] - box.lower[i]
        e_i = np.zeros(b)
        e_i[i] = 1.0
        if q == b + 1:
            if delta <= up:
                step = delta
            elif delta <= down:
                step = -delta
            else:
                step = up if up >= down else -down
            points.append(center + step * e_i)
        else:
            plus = min(delta, up)
            minus = min(delta, down)
            if plus <= 0 and minus > 0:
                points.append(center - minus * e_i)
                points.append(center - 0.5 * minus * e_i)
            elif minus <= 0 and plus > 0:
                points.append(center + plus * e_i)
                points.append(center + 0.5 * plus * e_i)
            else:
                points.append(center + plus * e_i)
                points.append(center - minus * e_i)
    return SampleSet(np.array(points))


def _interp_matrix(samples: SampleSet, center: np.ndarray, quadratic: bool) -> np.ndarray:
    p = samples.points - center
    cols = [np.ones((samples.q, 1)), p]
    if quadratic:
        cols.append(0.5 * p * p)
    return np.hstack(cols)


def _check_residual(a_mat: np.ndarray, coef: np.ndarray, values: np.ndarray) -> None:
    resid = np.abs(a_mat @ coef - values)
    scale = 1.0 + np.abs(values)
    if np.any(resid > _INTERP_RTOL * scale):
        raise SingularSystemError(
            "interpolation conditions not met (ill-conditioned sample set)"
        )


def _model_center(samples: SampleSet, center: np.ndarray | None) -> np.ndarray:
    if samples.values is None:
        raise ValueError("sample values required to fit a model")
    if center is None:
        return samples.points[samples.best_index()].copy()
    return np.asarray(center, dtype=np.float64).ravel()


def fit_linear_model(samples: SampleSet, center: np.ndarray | None = None) -> SurrogateModel:
    """Interpolate q = b+1 values with an affine model; exact at every sample.

    The model is centred on the best sample unless ``center`` is given.
    """
    b = samples.dim
    if samples.q != b + 1:
        raise ValueError(f"linear fit needs q = {b + 1} samples, got {samples.q}")
    center = _model_center(samples, center)
    a_mat = _interp_matrix(samples, center, quadratic=False)
    try:
        coef = np.linalg.solve(a_mat, samples.values)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"affinely dependent sample points: {exc}") from exc
    _check_residual(a_mat, coef, samples.values)
    return SurrogateModel(float(coef[0]), coef[1 : b + 1], np.zeros(b), center)


def fit_diag_quadratic_model(
    samples: SampleSet, center: np.ndarray | None = None
) -> SurrogateModel:
    """Interpolate q = 2b+1 values with a diagonal-curvature quadratic."""
    b = samples.dim
    if samples.q != 2 * b + 1:
        raise ValueError(f"diagonal fit needs q = {2 * b + 1} samples, got {samples.q}")
    center = _model_center(samples, center)
    a_mat = _interp_matrix(samples, center, quadratic=True)
    try:
        coef = np.linalg.solve(a_mat, samples.values)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular interpolation system: {exc}") from exc
    _check_residual(a_mat, coef, samples.values)
    return SurrogateModel(float(coef[0]), coef[1 : b + 1], coef[b + 1 :], center)


def min_frobenius_update(
    prev: SurrogateModel, samples: SampleSet, center: np.ndarray | None = None
) -> SurrogateModel:
    """Refit after a sample swap, moving the diagonal curvature as little as possible.

    Among diagonal-quadratic models satisfying the interpolation conditions,
    returns the one minimizing ||m_diag - prev.m_diag||^2. Solved through the
    KKT system of the equality-constrained least-change problem.
    """
    b = samples.dim
    if not b + 1 < samples.q <= 2 * b + 1:
        raise ValueError(
            f"least-change fit needs {b + 2} <= q <= {2 * b + 1}, got {samples.q}"
        )
    if prev.m_diag.size != b:
        raise ValueError("previous model dimension mismatch")
    center = _model_center(samples, center)
    a_mat = _interp_matrix(samples, center, quadratic=True)
    q, n_par = a_mat.shape

    # Unknown z = (a, g, m_diag); weight acts on the m_diag block only.
    w_diag = np.concatenate([np.zeros(b + 1), np.ones(b)])
    kkt = np.zeros((n_par + q, n_par + q))
    kkt[:n_par, :n_par] = np.diag(w_diag)
    kkt[:n_par, n_par:] = a_mat.T
    kkt[n_par:, :n_par] = a_mat
    rhs = np.concatenate([np.zeros(b + 1), prev.m_diag, samples.values])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    coef = sol[:n_par]
    _check_residual(a_mat, coef, samples.values)
    return SurrogateModel(float(coef[0]), coef[1 : b + 1], coef[b + 1 :], center)


def _quad_1d_min(g: float, m: float, lo: float, hi: float) -> float:
    # Minimize g*p + 0.5*m*p^2 over [lo, hi]; ties prefer lo, then hi.
    if g == 0.0 and m == 0.0:
        return 0.0
    if m == 0.0:
        return lo if g > 0 else hi
    best_p, best_v = lo, g * lo + 0.5 * m * lo * lo
    v_hi = g * hi + 0.5 * m * hi * hi
    if v_hi < best_v:
        best_p, best_v = hi, v_hi
    if m > 0.0:
        vertex = -g / m
        if lo < vertex < hi:
            v = g * vertex + 0.5 * m * vertex * vertex
            if v < best_v:
                best_p = vertex
    return best_p


def solve_subproblem(model: SurrogateModel, tr: TrustRegion, box: BoxBounds) -> np.ndarray:
    """Minimize the surrogate over the box intersected with the trust region.

    Both constraints are boxes in the infinity norm, so the problem separates
    per coordinate: linear models take the signed bound step, diagonal
    quadratics the interval minimum (endpoint or interior vertex).
    """
    lo = np.maximum(-tr.radius, box.lower - model.center)
    hi = np.minimum(tr.radius, box.upper - model.center)
    # center inside box => each interval contains 0; guard float drift
    lo = np.minimum(lo, 0.0)
    hi = np.maximum(hi, 0.0)
    if np.all(model.m_diag == 0.0):
        return np.where(model.g > 0, lo, np.where(model.g < 0, hi, 0.0))
    p = np.zeros(box.dim)
    for i in range(box.dim):
        p[i] = _quad_1d_min(model.g[i], model.m_diag[i], lo[i], hi[i])
    return p


@dataclass
class MinimizeResult:
    """Outcome of one capped batch minimization."""

    best_point: np.ndarray
    best_value: float
    evaluations: int
    truncated: bool = False  # global budget died mid-run
    stopped_early: bool = False  # the per-evaluation callback asked to stop


class _StopBatch(Exception):
    pass


def minimize_batch(
    objective: Callable[[np.ndarray], float],
    center: np.ndarray,
    box: BoxBounds,
    q: int,
    kappa: int,
    counter: QueryCounter | None = None,
    trust: TrustRegion | None = None,
    on_eval: Callable[[np.ndarray, float], bool] | None = None,
) -> MinimizeResult:
    """Run the sample/fit/step loop with at most ``kappa`` evaluations.

    Frozen (zero-width) coordinates are held at the center and excluded from
    the model. Every evaluated point is clipped into the box first. Returns
    the best evaluated point, never a model prediction. Stops at ``kappa``
    evaluations, when the trust radius collapses, when the global ``counter``
    runs out (truncated result), or when ``on_eval`` returns True.
    """
    center = np.asarray(center, dtype=np.float64).ravel()
    b = center.size
    if q not in (b + 1, 2 * b + 1):
        raise ValueError(f"q must be {b + 1} or {2 * b + 1}, got {q}")
    if kappa < q:
        raise ValueError(f"kappa ({kappa}) must be at least q ({q})")
    if not box.contains(center):
        raise ValueError("center must lie inside the box")
    linear = q == b + 1

    free = box.width > 0
    n_free = int(free.sum())
    state = {
        "best_point": box.clip(center),
        "best_value": np.inf,
        "evals": 0,
        "truncated": False,
        "stopped": False,
    }

    def embed(reduced: np.ndarray) -> np.ndarray:
        full = center.copy()
        full[free] = reduced
        return box.clip(full)

    def evaluate(reduced: np.ndarray) -> float:
        if state["evals"] >= kappa:
            raise _StopBatch
        if counter is not None and counter.exhausted:
            state["truncated"] = True
            raise _StopBatch
        full = embed(reduced)
        value = float(objective(full))
        state["evals"] += 1
        if value < state["best_value"]:
            state["best_value"] = value
            state["best_point"] = full
        if on_eval is not None and on_eval(full, value):
            state["stopped"] = True
            raise _StopBatch
        return value

    def result() -> MinimizeResult:
        return MinimizeResult(
            state["best_point"],
            float(state["best_value"]),
            state["evals"],
            truncated=state["truncated"],
            stopped_early=state["stopped"],
        )

    if n_free == 0:
        # Nothing to optimize; still report the center's value.
        try:
            evaluate(np.empty(0))
        except _StopBatch:
            pass
        return result()

    red_center = center[free]
    red_box = BoxBounds(box.lower[free], box.upper[free])
    red_q = n_free + 1 if linear else 2 * n_free + 1
    if trust is None:
        radius = float(red_box.width.max()) / 3.0
        trust = TrustRegion(radius)

    initial = build_initial_samples(red_center, red_box, red_q, trust.radius)
    values = np.empty(red_q)
    try:
        for i in range(red_q):
            values[i] = evaluate(initial.points[i])
    except _StopBatch:
        return result()
    samples = SampleSet(initial.points, values)

    prev_model = None
    try:
        while state["evals"] < kappa and trust.radius >= trust.min_radius:
            if counter is not None and counter.exhausted:
                state["truncated"] = True
                break
            try:
                if linear:
                    model = fit_linear_model(samples)
                elif prev_model is None:
                    model = fit_diag_quadratic_model(samples)
                else:
                    model = min_frobenius_update(prev_model, samples)
            except SingularSystemError:
                break
            prev_model = model
            step = solve_subproblem(model, trust, red_box)
            candidate = red_box.clip(model.center + step)
            gap = np.abs(samples.points - candidate).max(axis=1)
            if gap.min() <= DUPLICATE_TOL:
                trust.shrink()
                continue
            before = state["best_value"]
            value = evaluate(candidate)
            if not value < before:
                trust.shrink()
            samples.replace(samples.worst_index(), candidate, value)
    except _StopBatch:
        pass
    return result()
