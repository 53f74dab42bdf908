"""Targeted black-box attack driver.

Loops over hierarchical lifting levels and coordinate batches, derives
per-variable bounds from the energy budget and the pixel range, hands each
batch to the trust-region minimizer, and accumulates accepted steps into the
full-resolution perturbation. Success is checked on every classifier query,
so the attack halts at the exact query that crosses the decision boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .errors import ConfigError
from .lifting import LiftingOperator, apply_lifting, build_block_lifting, refine_level, reproject
from .loss import adversarial_loss, is_adversarial
from .oracle import ClassifierModel, InputTensor, QueryCounter
from .sampling import (
    STRATEGIES,
    block_variance_order,
    ordered_plan,
    random_plan,
    variance_plan,
)
from .solver import BoxBounds, TrustRegion, minimize_batch

Q_MODES = ("linear", "diag_quadratic")

# Extra evaluations granted past model construction when no explicit
# per-batch cap is configured.
DEFAULT_EXTRA_QUERIES = 5

# Inputs below this dimension are attacked directly at pixel resolution.
DEFAULT_HIERARCHY_THRESHOLD = 4096


@dataclass
class AttackConfig:
    epsilon: float
    n_max: int
    b: int = 50
    q_mode: str = "linear"
    kappa: int | None = None
    initial_grid: tuple[int, int] = (4, 4)
    strategy: str = "variance"
    rho0: float = 1.0 / 3.0
    seed: int = 0
    hierarchy_threshold: int = DEFAULT_HIERARCHY_THRESHOLD

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.n_max < 1:
            raise ConfigError("n_max must be positive")
        if self.b < 1:
            raise ConfigError("batch size must be positive")
        if self.q_mode not in Q_MODES:
            raise ConfigError(f"q_mode must be one of {Q_MODES}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if not 0 < self.rho0 <= 1:
            raise ConfigError("rho0 must lie in (0, 1]")
        if self.kappa is not None and self.kappa < self.q_for(self.b):
            raise ConfigError(f"kappa must be at least q = {self.q_for(self.b)}")
        gh, gw = self.initial_grid
        if gh < 1 or gw < 1:
            raise ConfigError("initial grid dims must be positive")
        if self.hierarchy_threshold < 1:
            raise ConfigError("hierarchy threshold must be positive")

    def q_for(self, batch_size: int) -> int:
        return batch_size + 1 if self.q_mode == "linear" else 2 * batch_size + 1

    def kappa_for(self, batch_size: int) -> int:
        q = self.q_for(batch_size)
        if self.kappa is None:
            return q + DEFAULT_EXTRA_QUERIES
        return max(self.kappa, q)


@dataclass
class AttackResult:
    success: bool
    queries_used: int
    final_perturbation: np.ndarray
    loss_trace: list[tuple[int, float]]
    levels_completed: int
    # (query index at level start, grid_h, grid_w, m) per visited level
    level_trace: list[tuple[int, int, int, int]] = field(default_factory=list)
    verified: bool = False


def batch_bounds(
    x_data: np.ndarray,
    eta: np.ndarray,
    epsilon: float,
    l: float,
    u: float,
    lifting: LiftingOperator,
    block_indices: np.ndarray,
) -> BoxBounds:
    """Feasible increment interval for each selected lifted variable.

    Intersects, over the variable's pixels, the energy constraint
    |eta + delta| <= epsilon with the pixel-range constraint
    x + eta + delta in [l, u]. An empty intersection (possible after coarser
    levels pushed pixels to their limits) freezes the variable at zero.
    """
    k = len(block_indices)
    lo = np.empty(k)
    hi = np.empty(k)
    for idx, v in enumerate(block_indices):
        pix = lifting.pixels_of(int(v))
        e = eta[pix]
        xv = x_data[pix]
        lo_v = np.maximum(-epsilon - e, l - xv - e).max()
        hi_v = np.minimum(epsilon - e, u - xv - e).min()
        if lo_v > hi_v:
            lo_v = hi_v = 0.0
        lo[idx] = lo_v
        hi[idx] = hi_v
    return BoxBounds(lo, hi)


def add_level_perturbation(
    eta: np.ndarray,
    lifting: LiftingOperator,
    delta: np.ndarray,
    block_indices: np.ndarray,
) -> np.ndarray:
    """Lift a batch increment to pixel space and add it to the perturbation."""
    coeffs = np.zeros(lifting.m)
    coeffs[np.asarray(block_indices, dtype=int)] = delta
    return eta + apply_lifting(lifting, coeffs)


def _perturbed_input(x: InputTensor, eta: np.ndarray) -> InputTensor:
    l, u = x.bounds
    return InputTensor(x.shape, reproject(x.data + eta, l, u), x.bounds)


def _level_batches(
    config: AttackConfig,
    lifting: LiftingOperator,
    current: InputTensor,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    m = lifting.m
    nb = min(config.b, m)
    if config.strategy == "random":
        return random_plan(m, nb, rng).batches
    if config.strategy == "ordered":
        return ordered_plan(m, nb, rng).batches
    if lifting.is_pixel_level:
        return variance_plan(current, nb).batches
    order = block_variance_order(current, lifting)
    return [order[i : i + nb] for i in range(0, m, nb)]


def run_attack(
    config: AttackConfig,
    model: ClassifierModel,
    x: InputTensor,
    target: int,
    counter: QueryCounter,
    query_fn=None,
    batch_observer=None,
) -> AttackResult:
    """Run the full attack until success or the query budget runs out.

    ``query_fn(model, input, counter)`` defaults to the counted oracle query
    and is injectable so harnesses can audit every evaluated input.
    ``batch_observer(eta)``, when given, is called after every accepted batch.
    """
    if query_fn is None:
        query_fn = oracle.query
    l, u = x.bounds
    n = x.n
    start = counter.count
    rng = np.random.default_rng(config.seed)

    eta = np.zeros(n)
    trace: list[tuple[int, float]] = []
    level_trace: list[tuple[int, int, int, int]] = []
    best_loss = np.inf
    success = False
    success_eta: np.ndarray | None = None

    def observe(probs: np.ndarray, trial_eta: np.ndarray) -> float:
        nonlocal best_loss, success, success_eta
        value = adversarial_loss(probs, target)
        if value < best_loss:
            best_loss = value
            trace.append((counter.count - start, value))
        if not success and is_adversarial(probs, target):
            success = True
            success_eta = trial_eta.copy()
        return value

    probs = query_fn(model, _perturbed_input(x, eta), counter)
    if not 0 <= target < probs.size:
        raise ValueError(f"target class {target} out of range")
    observe(probs, eta)
    if success:
        return _finish(model, x, eta, target, counter, start, trace, level_trace, 0, True)

    h, w, c = x.shape
    if n > config.hierarchy_threshold:
        gh, gw = config.initial_grid
        lifting = build_block_lifting(x.shape, min(gh, h), min(gw, w))
    else:
        lifting = build_block_lifting(x.shape, h, w)
    level_trace.append((counter.count - start, lifting.grid_h, lifting.grid_w, lifting.m))

    levels_completed = 0
    level_swept = False  # current level already counted as completed

    while not success and not counter.exhausted:
        queries_at_sweep_start = counter.count
        batches = _level_batches(config, lifting, _perturbed_input(x, eta), rng)
        sweep_complete = True
        for batch in batches:
            if counter.exhausted:
                sweep_complete = False
                break
            box = batch_bounds(x.data, eta, config.epsilon, l, u, lifting, batch)
            active = box.width > 0
            if not active.any():
                continue

            def objective(delta: np.ndarray) -> float:
                trial = add_level_perturbation(eta, lifting, delta, batch)
                return observe(query_fn(model, _perturbed_input(x, trial), counter), trial)

            radius = config.rho0 * float(box.width[active].max())
            result = minimize_batch(
                objective,
                np.zeros(len(batch)),
                box,
                config.q_for(len(batch)),
                config.kappa_for(len(batch)),
                counter=counter,
                trust=TrustRegion(radius),
                on_eval=lambda _pt, _val: success,
            )
            if success:
                # the adversarial perturbation was captured by observe()
                sweep_complete = False
                break
            eta = add_level_perturbation(eta, lifting, result.best_point, batch)
            if batch_observer is not None:
                batch_observer(eta)
            if result.truncated:
                sweep_complete = False
                break

        if sweep_complete and not level_swept:
            levels_completed += 1
            level_swept = True
        if success or counter.exhausted:
            break
        if not lifting.is_pixel_level:
            lifting = refine_level(lifting, x.shape)
            level_trace.append(
                (counter.count - start, lifting.grid_h, lifting.grid_w, lifting.m)
            )
            level_swept = False
        elif counter.count == queries_at_sweep_start:
            # pixel level and the sweep made no progress: all variables frozen
            break

    if success and success_eta is not None:
        eta = success_eta
    return _finish(
        model, x, eta, target, counter, start, trace, level_trace, levels_completed, success
    )


def _finish(model, x, eta, target, counter, start, trace, level_trace, levels_completed, success):
    verified = False
    if success:
        # one uncounted verification pass, reported separately from the budget
        final = oracle.forward(model, _perturbed_input(x, eta))
        verified = bool(np.argmax(final) == target)
    return AttackResult(
        success=success,
        queries_used=counter.count - start,
        final_perturbation=eta,
        loss_trace=trace,
        levels_completed=levels_completed,
        level_trace=level_trace,
        verified=verified,
    )
