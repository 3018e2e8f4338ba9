"""Dense Levenberg-Marquardt least-squares engine.

Cost is the plain sum of squared residuals (no 1/2 factor), so reported costs
are directly in squared residual units. Steps solve the Marquardt-scaled
normal equations (J^T J + lambda * diag(J^T J)) delta = -J^T r by Cholesky.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
import structlog
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .config import SolveOptions
from .errors import DccError, NonFiniteResidualError

logger = structlog.get_logger(__name__)

ResidualFn = Callable[[np.ndarray], np.ndarray]
JacobianFn = Callable[[np.ndarray], np.ndarray]

MAX_DAMPING = 1e16
MIN_DAMPING = 1e-16
DIAGONAL_FLOOR = 1e-12


class Termination(str, Enum):
    """Why a solve stopped."""

    ZERO_COST = "zero_cost"
    COST_TOLERANCE = "cost_tolerance"
    GRADIENT_TOLERANCE = "gradient_tolerance"
    NO_IMPROVEMENT = "no_improvement"
    MAX_ITERATIONS = "max_iterations"


CONVERGED = {
    Termination.ZERO_COST,
    Termination.COST_TOLERANCE,
    Termination.GRADIENT_TOLERANCE,
    Termination.NO_IMPROVEMENT,
}


@dataclass
class LeastSquaresProblem:
    """Residual function r: R^n -> R^m (m >= n) with optional analytic Jacobian."""

    residual: ResidualFn
    initial: np.ndarray
    jacobian: Optional[JacobianFn] = None
    name: str = "problem"

    def __post_init__(self) -> None:
        self.initial = np.asarray(self.initial, dtype=float).reshape(-1)


@dataclass
class SolveReport:
    """Outcome of a Levenberg-Marquardt run."""

    parameters: np.ndarray
    initial_cost: float
    final_cost: float
    iterations: int
    termination: Termination
    cost_trace: List[float] = field(default_factory=list)
    gradient_max: float = 0.0

    @property
    def converged(self) -> bool:
        return self.termination in CONVERGED


def _evaluate(fn: ResidualFn, x: np.ndarray) -> Optional[np.ndarray]:
    """Residual at x, or None when it is non-finite or undefined."""
    try:
        r = np.asarray(fn(x), dtype=float).reshape(-1)
    except (DccError, FloatingPointError, ZeroDivisionError):
        return None
    if not np.all(np.isfinite(r)):
        return None
    return r


def _robust_weights(r: np.ndarray, options: SolveOptions) -> np.ndarray:
    if options.loss == "linear":
        return np.ones_like(r)
    width = options.huber_width_px
    magnitude = np.abs(r)
    weights = np.ones_like(r)
    outside = magnitude > width
    weights[outside] = width / magnitude[outside]
    return weights


def _cost(r: np.ndarray, options: SolveOptions) -> float:
    if options.loss == "linear":
        return float(r @ r)
    width = options.huber_width_px
    magnitude = np.abs(r)
    inside = magnitude <= width
    return float(
        np.sum(r[inside] ** 2) + np.sum(2.0 * width * magnitude[~inside] - width**2)
    )


def numeric_jacobian(
    f: ResidualFn, x: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian with per-parameter step h * max(1, |x_j|).

    Raises:
        NonFiniteResidualError: any evaluation is non-finite.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    columns = []
    for j in range(x.shape[0]):
        step = h * max(1.0, abs(x[j]))
        forward, backward = x.copy(), x.copy()
        forward[j] += step
        backward[j] -= step
        f_plus = np.asarray(f(forward), dtype=float).reshape(-1)
        f_minus = np.asarray(f(backward), dtype=float).reshape(-1)
        if not (np.all(np.isfinite(f_plus)) and np.all(np.isfinite(f_minus))):
            raise NonFiniteResidualError(
                f"Non-finite evaluation while differencing parameter {j}",
                iterate=x,
            )
        columns.append((f_plus - f_minus) / (2.0 * step))
    return np.column_stack(columns) if columns else np.zeros((0, 0))


def levenberg_marquardt(
    problem: LeastSquaresProblem, options: Optional[SolveOptions] = None
) -> SolveReport:
    """Minimize the sum of squared residuals of a problem.

    Trial steps producing non-finite residuals are rejected like uphill steps.

    Raises:
        NonFiniteResidualError: the residual is non-finite at the initial point.
    """
    options = options or SolveOptions()
    log = logger.bind(problem=problem.name)
    jacobian_fn: JacobianFn = problem.jacobian or (
        lambda x: numeric_jacobian(problem.residual, x)
    )

    x = problem.initial.copy()
    r = _evaluate(problem.residual, x)
    if r is None:
        raise NonFiniteResidualError(
            "Residual is non-finite at the initial point", iterate=x
        )
    if r.shape[0] < x.shape[0]:
        log.warning("Fewer residuals than parameters", m=r.shape[0], n=x.shape[0])

    cost = _cost(r, options)
    initial_cost = cost
    trace = [cost]
    log.info("Starting solve", parameters=x.shape[0], residuals=r.shape[0], cost=cost)

    if cost == 0.0:
        return SolveReport(x, cost, cost, 0, Termination.ZERO_COST, trace, 0.0)

    damping = options.initial_damping
    termination = Termination.MAX_ITERATIONS
    iterations = 0
    jac = jacobian_fn(x)
    gradient_max = np.inf

    while iterations < options.max_iterations:
        weights = np.sqrt(_robust_weights(r, options))
        jac_w = jac * weights[:, None]
        r_w = r * weights
        gradient = jac_w.T @ r_w
        gradient_max = float(np.max(np.abs(gradient))) if gradient.size else 0.0
        if gradient_max <= options.gradient_tolerance:
            termination = Termination.GRADIENT_TOLERANCE
            break

        normal = jac_w.T @ jac_w
        scale = np.maximum(np.diag(normal), DIAGONAL_FLOOR * max(1.0, normal.max()))

        accepted = False
        while damping <= MAX_DAMPING:
            try:
                factor = cho_factor(normal + damping * np.diag(scale))
                step = -cho_solve(factor, gradient)
            except (LinAlgError, ValueError):
                damping *= options.damping_up
                continue
            candidate = x + step
            r_new = _evaluate(problem.residual, candidate)
            if r_new is not None:
                cost_new = _cost(r_new, options)
                if cost_new < cost:
                    accepted = True
                    break
            damping *= options.damping_up

        if not accepted:
            termination = Termination.NO_IMPROVEMENT
            break

        iterations += 1
        relative_decrease = (cost - cost_new) / cost
        x, r, cost = candidate, r_new, cost_new
        trace.append(cost)
        damping = max(damping * options.damping_down, MIN_DAMPING)
        log.debug("Accepted step", iteration=iterations, cost=cost, damping=damping)

        jac = jacobian_fn(x)
        if cost == 0.0 or relative_decrease < options.cost_tolerance:
            termination = Termination.COST_TOLERANCE
            break

    if termination != Termination.GRADIENT_TOLERANCE:
        weights = np.sqrt(_robust_weights(r, options))
        gradient = (jac * weights[:, None]).T @ (r * weights)
        gradient_max = float(np.max(np.abs(gradient))) if gradient.size else 0.0

    log.info(
        "Finished solve",
        iterations=iterations,
        initial_cost=initial_cost,
        final_cost=cost,
        termination=termination.value,
    )
    return SolveReport(
        parameters=x,
        initial_cost=initial_cost,
        final_cost=cost,
        iterations=iterations,
        termination=termination,
        cost_trace=trace,
        gradient_max=gradient_max,
    )
