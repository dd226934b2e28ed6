"""
Binary route-switching model: the probability that a traveler on route i
leaves it the next day, as a logistic function of delta_t = t_i - t_j.

Fitted by Newton-Raphson with step halving; standard errors come from the
inverse observed information and p-values are two-sided Wald tests.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from src.logger import get_logger
from src.sim.records import DayLog

logger = get_logger(__name__)

MAX_HALVINGS = 30
# Relative slack on likelihood comparisons; below it differences are rounding noise
LIKELIHOOD_RTOL = 1e-12


class DegenerateDataError(ValueError):
    """Too few observations, or only one outcome class."""


@dataclass(frozen=True)
class SwitchObservation:
    delta_t: float
    switched: bool

    def __post_init__(self):
        if not np.isfinite(self.delta_t):
            raise ValueError(f"delta_t must be finite, got {self.delta_t}")


@dataclass(frozen=True)
class FitResult:
    theta0: float
    theta1: float
    std_errors: Tuple[float, float]
    p_values: Tuple[float, float]
    log_likelihood: float
    converged: bool
    iterations: int
    n_obs: int
    diagnostic: str = ""
    log_likelihood_path: Tuple[float, ...] = ()


def logistic_predict(theta0: float, theta1: float, delta_t):
    return expit(theta0 + theta1 * np.asarray(delta_t, dtype=float))


def design_matrix(observations: Sequence[SwitchObservation]) -> Tuple[np.ndarray, np.ndarray]:
    delta = np.array([o.delta_t for o in observations], dtype=float)
    y = np.array([o.switched for o in observations], dtype=float)
    return np.column_stack([np.ones_like(delta), delta]), y


def log_likelihood(theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    eta = X @ theta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Analytic gradient of the log-likelihood."""
    return X.T @ (y - expit(X @ theta))


def observed_information(theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    p = expit(X @ theta)
    return X.T @ (X * (p * (1.0 - p))[:, None])


def detect_separation(delta: np.ndarray, y: np.ndarray) -> Optional[str]:
    """Name the separation pattern of a single-regressor sample, if any."""
    switched, stayed = delta[y == 1], delta[y == 0]
    if switched.min() > stayed.max() or switched.max() < stayed.min():
        return "complete separation"
    if switched.min() >= stayed.max() or switched.max() <= stayed.min():
        return "quasi-complete separation"
    return None


def fit_switching(
    observations: Sequence[SwitchObservation],
    max_iterations: int = 100,
    tolerance: float = 1e-8,
) -> FitResult:
    # 1. Validate the sample
    if len(observations) < 2:
        raise DegenerateDataError(f"Need at least 2 observations, got {len(observations)}")
    X, y = design_matrix(observations)
    if y.all() or not y.any():
        raise DegenerateDataError("All observations share one outcome; the switching model is not identified")
    separation = detect_separation(X[:, 1], y)

    # 2. Newton-Raphson with step halving
    theta = np.zeros(2)
    ll = log_likelihood(theta, X, y)
    path = [ll]
    converged = False
    diagnostic = ""
    iterations = 0

    while iterations < max_iterations:
        gradient = score(theta, X, y)
        if np.max(np.abs(gradient)) < tolerance:
            converged = True
            break
        try:
            step = np.linalg.solve(observed_information(theta, X), gradient)
        except np.linalg.LinAlgError:
            diagnostic = "singular information matrix"
            break

        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = theta + scale * step
            candidate_ll = log_likelihood(candidate, X, y)
            if candidate_ll >= ll - LIKELIHOOD_RTOL * max(1.0, abs(ll)):
                break
            scale /= 2
        else:
            diagnostic = "step halving failed to improve the likelihood"
            break

        theta, ll = candidate, candidate_ll
        path.append(ll)
        iterations += 1
    else:
        converged = bool(np.max(np.abs(score(theta, X, y))) < tolerance)

    if separation:
        converged = False
        diagnostic = f"{separation}: the estimates diverge"
    elif not converged and not diagnostic:
        diagnostic = f"no convergence after {max_iterations} iterations"
    if diagnostic:
        logger.warning("Switching fit did not converge: %s", diagnostic)

    # 3. Standard errors and Wald tests
    try:
        covariance = np.linalg.inv(observed_information(theta, X))
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            std_errors = np.sqrt(np.diag(covariance))
            p_values = 2.0 * norm.sf(np.abs(theta / std_errors))
    except np.linalg.LinAlgError:
        std_errors = np.full(2, np.nan)
        p_values = np.full(2, np.nan)

    return FitResult(
        theta0=float(theta[0]),
        theta1=float(theta[1]),
        std_errors=(float(std_errors[0]), float(std_errors[1])),
        p_values=(float(p_values[0]), float(p_values[1])),
        log_likelihood=ll,
        converged=converged,
        iterations=iterations,
        n_obs=len(y),
        diagnostic=diagnostic,
        log_likelihood_path=tuple(path),
    )


def extract_observations(runs: Sequence[Sequence[DayLog]], pair: Tuple[int, int]) -> List[SwitchObservation]:
    """
    One observation per (agent, day t) with the agent on route i at t and a
    day t+1 to look at. `pair` holds 0-based route indices (i, j); replications
    in `runs` are pooled.
    """
    i, j = pair
    observations = []
    for logs in runs:
        for today, tomorrow in zip(logs, logs[1:]):
            next_choice = {record.agent: record.choice for record in tomorrow.records}
            for record in today.records:
                if record.choice != i or record.agent not in next_choice:
                    continue
                times = today.route_times[record.od]
                observations.append(
                    SwitchObservation(delta_t=times[i] - times[j], switched=next_choice[record.agent] != i)
                )
    return observations


def interpret_fit(name: str, fit: FitResult, alpha: float = 0.05) -> Dict[str, object]:
    significant = fit.converged and fit.p_values[1] < alpha
    return {
        "What": f"{name}: theta1={fit.theta1:.4f} (p={fit.p_values[1]:.4f})",
        "Interpretation": (
            "Switching responds significantly to the cost difference"
            if significant
            else "No significant response to the cost difference"
        ),
        "Converged": fit.converged,
        "Diagnostic": fit.diagnostic or None,
    }
