"""Covariance-fitting attack on pair-difference responses.

The attack models how a population covariance matrix changes when one more
device is appended. With ``C`` the covariance over ``n`` training devices
(population divisor) and ``d = b - mu`` the new device's difference vector
minus the training row means, the updated covariance is

    C_new = (n * C + d d^T) / (n + 1)

provided the shift in the row means is neglected. The residual
``C_new - C = (d d^T - C) / (n + 1)`` is therefore a known function of the
unknown vector ``d``, and an attacker who assumes the population covariance
barely moves can recover a plausible ``d`` by driving the residual's squared
Frobenius norm to a minimum:

    f(d) = ||d d^T - C||_F^2 / (n + 1)^2
    grad f(d) = 4 (d d^T - C) d / (n + 1)^2

Some coordinates of ``b`` may be pinned to values the attacker knows: the
exact measured differences ("exact" mode) or just their signs scaled to
+-1 MHz ("trend" mode). The remaining free coordinates are optimized by
projected gradient descent with a backtracking line search, starting from
the training row means (d_free = 0).

The payoff metric is ``delta_correct``: how many more response bits the
fitted vector gets right compared to the starting point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import covariance_matrix
from .errors import ConfigurationError, NumericError, StructuralError

MODES = ("trend", "exact")


@dataclass(frozen=True)
class FitOptions:
    """Gradient descent controls.

    ``start_free`` optionally overrides the zero starting point of the free
    coordinates of ``d``; the default reproduces the mean-start protocol.
    """

    max_iter: int = 5000
    grad_tol: float = 1e-8
    objective_tol: float = 1e-12
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    start_free: np.ndarray | None = None


@dataclass(frozen=True)
class CovFitProblem:
    """One attack instance.

    ``cov`` and ``row_means`` come from the training devices, ``n_train`` of
    them, with ``cov`` using the population divisor. ``fixed_mask`` marks the
    pinned coordinates and ``fixed_values`` holds their pinned values of
    ``b`` in mask order. ``truth`` (the target's real difference vector) is
    optional and only used for scoring.
    """

    cov: np.ndarray
    row_means: np.ndarray
    n_train: int
    fixed_mask: np.ndarray
    fixed_values: np.ndarray
    mode: str = "exact"
    trend_magnitude: float = 1.0
    truth: np.ndarray | None = None

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=np.float64)
        mu = np.asarray(self.row_means, dtype=np.float64).ravel()
        mask = np.asarray(self.fixed_mask, dtype=bool).ravel()
        vals = np.asarray(self.fixed_values, dtype=np.float64).ravel()
        k = mu.size
        if cov.shape != (k, k):
            raise ConfigurationError(
                f"covariance shape {cov.shape} does not match {k} row means"
            )
        if mask.size != k:
            raise ConfigurationError(
                f"fixed mask covers {mask.size} positions, expected {k}"
            )
        if vals.size != int(mask.sum()):
            raise ConfigurationError(
                f"{vals.size} fixed values for {int(mask.sum())} fixed positions"
            )
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "trend" and vals.size:
            if not np.all(np.isclose(np.abs(vals), self.trend_magnitude)):
                raise ConfigurationError(
                    f"trend mode pins values to +-{self.trend_magnitude} MHz"
                )
        scale = float(np.abs(cov).max()) or 1.0
        if float(np.abs(cov - cov.T).max()) > 1e-8 * scale:
            raise ConfigurationError("covariance matrix is not symmetric")
        eigmin = float(np.linalg.eigvalsh((cov + cov.T) / 2.0).min())
        if eigmin < -1e-8 * scale:
            raise ConfigurationError(
                f"covariance matrix is not positive semidefinite (eigmin {eigmin:g})"
            )
        if self.n_train < 1:
            raise ConfigurationError("n_train must be positive")
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=np.float64).ravel()
            if truth.size != k:
                raise ConfigurationError(
                    f"truth vector has {truth.size} entries, expected {k}"
                )
            object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "row_means", mu)
        object.__setattr__(self, "fixed_mask", mask)
        object.__setattr__(self, "fixed_values", vals)

    @property
    def num_pairs(self) -> int:
        return self.row_means.size

    @property
    def num_free(self) -> int:
        return int((~self.fixed_mask).sum())


@dataclass(frozen=True)
class CovFitResult:
    b_hat: np.ndarray
    objective: float
    start_objective: float
    iterations: int
    bits_hat: np.ndarray
    delta_correct: int | None
    stop_reason: str


def bits_from_values(values) -> np.ndarray:
    """Response bits: 1 where the difference is strictly positive."""
    return (np.asarray(values, dtype=np.float64) > 0.0).astype(np.uint8)


def expanded_cov_residual(cov, row_means, b, n_train: int) -> np.ndarray:
    """Residual C_new - C after appending difference vector ``b``.

    Computed through the rank-one identity (d d^T - C) / (n + 1) with
    d = b - row_means; equivalent to re-deriving the covariance over n + 1
    devices with the old row means.
    """
    c = np.asarray(cov, dtype=np.float64)
    mu = np.asarray(row_means, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if c.shape != (mu.size, mu.size) or bv.size != mu.size:
        raise StructuralError(
            f"inconsistent shapes: cov {c.shape}, means {mu.size}, b {bv.size}"
        )
    if n_train < 1:
        raise ConfigurationError("n_train must be positive")
    d = bv - mu
    return (np.outer(d, d) - c) / (n_train + 1.0)


def _objective_terms(cov):
    cov_fro2 = float(np.sum(cov * cov))

    def f_and_cd(d):
        cd = cov @ d
        dd = float(np.dot(d, d))
        value = dd * dd - 2.0 * float(np.dot(d, cd)) + cov_fro2
        return value, cd, dd

    return f_and_cd


def _assemble(problem: CovFitProblem, d_free) -> np.ndarray:
    free = ~problem.fixed_mask
    start = np.asarray(d_free, dtype=np.float64).ravel()
    if start.size != int(free.sum()):
        raise ConfigurationError(
            f"got {start.size} free values for {int(free.sum())} free coordinates"
        )
    d = np.zeros(problem.num_pairs)
    d[problem.fixed_mask] = problem.fixed_values - problem.row_means[problem.fixed_mask]
    d[free] = start
    return d


def objective_and_gradient(problem: CovFitProblem, d_free) -> tuple[float, np.ndarray]:
    """Objective value and full-length gradient at the given free vector.

    Gradient entries at fixed positions are zeroed, matching the projected
    descent direction.
    """
    d = _assemble(problem, d_free)
    scale = 1.0 / (problem.n_train + 1.0) ** 2
    f_raw, cd, dd = _objective_terms(problem.cov)(d)
    grad = 4.0 * (dd * d - cd) * scale
    grad[problem.fixed_mask] = 0.0
    return f_raw * scale, grad


def fit(problem: CovFitProblem, options: FitOptions | None = None) -> CovFitResult:
    """Minimize the residual norm over the free coordinates of ``d``.

    Projected gradient descent: fixed coordinates never move, free
    coordinates follow the negative gradient with a backtracking Armijo
    line search. Descent is monotone; the result's objective can never
    exceed the starting objective.
    """
    options = options or FitOptions()
    k = problem.num_pairs
    free = ~problem.fixed_mask
    if not free.any():
        raise ConfigurationError("no free coordinates; nothing to optimize")
    scale = 1.0 / (problem.n_train + 1.0) ** 2

    d = np.zeros(k)
    d[problem.fixed_mask] = problem.fixed_values - problem.row_means[problem.fixed_mask]
    if options.start_free is not None:
        start = np.asarray(options.start_free, dtype=np.float64).ravel()
        if start.size != int(free.sum()):
            raise ConfigurationError(
                f"start_free has {start.size} entries for {int(free.sum())} free coordinates"
            )
        d[free] = start

    f_and_cd = _objective_terms(problem.cov)
    f_raw, cd, dd = f_and_cd(d)
    if not np.isfinite(f_raw):
        raise NumericError("objective is not finite at the starting point")
    start_objective = f_raw * scale

    iterations = 0
    alpha = 1.0
    stop_reason = f"max_iter reached ({options.max_iter})"
    for _ in range(options.max_iter):
        grad = 4.0 * (dd * d - cd)
        grad[problem.fixed_mask] = 0.0
        gnorm2 = float(np.dot(grad, grad))
        if np.sqrt(gnorm2) * scale < options.grad_tol:
            stop_reason = "gradient tolerance"
            break
        alpha = min(alpha * 4.0, 1e12)
        accepted = False
        while alpha > 1e-20:
            d_new = d - alpha * grad
            f_new, cd_new, dd_new = f_and_cd(d_new)
            if np.isfinite(f_new) and f_new <= f_raw - options.armijo_c * alpha * gnorm2:
                accepted = True
                break
            alpha *= options.backtrack
        if not accepted:
            stop_reason = "line search stalled"
            break
        decrease = (f_raw - f_new) * scale
        d, f_raw, cd, dd = d_new, f_new, cd_new, dd_new
        iterations += 1
        if decrease < options.objective_tol * max(1.0, abs(f_raw) * scale):
            stop_reason = "objective tolerance"
            break

    b_hat = problem.row_means + d
    # Pin the fixed positions exactly; mu + (v - mu) can differ in the last ulp.
    b_hat[problem.fixed_mask] = problem.fixed_values
    bits_hat = bits_from_values(b_hat)

    delta_correct = None
    if problem.truth is not None:
        b_start = problem.row_means.copy()
        b_start[problem.fixed_mask] = problem.fixed_values
        truth_bits = bits_from_values(problem.truth)
        correct_start = int((bits_from_values(b_start) == truth_bits).sum())
        correct_end = int((bits_hat == truth_bits).sum())
        delta_correct = correct_end - correct_start

    return CovFitResult(
        b_hat=b_hat,
        objective=float(f_raw * scale),
        start_objective=float(start_objective),
        iterations=iterations,
        bits_hat=bits_hat,
        delta_correct=delta_correct,
        stop_reason=stop_reason,
    )


def choose_fixed_positions(
    num_pairs: int,
    count: int,
    selection: str = "even",
    seed: int | None = None,
) -> np.ndarray:
    """Pick which pair indices the attacker pins.

    ``even`` spreads them uniformly over the index range; ``random`` draws
    them without replacement from a seeded generator.
    """
    if not (0 <= count <= num_pairs):
        raise ConfigurationError(
            f"fixed count {count} out of range for {num_pairs} pairs"
        )
    if selection == "even":
        return np.floor(np.arange(count) * num_pairs / max(count, 1)).astype(np.int64)
    if selection == "random":
        if seed is None:
            raise ConfigurationError("random position selection requires a seed")
        rng = np.random.default_rng([seed, count])
        return np.sort(rng.choice(num_pairs, size=count, replace=False))
    raise ConfigurationError(f"unknown selection {selection!r}")


@dataclass(frozen=True)
class AttackCell:
    device_index: int
    mode: str
    fixed_count: int
    delta_correct: int | None
    objective: float | None
    iterations: int
    error: str | None = None


def evaluate_attack(
    diff,
    device_index: int,
    fixed_counts,
    mode: str = "trend",
    seed: int | None = None,
    selection: str = "even",
    trend_magnitude: float = 1.0,
    options: FitOptions | None = None,
) -> list[AttackCell]:
    """Leave-one-out attack sweep against a single target device.

    The target column is removed, covariance and row means are trained on
    the rest, and for each fixed count the pinned positions take either the
    target's exact values or their +-magnitude trend. A failed cell is
    recorded with its error message rather than aborting the sweep.
    """
    d = np.asarray(diff, dtype=np.float64)
    if d.ndim != 2:
        raise StructuralError(f"difference matrix must be 2-dimensional, got {d.shape}")
    num_pairs, num_devices = d.shape
    if not (0 <= device_index < num_devices):
        raise ConfigurationError(
            f"device index {device_index} out of range for {num_devices} devices"
        )
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    truth = d[:, device_index]
    train = np.delete(d, device_index, axis=1)
    cov = covariance_matrix(train)
    mu = train.mean(axis=1)
    n_train = train.shape[1]
    truth_bits = bits_from_values(truth)

    cells = []
    for count in fixed_counts:
        positions = choose_fixed_positions(num_pairs, int(count), selection, seed)
        mask = np.zeros(num_pairs, dtype=bool)
        mask[positions] = True
        if mode == "exact":
            values = truth[mask]
        else:
            values = np.where(truth[mask] > 0.0, trend_magnitude, -trend_magnitude)
        if int(count) == num_pairs:
            # Everything pinned: nothing to optimize, bits match by construction.
            residual = expanded_cov_residual(cov, mu, values, n_train)
            cells.append(
                AttackCell(
                    device_index=device_index,
                    mode=mode,
                    fixed_count=int(count),
                    delta_correct=0,
                    objective=float(np.sum(residual * residual)),
                    iterations=0,
                )
            )
            continue
        problem = CovFitProblem(
            cov=cov,
            row_means=mu,
            n_train=n_train,
            fixed_mask=mask,
            fixed_values=values,
            mode=mode,
            trend_magnitude=trend_magnitude,
            truth=truth,
        )
        try:
            result = fit(problem, options)
        except (ConfigurationError, NumericError) as exc:
            cells.append(
                AttackCell(
                    device_index=device_index,
                    mode=mode,
                    fixed_count=int(count),
                    delta_correct=None,
                    objective=None,
                    iterations=0,
                    error=str(exc),
                )
            )
            continue
        cells.append(
            AttackCell(
                device_index=device_index,
                mode=mode,
                fixed_count=int(count),
                delta_correct=result.delta_correct,
                objective=result.objective,
                iterations=result.iterations,
            )
        )
    return cells
