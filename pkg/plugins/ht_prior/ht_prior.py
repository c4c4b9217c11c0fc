"""
Hypothesis-testing prior for Langevin dynamics.

The prior knows both candidates of the held-out column but not which one
is in the training set. It watches the trajectory, accumulates for each
candidate u the statistic

    Y_{t,u} = Σ_{i<=t} (β_i / (4η_i)) ‖W_i − W_{i−1} + η_i((n−1)/n)∇L̃_{S_{J^c}} + (η_i/n)∇ℓ̃(Z_{u,J})‖²

and predicts the next step with a θ(ΔY)-weighted mix of the two candidate
gradients, ΔY = Y_{t,2} − Y_{t,1}. Each step's prior and posterior are
Gaussians with covariance (2η/β)·I, so the per-step KL is closed form and
the bound on the expected generalization error is

    (1/(n√2)) · E √( Σ_t β_t η_t ‖ζ_t‖² (1{U_J=1} − θ(ΔY_t))² ).

Also provides the generic KL-form evaluator and a chain-rule check on
Gaussian random walks.
"""
import math
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erf

from plugins.common.errors import ValidationError, InvariantViolation

logger = logging.getLogger(__name__)

THETA_KINDS = ("constant-half", "erf", "tanh", "sign")
SCALED_KINDS = ("erf", "tanh")
DELTA_Y_CLAMP = 1e8
CHAIN_RULE_TOL = 1e-10


@dataclass(frozen=True)
class DecisionFunction:
    """
    Map θ: ℝ → [0, 1] from the statistic ΔY to the belief that U_J = 1.

    erf and tanh kinds are ½(1 + erf(x/a)) and ½(1 + tanh(x/a)); a is a
    width, and both approach the sign rule as a shrinks toward 0.
    """
    kind: str = "erf"
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in THETA_KINDS:
            raise ValidationError(f"Unknown decision function: {self.kind}",
                                  suggestion=f"Use one of: {', '.join(THETA_KINDS)}")
        if self.kind in SCALED_KINDS and (not math.isfinite(self.a) or self.a <= 0):
            raise ValidationError("Decision function scale must be positive and finite",
                                  param_info=f"a = {self.a}")

    @classmethod
    def parse(cls, text):
        """Parse ``kind[:a]``, e.g. ``erf:2.5``, ``sign`` or ``constant-half``."""
        kind, _, scale = str(text).partition(":")
        kind = kind.strip().lower()
        if kind == "half":
            kind = "constant-half"
        if not scale:
            return cls(kind)
        try:
            a = float(scale)
        except ValueError:
            raise ValidationError(f"Invalid decision function scale in '{text}'",
                                  suggestion="Write the scale as a number, e.g. erf:0.5.")
        return cls(kind, a)

    @property
    def label(self):
        return f"{self.kind}:{self.a:g}" if self.kind in SCALED_KINDS else self.kind

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant-half":
            return np.full_like(x, 0.5)
        if self.kind == "sign":
            return 0.5 * (1.0 + np.sign(x))
        scaled = np.clip(x, -DELTA_Y_CLAMP, DELTA_Y_CLAMP) / self.a
        if self.kind == "erf":
            return 0.5 * (1.0 + erf(scaled))
        return 0.5 * (1.0 + np.tanh(scaled))


@dataclass(frozen=True)
class HypothesisTestState:
    y1: float = 0.0
    y2: float = 0.0
    t: int = 0

    @property
    def delta_y(self):
        return self.y2 - self.y1


@dataclass(frozen=True)
class BeliefVector:
    pi1: float
    pi2: float


@dataclass(frozen=True)
class StepKLRecord:
    """One step of one branch: ‖ζ‖², θ(ΔY), 1{U_J=1}, the KL and β·η·‖ζ‖²·(indicator − θ)²."""
    t: int
    zeta_sq: float
    theta_val: float
    indicator: int
    kl: float
    summand: float


def _increment(step, eta, beta, loo_grad, cand_grad, n):
    residual = step + eta * ((n - 1) / n) * loo_grad + (eta / n) * cand_grad
    return beta / (4.0 * eta) * float(np.dot(residual, residual))


def update_y(state: HypothesisTestState, w_prev, w_next, eta, beta, loo_grad,
             cand_grad_1, cand_grad_2, n) -> HypothesisTestState:
    """
    Add one step's squared residual against each candidate's drift.

    Args:
        state: Statistics before the step
        w_prev: W_t
        w_next: W_{t+1}
        eta: Learning rate of the step
        beta: Inverse temperature of the step
        loo_grad: ∇L̃_{S_{J^c}}(W_t)
        cand_grad_1: ∇ℓ̃(Z_{1,J}, W_t)
        cand_grad_2: ∇ℓ̃(Z_{2,J}, W_t)
        n: Training set size

    Returns:
        Statistics after the step
    """
    if eta <= 0 or beta <= 0:
        raise ValidationError("Learning rate and inverse temperature must be positive",
                              param_info=f"eta = {eta}, beta = {beta}")
    vectors = [np.atleast_1d(np.asarray(v, dtype=float)) for v in (w_prev, w_next, loo_grad, cand_grad_1, cand_grad_2)]
    if len({v.shape for v in vectors}) != 1:
        raise ValidationError("Vectors passed to update_y differ in dimension",
                              param_info=", ".join(str(v.shape) for v in vectors))
    w_prev, w_next, loo_grad, g1, g2 = vectors
    step = w_next - w_prev
    return HypothesisTestState(
        y1=state.y1 + _increment(step, eta, beta, loo_grad, g1, n),
        y2=state.y2 + _increment(step, eta, beta, loo_grad, g2, n),
        t=state.t + 1,
    )


def belief(theta: DecisionFunction, state: HypothesisTestState) -> BeliefVector:
    """π_t = (θ(ΔY), 1 − θ(ΔY))."""
    pi1 = float(theta(state.delta_y))
    return BeliefVector(pi1, 1.0 - pi1)


def _check_step_inputs(eta, beta, n, theta_val):
    if eta <= 0 or beta <= 0 or n < 1:
        raise ValidationError("Step KL needs eta > 0, beta > 0 and n >= 1",
                              param_info=f"eta = {eta}, beta = {beta}, n = {n}")
    if not 0.0 <= theta_val <= 1.0:
        raise ValidationError("θ value must lie in [0, 1]", param_info=f"theta = {theta_val}")


def step_kl(eta, beta, n, zeta, indicator, theta_val):
    """
    KL between the posterior and prior step laws, β·η·(indicator − θ)²·‖ζ‖² / (4n²).
    """
    _check_step_inputs(eta, beta, n, theta_val)
    if indicator not in (0, 1):
        raise ValidationError("Indicator must be 0 or 1", param_info=f"indicator = {indicator}")
    zeta = np.asarray(zeta, dtype=float)
    return beta * eta * (indicator - theta_val) ** 2 * float(np.dot(zeta.ravel(), zeta.ravel())) / (4.0 * n * n)


def gaussian_kl_same_cov(mu_q, mu_p, variance):
    """KL(N(μ_q, σ²I) ‖ N(μ_p, σ²I)) = ‖μ_q − μ_p‖² / (2σ²)."""
    if variance <= 0:
        raise ValidationError("Variance must be positive", param_info=f"variance = {variance}")
    diff = np.asarray(mu_q, dtype=float) - np.asarray(mu_p, dtype=float)
    return float(np.dot(diff.ravel(), diff.ravel())) / (2.0 * variance)


def make_record(t, eta, beta, n, zeta, indicator, theta_val) -> StepKLRecord:
    zeta = np.asarray(zeta, dtype=float)
    zeta_sq = float(np.dot(zeta.ravel(), zeta.ravel()))
    summand = beta * eta * zeta_sq * (indicator - theta_val) ** 2
    return StepKLRecord(t, zeta_sq, float(theta_val), int(indicator),
                        step_kl(eta, beta, n, zeta, indicator, theta_val), summand)


@dataclass(frozen=True, eq=False)
class BranchStatistics:
    """
    Per-step quantities of one Langevin branch that every θ can be scored on.

    delta_y[t] is built from the increments of steps before t, so it only
    depends on W_0..W_t; delta_y[0] = 0.
    """
    indicator: int
    beta_eta: np.ndarray
    zeta_sq: np.ndarray
    delta_y: np.ndarray
    y_increments: np.ndarray  # (T, 2)
    n: int

    @property
    def T(self):
        return self.beta_eta.shape[0]

    def test_error_sq(self, theta: DecisionFunction):
        """(1{U_J=1} − θ(ΔY_t))² per step."""
        return (self.indicator - theta(self.delta_y)) ** 2

    def summands(self, theta: DecisionFunction):
        return self.beta_eta * self.zeta_sq * self.test_error_sq(theta)

    def records(self, theta: DecisionFunction) -> List[StepKLRecord]:
        theta_vals = theta(self.delta_y)
        summands = self.summands(theta)
        return [StepKLRecord(t, float(self.zeta_sq[t]), float(theta_vals[t]), self.indicator,
                             float(summands[t]) / (4.0 * self.n ** 2), float(summands[t]))
                for t in range(self.T)]


def branch_statistics(trajectory) -> BranchStatistics:
    """
    Test statistics and ‖ζ_t‖² for a recorded trajectory.

    The increments match ``update_y`` applied step by step.
    """
    n = trajectory.n
    eta = trajectory.schedule.eta[:, None]
    beta = trajectory.schedule.beta[:, None]
    base = np.diff(trajectory.params, axis=0) + eta * ((n - 1) / n) * trajectory.loo_grads
    increments = np.empty((trajectory.T, 2))
    for u in range(2):
        residual = base + (eta / n) * trajectory.cand_grads[:, u]
        increments[:, u] = (beta[:, 0] / (4.0 * eta[:, 0])) * np.einsum('td,td->t', residual, residual)
    cumulative = np.cumsum(increments[:, 1] - increments[:, 0])
    delta_y = np.concatenate([[0.0], cumulative[:-1]]) if trajectory.T else np.zeros(0)
    zeta = trajectory.zeta
    return BranchStatistics(
        indicator=1 if trajectory.u_j_value == 1 else 0,
        beta_eta=trajectory.schedule.beta_eta(),
        zeta_sq=np.einsum('td,td->t', zeta, zeta),
        delta_y=delta_y,
        y_increments=increments,
        n=n,
    )


def _as_cells(records):
    cells = []
    for cell in records:
        cell = list(cell)
        if cell and isinstance(cell[0], StepKLRecord):
            cell = [cell]
        cells.append(cell)
    return cells


def accumulate_bound(records, n):
    """
    (1/(n√2)) · mean over cells of √(mean over the cell's trajectories of Σ_t summand_t).

    Args:
        records: One entry per conditioning cell (supersample, U, J); each
            entry is a list of trajectories (lists of StepKLRecord) or a
            single trajectory
        n: Training set size

    Raises:
        ValidationError: no records
    """
    cells = _as_cells(records)
    if not cells or any(len(cell) == 0 for cell in cells):
        raise ValidationError("accumulate_bound needs at least one trajectory per cell",
                              param_info=f"cells = {len(cells)}")
    inner = [np.mean([sum(r.summand for r in trajectory) for trajectory in cell]) for cell in cells]
    return float(np.mean(np.sqrt(inner))) / (n * math.sqrt(2.0))


def bound_curve(summands, n):
    """
    Per-iteration bound from summands shaped (cells, T) or (cells, replicates, T).

    Replicates are noise draws within one conditioning cell; their partial
    sums are averaged before the square root.

    Returns:
        Array of length T; entry t uses the partial sums up to t
    """
    if len(summands) == 0:
        raise ValidationError("bound_curve needs at least one cell")
    summands = np.atleast_2d(np.asarray(summands, dtype=float))
    if summands.ndim == 2:
        summands = summands[:, None, :]
    if summands.ndim != 3 or summands.shape[1] == 0:
        raise ValidationError("bound_curve expects (cells, T) or (cells, replicates, T) summands",
                              param_info=f"shape = {summands.shape}")
    inner = np.cumsum(summands, axis=2).mean(axis=1)
    return np.sqrt(inner).mean(axis=0) / (n * math.sqrt(2.0))


def two_branch_bound(v1, v2, n):
    """(V_1 + V_2) / (2√2 n) with V_u = √(Σ_t summand_t) of branch u."""
    return (v1 + v2) / (2.0 * math.sqrt(2.0) * n)


def kl_form_bound(per_cell_kls, weights=None):
    """
    Weighted mean of √(2·KL) over conditioning cells.

    Raises:
        ValidationError: negative KL or mismatched weights
    """
    kls = np.asarray(per_cell_kls, dtype=float).ravel()
    if np.any(kls < 0):
        raise ValidationError("KL values must be nonnegative", param_info=f"min = {kls.min()}")
    if weights is None:
        weights = np.full(kls.size, 1.0 / max(kls.size, 1))
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.shape != kls.shape:
        raise ValidationError("Weights must align with the KL values",
                              param_info=f"{weights.size} weights, {kls.size} KLs")
    return float(np.sum(weights * np.sqrt(2.0 * kls)))


@dataclass(frozen=True)
class GaussianStep:
    """Step law W_{t+1} = W_t + drift + N(0, variance·I)."""
    drift: Sequence[float]
    variance: float


def _chain_kls(q_steps, p_steps):
    if len(q_steps) != len(p_steps):
        raise ValidationError("Posterior and prior chains have different horizons",
                              param_info=f"{len(q_steps)} vs {len(p_steps)} steps")
    step_kls, drift_gap, total_var = [], 0.0, 0.0
    for q, p in zip(q_steps, p_steps):
        if q.variance != p.variance:
            raise ValidationError("Chain rule check needs equal step covariances",
                                  param_info=f"{q.variance} vs {p.variance}")
        step_kls.append(gaussian_kl_same_cov(q.drift, p.drift, q.variance))
        drift_gap = drift_gap + (np.asarray(q.drift, dtype=float) - np.asarray(p.drift, dtype=float))
        total_var += q.variance
    if not step_kls:
        return 0.0, 0.0
    return gaussian_kl_same_cov(drift_gap, 0.0, total_var), float(sum(step_kls))


def chain_rule_check(q_steps, p_steps, weights=None):
    """
    Terminal KL(Q_T ‖ P_T) against the summed per-step KLs for Gaussian random walks.

    Both chains start from the same W_0. With ``weights``, ``q_steps`` and
    ``p_steps`` are lists of chains and both sides are weighted averages.

    Returns:
        Tuple (terminal KL, summed step KL)

    Raises:
        InvariantViolation: the terminal KL exceeds the summed step KL
    """
    if weights is None:
        lhs, rhs = _chain_kls(q_steps, p_steps)
    else:
        if not (len(weights) == len(q_steps) == len(p_steps)):
            raise ValidationError("One weight per chain is required")
        pairs = [_chain_kls(q, p) for q, p in zip(q_steps, p_steps)]
        lhs = float(sum(w * l for w, (l, _) in zip(weights, pairs)))
        rhs = float(sum(w * r for w, (_, r) in zip(weights, pairs)))
    if lhs > rhs + CHAIN_RULE_TOL:
        raise InvariantViolation("chain-rule", "Terminal KL exceeds the summed step KL",
                                 param_info=f"lhs = {lhs:.6g}, rhs = {rhs:.6g}")
    return lhs, rhs


def _replicate_cells(branches):
    cells = []
    for cell in branches:
        cell = [cell] if isinstance(cell, BranchStatistics) else list(cell)
        if not cell:
            raise ValidationError("Every cell needs at least one replicate")
        cells.append(cell)
    return cells


def theta_family_objective(theta: DecisionFunction, branches, n):
    """
    Final-iteration bound for one θ.

    Each entry of ``branches`` is one conditioning cell: a BranchStatistics
    or a list of noise replicates of it. The value is
    (1/(n√2))·mean over cells of √(mean over replicates of Σ summands).
    """
    if not branches:
        raise ValidationError("θ objective needs at least one branch")
    cells = _replicate_cells(branches)
    totals = np.array([np.mean([b.summands(theta).sum() for b in cell]) for cell in cells])
    return float(np.mean(np.sqrt(totals))) / (n * math.sqrt(2.0))


def search_scale(kind, branches, n, grid):
    """
    Minimize the objective over a for a scaled θ family.

    Scans the grid in order (ties go to the smallest a, the steepest θ), then refines
    around an interior minimum by golden-section search in log a.

    Returns:
        Tuple (a, objective)
    """
    grid = np.asarray(sorted(grid), dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValidationError("Scale grid must be nonempty and positive", param_info=f"grid = {grid.tolist()}")
    values = np.array([theta_family_objective(DecisionFunction(kind, a), branches, n) for a in grid])
    best = int(np.argmin(values))
    a_best, v_best = float(grid[best]), float(values[best])
    if 0 < best < grid.size - 1 and values[best] < values[best - 1] and values[best] < values[best + 1]:
        def objective(log_a):
            return theta_family_objective(DecisionFunction(kind, math.exp(log_a)), branches, n)

        bracket = (math.log(grid[best - 1]), math.log(grid[best]), math.log(grid[best + 1]))
        try:
            result = minimize_scalar(objective, bracket=bracket, method='golden')
            if result.fun < v_best - 1e-15:
                a_best, v_best = math.exp(result.x), float(result.fun)
        except ValueError as e:
            logger.debug(f"Golden-section refinement skipped: {e}")
    return a_best, v_best


def log_grid(a_min=1e-3, a_max=1e3, points=25):
    if a_min <= 0 or a_max <= a_min or points < 1:
        raise ValidationError("Scale grid needs 0 < a_min < a_max and at least one point",
                              param_info=f"a_min = {a_min}, a_max = {a_max}, points = {points}")
    return np.geomspace(a_min, a_max, int(points))
