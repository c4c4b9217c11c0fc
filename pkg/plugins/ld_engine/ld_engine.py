"""
Full-batch Langevin dynamics with trajectory recording.

W_{t+1} = W_t − η_t ∇L̃_S(W_t) + √(2η_t/β_t) ε_t

Runs are driven by the two-row supersample construction: the training set
takes row U_i of every column i, and the held-out column J can be forced to
either candidate so both branches of one repetition see the same data apart
from that point. Every random draw comes from a counter-based Philox stream
keyed by (seed, stream, counter), so single steps can be replayed.
"""
import math
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from plugins.common.errors import ValidationError
from plugins.common.resources import guard_enumeration
from plugins.common.serialization import write_csv
from plugins.model_zoo.model_zoo import Model, Dataset, DataPoint, as_dataset, empirical_risks

logger = logging.getLogger(__name__)

STREAM_INIT = 0
STREAM_NOISE = 1
STREAM_DATA = 2
STREAM_EVAL = 3


def _key(seed):
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return [int(seed)]


def stream_rng(seed, stream, *counter):
    """Philox generator for one (seed, stream, counter...) key."""
    entropy = _key(seed) + [int(stream)] + [int(c) for c in counter]
    if any(e < 0 for e in entropy):
        raise ValidationError("Seeds must be nonnegative integers", param_info=f"key = {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def step_noise(seed, t, dim):
    """Standard normal noise for step t of the run keyed by ``seed``."""
    return stream_rng(seed, STREAM_NOISE, t).standard_normal(dim)


@dataclass(frozen=True, eq=False)
class LDSchedule:
    """Per-step learning rates η_t and inverse temperatures β_t."""
    eta: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if eta.ndim != 1 or eta.shape != beta.shape:
            raise ValidationError("Schedule vectors must be one-dimensional and of equal length",
                                  param_info=f"eta {eta.shape}, beta {beta.shape}")
        for name, values in (("eta", eta), ("beta", beta)):
            if values.size and (not np.all(np.isfinite(values)) or np.any(values <= 0)):
                raise ValidationError(f"Every {name}_t must be finite and strictly positive",
                                      param_info=f"{name} range = [{values.min()}, {values.max()}]")
        eta.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, 'eta', eta)
        object.__setattr__(self, 'beta', beta)

    @property
    def T(self):
        return self.eta.shape[0]

    @classmethod
    def constant(cls, T, eta, beta):
        return cls(np.full(int(T), float(eta)), np.full(int(T), float(beta)))

    @classmethod
    def from_dict(cls, config):
        """
        ``{"T": 500, "eta": 0.01, "beta": 1e4}`` with optional step decay
        ``"eta_decay"``/``"decay_every"`` and ``"beta_growth"`` factors;
        ``eta`` and ``beta`` may also be explicit length-T lists.
        """
        try:
            T = int(config["T"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError("Schedule needs an integer T", suggestion='Use {"T": 500, "eta": 0.01, "beta": 1e4}.')
        if T < 0:
            raise ValidationError("Schedule length must be nonnegative", param_info=f"T = {T}")
        eta = config.get("eta", 0.01)
        beta = config.get("beta", 1e4)
        eta = np.asarray(eta, dtype=float) if isinstance(eta, list) else np.full(T, float(eta))
        beta = np.asarray(beta, dtype=float) if isinstance(beta, list) else np.full(T, float(beta))
        every = int(config.get("decay_every", 0))
        if every > 0:
            blocks = np.arange(T) // every
            eta = eta * float(config.get("eta_decay", 1.0)) ** blocks
            beta = beta * float(config.get("beta_growth", 1.0)) ** blocks
        if eta.shape != (T,) or beta.shape != (T,):
            raise ValidationError("Explicit eta/beta lists must have length T",
                                  param_info=f"T = {T}, len(eta) = {eta.size}, len(beta) = {beta.size}")
        return cls(eta, beta)

    def to_dict(self):
        return {"T": self.T, "eta": self.eta.tolist(), "beta": self.beta.tolist()}

    def beta_eta(self):
        return self.beta * self.eta


@dataclass(frozen=True, eq=False)
class SuperSamplePair:
    """
    Two-row supersample with membership vector u ∈ {1,2}^n and held-out column j (0-based).
    """
    rows: Tuple[Dataset, Dataset]
    u: np.ndarray
    j: int

    def __post_init__(self):
        first, second = self.rows
        u = np.asarray(self.u, dtype=np.int64)
        if len(first) != len(second) or len(first) < 1:
            raise ValidationError("Supersample rows must be nonempty and of equal length",
                                  param_info=f"row lengths {len(first)}, {len(second)}")
        if u.shape != (len(first),) or not np.all((u == 1) | (u == 2)):
            raise ValidationError("Membership vector must have one entry in {1, 2} per column",
                                  param_info=f"u = {u.tolist()}")
        if not 0 <= self.j < len(first):
            raise ValidationError("Held-out column out of range", param_info=f"j = {self.j}, n = {len(first)}")
        u.setflags(write=False)
        object.__setattr__(self, 'u', u)

    @property
    def n(self):
        return len(self.rows[0])

    def _pick(self, u):
        features = np.where((u == 1)[:, None], self.rows[0].features, self.rows[1].features)
        labels = np.where(u == 1, self.rows[0].labels, self.rows[1].labels)
        return Dataset(features, labels)

    def training_set(self, u_j_value=None):
        """S with column j taken from row ``u_j_value`` (default: U_j)."""
        u = self.u.copy()
        if u_j_value is not None:
            _check_branch(u_j_value)
            u[self.j] = u_j_value
        return self._pick(u)

    def candidates(self) -> Tuple[DataPoint, DataPoint]:
        return self.rows[0][self.j], self.rows[1][self.j]

    def others(self) -> Optional[Dataset]:
        """S_{J^c}: the n − 1 training points outside column j."""
        if self.n == 1:
            return None
        keep = np.arange(self.n) != self.j
        full = self._pick(self.u)
        return Dataset(full.features[keep], full.labels[keep])


def _check_branch(u_j_value):
    if u_j_value not in (1, 2):
        raise ValidationError("Branch value must be 1 or 2", param_info=f"u_j_value = {u_j_value}")


def sample_supersample(source, n, seed) -> SuperSamplePair:
    """
    Draw a 2×n supersample, U uniform on {1,2}^n and J uniform on columns.

    Raises:
        DataExhaustedError: a file-backed source has fewer than 2n points
    """
    if n < 1:
        raise ValidationError("Sample size must be at least 1", param_info=f"n = {n}")
    rng = stream_rng(seed, STREAM_DATA)
    points = source.draw(2 * n, rng)
    u = rng.integers(1, 3, size=n)
    j = int(rng.integers(n))
    return SuperSamplePair((points[:n], points[n:]), u, j)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Iterates W_0..W_T with the noise and the gradient aggregates of every step.

    cand_grads[t, 0] and cand_grads[t, 1] are ∇ℓ̃ at W_t for the two
    candidates of the held-out column; loo_grads[t] is ∇L̃_{S_{J^c}}(W_t) and
    train_grads[t] the full-batch gradient that drove the update.
    """
    params: np.ndarray
    noise: np.ndarray
    train_grads: np.ndarray
    cand_grads: np.ndarray
    loo_grads: np.ndarray
    schedule: LDSchedule
    seed: Tuple[int, ...]
    u_j_value: int
    n: int

    @property
    def T(self):
        return self.params.shape[0] - 1

    @property
    def zeta(self):
        return self.cand_grads[:, 0] - self.cand_grads[:, 1]

    def update_residuals(self):
        """W_{t+1} − W_t + η_t ∇L̃_S(W_t) − √(2η_t/β_t) ε_t for every step."""
        scale = np.sqrt(2.0 * self.schedule.eta / self.schedule.beta)[:, None]
        drift = self.schedule.eta[:, None] * self.train_grads
        return np.diff(self.params, axis=0) + drift - scale * self.noise


def _update(w, grad, eta, beta, noise):
    if eta <= 0 or beta <= 0:
        raise ValidationError("Learning rate and inverse temperature must be positive",
                              param_info=f"eta = {eta}, beta = {beta}")
    return w - eta * grad + math.sqrt(2.0 * eta / beta) * noise


def ld_step(model: Model, w_t, training_set, eta_t, beta_t, noise):
    """
    One Langevin step on the full training set.

    Args:
        model: The classifier
        w_t: Current parameters
        training_set: Dataset or sequence of DataPoint
        eta_t: Learning rate
        beta_t: Inverse temperature
        noise: Standard normal draw of dimension d

    Returns:
        W_{t+1}
    """
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (model.dim,):
        raise ValidationError("Noise dimension does not match the model",
                              param_info=f"noise shape {noise.shape}, d = {model.dim}")
    return _update(np.asarray(w_t, dtype=float), model.grad(w_t, training_set), eta_t, beta_t, noise)


def run_ld(model: Model, pair: SuperSamplePair, u_j_value, schedule: LDSchedule, seed,
           w0=None, init_seed=None, noise_fn: Optional[Callable[[int, int], np.ndarray]] = None) -> Trajectory:
    """
    Run full-batch Langevin dynamics on S with column j set to candidate ``u_j_value``.

    Args:
        model: The classifier
        pair: Supersample with membership vector and held-out column
        u_j_value: Which candidate (1 or 2) sits in column j
        schedule: Learning rates and inverse temperatures
        seed: Noise stream key (int or tuple of ints)
        w0: Initial parameters; drawn from the init stream when omitted
        init_seed: Key of the init stream (defaults to ``seed``)
        noise_fn: Replacement noise source ``(t, d) -> ε_t``

    Returns:
        Trajectory with parameters, noise and cached gradients
    """
    _check_branch(u_j_value)
    n, d, T = pair.n, model.dim, schedule.T
    guard_enumeration(6 * (T + 1) * d, "trajectory cache")

    if w0 is None:
        w0 = model.init_params(stream_rng(seed if init_seed is None else init_seed, STREAM_INIT))
    w = np.asarray(w0, dtype=float).copy()
    if w.shape != (d,):
        raise ValidationError("Initial parameters do not match the model",
                              param_info=f"w0 shape {w.shape}, d = {d}")
    noise_fn = (lambda t, dim: step_noise(seed, t, dim)) if noise_fn is None else noise_fn

    first, second = pair.candidates()
    others = pair.others()
    params = np.empty((T + 1, d))
    noise = np.empty((T, d))
    train_grads = np.empty((T, d))
    cand_grads = np.empty((T, 2, d))
    loo_grads = np.zeros((T, d))
    params[0] = w

    for t in range(T):
        cand_grads[t, 0] = model.grad(w, first)
        cand_grads[t, 1] = model.grad(w, second)
        if others is not None:
            loo_grads[t] = model.grad(w, others)
        train_grads[t] = ((n - 1) * loo_grads[t] + cand_grads[t, u_j_value - 1]) / n
        noise[t] = noise_fn(t, d)
        w = _update(w, train_grads[t], schedule.eta[t], schedule.beta[t], noise[t])
        if not np.all(np.isfinite(w)):
            raise ValidationError("Langevin iterates diverged",
                                  param_info=f"t = {t + 1}",
                                  suggestion="Lower eta or check the data scale.")
        params[t + 1] = w

    logger.debug(f"LD run: n={n}, d={d}, T={T}, branch={u_j_value}")
    return Trajectory(params, noise, train_grads, cand_grads, loo_grads, schedule,
                      tuple(_key(seed)), int(u_j_value), n)


def risk_curves(model: Model, trajectory: Trajectory, data):
    """Surrogate and 0-1 risk of every iterate on ``data``, each shape (T+1,)."""
    data = as_dataset(data)
    risks = np.array([empirical_risks(model, w, data) for w in trajectory.params])
    return risks[:, 0], risks[:, 1]


def write_trajectory_csv(path, model: Model, trajectory: Trajectory, train_set, eval_set=None):
    """
    Per-iterate summary: t, surrogate risk, 0-1 train/test risk and gradient norms.
    """
    surrogate, train01 = risk_curves(model, trajectory, train_set)
    test01 = risk_curves(model, trajectory, eval_set)[1] if eval_set is not None else [None] * (trajectory.T + 1)
    grad_norm = np.linalg.norm(trajectory.train_grads, axis=1)
    zeta_norm = np.linalg.norm(trajectory.zeta, axis=1)
    columns = ["t", "surrogate", "train01", "test01", "grad_norm", "zeta_norm"]
    rows = [[t, surrogate[t], train01[t], test01[t],
             grad_norm[t] if t < trajectory.T else None,
             zeta_norm[t] if t < trajectory.T else None] for t in range(trajectory.T + 1)]
    write_csv(path, columns, rows)
    logger.info(f"Wrote trajectory summary to {path}")


def dump_trajectory(path, trajectory: Trajectory):
    """Full binary dump of a trajectory (numpy .npz, compressed)."""
    np.savez_compressed(
        path,
        params=trajectory.params, noise=trajectory.noise, train_grads=trajectory.train_grads,
        cand_grads=trajectory.cand_grads, loo_grads=trajectory.loo_grads,
        eta=trajectory.schedule.eta, beta=trajectory.schedule.beta,
        seed=np.asarray(trajectory.seed), u_j_value=trajectory.u_j_value, n=trajectory.n,
    )
    logger.info(f"Dumped trajectory to {path}")
