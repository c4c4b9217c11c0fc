"""
Finite learning problems: data law, loss table and a stochastic algorithm
kernel from every ordered sample to a pmf over a finite hypothesis set.
"""
import math
import logging
from dataclasses import dataclass
from itertools import product

import numpy as np

from plugins.common.errors import ValidationError
from plugins.common.resources import guard_enumeration
from plugins.info_core.info_core import FinitePmf, ConditionalTable, as_pmf

logger = logging.getLogger(__name__)

ALGORITHM_KINDS = ("table", "constant", "identity", "randomized_response", "memorizing_mixture")


@dataclass(frozen=True, eq=False)
class FiniteLearningProblem:
    """
    Data pmf over Z, sample size n, loss table loss[w, z] in [0, 1], and an
    algorithm kernel with one row per ordered sample (row-major over z_1..z_n).
    """
    data_pmf: FinitePmf
    n: int
    loss: np.ndarray
    algorithm: ConditionalTable
    name: str = "problem"

    def __post_init__(self):
        loss = np.asarray(self.loss, dtype=float)
        if self.n < 1:
            raise ValidationError("Sample size must be at least 1", param_info=f"n = {self.n}")
        if loss.ndim != 2 or loss.shape[1] != self.z_card:
            raise ValidationError(
                "Loss table must have shape (w_card, z_card)",
                param_info=f"loss shape = {loss.shape}, z_card = {self.z_card}"
            )
        if np.any(loss < 0) or np.any(loss > 1) or not np.all(np.isfinite(loss)):
            raise ValidationError(
                "Loss values must lie in [0, 1]",
                param_info=f"range = [{loss.min()}, {loss.max()}]",
                suggestion="Bounded-loss bounds need a [0,1]-valued loss."
            )
        expected = (self.z_card,) * self.n
        if tuple(self.algorithm.given_dims) != expected:
            raise ValidationError(
                "Algorithm kernel must have one row per ordered sample",
                param_info=f"given_dims = {self.algorithm.given_dims}, expected {expected}"
            )
        if self.algorithm.target_dim != loss.shape[0]:
            raise ValidationError(
                "Algorithm output size does not match the loss table",
                param_info=f"target_dim = {self.algorithm.target_dim}, w_card = {loss.shape[0]}"
            )
        loss.setflags(write=False)
        object.__setattr__(self, 'loss', loss)

    @property
    def z_card(self):
        return self.data_pmf.support_size

    @property
    def w_card(self):
        return self.algorithm.target_dim

    @property
    def n_samples(self):
        return self.z_card ** self.n

    def samples(self):
        """All ordered samples as an (z_card^n, n) integer array, row-major."""
        return np.array(list(product(range(self.z_card), repeat=self.n)), dtype=np.int64).reshape(-1, self.n)

    def sample_probs(self):
        samples = self.samples()
        return np.prod(self.data_pmf.probs[samples], axis=1)

    def population_risk(self):
        """R_D(w) for every hypothesis."""
        return self.loss @ self.data_pmf.probs

    def empirical_risk(self):
        """R_S(w) as a (z_card^n, w_card) table."""
        samples = self.samples()
        return self.loss[:, samples].mean(axis=2).T


def _kernel(rows, n, z_card):
    return ConditionalTable((z_card,) * n, np.asarray(rows, dtype=float))


def _guard_kernel(n, z_card, w_card):
    guard_enumeration(z_card ** n * w_card, "algorithm kernel")


def zero_one_loss(w_card, z_card):
    return (np.arange(w_card)[:, None] != np.arange(z_card)[None, :]).astype(float)


def constant_problem(n=1, z_card=2, w_card=2, data_pmf=None, output_pmf=None):
    """Algorithm that ignores the sample."""
    _guard_kernel(n, z_card, w_card)
    data_pmf = as_pmf(np.full(z_card, 1.0 / z_card) if data_pmf is None else data_pmf)
    output = np.full(w_card, 1.0 / w_card) if output_pmf is None else np.asarray(output_pmf, dtype=float)
    rows = np.tile(output, (z_card ** n, 1))
    return FiniteLearningProblem(data_pmf, n, zero_one_loss(w_card, z_card), _kernel(rows, n, z_card), name="constant")


def identity_problem(n=1, z_card=2, data_pmf=None):
    """
    Memorizing algorithm: W is the sample itself and loss(w, z) = 1{z not in w}.

    For n = 1 this is W = Z with the 0-1 loss 1{z != w}.
    """
    _guard_kernel(n, z_card, z_card ** n)
    data_pmf = as_pmf(np.full(z_card, 1.0 / z_card) if data_pmf is None else data_pmf)
    w_samples = np.array(list(product(range(z_card), repeat=n)), dtype=np.int64).reshape(-1, n)
    w_card = len(w_samples)
    loss = np.array([[0.0 if z in set(w_samples[w]) else 1.0 for z in range(z_card)] for w in range(w_card)])
    rows = np.eye(w_card)
    return FiniteLearningProblem(data_pmf, n, loss, _kernel(rows, n, z_card), name="identity")


def randomized_response_problem(flip=0.1, z_card=2, data_pmf=None):
    """n = 1; W = Z, replaced by a uniformly chosen other symbol with probability ``flip``."""
    if not 0.0 <= flip <= 1.0:
        raise ValidationError("Flip probability must lie in [0, 1]", param_info=f"flip = {flip}")
    data_pmf = as_pmf(np.full(z_card, 1.0 / z_card) if data_pmf is None else data_pmf)
    rows = np.full((z_card, z_card), flip / (z_card - 1))
    np.fill_diagonal(rows, 1.0 - flip)
    return FiniteLearningProblem(data_pmf, 1, zero_one_loss(z_card, z_card), _kernel(rows, 1, z_card),
                                 name="randomized_response")


def memorizing_mixture_problem(alpha=0.5, n=1, z_card=2, data_pmf=None):
    """With probability alpha memorize the sample, otherwise output a uniform hypothesis."""
    base = identity_problem(n=n, z_card=z_card, data_pmf=data_pmf)
    w_card = base.w_card
    rows = alpha * np.eye(w_card) + (1.0 - alpha) / w_card
    return FiniteLearningProblem(base.data_pmf, n, base.loss, _kernel(rows, n, z_card), name="memorizing_mixture")


def random_problem(seed, n=None, z_card=None, w_card=None, max_n=3, max_card=3):
    """
    Random problem: Dirichlet(1,...,1) data pmf and kernel rows, uniform [0,1] loss.

    Sizes not given are drawn uniformly from [1, max_n] and [2, max_card].
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_n + 1)) if n is None else n
    z_card = int(rng.integers(2, max_card + 1)) if z_card is None else z_card
    w_card = int(rng.integers(2, max_card + 1)) if w_card is None else w_card
    _guard_kernel(n, z_card, w_card)
    data_pmf = FinitePmf(rng.dirichlet(np.ones(z_card)), normalize=True)
    rows = rng.dirichlet(np.ones(w_card), size=z_card ** n)
    rows = rows / rows.sum(axis=1, keepdims=True)
    loss = rng.uniform(0.0, 1.0, size=(w_card, z_card))
    return FiniteLearningProblem(data_pmf, n, loss, _kernel(rows, n, z_card), name=f"random-{seed}")


def problem_from_dict(data):
    """
    Build a problem from a JSON-style dict.

    Either a full table (``data_pmf``, ``n``, ``loss``, ``algorithm`` rows)
    or a named builder via ``"kind"`` with its keyword parameters.
    """
    if not isinstance(data, dict):
        raise ValidationError("Problem config must be a JSON object")
    kind = data.get("kind", "table")
    if kind not in ALGORITHM_KINDS:
        raise ValidationError(
            f"Unknown problem kind: {kind}",
            suggestion=f"Allowed kinds are: {', '.join(ALGORITHM_KINDS)}"
        )
    try:
        if kind == "table":
            n = int(data["n"])
            data_pmf = FinitePmf(data["data_pmf"])
            return FiniteLearningProblem(data_pmf, n, np.asarray(data["loss"], dtype=float),
                                         _kernel(data["algorithm"], n, data_pmf.support_size),
                                         name=data.get("name", "table"))
        params = {k: v for k, v in data.items() if k not in ("kind", "name")}
        builder = {
            "constant": constant_problem,
            "identity": identity_problem,
            "randomized_response": randomized_response_problem,
            "memorizing_mixture": memorizing_mixture_problem,
        }[kind]
        return builder(**params)
    except KeyError as e:
        raise ValidationError(f"Problem config is missing key {e}",
                              suggestion="A table problem needs n, data_pmf, loss and algorithm.")
    except TypeError as e:
        raise ValidationError(f"Invalid parameters for problem kind '{kind}': {e}")


def problem_to_dict(problem):
    return {
        "kind": "table",
        "name": problem.name,
        "n": problem.n,
        "data_pmf": problem.data_pmf.probs.tolist(),
        "loss": problem.loss.tolist(),
        "algorithm": problem.algorithm.rows.tolist(),
    }


@dataclass(frozen=True)
class SuperSampleSpec:
    """Supersample of k rows by n columns."""
    k: int = 2
    n: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValidationError("Supersample rows k must be an integer >= 2", param_info=f"k = {self.k}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError("Supersample columns n must be an integer >= 1", param_info=f"n = {self.n}")
