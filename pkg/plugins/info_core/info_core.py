"""
Exact information measures over finite probability spaces.

Entropy, KL divergence, mutual information, conditional and disintegrated
mutual information, all computed by full enumeration of a joint table.
Every quantity is in nats. Conventions: 0·log 0 = 0, and KL(q‖p) is +inf
whenever q puts mass where p does not.

Joint laws are stored as a flat row-major probability vector plus a dims
vector, one axis per random variable.
"""
import math
import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence, Tuple

import numpy as np

from plugins.common.errors import ValidationError

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12
LOG2 = math.log(2.0)


def _check_weights(probs, what):
    probs = np.asarray(probs, dtype=float).ravel()
    if probs.size == 0:
        raise ValidationError(f"{what} has no support", suggestion="Provide at least one weight.")
    if not np.all(np.isfinite(probs)):
        raise ValidationError(f"{what} contains non-finite weights")
    if np.any(probs < 0):
        raise ValidationError(
            f"{what} contains negative weights",
            param_info=f"min weight = {probs.min()}",
            suggestion="Probabilities must be nonnegative."
        )
    total = probs.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ValidationError(
            f"{what} is not normalized",
            param_info=f"sum = {total!r}",
            suggestion="Weights must sum to 1; pass normalize=True to renormalize explicitly."
        )
    return probs


@dataclass(frozen=True, eq=False)
class FinitePmf:
    """Probability mass function on {0, ..., support_size-1}."""
    probs: np.ndarray

    def __init__(self, probs, normalize=False):
        probs = np.asarray(probs, dtype=float).ravel()
        if normalize:
            total = probs.sum()
            if total <= 0:
                raise ValidationError("Cannot normalize weights with nonpositive total")
            probs = probs / total
        object.__setattr__(self, 'probs', _check_weights(probs, "pmf"))
        self.probs.setflags(write=False)

    @property
    def support_size(self):
        return self.probs.size


@dataclass(frozen=True, eq=False)
class FiniteJointPmf:
    """Joint pmf of several finite random variables, one axis each."""
    dims: Tuple[int, ...]
    probs: np.ndarray

    def __init__(self, dims, probs, normalize=False):
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 1 for d in dims):
            raise ValidationError("Joint pmf needs at least one axis with positive size",
                                  param_info=f"dims = {dims}")
        probs = np.asarray(probs, dtype=float).ravel()
        if probs.size != math.prod(dims):
            raise ValidationError(
                "Joint pmf size does not match its dims",
                param_info=f"dims = {dims}, len(probs) = {probs.size}",
                suggestion="probs must be the flat row-major table of shape dims."
            )
        if normalize:
            total = probs.sum()
            if total <= 0:
                raise ValidationError("Cannot normalize weights with nonpositive total")
            probs = probs / total
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'probs', _check_weights(probs, "joint pmf"))
        self.probs.setflags(write=False)

    @classmethod
    def from_table(cls, table, normalize=False):
        table = np.asarray(table, dtype=float)
        return cls(table.shape, table.ravel(), normalize=normalize)

    @property
    def table(self):
        return self.probs.reshape(self.dims)

    @property
    def n_axes(self):
        return len(self.dims)

    def marginal(self, axes):
        """Joint pmf of the given axes, in the order given."""
        return FiniteJointPmf.from_table(marginal_table(self.table, axes))

    def swap(self, a=0, b=1):
        order = list(range(self.n_axes))
        order[a], order[b] = order[b], order[a]
        return FiniteJointPmf.from_table(np.transpose(self.table, order))


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """Probability kernel: one target pmf per configuration of the conditioning variables."""
    given_dims: Tuple[int, ...]
    target_dim: int
    rows: np.ndarray

    def __init__(self, given_dims, rows):
        given_dims = tuple(int(d) for d in given_dims)
        rows = np.asarray(rows, dtype=float)
        n_rows = math.prod(given_dims)
        if rows.ndim != 2 or rows.shape[0] != n_rows:
            raise ValidationError(
                "Conditional table shape does not match conditioning dims",
                param_info=f"given_dims = {given_dims}, rows shape = {rows.shape}",
                suggestion=f"Provide {n_rows} rows, one per conditioning configuration."
            )
        for i, row in enumerate(rows):
            try:
                _check_weights(row, f"row {i}")
            except ValidationError as e:
                raise ValidationError(f"Conditional table {e.message}", e.param_info, e.suggestion)
        object.__setattr__(self, 'given_dims', given_dims)
        object.__setattr__(self, 'target_dim', rows.shape[1])
        object.__setattr__(self, 'rows', rows)
        self.rows.setflags(write=False)

    def row(self, index):
        return FinitePmf(self.rows[index])


def as_pmf(p):
    return p if isinstance(p, FinitePmf) else FinitePmf(p)


def as_joint(joint):
    if isinstance(joint, FiniteJointPmf):
        return joint
    return FiniteJointPmf.from_table(joint)


def marginal_table(table, axes):
    """Sum out every axis not in ``axes`` and order the rest as given."""
    axes = list(axes)
    drop = tuple(a for a in range(table.ndim) if a not in axes)
    reduced = table.sum(axis=drop) if drop else table
    kept = [a for a in range(table.ndim) if a in axes]
    return np.transpose(reduced, [kept.index(a) for a in axes])


def _xlogx_ratio(p, q):
    """Elementwise p·log(p/q) with 0·log(0/q) = 0 and +inf where p>0, q=0."""
    p = np.asarray(p, dtype=float)
    q = np.broadcast_to(np.asarray(q, dtype=float), p.shape)
    out = np.zeros_like(p)
    support = p > 0
    blocked = support & (q <= 0)
    if np.any(blocked):
        return np.full_like(p, np.inf)
    out[support] = p[support] * np.log(p[support] / q[support])
    return out


def to_bits(nats):
    return nats / LOG2


def entropy(p):
    """
    Shannon entropy H(p) = −Σ p_i log p_i in nats.

    Args:
        p: FinitePmf or weight vector

    Returns:
        Nonnegative entropy
    """
    probs = as_pmf(p).probs
    nz = probs[probs > 0]
    return max(0.0, float(-np.sum(nz * np.log(nz))))


def kl_divergence(q, p):
    """
    KL(q‖p) = Σ q_i log(q_i/p_i), +inf when q_i > 0 = p_i.
    """
    q, p = as_pmf(q), as_pmf(p)
    if q.support_size != p.support_size:
        raise ValidationError(
            "KL divergence needs pmfs on the same support",
            param_info=f"sizes {q.support_size} and {p.support_size}"
        )
    terms = _xlogx_ratio(q.probs, p.probs)
    if np.isinf(terms).any():
        return math.inf
    return max(0.0, float(terms.sum()))


def joint_entropy(joint, axes=None):
    joint = as_joint(joint)
    axes = range(joint.n_axes) if axes is None else axes
    return entropy(marginal_table(joint.table, axes).ravel())


def conditional_entropy(joint, target_axes, given_axes=()):
    """H(target | given) = H(target, given) − H(given)."""
    joint = as_joint(joint)
    target_axes, given_axes = list(target_axes), list(given_axes)
    h_all = joint_entropy(joint, target_axes + given_axes)
    h_given = joint_entropy(joint, given_axes) if given_axes else 0.0
    return max(0.0, h_all - h_given)


def group_information(joint, a_axes: Sequence[int], b_axes: Sequence[int], c_axes: Sequence[int] = ()):
    """
    I(A;B|C) for groups of axes, computed as a direct KL sum.

    Σ p(a,b,c) log[p(a,b,c) p(c) / (p(a,c) p(b,c))]
    """
    joint = as_joint(joint)
    a_axes, b_axes, c_axes = list(a_axes), list(b_axes), list(c_axes)
    if set(a_axes) & set(b_axes) or set(a_axes) & set(c_axes) or set(b_axes) & set(c_axes):
        raise ValidationError("Axis groups must be disjoint",
                              param_info=f"A={a_axes}, B={b_axes}, C={c_axes}")
    table = joint.table
    sa = math.prod(joint.dims[i] for i in a_axes)
    sb = math.prod(joint.dims[i] for i in b_axes)
    sc = math.prod(joint.dims[i] for i in c_axes) if c_axes else 1
    abc = marginal_table(table, a_axes + b_axes + c_axes).reshape(sa, sb, sc)
    ac = abc.sum(axis=1, keepdims=True)
    bc = abc.sum(axis=0, keepdims=True)
    c = abc.sum(axis=(0, 1), keepdims=True)
    denominator = ac * bc
    numerator = abc * c
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(abc > 0, numerator / np.where(denominator > 0, denominator, 1.0), 1.0)
        terms = np.where(abc > 0, abc * np.log(ratio), 0.0)
    return max(0.0, float(terms.sum()))


def mutual_information(joint):
    """
    I(X;Y) = KL(P_XY ‖ P_X ⊗ P_Y) for a two-axis joint.
    """
    joint = as_joint(joint)
    if joint.n_axes != 2:
        raise ValidationError("mutual_information expects a two-axis joint",
                              param_info=f"dims = {joint.dims}")
    return group_information(joint, [0], [1])


def conditional_mutual_information(joint):
    """
    I(X;Y|Z) for a three-axis joint over (X, Y, Z).
    """
    joint = as_joint(joint)
    if joint.n_axes != 3:
        raise ValidationError("conditional_mutual_information expects a three-axis joint",
                              param_info=f"dims = {joint.dims}")
    return group_information(joint, [0], [1], [2])


def conditional_slice(joint, z_index, z_axis=-1):
    """
    Conditional joint of the remaining axes given axis ``z_axis`` = ``z_index``.

    Raises:
        ValidationError: if the conditioning value has zero probability
    """
    joint = as_joint(joint)
    table = np.moveaxis(joint.table, z_axis, -1)
    if not 0 <= z_index < table.shape[-1]:
        raise ValidationError("Conditioning index out of range",
                              param_info=f"z_index = {z_index}, size = {table.shape[-1]}")
    sl = table[..., z_index]
    mass = sl.sum()
    if mass <= 0:
        raise ValidationError(
            "Cannot condition on a zero-probability value",
            param_info=f"Pr[Z={z_index}] = 0",
            suggestion="Disintegrated MI is only defined on the support of Z."
        )
    return FiniteJointPmf.from_table(sl / mass, normalize=True)


def disintegrated_mi(joint, z_index):
    """
    Mutual information of (X, Y) under the conditional law given Z = z_index.
    """
    joint = as_joint(joint)
    if joint.n_axes != 3:
        raise ValidationError("disintegrated_mi expects a three-axis joint",
                              param_info=f"dims = {joint.dims}")
    return mutual_information(conditional_slice(joint, z_index))


def disintegrated_profile(joint):
    """
    Pr[Z=z] and the disintegrated MI for every z on the support of Z.

    Returns:
        Tuple (weights, values) of equal-length arrays
    """
    joint = as_joint(joint)
    z_probs = marginal_table(joint.table, [2])
    support = np.flatnonzero(z_probs > 0)
    values = np.array([disintegrated_mi(joint, int(z)) for z in support])
    return z_probs[support], values


def averaged_subset_entropy(joint, k):
    """
    (1/(k·C(n,k))) Σ_{|T|=k} H(X_T | Y) for a joint over (X_1..X_n, Y).

    The last axis is Y. The sequence over k = 1..n is nonincreasing
    (conditional Han inequality).
    """
    joint = as_joint(joint)
    n = joint.n_axes - 1
    if n < 1:
        raise ValidationError("Joint must have at least one X axis besides Y",
                              param_info=f"dims = {joint.dims}")
    if not 1 <= k <= n:
        raise ValidationError("Subset size out of range",
                              param_info=f"k = {k}, n = {n}",
                              suggestion=f"Use 1 <= k <= {n}.")
    y_axis = n
    h_y = joint_entropy(joint, [y_axis])
    subsets = list(combinations(range(n), k))
    total = sum(joint_entropy(joint, list(t) + [y_axis]) - h_y for t in subsets)
    return total / (k * len(subsets))


def joint_from_dict(data, normalize=False):
    """Build a joint pmf from ``{"dims": [...], "probs": [...]}``."""
    try:
        dims, probs = data["dims"], data["probs"]
    except (KeyError, TypeError):
        raise ValidationError("Joint pmf JSON needs 'dims' and 'probs' keys",
                              suggestion='Use {"dims": [2, 2], "probs": [0.25, 0.25, 0.25, 0.25]}.')
    return FiniteJointPmf(dims, probs, normalize=normalize)


def joint_to_dict(joint):
    return {"dims": list(joint.dims), "probs": joint.probs.tolist()}


def random_joint(dims, rng):
    """Dirichlet(1,...,1) joint on the given dims."""
    probs = rng.dirichlet(np.ones(math.prod(dims)))
    return FiniteJointPmf(dims, probs, normalize=True)
