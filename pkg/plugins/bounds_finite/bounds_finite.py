"""
Exact generalization bounds for finite learning problems.

Everything here is computed by full enumeration of samples, supersamples
and selection variables, so the bounds can be checked against the exact
expected generalization error:

- input-output mutual information (IOMI) and its √(IOMI/(2n)) bound
- conditional mutual information with k rows per column (CMI^k) and √(2·CMI^k/n)
- the decomposition IOMI = I(W; Z̃) + CMI^k
- random-subset bounds with the disintegrated quantity inside the square root
- individual-sample and optimal-prior KL-form bounds
- Fano lower bound on membership inference and the exact MAP decoder error
- the sharper-constant bound for k > 2 via the Lambert W function
"""
import math
import logging
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from itertools import combinations, product
from typing import Dict, List, Optional

import numpy as np
import sympy

from plugins.common.errors import ValidationError, DomainError, InvariantViolation
from plugins.common.resources import guard_enumeration
from plugins.info_core.info_core import (
    FiniteJointPmf, group_information, conditional_mutual_information,
    mutual_information, averaged_subset_entropy, LOG2,
)
from plugins.bounds_finite.lambert import lambert_w0
from plugins.bounds_finite.problems import FiniteLearningProblem, SuperSampleSpec
from plugins.ht_prior.ht_prior import kl_form_bound

logger = logging.getLogger(__name__)

DECOMPOSITION_TOL = 1e-10
VALIDITY_TOL = 1e-10
LIMIT_SCAN_KS = (2, 3, 4)
LIMIT_SCAN_TERMS = 10**6
EXPM1_MAX = 709.0


@dataclass(frozen=True, eq=False)
class SupersampleTable:
    """
    Enumerated supersample experiment for one problem and k.

    kernel[a, b] is the algorithm's output pmf on the training sample picked
    from supersample a by selection vector b.
    """
    k: int
    supersamples: np.ndarray  # (N_z, k, n)
    selections: np.ndarray  # (N_u, n)
    supersample_probs: np.ndarray  # (N_z,)
    kernel: np.ndarray  # (N_z, N_u, w_card)

    @property
    def n(self):
        return self.selections.shape[1]

    def weights(self):
        """Pr[Z̃ = a, U = b] as an (N_z, N_u) array."""
        return self.supersample_probs[:, None] / self.selections.shape[0]

    def joint(self):
        """Joint pmf over the axes (W, U, Z̃)."""
        table = self.weights()[:, :, None] * self.kernel
        return FiniteJointPmf.from_table(np.transpose(table, (2, 1, 0)), normalize=True)

    def kernel_by_column(self):
        """Kernel reshaped to (N_z, k, ..., k, w_card) with one selection axis per column."""
        return self.kernel.reshape((self.kernel.shape[0],) + (self.k,) * self.n + (self.kernel.shape[2],))


@dataclass
class Decomposition:
    iomi: float
    supersample_mi: float
    cmi: float
    k: int

    @property
    def residual(self):
        return self.iomi - (self.supersample_mi + self.cmi)


@dataclass
class SubsetBound:
    """Random-subset bound for subsets of size m."""
    m: int
    rate: float
    bound: float
    jensen_bound: float


@dataclass
class ExactBoundReport:
    """Exact quantities and every bound for one finite problem."""
    name: str
    n: int
    k: int
    ege: float
    iomi: float
    cmi: float
    cmi_k: float
    supersample_mi: float
    bound_iomi: float
    bound_cmi: float
    bound_cmi_k: float
    subset_bounds: List[SubsetBound] = field(default_factory=list)
    individual_bound: float = 0.0
    kl_form_bound: float = 0.0
    improved_constant_bound: Optional[float] = None
    fano_lower: float = 0.0
    map_error: float = 0.0
    cmi_limit: List[tuple] = field(default_factory=list)
    optimal_prior_gap: float = 0.0
    han_profile: List[float] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def bounds(self) -> Dict[str, float]:
        """Every upper bound on the expected generalization error, by name."""
        named = {
            "iomi": self.bound_iomi,
            "cmi": self.bound_cmi,
            "cmi_k": self.bound_cmi_k,
            "individual": self.individual_bound,
            "kl_form": self.kl_form_bound,
        }
        for sb in self.subset_bounds:
            named[f"subset_m{sb.m}"] = sb.bound
            named[f"subset_m{sb.m}_jensen"] = sb.jensen_bound
        if self.improved_constant_bound is not None:
            named["improved_constant"] = self.improved_constant_bound
        return named


def _check_k(k):
    if isinstance(k, SuperSampleSpec):
        return k.k
    if int(k) != k or k < 2:
        raise ValidationError("Supersample rows k must be an integer >= 2", param_info=f"k = {k}")
    return int(k)


def _sample_joint(problem: FiniteLearningProblem):
    guard_enumeration(problem.n_samples * problem.w_card, "sample enumeration")
    return problem.sample_probs()[:, None] * problem.algorithm.rows


def supersample_table(problem: FiniteLearningProblem, k=2) -> SupersampleTable:
    """
    Enumerate every supersample of shape (k, n) and every selection vector.

    Raises:
        ResourceExceededError: z_card^(k·n) · k^n · w_card exceeds the budget
    """
    k = _check_k(k)
    n, z_card = problem.n, problem.z_card
    guard_enumeration(z_card ** (k * n) * k ** n * problem.w_card, f"supersample enumeration (k={k}, n={n})")

    supersamples = np.array(list(product(range(z_card), repeat=k * n)), dtype=np.int64).reshape(-1, k, n)
    selections = np.array(list(product(range(k), repeat=n)), dtype=np.int64).reshape(-1, n)
    probs = np.prod(problem.data_pmf.probs[supersamples], axis=(1, 2))

    powers = z_card ** np.arange(n - 1, -1, -1)
    sample_index = np.zeros((len(supersamples), len(selections)), dtype=np.int64)
    for i in range(n):
        sample_index += supersamples[:, selections[:, i], i] * powers[i]
    kernel = problem.algorithm.rows[sample_index]
    return SupersampleTable(k, supersamples, selections, probs, kernel)


def exact_ege(problem: FiniteLearningProblem):
    """
    Expected generalization error E[R_D(W) − R_S(W)].
    """
    joint = _sample_joint(problem)
    gap = problem.population_risk()[None, :] - problem.empirical_risk()
    return float(np.sum(joint * gap))


def exact_iomi(problem: FiniteLearningProblem):
    """I(W; S) in nats."""
    return mutual_information(FiniteJointPmf.from_table(_sample_joint(problem).T, normalize=True))


def exact_cmi_k(problem: FiniteLearningProblem, k=2, table: Optional[SupersampleTable] = None):
    """I(W; U | Z̃) for the k-row supersample, in nats."""
    table = supersample_table(problem, k) if table is None else table
    return conditional_mutual_information(table.joint())


def verify_decomposition(problem: FiniteLearningProblem, k=2, tol=DECOMPOSITION_TOL) -> Decomposition:
    """
    Check IOMI = I(W; Z̃) + CMI^k.

    Raises:
        InvariantViolation: the identity fails by more than ``tol``
    """
    table = supersample_table(problem, k)
    joint = table.joint()
    result = Decomposition(
        iomi=exact_iomi(problem),
        supersample_mi=group_information(joint, [0], [2]),
        cmi=conditional_mutual_information(joint),
        k=table.k,
    )
    if abs(result.residual) > tol:
        raise InvariantViolation(
            "decomposition",
            "IOMI differs from I(W; Z̃) + CMI",
            param_info=f"residual = {result.residual:.3e}, k = {table.k}"
        )
    logger.debug(f"Decomposition k={table.k}: IOMI={result.iomi:.6g} = {result.supersample_mi:.6g} + {result.cmi:.6g}")
    return result


def cmi_limit_scan(problem: FiniteLearningProblem, k_values):
    """
    CMI^k for each k in order; the gap to IOMI shrinks as k grows.

    Returns:
        List of (k, cmi_k) pairs
    """
    return [(_check_k(k), exact_cmi_k(problem, k)) for k in k_values]


def _supersample_terms(problem: FiniteLearningProblem, k):
    return problem.z_card ** (k * problem.n) * k ** problem.n * problem.w_card


def check_cmi_limit(scan, iomi, tol=VALIDITY_TOL):
    """
    CMI^k never exceeds IOMI and never decreases in k.

    Raises:
        InvariantViolation: either fails by more than ``tol``
    """
    previous = -math.inf
    for k, value in scan:
        if value > iomi + tol or value < previous - tol:
            raise InvariantViolation("cmi-limit", f"CMI^{k} is out of order on the way to IOMI",
                                     param_info=f"CMI^{k} = {value:.6g}, previous = {previous:.6g}, IOMI = {iomi:.6g}")
        previous = value


def han_profile(problem: FiniteLearningProblem):
    """
    Averaged conditional subset entropies of the sample given W, for subset sizes 1..n.

    Nonincreasing in the subset size.
    """
    joint = _sample_joint(problem).reshape((problem.z_card,) * problem.n + (problem.w_card,))
    joint = FiniteJointPmf.from_table(joint, normalize=True)
    return [averaged_subset_entropy(joint, m) for m in range(1, problem.n + 1)]


def bound_iomi(iomi, n):
    """√(IOMI/(2n)) for losses in [0, 1]."""
    if iomi < 0 or n < 1:
        raise DomainError("IOMI must be nonnegative and n >= 1", param_info=f"iomi = {iomi}, n = {n}")
    return math.sqrt(iomi / (2.0 * n))


def bound_cmi(cmi, n):
    """√(2·CMI/n) for losses in [0, 1]."""
    if cmi < 0 or n < 1:
        raise DomainError("CMI must be nonnegative and n >= 1", param_info=f"cmi = {cmi}, n = {n}")
    return math.sqrt(2.0 * cmi / n)


def _batched_mi(tables):
    """Mutual information of each (a, b) table in a (B, a, b) stack of normalized joints."""
    pa = tables.sum(axis=2, keepdims=True)
    pb = tables.sum(axis=1, keepdims=True)
    denominator = pa * pb
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(tables > 0, tables / np.where(denominator > 0, denominator, 1.0), 1.0)
        terms = np.where(tables > 0, tables * np.log(ratio), 0.0)
    return np.maximum(terms.sum(axis=(1, 2)), 0.0)


def _subset_information(table: SupersampleTable, subset):
    """I^{Z̃=a}(W; U_J) for every supersample a and the fixed subset J."""
    by_column = table.kernel_by_column() / table.selections.shape[0]
    n = table.n
    drop = tuple(1 + i for i in range(n) if i not in subset)
    reduced = by_column.sum(axis=drop) if drop else by_column
    flat = reduced.reshape(reduced.shape[0], -1, reduced.shape[-1])
    return _batched_mi(flat)


def _check_subset_size(m, n):
    if int(m) != m or not 1 <= m <= n:
        raise ValidationError("Subset size must satisfy 1 <= m <= n",
                              param_info=f"m = {m}, n = {n}",
                              suggestion=f"Pick m in 1..{n}.")
    return int(m)


def subset_cmi_bound(problem: FiniteLearningProblem, m, table: Optional[SupersampleTable] = None) -> SubsetBound:
    """
    Random-subset CMI bound for uniformly drawn J with |J| = m (k = 2).

    The disintegrated quantity I^{Z̃}(W; U_J | J) sits inside the square root
    and the expectation over Z̃ outside; the Jensen form moves it inside.

    Returns:
        SubsetBound with rate I(W; U_J | Z̃, J)/m, the bound and its Jensen form
    """
    m = _check_subset_size(m, problem.n)
    table = supersample_table(problem, 2) if table is None else table
    subsets = list(combinations(range(problem.n), m))
    disintegrated = np.mean([_subset_information(table, s) for s in subsets], axis=0)
    weights = table.supersample_probs
    rate = float(np.sum(weights * disintegrated)) / m
    bound = float(np.sum(weights * np.sqrt(2.0 * disintegrated / m)))
    return SubsetBound(m=m, rate=rate, bound=bound, jensen_bound=math.sqrt(2.0 * max(rate, 0.0)))


def monotonicity_check(problem: FiniteLearningProblem, m1, m2, tol=1e-10,
                       table: Optional[SupersampleTable] = None):
    """
    Whether the subset rate I(W; U_J | Z̃, J)/m is no larger at m1 than at m2.

    The rate is nondecreasing in m, so smaller subsets give tighter bounds.

    Raises:
        ValidationError: m1 >= m2
    """
    if m1 >= m2:
        raise ValidationError("monotonicity_check needs m1 < m2", param_info=f"m1 = {m1}, m2 = {m2}")
    table = supersample_table(problem, 2) if table is None else table
    r1 = subset_cmi_bound(problem, m1, table).rate
    r2 = subset_cmi_bound(problem, m2, table).rate
    holds = r1 <= r2 + tol
    if not holds:
        logger.warning(f"Subset rate decreased from m={m1} ({r1:.6g}) to m={m2} ({r2:.6g})")
    return holds


def individual_sample_bound(problem: FiniteLearningProblem, table: Optional[SupersampleTable] = None):
    """
    (1/n) Σ_i E_{Z̃} √(2·I^{Z̃}(W; U_i)), never above √(2·CMI/n).
    """
    table = supersample_table(problem, 2) if table is None else table
    weights = table.supersample_probs
    per_column = [float(np.sum(weights * np.sqrt(2.0 * _subset_information(table, (i,)))))
                  for i in range(problem.n)]
    return float(np.mean(per_column))


def _kl_rows(q, p):
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(q > 0, q / np.where(p > 0, p, 1.0), 1.0)
        return np.maximum(np.where(q > 0, q * np.log(ratio), 0.0).sum(axis=-1), 0.0)


def kl_form_subset_bound(problem: FiniteLearningProblem, table: Optional[SupersampleTable] = None):
    """
    E √(2·KL(Q ‖ P)) for single-column subsets with the optimal prior.

    Q is the algorithm's output law given (Z̃, U); P is the law of W given
    (Z̃, U_{J^c}, J), the average of Q over the held-out selection bit.
    """
    table = supersample_table(problem, 2) if table is None else table
    by_column = table.kernel_by_column()
    weights = table.weights().reshape((-1,) + (2,) * problem.n)
    total = 0.0
    for i in range(problem.n):
        prior = by_column.mean(axis=1 + i, keepdims=True)
        total += kl_form_bound(_kl_rows(by_column, prior), weights)
    return total / problem.n


def optimal_prior_check(problem: FiniteLearningProblem, table: Optional[SupersampleTable] = None):
    """
    Largest gap between E[KL(Q ‖ P) | cell] for the optimal prior and the
    disintegrated mutual information I^{cell}(W; U_J) over all cells
    (Z̃, U_{J^c}, J) with |J| = 1.
    """
    table = supersample_table(problem, 2) if table is None else table
    by_column = table.kernel_by_column()
    n = problem.n
    gap = 0.0
    for i in range(n):
        moved = np.moveaxis(by_column, 1 + i, -2)  # (N_z, rest..., 2, w)
        cells = moved.reshape(-1, 2, moved.shape[-1])
        prior = cells.mean(axis=1, keepdims=True)
        mean_kl = _kl_rows(cells, prior).mean(axis=1)
        for cell, value in zip(cells, mean_kl):
            dmi = mutual_information(FiniteJointPmf.from_table(cell / 2.0, normalize=True))
            gap = max(gap, abs(dmi - value))
    return gap


def fano_lower_bound(cmi, n, k=2):
    """
    Lower bound 1 − (CMI + log 2)/(n·log k) on the error of any estimator of U.
    """
    k = _check_k(k)
    if n < 1 or cmi < 0:
        raise DomainError("Fano bound needs n >= 1 and CMI >= 0", param_info=f"n = {n}, cmi = {cmi}")
    return 1.0 - (cmi + LOG2) / (n * math.log(k))


def map_membership_error(problem: FiniteLearningProblem, k=2, table: Optional[SupersampleTable] = None):
    """
    Error probability of the MAP decoder guessing U from (W, Z̃).
    """
    table = supersample_table(problem, k) if table is None else table
    joint = table.weights()[:, :, None] * table.kernel
    return float(1.0 - np.sum(joint.max(axis=1)))


@lru_cache(maxsize=None)
def derive_variance_coefficient():
    """
    Symbolic coefficient c(k) = max_R [(k−1)·A1(R) + A2(R)] / k, derived with sympy.
    """
    k, r = sympy.symbols('k R', positive=True)
    a1 = (r ** 2 * (-k ** 2 + k + 2) + r * (k ** 2 + k - 5) + 1) / (k - 1) ** 2
    a2 = r ** 2 * (k - 2) / (k - 1) + r / (k - 1) + 1
    objective = sympy.together(((k - 1) * a1 + a2) / k)
    r_star = sympy.solve(sympy.diff(objective, r), r)[0]
    return k, sympy.factor(sympy.simplify(objective.subs(r, r_star)))


def variance_coefficient(k):
    """
    c_k = (k³ + 7k² − 8k − 16) / (4(k³ − 2k²)) for k > 2; tends to 1/4.
    """
    if k is math.inf:
        return 0.25
    if k <= 2:
        raise DomainError("The variance coefficient needs k > 2", param_info=f"k = {k}",
                          suggestion="Use bound_cmi for k = 2.")
    return (k ** 3 + 7 * k ** 2 - 8 * k - 16) / (4.0 * (k ** 3 - 2 * k ** 2))


def improved_constant_objective(lam, info, n, coefficient):
    """info/λ + c·(e^{λ/n} − λ/n − 1)/(λ/n) for λ > 0; infinite once e^{λ/n} overflows."""
    x = lam / n
    if x > EXPM1_MAX:
        return math.inf
    return info / lam + coefficient * (math.expm1(x) - x) / x


def optimal_lambda(info, n, coefficient):
    """Minimizer λ* = n·W_0((info/(n·c) − 1)/e) + n of the objective."""
    return n * lambert_w0((info / (n * coefficient) - 1.0) / math.e) + n


def improved_constant_bound(cmi, n, k):
    """
    Sharper-constant bound from CMI^k for k > 2, evaluated at the closed-form λ*.

    Args:
        cmi: CMI^k in nats
        n: Sample size
        k: Supersample rows (k > 2, or math.inf for the IOMI limit)
    """
    if cmi < 0 or n < 1:
        raise DomainError("Bound needs CMI >= 0 and n >= 1", param_info=f"cmi = {cmi}, n = {n}")
    coefficient = variance_coefficient(k)
    if cmi == 0:
        return 0.0
    lam = optimal_lambda(cmi, n, coefficient)
    return improved_constant_objective(lam, cmi, n, coefficient)


def improved_constant_bound_limit(iomi, n):
    """k → ∞ form with coefficient 1/4, driven by IOMI."""
    return improved_constant_bound(iomi, n, math.inf)


def _check_valid(ege, bounds, tol=VALIDITY_TOL):
    for name, value in bounds.items():
        if ege > value + tol:
            raise InvariantViolation("bound-validity", f"Bound '{name}' is below the expected generalization error",
                                     param_info=f"EGE = {ege:.6g}, {name} = {value:.6g}")


def exact_report(problem: FiniteLearningProblem, k=2, subset_sizes=None, check=True) -> ExactBoundReport:
    """
    Compute every exact quantity and bound for a finite problem.

    Args:
        problem: The finite learning problem
        k: Supersample rows used for CMI^k and the improved-constant bound
        subset_sizes: Subset sizes for the random-subset bound (default 1..n)
        check: Verify the identities, orderings and bound validity

    Raises:
        InvariantViolation: when check is set and an identity or bound fails
    """
    k = _check_k(k)
    n = problem.n
    subset_sizes = list(range(1, n + 1)) if subset_sizes is None else subset_sizes

    table2 = supersample_table(problem, 2)
    joint2 = table2.joint()
    ege = exact_ege(problem)
    iomi = exact_iomi(problem)
    cmi = conditional_mutual_information(joint2)
    supersample_mi = group_information(joint2, [0], [2])
    cmi_k = cmi if k == 2 else exact_cmi_k(problem, k)
    known = {2: cmi, k: cmi_k}
    scan_ks = {kk for kk in LIMIT_SCAN_KS if _supersample_terms(problem, kk) <= LIMIT_SCAN_TERMS} | set(known)
    scan = [(kk, known[kk] if kk in known else exact_cmi_k(problem, kk)) for kk in sorted(scan_ks)]

    report = ExactBoundReport(
        name=problem.name, n=n, k=k, ege=ege, iomi=iomi, cmi=cmi, cmi_k=cmi_k,
        supersample_mi=supersample_mi,
        bound_iomi=bound_iomi(iomi, n),
        bound_cmi=bound_cmi(cmi, n),
        bound_cmi_k=bound_cmi(cmi_k, n),
        subset_bounds=[subset_cmi_bound(problem, m, table2) for m in subset_sizes],
        individual_bound=individual_sample_bound(problem, table2),
        kl_form_bound=kl_form_subset_bound(problem, table2),
        improved_constant_bound=improved_constant_bound(cmi_k, n, k) if k > 2 else None,
        fano_lower=fano_lower_bound(cmi, n, 2),
        map_error=map_membership_error(problem, 2, table2),
        cmi_limit=scan,
        optimal_prior_gap=optimal_prior_check(problem, table2),
        han_profile=han_profile(problem),
    )
    if check:
        residual = iomi - (supersample_mi + cmi)
        if abs(residual) > DECOMPOSITION_TOL:
            raise InvariantViolation("decomposition", "IOMI differs from I(W; Z̃) + CMI",
                                     param_info=f"residual = {residual:.3e}")
        _check_valid(ege, report.bounds())
        if report.map_error < report.fano_lower - VALIDITY_TOL:
            raise InvariantViolation("fano", "MAP decoder beats the Fano lower bound",
                                     param_info=f"map = {report.map_error:.6g}, fano = {report.fano_lower:.6g}")
        check_cmi_limit(scan, iomi)
        sizes = sorted(subset_sizes)
        for m1, m2 in zip(sizes, sizes[1:]):
            if not monotonicity_check(problem, m1, m2, table=table2):
                raise InvariantViolation("subset-monotonicity", f"Subset rate at m={m1} exceeds the rate at m={m2}")
        if report.optimal_prior_gap > VALIDITY_TOL:
            raise InvariantViolation("optimal-prior", "Optimal-prior KL differs from the disintegrated information",
                                     param_info=f"gap = {report.optimal_prior_gap:.3e}")
        if any(b > a + VALIDITY_TOL for a, b in zip(report.han_profile, report.han_profile[1:])):
            raise InvariantViolation("han", "Averaged subset entropy increased with the subset size",
                                     param_info=f"profile = {report.han_profile}")
        if report.individual_bound > report.bound_cmi + VALIDITY_TOL:
            raise InvariantViolation("individual-chain", "Individual-sample bound exceeds √(2·CMI/n)",
                                     param_info=f"individual = {report.individual_bound:.6g}, "
                                                f"cmi = {report.bound_cmi:.6g}")
    logger.info(f"Exact report for {problem.name}: EGE={ege:.6g}, IOMI={iomi:.6g}, CMI={cmi:.6g}")
    return report


def run_exact_report(problem: FiniteLearningProblem, k=2, bits=False):
    """
    Plugin entry point: exact report plus a readable log.

    Args:
        problem: The finite learning problem
        k: Supersample rows for CMI^k
        bits: Report information quantities in bits as well

    Returns:
        Dictionary with the report and a log
    """
    log = []
    report = exact_report(problem, k=k)
    unit = LOG2 if bits else 1.0
    label = "bits" if bits else "nats"

    log.append(f"=== Exact bounds: {problem.name} ===")
    log.append(f"n = {problem.n}, |Z| = {problem.z_card}, |W| = {problem.w_card}, k = {k}")
    log.append(f"EGE            = {report.ege:.6f}")
    log.append(f"IOMI           = {report.iomi / unit:.6f} {label}")
    log.append(f"CMI (k=2)      = {report.cmi / unit:.6f} {label}")
    if k != 2:
        log.append(f"CMI (k={k})      = {report.cmi_k / unit:.6f} {label}")
    log.append(f"I(W; Z̃)        = {report.supersample_mi / unit:.6f} {label}")
    log.append("")
    log.append("Upper bounds:")
    for name, value in report.bounds().items():
        log.append(f"  {name:<22} {value:.6f}")
    log.append(f"Fano lower bound on membership error: {report.fano_lower:.6f}")
    log.append(f"MAP membership decoder error:         {report.map_error:.6f}")
    log.append("")
    scan = ", ".join(f"k={kk}: {value / unit:.6f}" for kk, value in report.cmi_limit)
    log.append(f"CMI^k on the way to IOMI: {scan}")
    log.append("Averaged subset entropy given W: " + ", ".join(f"{h / unit:.6f}" for h in report.han_profile))
    log.append(f"Optimal-prior gap: {report.optimal_prior_gap:.3e}")

    return {
        "report": report.to_dict(),
        "log": "\n".join(log),
    }


def run_fano(cmi, n, k=2):
    """Plugin entry point for the Fano lower bound on membership-inference error."""
    value = fano_lower_bound(cmi, n, k)
    return {"fano_lower": value,
            "log": f"Fano lower bound (CMI = {cmi:g}, n = {n}, k = {k}): {value:.6f}"}


def run_improved_constant(cmi, n, k=3):
    """Plugin entry point for the sharper-constant bound next to the plain CMI^k bound."""
    log = [f"CMI^{k} = {cmi:g} nats, n = {n}"]
    coefficient = variance_coefficient(k)
    value = improved_constant_bound(cmi, n, k)
    plain = bound_cmi(cmi, n)
    log.append(f"c_{k}              = {coefficient:.6f}")
    log.append(f"improved constant = {value:.6f}")
    log.append(f"√(2·CMI/n)        = {plain:.6f}")
    return {"coefficient": coefficient, "improved_constant": value, "cmi_bound": plain, "log": "\n".join(log)}
