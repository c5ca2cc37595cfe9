"""Closed-form analysis: condition numbers, rates, and distance bounds.

Everything here is an exact formula evaluation, no simulation. The scalar
eigenvalue maps are central: for a client with matrix eigenvalue lam, the
distortion matrix has eigenvalue sum_k theta_k xi^(k-1) and the distorted
Hessian has that times lam, where xi = 1 - gamma (lam + alpha). The FedAvg
and MAML weight families admit the closed forms phi and psi, the exact
condition number follows from mapping whole spectra, and the distance between
surrogate and empirical optima is bounded through a mean-absolute-deviation
inequality and its matrix-weighted analog.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadratics as qw
from .errors import ConditioningError, InvalidInputError
from .matrices import SPD_LAMBDA_MIN, SpectrumBounds, check_symmetric, eigh
from .quadratics import Population, WeightScheme

# Summation is exact and cheap up to this K; beyond it the geometric closed
# form avoids accumulating K rounding steps.
_PHI_SUMMATION_MAX_K = 64

OPTIMIZER_KINDS = ("plain", "nesterov", "heavy_ball")


def _geometric_sum(xi: float, k: int) -> float:
    """sum_{j=0}^{k-1} xi^j, by direct summation for small k.

    The large-k branch computes (1 - xi^k) via expm1/log1p: the plain form
    cancels catastrophically when xi is just below 1 (tiny gamma).
    """
    if k <= _PHI_SUMMATION_MAX_K:
        total = 0.0
        power = 1.0
        for _ in range(k):
            total += power
            power *= xi
        return total
    if xi == 1.0:
        return float(k)
    if 0.0 < xi:
        return -np.expm1(k * np.log1p(xi - 1.0)) / (1.0 - xi)
    return (1.0 - xi**k) / (1.0 - xi)


def phi(lam: float, alpha: float, gamma: float, k: int) -> float:
    """sum_{j=1}^{K} (1 - gamma (lam + alpha))^(j-1) lam."""
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    xi = 1.0 - gamma * (lam + alpha)
    return _geometric_sum(xi, k) * lam


def psi(lam: float, alpha: float, gamma: float, k: int) -> float:
    """(1 - gamma (lam + alpha))^(K-1) lam."""
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    xi = 1.0 - gamma * (lam + alpha)
    return xi ** (k - 1) * lam


def kappa_bound_fedavg(mu: float, ell: float, alpha: float, gamma: float, k: int) -> float:
    """Condition-number bound phi(ell)/phi(mu) for the all-gradients scheme.

    Requires gamma < (ell + alpha)^-1. Equals ell/mu exactly iff gamma = 0 or
    K = 1 (alpha only enters through gamma * alpha); saturates to 1 as K
    grows when alpha = 0.
    """
    _check_mu_ell(mu, ell)
    if gamma < 0.0 or alpha < 0.0:
        raise InvalidInputError("alpha and gamma must be nonnegative")
    if gamma * (ell + alpha) >= 1.0:
        raise ConditioningError(
            f"need gamma < 1/(ell + alpha) = {1.0 / (ell + alpha):.6g}, got gamma={gamma}"
        )
    # provably >= 1 here; the max() only strips a possible trailing-ulp dip
    return max(1.0, phi(ell, alpha, gamma, k) / phi(mu, alpha, gamma, k))


def kappa_bound_maml(mu: float, ell: float, alpha: float, gamma: float, k: int) -> float:
    """Condition-number bound psi(ell)/psi(mu) for the last-gradient scheme.

    Requires gamma < (K ell + alpha)^-1; outside that regime the exact
    spectral route (kappa_exact) must be used instead.
    """
    _check_mu_ell(mu, ell)
    if gamma < 0.0 or alpha < 0.0:
        raise InvalidInputError("alpha and gamma must be nonnegative")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if gamma * (k * ell + alpha) >= 1.0:
        raise ConditioningError(
            f"need gamma < 1/(K ell + alpha) = {1.0 / (k * ell + alpha):.6g}, got gamma={gamma}"
        )
    return max(1.0, psi(ell, alpha, gamma, k) / psi(mu, alpha, gamma, k))


def _check_mu_ell(mu: float, ell: float) -> None:
    if not (0.0 < mu <= ell):
        raise InvalidInputError(f"need 0 < mu <= ell, got mu={mu}, ell={ell}")


def scheme_q_eigenvalues(
    lams: np.ndarray, alpha: float, gamma: float, theta: WeightScheme
) -> np.ndarray:
    """Eigenvalues of the distortion matrix at matrix eigenvalues lams.

    Uses the closed geometric form for the two named weight families (O(1)
    per eigenvalue even for K ~ 1e6) and direct polynomial evaluation for a
    general theta.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    xi = 1.0 - gamma * (lams + alpha)
    kind, k, coeff = theta.structure()
    if kind == "last_only":
        return coeff * xi ** (k - 1)
    if kind == "uniform_prefix":
        if k <= _PHI_SUMMATION_MAX_K:
            sums = np.polynomial.polynomial.polyval(xi, np.ones(k))
        else:
            sums = np.empty_like(xi)
            for i, value in enumerate(xi):
                sums[i] = _geometric_sum(float(value), k)
        return coeff * np.atleast_1d(sums)
    return np.polynomial.polynomial.polyval(xi, theta.coefficients[:k])


def scheme_qa_eigenvalues(
    lams: np.ndarray, alpha: float, gamma: float, theta: WeightScheme
) -> np.ndarray:
    """Eigenvalues of the distorted Hessian Q A at matrix eigenvalues lams."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    return scheme_q_eigenvalues(lams, alpha, gamma, theta) * lams


@dataclass(frozen=True)
class KappaReport:
    """Exact condition number of the surrogate plus the family bound.

    kappa_exact = l_tilde / mu_tilde with l_tilde = E_i[lambda_max(Q_i A_i)]
    and mu_tilde = E_i[lambda_min(Q_i A_i)]; kappa_bound is the phi/psi closed
    form when theta belongs to a covered family and its precondition holds,
    else None.
    """

    kappa_exact: float
    l_tilde: float
    mu_tilde: float
    kappa_bound: float | None = None


def kappa_exact(
    pop: Population, alpha: float, gamma: float, theta: WeightScheme
) -> KappaReport:
    """Exact condition number from each client's mapped spectrum.

    Valid whenever gamma < (ell + alpha)^-1, including the regime where the
    last-gradient map is non-monotone and the psi bound does not apply.
    """
    qw.require_contractive(pop.bounds, alpha, gamma)
    expected_max = 0.0
    expected_min = 0.0
    for weight, client in zip(pop.weights, pop.clients):
        lams = eigh(client.a_matrix).eigenvalues
        mapped = scheme_qa_eigenvalues(lams, alpha, gamma, theta)
        if np.any(mapped <= 0.0):
            raise ConditioningError(
                f"nonpositive distorted eigenvalue {mapped.min():.6g} encountered"
            )
        expected_max += weight * float(mapped.max())
        expected_min += weight * float(mapped.min())
    bound = None
    kind, k, _ = theta.structure()
    mu, ell = pop.bounds.mu, pop.bounds.ell
    if kind == "uniform_prefix" and gamma * (ell + alpha) < 1.0:
        bound = kappa_bound_fedavg(mu, ell, alpha, gamma, k)
    elif kind == "last_only" and gamma * (k * ell + alpha) < 1.0:
        bound = kappa_bound_maml(mu, ell, alpha, gamma, k)
    return KappaReport(
        kappa_exact=max(1.0, expected_max / expected_min),
        l_tilde=expected_max,
        mu_tilde=expected_min,
        kappa_bound=bound,
    )


def rho_from_kappa(kappa: float, optimizer_kind: str) -> float:
    """Linear convergence rate of the tuned server optimizer at condition kappa.

    plain:      (kappa - 1) / (kappa + 1)
    Nesterov:   1 - 2 / sqrt(3 kappa + 1)
    heavy-ball: (sqrt(kappa) - 1) / (sqrt(kappa) + 1)
    """
    if kappa < 1.0:
        raise InvalidInputError(f"kappa must be >= 1, got {kappa}")
    if optimizer_kind == "plain":
        return (kappa - 1.0) / (kappa + 1.0)
    if optimizer_kind == "nesterov":
        return 1.0 - 2.0 / np.sqrt(3.0 * kappa + 1.0)
    if optimizer_kind == "heavy_ball":
        root = np.sqrt(kappa)
        return (root - 1.0) / (root + 1.0)
    raise InvalidInputError(
        f"unknown optimizer {optimizer_kind!r}, expected one of {OPTIMIZER_KINDS}"
    )


def delta_from_kappa(kappa: float, kappa0: float) -> float:
    """Suboptimality (sqrt(kappa0) - sqrt(kappa)) / (sqrt(kappa0) + sqrt(kappa))."""
    if not (1.0 <= kappa):
        raise InvalidInputError(f"kappa must be >= 1, got {kappa}")
    if kappa > kappa0:
        raise InvalidInputError(f"kappa={kappa} exceeds kappa0={kappa0}")
    r0, r = np.sqrt(kappa0), np.sqrt(kappa)
    return float((r0 - r) / (r0 + r))


def distance_bound(
    pop: Population,
    alpha: float,
    gamma: float,
    theta: WeightScheme,
    c_radius: float | None = None,
) -> float:
    """Spectral bound on the surrogate-to-empirical minimizer distance.

    With b the largest and a the smallest distortion eigenvalue across
    clients, the bound is const * C * (sqrt(b) - sqrt(a)) / (sqrt(b) + sqrt(a))
    with const = 2 in dimension one and 8 otherwise.
    """
    qw.require_contractive(pop.bounds, alpha, gamma)
    if c_radius is None:
        c_radius = pop.bounds.c_radius
    b = -np.inf
    a = np.inf
    for client in pop.clients:
        lams = eigh(client.a_matrix).eigenvalues
        q_eigs = scheme_q_eigenvalues(lams, alpha, gamma, theta)
        b = max(b, float(q_eigs.max()))
        a = min(a, float(q_eigs.min()))
    constant = 2.0 if pop.dim == 1 else 8.0
    sb, sa = np.sqrt(b), np.sqrt(a)
    return float(constant * c_radius * (sb - sa) / (sb + sa))


def distance_bound_from_kappa(kappa: float, kappa0: float, c_radius: float) -> float:
    """Distance bound 8 C (sqrt(k0) - sqrt(k)) / (sqrt(k0) + sqrt(k)).

    kappa must be the phi/psi closed form of one of the two covered weight
    families under its precondition; the identity with delta_from_kappa makes
    the bound 8 C times the suboptimality.
    """
    if c_radius < 0.0:
        raise InvalidInputError(f"c_radius must be nonnegative, got {c_radius}")
    return 8.0 * c_radius * delta_from_kappa(kappa, kappa0)


# ---------------------------------------------------------------------------
# Mean absolute deviation and its matrix-weighted analog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite discrete real distribution (values with probabilities)."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if values.ndim != 1 or values.size == 0 or values.shape != probs.shape:
            raise InvalidInputError("values and probs must be matching nonempty 1-d arrays")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(probs))):
            raise InvalidInputError("values and probs must be finite")
        if np.any(probs < 0.0):
            raise InvalidInputError("probabilities must be nonnegative")
        if abs(float(np.sum(probs)) - 1.0) > 1e-12:
            raise InvalidInputError(f"probabilities sum to {np.sum(probs)!r}, expected 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @property
    def mean(self) -> float:
        return float(np.dot(self.probs, self.values))

    def support(self) -> np.ndarray:
        """Values carrying positive probability."""
        return self.values[self.probs > 0.0]


def mad(dist: DiscreteDistribution) -> float:
    """Mean absolute deviation E|X - E[X]|."""
    return float(np.dot(dist.probs, np.abs(dist.values - dist.mean)))


def mad_bound(dist: DiscreteDistribution) -> float:
    """Bhatia-Davis-style bound 2 (b - E[X]) (E[X] - a) / (b - a).

    a, b are the support extremes; a degenerate support (a = b) gives 0 by
    the constant-variable convention. Equality holds exactly when X is
    supported on {a, b}.
    """
    support = dist.support()
    a = float(support.min())
    b = float(support.max())
    if a == b:
        return 0.0
    mean = dist.mean
    return 2.0 * (b - mean) * (mean - a) / (b - a)


def _spectral_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def _validate_weighted_family(xs, ys, commute_tol: float = 1e-9):
    xs = [check_symmetric(x, f"X[{i}]") for i, x in enumerate(xs)]
    ys = [check_symmetric(y, f"Y[{i}]") for i, y in enumerate(ys)]
    if len(xs) == 0 or len(xs) != len(ys):
        raise InvalidInputError("need matching nonempty X and Y lists")
    dim = xs[0].shape[0]
    for i, (x, y) in enumerate(zip(xs, ys)):
        if x.shape[0] != dim or y.shape[0] != dim:
            raise InvalidInputError("all matrices must share one dimension")
        lam_min = eigh(y).lambda_min
        if lam_min <= SPD_LAMBDA_MIN:
            raise InvalidInputError(f"weight Y[{i}] is not positive definite (lambda_min={lam_min:.3e})")
        if _spectral_norm(x @ y - y @ x) > commute_tol * (1.0 + _spectral_norm(x) * _spectral_norm(y)):
            raise InvalidInputError(f"pair {i} does not commute")
    return xs, ys


def matrix_weighted_mean(xs, ys) -> np.ndarray:
    """Matrix-weighted mean (sum_i X_i Y_i) (sum_i Y_i)^-1.

    Requires each (X_i, Y_i) pair to commute and the Y_i to be symmetric
    positive definite. If a I <= X_i <= b I for all i, the result has all
    eigenvalues in [a, b].
    """
    xs, ys = _validate_weighted_family(xs, ys)
    y_total = np.sum(ys, axis=0)
    numerator = np.sum([x @ y for x, y in zip(xs, ys)], axis=0)
    return numerator @ np.linalg.inv(y_total)


def matrix_weighted_discrepancy(xs, ys) -> float:
    """Normalised matrix-weighted discrepancy of X with respect to Y.

    sum_i || Y^-1 f^-1 (X_i - f) Y_i || in the spectral norm, where f is the
    matrix-weighted mean. In dimension one this is the mean absolute
    deviation divided by |E[X]|. For a I <= X_i <= b I it is bounded by
    2 (b - a) / b.
    """
    xs, ys = _validate_weighted_family(xs, ys)
    y_total = np.sum(ys, axis=0)
    y_inv = np.linalg.inv(y_total)
    f = np.sum([x @ y for x, y in zip(xs, ys)], axis=0) @ y_inv
    f_inv = np.linalg.inv(f)
    total = 0.0
    for x, y in zip(xs, ys):
        total += _spectral_norm(y_inv @ f_inv @ (x - f) @ y)
    return total


# ---------------------------------------------------------------------------
# Tightness construction: two scalar clients, last-gradient scheme
# ---------------------------------------------------------------------------


def tightness_population(p: float) -> Population:
    """The two-client scalar family A = (4, 1), c = (1, -1), weights (p, 1-p)."""
    if not (0.0 < p < 1.0):
        raise InvalidInputError(f"p must lie in (0, 1), got {p}")
    clients = (
        qw.ClientModel(a_matrix=np.array([[4.0]]), center=np.array([1.0])),
        qw.ClientModel(a_matrix=np.array([[1.0]]), center=np.array([-1.0])),
    )
    return Population(
        clients=clients,
        weights=np.array([p, 1.0 - p]),
        bounds=SpectrumBounds(mu=1.0, ell=4.0, c_radius=1.0),
    )


def tightness_case_b2(k: int, p: float) -> tuple[float, float]:
    """Measured minimizer distance and 2C distance bound for the scalar family.

    Uses alpha = 0, gamma = 1/8, and the last-gradient scheme of length k.
    As k grows and p approaches 1, both values approach 2 (with C = 1),
    showing the one-dimensional bound is tight.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    pop = tightness_population(p)
    theta = WeightScheme.last_only(k)
    measured = qw.minimizer_distance(pop, 0.0, 0.125, theta)
    bound = distance_bound(pop, 0.0, 0.125, theta)
    return measured, bound
