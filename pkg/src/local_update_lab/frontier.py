"""Convergence-accuracy Pareto frontiers and their diagnostics.

An operating point of a local update method is the pair (rho, delta): the
tuned convergence rate of the server optimizer at the surrogate's condition
number, and the normalised worst-case displacement of the surrogate optimum.
Sweeping K, gamma, or alpha for the two weight families traces a frontier in
[0, 1]^2; the closed-form route uses the phi/psi condition bounds, the
spectral route measures condition numbers of concrete (possibly randomly
generated) populations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bounds as tb
from . import quadratics as qw
from .engine import RunConfig, auto_tune, geometric_rate, run
from .errors import ConditioningError, InvalidInputError
from .matrices import SpectrumBounds, child_seed, eigh, random_spd_with_spectrum
from .quadratics import ClientModel, Population, WeightScheme

FAMILIES = ("fedavg_theta", "maml_theta")
VARY_AXES = ("K", "gamma", "alpha")
KAPPA_SOURCES = ("closed_form", "exact_spectral")

_FAMILY_SCHEME = {"fedavg_theta": "first_k", "maml_theta": "last_only"}


def default_k_grid(k_max: int = 10**6, points: int = 60) -> np.ndarray:
    """Logarithmic integer grid 1..k_max without duplicates."""
    if k_max < 1:
        raise InvalidInputError(f"k_max must be >= 1, got {k_max}")
    raw = np.logspace(0.0, np.log10(k_max), points)
    return np.unique(np.round(raw).astype(int))


def default_gamma_grid(gamma_max: float, points: int = 60, decades: float = 6.0) -> np.ndarray:
    """Logarithmic gamma grid ending at gamma_max, spanning the given decades."""
    if gamma_max <= 0.0:
        raise InvalidInputError(f"gamma_max must be positive, got {gamma_max}")
    return np.logspace(np.log10(gamma_max) - decades, np.log10(gamma_max), points)


@dataclass(frozen=True)
class SweepSpec:
    """One frontier sweep: the family, the varied axis, and fixed parameters.

    Exactly one axis varies (over `grid`); the other parameters are fixed.
    kappa_source selects the phi/psi closed forms (needs mu, ell) or exact
    spectral measurement (needs a population, or dim+seed for simulated
    sweeps that draw a fresh random matrix per grid point).
    """

    family: str
    vary: str
    grid: np.ndarray
    mu: float
    ell: float
    alpha: float = 0.0
    gamma: float | None = None
    k: int | None = None
    optimizers: tuple[str, ...] = ("plain",)
    kappa_source: str = "closed_form"
    population: Population | None = None
    dim: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        if self.vary not in VARY_AXES:
            raise InvalidInputError(f"unknown vary axis {self.vary!r}, expected one of {VARY_AXES}")
        if self.kappa_source not in KAPPA_SOURCES:
            raise InvalidInputError(
                f"unknown kappa source {self.kappa_source!r}, expected one of {KAPPA_SOURCES}"
            )
        grid = np.atleast_1d(np.asarray(self.grid))
        if grid.size == 0:
            raise InvalidInputError("grid must be nonempty")
        if np.any(np.diff(grid.astype(float)) <= 0.0):
            raise InvalidInputError("grid must be strictly increasing")
        if self.vary == "K":
            grid = grid.astype(int)
            if grid[0] < 1:
                raise InvalidInputError("K grid must start at K >= 1")
        else:
            grid = grid.astype(float)
        if not (0.0 < self.mu <= self.ell):
            raise InvalidInputError(f"need 0 < mu <= ell, got mu={self.mu}, ell={self.ell}")
        if not self.optimizers or any(o not in tb.OPTIMIZER_KINDS for o in self.optimizers):
            raise InvalidInputError(f"optimizers must be a nonempty subset of {tb.OPTIMIZER_KINDS}")
        if self.vary != "gamma" and self.gamma is None:
            raise InvalidInputError("fixed gamma required unless gamma is the vary axis")
        if self.vary != "K" and self.k is None:
            raise InvalidInputError("fixed K required unless K is the vary axis")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "optimizers", tuple(self.optimizers))


@dataclass(frozen=True)
class FrontierPoint:
    """One (rho, delta) operating point and the hyperparameters behind it."""

    rho: float
    delta: float
    kappa: float
    kappa_source: str
    alpha: float
    gamma: float
    k: int
    scheme: str  # "first_k" or "last_only"
    optimizer: str
    axis_value: float

    def __post_init__(self):
        if not (0.0 <= self.rho <= 1.0 and 0.0 <= self.delta <= 1.0):
            raise InvalidInputError(
                f"frontier point ({self.rho}, {self.delta}) outside the unit square"
            )


@dataclass(frozen=True)
class SkippedPoint:
    """A grid point excluded from the frontier, with the reason recorded."""

    axis_value: float
    optimizer: str
    reason: str


@dataclass(frozen=True)
class Frontier:
    """Ordered frontier points (grouped by optimizer, ordered by the axis)."""

    points: tuple[FrontierPoint, ...]
    spec: SweepSpec
    skipped: tuple[SkippedPoint, ...] = ()

    def series(self, optimizer: str) -> list[FrontierPoint]:
        return [p for p in self.points if p.optimizer == optimizer]

    def coordinates(self, optimizer: str | None = None) -> np.ndarray:
        """(n, 2) array of (rho, delta) pairs for one optimizer series."""
        if optimizer is None:
            if len(self.spec.optimizers) != 1:
                raise InvalidInputError("frontier has several optimizer series; name one")
            optimizer = self.spec.optimizers[0]
        pts = self.series(optimizer)
        return np.array([[p.rho, p.delta] for p in pts]).reshape(len(pts), 2)


def _resolve_point(spec: SweepSpec, axis_value) -> tuple[float, float, int]:
    alpha, gamma, k = spec.alpha, spec.gamma, spec.k
    if spec.vary == "K":
        k = int(axis_value)
    elif spec.vary == "gamma":
        gamma = float(axis_value)
    else:
        alpha = float(axis_value)
    return float(alpha), float(gamma), int(k)


def _kappa_for_point(spec: SweepSpec, alpha: float, gamma: float, k: int) -> tuple[float | None, str | None]:
    """(kappa, None) for a usable point, (None, reason) for a skipped one."""
    if spec.family == "maml_theta" and spec.kappa_source == "closed_form":
        if gamma * (k * spec.ell + alpha) >= 1.0:
            return None, f"closed-form maml bound needs gamma < 1/(K*ell+alpha); K={k}"
        return tb.kappa_bound_maml(spec.mu, spec.ell, alpha, gamma, k), None
    if spec.kappa_source == "closed_form":
        return tb.kappa_bound_fedavg(spec.mu, spec.ell, alpha, gamma, k), None
    if spec.population is None:
        raise InvalidInputError("exact_spectral sweeps need a population")
    scheme = _FAMILY_SCHEME[spec.family]
    theta = WeightScheme.first_k(k) if scheme == "first_k" else WeightScheme.last_only(k)
    report = tb.kappa_exact(spec.population, alpha, gamma, theta)
    return report.kappa_exact, None


def sweep(spec: SweepSpec) -> Frontier:
    """Trace the frontier of a sweep, one point per admissible grid value.

    The all-gradients family requires gamma < (ell + alpha)^-1 at every grid
    point. Closed-form last-gradient points violating gamma < (K ell +
    alpha)^-1, and spectral points whose measured kappa exceeds kappa0 (so
    delta leaves [0, 1]), are skipped with recorded reasons. An empty
    admissible set is an error.
    """
    kappa0 = spec.ell / spec.mu
    scheme = _FAMILY_SCHEME[spec.family]
    points: list[FrontierPoint] = []
    skipped: list[SkippedPoint] = []
    for axis_value in spec.grid:
        alpha, gamma, k = _resolve_point(spec, axis_value)
        if gamma * (spec.ell + alpha) >= 1.0:
            if spec.family == "fedavg_theta":
                raise ConditioningError(
                    f"grid point {axis_value} violates gamma < 1/(ell + alpha)"
                )
            skipped.append(SkippedPoint(float(axis_value), "*", "gamma >= 1/(ell + alpha)"))
            continue
        kappa, reason = _kappa_for_point(spec, alpha, gamma, k)
        if kappa is None:
            skipped.append(SkippedPoint(float(axis_value), "*", reason))
            continue
        if kappa > kappa0 * (1.0 + 1e-12):
            skipped.append(
                SkippedPoint(float(axis_value), "*", f"kappa {kappa:.6g} exceeds kappa0 {kappa0:.6g}")
            )
            continue
        delta = tb.delta_from_kappa(min(kappa, kappa0), kappa0)
        for kind in spec.optimizers:
            rho = tb.rho_from_kappa(kappa, kind)
            points.append(
                FrontierPoint(
                    rho=float(rho),
                    delta=float(delta),
                    kappa=float(kappa),
                    kappa_source=spec.kappa_source,
                    alpha=alpha,
                    gamma=gamma,
                    k=k,
                    scheme=scheme,
                    optimizer=kind,
                    axis_value=float(axis_value),
                )
            )
    if not points:
        raise ConditioningError("no admissible grid point; frontier is empty")
    points.sort(key=lambda p: (spec.optimizers.index(p.optimizer), p.axis_value))
    return Frontier(points=tuple(points), spec=spec, skipped=tuple(skipped))


def simulated_maml_sweep(
    dim: int,
    mu: float,
    ell: float,
    alpha: float,
    gamma: float,
    k_grid: np.ndarray,
    seed: int,
    optimizer: str = "plain",
) -> Frontier:
    """Last-gradient frontier measured on fresh random matrices.

    For each K on the grid a new random symmetric matrix with spectrum
    exactly spanning [mu, ell] is drawn (child seed from (seed, grid index))
    and kappa is measured from its mapped spectrum. Valid for any
    gamma < (ell + alpha)^-1, including the non-monotone regime where the
    closed-form psi bound does not apply; points whose measured kappa exceeds
    kappa0 are skipped with a recorded reason.
    """
    k_grid = np.atleast_1d(np.asarray(k_grid, dtype=int))
    spec = SweepSpec(
        family="maml_theta",
        vary="K",
        grid=k_grid,
        mu=mu,
        ell=ell,
        alpha=alpha,
        gamma=gamma,
        optimizers=(optimizer,),
        kappa_source="exact_spectral",
        dim=dim,
        seed=seed,
    )
    if gamma * (ell + alpha) >= 1.0:
        raise ConditioningError(
            f"need gamma < 1/(ell + alpha) = {1.0 / (ell + alpha):.6g}, got gamma={gamma}"
        )
    spectrum = SpectrumBounds(mu=mu, ell=ell, c_radius=0.0)
    kappa0 = ell / mu
    points: list[FrontierPoint] = []
    skipped: list[SkippedPoint] = []
    for index, k in enumerate(k_grid):
        a = random_spd_with_spectrum(dim, spectrum, child_seed(seed, index))
        pop = Population(
            clients=(ClientModel(a_matrix=a, center=np.zeros(dim)),),
            weights=np.array([1.0]),
            bounds=spectrum,
        )
        try:
            report = tb.kappa_exact(pop, alpha, gamma, WeightScheme.last_only(int(k)))
        except ConditioningError as exc:
            # Deep in the non-monotone regime the smallest mapped eigenvalue
            # underflows float64; kappa is then far above kappa0 anyway.
            skipped.append(SkippedPoint(float(k), optimizer, str(exc)))
            continue
        kappa = report.kappa_exact
        if kappa > kappa0 * (1.0 + 1e-12):
            skipped.append(
                SkippedPoint(float(k), optimizer, f"kappa {kappa:.6g} exceeds kappa0 {kappa0:.6g}")
            )
            continue
        points.append(
            FrontierPoint(
                rho=float(tb.rho_from_kappa(kappa, optimizer)),
                delta=float(tb.delta_from_kappa(min(kappa, kappa0), kappa0)),
                kappa=float(kappa),
                kappa_source="exact_spectral",
                alpha=alpha,
                gamma=gamma,
                k=int(k),
                scheme="last_only",
                optimizer=optimizer,
                axis_value=float(k),
            )
        )
    if not points:
        raise ConditioningError("no admissible grid point; frontier is empty")
    return Frontier(points=tuple(points), spec=spec, skipped=tuple(skipped))


# ---------------------------------------------------------------------------
# Polyline geometry
# ---------------------------------------------------------------------------


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def point_to_polyline(p: np.ndarray, polyline: np.ndarray) -> float:
    """Distance from a point to a polyline given as an (n, 2) vertex array."""
    polyline = np.asarray(polyline, dtype=float)
    if polyline.ndim != 2 or polyline.shape[0] == 0:
        raise InvalidInputError("polyline must be a nonempty (n, 2) array")
    if polyline.shape[0] == 1:
        return float(np.linalg.norm(p - polyline[0]))
    return min(
        _point_segment_distance(p, polyline[i], polyline[i + 1])
        for i in range(polyline.shape[0] - 1)
    )


def polyline_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two polylines (vertex-sampled)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d_ab = max(point_to_polyline(p, b) for p in a)
    d_ba = max(point_to_polyline(p, a) for p in b)
    return max(d_ab, d_ba)


@dataclass(frozen=True)
class SubsetReport:
    """Result of checking one frontier against another's polyline."""

    max_distance: float
    tol: float
    passed: bool
    n_points: int


def frontier_subset_check(inner: Frontier, outer: Frontier, tol: float = 0.01) -> SubsetReport:
    """Check every inner point lies within tol of the outer polyline.

    Both frontiers must be single-optimizer with the same optimizer and the
    same (mu, ell); alpha/gamma/K may differ (that is the point).
    """
    if len(inner.spec.optimizers) != 1 or len(outer.spec.optimizers) != 1:
        raise InvalidInputError("subset check needs single-optimizer frontiers")
    if inner.spec.optimizers != outer.spec.optimizers:
        raise InvalidInputError("subset check needs matching optimizers")
    if (inner.spec.mu, inner.spec.ell) != (outer.spec.mu, outer.spec.ell):
        raise InvalidInputError("subset check needs matching (mu, ell)")
    inner_pts = inner.coordinates()
    outer_pts = outer.coordinates()
    max_distance = max(point_to_polyline(p, outer_pts) for p in inner_pts)
    return SubsetReport(
        max_distance=float(max_distance),
        tol=float(tol),
        passed=bool(max_distance <= tol),
        n_points=len(inner_pts),
    )


def symmetry_measure(frontier: Frontier) -> float:
    """Hausdorff distance between a frontier and its reflection across rho = delta.

    Diagnostic only (the reflection symmetry of tuned heavy-ball frontiers is
    an open conjecture); never used as a gate.
    """
    pts = frontier.coordinates()
    reflected = pts[:, ::-1]
    return polyline_hausdorff(pts, reflected)


def empirical_rate_crosscheck(
    pop: Population,
    alpha: float,
    gamma: float,
    theta: WeightScheme,
    optimizer_kind: str,
    rounds: int = 200,
) -> tuple[float, float]:
    """(rho_measured, rho_predicted) for an auto-tuned deterministic run.

    rho_measured is the geometric-mean contraction toward the surrogate
    optimum over rounds 5..T (0 if started at the optimum); rho_predicted is
    the Table-style rate at the exact measured condition number.
    """
    report = tb.kappa_exact(pop, alpha, gamma, theta)
    dec = eigh(qw.surrogate_hessian(pop, alpha, gamma, theta))
    opt = auto_tune(optimizer_kind, dec.lambda_max, dec.lambda_min)
    x_star = qw.surrogate_minimizer(pop, alpha, gamma, theta)
    x0 = x_star + 100.0 * (dec.eigenvectors @ (np.ones(pop.dim) / np.sqrt(pop.dim)))
    cfg = RunConfig(alpha=alpha, gamma=gamma, theta=theta, rounds=rounds, seed=0)
    traj = run(pop, x0, cfg, opt)
    rho_measured = geometric_rate(traj, x_star, start_round=5)
    rho_predicted = tb.rho_from_kappa(report.kappa_exact, optimizer_kind)
    return float(rho_measured), float(rho_predicted)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

CSV_HEADER = "axis_value,rho,delta,kappa,kappa_source,alpha,gamma,K,scheme,optimizer"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def frontier_csv(frontier: Frontier) -> str:
    lines = [CSV_HEADER]
    for p in frontier.points:
        lines.append(
            ",".join(
                [
                    _fmt(p.axis_value),
                    _fmt(p.rho),
                    _fmt(p.delta),
                    _fmt(p.kappa),
                    p.kappa_source,
                    _fmt(p.alpha),
                    _fmt(p.gamma),
                    str(p.k),
                    p.scheme,
                    p.optimizer,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def frontier_json_payload(frontier: Frontier) -> dict:
    spec = frontier.spec
    return {
        "schema_version": 1,
        "spec": {
            "family": spec.family,
            "vary": spec.vary,
            "mu": spec.mu,
            "ell": spec.ell,
            "alpha": spec.alpha,
            "gamma": spec.gamma,
            "k": spec.k,
            "optimizers": list(spec.optimizers),
            "kappa_source": spec.kappa_source,
            "dim": spec.dim,
            "seed": spec.seed,
            "grid_size": int(frontier.spec.grid.size),
        },
        "points": [
            {
                "axis_value": p.axis_value,
                "rho": p.rho,
                "delta": p.delta,
                "kappa": p.kappa,
                "kappa_source": p.kappa_source,
                "alpha": p.alpha,
                "gamma": p.gamma,
                "K": p.k,
                "scheme": p.scheme,
                "optimizer": p.optimizer,
            }
            for p in frontier.points
        ],
        "skipped": [
            {"axis_value": s.axis_value, "optimizer": s.optimizer, "reason": s.reason}
            for s in frontier.skipped
        ],
    }
