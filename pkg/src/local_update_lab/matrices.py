"""Dense symmetric-matrix arithmetic and spectrum-constrained random matrices.

Numerical substrate for the rest of the library: every Hessian, distortion
matrix, and random problem instance passes through here. Matrices are plain
float64 numpy arrays; constructors symmetrize and validate, operations are
pure functions, and all randomness flows through counter-based keyed streams
(seed in, values out; no global state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    InfeasibleSpectrumError,
    InvalidInputError,
    SingularMatrixError,
)

# Eigenvalues of an "invertible SPD" matrix must clear this floor.
SPD_LAMBDA_MIN = 1e-12

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(value: int) -> int:
    """One step of the splitmix64 mixer (deterministic, stdlib arithmetic)."""
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (value ^ (value >> 31)) & _MASK64


def child_seed(seed: int, *tags: int) -> int:
    """Derive a deterministic 64-bit child seed from (seed, tags)."""
    mixed = int(seed) & _MASK64
    for tag in tags:
        mixed = _splitmix64(mixed ^ _splitmix64(int(tag) & _MASK64))
    return mixed


def keyed_rng(seed: int, *tags: int) -> np.random.Generator:
    """Deterministic substream for (seed, tags) on a counter-based generator.

    Child streams for e.g. (seed, round) or (seed, grid_index) are derived by
    mixing the tags into the second Philox key word, so results do not depend
    on evaluation order or scheduling.
    """
    mixed = _splitmix64(len(tags))
    for tag in tags:
        mixed = _splitmix64(mixed ^ (int(tag) & _MASK64))
    key = np.array([int(seed) & _MASK64, mixed], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return 0.5 * (A + A^T); the result is exactly symmetric entrywise."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def check_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate a finite square symmetric matrix and return it as float64."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    if not np.array_equal(a, a.T):
        # Accept tiny asymmetry from upstream arithmetic, reject anything real.
        if np.max(np.abs(a - a.T)) > 1e-12 * (1.0 + np.max(np.abs(a))):
            raise InvalidInputError(f"{name} is not symmetric")
        a = symmetrize(a)
    return a


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral factorisation A = V diag(w) V^T with eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # orthonormal columns, eigenvectors[:, i] <-> eigenvalues[i]

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return symmetrize((v * self.eigenvalues) @ v.T)


def eigh(a: np.ndarray) -> EigenDecomposition:
    """Symmetric eigendecomposition with ascending eigenvalues."""
    a = check_symmetric(a)
    w, v = np.linalg.eigh(a)
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product A @ B with shape validation."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[0]:
        raise DimensionMismatchError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def multiply_symmetric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two commuting symmetric matrices, re-symmetrized.

    For commuting symmetric inputs the exact product is symmetric; the
    explicit symmetrization removes rounding skew so downstream eigh calls
    see a clean symmetric matrix.
    """
    return symmetrize(multiply(a, b))


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cannot add shapes {a.shape} and {b.shape}")
    return a + b


def scale(a: np.ndarray, s: float) -> np.ndarray:
    return np.asarray(a, dtype=float) * float(s)


def matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    if a.shape[1] != v.shape[0]:
        raise DimensionMismatchError(f"cannot apply shape {a.shape} to vector of length {v.shape[0]}")
    return a @ v


def inverse_spd(a: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix.

    Raises SingularMatrixError (reporting lambda_min) if the smallest
    eigenvalue does not clear SPD_LAMBDA_MIN.
    """
    dec = eigh(a)
    if dec.lambda_min <= SPD_LAMBDA_MIN:
        raise SingularMatrixError("matrix is not safely positive definite", dec.lambda_min)
    v = dec.eigenvectors
    return symmetrize((v / dec.eigenvalues) @ v.T)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim)


@dataclass(frozen=True)
class SpectrumBounds:
    """Population-level bounds: mu I <= A_i <= ell I and ||c_i|| <= c_radius."""

    mu: float
    ell: float
    c_radius: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.mu <= self.ell):
            raise InvalidInputError(f"need 0 < mu <= ell, got mu={self.mu}, ell={self.ell}")
        if self.c_radius < 0.0:
            raise InvalidInputError(f"c_radius must be nonnegative, got {self.c_radius}")

    @property
    def kappa0(self) -> float:
        """Baseline condition number ell / mu."""
        return self.ell / self.mu


def random_spd_with_spectrum(dim: int, bounds: SpectrumBounds, seed: int) -> np.ndarray:
    """Random symmetric matrix with lambda_min = mu and lambda_max = ell.

    Draws G = B^T B with standard normal B and rescales, A = beta1 * G +
    beta2 * I, choosing beta1, beta2 so the extreme eigenvalues land exactly
    on (mu, ell). Deterministic for a fixed (dim, bounds, seed). A degenerate
    draw (numerically flat spectrum of G) falls back to A = mu * I, as does
    mu == ell.
    """
    if dim < 1:
        raise InvalidInputError(f"dim must be >= 1, got {dim}")
    mu, ell = bounds.mu, bounds.ell
    if mu == ell:
        return mu * np.eye(dim)
    if dim == 1:
        raise InfeasibleSpectrumError(
            f"a 1x1 matrix has a single eigenvalue; cannot realise mu={mu} != ell={ell}"
        )
    rng = keyed_rng(seed, 0x5D)
    b = rng.standard_normal((dim, dim))
    gram = symmetrize(b.T @ b)
    dec = eigh(gram)
    spread = dec.lambda_max - dec.lambda_min
    if spread < 1e-12:
        return mu * np.eye(dim)
    beta1 = (ell - mu) / spread
    beta2 = mu - beta1 * dec.lambda_min
    return symmetrize(beta1 * gram + beta2 * np.eye(dim))
