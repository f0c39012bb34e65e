"""Dense complex linear-algebra kernels.

Every operator in weaklab is ultimately a dense ``complex128`` array of shape
``(rows, cols)``.  The helpers here validate such arrays, compute norms,
hermitian and generalized eigenvalues, and resolvents, and read/write the
plain-text matrix format used by the command line tools.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    DimensionMismatch,
    NotHermitian,
    NotPositiveDefinite,
    NotSquare,
    Singular,
    WeakLabError,
)

HERMITIAN_RTOL = 1e-10
SINGULAR_RTOL = 1e-12
RESOLVENT_RESIDUAL_TOL = 1e-10
PD_RTOL = 1e-12


def as_cmatrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D complex128 array.

    Accepts anything ``numpy.asarray`` understands, including lattice
    operators that implement ``__array__``.
    """
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise WeakLabError(f"{name} contains NaN or Inf entries")
    return A


def _square(M, name="matrix"):
    A = as_cmatrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise NotSquare(f"{name} must be square, got shape {A.shape}")
    return A


def adjoint(M) -> np.ndarray:
    """Conjugate transpose."""
    return as_cmatrix(M).conj().T


def hermiticity_residual(M) -> float:
    """Relative Frobenius residual ``|M - M*| / |M|`` (0 for the zero matrix)."""
    A = _square(M)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(A - A.conj().T) / scale)


def is_hermitian(M, rtol: float = HERMITIAN_RTOL) -> bool:
    return hermiticity_residual(M) <= rtol


def symmetrize(M) -> np.ndarray:
    A = _square(M)
    return 0.5 * (A + A.conj().T)


def op_norm(M) -> float:
    """Operator 2-norm, the largest singular value of ``M``.

    Exactly hermitian input takes the cheaper route ``max |eig|``.
    """
    A = as_cmatrix(M)
    if not np.any(A):
        return 0.0
    if A.shape[0] == A.shape[1] and np.array_equal(A, A.conj().T):
        w = sla.eigvalsh(A, check_finite=False)
        return float(max(abs(w[0]), abs(w[-1])))
    return float(sla.svdvals(A, check_finite=False)[0])


@dataclass(frozen=True)
class HermEig:
    """Ascending eigenvalues and unitary eigenvector matrix of a hermitian matrix."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.vectors
        return (V * self.values) @ V.conj().T


def _require_hermitian(A, name="matrix"):
    res = hermiticity_residual(A)
    if res > HERMITIAN_RTOL:
        raise NotHermitian(f"{name} is not hermitian (relative residual {res:.3e})")
    return 0.5 * (A + A.conj().T)


def herm_eig(M) -> HermEig:
    A = _require_hermitian(_square(M))
    w, V = sla.eigh(A, check_finite=False)
    return HermEig(values=w, vectors=V)


def _cholesky(G):
    G = _require_hermitian(_square(G, "G"), "G")
    try:
        L = sla.cholesky(G, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc
    # pivots bound the smallest eigenvalue from above, so a tiny pivot means
    # the pencil is numerically singular even if LAPACK did not complain
    scale = float(np.max(np.abs(np.diag(G)).real))
    if float(np.min(np.abs(np.diag(L)))) ** 2 <= PD_RTOL * scale:
        raise NotPositiveDefinite("G is numerically singular (tiny Cholesky pivot)")
    return L


def _whitened(X, G):
    X = _require_hermitian(_square(X, "X"), "X")
    if X.shape != np.shape(G):
        raise DimensionMismatch(f"X has shape {X.shape} but G has shape {np.shape(G)}")
    L = _cholesky(G)
    W = sla.solve_triangular(L, X, lower=True, check_finite=False)
    Y = sla.solve_triangular(L, W.conj().T, lower=True, check_finite=False).conj().T
    return 0.5 * (Y + Y.conj().T), L


def gen_eig_max(X, G) -> float:
    """Largest ``mu`` with ``det(X - mu G) = 0`` for hermitian ``X`` and positive definite ``G``.

    Computed by whitening with the Cholesky factor ``G = L L*`` and taking the
    top eigenvalue of ``L^-1 X L^-*``.  This is the optimal constant ``C`` in
    ``<v|X v> <= C <v|G v>``.
    """
    X = as_cmatrix(X, "X")
    if not np.any(X):
        _cholesky(G)
        return 0.0
    Y, _ = _whitened(X, G)
    return float(sla.eigvalsh(Y, check_finite=False)[-1])


def gen_eig_max_vector(X, G) -> tuple[float, np.ndarray]:
    """Like :func:`gen_eig_max` but also return a unit witness vector achieving the maximum."""
    Y, L = _whitened(as_cmatrix(X, "X"), G)
    w, V = sla.eigh(Y, check_finite=False)
    v = sla.solve_triangular(L.conj().T, V[:, -1], lower=False, check_finite=False)
    return float(w[-1]), v / np.linalg.norm(v)


def resolvent(M, z: complex) -> np.ndarray:
    """Return ``(M + z I)^-1``.

    Raises
    ------
    Singular
        If the smallest singular value of ``M + z I`` is below
        ``1e-12 (|M| + |z|)`` or the computed inverse has residual above 1e-10.
    """
    A = _square(M)
    z = complex(z)
    n = A.shape[0]
    shifted = A + z * np.eye(n)
    # Frobenius norms over-estimate |M| and |R|, which keeps both checks conservative
    threshold = SINGULAR_RTOL * (np.linalg.norm(A) + abs(z))
    if z.real == 0.0 and z.imag != 0.0 and np.array_equal(A, A.conj().T):
        if abs(z) <= threshold:
            raise Singular(f"M + zI is numerically singular at z={z}", shift=z)
    try:
        # singularity is certified below, so LAPACK's own warnings are noise here
        with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            R = sla.solve(shifted, np.eye(n, dtype=np.complex128), check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise Singular(f"M + zI is singular at z={z}: {exc}", shift=z) from exc
    if not np.all(np.isfinite(R)):
        raise Singular(f"M + zI is singular at z={z}", shift=z)
    if 1.0 / np.linalg.norm(R) <= threshold:
        smin = float(sla.svdvals(shifted, check_finite=False)[-1])
        if smin <= threshold:
            raise Singular(f"M + zI is numerically singular at z={z} (sigma_min={smin:.3e})", shift=z)
    residual = np.linalg.norm(shifted @ R - np.eye(n))
    if residual > RESOLVENT_RESIDUAL_TOL:
        raise Singular(f"resolvent residual {residual:.3e} exceeds tolerance at z={z}", shift=z)
    return R


# -- seeded random test matrices -------------------------------------------------


def random_matrix(dim: int, rng: np.random.Generator, cols: int | None = None) -> np.ndarray:
    cols = dim if cols is None else cols
    return (rng.standard_normal((dim, cols)) + 1j * rng.standard_normal((dim, cols))) / np.sqrt(2 * dim)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    A = random_matrix(dim, rng)
    return A + A.conj().T


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(random_matrix(dim, rng))
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_unit_vectors(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` complex Gaussian unit vectors as the columns of a ``(dim, count)`` array."""
    V = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    return V / np.linalg.norm(V, axis=0)


# -- matrix text format ------------------------------------------------------------


def format_matrix(M) -> str:
    """Serialize to the text format: ``rows cols`` then one line of ``re im`` pairs per row."""
    A = as_cmatrix(M)
    out = io.StringIO()
    out.write(f"{A.shape[0]} {A.shape[1]}\n")
    for row in A:
        out.write(" ".join(f"{z.real:.16e} {z.imag:.16e}" for z in row))
        out.write("\n")
    return out.getvalue()


def parse_matrix(text: str, source: str = "<string>") -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise WeakLabError(f"{source}: no matrix header found")
    try:
        rows, cols = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise WeakLabError(f"{source}: bad header line {lines[0]!r}") from exc
    if rows < 1 or cols < 1:
        raise WeakLabError(f"{source}: dimensions must be positive, got {rows}x{cols}")
    body = lines[1:]
    if len(body) != rows:
        raise WeakLabError(f"{source}: expected {rows} data rows, found {len(body)}")
    A = np.empty((rows, cols), dtype=np.complex128)
    for i, ln in enumerate(body):
        vals = ln.split()
        if len(vals) != 2 * cols:
            raise WeakLabError(f"{source}: row {i + 1} has {len(vals)} numbers, expected {2 * cols}")
        nums = np.array([float(v) for v in vals])
        A[i] = nums[0::2] + 1j * nums[1::2]
    return as_cmatrix(A, source)


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    return parse_matrix(path.read_text(encoding="utf-8"), source=str(path))


def write_matrix(path, M) -> None:
    from .reporting import atomic_write_text

    atomic_write_text(path, format_matrix(M))
