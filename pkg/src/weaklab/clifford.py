"""Complex Clifford generators and the fundamental symmetry built from them.

Conventions: every generator is anti-hermitian and squares to ``-I``, so that
``gamma(v)^2 = -|v|^2`` for a real vector ``v`` in a Euclidean frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .exceptions import DimensionMismatch, NotOrthonormal, SignMismatch, TooLarge

MAX_GENERATORS = 12
RELATION_TOL = 1e-12

#: Prefactor used for the fundamental symmetry; recorded in every report.
GAMMA1_PREFACTOR_CONVENTION = "i^k"

I2 = np.eye(2, dtype=np.complex128)
SIGMA1 = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=np.complex128)

_I_POWERS = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


@dataclass(frozen=True)
class SignatureSplit:
    """Ranks of the orthogonal decomposition into ``E1 + E2``."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError(f"ranks must be nonnegative, got n1={self.n1}, n2={self.n2}")

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def sign(self) -> int:
        """``(-1)^n1``."""
        return -1 if self.n1 % 2 else 1

    @classmethod
    def of(cls, n: int, n1: int) -> "SignatureSplit":
        if not 0 <= n1 <= n:
            raise ValueError(f"n1 must lie in [0, {n}], got {n1}")
        return cls(n1, n - n1)


@dataclass(frozen=True, eq=False)
class CliffordRep:
    n: int
    dim: int
    gammas: tuple

    def __post_init__(self):
        if len(self.gammas) != self.n:
            raise DimensionMismatch(f"expected {self.n} generators, got {len(self.gammas)}")
        for g in self.gammas:
            g.setflags(write=False)

    def __getitem__(self, j):
        return self.gammas[j]


def _norm2(M) -> float:
    return float(np.linalg.norm(M, 2))


def _kron_all(factors):
    return reduce(np.kron, factors, np.ones((1, 1), dtype=np.complex128))


def gamma_matrices(n: int) -> CliffordRep:
    """Generators ``gamma_1 .. gamma_n`` of dimension ``2^(n//2)`` by iterated doubling.

    Pair ``(2j-1, 2j)`` is ``sigma3^(j-1) x i sigma_{1,2} x I^(m-j)`` with
    ``m = n // 2``; odd ``n`` gets the extra generator ``i sigma3^m``.
    """
    if n < 1:
        raise ValueError(f"need at least one generator, got n={n}")
    if n > MAX_GENERATORS:
        raise TooLarge(f"n={n} exceeds the cap of {MAX_GENERATORS} generators")
    m = n // 2
    gammas = []
    for j in range(1, m + 1):
        for sigma in (SIGMA1, SIGMA2):
            gammas.append(_kron_all([SIGMA3] * (j - 1) + [1j * sigma] + [I2] * (m - j)))
    if n % 2:
        gammas.append(1j * _kron_all([SIGMA3] * m))
    return CliffordRep(n=n, dim=2**m, gammas=tuple(gammas))


def relation_residuals(rep: CliffordRep) -> dict:
    """Worst-case residuals of the three Clifford relations (operator norm)."""
    eye = np.eye(rep.dim)
    anti_herm = square = anticomm = 0.0
    for j, g in enumerate(rep.gammas):
        anti_herm = max(anti_herm, _norm2(g + g.conj().T))
        square = max(square, _norm2(g @ g + eye))
        for h in rep.gammas[j + 1:]:
            anticomm = max(anticomm, _norm2(g @ h + h @ g))
    return {"anti_hermitian": anti_herm, "square_minus_identity": square, "anticommutation": anticomm}


def gamma_of_vector(rep: CliffordRep, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (rep.n,):
        raise DimensionMismatch(f"vector must have length {rep.n}, got shape {v.shape}")
    out = np.zeros((rep.dim, rep.dim), dtype=np.complex128)
    for coeff, g in zip(v, rep.gammas):
        if coeff:
            out += coeff * g
    return out


def check_orthonormal(frame, n: int, tol: float = RELATION_TOL) -> np.ndarray:
    F = np.asarray(frame, dtype=float)
    if F.shape != (n, n):
        raise DimensionMismatch(f"frame must be {n}x{n}, got shape {F.shape}")
    err = float(np.max(np.abs(F.T @ F - np.eye(n)))) if n else 0.0
    if err > tol:
        raise NotOrthonormal(f"frame columns are not orthonormal (residual {err:.3e})")
    return F


def fundamental_symmetry(rep: CliffordRep, split: SignatureSplit, frame=None) -> np.ndarray:
    """Self-adjoint unitary ``i^k gamma(e_1) ... gamma(e_n1)`` with ``k = n1(n1+1)/2``.

    ``e_j`` is the j-th column of ``frame`` (identity when omitted).  The
    imaginary prefactor makes the product hermitian and involutive for every
    ``n1``; a real sign ``(-1)^k`` only achieves that when ``n1 = 0, 3 mod 4``.
    """
    if split.n != rep.n:
        raise DimensionMismatch(f"split has n={split.n} but representation has n={rep.n}")
    F = np.eye(rep.n) if frame is None else check_orthonormal(frame, rep.n)
    k = split.n1 * (split.n1 + 1) // 2
    out = np.eye(rep.dim, dtype=np.complex128)
    for j in range(split.n1):
        out = out @ gamma_of_vector(rep, F[:, j])
    return _I_POWERS[k % 4] * out


def expected_signs(split: SignatureSplit) -> list:
    s_in = -1 if (split.n1 - 1) % 2 else 1
    s_out = split.sign
    return [s_in] * split.n1 + [s_out] * split.n2


def conjugation_signs(rep: CliffordRep, split: SignatureSplit, frame=None, tol: float = RELATION_TOL) -> list:
    """Signs ``s_j`` with ``Gamma1 gamma(e_j) Gamma1 = s_j gamma(e_j)``, measured and verified."""
    F = np.eye(rep.n) if frame is None else check_orthonormal(frame, rep.n)
    G1 = fundamental_symmetry(rep, split, F)
    expected = expected_signs(split)
    for j, s in enumerate(expected):
        g = gamma_of_vector(rep, F[:, j])
        conj = G1 @ g @ G1
        measured = float(np.real(np.vdot(g, conj)) / np.real(np.vdot(g, g)))
        err = _norm2(conj - s * g)
        if err > tol or abs(measured - s) > tol:
            raise SignMismatch(
                f"generator {j + 1}: measured sign {measured:+.3f} (residual {err:.2e}), expected {s:+d}"
            )
    return expected


def symmetry_residuals(G1) -> dict:
    """Hermiticity and involution residuals (operator norm) of a candidate symmetry."""
    G1 = np.asarray(G1)
    eye = np.eye(G1.shape[0])
    return {
        "hermitian": _norm2(G1 - G1.conj().T),
        "unitary": _norm2(G1 @ G1.conj().T - eye),
        "involution": _norm2(G1 @ G1 - eye),
    }


def random_orthonormal_frame(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))
