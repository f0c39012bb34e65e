"""Real/imaginary parts of a square matrix and the (reverse) Wick rotation.

``wick_rotate`` maps a general ``D`` to the hermitian pair
``D+- = Re D +- Im D``; ``reverse_wick`` maps a hermitian pair back via
``(D1 + D2)/2 + i (D1 - D2)/2``.  The two maps are mutually inverse, and the
checks here measure how exactly that holds in floating point, together with
finite-dimensional stand-ins for the analytic conditions on ``D``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import linops
from .exceptions import DimensionMismatch, NotHermitian
from .weakpair import ANTICOMMUTATOR, OperatorPair, condition1_constant

#: Number of leading compactness-proxy eigenvalues kept in summaries.
PROXY_HEAD = 5


@dataclass(frozen=True, eq=False)
class WickQuadruple:
    D: np.ndarray
    ReD: np.ndarray
    ImD: np.ndarray
    Dplus: np.ndarray
    Dminus: np.ndarray


def real_part(D) -> np.ndarray:
    D = linops._square(D, "D")
    return 0.5 * (D + D.conj().T)


def imag_part(D) -> np.ndarray:
    D = linops._square(D, "D")
    return -0.5j * (D - D.conj().T)


def wick_rotate(D) -> WickQuadruple:
    """Split ``D`` into hermitian parts and form ``D+ = Re D + Im D``, ``D- = Re D - Im D``."""
    D = linops._square(D, "D")
    re, im = real_part(D), imag_part(D)
    return WickQuadruple(D=D, ReD=re, ImD=im, Dplus=re + im, Dminus=re - im)


def reverse_wick(D1, D2) -> np.ndarray:
    """``(D1 + D2)/2 + i (D1 - D2)/2`` for hermitian ``D1, D2``."""
    A = linops._square(D1, "D1")
    B = linops._square(D2, "D2")
    if A.shape != B.shape:
        raise DimensionMismatch(f"D1 has shape {A.shape} but D2 has shape {B.shape}")
    for name, M in (("D1", A), ("D2", B)):
        res = linops.hermiticity_residual(M)
        if res > linops.HERMITIAN_RTOL:
            raise NotHermitian(f"{name} is not hermitian (relative residual {res:.3e})")
    return 0.5 * (A + B) + 0.5j * (A - B)


def roundtrip_residual(D) -> float:
    """``|reverse_wick(D+, D-) - D|`` in operator norm."""
    q = wick_rotate(D)
    return linops.op_norm(reverse_wick(q.Dplus, q.Dminus) - q.D)


def roundtrip_residual_pair(D1, D2) -> float:
    """Max over the two components of ``|wick_rotate(reverse_wick(D1, D2)) - (D1, D2)|``."""
    q = wick_rotate(reverse_wick(D1, D2))
    return max(linops.op_norm(q.Dplus - np.asarray(D1)), linops.op_norm(q.Dminus - np.asarray(D2)))


def proxy_eigenvalues(ReD, ImD) -> np.ndarray:
    """Descending eigenvalues of ``(I + Re D^2 + Im D^2)^(-1/2)``."""
    n = ReD.shape[0]
    G = np.eye(n) + ReD.conj().T @ ReD + ImD.conj().T @ ImD
    w = sla.eigvalsh(0.5 * (G + G.conj().T), check_finite=False)
    return np.sort(1.0 / np.sqrt(w))[::-1]


def proxy_decay_rate(eigs) -> float:
    """Log-log slope of the proxy eigenvalues against their index, over the whole spectrum.

    For a first-order operator in ``n`` dimensions Weyl's law predicts roughly ``-1/n``.
    """
    eigs = np.asarray(eigs, dtype=float)
    if len(eigs) < 2 or np.all(eigs == eigs[0]):
        return 0.0
    k = np.arange(1, len(eigs) + 1)
    slope, _ = np.polyfit(np.log(k), np.log(eigs), 1)
    return float(slope)


@dataclass
class ModuleCheckReport:
    """Finite-dimensional checks on a candidate indefinite operator ``D``."""

    re_hermitian_residual: float
    im_hermitian_residual: float
    C_anticommute: float
    commutator_norms: list
    proxy_eigs: np.ndarray
    proxy_rate: float
    notes: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "re_hermitian_residual": self.re_hermitian_residual,
            "im_hermitian_residual": self.im_hermitian_residual,
            "C_anticommute": self.C_anticommute,
            "commutator_norms": list(self.commutator_norms),
            "proxy_eigs_head": self.proxy_eigs[:PROXY_HEAD].tolist(),
            "proxy_rate": self.proxy_rate,
            **self.notes,
        }


def _abs_hermitian_residual(M) -> float:
    return linops.op_norm(M - M.conj().T)


def _multiplier(f, n, model):
    if model is None:
        f = np.asarray(f)
        if f.ndim == 1:
            if f.shape != (n,):
                raise DimensionMismatch(f"diagonal function has length {f.shape[0]}, expected {n}")
            return np.diag(f.astype(np.complex128))
        return linops.as_cmatrix(f, "M_f")
    from .lattice import multiplication_operator

    vals = np.asarray(f(model.lattice.coordinates()) if callable(f) else f)
    return multiplication_operator(model.lattice, vals, model.rep.dim).toarray()


def check_indefinite_module(D, functions=(), model=None) -> ModuleCheckReport:
    """Hermiticity of the parts, the anticommutation constant, commutator norms, compactness proxy.

    ``functions`` are diagonal vectors or full matrices when ``model`` is None;
    with a lattice ``model`` they are callables of the coordinate array (or
    arrays of site values) acting by site-wise multiplication.
    """
    q = wick_rotate(D)
    n = q.D.shape[0]
    C = condition1_constant(OperatorPair(q.ReD, q.ImD, ANTICOMMUTATOR))
    norms = []
    for f in functions:
        M = _multiplier(f, n, model)
        norms.append(linops.op_norm(q.D @ M - M @ q.D))
    eigs = proxy_eigenvalues(q.ReD, q.ImD)
    return ModuleCheckReport(
        re_hermitian_residual=_abs_hermitian_residual(q.ReD),
        im_hermitian_residual=_abs_hermitian_residual(q.ImD),
        C_anticommute=C,
        commutator_norms=norms,
        proxy_eigs=eigs,
        proxy_rate=proxy_decay_rate(eigs),
        notes={"proxy_gram": "I + ReD^2 + ImD^2"},
    )


@dataclass
class PairCheckReport:
    sum_hermitian_residual: float
    diff_hermitian_residual: float
    C: float

    def summary(self) -> dict:
        return dict(self.__dict__)


def check_pair(D1, D2) -> PairCheckReport:
    """Check that ``D1 + D2`` and ``D1 - D2`` are hermitian and weakly anticommute."""
    A = linops._square(D1, "D1")
    B = linops._square(D2, "D2")
    if A.shape != B.shape:
        raise DimensionMismatch(f"D1 has shape {A.shape} but D2 has shape {B.shape}")
    P, M = A + B, A - B
    return PairCheckReport(
        sum_hermitian_residual=_abs_hermitian_residual(P),
        diff_hermitian_residual=_abs_hermitian_residual(M),
        C=condition1_constant(OperatorPair(P, M, ANTICOMMUTATOR)),
    )


def lattice_indefinite_operator(model) -> np.ndarray:
    """``reverse_wick(D1, D2)`` for a lattice model, so ``Re D = (D1+D2)/2`` and ``Im D = (D1-D2)/2``."""
    return reverse_wick(model.dense("D1"), model.dense("D2"))
