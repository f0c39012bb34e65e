"""Flat-torus lattice Dirac operators and their decomposition by a fundamental symmetry.

Lattice operators are kept as translation stencils: for each site offset
``delta`` a field of ``d x d`` blocks ``B_delta(x)`` with

    (A psi)(x) = sum_delta B_delta(x) psi(x + delta).

Products, adjoints and sums stay in this form, and ``toarray()`` produces
the dense matrix in spinor-major order (index ``s * N**n + site``), which is
the ordering of ``kron(gamma_a, D_a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linops
from .clifford import (
    CliffordRep,
    SignatureSplit,
    gamma_matrices,
    _I_POWERS,
)
from .exceptions import BadAxis, DimensionMismatch, NotFirstOrder, NotHermitian, NotSymmetry, TooLarge

MAX_OPERATOR_DIM = 8192
IDENTITY_TOL = 1e-12
STENCIL_TOL = 1e-10


@dataclass(frozen=True)
class TorusLattice:
    """``N**n`` grid points with spacing ``h = 2 pi / N`` on the flat torus."""

    n: int
    N: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"space dimension must be positive, got n={self.n}")
        if self.N < 4 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 4, got N={self.N}")

    @property
    def h(self) -> float:
        return 2.0 * math.pi / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def num_sites(self) -> int:
        return self.N**self.n

    def coordinates(self) -> np.ndarray:
        """Array of shape ``(n, N, ..., N)``; entry ``a`` holds ``x_a`` at every site."""
        axis = self.h * np.arange(self.N)
        return np.stack(np.meshgrid(*([axis] * self.n), indexing="ij"))

    def canonical(self, offset) -> tuple:
        return tuple(int(o) % self.N for o in offset)

    def unit(self, axis: int, step: int = 1) -> tuple:
        """Offset ``step * e_axis`` (``axis`` is 1-based)."""
        if not 1 <= axis <= self.n:
            raise BadAxis(f"axis must lie in [1, {self.n}], got {axis}")
        off = [0] * self.n
        off[axis - 1] = step
        return self.canonical(off)

    def check_operator_dim(self, spinor_dim: int) -> int:
        total = spinor_dim * self.num_sites
        if total > MAX_OPERATOR_DIM:
            raise TooLarge(f"operator dimension {total} exceeds the dense cap {MAX_OPERATOR_DIM}")
        return total


class LatticeOperator:
    """Stencil representation of an operator on ``C^d``-valued lattice functions.

    Parameters
    ----------
    lattice : TorusLattice
    dim : int
        Fiber dimension ``d``.
    blocks : dict
        Maps offsets (tuples of ints, reduced mod N) to arrays of shape
        ``lattice.shape + (d, d)``.
    """

    __array_priority__ = 20

    def __init__(self, lattice: TorusLattice, dim: int, blocks=None):
        self.lattice = lattice
        self.dim = dim
        self.blocks = {}
        for off, B in (blocks or {}).items():
            B = np.asarray(B, dtype=np.complex128)
            if B.shape != lattice.shape + (dim, dim):
                B = np.broadcast_to(B, lattice.shape + (dim, dim)).copy()
            key = lattice.canonical(off)
            if key in self.blocks:
                self.blocks[key] = self.blocks[key] + B
            else:
                self.blocks[key] = B

    # -- constructors ----------------------------------------------------------

    @classmethod
    def site_field(cls, lattice, values) -> "LatticeOperator":
        """Site-wise multiplication by the block field ``values`` (shape ``lattice.shape + (d, d)``)."""
        values = np.asarray(values, dtype=np.complex128)
        return cls(lattice, values.shape[-1], {(0,) * lattice.n: values})

    @classmethod
    def scalar_field(cls, lattice, values, dim: int = 1) -> "LatticeOperator":
        values = np.asarray(values, dtype=np.complex128)
        return cls.site_field(lattice, values[..., None, None] * np.eye(dim))

    @classmethod
    def identity(cls, lattice, dim) -> "LatticeOperator":
        return cls(lattice, dim, {(0,) * lattice.n: np.eye(dim, dtype=np.complex128)})

    @classmethod
    def from_dense(cls, lattice, dim, M, offsets):
        """Extract the blocks of dense ``M`` at ``offsets``.

        Returns the operator and the Frobenius norm of everything outside
        those offsets.
        """
        M = linops.as_cmatrix(M)
        ns = lattice.num_sites
        if M.shape != (dim * ns, dim * ns):
            raise DimensionMismatch(f"expected a {dim * ns}-dimensional matrix, got shape {M.shape}")
        M4 = M.reshape(dim, ns, dim, ns)
        xs = np.arange(ns)
        blocks = {}
        captured = 0.0
        for off in {lattice.canonical(o) for o in offsets}:
            ys = _shifted_index(lattice, off)
            B = M4[:, xs, :, ys]
            captured += float(np.sum(np.abs(B) ** 2))
            blocks[off] = B.reshape(lattice.shape + (dim, dim))
        off_mass = math.sqrt(max(float(np.sum(np.abs(M) ** 2)) - captured, 0.0))
        return cls(lattice, dim, blocks), off_mass

    # -- algebra -----------------------------------------------------------------

    def _check_compatible(self, other):
        if not isinstance(other, LatticeOperator):
            return NotImplemented
        if other.lattice != self.lattice or other.dim != self.dim:
            raise DimensionMismatch("lattice operators live on different lattices or fibers")
        return None

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        blocks = dict(self.blocks)
        for off, B in other.blocks.items():
            blocks[off] = blocks[off] + B if off in blocks else B
        return LatticeOperator(self.lattice, self.dim, blocks)

    def __neg__(self):
        return LatticeOperator(self.lattice, self.dim, {k: -B for k, B in self.blocks.items()})

    def __sub__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        blocks = dict(self.blocks)
        for off, B in other.blocks.items():
            blocks[off] = blocks[off] - B if off in blocks else -B
        return LatticeOperator(self.lattice, self.dim, blocks)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return LatticeOperator(self.lattice, self.dim, {k: scalar * B for k, B in self.blocks.items()})

    __rmul__ = __mul__

    def __matmul__(self, other):
        if not isinstance(other, LatticeOperator):
            return self.toarray() @ np.asarray(other)
        self._check_compatible(other)
        axes = tuple(range(self.lattice.n))
        out = {}
        for d1, A in self.blocks.items():
            for d2, B in other.blocks.items():
                key = self.lattice.canonical(np.add(d1, d2))
                prod = A @ np.roll(B, tuple(-s for s in d1), axis=axes)
                out[key] = out[key] + prod if key in out else prod
        return LatticeOperator(self.lattice, self.dim, out)

    def __rmatmul__(self, other):
        return np.asarray(other) @ self.toarray()

    @property
    def H(self) -> "LatticeOperator":
        axes = tuple(range(self.lattice.n))
        out = {}
        for off, B in self.blocks.items():
            moved = np.roll(B, off, axis=axes)
            out[tuple(-s for s in off)] = np.conj(np.swapaxes(moved, -1, -2))
        return LatticeOperator(self.lattice, self.dim, out)

    # -- inspection --------------------------------------------------------------

    @property
    def shape(self) -> tuple:
        size = self.dim * self.lattice.num_sites
        return (size, size)

    def offsets(self) -> list:
        return sorted(self.blocks)

    def block(self, offset) -> np.ndarray:
        key = self.lattice.canonical(offset)
        if key in self.blocks:
            return self.blocks[key]
        return np.zeros(self.lattice.shape + (self.dim, self.dim), dtype=np.complex128)

    def norm_bound(self) -> float:
        """Upper bound ``sum_delta max_x |B_delta(x)|`` on the operator norm."""
        total = 0.0
        for B in self.blocks.values():
            flat = B.reshape(-1, self.dim, self.dim)
            if not np.any(flat):
                continue
            total += float(np.max(np.linalg.norm(flat, ord=2, axis=(-2, -1))))
        return total

    def frobenius(self) -> float:
        return math.sqrt(sum(float(np.sum(np.abs(B) ** 2)) for B in self.blocks.values()))

    def equals(self, other) -> bool:
        """Bit-level equality of the represented operators."""
        keys = set(self.blocks) | set(other.blocks)
        return all(np.array_equal(self.block(k), other.block(k)) for k in keys)

    def toarray(self) -> np.ndarray:
        lat, d = self.lattice, self.dim
        ns = lat.num_sites
        lat.check_operator_dim(d)
        M4 = np.zeros((d, ns, d, ns), dtype=np.complex128)
        xs = np.arange(ns)
        for off, B in self.blocks.items():
            ys = _shifted_index(lat, off)
            M4[:, xs, :, ys] += B.reshape(ns, d, d)
        return M4.reshape(d * ns, d * ns)

    def __array__(self, dtype=None, copy=None):
        A = self.toarray()
        return A if dtype is None else A.astype(dtype)

    def __repr__(self):
        return (
            f"LatticeOperator(n={self.lattice.n}, N={self.lattice.N}, dim={self.dim}, "
            f"offsets={len(self.blocks)})"
        )


def _shifted_index(lattice, offset):
    grid = np.indices(lattice.shape).reshape(lattice.n, -1)
    shifted = (grid + np.asarray(offset)[:, None]) % lattice.N
    return np.ravel_multi_index(tuple(shifted), lattice.shape)


def _residual_norm(M) -> float:
    if isinstance(M, LatticeOperator):
        return M.norm_bound()
    M = np.asarray(M)
    return float(np.linalg.norm(M)) if np.any(M) else 0.0


def _adj(M):
    return M.H if isinstance(M, LatticeOperator) else np.asarray(M).conj().T


# -- frame fields ----------------------------------------------------------------


@dataclass(frozen=True)
class FrameField:
    """Orthonormal frame rotated in ``rot_plane`` by ``theta(x) = alpha sin(x_dep_axis)``.

    Axes are 1-based.  The rotation plane ``(p, q)`` must straddle the split,
    ``p <= n1 < q``, so that the frame mixes E1 and E2 directions.
    """

    split: SignatureSplit
    rot_plane: tuple | None = None
    dep_axis: int = 1
    alpha: float = 0.0

    def __post_init__(self):
        n, n1 = self.split.n, self.split.n1
        if not 1 <= self.dep_axis <= n:
            raise BadAxis(f"dep_axis must lie in [1, {n}], got {self.dep_axis}")
        if self.rot_plane is None:
            if self.alpha != 0.0:
                raise ValueError("a nonzero alpha needs a rotation plane")
            return
        p, q = self.rot_plane
        if not (1 <= p <= n1 < q <= n):
            raise ValueError(f"rot_plane {self.rot_plane} must satisfy 1 <= p <= n1={n1} < q <= n={n}")
        object.__setattr__(self, "rot_plane", (int(p), int(q)))

    @property
    def n(self) -> int:
        return self.split.n

    def angles(self, lattice: TorusLattice) -> np.ndarray:
        x = lattice.coordinates()[self.dep_axis - 1]
        return self.alpha * np.sin(x)

    def matrices(self, lattice: TorusLattice) -> np.ndarray:
        """Frame matrices, shape ``lattice.shape + (n, n)``; column ``j`` is ``e_j(x)``."""
        R = np.broadcast_to(np.eye(self.n), lattice.shape + (self.n, self.n)).copy()
        if self.rot_plane is None or self.alpha == 0.0:
            return R
        p, q = self.rot_plane[0] - 1, self.rot_plane[1] - 1
        th = self.angles(lattice)
        c, s = np.cos(th), np.sin(th)
        R[..., p, p] = c
        R[..., q, p] = s
        R[..., p, q] = -s
        R[..., q, q] = c
        return R


# -- assembly ----------------------------------------------------------------------


def difference_op(lat: TorusLattice, axis: int) -> LatticeOperator:
    """Periodic central difference ``(psi(x + h e_a) - psi(x - h e_a)) / 2h`` on scalar functions."""
    c = 1.0 / (2.0 * lat.h)
    return LatticeOperator(lat, 1, {lat.unit(axis, 1): c, lat.unit(axis, -1): -c})


def _gammas_along(rep: CliffordRep, vectors):
    """``gamma(v)`` for a field of vectors of shape ``(..., n)``."""
    return np.einsum("...a,aij->...ij", vectors, np.asarray(rep.gammas))


def build_dirac(lat: TorusLattice, rep: CliffordRep, frame: FrameField | None = None) -> LatticeOperator:
    """``sum_a gamma_a (x) D_a``.

    With a frame field the operator is assembled as ``sum_j gamma(e_j) nabla_{e_j}``
    instead; for orthonormal frames the two agree up to rounding.
    """
    if rep.n != lat.n:
        raise DimensionMismatch(f"representation has n={rep.n} but lattice has n={lat.n}")
    lat.check_operator_dim(rep.dim)
    c = 1.0 / (2.0 * lat.h)
    blocks = {}
    if frame is None:
        coeffs = [np.broadcast_to(g, lat.shape + g.shape) for g in rep.gammas]
    else:
        R = frame.matrices(lat)
        # coefficient of D_b is sum_j gamma(e_j) e_j^b
        per_frame = _gammas_along(rep, np.swapaxes(R, -1, -2))
        coeffs = [np.einsum("...j,...jkl->...kl", R[..., b, :], per_frame) for b in range(lat.n)]
    for a in range(1, lat.n + 1):
        blocks[lat.unit(a, 1)] = c * coeffs[a - 1]
        blocks[lat.unit(a, -1)] = -c * coeffs[a - 1]
    return LatticeOperator(lat, rep.dim, blocks)


def gamma1_blocks(lat: TorusLattice, rep: CliffordRep, frame: FrameField) -> np.ndarray:
    """Site-wise fundamental symmetry ``i^k gamma(e_1(x)) ... gamma(e_n1(x))``."""
    n1 = frame.split.n1
    R = frame.matrices(lat)
    out = np.broadcast_to(np.eye(rep.dim, dtype=np.complex128), lat.shape + (rep.dim, rep.dim)).copy()
    for j in range(n1):
        out = out @ _gammas_along(rep, R[..., :, j])
    k = n1 * (n1 + 1) // 2
    return _I_POWERS[k % 4] * out


def build_gamma1_field(lat: TorusLattice, rep: CliffordRep, frame: FrameField) -> LatticeOperator:
    if frame.n != lat.n or rep.n != lat.n:
        raise DimensionMismatch("frame, representation and lattice must share n")
    return LatticeOperator.site_field(lat, gamma1_blocks(lat, rep, frame))


def decompose(D, Gamma1, split: SignatureSplit, tol: float = IDENTITY_TOL):
    """Split ``D = D1 + D2`` with ``D1 = (D - (-1)^n1 Gamma1 D Gamma1) / 2`` and ``D2 = D - D1``.

    Works on dense arrays and on :class:`LatticeOperator` alike.
    """
    dense = not isinstance(D, LatticeOperator)
    if dense:
        D = linops.as_cmatrix(D, "D")
        Gamma1 = linops.as_cmatrix(Gamma1, "Gamma1")
        eye = np.eye(D.shape[0])
    else:
        eye = LatticeOperator.identity(D.lattice, D.dim)
    herm = _residual_norm(Gamma1 - _adj(Gamma1))
    invol = _residual_norm(Gamma1 @ Gamma1 - eye)
    if herm > tol or invol > tol:
        raise NotSymmetry(f"Gamma1 is not a hermitian unitary (hermitian {herm:.2e}, involution {invol:.2e})")
    conj = Gamma1 @ D @ Gamma1
    D1 = 0.5 * (D - split.sign * conj)
    if dense:
        D1 = _snap_to_grid(D1, D)
    else:
        D1 = LatticeOperator(D1.lattice, D1.dim, {k: _snap_to_grid(B, D.block(k)) for k, B in D1.blocks.items()})
    D2 = D - D1
    return D1, D2


def _snap_component(b, a):
    out = b.copy()
    mask = a != 0
    q = np.spacing(np.abs(a[mask]))
    out[mask] = np.round(b[mask] / q) * q
    return out


def _snap_to_grid(B, A):
    """Round ``B`` entrywise onto the ulp grid of the matching entries of ``A``.

    Where a component of ``B`` has the sign of ``A`` and no larger magnitude,
    ``A - B`` is then exact, so ``(A - B) + B`` reproduces ``A`` bit for bit.
    Components where ``A`` is zero are left alone.
    """
    B = np.asarray(B, dtype=np.complex128)
    A = np.broadcast_to(np.asarray(A, dtype=np.complex128), B.shape)
    return _snap_component(B.real, A.real) + 1j * _snap_component(B.imag, A.imag)


def anticommutator(A, B):
    return A @ B + B @ A


@dataclass(frozen=True, eq=False)
class TorusModel:
    lattice: TorusLattice
    rep: CliffordRep
    frame: FrameField
    D: LatticeOperator
    Gamma1: LatticeOperator
    D1: LatticeOperator
    D2: LatticeOperator
    _dense: dict = field(default_factory=dict, repr=False)

    @property
    def split(self) -> SignatureSplit:
        return self.frame.split

    @property
    def dim(self) -> int:
        return self.D.shape[0]

    @cached_property
    def anticomm(self) -> LatticeOperator:
        """``{D1, D2}`` in stencil form."""
        return anticommutator(self.D1, self.D2)

    def dense(self, name: str) -> np.ndarray:
        """Dense matrix of ``D``, ``Gamma1``, ``D1``, ``D2`` or ``anticomm`` (cached)."""
        if name not in self._dense:
            self._dense[name] = getattr(self, name).toarray()
        return self._dense[name]

    def identity_residuals(self) -> dict:
        """Residual norms (stencil bounds) of the structural identities of the decomposition."""
        s = self.split.sign
        G, D1, D2 = self.Gamma1, self.D1, self.D2
        eye = LatticeOperator.identity(self.lattice, self.rep.dim)
        return {
            "sum_exact": bool((D1 + D2).equals(self.D)),
            "D_hermitian": (self.D - self.D.H).norm_bound(),
            "D1_hermitian": (D1 - D1.H).norm_bound(),
            "D2_hermitian": (D2 - D2.H).norm_bound(),
            "Gamma1_hermitian": (G - G.H).norm_bound(),
            "Gamma1_involution": (G @ G - eye).norm_bound(),
            "D1_conjugation": (G @ D1 @ G + s * D1).norm_bound(),
            "D2_conjugation": (G @ D2 @ G - s * D2).norm_bound(),
        }


def build_model(lat: TorusLattice, frame: FrameField) -> TorusModel:
    if frame.n != lat.n:
        raise DimensionMismatch(f"frame has n={frame.n} but lattice has n={lat.n}")
    rep = gamma_matrices(lat.n)
    D = build_dirac(lat, rep)
    G1 = build_gamma1_field(lat, rep, frame)
    D1, D2 = decompose(D, G1, frame.split)
    return TorusModel(lattice=lat, rep=rep, frame=frame, D=D, Gamma1=G1, D1=D1, D2=D2)


# -- first-order splitting ----------------------------------------------------------


def first_order_offsets(lat: TorusLattice) -> set:
    """Diagonal plus stride-1 and stride-2 axis offsets.

    Products of two central-difference operators reach ``x +- 2h e_a``, so the
    anticommutator of two first-order lattice operators lives on this set.
    """
    offs = {lat.canonical((0,) * lat.n)}
    for a in range(1, lat.n + 1):
        for k in (1, 2):
            offs.add(lat.unit(a, k))
            offs.add(lat.unit(a, -k))
    return offs


def split_first_order(A, model: TorusModel, tol: float = STENCIL_TOL):
    """Write a first-order lattice operator as ``A = A1 + A2`` by frame direction.

    Along each axis ``a`` and stride ``k`` the forward/backward blocks ``F, B``
    are split into a derivative coefficient ``C = k h (F - B)`` acting through
    ``(S_k - S_-k) / 2kh`` and a bounded average ``(F + B) / 2``.  The
    coefficient vector field is resolved along the frame: components along
    ``e_1 .. e_n1`` go to ``A1``, the rest to ``A2``.  ``A1`` also receives
    every bounded part (diagonal and averages).

    Raises
    ------
    NotFirstOrder
        If the relative Frobenius mass outside the allowed offsets exceeds ``tol``.
    """
    lat, d = model.lattice, model.rep.dim
    allowed = first_order_offsets(lat)
    dense_input = not isinstance(A, LatticeOperator)
    if dense_input:
        A_st, off_mass = LatticeOperator.from_dense(lat, d, A, allowed)
        total = float(np.linalg.norm(np.asarray(A)))
    else:
        A_st = A
        off_mass = math.sqrt(
            sum(float(np.sum(np.abs(B) ** 2)) for k, B in A.blocks.items() if k not in allowed)
        )
        total = A.frobenius()
    rel = off_mass / total if total > 0 else 0.0
    if rel > tol:
        raise NotFirstOrder(f"relative off-stencil mass {rel:.3e} exceeds {tol:.1e}", off_stencil_mass=rel)

    R = model.frame.matrices(lat)
    n1 = model.split.n1
    proj1 = R[..., :, :n1] @ np.swapaxes(R[..., :, :n1], -1, -2)
    proj2 = R[..., :, n1:] @ np.swapaxes(R[..., :, n1:], -1, -2)

    zero = lat.canonical((0,) * lat.n)
    part1 = {zero: A_st.block(zero)}
    part2 = {}
    h = lat.h
    for k in (1, 2):
        coeffs = []
        for a in range(1, lat.n + 1):
            fwd, bwd = lat.unit(a, k), lat.unit(a, -k)
            if fwd == bwd:
                # x + kh e_a and x - kh e_a coincide: no antisymmetric part exists
                part1[fwd] = part1.get(fwd, 0) + A_st.block(fwd)
                coeffs.append(None)
                continue
            F, B = A_st.block(fwd), A_st.block(bwd)
            avg = 0.5 * (F + B)
            part1[fwd] = part1.get(fwd, 0) + avg
            part1[bwd] = part1.get(bwd, 0) + avg
            coeffs.append(k * h * (F - B))
        for a in range(1, lat.n + 1):
            if coeffs[a - 1] is None:
                continue
            c1 = sum(proj1[..., b, a - 1, None, None] * coeffs[b] for b in range(lat.n) if coeffs[b] is not None)
            c2 = sum(proj2[..., b, a - 1, None, None] * coeffs[b] for b in range(lat.n) if coeffs[b] is not None)
            scale = 1.0 / (2 * k * h)
            fwd, bwd = lat.unit(a, k), lat.unit(a, -k)
            part1[fwd] = part1.get(fwd, 0) + scale * c1
            part1[bwd] = part1.get(bwd, 0) - scale * c1
            part2[fwd] = part2.get(fwd, 0) + scale * c2
            part2[bwd] = part2.get(bwd, 0) - scale * c2
    A1 = LatticeOperator(lat, d, part1)
    A2 = LatticeOperator(lat, d, part2)
    if dense_input:
        return A1.toarray(), A2.toarray()
    return A1, A2


def relative_bound_norm(A_i, D_i) -> float:
    """``max_{+-} |A_i (D_i +- i)^-1|``."""
    A = linops.as_cmatrix(A_i, "A_i")
    Dm = linops.as_cmatrix(D_i, "D_i")
    if not linops.is_hermitian(Dm):
        raise NotHermitian("D_i must be hermitian")
    if not np.any(A):
        return 0.0
    return max(linops.op_norm(A @ linops.resolvent(Dm, z)) for z in (1j, -1j))


def multiplication_operator(lat: TorusLattice, values, dim: int) -> LatticeOperator:
    """Site-wise multiplication by a scalar lattice function, tensored with the fiber identity."""
    return LatticeOperator.scalar_field(lat, values, dim)
