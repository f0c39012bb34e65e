"""Quantitative checks for weakly (anti)commuting pairs of hermitian matrices.

A pair ``(S, T)`` weakly (anti)commutes when its bracket is bounded by the
combined graph norm ``<x|x> + <Sx|Sx> + <Tx|Tx> = <x|G x>`` with
``G = I + S^2 + T^2``.  In finite dimensions every pair qualifies; what is
informative is the size of the optimal constant and how it behaves along a
family of refinements, together with the rates at which the resolvent
identities used to prove self-adjointness of ``S + T`` converge.

Spectral parameters ``lambda`` and ``mu`` are always purely imaginary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linops
from .exceptions import NotHermitian, NotPositiveDefinite, Singular, WeakLabError

COMMUTATOR = "commutator"
ANTICOMMUTATOR = "anticommutator"
KINDS = (COMMUTATOR, ANTICOMMUTATOR)

DEFAULT_GRID_COUNT = 11
NUM_RANDOM_TEST_VECTORS = 8
NUM_EXTREME_TEST_VECTORS = 4
MAX_LAMBDA0_DOUBLINGS = 60

PAULI = {
    1: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    2: np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    3: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True, eq=False)
class OperatorPair:
    """Two hermitian matrices and the bracket they are tested under."""

    S: np.ndarray
    T: np.ndarray
    kind: str = COMMUTATOR

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        S = linops.as_cmatrix(self.S, "S")
        T = linops.as_cmatrix(self.T, "T")
        if S.shape != T.shape or S.shape[0] != S.shape[1]:
            raise linops.DimensionMismatch(f"S and T must be square of equal size, got {S.shape}, {T.shape}")
        for name, M in (("S", S), ("T", T)):
            res = linops.hermiticity_residual(M)
            if res > linops.HERMITIAN_RTOL:
                raise NotHermitian(f"{name} is not hermitian (relative residual {res:.3e})")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "T", T)

    @property
    def dim(self) -> int:
        return self.S.shape[0]

    @cached_property
    def G(self) -> np.ndarray:
        """Gram matrix ``I + S^2 + T^2`` of the combined graph inner product."""
        S, T = self.S, self.T
        G = np.eye(self.dim) + S.conj().T @ S + T.conj().T @ T
        return 0.5 * (G + G.conj().T)

    def graph_inner(self, x, y) -> complex:
        """``<x|y> + <Sx|Sy> + <Tx|Ty>``."""
        x, y = np.asarray(x), np.asarray(y)
        return complex(np.vdot(x, y) + np.vdot(self.S @ x, self.S @ y) + np.vdot(self.T @ x, self.T @ y))

    def with_kind(self, kind: str) -> "OperatorPair":
        return OperatorPair(self.S, self.T, kind)


@dataclass
class DiagnosticsTable:
    """``(parameter, value)`` rows with a least-squares log-log slope over the last half."""

    name: str
    params: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.params.shape != self.values.shape or self.params.ndim != 1:
            raise ValueError("params and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.params) <= 0):
            raise ValueError("parameters must be strictly increasing")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError(f"table {self.name!r} has negative or non-finite values")

    @property
    def fitted_rate(self) -> float:
        return fitted_rate(self.params, self.values)

    @property
    def first(self) -> float:
        return float(self.values[0])

    @property
    def last(self) -> float:
        return float(self.values[-1])

    def rows(self):
        return list(zip(self.params.tolist(), self.values.tolist()))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "first": self.first,
            "last": self.last,
            "fitted_rate": self.fitted_rate,
            "max": float(np.max(self.values)),
            **self.metadata,
        }


def fitted_rate(params, values) -> float:
    """Slope of ``log value`` against ``log param`` over the last half of the rows.

    NaN when any fitted value is zero (no asymptotic rate exists).
    """
    params = np.asarray(params, dtype=float)
    values = np.asarray(values, dtype=float)
    tail = slice(len(params) // 2, None)
    p, v = params[tail], values[tail]
    if len(p) < 2 or np.any(v <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(p), np.log(v), 1)
    return float(slope)


# -- brackets and constants ------------------------------------------------------------


def bracket(pair: OperatorPair) -> np.ndarray:
    """``ST - TS`` or ``ST + TS`` according to ``pair.kind``."""
    ST = pair.S @ pair.T
    TS = pair.T @ pair.S
    return ST - TS if pair.kind == COMMUTATOR else ST + TS


def _gram_of(X):
    XX = X.conj().T @ X
    return 0.5 * (XX + XX.conj().T)


def condition1_constant(pair: OperatorPair) -> float:
    """Optimal ``C`` with ``|[S,T]_+- x|^2 <= C <x|G x>`` for all ``x``."""
    return linops.gen_eig_max(_gram_of(bracket(pair)), pair.G)


def condition1_witness(pair: OperatorPair) -> tuple:
    """``(C, v)`` where ``v`` attains the bound with equality."""
    X = bracket(pair)
    if not np.any(X):
        return 0.0, np.eye(pair.dim, 1)[:, 0].astype(np.complex128)
    return linops.gen_eig_max_vector(_gram_of(X), pair.G)


def old_constant(pair: OperatorPair) -> float:
    """Optimal constant when the bracket may only be bounded by the graph norm of ``S``."""
    G_old = np.eye(pair.dim) + pair.S.conj().T @ pair.S
    return linops.gen_eig_max(_gram_of(bracket(pair)), 0.5 * (G_old + G_old.conj().T))


def double(pair: OperatorPair) -> OperatorPair:
    """Turn an anticommuting pair into a commuting one via ``S x sigma1``, ``T x sigma2``.

    ``[S x s1, T x s2] = {S, T} x (i sigma3)``, so the bracket keeps its norm.
    """
    if pair.kind != ANTICOMMUTATOR:
        raise ValueError("only anticommutator-kind pairs can be doubled")
    return OperatorPair(np.kron(pair.S, PAULI[1]), np.kron(pair.T, PAULI[2]), COMMUTATOR)


# -- resolvent families ------------------------------------------------------------------


def _columns(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=np.complex128)
    return xi[:, None] if xi.ndim == 1 else xi


def _strong(B, xi) -> float:
    """``max_j |B xi_j|`` over the columns of ``xi``."""
    return float(np.max(np.linalg.norm(B @ _columns(xi), axis=0)))


def approx_identity(pair: OperatorPair, n: float) -> np.ndarray:
    """``A_n = -n^2 (S - i n)^-1 (T - i n)^-1``."""
    n = float(n)
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    return -(n**2) * (linops.resolvent(pair.S, -1j * n) @ linops.resolvent(pair.T, -1j * n))


def lambda_grid(lambda0: float, count: int = DEFAULT_GRID_COUNT, sign: int = 1) -> np.ndarray:
    """``sign * i * lambda0 * 2^k`` for ``k = 0 .. count-1``."""
    return sign * 1j * float(lambda0) * 2.0 ** np.arange(count)


def _table(name, grid, values, **meta):
    return DiagnosticsTable(name, np.abs(np.asarray(grid)), np.asarray(values, dtype=float), dict(meta))


def resolvent_identity_tables(pair: OperatorPair, xi, grid) -> tuple:
    """Distances ``|B_lambda xi - xi|`` for ``lambda (S+lambda)^-1``, ``lambda (T+lambda)^-1``
    and ``lambda^2 (S+lambda)^-1 (T+lambda)^-1``."""
    xi = _columns(xi)
    a, b, c = [], [], []
    for lam in grid:
        RS = linops.resolvent(pair.S, lam)
        RT = linops.resolvent(pair.T, lam)
        a.append(float(np.max(np.linalg.norm(lam * (RS @ xi) - xi, axis=0))))
        b.append(float(np.max(np.linalg.norm(lam * (RT @ xi) - xi, axis=0))))
        c.append(float(np.max(np.linalg.norm(lam**2 * (RS @ (RT @ xi)) - xi, axis=0))))
    return (
        _table("identity_lambda_RS", grid, a),
        _table("identity_lambda_RT", grid, b),
        _table("identity_lambda2_RS_RT", grid, c),
    )


def mixed_resolvent_tables(pair: OperatorPair, mu: complex, xi, grid) -> tuple:
    """``|[S,T] (S+lambda)^-1 (T+mu)^-1 xi|`` and the ``S <-> T`` version, ``mu`` fixed.

    The supremum over the grid of the operator norms is recorded as ``uniform_bound``.
    """
    xi = _columns(xi)
    X = bracket(pair.with_kind(COMMUTATOR))
    RT_mu = linops.resolvent(pair.T, mu)
    RS_mu = linops.resolvent(pair.S, mu)
    st, ts, st_norm, ts_norm = [], [], [], []
    for lam in grid:
        B1 = X @ linops.resolvent(pair.S, lam) @ RT_mu
        B2 = X @ linops.resolvent(pair.T, lam) @ RS_mu
        st.append(_strong(B1, xi))
        ts.append(_strong(B2, xi))
        st_norm.append(linops.op_norm(B1))
        ts_norm.append(linops.op_norm(B2))
    return (
        _table("mixed_X_RS_RTmu", grid, st, uniform_bound=max(st_norm), mu=abs(mu)),
        _table("mixed_X_RT_RSmu", grid, ts, uniform_bound=max(ts_norm), mu=abs(mu)),
    )


def _lambda2_commutators(pair, lam):
    """``lambda^2 [S, R_S R_T]`` and ``lambda^2 [T, R_S R_T]`` at one grid point."""
    P = linops.resolvent(pair.S, lam) @ linops.resolvent(pair.T, lam)
    return lam**2 * (pair.S @ P - P @ pair.S), lam**2 * (pair.T @ P - P @ pair.T)


@dataclass(frozen=True)
class UniformBound:
    """Suprema over the grid of ``|lambda^2 [S, R_S R_T]|`` and ``|lambda^2 [T, R_S R_T]|``."""

    sup_S: float
    sup_T: float
    ratio_S: float
    ratio_T: float
    norms_S: tuple
    norms_T: tuple

    def as_tuple(self):
        return self.sup_S, self.sup_T


def _upper_half_ratio(values) -> float:
    tail = np.asarray(values[len(values) // 2:], dtype=float)
    if not np.any(tail):
        return 1.0
    if np.min(tail) == 0.0:
        return float("inf")
    return float(np.max(tail) / np.min(tail))


def commutator_uniform_bound(pair: OperatorPair, grid) -> UniformBound:
    """Sup of the operator norms over the grid plus the upper-half max/min ratio."""
    ns, nt = [], []
    for lam in grid:
        BS, BT = _lambda2_commutators(pair, lam)
        ns.append(linops.op_norm(BS))
        nt.append(linops.op_norm(BT))
    return UniformBound(
        sup_S=max(ns), sup_T=max(nt),
        ratio_S=_upper_half_ratio(ns), ratio_T=_upper_half_ratio(nt),
        norms_S=tuple(ns), norms_T=tuple(nt),
    )


def commutator_strong_tables(pair: OperatorPair, xi, grid) -> tuple:
    """Strong versions of the families bounded by :func:`commutator_uniform_bound`."""
    xi = _columns(xi)
    vs, vt = [], []
    for lam in grid:
        BS, BT = _lambda2_commutators(pair, lam)
        vs.append(_strong(BS, xi))
        vt.append(_strong(BT, xi))
    return _table("strong_lambda2_comm_S", grid, vs), _table("strong_lambda2_comm_T", grid, vt)


def product_resolvent_constant(pair: OperatorPair, lam: complex, mu: complex) -> float:
    """Smallest ``c`` with ``|[S,T] psi| <= c (1/|lambda| + 1/|mu|) |(T+mu)(S+lambda) psi|``."""
    X = bracket(pair.with_kind(COMMUTATOR))
    n = pair.dim
    M = (pair.T + mu * np.eye(n)) @ (pair.S + lam * np.eye(n))
    weight = (1.0 / abs(lam) + 1.0 / abs(mu)) ** 2
    try:
        c2 = linops.gen_eig_max(_gram_of(X), weight * _gram_of(M))
    except NotPositiveDefinite as exc:
        raise Singular(f"(T+mu)(S+lambda) is singular at lambda={lam}, mu={mu}", shift=lam) from exc
    return math.sqrt(max(c2, 0.0))


def resolvent_approx_error(pair: OperatorPair, mu: complex, lam: complex) -> float:
    """``|(S+T+mu)^-1 - (S+T+lambda^-1 ST+mu)^-1|`` for an anticommuting pair."""
    if pair.kind != ANTICOMMUTATOR:
        raise ValueError("the resolvent approximation applies to anticommutator-kind pairs")
    if mu == 0 or lam == 0:
        raise ValueError("mu and lambda must be nonzero")
    ST = pair.S @ pair.T
    if not np.any(ST):
        return 0.0
    sum_ = pair.S + pair.T
    try:
        exact = linops.resolvent(sum_, mu)
        approx = linops.resolvent(sum_ + ST / lam, mu)
    except Singular as exc:
        raise Singular(f"resolvent approximation singular at lambda={lam}: {exc}", shift=lam) from exc
    return linops.op_norm(exact - approx)


def sum_approx_residual(pair: OperatorPair, xi, n: float) -> float:
    """``|[S+T, A_n] xi|``, the term that must vanish for ``S+T`` to be essentially self-adjoint."""
    if pair.kind != COMMUTATOR:
        raise ValueError("the approximate-identity residual applies to commutator-kind pairs")
    A = approx_identity(pair, n)
    H = pair.S + pair.T
    return _strong(H @ A - A @ H, xi)


# -- tables over grids ----------------------------------------------------------------------


def approx_identity_tables(pair: OperatorPair, xi, grid_n) -> tuple:
    """``|A_n xi - xi|`` and ``|A_n|`` over a grid of positive ``n``."""
    xi = _columns(xi)
    dist, norms = [], []
    for n in grid_n:
        A = approx_identity(pair, n)
        dist.append(float(np.max(np.linalg.norm(A @ xi - xi, axis=0))))
        norms.append(linops.op_norm(A))
    return _table("An_minus_identity", grid_n, dist), _table("An_norm", grid_n, norms)


def sum_approx_table(pair: OperatorPair, xi, grid_n) -> DiagnosticsTable:
    return _table("sum_approx_residual", grid_n, [sum_approx_residual(pair, xi, n) for n in grid_n])


def resolvent_approx_table(pair: OperatorPair, mu: complex, grid) -> DiagnosticsTable:
    return _table(
        "resolvent_approx_error", grid, [resolvent_approx_error(pair, mu, lam) for lam in grid], mu=abs(mu)
    )


# -- parameter selection -----------------------------------------------------------------------


def test_vectors(pair: OperatorPair, rng: np.random.Generator) -> np.ndarray:
    """Seeded complex Gaussian unit vectors plus extreme eigenvectors of ``G``, as columns."""
    rand = linops.random_unit_vectors(pair.dim, NUM_RANDOM_TEST_VECTORS, rng)
    _, V = np.linalg.eigh(pair.G)
    half = NUM_EXTREME_TEST_VECTORS // 2
    idx = sorted(set(range(min(half, pair.dim))) | set(range(max(pair.dim - half, 0), pair.dim)))
    return np.hstack([rand, V[:, idx]])


def _grid_is_usable(pair, grid, mu):
    sum_ = pair.S + pair.T
    ST = pair.S @ pair.T
    for lam in grid:
        linops.resolvent(pair.S, lam)
        linops.resolvent(pair.T, lam)
        product_resolvent_constant(pair, lam, mu)
        if pair.kind == ANTICOMMUTATOR:
            linops.resolvent(sum_ + ST / lam, mu)


def choose_lambda0(pair: OperatorPair, grid_count: int = DEFAULT_GRID_COUNT, lambda0="auto", mu=None):
    """Pick ``lambda0`` (and ``mu``) so every resolvent on the grid is invertible.

    ``auto`` starts from ``2 (1 + sqrt(C))`` with ``C`` the optimal constant and
    doubles until the grid is usable.  Returns ``(lambda0, mu, C)``.
    """
    C = condition1_constant(pair)
    if lambda0 != "auto":
        lam0 = float(lambda0)
        if lam0 <= 0:
            raise ValueError(f"lambda0 must be positive, got {lambda0}")
        mu_val = 2j * lam0 if mu is None else complex(mu)
        _grid_is_usable(pair, lambda_grid(lam0, grid_count), mu_val)
        return lam0, mu_val, C
    lam0 = 2.0 * (1.0 + math.sqrt(C))
    for _ in range(MAX_LAMBDA0_DOUBLINGS):
        mu_val = 2j * lam0 if mu is None else complex(mu)
        try:
            _grid_is_usable(pair, lambda_grid(lam0, grid_count), mu_val)
            _grid_is_usable(pair, lambda_grid(lam0, grid_count, sign=-1), mu_val)
            return lam0, mu_val, C
        except Singular:
            lam0 *= 2.0
    raise WeakLabError("could not find a lambda0 with invertible resolvents on the whole grid")


@dataclass
class ResolventReport:
    """All convergence tables for one commuting-kind pair at one grid sign."""

    lambda0: float
    mu: complex
    C: float
    sign: int
    identity: tuple
    mixed: tuple
    uniform: UniformBound
    strong: tuple
    An: tuple
    sum_approx: DiagnosticsTable
    product_const: DiagnosticsTable

    def tables(self) -> list:
        return [*self.identity, *self.mixed, *self.strong, *self.An, self.sum_approx, self.product_const]

    def summary(self) -> dict:
        return {
            "sign": self.sign,
            "tables": {t.name: t.summary() for t in self.tables()},
            "uniform_bound": {
                "sup_S": self.uniform.sup_S,
                "sup_T": self.uniform.sup_T,
                "upper_half_ratio_S": self.uniform.ratio_S,
                "upper_half_ratio_T": self.uniform.ratio_T,
            },
        }


def resolvent_suite(pair: OperatorPair, xi, lambda0: float, mu: complex, grid_count=DEFAULT_GRID_COUNT, sign=1):
    """Run every approximate-identity diagnostic on a commutator-kind pair."""
    if pair.kind != COMMUTATOR:
        raise ValueError("resolvent diagnostics need a commutator-kind pair; double() it first")
    grid = lambda_grid(lambda0, grid_count, sign)
    grid_n = np.abs(grid)
    c32 = [product_resolvent_constant(pair, lam, mu) for lam in grid]
    return ResolventReport(
        lambda0=lambda0,
        mu=mu,
        C=condition1_constant(pair),
        sign=sign,
        identity=resolvent_identity_tables(pair, xi, grid),
        mixed=mixed_resolvent_tables(pair, mu, xi, grid),
        uniform=commutator_uniform_bound(pair, grid),
        strong=commutator_strong_tables(pair, xi, grid),
        An=approx_identity_tables(pair, xi, grid_n),
        sum_approx=sum_approx_table(pair, xi, grid_n),
        product_const=_table("product_resolvent_constant", grid, c32, mu=abs(mu)),
    )
