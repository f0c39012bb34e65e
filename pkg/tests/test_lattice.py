import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from weaklab import clifford, lattice, linops
from weaklab.exceptions import BadAxis, NotFirstOrder, NotSymmetry, TooLarge
from weaklab.lattice import FrameField, LatticeOperator, TorusLattice


def model(n, n1, N, plane, dep, alpha):
    frame = FrameField(clifford.SignatureSplit.of(n, n1), plane, dep, alpha)
    return lattice.build_model(TorusLattice(n, N), frame)


def random_stencil(lat, d, rng, offsets):
    blocks = {
        off: rng.standard_normal(lat.shape + (d, d)) + 1j * rng.standard_normal(lat.shape + (d, d))
        for off in offsets
    }
    return LatticeOperator(lat, d, blocks)


def test_lattice_validation():
    with pytest.raises(ValueError):
        TorusLattice(2, 5)
    with pytest.raises(ValueError):
        TorusLattice(2, 2)
    lat = TorusLattice(2, 8)
    assert lat.h == pytest.approx(2 * np.pi / 8)
    assert lat.unit(2, -1) == (0, 7)
    with pytest.raises(BadAxis):
        lat.unit(3)
    with pytest.raises(TooLarge):
        TorusLattice(3, 32).check_operator_dim(2)


def test_frame_validation():
    split = clifford.SignatureSplit.of(2, 1)
    with pytest.raises(ValueError):
        FrameField(split, (2, 1), 1, 1.0)
    with pytest.raises(ValueError):
        FrameField(split, None, 1, 0.5)
    with pytest.raises(BadAxis):
        FrameField(split, (1, 2), 3, 1.0)
    R = FrameField(split, (1, 2), 2, 1.0).matrices(TorusLattice(2, 8))
    assert np.allclose(np.swapaxes(R, -1, -2) @ R, np.eye(2), atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_stencil_algebra_matches_dense(seed):
    rng = np.random.default_rng(seed)
    lat = TorusLattice(2, 4)
    A = random_stencil(lat, 2, rng, [(0, 0), (1, 0), (0, 3)])
    B = random_stencil(lat, 2, rng, [(0, 1), (2, 0)])
    Ad, Bd = A.toarray(), B.toarray()
    assert np.allclose((A @ B).toarray(), Ad @ Bd, atol=1e-12)
    assert np.allclose(A.H.toarray(), Ad.conj().T, atol=0)
    assert np.allclose((A + B).toarray(), Ad + Bd, atol=0)
    assert np.allclose((A - 2.0 * B).toarray(), Ad - 2 * Bd, atol=1e-14)
    assert A.norm_bound() >= linops.op_norm(Ad) * (1 - 1e-12)
    assert A.frobenius() == pytest.approx(np.linalg.norm(Ad), rel=1e-12)


def test_from_dense_roundtrip(rng):
    lat = TorusLattice(2, 4)
    A = random_stencil(lat, 2, rng, [(0, 0), (1, 0)])
    back, off = LatticeOperator.from_dense(lat, 2, A.toarray(), [(0, 0), (1, 0)])
    assert off == 0.0 and back.equals(A)
    _, off = LatticeOperator.from_dense(lat, 2, A.toarray(), [(0, 0)])
    assert off == pytest.approx(np.linalg.norm(A.block((1, 0))))


@pytest.mark.parametrize("n,N", [(1, 8), (2, 4), (2, 8), (3, 4)])
def test_dirac_matches_loop_oracle(n, N):
    rep = clifford.gamma_matrices(n)
    D = lattice.build_dirac(TorusLattice(n, N), rep).toarray()
    assert np.array_equal(D, oracles.dirac_dense(list(rep.gammas), n, N))
    assert np.array_equal(D, D.conj().T)


def test_frame_assembly_equals_coordinate_assembly():
    lat = TorusLattice(2, 8)
    rep = clifford.gamma_matrices(2)
    frame = FrameField(clifford.SignatureSplit.of(2, 1), (1, 2), 2, 1.0)
    a = lattice.build_dirac(lat, rep).toarray()
    b = lattice.build_dirac(lat, rep, frame).toarray()
    assert np.max(np.abs(a - b)) < 1e-14


@pytest.mark.parametrize(
    "n,n1,N,plane,dep,alpha",
    [(2, 1, 8, (1, 2), 2, 1.0), (3, 1, 4, (1, 3), 2, 0.7), (3, 2, 4, (2, 3), 1, 1.3)],
)
def test_gamma1_matches_loop_oracle(n, n1, N, plane, dep, alpha):
    m = model(n, n1, N, plane, dep, alpha)
    ref = oracles.gamma1_dense(list(m.rep.gammas), n, N, n1, plane[0], plane[1], dep, alpha)
    assert np.max(np.abs(m.dense("Gamma1") - ref)) < 1e-15


@pytest.mark.parametrize(
    "n,n1,N,plane,dep,alpha",
    [
        (2, 1, 8, (1, 2), 2, 1.0),
        (2, 1, 16, (1, 2), 1, 0.3),
        (3, 1, 8, (1, 3), 2, 1.0),
        (3, 2, 8, (2, 3), 3, 0.8),
        (2, 0, 8, None, 1, 0.0),
        (2, 2, 8, None, 1, 0.0),
    ],
)
def test_decomposition_identities(n, n1, N, plane, dep, alpha):
    m = model(n, n1, N, plane, dep, alpha)
    res = m.identity_residuals()
    assert res.pop("sum_exact") is True
    assert max(res.values()) < 1e-12
    assert np.array_equal(m.dense("D1") + m.dense("D2"), m.dense("D"))


def test_empty_and_full_split():
    m0 = model(2, 0, 8, None, 1, 0.0)
    assert not np.any(m0.dense("D1")) and m0.D2.equals(m0.D)
    m2 = model(2, 2, 8, None, 1, 0.0)
    # n1 = 2: Gamma1 = i gamma1 gamma2 anticommutes with both generators
    assert not np.any(m2.dense("D2"))


def test_dense_decomposition_matches_stencil():
    m = model(2, 1, 8, (1, 2), 2, 1.0)
    D1, D2 = lattice.decompose(m.dense("D"), m.dense("Gamma1"), m.split)
    assert np.max(np.abs(D1 - m.dense("D1"))) < 1e-15
    assert np.array_equal(D1 + D2, m.dense("D"))


def test_decompose_rejects_non_symmetry():
    m = model(2, 1, 8, (1, 2), 2, 1.0)
    with pytest.raises(NotSymmetry):
        lattice.decompose(m.dense("D"), 2 * m.dense("Gamma1"), m.split)


def test_anticommutator_identity():
    # {D1, D2} = (D^2 - Gamma D^2 Gamma) / 2, an independent route through the dense matrices
    m = model(2, 1, 8, (1, 2), 2, 1.0)
    D, G = m.dense("D"), m.dense("Gamma1")
    D2 = D @ D
    ref = 0.5 * (D2 - G @ D2 @ G)
    assert np.max(np.abs(m.anticomm.toarray() - ref)) < 1e-13


@pytest.mark.parametrize("n,n1,plane", [(2, 1, (1, 2)), (3, 1, (1, 3)), (3, 2, (2, 3))])
def test_constant_frame_anticommutes_exactly(n, n1, plane):
    m = model(n, n1, 8, plane, 1, 0.0)
    assert m.anticomm.norm_bound() <= 1e-12


def test_split_first_order_reconstructs():
    m = model(2, 1, 8, (1, 2), 2, 1.0)
    X = m.anticomm
    A1, A2 = lattice.split_first_order(X, m)
    assert (A1 + A2 - X).norm_bound() < 1e-12
    d1, d2 = lattice.split_first_order(X.toarray(), m)
    assert isinstance(d1, np.ndarray)
    assert np.max(np.abs(d1 + d2 - X.toarray())) < 1e-12


def test_split_first_order_rejects_nonlocal(rng):
    m = model(2, 1, 8, (1, 2), 2, 1.0)
    with pytest.raises(NotFirstOrder) as err:
        lattice.split_first_order(linops.random_hermitian(m.dim, rng), m)
    assert err.value.off_stencil_mass > 0.5


def test_relative_bound_of_operator_against_itself():
    m = model(2, 1, 8, (1, 2), 2, 1.0)
    D1 = m.dense("D1")
    assert lattice.relative_bound_norm(D1, D1) <= 1 + 1e-12
    assert lattice.relative_bound_norm(np.zeros_like(D1), D1) == 0.0


def test_multiplication_operator(rng):
    lat = TorusLattice(2, 4)
    vals = rng.standard_normal(lat.shape)
    M = lattice.multiplication_operator(lat, vals, 2).toarray()
    assert np.array_equal(M, oracles.scalar_multiplier_dense(vals, 2))
