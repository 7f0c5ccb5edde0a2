import numpy as np
import pytest

from mwphoton import qops
from mwphoton.qops import (
    SpaceLayout, Operator, embed, basis_ket, pure_dm, lowering, transition,
    number_op, dissipator, coupling_super, measurement_super, expectation,
    partial_trace,
)


def random_dm(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_layout_basics():
    lay = SpaceLayout((2, 3), ("src", "t1"))
    assert lay.dim == 6
    assert lay.index("t1") == 1
    assert lay.index(0) == 0
    with pytest.raises(KeyError):
        lay.index("nope")


def test_layout_rejects_bad_dims():
    with pytest.raises(ValueError):
        SpaceLayout((2, 0), ("a", "b"))
    with pytest.raises(ValueError):
        SpaceLayout((2, 2), ("a", "a"))


def test_ladder_matrices():
    a = lowering(3)
    assert a[0, 1] == 1.0
    assert a[1, 2] == pytest.approx(np.sqrt(2))
    np.testing.assert_allclose(a.conj().T @ a, number_op(3), atol=1e-15)
    t = transition(3, 0, 2)  # |0><2|
    assert t[0, 2] == 1.0 and np.count_nonzero(t) == 1


def test_embed_matches_hand_kron():
    # oracle: assemble I (x) op (x) I by hand for the middle slot
    lay = SpaceLayout((2, 3, 4), ("a", "b", "c"))
    rng = np.random.default_rng(11)
    op = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    want = np.kron(np.kron(np.eye(2), op), np.eye(4))
    got = embed(op, "b", lay)
    np.testing.assert_allclose(got.mat, want, atol=1e-14)
    assert got.layout is lay


def test_embedded_operators_on_disjoint_subsystems_commute():
    lay = SpaceLayout((2, 3, 2), ("a", "b", "c"))
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = embed(rng.standard_normal((2, 2)), "a", lay)
        y = embed(rng.standard_normal((3, 3)), "b", lay)
        comm = x @ y - Operator(lay, y.mat @ x.mat)
        assert np.max(np.abs(comm.mat)) < 1e-13


def test_embed_dimension_mismatch():
    lay = SpaceLayout((2, 3), ("a", "b"))
    with pytest.raises(ValueError):
        embed(np.eye(4), "b", lay)


def test_basis_ket_and_pure_dm():
    lay = SpaceLayout((2, 3), ("src", "t1"))
    ket = basis_ket(lay, [1, 2])
    assert ket.shape == (6,)
    assert ket[1 * 3 + 2] == 1.0 and np.sum(np.abs(ket)) == 1.0
    rho = pure_dm(ket)
    assert rho[5, 5] == 1.0
    assert np.trace(rho) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        basis_ket(lay, [2, 0])


def test_operator_algebra_and_dag():
    lay = SpaceLayout((3,), ("x",))
    a = Operator(lay, lowering(3))
    n = a.dag() @ a
    np.testing.assert_allclose(n.mat, number_op(3), atol=1e-15)
    assert n.is_hermitian()
    s = 2.0 * a - a
    np.testing.assert_allclose(s.mat, a.mat, atol=1e-15)


def test_dissipator_trace_free_and_hermiticity_preserving():
    rng = np.random.default_rng(7)
    for _ in range(10):
        c = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = random_dm(rng, 4)
        d = dissipator(c, rho)
        assert abs(np.trace(d)) < 1e-12
        assert np.max(np.abs(d - d.conj().T)) < 1e-12


def test_dissipator_decay_direction():
    # D[sigma-] on the excited state moves population downward
    c = lowering(2)
    rho = np.diag([0.0, 1.0]).astype(complex)
    d = dissipator(c, rho)
    assert d[0, 0].real > 0 and d[1, 1].real < 0


def test_coupling_super_traceless():
    rng = np.random.default_rng(19)
    for _ in range(10):
        c1 = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        c2 = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = random_dm(rng, 4)
        s = coupling_super(c1, c2, rho)
        assert abs(np.trace(s)) < 1e-12
        assert np.max(np.abs(s - s.conj().T)) < 1e-12


def test_coupling_super_matches_written_out_commutators():
    rng = np.random.default_rng(23)
    c1 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    c2 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    rho = random_dm(rng, 3)
    want = (c2.conj().T @ (c1 @ rho) - c1 @ rho @ c2.conj().T
            + rho @ c1.conj().T @ c2 - c2 @ rho @ c1.conj().T)
    np.testing.assert_allclose(coupling_super(c1, c2, rho), want, atol=1e-13)


def test_measurement_super_traceless_on_unit_trace_states():
    rng = np.random.default_rng(31)
    for k in range(8):
        c = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        rho = random_dm(rng, 3)
        m = measurement_super(c, 0.4 * k, rho)
        assert abs(np.trace(m)) < 1e-12


def test_expectation_agrees_with_trace():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = random_dm(rng, 4)
    assert expectation(a, rho) == pytest.approx(np.trace(a @ rho))


def test_partial_trace_of_product_state():
    lay = SpaceLayout((2, 3), ("a", "b"))
    rng = np.random.default_rng(13)
    ra = random_dm(rng, 2)
    rb = random_dm(rng, 3)
    full = np.kron(ra, rb)
    red, rlay = partial_trace(full, lay, ["a"])
    np.testing.assert_allclose(red, ra, atol=1e-13)
    assert rlay.dims == (2,)
    red_b, _ = partial_trace(full, lay, ["b"])
    np.testing.assert_allclose(red_b, rb, atol=1e-13)


def test_partial_trace_keeps_trace_and_order():
    lay = SpaceLayout((2, 2, 3), ("a", "b", "c"))
    rng = np.random.default_rng(41)
    rho = random_dm(rng, 12)
    red, rlay = partial_trace(rho, lay, ["c", "a"])  # order normalizes to (a, c)
    assert rlay.labels == ("a", "c")
    assert np.trace(red) == pytest.approx(1.0)
    # tracing the remainder gives back the same as tracing directly
    red2, _ = partial_trace(red, rlay, ["a"])
    red3, _ = partial_trace(rho, lay, ["a"])
    np.testing.assert_allclose(red2, red3, atol=1e-13)


def test_density_matrix_validation():
    lay = SpaceLayout((2,), ("q",))
    good = qops.DensityMatrix(lay, np.diag([0.5, 0.5]).astype(complex))
    good.validate()
    # unit trace and Hermitian, so only the positivity check can catch it
    bad = qops.DensityMatrix(lay, np.diag([1.2, -0.2]).astype(complex))
    bad.validate()
    with pytest.raises(ValueError):
        bad.validate(psd_tol=1e-10)
    with pytest.raises(ValueError):
        qops.DensityMatrix(lay, 0.9 * np.eye(2, dtype=complex)).validate()
    skew = np.array([[0.5, 0.3], [0.1, 0.5]], dtype=complex)
    with pytest.raises(ValueError):
        qops.DensityMatrix(lay, skew).validate()
    with pytest.raises(ValueError):
        qops.DensityMatrix(lay, np.eye(3, dtype=complex) / 3.0)
