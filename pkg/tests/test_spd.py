import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otml import spd


def random_spd(rng, d, cond=100.0):
    """SPD matrix with eigenvalues log-spaced up to the given condition."""
    q = np.linalg.qr(rng.standard_normal((d, d)))[0]
    w = np.logspace(0, np.log10(cond), d)
    return (q * w) @ q.T


def test_symmetrize_is_projection():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((5, 5))
    s = spd.symmetrize(m)
    np.testing.assert_array_equal(s, s.T)
    np.testing.assert_allclose(spd.symmetrize(s), s)


def test_symmetrize_rejects_nonsquare():
    with pytest.raises(ValueError):
        spd.symmetrize(np.zeros((2, 3)))


def test_sqrt_squares_back():
    rng = np.random.default_rng(1)
    m = random_spd(rng, 6)
    r = spd.spd_sqrt(m)
    np.testing.assert_allclose(r @ r, m, rtol=1e-10, atol=1e-12)


def test_inv_sqrt_whitens():
    rng = np.random.default_rng(2)
    m = random_spd(rng, 4)
    b = spd.spd_inv_sqrt(m)
    np.testing.assert_allclose(b @ m @ b, np.eye(4), atol=1e-12)


def test_inv_matches_numpy():
    rng = np.random.default_rng(3)
    m = random_spd(rng, 5)
    np.testing.assert_allclose(spd.spd_inv(m), np.linalg.inv(m), rtol=1e-9)


def test_positivity_error_on_indefinite():
    m = np.diag([1.0, -0.5])
    with pytest.raises(spd.PositivityError):
        spd.spd_sqrt(m)
    with pytest.raises(spd.PositivityError):
        spd.spd_inv(m)


def test_positivity_floor_is_scale_relative():
    # eigenvalues (1e8, 1e-6): tiny relative to the largest, so inversion
    # of such a matrix would amplify noise; the check must trip
    m = np.diag([1e8, 1e-6])
    with pytest.raises(spd.PositivityError):
        spd.eigh_spd(m)
    # same ratio, both comfortably positive at unit scale: fine
    spd.eigh_spd(np.diag([1.0, 1e-4]))


def test_riccati_solves_equation():
    rng = np.random.default_rng(4)
    for d in (2, 3, 7):
        c = random_spd(rng, d)
        dd = random_spd(rng, d)
        a = spd.riccati_solve(c, dd)
        np.testing.assert_array_equal(a, a.T)
        np.testing.assert_allclose(a @ c @ a, dd, rtol=1e-9, atol=1e-11)


def test_riccati_identity_cases():
    rng = np.random.default_rng(5)
    d = 4
    m = random_spd(rng, d)
    # C = I: A * A = D
    np.testing.assert_allclose(
        spd.riccati_solve(np.eye(d), m), spd.spd_sqrt(m), rtol=1e-10
    )
    # D = I: A = C^{-1/2}
    np.testing.assert_allclose(
        spd.riccati_solve(m, np.eye(d)), spd.spd_inv_sqrt(m), rtol=1e-10
    )


def test_riccati_dimension_mismatch():
    with pytest.raises(ValueError):
        spd.riccati_solve(np.eye(2), np.eye(3))


def test_geometric_mean_idempotent():
    rng = np.random.default_rng(6)
    m = random_spd(rng, 5)
    np.testing.assert_allclose(spd.geometric_mean(m, m), m, rtol=1e-10)


def test_geometric_mean_with_identity():
    rng = np.random.default_rng(7)
    m = random_spd(rng, 5)
    np.testing.assert_allclose(
        spd.geometric_mean(np.eye(5), m), spd.spd_sqrt(m), rtol=1e-10
    )


def test_geometric_mean_symmetric():
    rng = np.random.default_rng(8)
    p = random_spd(rng, 4)
    q = random_spd(rng, 4)
    np.testing.assert_allclose(
        spd.geometric_mean(p, q), spd.geometric_mean(q, p), rtol=1e-9, atol=1e-11
    )


def test_geometric_mean_congruence_invariant():
    rng = np.random.default_rng(9)
    p = random_spd(rng, 4)
    q = random_spd(rng, 4)
    t = rng.standard_normal((4, 4)) + 2 * np.eye(4)
    lhs = spd.geometric_mean(t @ p @ t.T, t @ q @ t.T)
    rhs = t @ spd.geometric_mean(p, q) @ t.T
    np.testing.assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-10)


def test_geometric_mean_is_riccati_solution():
    rng = np.random.default_rng(10)
    c = random_spd(rng, 5)
    d = random_spd(rng, 5)
    np.testing.assert_allclose(
        spd.geometric_mean(spd.spd_inv(c), d),
        spd.riccati_solve(c, d),
        rtol=1e-8,
        atol=1e-10,
    )


def test_riccati_tolerates_near_singular_product():
    # the congruence C^{1/2} D C^{1/2} can come out numerically singular
    # even for definite inputs; the solve must not trip on round-off
    rng = np.random.default_rng(11)
    q = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    c = (q * np.logspace(-7, 0, 6)) @ q.T + 1e-7 * np.eye(6)
    d = np.eye(6) * 1e-8
    a = spd.riccati_solve(c, d)
    resid = np.linalg.norm(a @ c @ a - d) / np.linalg.norm(d)
    assert resid < 1e-6


def test_eigen_floor_always_adds():
    m = np.diag([1.0, 2.0])
    out = spd.eigen_floor(m, 0.5)
    np.testing.assert_allclose(out, np.diag([1.5, 2.5]))


def test_eigen_floor_conditional_skip():
    m = np.diag([1.0, 2.0])
    out = spd.eigen_floor(m, 0.5, always=False)
    np.testing.assert_allclose(out, m)
    # not already clear of eps: lift applies
    out2 = spd.eigen_floor(np.diag([0.1, 2.0]), 0.5, always=False)
    assert np.linalg.eigvalsh(out2)[0] >= 0.5 - 1e-12


def test_trace_inner_matches_trace_product():
    rng = np.random.default_rng(12)
    a = spd.symmetrize(rng.standard_normal((5, 5)))
    b = spd.symmetrize(rng.standard_normal((5, 5)))
    np.testing.assert_allclose(spd.trace_inner(a, b), np.trace(a @ b), rtol=1e-12)


def test_trace_inner_dimension_check():
    with pytest.raises(ValueError):
        spd.trace_inner(np.eye(2), np.eye(3))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 8))
def test_sqrt_inverse_consistency(seed, d):
    rng = np.random.default_rng(seed)
    m = random_spd(rng, d, cond=1e3)
    r = spd.spd_sqrt(m)
    ri = spd.spd_inv_sqrt(m)
    np.testing.assert_allclose(r @ ri, np.eye(d), atol=1e-9)
    np.testing.assert_allclose(r @ r, m, rtol=1e-8, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 8))
def test_riccati_residual_property(seed, d):
    rng = np.random.default_rng(seed)
    c = random_spd(rng, d, cond=1e3)
    dd = random_spd(rng, d, cond=1e3)
    a = spd.riccati_solve(c, dd)
    w = np.linalg.eigvalsh(a)
    assert w[0] > 0
    resid = np.linalg.norm(a @ c @ a - dd) / np.linalg.norm(dd)
    assert resid < 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6))
def test_geometric_mean_between_arguments(seed, d):
    # determinant of the geometric mean is the geometric mean of the
    # determinants, a classic identity of the affine-invariant midpoint
    rng = np.random.default_rng(seed)
    p = random_spd(rng, d, cond=100)
    q = random_spd(rng, d, cond=100)
    g = spd.geometric_mean(p, q)
    det_g = np.linalg.det(g)
    expected = np.sqrt(np.linalg.det(p) * np.linalg.det(q))
    np.testing.assert_allclose(det_g, expected, rtol=1e-7)
