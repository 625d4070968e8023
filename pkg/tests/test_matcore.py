import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eigflow.matcore import (ConvergenceError, eig_sym, eigvals_sym, embed, embed_complex, embed_quaternion,
                             frobenius_inner, polar_orthogonal, quaternion_to_complex, singular_values, svd,
                             unembed_complex)
from conftest import random_symmetric


def test_frobenius_examples():
    assert frobenius_inner(np.eye(2), np.eye(2)) == 2
    e12 = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert frobenius_inner(e12, e12.T) == 0
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert frobenius_inner(m, m) == 30


def test_frobenius_complex_is_real_part():
    a = np.array([[1 + 2j, 0], [0, 1j]])
    b = np.array([[1j, 0], [0, 1]])
    # Re tr(a b*) = Re((1+2i)(-i) + i) = 2
    assert frobenius_inner(a, b) == pytest.approx(2.0)


def test_frobenius_shape_mismatch():
    with pytest.raises(ValueError):
        frobenius_inner(np.eye(2), np.eye(3))


def test_frobenius_conjugation_invariant(rng):
    for _ in range(20):
        a, b = rng.standard_normal((2, 4, 4))
        q = np.linalg.qr(rng.standard_normal((4, 4)))[0]
        lhs = frobenius_inner(q @ a @ q.T, q @ b @ q.T)
        assert abs(lhs - frobenius_inner(a, b)) <= 1e-12 * max(1, abs(lhs))


@settings(max_examples=30, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-5, 5)), arrays(float, (3, 3), elements=st.floats(-5, 5)),
       arrays(float, (3, 3), elements=st.floats(-5, 5)), st.floats(-3, 3))
def test_frobenius_bilinear_symmetric(a, b, c, t):
    assert frobenius_inner(a, b) == pytest.approx(frobenius_inner(b, a), abs=1e-12)
    lhs = frobenius_inner(a + t * b, c)
    assert lhs == pytest.approx(frobenius_inner(a, c) + t * frobenius_inner(b, c), abs=1e-9)
    assert frobenius_inner(a, a) >= 0


def test_eig_examples():
    vals, q = eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(vals, [3, 1], atol=1e-14)
    np.testing.assert_allclose(np.abs(q), np.full((2, 2), np.sqrt(0.5)), atol=1e-14)
    vals, q = eig_sym(np.eye(4))
    np.testing.assert_array_equal(vals, np.ones(4))


def test_eig_random_6x6(rng):
    a = random_symmetric(rng, 6)
    vals, q = eig_sym(a)
    resid = np.linalg.norm(q @ np.diag(vals) @ q.T - a)
    assert resid <= 1e-10 * max(1, np.linalg.norm(a))
    assert np.all(np.diff(vals) <= 0)


@pytest.mark.parametrize("n", range(1, 9))
def test_eig_batch_properties(rng, n):
    a = random_symmetric(rng, n, 200)
    vals, q = eig_sym(a)
    norms = np.maximum(1, np.linalg.norm(a, axis=(-2, -1)))
    rec = np.linalg.norm(np.einsum("bij,bj,bkj->bik", q, vals, q) - a, axis=(-2, -1))
    orth = np.linalg.norm(np.swapaxes(q, -1, -2) @ q - np.eye(n), axis=(-2, -1))
    assert np.all(rec <= 1e-10 * norms)
    assert np.all(orth <= 1e-10)
    tr = np.trace(a, axis1=-2, axis2=-1)
    assert np.all(np.abs(vals.sum(-1) - tr) <= 1e-10 * norms)
    ref = np.sort(np.linalg.eigvalsh(a), axis=-1)[:, ::-1]
    np.testing.assert_allclose(vals, ref, atol=1e-10 * norms.max())
    np.testing.assert_array_equal(eigvals_sym(a), vals)


def test_eig_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        eig_sym(np.ones((2, 3)))


def test_eig_sweep_budget(monkeypatch, rng):
    import eigflow.matcore as mc
    monkeypatch.setattr(mc, "MAX_SWEEPS", 1)
    with pytest.raises(ConvergenceError):
        eig_sym(random_symmetric(rng, 6))


def test_eig_extreme_scales():
    a = np.array([[1e300, 1e-300], [1e-300, -1e300]])
    vals, _ = eig_sym(a)
    np.testing.assert_allclose(vals, [1e300, -1e300])
    vals, _ = eig_sym(np.array([[0.0, 1e-200], [1e-200, 0.0]]))
    np.testing.assert_allclose(vals, [1e-200, -1e-200])


def test_complex_embedding_hermitian(rng):
    x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    h = x + x.conj().T
    m = embed_complex(h)
    np.testing.assert_array_equal(m, m.T)
    np.testing.assert_array_equal(unembed_complex(m), h)
    vals, _ = eig_sym(m, "complex")
    np.testing.assert_allclose(vals, np.sort(np.linalg.eigvalsh(h))[::-1], atol=1e-12)


def test_embedding_is_homomorphism(rng):
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    np.testing.assert_allclose(embed_complex(a @ b), embed_complex(a) @ embed_complex(b), atol=1e-14)
    np.testing.assert_allclose(embed_complex(a.conj().T), embed_complex(a).T)


def test_quaternion_hermitian_eigs(rng):
    n = 3
    a = rng.standard_normal((n, n))
    a = a + a.T
    parts = []
    for _ in range(3):
        s = rng.standard_normal((n, n))
        parts.append(s - s.T)
    z = quaternion_to_complex(a, *parts)
    np.testing.assert_allclose(z, z.conj().T)
    m = embed_quaternion(a, *parts)
    assert m.shape == (4 * n, 4 * n)
    vals, _ = eig_sym(m, "quaternion")
    assert vals.shape == (n,)
    ref = np.sort(np.linalg.eigvalsh(z))[::-1][::2]
    np.testing.assert_allclose(vals, ref, atol=1e-10)


def test_embed_diag():
    d = np.diag([3.0, 1.0])
    assert eig_sym(embed(d, "quaternion"), "quaternion")[0].tolist() == [3.0, 1.0]
    with pytest.raises(ValueError):
        embed(d, "octonion")


def test_singular_value_examples():
    np.testing.assert_allclose(singular_values(np.diag([3.0, -2.0])), [3, 2])
    q = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 4)))[0]
    np.testing.assert_allclose(singular_values(q), np.ones(4), atol=1e-12)
    phi = (1 + np.sqrt(5)) / 2
    np.testing.assert_allclose(singular_values(np.array([[1.0, 1.0], [0.0, 1.0]])), [phi, phi - 1], atol=1e-12)
    with pytest.raises(ValueError):
        singular_values(np.ones((2, 3)))


@pytest.mark.parametrize("n", [2, 5, 8])
def test_singular_values_squared(rng, n):
    m = rng.standard_normal((1000 // 3, n, n))
    s = singular_values(m)
    lam = eig_sym(m @ np.swapaxes(m, -1, -2))[0]
    np.testing.assert_allclose(s ** 2, np.clip(lam, 0, None), rtol=1e-9, atol=1e-12)


def test_svd_and_polar(rng):
    m = rng.standard_normal((5, 5))
    u, s, v = svd(m)
    np.testing.assert_allclose(u @ np.diag(s) @ v.T, m, atol=1e-10)
    np.testing.assert_allclose(u.T @ u, np.eye(5), atol=1e-10)
    q = polar_orthogonal(np.eye(3) + 1e-3 * rng.standard_normal((3, 3)))
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-12)
