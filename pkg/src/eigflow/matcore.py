"""Small dense linear algebra: Frobenius products, cyclic Jacobi eigensolver,
singular values, and the real embeddings used for complex and quaternion
matrices.

Every routine accepts either a single square matrix or a stack of them
(leading batch axes); the Jacobi sweeps are vectorized over the stack.

Embedding layouts
-----------------
complex ``Z = X + iY`` (n x n)            ->  real ``[[X, -Y], [Y, X]]`` (2n x 2n)
quaternion ``A + Bi + Cj + Dk`` (n x n)   ->  complex ``[[A+iB, C+iD], [-C+iD, A-iB]]``
                                              -> real (4n x 4n) via the complex rule

Both maps are real-linear algebra homomorphisms and send the conjugate
transpose to the transpose, so Hermitian matrices land on symmetric ones and
every eigenvalue is repeated 2 (complex) or 4 (quaternion) times.
"""
import numpy as np

JACOBI_TOL = 1e-13
MAX_SWEEPS = 30
PAIR_TOL = 1e-8

FIELD_MULTIPLICITY = {"real": 1, "complex": 2, "quaternion": 4}


class ConvergenceError(RuntimeError):
    pass


def frobenius_inner(a, b):
    """Real part of tr(a b*), summed over the trailing two axes."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.real(np.sum(a * np.conj(b), axis=(-2, -1)))


def embed_complex(z):
    z = np.asarray(z)
    x, y = z.real, z.imag
    top = np.concatenate([x, -y], axis=-1)
    bottom = np.concatenate([y, x], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def unembed_complex(m):
    m = np.asarray(m)
    n = m.shape[-1] // 2
    return m[..., :n, :n] + 1j * m[..., n:, :n]


def quaternion_to_complex(a, b, c, d):
    top = np.concatenate([a + 1j * b, c + 1j * d], axis=-1)
    bottom = np.concatenate([-c + 1j * d, a - 1j * b], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def embed_quaternion(a, b, c, d):
    return embed_complex(quaternion_to_complex(a, b, c, d))


def embed(m, field):
    """Real embedding of a diagonal/real matrix into the given scalar field."""
    m = np.asarray(m, dtype=float)
    if field == "real":
        return m
    if field == "complex":
        return embed_complex(m)
    if field == "quaternion":
        z = np.zeros_like(m)
        return embed_quaternion(m, z, z, z)
    raise ValueError(f"unknown field {field!r}")


def _jacobi(a, vectors=True):
    """Cyclic Jacobi on a stack (B, n, n) of symmetric matrices.

    Works internally on batch-last copies so each rotation touches
    contiguous rows.  Returns ``(diag, v)`` with ``v`` None unless asked.
    """
    bsz, n, _ = a.shape
    w = np.moveaxis(a, 0, -1).copy()  # (n, n, B)
    v = np.repeat(np.eye(n)[:, :, None], bsz, axis=2) if vectors else None
    tol2 = (JACOBI_TOL ** 2) * np.sum(w * w, axis=(0, 1))
    offmask = ~np.eye(n, dtype=bool)
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    live = np.arange(bsz)
    diag = np.empty((bsz, n))
    vout = np.empty((bsz, n, n)) if vectors else None
    for _ in range(MAX_SWEEPS + 1):
        done = np.sum(w[offmask] ** 2, axis=0) <= tol2
        if done.any():
            idx = live[done]
            diag[idx] = np.diagonal(w[:, :, done], axis1=0, axis2=1)
            if vectors:
                vout[idx] = np.moveaxis(v[:, :, done], -1, 0)
            keep = ~done
            live, tol2 = live[keep], tol2[keep]
            w = np.ascontiguousarray(w[:, :, keep])
            if vectors:
                v = np.ascontiguousarray(v[:, :, keep])
        if live.size == 0:
            return diag, vout
        if _ == MAX_SWEEPS:
            break
        for p, q in pairs:
            apq = w[p, q].copy()
            app = w[p, p].copy()
            aqq = w[q, q].copy()
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                theta = (aqq - app) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(apq != 0.0, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J for the (p, q) Givens rotation: rows first, then
            # mirror into columns and fix the 2x2 block in closed form
            rp = w[p].copy()
            rq = w[q].copy()
            newp = c * rp - s * rq
            newq = s * rp + c * rq
            w[p] = newp
            w[q] = newq
            w[:, p] = newp
            w[:, q] = newq
            w[p, p] = app - t * apq
            w[q, q] = aqq + t * apq
            w[p, q] = 0.0
            w[q, p] = 0.0
            if vectors:
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise ConvergenceError(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")


def eig_sym(a, field="real", check=True):
    """Eigen-decomposition of a symmetric matrix (or stack) by cyclic Jacobi.

    Returns ``(values, q)`` with eigenvalues in descending order and ``q`` the
    orthogonal matrix of eigenvectors (columns, same order) of the real input.
    For embedded complex/quaternion input ``values`` holds each eigenvalue once;
    ``q`` still has all columns of the embedded problem.
    """
    return _eig(a, field, check, vectors=True)


def _eig(a, field, check, vectors):
    a = np.array(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    batch = a.shape[:-2]
    n = a.shape[-1]
    flat = a.reshape(-1, n, n)
    # scale each matrix to unit max entry so the sums of squares cannot overflow
    amax = np.max(np.abs(flat), axis=(-2, -1))
    amax = np.where(amax > 0, amax, 1.0)
    unit = flat / amax[:, None, None]
    if check:
        norm = np.sqrt(np.sum(unit * unit, axis=(-2, -1)))
        asym = np.sqrt(np.sum((unit - np.swapaxes(unit, -1, -2)) ** 2, axis=(-2, -1)))
        if np.any(asym > 1e-12 * norm):
            raise ValueError("matrix is not symmetric")
    w, v = _jacobi(unit, vectors)
    w = w * amax[:, None]
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    if vectors:
        v = np.take_along_axis(v, order[:, None, :], axis=-1)
    mult = FIELD_MULTIPLICITY[field]
    if mult > 1:
        if n % (2 * (mult // 2)) != 0:
            raise ValueError(f"size {n} incompatible with {field} embedding")
        groups = w.reshape(w.shape[0], n // mult, mult)
        spread = groups.max(axis=-1) - groups.min(axis=-1)
        scale = np.maximum(1.0, np.abs(w).max(axis=-1))[:, None]
        if np.any(spread > PAIR_TOL * scale):
            raise ValueError("embedded eigenvalues do not pair up")
        w = groups.mean(axis=-1)
    w = w.reshape(batch + w.shape[-1:])
    return (w, v.reshape(batch + (n, n))) if vectors else w


def eigvals_sym(a, field="real", check=True):
    """Eigenvalues only (descending); skips accumulating the rotations."""
    return _eig(a, field, check, vectors=False)


def singular_values(m):
    """Descending singular values of a real square matrix (or stack)."""
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {m.shape}")
    lam = eigvals_sym(m @ np.swapaxes(m, -1, -2))
    return np.sqrt(np.clip(lam, 0.0, None))


def svd(m):
    """Thin SVD ``m = u @ diag(s) @ v.T`` for real square ``m`` of full rank.

    ``v`` comes from the eigenvectors of ``m.T m``; ``u = m v / s``.
    """
    m = np.asarray(m, dtype=float)
    lam, v = eig_sym(np.swapaxes(m, -1, -2) @ m)
    s = np.sqrt(np.clip(lam, 0.0, None))
    if np.any(s <= 0.0):
        raise ValueError("svd frames need a nonsingular matrix")
    u = (m @ v) / s[..., None, :]
    return u, s, v


def polar_orthogonal(q):
    """Orthogonal polar factor ``q (q^T q)^{-1/2}``."""
    lam, v = eig_sym(np.swapaxes(q, -1, -2) @ q)
    inv_sqrt = (v / np.sqrt(lam)[..., None, :]) @ np.swapaxes(v, -1, -2)
    return q @ inv_sqrt
