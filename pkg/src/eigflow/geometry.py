"""Orbit geometry of the three eigenvalue processes.

Coordinates on the quotient (the Weyl chamber of ordered spectra):

* ``"lambda"``: eigenvalues (of H, of W W^T, of G G^T),
* ``"sigma"``: singular values of W or G, ``lambda = sigma**2``,
* ``"gamma"``: ``gamma = log(sigma) = log(lambda) / 2``.

Dyson spectra live in lambda; Wishart and Dynkin gradients are taken in sigma.
The Dynkin quotient metric is ``sum(du * dv / sigma**2)``, which is Euclidean
in gamma.

The volume functions below are the tabulated ones.  They are powers of the
Riemannian fibre volume ``vol``: the Dyson entry is ``vol**2`` and the Wishart
and Dynkin entries are ``vol**4``.  The spectral drift equals
``grad log vol / 2`` in every case, so ``grad_log_volume / 2`` is a constant
multiple (2, 4 and 4) of the drift; ``verify.gradient_check`` measures it.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .matcore import FIELD_MULTIPLICITY, embed, embed_complex, embed_quaternion, eig_sym, svd

GAP_TOL = 1e-8
COORDS = ("lambda", "sigma", "gamma")


class DegenerateSpectrumError(ValueError):
    pass


def relative_gap(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        return np.full(x.shape[:-1], np.inf)
    scale = np.max(np.abs(x), axis=-1)
    scale = np.where(scale > 0, scale, 1.0)
    return np.min(x[..., :-1] - x[..., 1:], axis=-1) / scale


@dataclass(frozen=True)
class Spectrum:
    """Strictly descending eigenvalues or singular values."""

    values: tuple
    kind: str = "eigenvalues"

    def __init__(self, values, kind="eigenvalues"):
        vals = np.atleast_1d(np.asarray(values, dtype=float))
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("a spectrum is a nonempty vector")
        if kind not in ("eigenvalues", "singular_values"):
            raise ValueError(f"unknown spectrum kind {kind!r}")
        if np.any(np.diff(vals) >= 0):
            raise ValueError("spectrum must be strictly descending")
        if kind == "singular_values" and vals[-1] <= 0:
            raise ValueError("singular values must be positive")
        object.__setattr__(self, "values", tuple(float(v) for v in vals))
        object.__setattr__(self, "kind", kind)

    @classmethod
    def from_gamma(cls, gamma):
        return cls(np.exp(np.asarray(gamma, dtype=float)), "singular_values")

    @classmethod
    def from_coords(cls, x, coords):
        if coords == "lambda":
            return cls(x)
        if coords == "sigma":
            return cls(x, "singular_values")
        if coords == "gamma":
            return cls.from_gamma(x)
        raise ValueError(f"unknown coordinates {coords!r}")

    def __len__(self):
        return len(self.values)

    @property
    def n(self):
        return len(self.values)

    @property
    def lam(self):
        v = np.array(self.values)
        return v ** 2 if self.kind == "singular_values" else v

    @property
    def sigma(self):
        if self.kind == "singular_values":
            return np.array(self.values)
        lam = np.array(self.values)
        if lam[-1] <= 0:
            raise ValueError("singular values need positive eigenvalues")
        return np.sqrt(lam)

    @property
    def gamma(self):
        return np.log(self.sigma)

    def coords(self, name):
        return {"lambda": lambda: self.lam, "sigma": lambda: self.sigma,
                "gamma": lambda: self.gamma}[name]()


@dataclass(frozen=True)
class ProcessKind:
    name: str
    beta: int = 2

    def __post_init__(self):
        if self.name not in ("dyson", "wishart", "dynkin", "flag"):
            raise ValueError(f"unknown process {self.name!r}")
        if self.beta not in (1, 2, 4):
            raise ValueError("beta must be 1, 2 or 4")

    @classmethod
    def dyson(cls, beta=2):
        return cls("dyson", beta)

    @classmethod
    def wishart(cls):
        return cls("wishart")

    @classmethod
    def dynkin(cls):
        return cls("dynkin")

    @classmethod
    def flag(cls):
        return cls("flag")

    @property
    def field(self):
        if self.name == "dyson":
            return {1: "real", 2: "complex", 4: "quaternion"}[self.beta]
        return "real"

    @property
    def grad_coords(self):
        return "lambda" if self.name == "dyson" else "sigma"

    def __str__(self):
        return f"dyson(beta={self.beta})" if self.name == "dyson" else self.name


ALLOWED_CONSTANTS = (Fraction(1, 4), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(4))


@dataclass(frozen=True)
class DriftVariant:
    name: str
    constant: Fraction = Fraction(1)

    def __post_init__(self):
        if self.name not in ("intro", "section2", "rw", "scaled"):
            raise ValueError(f"unknown drift variant {self.name!r}")
        c = Fraction(self.constant)
        object.__setattr__(self, "constant", c)
        if self.name == "scaled" and c not in ALLOWED_CONSTANTS:
            raise ValueError(f"scaled constant must be one of {[str(x) for x in ALLOWED_CONSTANTS]}")

    def __str__(self):
        return f"scaled({self.constant})" if self.name == "scaled" else self.name


INTRO = DriftVariant("intro")
SECTION2 = DriftVariant("section2")
RW = DriftVariant("rw")


def scaled(c):
    return DriftVariant("scaled", Fraction(c))


def trusted_variant(kind):
    return RW if kind.name == "dynkin" else INTRO


def native_coords(kind, variant):
    if kind.name in ("dyson", "flag"):
        return "lambda"
    if variant.name == "scaled":
        variant = trusted_variant(kind)
    if variant.name == "intro":
        return "lambda"
    if variant.name == "section2":
        return "sigma"
    return "gamma"


def _check_simple(s, positive=False):
    x = np.array(s.values)
    if s.n > 1 and relative_gap(x) < GAP_TOL:
        raise DegenerateSpectrumError("spectrum is degenerate within tolerance")
    if positive and s.lam[-1] <= 0:
        raise ValueError("this process needs a positive spectrum")


def _pair_inverse(x):
    """1/(x_i - x_j) with zero diagonal; batch axes allowed."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    d = x[..., :, None] - x[..., None, :]
    d[..., np.arange(n), np.arange(n)] = np.inf
    return 1.0 / d


def _coth_ratio(lam):
    """(lam_i + lam_j) / (lam_i - lam_j) with zero diagonal."""
    return (lam[..., :, None] + lam[..., None, :]) * _pair_inverse(lam)


def log_orbit_volume(kind, s):
    """Log of the tabulated orbit volume, additive constant dropped."""
    if kind.name == "flag":
        raise ValueError("no orbit volume function for the flag example")
    _check_simple(s, positive=kind.name in ("wishart", "dynkin"))
    lam = s.lam
    iu = np.triu_indices(s.n, 1)
    logdiff = np.log(np.abs(lam[iu[0]] - lam[iu[1]]))
    if kind.name == "dyson":
        return float(2 * kind.beta * np.sum(logdiff))
    if kind.name == "wishart":
        return float(4 * np.sum(logdiff))
    loglam = np.log(lam)
    return float(np.sum(4 * logdiff - 2 * loglam[iu[0]] - 2 * loglam[iu[1]]))


def grad_log_volume(kind, s):
    """Gradient of ``log_orbit_volume`` in the quotient metric.

    Dyson: partials in lambda.  Wishart: partials in sigma.  Dynkin:
    components along d/dsigma of the metric gradient, i.e. ``sigma**2`` times
    the partials.
    """
    if kind.name == "flag":
        raise ValueError("no orbit volume function for the flag example")
    _check_simple(s, positive=kind.name in ("wishart", "dynkin"))
    lam = s.lam
    inv = _pair_inverse(lam)
    if kind.name == "dyson":
        return 2 * kind.beta * inv.sum(axis=1)
    sigma = s.sigma
    if kind.name == "wishart":
        return 8 * sigma * inv.sum(axis=1)
    partial = 8 * sigma * inv.sum(axis=1) - 4 * (s.n - 1) / sigma
    return sigma ** 2 * partial


def quotient_inner(kind, s, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape != (s.n,):
        raise ValueError("dimension mismatch")
    if kind.name == "dynkin":
        return float(np.sum(u * v / s.sigma ** 2))
    return float(np.dot(u, v))


def coth_identity(gi, gj):
    """``(coth(gi - gj), (lam_i + lam_j) / (lam_i - lam_j))`` with ``lam = exp(2 g)``."""
    if gi == gj:
        raise ValueError("coth identity needs distinct arguments")
    coth = 1.0 / np.tanh(gi - gj)
    lam_i = np.exp(2 * gi)
    lam_j = np.exp(2 * gj)
    diff = lam_j * np.expm1(2 * (gi - gj))
    return float(coth), float((lam_i + lam_j) / diff)


# --- spectral SDE coefficients ------------------------------------------------

def _raw_drift(kind, variant, lam):
    """Coefficients in the variant's own coordinates, from eigenvalues ``lam`` (..., n)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    ones = np.ones_like(lam)
    if kind.name == "flag":
        return np.zeros_like(lam), np.zeros_like(lam)
    if variant.name == "rw" and kind.name != "dynkin":
        raise ValueError("the coth form exists only for Dynkin's process")
    if variant.name == "scaled":
        b, a = _raw_drift(kind, trusted_variant(kind), lam)
        return float(variant.constant) * b, a
    inv = _pair_inverse(lam)
    if kind.name == "dyson":
        if variant.name == "intro":
            return 0.5 * kind.beta * inv.sum(axis=-1), ones
        return inv.sum(axis=-1), ones
    if kind.name == "wishart":
        if variant.name == "intro":
            return _coth_ratio(lam).sum(axis=-1) + n, 2 * np.sqrt(lam)
        sigma = np.sqrt(lam)
        return 0.5 * (sigma[..., :, None] * inv).sum(axis=-1), ones
    if variant.name == "intro":
        ratio = (lam[..., :, None] + lam[..., None, :]) * lam[..., :, None] * inv ** 2
        return ratio.sum(axis=-1) + lam, 2 * lam
    if variant.name == "section2":
        sigma = np.sqrt(lam)
        c = _coth_ratio(lam)
        lj = lam[..., None, :]
        terms = (c ** 2 - 2 * (lam[..., :, None] + lj) * lj * inv ** 2) * sigma[..., :, None]
        return 0.5 * terms.sum(axis=-1), sigma
    gamma = 0.5 * np.log(lam)
    d = gamma[..., :, None] - gamma[..., None, :]
    d[..., np.arange(n), np.arange(n)] = np.inf
    return 0.5 * (1.0 / np.tanh(d) * (~np.eye(n, dtype=bool))).sum(axis=-1), ones


def lam_from_coords(x, coords):
    x = np.asarray(x, dtype=float)
    if coords == "lambda":
        return x
    if coords == "sigma":
        return x ** 2
    if coords == "gamma":
        return np.exp(2 * x)
    raise ValueError(f"unknown coordinates {coords!r}")


def coords_from_lam(lam, coords):
    lam = np.asarray(lam, dtype=float)
    if coords == "lambda":
        return lam
    if coords == "sigma":
        return np.sqrt(np.clip(lam, 0.0, None))
    if coords == "gamma":
        return 0.5 * np.log(lam)
    raise ValueError(f"unknown coordinates {coords!r}")


def _to_lambda_jet(lam, coords):
    """First and second derivative of lambda with respect to ``coords``."""
    if coords == "lambda":
        return np.ones_like(lam), np.zeros_like(lam)
    if coords == "sigma":
        return 2 * np.sqrt(lam), 2 * np.ones_like(lam)
    return 2 * lam, 4 * lam


def change_coords(b, a, lam, src, dst):
    """Ito change of variables of ``dx = a dbeta + b dt`` between coordinates."""
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    if src == dst:
        return b, a
    lam = np.asarray(lam, dtype=float)
    d1, d2 = _to_lambda_jet(lam, src)
    b_lam = d1 * b + 0.5 * d2 * a ** 2
    a_lam = d1 * a
    e1, e2 = _to_lambda_jet(lam, dst)
    # inverse map lambda -> dst: f' = 1/e1, f'' = -e2/e1**3
    return b_lam / e1 - 0.5 * (e2 / e1 ** 3) * a_lam ** 2, a_lam / e1


def drift_array(kind, variant, x, coords):
    """Batch ``(b, a)`` at states ``x`` (..., n) given in ``coords``.

    The trusted Wishart form in sigma is evaluated directly as
    ``sum_j sigma_i / (lam_i - lam_j)`` (unit diffusion), which is its exact
    Ito image and stays finite at ``sigma_n = 0``.
    """
    lam = lam_from_coords(x, coords)
    if (kind.name == "wishart" and coords == "sigma"
            and variant.name in ("intro", "scaled")):
        sig = np.asarray(x, dtype=float)
        b = (sig[..., :, None] * _pair_inverse(lam)).sum(axis=-1)
        return float(variant.constant) * b, np.ones_like(sig)
    b, a = _raw_drift(kind, variant, lam)
    return change_coords(b, a, lam, native_coords(kind, variant), coords)


def spectral_drift(kind, variant, s, coords=None):
    """Drift and diffusion ``(b, a)`` of ``dx_i = a_i dbeta_i + b_i dt``.

    Evaluated in the variant's own coordinates unless ``coords`` is given,
    in which case the exact Ito change of variables is applied.
    """
    _check_simple(s, positive=kind.name in ("wishart", "dynkin"))
    coords = coords or native_coords(kind, variant)
    return drift_array(kind, variant, s.coords(coords), coords)


# --- projections -------------------------------------------------------------

def _dyson_frames(kind, base):
    mult = FIELD_MULTIPLICITY[kind.field]
    vals, q = eig_sym(base, kind.field)
    if vals.shape[-1] > 1 and np.any(relative_gap(vals) < GAP_TOL):
        raise DegenerateSpectrumError("base spectrum is degenerate within tolerance")
    n = vals.shape[-1]
    cols = q.reshape(q.shape[:-1] + (n, mult))
    proj = np.einsum("...iam,...jam->...aij", cols, cols)
    return vals, proj, mult


def horizontal_project(kind, base, tangent):
    """Orthogonal projection onto the horizontal space at ``base``."""
    base = np.asarray(base, dtype=float)
    tangent = np.asarray(tangent, dtype=float)
    if base.shape[-2:] != tangent.shape[-2:]:
        raise ValueError("tangent must be shaped like the base point")
    if kind.name == "dyson":
        _, proj, mult = _dyson_frames(kind, base)
        coef = np.einsum("...ij,...aij->...a", tangent, proj) / mult
        return np.einsum("...a,...aij->...ij", coef, proj)
    if kind.name == "wishart":
        u, s, v = svd(base)
        _check_frames(s)
        d = np.einsum("...ia,...ij,...ja->...a", u, tangent, v)
        return np.einsum("...ia,...a,...ja->...ij", u, d, v)
    if kind.name == "dynkin":
        u, s, v = svd(base)
        _check_frames(s)
        # left trivialization: xi = base^{-1} tangent; keep diag of xi in the V frame
        inv = np.einsum("...ia,...a,...ja->...ij", v, 1.0 / s, u)
        xi = inv @ tangent
        d = np.einsum("...ia,...ij,...ja->...a", v, xi, v)
        xi_h = np.einsum("...ia,...a,...ja->...ij", v, d, v)
        return base @ xi_h
    raise ValueError("projections are defined for dyson, wishart and dynkin")


def _check_frames(s):
    if s.shape[-1] > 1 and np.any(relative_gap(s) < GAP_TOL):
        raise DegenerateSpectrumError("singular values are degenerate within tolerance")


def vertical_project(kind, base, tangent):
    """Orthogonal projection onto the fibre tangent space at ``base``."""
    return np.asarray(tangent, dtype=float) - horizontal_project(kind, base, tangent)


def metric_inner(kind, base, a, b):
    """Inner product of two tangent vectors at ``base`` in the process metric."""
    if kind.name == "dynkin":
        inv = np.linalg.inv(base)
        return np.sum((inv @ a) * (inv @ b), axis=(-2, -1))
    return np.sum(np.asarray(a) * np.asarray(b), axis=(-2, -1))


def horizontal_lift(kind, base, velocity):
    """Matrix tangent at ``base`` moving the spectrum with ``velocity``.

    ``velocity`` is in lambda for Dyson and in sigma for Wishart and Dynkin.
    """
    base = np.asarray(base, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if kind.name == "dyson":
        _, proj, _ = _dyson_frames(kind, base)
        return np.einsum("...a,...aij->...ij", velocity, proj)
    u, _, v = svd(base)
    return np.einsum("...ia,...a,...ja->...ij", u, velocity, v)


def base_matrix(kind, s):
    """Diagonal representative of the orbit with spectrum ``s``."""
    if kind.name == "dyson":
        return embed(np.diag(s.lam), kind.field)
    if kind.name == "flag":
        return np.diag(s.lam)
    return np.diag(s.sigma)


# --- mean curvature by second derivatives -------------------------------------

def _unit_generators(field, n, a, b):
    """Skew-Hermitian generators attached to the pair (a, b), embedded."""
    e = np.zeros((n, n))
    e[a, b] = 1.0
    anti = e - e.T
    sym = e + e.T
    z = np.zeros((n, n))
    if field == "real":
        return [anti]
    if field == "complex":
        return [embed_complex(anti + 0j), embed_complex(1j * sym)]
    return [embed_quaternion(anti, z, z, z), embed_quaternion(z, sym, z, z),
            embed_quaternion(z, z, sym, z), embed_quaternion(z, z, z, sym)]


def mean_curvature_at_diag(kind, s):
    """Trace of the second fundamental form of the orbit through the diagonal
    representative, as a spectral vector (not divided by the fibre dimension).

    Components are in lambda for Dyson and in sigma for Wishart and Dynkin.
    Each orthonormal fibre direction is generated by a one-parameter subgroup;
    the horizontal part of its (covariant) acceleration is summed.
    """
    n = s.n
    if kind.name == "flag":
        raise ValueError("mean curvature is computed for dyson, wishart and dynkin")
    _check_simple(s, positive=kind.name in ("wishart", "dynkin"))
    out = np.zeros(n)
    if n == 1:
        return out
    if kind.name == "dyson":
        mult = FIELD_MULTIPLICITY[kind.field]
        lam_mat = embed(np.diag(s.lam), kind.field)
        for a in range(n):
            for b in range(a + 1, n):
                for g in _unit_generators(kind.field, n, a, b):
                    vel = g @ lam_mat - lam_mat @ g
                    acc = g @ vel - vel @ g
                    # lambda_k component: <acc, P_k> / <P_k, P_k>, P_k the embedded D_k
                    diag = np.diagonal(acc)[:n] if mult == 1 else np.diagonal(acc).reshape(mult, n).mean(axis=0)
                    out += diag / (np.sum(vel * vel) / mult)
        return out
    sigma = s.sigma
    lmat = np.diag(sigma)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = 1.0
            gen = e - e.T
            if kind.name == "wishart":
                for sign in (1.0, -1.0):
                    ga, gb = gen, sign * gen
                    vel = ga @ lmat - lmat @ gb
                    acc = ga @ ga @ lmat - 2 * ga @ lmat @ gb + lmat @ gb @ gb
                    out += np.diagonal(acc) / np.sum(vel * vel)
            else:
                coef = 1.0 / (sigma[j] / sigma[i] - sigma[i] / sigma[j])
                for ratio in (sigma[i] / sigma[j], sigma[j] / sigma[i]):
                    ga, gb = coef * gen, coef * ratio * gen
                    ahat = np.diag(1 / sigma) @ ga @ lmat
                    xi = ahat - gb
                    # covariant acceleration of the left-invariant metric, trivialized
                    acc = -(ahat @ gb - gb @ ahat) + (xi @ xi.T - xi.T @ xi)
                    out += sigma * np.diagonal(acc) / np.sum(xi * xi)
    return out


def mean_curvature_drift(kind, s):
    """Spectral drift produced by the fibres alone: minus half the mean curvature.

    Lambda components for Dyson, sigma components for Wishart and Dynkin.
    """
    return -0.5 * mean_curvature_at_diag(kind, s)
