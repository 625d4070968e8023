"""Monte Carlo drift estimation, candidate adjudication, two-sample KS,
gradient cross-checks and the fibre-only (mean curvature flow) check."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import sdecore
from .matcore import eigvals_sym
from .randmat import build_increment, derive_stream, n_normals
from .processes import PathNormals

ACCEPT_Z = 3.0
REJECT_Z = 5.0
CHUNK = 1 << 16


@dataclass
class DriftEstimate:
    base: geo.Spectrum
    coords: str
    mean: np.ndarray
    se: np.ndarray
    n_samples: int
    h: float
    qv: np.ndarray = None
    qv_se: np.ndarray = None
    collisions: int = 0
    control_variate: bool = True

    def to_dict(self):
        return {
            "base": list(self.base.values), "base_kind": self.base.kind,
            "coords": self.coords, "mean": self.mean.tolist(), "se": self.se.tolist(),
            "n_samples": self.n_samples, "h": self.h,
            "qv": None if self.qv is None else self.qv.tolist(),
            "qv_se": None if self.qv_se is None else self.qv_se.tolist(),
            "collisions": self.collisions, "control_variate": self.control_variate,
        }


@dataclass
class VerificationReport:
    experiment: str
    candidates: list = field(default_factory=list)
    accepted: str = "inconclusive"
    passed: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    @property
    def ok(self):
        return bool(self.passed) and all(self.passed.values())

    def to_dict(self):
        return {
            "experiment": self.experiment, "candidates": self.candidates,
            "accepted": self.accepted, "passed": self.passed,
            "results": self.results, "environment": self.environment,
        }


# --- one-step drift estimation ------------------------------------------------

class _Moments:
    """Chan-style merge of per-chunk means and centred sums of squares."""

    def __init__(self, dim):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, chunk):
        m = chunk.shape[0]
        mu = chunk.mean(axis=0)
        m2 = ((chunk - mu) ** 2).sum(axis=0)
        total = self.count + m
        delta = mu - self.mean
        self.mean = self.mean + delta * m / total
        self.m2 = self.m2 + m2 + delta ** 2 * self.count * m / total
        self.count = total

    def se(self):
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


def _coord_slope(lam, coords):
    """d coords / d lambda at ``lam``."""
    if coords == "lambda":
        return np.ones_like(lam)
    if coords == "sigma":
        return 0.5 / np.sqrt(lam)
    return 0.5 / lam


def _one_step(kind, base_mat, lam0, z, h, increment, scale_r):
    """New eigenvalues and their first-order (martingale) part for a batch."""
    n = lam0.size
    dW = np.sqrt(h) * build_increment(increment, n, z)
    if kind.name == "dyson":
        if scale_r is None:
            new = base_mat + dW
        else:
            new = sdecore.projected_step("scaled", kind, base_mat, dW, h, scale_r)
        lam = eigvals_sym(new, kind.field)
        first = np.diagonal(dW, axis1=-2, axis2=-1)[..., :n]
        if scale_r is not None:
            first = first / scale_r
        return lam, first
    if scale_r is not None:
        raise ValueError("scaled-metric estimates are implemented for dyson")
    if kind.name == "wishart":
        new = base_mat + dW
    else:
        new = sdecore.matrix_step(kind, np.broadcast_to(base_mat, dW.shape), dW, h)
    lam = eigvals_sym(new @ np.swapaxes(new, -1, -2), check=False)
    first = 2 * lam0 * np.diagonal(dW, axis1=-2, axis2=-1) / (
        np.sqrt(lam0) if kind.name == "wishart" else 1.0)
    return lam, first


def estimate_drift(kind, level, base, h, n_samples, seed, coords=None,
                   control_variate=True, increment=None, scale_r=None,
                   threads=1, chunk=CHUNK):
    """Mean one-step displacement per unit time at ``base``.

    Matrix level: the diagonal representative with spectrum ``base`` is moved
    one step and the spectrum re-extracted.  With ``control_variate`` the
    first-order part of the displacement (an exactly mean-zero linear
    function of the increment) is subtracted before averaging, which leaves
    the mean unchanged and removes the O(sqrt h) noise.  Quadratic variation
    per unit time is reported from the raw displacement.

    Sample chunk ``c`` uses ``derive_stream(seed, c)``; chunk sums are merged
    in chunk order, so the result does not depend on ``threads``.
    """
    if kind.name == "flag":
        raise ValueError("use estimate_flag_drift for the flag example")
    if level not in ("matrix", "spectral"):
        raise ValueError("level must be 'matrix' or 'spectral'")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    coords = coords or ("lambda" if kind.name != "dynkin" else "lambda")
    n = base.n
    lam0 = base.lam
    if n > 1:
        b_lam, _ = geo.spectral_drift(kind, geo.trusted_variant(kind), base, "lambda")
        gap = np.min(lam0[:-1] - lam0[1:])
        if not 3 * np.max(np.abs(b_lam)) * h < gap:
            raise ValueError("h too large for this base point: 3 max|b| h must stay below the gap")
    x0 = geo.coords_from_lam(lam0, coords)
    slope = _coord_slope(lam0, coords)
    increment = increment or sdecore.increment_kind(kind)
    base_mat = geo.base_matrix(kind, base)
    k = n_normals(increment, n)
    bounds = [(lo, min(lo + chunk, n_samples)) for lo in range(0, n_samples, chunk)]

    def work(i):
        lo, hi = bounds[i]
        z = derive_stream(seed, i).normal((hi - lo, k))
        if level == "matrix":
            lam, first = _one_step(kind, base_mat, lam0, z[:, :k], h, increment, scale_r)
            dx = geo.coords_from_lam(lam, coords) - x0
            first = first * slope
        else:
            xi = z[:, :n]
            var = geo.trusted_variant(kind)
            new, ok = sdecore.em_update(kind, var, np.broadcast_to(x0, (hi - lo, n)), xi, h, coords)
            dx = new - x0
            _, a = geo.drift_array(kind, var, x0, coords)
            first = a * np.sqrt(h) * xi
        if n > 1:
            lam_now = geo.lam_from_coords(x0 + dx, coords) if level == "spectral" else lam
            moved = np.abs(lam_now - lam0)
            coll = int(np.sum(np.any(moved > 0.5 * gap, axis=-1)))
        else:
            coll = 0
        y = dx - first if control_variate else dx
        return y / h, dx ** 2 / h, coll

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(bounds))))
    else:
        parts = [work(i) for i in range(len(bounds))]
    drift, qv = _Moments(n), _Moments(n)
    collisions = 0
    for y, q, c in parts:
        drift.add(y)
        qv.add(q)
        collisions += c
    if collisions > 0.01 * n_samples:
        raise sdecore.CollisionError(f"collision rate {collisions / n_samples:.3%} above 1%")
    return DriftEstimate(base, coords, drift.mean, drift.se(), n_samples, h,
                         qv.mean, qv.se(), collisions, control_variate)


def estimate_flag_drift(lam, h, n_samples, seed, control_variate=True, chunk=CHUNK):
    """Entrywise drift of ``H = Q diag(lam) Q^T`` at ``Q = I``.

    Returns ``(mean, se)`` as n x n arrays.  The control variate is the
    first-order term ``[dA, Lambda]``.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    kind = geo.ProcessKind.flag()
    big = np.diag(lam)
    k = n_normals("SkewSymmetric", n)
    acc = _Moments(n * n)
    for i, lo in enumerate(range(0, n_samples, chunk)):
        hi = min(lo + chunk, n_samples)
        z = derive_stream(seed, i).normal((hi - lo, k))
        dA = np.sqrt(h) * build_increment("SkewSymmetric", n, z)
        q = sdecore.matrix_step(kind, np.broadcast_to(np.eye(n), dA.shape), dA, h)
        dh = q @ big @ np.swapaxes(q, -1, -2) - big
        if control_variate:
            dh = dh - (dA @ big - big @ dA)
        acc.add(dh.reshape(hi - lo, n * n) / h)
    return acc.mean.reshape(n, n), acc.se().reshape(n, n)


# --- adjudication --------------------------------------------------------------

def adjudicate_drift(est, candidates, experiment="drift"):
    """Score candidate drift vectors against an estimate.

    A candidate is accepted when its largest |z| is at most 3 and every other
    candidate has largest |z| of at least 5; otherwise the report says
    "inconclusive".
    """
    if len(candidates) < 2:
        raise ValueError("need at least two candidates")
    mean = np.asarray(est.mean, dtype=float)
    se = np.asarray(est.se, dtype=float)
    scored = []
    for label, values in candidates:
        values = np.asarray(values, dtype=float)
        z = (mean - values) / se
        scored.append({"label": label, "values": values.tolist(), "z": z.tolist(),
                       "max_abs_z": float(np.max(np.abs(z)))})
    inside = [c for c in scored if c["max_abs_z"] <= ACCEPT_Z]
    accepted = "inconclusive"
    if len(inside) == 1 and all(c["max_abs_z"] >= REJECT_Z for c in scored if c is not inside[0]):
        accepted = inside[0]["label"]
    return VerificationReport(
        experiment, scored, accepted, {},
        {"estimate": est.to_dict()},
        {"accept_z": ACCEPT_Z, "reject_z": REJECT_Z})


def drift_candidates(kind, base, coords="lambda"):
    """Every published drift form for ``kind`` at ``base``, in ``coords``.

    Candidates whose vectors coincide are merged under a joined label.
    """
    variants = [geo.INTRO, geo.SECTION2]
    if kind.name == "dynkin":
        variants.append(geo.RW)
    variants += [geo.scaled(c) for c in geo.ALLOWED_CONSTANTS if c != 1]
    out = []
    for v in variants:
        b, _ = geo.spectral_drift(kind, v, base, coords)
        for entry in out:
            if np.allclose(entry[1], b, rtol=1e-12, atol=1e-12):
                entry[0] = f"{entry[0]}={v}"
                break
        else:
            out.append([str(v), b])
    return [(label, b) for label, b in out]


# --- Kolmogorov-Smirnov ----------------------------------------------------------

def kolmogorov_sf(y):
    """Survival function of the Kolmogorov distribution."""
    if y < 1e-8:
        return 1.0
    if y < 1.0:
        # theta-function form converges fast for small y
        s = sum(math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * y * y)) for k in range(1, 50))
        return 1.0 - math.sqrt(2 * math.pi) / y * s
    total = 0.0
    for k in range(1, 200):
        term = 2 * (-1) ** (k - 1) * math.exp(-2 * k * k * y * y)
        total += term
        if abs(term) < 1e-17:
            break
    return min(1.0, max(0.0, total))


def ks_two_sample(x, y):
    """Two-sample KS statistic and its asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([x, y])
    fx = np.searchsorted(x, pooled, side="right") / x.size
    fy = np.searchsorted(y, pooled, side="right") / y.size
    d = float(np.max(np.abs(fx - fy)))
    en = x.size * y.size / (x.size + y.size)
    return d, kolmogorov_sf(math.sqrt(en) * d)


def ks_critical(alpha, nx, ny):
    """Asymptotic two-sample critical value of D at level ``alpha``."""
    return math.sqrt(-0.5 * math.log(alpha / 2)) * math.sqrt((nx + ny) / (nx * ny))


# --- gradient check --------------------------------------------------------------

def _fd_gradient(kind, s, step):
    coords = kind.grad_coords
    x = s.coords(coords)
    g = np.zeros(s.n)
    for i in range(s.n):
        hi, lo = x.copy(), x.copy()
        hi[i] += step
        lo[i] -= step
        g[i] = (geo.log_orbit_volume(kind, geo.Spectrum.from_coords(hi, coords))
                - geo.log_orbit_volume(kind, geo.Spectrum.from_coords(lo, coords))) / (2 * step)
    if kind.name == "dynkin":
        g = g * x ** 2
    return g


def gradient_check(kind, s, step=1e-6, tol=1e-6):
    """Analytic vs finite-difference log-volume gradient, plus the constant
    ratio between half the gradient and the trusted drift.

    The ratio is taken in lambda (Dyson), sigma (Wishart) and gamma (Dynkin),
    the coordinates where the quotient Brownian motion has unit diffusion.
    """
    grad = geo.grad_log_volume(kind, s)
    fd = _fd_gradient(kind, s, step)
    norm = np.linalg.norm(grad)
    rel = float(np.linalg.norm(fd - grad) / norm) if norm > 0 else float(np.linalg.norm(fd))
    if kind.name == "dynkin":
        half_grad = 0.5 * grad / s.sigma
        drift, _ = geo.spectral_drift(kind, geo.RW, s, "gamma")
    elif kind.name == "wishart":
        half_grad = 0.5 * grad
        drift, _ = geo.spectral_drift(kind, geo.INTRO, s, "sigma")
    else:
        half_grad = 0.5 * grad
        drift, _ = geo.spectral_drift(kind, geo.INTRO, s)
    nz = np.abs(drift) > 1e-12
    ratios = half_grad[nz] / drift[nz]
    ratio = float(np.mean(ratios)) if ratios.size else None
    spread = float(np.ptp(ratios) / abs(ratio)) if ratios.size else 0.0
    passed = {"fd_vs_analytic": rel <= tol, "ratio_constant": spread <= 1e-8}
    return VerificationReport(
        f"gradient-check:{kind}", [], "n/a", passed,
        {"spectrum": list(s.values), "grad": grad.tolist(), "fd": fd.tolist(),
         "rel_err": rel, "half_grad_over_drift": ratio, "ratio_spread": spread},
        {"step": step, "tol": tol})


# --- fibre-only flow ---------------------------------------------------------------

def _rk4(field_fn, x0, t_end, steps):
    x = np.array(x0, dtype=float)
    dt = t_end / steps
    out = [x.copy()]
    for _ in range(steps):
        k1 = field_fn(x)
        k2 = field_fn(x + 0.5 * dt * k1)
        k3 = field_fn(x + 0.5 * dt * k2)
        k4 = field_fn(x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(x.copy())
    return np.array(out)


def mcf_ode(kind, start, t_end, n_grid, substeps=100):
    """Deterministic flow of the trusted drift field (lambda for Dyson, sigma
    for Wishart) sampled on ``n_grid + 1`` equally spaced times."""
    coords = kind.grad_coords

    def field_fn(x):
        return geo.spectral_drift(kind, geo.trusted_variant(kind),
                                  geo.Spectrum.from_coords(x, coords), coords)[0]

    path = _rk4(field_fn, start.coords(coords), t_end, n_grid * substeps)
    return path[::substeps]


def mcf_check(kind, start, t_end, h=1e-4, n_paths=1000, seed=0, n_grid=10, tol=0.02):
    """Run ``dX = P_V dW`` from the diagonal representative of ``start`` and
    compare the path-averaged spectrum with the deterministic drift flow.

    Reports the largest relative deviation over the time grid.
    """
    if kind.name not in ("dyson", "wishart"):
        raise ValueError("the fibre-only check needs a flat ambient metric (dyson, wishart)")
    coords = kind.grad_coords
    n = start.n
    times = np.linspace(0, t_end, n_grid + 1)
    ode = mcf_ode(kind, start, t_end, n_grid)
    if n == 1:
        mean = np.repeat(start.coords(coords)[None, :], n_grid + 1, axis=0)
        dev = 0.0
    else:
        steps = max(1, int(round(t_end / n_grid / h)))
        hh = t_end / n_grid / steps
        inc = sdecore.increment_kind(kind)
        k = n_normals(inc, n)
        normals = PathNormals([derive_stream(seed, i) for i in range(n_paths)])
        state = np.broadcast_to(geo.base_matrix(kind, start), (n_paths,) + geo.base_matrix(kind, start).shape).copy()
        mean = np.empty((n_grid + 1, n))
        mean[0] = start.coords(coords)
        for g in range(1, n_grid + 1):
            for _ in range(steps):
                dW = np.sqrt(hh) * build_increment(inc, n, normals.draw(k))
                state = sdecore.projected_step("vertical", kind, state, dW, hh)
            if kind.name == "dyson":
                spec = eigvals_sym(state, kind.field)
            else:
                spec = np.sqrt(np.clip(eigvals_sym(state @ np.swapaxes(state, -1, -2)), 0, None))
            mean[g] = spec.mean(axis=0)
        scale = np.maximum(np.max(np.abs(ode), axis=1), 1e-300)
        dev = float(np.max(np.max(np.abs(mean - ode), axis=1) / scale))
    return VerificationReport(
        f"mcf-check:{kind}", [], "n/a", {"max_rel_dev": dev <= tol},
        {"times": times.tolist(), "mean": mean.tolist(), "ode": ode.tolist(), "max_rel_dev": dev},
        {"h": h, "n_paths": n_paths, "seed": seed, "tol": tol})


def scaled_metric_check(base, r=2.0, h=1e-5, n_samples=200000, seed=0, beta=2, threads=1):
    """Drift and quadratic variation at ``r`` against ``1/r**2`` times the
    ``r = 1`` values, as z-scores with independent seeds."""
    kind = geo.ProcessKind.dyson(beta)
    one = estimate_drift(kind, "matrix", base, h, n_samples, seed, scale_r=1.0, threads=threads)
    other = estimate_drift(kind, "matrix", base, h, n_samples, seed + 1, scale_r=r, threads=threads)
    f = 1.0 / r ** 2
    z_drift = (other.mean - f * one.mean) / np.sqrt(other.se ** 2 + (f * one.se) ** 2)
    z_qv = (other.qv - f * one.qv) / np.sqrt(other.qv_se ** 2 + (f * one.qv_se) ** 2)
    passed = {"drift_scaled": bool(np.all(np.abs(z_drift) <= ACCEPT_Z)),
              "qv_scaled": bool(np.all(np.abs(z_qv) <= ACCEPT_Z))}
    return VerificationReport(
        f"scaled-metric:r={r}", [], "n/a", passed,
        {"r1": one.to_dict(), "r": other.to_dict(), "z_drift": z_drift.tolist(), "z_qv": z_qv.tolist()},
        {"h": h, "n_samples": n_samples, "seed": seed, "r": r})
