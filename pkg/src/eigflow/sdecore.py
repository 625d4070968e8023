"""Time steppers: matrix-level Ito steps, Euler-Maruyama on spectra,
fibre-projected steps, and the gap-driven step-size rule.

Group SDEs are integrated in Ito form, converted by hand:

* Dynkin, ``dG = G o dW``: for a Ginibre BM ``dW dW = I dt`` (only the
  ``dW_ii dW_ii`` terms survive), so ``dG = G dW + G dt / 2``.
* Flag example, ``dQ = o dA Q``: ``dA dA = -(n - 1) h I`` for the skew BM,
  giving ``dQ = dA Q - (n - 1) Q h / 2``.
"""
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .matcore import eig_sym, singular_values

MATRIX_INCREMENT = {"wishart": "Ginibre", "dynkin": "Ginibre", "flag": "SkewSymmetric"}


class CollisionError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepControl:
    h0: float = 1e-3
    h_min: float = 1e-10
    gap_threshold: float = 0.05
    max_halvings: int = 60
    max_move: float = 0.3
    collision: str = "reflect"

    def __post_init__(self):
        if self.collision not in ("reflect", "exclude"):
            raise ValueError("collision policy is 'reflect' or 'exclude'")
        if not (0 < self.h_min <= self.h0):
            raise ValueError("need 0 < h_min <= h0")
        if not self.gap_threshold > 0:
            raise ValueError("gap_threshold must be positive")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be nonnegative")
        if not self.max_move > 0:
            raise ValueError("max_move must be positive")


def increment_kind(kind):
    if kind.name == "dyson":
        return {1: "GOE", 2: "GUE", 4: "GSE"}[kind.beta]
    return MATRIX_INCREMENT[kind.name]


def adapt_h(x, ctrl):
    """Step size for state(s) ``x``: one halving of ``h0`` per factor of two
    that the relative gap sits below ``gap_threshold``, floored at ``h_min``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        gap = np.full(x.shape[:-1], np.inf)
    else:
        scale = np.maximum(1.0, np.max(np.abs(x), axis=-1))
        gap = np.min(x[..., :-1] - x[..., 1:], axis=-1) / scale
    ratio = ctrl.gap_threshold / np.maximum(gap, 1e-300)
    halvings = np.ceil(np.log2(np.clip(ratio, 1.0, 2.0 ** 1000)))
    halvings = np.minimum(halvings, ctrl.max_halvings)
    h = np.maximum(ctrl.h0 * 0.5 ** halvings, ctrl.h_min)
    return float(h) if np.ndim(h) == 0 else h


def move_cap(kind, variant, x, coords, ctrl):
    """Largest step for which drift and noise each move a coordinate by at
    most ``max_move`` times the smallest gap.

    The halving rule alone gives steps proportional to the gap, which cannot
    hold back a drift that grows like one over the gap.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        return np.full(x.shape[:-1], np.inf)
    gap = np.min(x[..., :-1] - x[..., 1:], axis=-1)
    b, a = geo.drift_array(kind, variant, x, coords)
    reach = ctrl.max_move * gap
    with np.errstate(divide="ignore"):
        by_drift = reach / np.max(np.abs(b), axis=-1)
        by_noise = (reach / np.max(np.abs(a), axis=-1)) ** 2
    return np.minimum(by_drift, by_noise)


def _is_symmetric(m):
    return np.array_equal(m, np.swapaxes(m, -1, -2))


def matrix_step(kind, state, dW, h):
    """One Ito step of the matrix process driven by the increment ``dW``."""
    state = np.asarray(state, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if state.shape != dW.shape:
        raise ValueError(f"shape mismatch: {state.shape} vs {dW.shape}")
    if kind.name == "dyson":
        if not _is_symmetric(dW):
            raise ValueError("Dyson increments must be symmetric (embedded Hermitian)")
        return state + dW
    if kind.name == "wishart":
        return state + dW
    if kind.name == "dynkin":
        return state + state @ dW + 0.5 * h * state
    if kind.name == "flag":
        if not np.array_equal(dW, -np.swapaxes(dW, -1, -2)):
            raise ValueError("flag increments must be skew-symmetric")
        n = state.shape[-1]
        return state + dW @ state - 0.5 * (n - 1) * h * state
    raise ValueError(f"unknown process {kind.name!r}")


def em_update(kind, variant, x, xi, h, coords):
    """Vectorized Euler-Maruyama proposal in ``coords``.

    Returns ``(x_new, ok)``; ``ok`` is False where ordering broke.  Sigma
    coordinates are reflected at zero (singular values are nonnegative).
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    hb = h[..., None] if h.ndim else h
    b, a = geo.drift_array(kind, variant, x, coords)
    new = x + a * np.sqrt(hb) * xi + b * hb
    if coords == "sigma":
        new = np.abs(new)
    ok = np.all(np.diff(new, axis=-1) < 0, axis=-1) & np.all(np.isfinite(new), axis=-1)
    return new, ok


def spectral_step(kind, variant, s, xi, h, coords=None):
    """One Euler-Maruyama step of the spectral SDE from a Spectrum.

    Raises CollisionError when the proposal leaves the ordered chamber; the
    caller retries with a smaller step.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    coords = coords or geo.native_coords(kind, variant)
    new, ok = em_update(kind, variant, s.coords(coords), np.asarray(xi, dtype=float), h, coords)
    if not ok:
        raise CollisionError("ordering violated; retry with a smaller step")
    return geo.Spectrum.from_coords(new, coords)


def projected_step(mode, kind, state, dW, h, r=1.0, metric_correction=True):
    """Step of the fibre-projected processes.

    ``mode="vertical"``: ``state + P_V dW``.
    ``mode="scaled"``: Brownian step for the metric that scales the horizontal
    part by ``r**2``: ``state + P_H dW / r + P_V dW`` plus, when
    ``metric_correction`` is set, the Laplace-Beltrami drift of that metric,
    ``(1 - 1/r**2) * lift(H) h / 2`` with ``H`` the fibre mean curvature.  The
    correction comes from ``div P_H = -H`` (the horizontal leaves are flat).
    """
    if kind.name not in ("dyson", "wishart"):
        raise ValueError("projected steps need a flat ambient metric (dyson, wishart)")
    state = np.asarray(state, dtype=float)
    dW = np.asarray(dW, dtype=float)
    hor = geo.horizontal_project(kind, state, dW)
    ver = dW - hor
    if mode == "vertical":
        return state + ver
    if mode != "scaled":
        raise ValueError(f"unknown projection mode {mode!r}")
    if not r > 0:
        raise ValueError("r must be positive")
    out = state + hor / r + ver
    if metric_correction and r != 1.0:
        # lift(H) / 2 = -lift(J) with J the fibre drift
        out = out - (1.0 - 1.0 / r ** 2) * h * _lifted_drift(kind, state)
    return out


def _lifted_drift(kind, state):
    """Horizontal lift of ``-H/2`` (the fibre drift) at each state."""
    flat = state.reshape((-1,) + state.shape[-2:])
    out = np.empty_like(flat)
    for i, m in enumerate(flat):
        s = _spectrum_of(kind, m)
        out[i] = geo.horizontal_lift(kind, m, geo.mean_curvature_drift(kind, s))
    return out.reshape(state.shape)


def _spectrum_of(kind, m):
    if kind.name == "dyson":
        return geo.Spectrum(eig_sym(m, kind.field)[0])
    return geo.Spectrum(singular_values(m), "singular_values")
