"""Path orchestration for matrix-level and spectral-level runs.

Every path ``i`` draws from ``derive_stream(master_seed, i)`` alone, and
paths are simulated in blocks of a fixed size, so results do not depend on
the number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import sdecore
from .matcore import eigvals_sym, polar_orthogonal
from .randmat import PathNormals, build_increment, derive_stream, n_normals

START_EPS = 1e-3
BLOCK = 512
REORTHO_EVERY = 100

SIM_COORDS = {"dyson": "lambda", "wishart": "sigma", "dynkin": "gamma", "flag": "lambda"}


@dataclass(frozen=True)
class ProcessSpec:
    kind: geo.ProcessKind
    level: str
    n: int
    t_end: float
    n_grid: int = 10
    variant: geo.DriftVariant = None
    start: tuple = None  # eigenvalues; None means the process's natural start

    def __post_init__(self):
        if self.level not in ("matrix", "spectral"):
            raise ValueError("level must be 'matrix' or 'spectral'")
        if self.n < 1 or self.n_grid < 1:
            raise ValueError("n and n_grid must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.kind.name == "flag" and self.start is None:
            raise ValueError("the flag example needs the fixed spectrum as start")
        if self.start is not None:
            object.__setattr__(self, "start", tuple(float(v) for v in self.start))
            if len(self.start) != self.n:
                raise ValueError("start spectrum has the wrong length")

    @property
    def drift_variant(self):
        return self.variant or geo.trusted_variant(self.kind)

    @property
    def times(self):
        return np.linspace(0.0, self.t_end, self.n_grid + 1)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), n) eigenvalues, descending
    collided: bool = False
    reflections: int = 0
    matrices: list = field(default_factory=list)


def _eigen_observable(kind, state, lam_fixed=None):
    if kind.name == "dyson":
        return eigvals_sym(state, kind.field)
    if kind.name == "flag":
        obs = state @ (lam_fixed[:, None] * np.swapaxes(state, -1, -2))
        return eigvals_sym(obs)
    return eigvals_sym(state @ np.swapaxes(state, -1, -2))


def _matrix_start(spec, paths):
    n, kind = spec.n, spec.kind
    if kind.name == "dyson":
        lam = np.zeros(n) if spec.start is None else np.array(spec.start)
        m = geo.embed(np.diag(lam), kind.field)
    elif kind.name == "wishart":
        m = np.zeros((n, n)) if spec.start is None else np.diag(np.sqrt(spec.start))
    elif kind.name == "dynkin":
        m = np.eye(n) if spec.start is None else np.diag(np.sqrt(spec.start))
    else:
        m = np.eye(n)
    return np.broadcast_to(m, (paths,) + m.shape).copy()


def _spectral_start(spec):
    coords = SIM_COORDS[spec.kind.name]
    if spec.start is not None:
        return geo.coords_from_lam(np.array(spec.start), coords)
    ramp = START_EPS * np.arange(spec.n - 1, -1, -1, dtype=float)
    if spec.kind.name == "wishart":
        return np.sqrt(ramp)
    return ramp  # lambda for Dyson, gamma for Dynkin


def _steps_per_interval(spec, ctrl):
    dt = spec.t_end / spec.n_grid
    k = max(1, int(round(dt / ctrl.h0)))
    return k, dt / k


def _run_matrix_block(spec, ctrl, streams, keep_matrices=False):
    kind, n = spec.kind, spec.n
    paths = len(streams)
    normals = PathNormals(streams)
    inc = sdecore.increment_kind(kind)
    k = n_normals(inc, n)
    state = _matrix_start(spec, paths)
    lam_fixed = np.array(spec.start) if kind.name == "flag" else None
    steps, h = _steps_per_interval(spec, ctrl)
    out = np.empty((paths, spec.n_grid + 1, n))
    mats = [state.copy()] if keep_matrices else []
    out[:, 0] = _eigen_observable(kind, state, lam_fixed)
    count = 0
    for g in range(1, spec.n_grid + 1):
        for _ in range(steps):
            dW = np.sqrt(h) * build_increment(inc, n, normals.draw(k))
            state = sdecore.matrix_step(kind, state, dW, h)
            count += 1
            if kind.name == "flag" and count % REORTHO_EVERY == 0:
                state = polar_orthogonal(state)
        out[:, g] = _eigen_observable(kind, state, lam_fixed)
        if keep_matrices:
            mats.append(state.copy())
    return out, np.zeros(paths, dtype=bool), np.zeros(paths, dtype=np.int64), mats


def _run_spectral_block(spec, ctrl, streams):
    kind, n = spec.kind, spec.n
    coords = SIM_COORDS[kind.name]
    variant = spec.drift_variant
    paths = len(streams)
    x = np.broadcast_to(_spectral_start(spec), (paths, n)).copy()
    out = np.empty((paths, spec.n_grid + 1, n))
    out[:, 0] = geo.lam_from_coords(x, coords)
    if kind.name == "flag":
        out[:] = out[:, :1]
        return out, np.zeros(paths, dtype=bool), np.zeros(paths, dtype=np.int64)
    normals = PathNormals(streams)
    t = np.zeros(paths)
    collided = np.zeros(paths, dtype=bool)
    reflections = np.zeros(paths, dtype=np.int64)
    cap = np.full(paths, np.inf)  # step cap after a rejected proposal
    times = spec.times
    floor = ctrl.h_min * (1 + 1e-12)
    for g in range(1, spec.n_grid + 1):
        target = times[g]
        while True:
            live = np.nonzero((t < target) & ~collided)[0]
            if live.size == 0:
                break
            h = np.minimum(sdecore.adapt_h(x[live], ctrl),
                           sdecore.move_cap(kind, variant, x[live], coords, ctrl))
            h = np.maximum(h, ctrl.h_min)
            h = np.minimum(np.minimum(h, cap[live]), target - t[live])
            xi = normals.draw(n, live)
            new, ok = sdecore.em_update(kind, variant, x[live], xi, h, coords)
            at_floor = ~ok & (h <= floor)
            if ctrl.collision == "reflect":
                new[at_floor] = -np.sort(-new[at_floor], axis=-1)
                reflections[live[at_floor]] += 1
                ok = ok | at_floor
            else:
                collided[live[at_floor]] = True
            good = live[ok]
            x[good] = new[ok]
            t_new = t[good] + h[ok]
            t[good] = np.where(target - t_new <= 1e-12 * max(1.0, target), target, t_new)
            cap[good] = np.inf
            retry = ~ok & ~at_floor
            cap[live[retry]] = np.maximum(h[retry] / 2, ctrl.h_min)
        out[:, g] = geo.lam_from_coords(x, coords)
    return out, collided, reflections


def _blocks(n_paths):
    return [(lo, min(lo + BLOCK, n_paths)) for lo in range(0, n_paths, BLOCK)]


def simulate_paths(spec, ctrl, n_paths, master_seed, threads=1, first_index=0):
    """Spectra on the time grid for ``n_paths`` paths.

    Returns ``(states, collided, reflections)`` with per-path collision flags
    and counts of reordered proposals.
    """
    def work(bounds):
        lo, hi = bounds
        streams = [derive_stream(master_seed, first_index + i) for i in range(lo, hi)]
        if spec.level == "matrix":
            return _run_matrix_block(spec, ctrl, streams)[:3]
        return _run_spectral_block(spec, ctrl, streams)

    blocks = _blocks(n_paths)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]
    states = np.concatenate([r[0] for r in results])
    collided = np.concatenate([r[1] for r in results])
    reflections = np.concatenate([r[2] for r in results])
    return states, collided, reflections


def run_path(spec, ctrl, stream, keep_matrices=False):
    """One trajectory driven by ``stream``."""
    if spec.level == "matrix":
        states, coll, refl, mats = _run_matrix_block(spec, ctrl, [stream], keep_matrices)
        mats = [m[0] for m in mats]
    else:
        states, coll, refl = _run_spectral_block(spec, ctrl, [stream])
        mats = []
    return Trajectory(spec.times, states[0], bool(coll[0]), int(refl[0]), mats)


@dataclass
class Ensemble:
    spectra: np.ndarray  # (n_kept, n)
    excluded: int
    n_paths: int
    reflections: int = 0


def terminal_ensemble(spec, ctrl, n_paths, master_seed, threads=1):
    """Terminal spectra of ``n_paths`` paths; path ``i`` uses stream ``i``.

    Collided paths are dropped and counted.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    states, collided, refl = simulate_paths(spec, ctrl, n_paths, master_seed, threads)
    excluded = int(collided.sum())
    if excluded > n_paths / 2:
        raise sdecore.CollisionError(f"{excluded} of {n_paths} paths collided; step control too coarse")
    return Ensemble(states[~collided, -1], excluded, n_paths, int(refl.sum()))
