import numpy as np
import pytest

from eigflow import geometry as geo
from eigflow.geometry import INTRO, ProcessKind, Spectrum
from eigflow.processes import ProcessSpec, run_path, simulate_paths, terminal_ensemble
from eigflow.randmat import derive_stream
from eigflow.sdecore import CollisionError, StepControl, spectral_step

GUE = ProcessKind.dyson(2)
WISHART = ProcessKind.wishart()


def test_spec_validation():
    with pytest.raises(ValueError):
        ProcessSpec(GUE, "quantum", 2, 1.0)
    with pytest.raises(ValueError):
        ProcessSpec(GUE, "matrix", 2, 0.0)
    with pytest.raises(ValueError):
        ProcessSpec(ProcessKind.flag(), "matrix", 3, 1.0)
    with pytest.raises(ValueError):
        ProcessSpec(GUE, "matrix", 3, 1.0, start=(1.0, 0.0))
    spec = ProcessSpec(GUE, "matrix", 2, 1.0, n_grid=4)
    np.testing.assert_allclose(spec.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert spec.drift_variant == INTRO


def test_cross_level_top_eigenvalue():
    ctrl = StepControl(h0=1e-2)
    top = {}
    for level in ("matrix", "spectral"):
        e = terminal_ensemble(ProcessSpec(GUE, level, 2, 1.0, n_grid=1), ctrl, 10000, 3 if level == "matrix" else 4)
        top[level] = (e.spectra[:, 0].mean(), e.spectra[:, 0].std() / np.sqrt(len(e.spectra)))
    diff = top["matrix"][0] - top["spectral"][0]
    assert abs(diff) < 3 * np.hypot(top["matrix"][1], top["spectral"][1])


def test_trace_oracles():
    ctrl = StepControl(h0=1e-2)
    for level in ("matrix", "spectral"):
        e = terminal_ensemble(ProcessSpec(GUE, level, 2, 1.0, n_grid=1), ctrl, 4000, 1)
        tr = e.spectra.sum(1)
        assert abs(tr.mean()) < 3 * tr.std() / np.sqrt(len(tr))
        e = terminal_ensemble(ProcessSpec(WISHART, level, 2, 1.0, n_grid=1), ctrl, 4000, 1)
        tr = e.spectra.sum(1)
        assert abs(tr.mean() - 4.0) < 3 * tr.std() / np.sqrt(len(tr))


def test_wishart_scalar_squared_bessel():
    """n = 1 from lambda = 1: E lambda_t = 1 + t."""
    spec = ProcessSpec(WISHART, "spectral", 1, 1.0, n_grid=1, start=(1.0,))
    e = terminal_ensemble(spec, StepControl(h0=1e-3), 20000, 2)
    lam = e.spectra[:, 0]
    assert abs(lam.mean() - 2.0) < 3 * lam.std() / np.sqrt(len(lam))


def test_zero_noise_flow_gaps_grow():
    s = Spectrum([4.0, 2.0, 1.0])
    gaps = [np.diff(s.values)]
    for _ in range(2000):
        s = spectral_step(GUE, INTRO, s, np.zeros(3), 1e-3)
        gaps.append(-np.diff(s.values))
    gaps = np.array(gaps[1:])
    assert np.all(np.diff(gaps, axis=0) >= 0)


def test_flag_stays_isospectral():
    spec = ProcessSpec(ProcessKind.flag(), "matrix", 3, 0.1, n_grid=5, start=(1.0, 0.0, -1.0))
    traj = run_path(spec, StepControl(h0=1e-4), derive_stream(6, 0), keep_matrices=True)
    assert np.abs(traj.states - [1.0, 0.0, -1.0]).max() <= 1e-3
    assert len(traj.matrices) == 6
    flat = run_path(ProcessSpec(ProcessKind.flag(), "spectral", 3, 0.1, start=(1.0, 0.0, -1.0)), StepControl(),
                    derive_stream(6, 0))
    np.testing.assert_array_equal(flat.states, np.tile([1.0, 0.0, -1.0], (11, 1)))


def test_trajectory_shape_and_order():
    for level in ("matrix", "spectral"):
        traj = run_path(ProcessSpec(ProcessKind.dynkin(), level, 3, 0.2, n_grid=4), StepControl(), derive_stream(1, 2))
        assert traj.states.shape == (5, 3)
        assert np.all(np.diff(traj.states, axis=1) <= 0)
        assert not traj.collided


@pytest.mark.parametrize("level", ["matrix", "spectral"])
def test_determinism_and_thread_invariance(level):
    spec = ProcessSpec(ProcessKind.dyson(1), level, 3, 0.2, n_grid=2)
    a = simulate_paths(spec, StepControl(), 1100, 5, threads=1)
    b = simulate_paths(spec, StepControl(), 1100, 5, threads=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    # path i depends only on stream i
    tail = simulate_paths(spec, StepControl(), 3, 5, first_index=1000)
    np.testing.assert_array_equal(tail[0], a[0][1000:1003])


def test_run_path_matches_ensemble_row():
    spec = ProcessSpec(WISHART, "spectral", 2, 0.3, n_grid=3)
    states = simulate_paths(spec, StepControl(), 4, 9)[0]
    traj = run_path(spec, StepControl(), derive_stream(9, 2))
    np.testing.assert_array_equal(traj.states, states[2])


def test_exclusion_limit():
    coarse = StepControl(h0=0.2, h_min=0.2, max_move=100.0, collision="exclude")
    spec = ProcessSpec(ProcessKind.dyson(1), "spectral", 4, 2.0, n_grid=1, start=(1.5, 0.5, -0.5, -1.5))
    with pytest.raises(CollisionError):
        terminal_ensemble(spec, coarse, 200, 0)
    with pytest.raises(ValueError):
        terminal_ensemble(spec, coarse, 1, 0)


def test_reflect_policy_counts():
    coarse = StepControl(h0=0.2, h_min=0.2, max_move=100.0, collision="reflect")
    spec = ProcessSpec(ProcessKind.dyson(1), "spectral", 4, 2.0, n_grid=1, start=(1.5, 0.5, -0.5, -1.5))
    e = terminal_ensemble(spec, coarse, 200, 0)
    assert e.excluded == 0 and e.reflections > 0
    assert np.all(np.diff(e.spectra, axis=1) <= 0)
