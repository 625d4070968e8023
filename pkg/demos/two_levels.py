"""Simulate a process at the matrix level and directly on its spectrum, then
compare the terminal eigenvalue laws with a two-sample KS test."""
from eigflow import ProcessKind, ProcessSpec, StepControl, ks_two_sample, terminal_ensemble
from eigflow.verify import ks_critical

if __name__ == "__main__":
    ctrl = StepControl(h0=1e-3)
    for kind, n in ((ProcessKind.dyson(2), 3), (ProcessKind.wishart(), 2)):
        mat = terminal_ensemble(ProcessSpec(kind, "matrix", n, 0.5, n_grid=1), ctrl, 2000, 100)
        spe = terminal_ensemble(ProcessSpec(kind, "spectral", n, 0.5, n_grid=1), ctrl, 2000, 101)
        crit = ks_critical(0.01, 2000, 2000)
        print(f"{kind}, n={n}, t=0.5, 2000 paths per level, 1% critical D = {crit:.4f}")
        for i in range(n):
            d, p = ks_two_sample(mat.spectra[:, i], spe.spectra[:, i])
            print(f"  lambda{i + 1}: matrix mean {mat.spectra[:, i].mean():+.4f}, "
                  f"spectral mean {spe.spectra[:, i].mean():+.4f}, D = {d:.4f}, p = {p:.3f}")
