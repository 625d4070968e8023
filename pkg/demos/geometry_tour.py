"""Orbit volumes, their gradients and the mean curvature of the orbit, compared
with the trusted eigenvalue drift."""
import numpy as np

from eigflow import ProcessKind, Spectrum, gradient_check, mean_curvature_drift, spectral_drift
from eigflow.geometry import trusted_variant

if __name__ == "__main__":
    s = Spectrum([3.0, 1.5, 0.5])
    for kind in (ProcessKind.dyson(1), ProcessKind.dyson(2), ProcessKind.wishart(), ProcessKind.dynkin()):
        coords = "lambda" if kind.name == "dyson" else "sigma"
        drift, _ = spectral_drift(kind, trusted_variant(kind), s, coords)
        check = gradient_check(kind, s).results
        print(f"{kind}")
        print(f"  gradient vs finite differences, rel err {check['rel_err']:.1e}")
        print(f"  half gradient / trusted drift = {check['half_grad_over_drift']:.6f}")
        print(f"  trusted drift in {coords:<6}  {np.round(drift, 4)}")
        curv = mean_curvature_drift(kind, s)
        if kind.name == "dynkin":
            # the sigma image of the gamma drift carries an extra sigma / 2
            curv = curv + 0.5 * s.coords("sigma")
            print(f"  curvature + sigma / 2  {np.round(curv, 4)}")
        else:
            print(f"  curvature drift        {np.round(curv, 4)}")
