"""Estimate the eigenvalue drift of each process from one-step matrix increments
and show which closed-form candidate survives."""
import math

from eigflow import ProcessKind, Spectrum, adjudicate_drift, estimate_drift
from eigflow.verify import drift_candidates

CASES = [
    (ProcessKind.dyson(2), Spectrum([4.0, 2.0, 1.0]), None),
    (ProcessKind.dyson(1), Spectrum([4.0, 2.0, 1.0]), None),
    (ProcessKind.wishart(), Spectrum([4.0, 1.0]), "sigma"),
    (ProcessKind.dynkin(), Spectrum([1.0]), None),
    (ProcessKind.dynkin(), Spectrum.from_gamma([0.5, 0.0]), "gamma"),
    (ProcessKind.dynkin(), Spectrum([4.0, 1.0]), None),
]

if __name__ == "__main__":
    for kind, base, coords in CASES:
        est = estimate_drift(kind, "matrix", base, 1e-5, 400_000, seed=1, coords=coords)
        report = adjudicate_drift(est, drift_candidates(kind, base, est.coords), f"{kind} at {base}")
        print(f"{kind} {est.coords} at {list(base.values)}")
        print(f"  estimate {est.mean.round(4)} +- {est.se.round(4)}")
        for res in report.candidates:
            print(f"  {res['label']:<28} max|z| = {res['max_abs_z']:10.2f}")
        print(f"  accepted: {report.accepted}")
    print(f"coth target for gamma=(0.5,0): +-{0.5 / math.tanh(0.5):.4f}")
