"""Randomized structural checks with a replayable seed.

Runs a reduced version of the property suite behind ``sparsesdf verify`` and
prints each property with its worst observed value.

    python demos/03_property_suite.py
"""

from sparsesdf.theory import VerifySettings, run_suite

settings = VerifySettings(n_instances=15, T_values=(5, 20), n_nested_seeds=5, seed=7)
report = run_suite(settings)
for name, p in sorted(report["properties"].items()):
    status = "pass" if p["passed"] else f"FAIL (replay seed {p['failing_seed']})"
    print(f"{name:32s} {status:6s} checked {p['checked']:4d}  worst {p['worst']:.3g}")
print("all properties hold" if report["passed"] else "some property failed")
