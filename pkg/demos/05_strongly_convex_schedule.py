"""
Decaying steps under strong convexity
=====================================

With a fixed strongly convex quadratic cost the learning rate can decay
as eta_t = 3 / (alpha_tilde (t+1)) instead of staying constant, and the
regret growth flattens. At these horizons the effect shows up in how the
median regret grows when T doubles, not in its absolute size: alpha_tilde
inherits a kappa^10 denominator, so the early steps overshoot and the
decaying schedule pays a large entry fee before settling.
"""
from onlinectrl.harness import build_experiment, run_batch

base = {
    "system": {"A": [[0.5]], "B": [[1.0]]},
    "gain": {"K": [[0.5]], "kappa": 1.0, "gamma": 0.9},
    "cost": {"family": "quadratic", "Q": [[1.0]], "R": [[1.0]]},
    "noise": {"family": "gaussian", "scale": 1.0, "seed": 1234},
    "horizons": [512, 1024, 2048],
    "seeds": list(range(8)),
    "comparator": {"grid": {"min": 0.4, "max": 0.6, "count": 11}},
    "delta": 0.1,
}

results = {}
for kind in ("strongly_convex", "constant_sqrtT"):
    doc = dict(base, schedule={"kind": kind})
    report = run_batch(build_experiment(doc))
    results[kind] = {r["T"]: r["regret_median"] for r in report.rows}
    print(f"{kind}:")
    for T, med in results[kind].items():
        print(f"  T={T:4d}  median regret {med:9.3f}")

print("\ngrowth when T doubles (median ratio):")
for a, b in ((512, 1024), (1024, 2048)):
    r_sc = results["strongly_convex"][b] / results["strongly_convex"][a]
    r_sq = results["constant_sqrtT"][b] / results["constant_sqrtT"][a]
    print(f"  {a} -> {b}:  strongly_convex x{r_sc:.3f}   constant_sqrtT x{r_sq:.3f}")
