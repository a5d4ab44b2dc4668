"""Experiment harness: JSON configs, seeded batches, scaling reports.

A config document fixes the plant, the stabilizing gain with its
(kappa, gamma) certificate, the cost and noise families, the step-size
schedule, horizons, seeds, and the comparator gain set:

    {
      "system":     {"A": [[0.5]], "B": [[1.0]]},
      "gain":       {"K": [[0.5]], "kappa": 1.0, "gamma": 0.9},
      "cost":       {"family": "quadratic", "Q": [[1.0]], "R": [[1.0]]}
                    or {"family": "random_quadratic", "seed": 7},
      "noise":      {"family": "gaussian", "scale": 1.0, "seed": 1234},
      "schedule":   {"kind": "constant_sqrtT"},
      "horizons":   [256, 512, 1024, 2048, 4096],
      "seeds":      [0, 1, 2, 3],
      "comparator": {"grid": {"min": 0.4, "max": 0.6, "count": 11}}
                    or {"candidates": [[[0.45]], [[0.55]]]},
      "delta":      0.1          (optional)
      "x0":         [0.0]        (optional, default the origin)
      "m0":         "zero"       (optional; the only batch-level start)
    }

Per-episode randomness is derived by mixing the family seed with the
episode seed, so a batch is reproducible job by job and its outputs are
byte-identical across invocations. Theory constants are pure functions
of the config; they are astronomically conservative (growing as
kappa^18) and are reported for the shape of the bound, not tightness.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import ceil, log, sqrt
from typing import Optional

import numpy as np

from .comparator import best_fixed_K, regret
from .costs import (CostSchedule, adversarial_convex_schedule,
                    constant_schedule, materialize, quadratic_cost)
from .learner import (EpisodeDivergedError, LearningRateSchedule,
                      alpha_tilde_from, run_episode)
from .noise import (NoiseProcess, population_sigma_lower, population_sigma_w,
                    population_sigma_w4)
from .policy import policy_class_diameter
from .rng import mix_seed
from .stability import CertificationError, StabilityCertificate, certify
from .system import LinearSystem, system_from_json

_SUBGAUSSIAN_FAMILIES = ("gaussian", "scaled_bernoulli", "zero")


@dataclass(frozen=True)
class ExperimentConfig:
    doc: dict
    system: LinearSystem
    K: np.ndarray
    kappa: float
    gamma: float
    cert: StabilityCertificate
    cost_cfg: dict
    noise_cfg: dict
    schedule_kind: str
    horizons: tuple
    seeds: tuple
    candidates: tuple
    delta: float
    x0: Optional[np.ndarray] = None


def load_config(path: str) -> dict:
    try:
        with open(path) as fp:
            doc = json.load(fp)
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("config root must be a JSON object")
    return doc


def config_hash(doc: dict) -> str:
    """Git-style SHA-1 of the canonical JSON serialization."""
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(payload) + payload).hexdigest()


def _require(doc: dict, key: str, section: str) -> object:
    if key not in doc:
        raise ValueError(f"config {section} is missing {key!r}")
    return doc[key]


def _noise_from_cfg(cfg: dict, n_x: int, seed: int) -> NoiseProcess:
    return NoiseProcess(
        family=cfg["family"], scale=float(cfg.get("scale", 1.0)), dim=n_x,
        seed=seed, df=cfg.get("df"),
    )


def _probe_schedule(cost_cfg: dict, n_x: int, n_u: int) -> CostSchedule:
    """Three-step instance of the configured cost family, for metadata."""
    if cost_cfg["family"] == "quadratic":
        Q = np.asarray(cost_cfg["Q"], dtype=float)
        R = np.asarray(cost_cfg["R"], dtype=float)
        return constant_schedule(quadratic_cost(Q, R), 3)
    return adversarial_convex_schedule(int(cost_cfg["seed"]), 3, n_x, n_u)


def build_experiment(doc: dict) -> ExperimentConfig:
    """Validate a parsed config document end to end.

    Everything that can be rejected statically is rejected here, before
    any episode runs: shapes, family names, certification of the gain
    and of every comparator candidate. Grid-generated candidates that
    fail certification are dropped; explicitly listed ones must certify.
    """
    sys = system_from_json(_require(doc, "system", "root"))
    gain = _require(doc, "gain", "root")
    K = np.asarray(_require(gain, "K", "gain"), dtype=float)
    if K.shape != (sys.n_u, sys.n_x):
        raise ValueError(f"gain K must be ({sys.n_u}, {sys.n_x}), got {K.shape}")
    kappa = float(_require(gain, "kappa", "gain"))
    gamma = float(_require(gain, "gamma", "gain"))

    sched = _require(doc, "schedule", "root")
    kind = _require(sched, "kind", "schedule")
    if kind not in ("constant_sqrtT", "strongly_convex"):
        raise ValueError(f"unknown schedule kind {kind!r}")
    cert = certify(sys, K, kappa, gamma,
                   require_diagonal=(kind == "strongly_convex")
                   or bool(gain.get("require_diagonal", False)))

    cost_cfg = dict(_require(doc, "cost", "root"))
    family = _require(cost_cfg, "family", "cost")
    if family == "quadratic":
        probe = _probe_schedule(cost_cfg, sys.n_x, sys.n_u)  # shape check
    elif family == "random_quadratic":
        _require(cost_cfg, "seed", "cost")
        probe = _probe_schedule(cost_cfg, sys.n_x, sys.n_u)
    else:
        raise ValueError(f"unknown cost family {family!r}")

    noise_cfg = dict(_require(doc, "noise", "root"))
    _require(noise_cfg, "seed", "noise")
    proc = _noise_from_cfg(noise_cfg, sys.n_x, seed=0)  # validates family/df

    if kind == "strongly_convex":
        if probe.alpha is None:
            raise ValueError("strongly_convex schedule needs strongly convex costs")
        if population_sigma_lower(proc) <= 0.0:
            raise ValueError("strongly_convex schedule needs non-degenerate noise")

    horizons = sorted({int(T) for T in _require(doc, "horizons", "root")})
    if not horizons:
        raise ValueError("horizons list is empty")
    if horizons[0] < 3:
        raise ValueError("every horizon must be >= 3")
    seeds = [int(s) for s in _require(doc, "seeds", "root")]
    if not seeds:
        raise ValueError("seeds list is empty")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds list has duplicates")

    comp = _require(doc, "comparator", "root")
    raw: list = []
    from_grid = False
    if "candidates" in comp:
        raw = [np.asarray(c, dtype=float) for c in comp["candidates"]]
    elif "grid" in comp:
        if sys.n_x != 1 or sys.n_u != 1:
            raise ValueError("comparator grid is only defined for scalar systems")
        g = comp["grid"]
        lo, hi = float(g["min"]), float(g["max"])
        count = int(g["count"])
        if count < 1 or hi < lo:
            raise ValueError("comparator grid must have count >= 1 and max >= min")
        raw = [np.array([[v]]) for v in np.linspace(lo, hi, count)]
        from_grid = True
    else:
        raise ValueError("comparator must give 'candidates' or 'grid'")
    candidates = []
    for cand in raw:
        if cand.shape != (sys.n_u, sys.n_x):
            raise ValueError(f"candidate gain must be ({sys.n_u}, {sys.n_x})")
        try:
            certify(sys, cand, kappa, gamma)
        except CertificationError:
            if from_grid:
                continue  # grid points outside the class are simply skipped
            raise
        candidates.append(cand)
    if not candidates:
        raise ValueError("no comparator candidate certifies at (kappa, gamma)")

    x0 = None
    if doc.get("x0") is not None:
        x0 = np.asarray(doc["x0"], dtype=float)
        if x0.shape != (sys.n_x,):
            raise ValueError(f"x0 must have shape ({sys.n_x},)")

    delta = float(doc.get("delta", 0.1))
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")

    # Batches span several horizons and H grows with T, so a single explicit
    # block stack cannot fit them all; nonzero starts go through run_episode.
    if doc.get("m0", "zero") != "zero":
        raise ValueError('m0 supports only "zero"')

    return ExperimentConfig(
        doc=doc, system=sys, K=K, kappa=kappa, gamma=gamma, cert=cert,
        cost_cfg=cost_cfg, noise_cfg=noise_cfg, schedule_kind=kind,
        horizons=tuple(horizons), seeds=tuple(seeds),
        candidates=tuple(candidates), delta=delta, x0=x0,
    )


@dataclass(frozen=True)
class TheoryConstants:
    """Constants of the two regret guarantees, as pure functions of config.

    sigma_w is the smallest single scale consistent with both the
    first- and fourth-moment assumptions; sigma_w_subgauss is the
    sub-Gaussian scale used by the logarithmic-regret constants and is
    only a valid certificate when `subgaussian` is true.
    """

    delta: float
    n: int
    G_c: float
    kappa: float
    gamma: float
    kappa_B: float
    sigma_w: float
    sigma_w_subgauss: float
    sigma_lower: float
    subgaussian: bool
    D: float
    C_delta: float
    alpha: Optional[float]
    beta: Optional[float]
    alpha_tilde: Optional[float]
    H: dict
    bound_curve: dict
    C_delta_sc: float
    H_sc: dict
    L_bar: dict
    beta_bar: Optional[dict]

    def to_json_dict(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            if isinstance(value, dict):
                out[key] = {str(k): v for k, v in value.items()}
            else:
                out[key] = value
        return out


def compute_theory_constants(exp: ExperimentConfig,
                             delta: Optional[float] = None) -> TheoryConstants:
    """Evaluate both regret bounds' constants for the config's horizons."""
    if delta is None:
        delta = exp.delta
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    sys = exp.system
    kappa, gamma, kappa_B = exp.kappa, exp.gamma, sys.kappa_B
    n = max(sys.n_x, sys.n_u)
    probe = _probe_schedule(exp.cost_cfg, sys.n_x, sys.n_u)
    G_c, alpha, beta = probe.g_c, probe.alpha, probe.beta

    proc = _noise_from_cfg(exp.noise_cfg, sys.n_x, seed=0)
    sw = max(population_sigma_w(proc), population_sigma_w4(proc))
    sw_sub = population_sigma_w(proc)
    sigma_lower = population_sigma_lower(proc)
    subgaussian = exp.noise_cfg["family"] in _SUBGAUSSIAN_FAMILIES

    D = policy_class_diameter(n, kappa, gamma, kappa_B)
    s14 = max(sw, sw ** 4)
    C = 65724.0 * s14 * n ** 2 * G_c ** 2 * kappa_B ** 6 * kappa ** 18 \
        / (delta * gamma ** 8 * (1.0 - gamma) ** 4)

    alpha_tilde = None
    if alpha is not None and sigma_lower > 0.0:
        alpha_tilde = alpha_tilde_from(alpha, sigma_lower, gamma, kappa)

    C_sc = (2.0 / delta) * (
        201.0 * sw_sub * kappa_B ** 2 * kappa ** 8 / (gamma ** 2 * (1.0 - gamma))
        + 2.0 * sw_sub * sqrt(2.0 * sys.n_x * (1.0 + log(sys.n_x))))

    H, bound, H_sc, L_bar, beta_bar = {}, {}, {}, {}, {}
    for T in exp.horizons:
        lT = log(T)
        H[T] = ceil(2.0 * lT / gamma)
        bound[T] = ((2.0 * sqrt(3.0) * G_c * C ** 3 / sqrt(gamma) + D ** 2 / 2.0)
                    * sqrt(T) * lT ** 3
                    + (C / 2.0) * sqrt(T) * lT
                    + 6.0 * G_c * C ** 2 * lT ** 2)
        H_sc[T] = ceil(2.0 * lT / gamma) + 2
        L_bar[T] = 4.0 * G_c * C_sc ** 2 * lT ** 2.5 / sqrt(gamma)
        if beta is not None:
            beta_bar[T] = (6.0 * kappa_B * kappa ** 3 * beta * n ** 2 * C_sc
                           * lT ** 1.5 / (gamma ** 2 * (1.0 - gamma)))

    return TheoryConstants(
        delta=delta, n=n, G_c=G_c, kappa=kappa, gamma=gamma, kappa_B=kappa_B,
        sigma_w=sw, sigma_w_subgauss=sw_sub, sigma_lower=sigma_lower,
        subgaussian=subgaussian, D=D, C_delta=C, alpha=alpha, beta=beta,
        alpha_tilde=alpha_tilde, H=H, bound_curve=bound, C_delta_sc=C_sc,
        H_sc=H_sc, L_bar=L_bar, beta_bar=beta_bar if beta is not None else None,
    )


@dataclass
class ScalingReport:
    rows: list                  # per-T dicts, ascending T
    slope: Optional[float]
    residuals: dict             # T -> log-regret residual of the slope fit
    divergences: list           # per-(T, seed) dicts with the failing step
    failed: bool
    config_hash: str
    constants: TheoryConstants
    horizons: tuple
    seeds: tuple
    schedule_kind: str

    def to_json_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and math.isnan(x):
                return None
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, list):
                return [clean(v) for v in x]
            return x

        return {
            "config_hash": self.config_hash,
            "schedule": self.schedule_kind,
            "horizons": list(self.horizons),
            "seeds": list(self.seeds),
            "rows": clean(self.rows),
            "slope": self.slope,
            "residuals": {str(k): v for k, v in self.residuals.items()},
            "divergences": self.divergences,
            "divergence_count": len(self.divergences),
            "failed": self.failed,
            "constants": self.constants.to_json_dict(),
        }


def _episode_job(doc: dict, T: int, seed: int,
                 trace_path: Optional[str]) -> dict:
    """One (T, seed) cell: learn, replay the comparator, measure regret."""
    exp = build_experiment(doc)
    sys = exp.system
    proc = _noise_from_cfg(exp.noise_cfg, sys.n_x,
                           seed=mix_seed(int(exp.noise_cfg["seed"]), seed))
    if exp.cost_cfg["family"] == "quadratic":
        Q = np.asarray(exp.cost_cfg["Q"], dtype=float)
        R = np.asarray(exp.cost_cfg["R"], dtype=float)
        schedule = constant_schedule(quadratic_cost(Q, R), T)
    else:
        schedule = materialize(adversarial_convex_schedule(
            mix_seed(int(exp.cost_cfg["seed"]), seed), T, sys.n_x, sys.n_u))

    if exp.schedule_kind == "strongly_convex":
        at = alpha_tilde_from(schedule.alpha, population_sigma_lower(proc),
                              exp.gamma, exp.kappa)
        lr = LearningRateSchedule("strongly_convex", alpha_tilde=at)
    else:
        lr = LearningRateSchedule("constant_sqrtT")

    out = {"T": T, "seed": seed, "diverged": False, "step": None,
           "regret": None, "learner_cost": None, "comparator_cost": None,
           "comparator_index": None}
    try:
        record = run_episode(sys, exp.K, exp.cert, schedule, proc, lr, T,
                             x0=exp.x0)
    except EpisodeDivergedError as exc:
        out["diverged"] = True
        out["step"] = exc.step
        return out
    comp = best_fixed_K(sys, list(exp.candidates), schedule, record.ws)
    curve = regret(record, comp)
    out["regret"] = float(curve.regret_final)
    out["learner_cost"] = float(record.cum_cost)
    out["comparator_cost"] = float(comp.cumulative_cost)
    out["comparator_index"] = comp.descriptor["index"]
    if trace_path is not None:
        with open(trace_path, "w") as fp:
            record.write_jsonl(fp)
    return out


def _job_star(args) -> dict:
    return _episode_job(*args)


def run_batch(exp: ExperimentConfig, out_dir: Optional[str] = None,
              trace: bool = False, workers: int = 1) -> ScalingReport:
    """Run every (T, seed) cell and aggregate regret quantiles per T.

    Cells are independent; with workers > 1 they fan out to a process
    pool. Results are re-sorted by (T, seed) before aggregation, so the
    report does not depend on scheduling. Diverged episodes are dropped
    from the quantiles; once more than 20% of cells diverge the whole
    batch is marked failed.
    """
    trace_dir = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        if trace:
            trace_dir = os.path.join(out_dir, "traces")
            os.makedirs(trace_dir, exist_ok=True)

    jobs = []
    for T in exp.horizons:
        for seed in exp.seeds:
            path = None
            if trace_dir is not None:
                path = os.path.join(trace_dir, f"T{T}_seed{seed}.jsonl")
            jobs.append((exp.doc, T, seed, path))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job_star, jobs))
    else:
        results = [_episode_job(*job) for job in jobs]
    results.sort(key=lambda r: (r["T"], r["seed"]))

    constants = compute_theory_constants(exp)
    rows = []
    divergences = []
    for T in exp.horizons:
        cell = [r for r in results if r["T"] == T]
        regrets = [r["regret"] for r in cell if not r["diverged"]]
        divergences += [{"T": T, "seed": r["seed"], "step": r["step"]}
                        for r in cell if r["diverged"]]
        if regrets:
            arr = np.array(regrets)
            q25, med, q75, q90 = (float(np.quantile(arr, q))
                                  for q in (0.25, 0.5, 0.75, 0.9))
        else:
            q25 = med = q75 = q90 = float("nan")
        rows.append({
            "T": T, "seed_count": len(regrets),
            "regret_q25": q25, "regret_median": med,
            "regret_q75": q75, "regret_q90": q90,
            "bound_value": float(constants.bound_curve[T]),
            "regrets": regrets,
        })

    total = len(jobs)
    failed = len(divergences) > 0.2 * total

    fit_rows = [r for r in rows
                if r["seed_count"] > 0 and r["regret_median"] > 0.0]
    slope = None
    residuals = {}
    if len(fit_rows) >= 4:
        lt = np.log([r["T"] for r in fit_rows])
        lr_ = np.log([r["regret_median"] for r in fit_rows])
        coef = np.polyfit(lt, lr_, 1)
        slope = float(coef[0])
        fitted = np.polyval(coef, lt)
        residuals = {r["T"]: float(lr_[i] - fitted[i])
                     for i, r in enumerate(fit_rows)}

    report = ScalingReport(
        rows=rows, slope=slope, residuals=residuals, divergences=divergences,
        failed=failed, config_hash=config_hash(exp.doc), constants=constants,
        horizons=exp.horizons, seeds=exp.seeds,
        schedule_kind=exp.schedule_kind,
    )
    if out_dir is not None:
        write_outputs(report, out_dir)
    return report


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(x, ".12g")


def write_outputs(report: ScalingReport, out_dir: str) -> dict:
    """Write scaling.csv, report.json, and the plot series; return paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "scaling.csv")
    lines = ["T,seed_count,regret_q25,regret_median,regret_q75,regret_q90,"
             "bound_value,slope"]
    for r in report.rows:
        lines.append(",".join([
            str(r["T"]), str(r["seed_count"]), _fmt(r["regret_q25"]),
            _fmt(r["regret_median"]), _fmt(r["regret_q75"]),
            _fmt(r["regret_q90"]), _fmt(r["bound_value"]),
            _fmt(report.slope),
        ]))
    with open(csv_path, "w") as fp:
        fp.write("\n".join(lines) + "\n")

    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w") as fp:
        json.dump(report.to_json_dict(), fp, sort_keys=True, indent=2)
        fp.write("\n")

    paths = emit_plotdata(report, out_dir)
    paths.update({"csv": csv_path, "json": json_path})
    return paths


def emit_plotdata(report: ScalingReport, out_dir: str) -> dict:
    """Two-column series for external plotting: T then value per line.

    median_regret.dat holds (T, median regret); theory_bound.dat holds
    (T, regret-bound value). The bound should dominate the medians in a
    valid run, but that is reported rather than asserted since the
    constants are conservative by orders of magnitude.
    """
    os.makedirs(out_dir, exist_ok=True)
    med_path = os.path.join(out_dir, "median_regret.dat")
    bnd_path = os.path.join(out_dir, "theory_bound.dat")
    with open(med_path, "w") as fp:
        fp.write("# T median_regret\n")
        for r in report.rows:
            fp.write(f"{r['T']} {_fmt(r['regret_median'])}\n")
    with open(bnd_path, "w") as fp:
        fp.write("# T theory_bound\n")
        for r in report.rows:
            fp.write(f"{r['T']} {_fmt(r['bound_value'])}\n")
    return {"median_regret": med_path, "theory_bound": bnd_path}
