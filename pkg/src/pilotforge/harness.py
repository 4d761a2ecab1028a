"""Monte-Carlo experiment runner, scenario presets and CSV emission.

A scenario fixes the network dimensions, a correlation-profile generator,
the combiner and pilot methods to compare, one sweep variable (pilot
symbols or RF chains) and the trial budget. All methods inside one
scenario share the same channel (and, where drawn, profile) realizations
per trial through deterministic per-purpose RNG substreams, so method
gaps are measured on common random numbers and identical invocations
reproduce byte-identical CSV files.

Profile handling follows the experiment family: random-statistics
scenarios redraw the correlation profile every trial, while the hexagonal
multi-cell scenario fixes one network draw and averages over channel
realizations only.
"""

from __future__ import annotations

import csv
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from . import combiner as combiner_mod
from . import pilots as pilots_mod
from .channel import (
    FullySeparable,
    NetworkConfig,
    make_hex_geometry,
    make_mu_mimo_profile,
    make_random_fully_separable,
    sample_channels,
)
from .errors import SingularGram, UnknownPreset
from .estimator import (
    RIDGE_SCALE,
    UNCONSTRAINED,
    UNIMODULAR,
    CombinerSet,
    MmseEstimator,
    power_feasible,
)
from . import matlin

PROFILE_KINDS = ("fully_separable", "mu_mimo_uniform", "mu_mimo_hex")
COMBINER_METHODS = ("fully_digital", "magiq", "grtm", "full")
PILOT_METHODS = ("eigen", "gsrtm-gaussian", "gsrtm-qam4", "gsrtm-qam16", "orth_reuse", "random", "spa")

CSV_HEADER = (
    "scenario,method,tau,nrf,trials,seed,mean_nmse,std_nmse,mean_analytic_mse,failed_trials"
)


def rng_stream(seed, *keys):
    """Independent generator derived from the master seed and purpose keys."""
    ints = []
    for k in keys:
        if isinstance(k, (int, np.integer)):
            ints.append(int(k))
        else:
            ints.append(zlib.crc32(str(k).encode()))
    return np.random.default_rng(np.random.SeedSequence((int(seed), *ints)))


@dataclass(frozen=True)
class Scenario:
    """One reproducible experiment: dimensions, methods, sweep and budget."""

    name: str
    cfg: NetworkConfig
    profile_kind: str
    combiner_methods: tuple
    pilot_methods: tuple
    sweep_var: str
    sweep_values: tuple
    trials: int = 2000
    seed: int = 1
    cell_radius: float = 1.0
    decay_exponent: float = 3.0
    shadow_std_db: float = 8.0
    dictionary_size: int = 300

    def validate(self):
        if self.profile_kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.profile_kind!r}")
        for cm in self.combiner_methods:
            if cm not in COMBINER_METHODS:
                raise ValueError(f"unknown combiner method {cm!r}")
        for pm in self.pilot_methods:
            if pm not in PILOT_METHODS:
                raise ValueError(f"unknown pilot method {pm!r}")
        if self.sweep_var not in ("tau", "nrf"):
            raise ValueError("sweep variable must be 'tau' or 'nrf'")
        total = self.cfg.cells * self.cfg.users
        for v in self.sweep_values:
            if self.sweep_var == "tau" and not 1 <= v <= total:
                raise ValueError(f"tau sweep value {v} outside [1, {total}]")
            if self.sweep_var == "nrf" and not 1 <= v <= self.cfg.bs_antennas:
                raise ValueError(f"nrf sweep value {v} outside [1, {self.cfg.bs_antennas}]")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    method: str
    tau: int
    nrf: int
    trials: int
    seed: int
    mean_nmse: float
    std_nmse: float
    mean_analytic_mse: float
    failed_trials: int


def preset(name):
    """Fully populated scenario for one of the reference experiments."""
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choices: {', '.join(_PRESETS)}") from None
    return factory()


def _fig1():
    cfg = NetworkConfig(cells=3, users=4, bs_antennas=10, rf_chains=1, pilot_len=4)
    return Scenario(
        name="fig1",
        cfg=cfg,
        profile_kind="fully_separable",
        combiner_methods=("fully_digital", "grtm"),
        pilot_methods=("eigen", "random", "orth_reuse"),
        sweep_var="tau",
        sweep_values=tuple(range(4, 13)),
    )


def _fig2():
    cfg = NetworkConfig(cells=3, users=4, bs_antennas=10, rf_chains=1, pilot_len=4)
    return Scenario(
        name="fig2",
        cfg=cfg,
        profile_kind="mu_mimo_uniform",
        combiner_methods=("fully_digital",),
        pilot_methods=("eigen", "random", "spa"),
        sweep_var="tau",
        sweep_values=tuple(range(4, 13)),
    )


def _fig3():
    cfg = NetworkConfig(cells=3, users=4, bs_antennas=10, rf_chains=1, pilot_len=5)
    return Scenario(
        name="fig3",
        cfg=cfg,
        profile_kind="mu_mimo_uniform",
        combiner_methods=("fully_digital", "full"),
        pilot_methods=("eigen", "random", "spa"),
        sweep_var="nrf",
        sweep_values=tuple(range(1, 11)),
    )


def _fig5():
    cfg = NetworkConfig(cells=7, users=4, bs_antennas=10, rf_chains=10, pilot_len=4)
    return Scenario(
        name="fig5",
        cfg=cfg,
        profile_kind="mu_mimo_hex",
        combiner_methods=("full",),
        pilot_methods=("gsrtm-gaussian", "random", "spa"),
        sweep_var="tau",
        sweep_values=tuple(range(4, 9)),
    )


def _fig6():
    cfg = NetworkConfig(cells=7, users=4, bs_antennas=10, rf_chains=10, pilot_len=4)
    return Scenario(
        name="fig6",
        cfg=cfg,
        profile_kind="mu_mimo_hex",
        combiner_methods=("full",),
        pilot_methods=("gsrtm-gaussian", "gsrtm-qam16", "gsrtm-qam4"),
        sweep_var="tau",
        sweep_values=tuple(range(4, 9)),
    )


_PRESETS = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3, "fig5": _fig5, "fig6": _fig6}


def list_presets():
    return tuple(_PRESETS)


def _worker_count():
    n = os.cpu_count() or 1
    cap = os.environ.get("PILOTFORGE_THREADS")
    if cap:
        n = max(1, min(n, int(cap)))
    return n


def _sweep_cfg(cfg, var, value):
    if var == "tau":
        return replace(cfg, pilot_len=value)
    return replace(cfg, rf_chains=value)


def _draw_profile(kind, cfg, scenario, rng):
    if kind == "fully_separable":
        return make_random_fully_separable(cfg, rng)
    if kind == "mu_mimo_uniform":
        eye = np.eye(cfg.bs_antennas, dtype=np.complex128)
        tx = [
            np.diag(rng.uniform(0.0, 1.0, size=cfg.users)).astype(np.complex128)
            for _ in range(cfg.cells)
        ]
        return FullySeparable(rx=[eye.copy() for _ in range(cfg.cells)], tx=tx)
    geom = make_hex_geometry(cfg, scenario.cell_radius, rng)
    return make_mu_mimo_profile(
        geom,
        scenario.decay_exponent,
        scenario.shadow_std_db,
        rng,
        bs_antennas=cfg.bs_antennas,
    )


def design_combiners(profile, cfg, method, rng=None, dictionary_size=300):
    """Per-cell combiner design for one scenario method name."""
    n = cfg.bs_antennas
    per_cell = []
    if method == "full":
        return CombinerSet(
            per_cell=[np.eye(n, dtype=np.complex128) for _ in range(cfg.cells)],
            feasible_set=UNCONSTRAINED,
        )
    if method == "grtm":
        dictionary = combiner_mod.unimodular_dictionary(n, dictionary_size, rng)
    for i in range(cfg.cells):
        q = profile.rx_corr(i)
        if method == "fully_digital":
            per_cell.append(combiner_mod.fully_digital(q, cfg.rf_chains))
        elif method == "magiq":
            w, _ = combiner_mod.magiq(combiner_mod.fully_digital(q, cfg.rf_chains), UNIMODULAR)
            per_cell.append(w)
        elif method == "grtm":
            per_cell.append(combiner_mod.grtm_combiner(q, cfg.rf_chains, dictionary))
        else:
            raise ValueError(f"unknown combiner method {method!r}")
    feasible = UNCONSTRAINED if method == "fully_digital" else UNIMODULAR
    return CombinerSet(per_cell=per_cell, feasible_set=feasible)


def combiner_weights(profile, combiners):
    """Per-cell weights of a designed combiner set."""
    return np.array(
        [combiner_mod.weight(profile.rx_corr(i), combiners.per_cell[i]) for i in range(profile.n_cells)]
    )


def _spa_base(cfg, rng):
    x = pilots_mod.complex_normal(rng, (cfg.pilot_len, cfg.pilot_len))
    eig = matlin.herm_eig(x @ x.conj().T)
    return eig.vectors


def _pilot_applicable(pm, cfg, profile_kind):
    if pm in ("orth_reuse", "spa") and cfg.pilot_len < cfg.users:
        return False
    if pm == "eigen" and profile_kind == "mu_mimo_hex":
        return False
    if pm == "spa" and profile_kind == "fully_separable":
        return False
    return True


def _design_pilots(pm, profile, cfg, weights, *, rng=None, dictionary=None):
    if pm == "eigen":
        return pilots_mod.eigen_pilots(pilots_mod.pilot_context(profile, weights), cfg)
    if pm == "orth_reuse":
        return pilots_mod.baseline_orthogonal_reuse(cfg)
    if pm == "random":
        return pilots_mod.baseline_random(cfg, rng)
    if pm == "spa":
        return pilots_mod.baseline_spa(profile, cfg, _spa_base(cfg, rng))
    if pm.startswith("gsrtm"):
        return pilots_mod.gsrtm(pilots_mod.pilot_context(profile, weights), cfg, dictionary)
    raise ValueError(f"unknown pilot method {pm!r}")


def _make_dictionary(pm, total_users, size, rng):
    if pm == "gsrtm-gaussian":
        return pilots_mod.gaussian_dictionary(total_users, size, rng)
    if pm == "gsrtm-qam4":
        return pilots_mod.qam_dictionary(total_users, size, rng, points=4)
    if pm == "gsrtm-qam16":
        return pilots_mod.qam_dictionary(total_users, size, rng, points=16)
    raise ValueError(f"unknown dictionary method {pm!r}")


def _build_estimator(pilots, combiners, profile):
    """Estimator with the documented ridge fallback; None when unusable."""
    try:
        return MmseEstimator(pilots, combiners, profile), False
    except SingularGram:
        try:
            return MmseEstimator(pilots, combiners, profile, ridge=RIDGE_SCALE), True
        except SingularGram:
            return None, True


def run_scenario(scenario: Scenario):
    """Execute all trials of a scenario and aggregate one row per curve point."""
    scenario.validate()
    cfg0 = scenario.cfg
    seed = scenario.seed
    trials = scenario.trials
    cfgs = {v: _sweep_cfg(cfg0, scenario.sweep_var, v) for v in scenario.sweep_values}
    combos = [
        (v, cm, pm)
        for v in scenario.sweep_values
        for cm in scenario.combiner_methods
        for pm in scenario.pilot_methods
        if _pilot_applicable(pm, cfgs[v], scenario.profile_kind)
    ]
    nmse = {c: np.full(trials, np.nan) for c in combos}
    analytic = {c: np.full(trials, np.nan) for c in combos}

    fixed_profile = scenario.profile_kind == "mu_mimo_hex"
    workers = _worker_count()
    # trials parallelize across our own workers; the matrices are far too
    # small for BLAS-level threading, whose per-call synchronization
    # dominates at these sizes
    with threadpool_limits(limits=1):
        if fixed_profile:
            task = _fixed_profile_task(scenario, cfgs, combos)
        else:
            task = _per_trial_profile_task(scenario, cfgs, combos)
        if workers > 1 and trials > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(task, range(trials)))
        else:
            outcomes = [task(t) for t in range(trials)]
    for t, out in enumerate(outcomes):
        for c, (nm, an) in out.items():
            nmse[c][t] = nm
            analytic[c][t] = an

    rows = []
    for c in combos:
        v, cm, pm = c
        vals = nmse[c]
        ok = ~np.isnan(vals)
        count = int(ok.sum())
        mean = float(np.mean(vals[ok])) if count else float("nan")
        std = float(np.std(vals[ok], ddof=1)) if count > 1 else 0.0
        mean_an = float(np.mean(analytic[c][ok])) if count else float("nan")
        rows.append(
            ResultRow(
                scenario=scenario.name,
                method=f"{pm}/{cm}",
                tau=cfgs[v].pilot_len,
                nrf=cfgs[v].rf_chains,
                trials=trials,
                seed=seed,
                mean_nmse=mean,
                std_nmse=std,
                mean_analytic_mse=mean_an,
                failed_trials=trials - count,
            )
        )
    return rows


def _eval_one(est_pair, h_raw):
    est, _ = est_pair
    if est is None:
        return (np.nan, np.nan)
    err2, norm2 = est.batch_errors(h_raw)
    return (float(np.mean(err2[0] / norm2[0])), est.eps_sum)


def _per_trial_profile_task(scenario, cfgs, combos):
    seed = scenario.seed

    def task(t):
        profile = _draw_profile(
            scenario.profile_kind, scenario.cfg, scenario, rng_stream(seed, t, "profile")
        )
        real = sample_channels(profile, scenario.cfg, rng_stream(seed, t, "channel"))
        h_raw = real.H[None]
        out = {}
        combiner_cache = {}
        pilot_cache = {}
        for v, cm, pm in combos:
            cfg_v = cfgs[v]
            ckey = (cm, cfg_v.rf_chains)
            if ckey not in combiner_cache:
                combiners = design_combiners(
                    profile,
                    cfg_v,
                    cm,
                    rng=rng_stream(seed, t, "combiner", cm, cfg_v.rf_chains),
                    dictionary_size=scenario.dictionary_size,
                )
                combiner_cache[ckey] = (combiners, combiner_weights(profile, combiners))
            combiners, weights = combiner_cache[ckey]
            pkey = (pm, cfg_v.pilot_len, ckey if pm == "eigen" or pm.startswith("gsrtm") else None)
            if pkey not in pilot_cache:
                if pm.startswith("gsrtm"):
                    dictionary = _make_dictionary(
                        pm,
                        cfg_v.cells * cfg_v.users,
                        scenario.dictionary_size,
                        rng_stream(seed, t, "dictionary", pm),
                    )
                else:
                    dictionary = None
                pilot_cache[pkey] = _design_pilots(
                    pm,
                    profile,
                    cfg_v,
                    weights,
                    rng=rng_stream(seed, t, "pilots", pm, cfg_v.pilot_len),
                    dictionary=dictionary,
                )
            pilots = pilot_cache[pkey]
            out[(v, cm, pm)] = _eval_one(_build_estimator(pilots, combiners, profile), h_raw)
        return out

    return task


def _fixed_profile_task(scenario, cfgs, combos):
    seed = scenario.seed
    profile = _draw_profile(
        scenario.profile_kind, scenario.cfg, scenario, rng_stream(seed, "profile")
    )
    static = {}  # combo -> prebuilt (estimator, ridged) for trial-invariant pilots
    designs = {}  # (v, cm) -> (combiners, weights)
    for v, cm, pm in combos:
        cfg_v = cfgs[v]
        dkey = (v, cm)
        if dkey not in designs:
            combiners = design_combiners(
                profile,
                cfg_v,
                cm,
                rng=rng_stream(seed, "combiner", cm, cfg_v.rf_chains),
                dictionary_size=scenario.dictionary_size,
            )
            designs[dkey] = (combiners, combiner_weights(profile, combiners))
        combiners, weights = designs[dkey]
        if pm in ("random", "spa"):
            continue
        if pm.startswith("gsrtm"):
            dictionary = _make_dictionary(
                pm,
                cfg_v.cells * cfg_v.users,
                scenario.dictionary_size,
                rng_stream(seed, "dictionary", pm),
            )
        else:
            dictionary = None
        pilots = _design_pilots(pm, profile, cfg_v, weights, dictionary=dictionary)
        static[(v, cm, pm)] = _build_estimator(pilots, combiners, profile)

    def task(t):
        real = sample_channels(profile, scenario.cfg, rng_stream(seed, t, "channel"))
        h_raw = real.H[None]
        out = {}
        for v, cm, pm in combos:
            cfg_v = cfgs[v]
            if (v, cm, pm) in static:
                pair = static[(v, cm, pm)]
            else:
                combiners, weights = designs[(v, cm)]
                pilots = _design_pilots(
                    pm,
                    profile,
                    cfg_v,
                    weights,
                    rng=rng_stream(seed, t, "pilots", pm, cfg_v.pilot_len),
                )
                pair = _build_estimator(pilots, designs[(v, cm)][0], profile)
            out[(v, cm, pm)] = _eval_one(pair, h_raw)
        return out

    return task


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".6g")
    return str(x)


def emit_csv(rows, path):
    """Write result rows with a fixed header, 6 significant digits per float."""
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(
                ",".join(
                    _fmt(x)
                    for x in (
                        r.scenario,
                        r.method,
                        r.tau,
                        r.nrf,
                        r.trials,
                        r.seed,
                        r.mean_nmse,
                        r.std_nmse,
                        r.mean_analytic_mse,
                        r.failed_trials,
                    )
                )
                + "\n"
            )


def read_csv(path):
    """Parse a results file back into ResultRow records."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                ResultRow(
                    scenario=rec["scenario"],
                    method=rec["method"],
                    tau=int(rec["tau"]),
                    nrf=int(rec["nrf"]),
                    trials=int(rec["trials"]),
                    seed=int(rec["seed"]),
                    mean_nmse=float(rec["mean_nmse"]),
                    std_nmse=float(rec["std_nmse"]),
                    mean_analytic_mse=float(rec["mean_analytic_mse"]),
                    failed_trials=int(rec["failed_trials"]),
                )
            )
    return rows


def selftest(verbose=True):
    """Quick oracle suite over the package invariants; returns failure count."""
    failures = 0

    def check(label, fn):
        nonlocal failures
        try:
            ok = bool(fn())
        except Exception as exc:  # noqa: BLE001 - report, do not crash the suite
            ok = False
            label = f"{label} ({type(exc).__name__}: {exc})"
        if not ok:
            failures += 1
        if verbose:
            print(f"{'ok  ' if ok else 'FAIL'} {label}")
        return ok

    rng = np.random.default_rng(20240401)

    def projector_checks():
        a = pilots_mod.complex_normal(rng, (6, 3))
        p = matlin.range_projector(a)
        return (
            matlin.frob(p @ p - p) < 1e-8
            and matlin.frob(p - p.conj().T) < 1e-8
            and matlin.frob(p @ a - a) < 1e-8
        )

    def weight_bound():
        x = pilots_mod.complex_normal(rng, (8, 8))
        q = x @ x.conj().T
        lam = matlin.herm_eig(q).values
        w_rand = combiner_mod.weight(q, pilots_mod.complex_normal(rng, (3, 8)))
        w_fd = combiner_mod.weight(q, combiner_mod.fully_digital(q, 3))
        bound = float(lam[:3].sum())
        return w_rand <= bound + 1e-8 * bound and abs(w_fd - bound) <= 1e-8 * bound

    def magiq_monotone():
        x = pilots_mod.complex_normal(rng, (8, 8))
        q = x @ x.conj().T
        u_star = combiner_mod.fully_digital(q, 4)
        _, state = combiner_mod.magiq(u_star, UNIMODULAR)
        trace = np.array(state.gap_trace)
        unitary_defect = matlin.frob(state.T.conj().T @ state.T - np.eye(4))
        return bool(np.all(np.diff(trace) <= 1e-12)) and unitary_defect < 1e-9

    def scale_invariance():
        cfg = NetworkConfig(cells=2, users=2, bs_antennas=4, rf_chains=2, pilot_len=3)
        profile = make_random_fully_separable(cfg, rng)
        weights = np.array([1.3, 0.7])
        ctx_full = pilots_mod.pilot_context(profile, weights)
        ctx_part = pilots_mod.pilot_context(profile.as_partially_separable(), weights)
        s = pilots_mod.complex_normal(rng, (cfg.pilot_len, cfg.cells * cfg.users))
        f1 = pilots_mod.fully_sep_objective(s, ctx_full)
        f2 = pilots_mod.fully_sep_objective(2.7 * s, ctx_full)
        p1 = pilots_mod.partially_sep_objective(s, ctx_part)
        p2 = pilots_mod.partially_sep_objective(0.3 * s, ctx_part)
        return abs(f1 - f2) <= 1e-10 * abs(f1) and abs(p1 - p2) <= 1e-10 * abs(p1)

    def power_checks():
        cfg = NetworkConfig(cells=2, users=3, bs_antennas=4, rf_chains=2, pilot_len=3, power=2.0)
        profile = _draw_profile("mu_mimo_uniform", cfg, None, rng)
        weights = np.array([1.0, 1.0])
        ctx = pilots_mod.pilot_context(profile, weights)
        ctx_part = pilots_mod.pilot_context(profile.as_partially_separable(), weights)
        designs = [
            pilots_mod.eigen_pilots(ctx, cfg),
            pilots_mod.baseline_orthogonal_reuse(cfg),
            pilots_mod.baseline_random(cfg, rng),
            pilots_mod.baseline_spa(profile, cfg, _spa_base(cfg, rng)),
            pilots_mod.gsrtm(
                ctx_part, cfg, pilots_mod.gaussian_dictionary(cfg.cells * cfg.users, 120, rng)
            ),
        ]
        return all(power_feasible(p, cfg.power) for p in designs)

    check("range projector is idempotent, Hermitian, fixes its range", projector_checks)
    check("combiner weight bounded by top eigenvalue sum, tight at fully digital", weight_bound)
    check("magiq gap trace nonincreasing with unitary alignment", magiq_monotone)
    check("pilot objectives are scale invariant", scale_invariance)
    check("every pilot designer satisfies the per-user power budget", power_checks)
    return failures
