"""Named end-to-end experiments: config parsing, execution, CSV + manifest output.

Config format: flat ``key = value`` lines with dotted section names
(``lambda.delta_g1 = 1000``), ``#`` comments, one file per scenario.  CLI
``--set key=value`` pairs override file keys.  Unknown keys are rejected and
all physical-constraint checks run at parse time.

Data files: CSV with a mandatory header row and 17-significant-digit values;
the first column of every time series is ``t_in_g_units``.  Wigner grids are
emitted long-format (x, p, w).  Every emitted file is listed with its sha256
in ``manifest.json``; identical configs reproduce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, algebra, models, observables
from .dynamics import (
    InjectionSchedule,
    IntegratorConfig,
    detect_steady_state,
    evolve_lindblad,
    evolve_pure,
    run_injection,
)
from .errors import ConfigError
from .hilbert import FockSpace, StateVector, tail_population
from .observables import field_observers, joint_pure_observers

#: environment variable naming the default output directory
OUTDIR_ENV = "SVLASER_OUTDIR"

_FMT = "%.17g"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfigKey:
    default: object
    kind: type
    help: str


def _common_keys(dim: int, rel_tol: float, abs_tol: float) -> dict[str, ConfigKey]:
    return {
        "run.dim": ConfigKey(dim, int, "Fock truncation dimension"),
        "run.rel_tol": ConfigKey(rel_tol, float, "integrator relative tolerance"),
        "run.abs_tol": ConfigKey(abs_tol, float, "integrator absolute tolerance"),
        "run.fixed_step": ConfigKey(0.0, float, "fixed step size; 0 = adaptive"),
    }


SCHEMAS: dict[str, dict[str, ConfigKey]] = {
    "validate-effective": {
        **_common_keys(100, 1e-8, 1e-10),
        "run.t_end_gt": ConfigKey(10.0, float, "evolution horizon in g*t"),
        "run.samples": ConfigKey(501, int, "output grid points"),
        "run.max_step": ConfigKey(0.0, float,
                                  "step cap; 0 = 0.05/delta_g1 (resolves drive phases)"),
        "lambda.delta_g1": ConfigKey(1000.0, float, "g-branch drive detuning (units of lambda)"),
        "lambda.delta_e1": ConfigKey(600.0, float, "e-branch drive detuning (units of lambda)"),
        "lambda.drive_omega": ConfigKey(40.0, float, "classical drive strength Omega_g1"),
        "lambda.coupling": ConfigKey(1.0, float, "Raman coupling lambda (time unit)"),
    },
    "run-laser": {
        **_common_keys(60, 1e-9, 1e-12),
        "run.t_end_gt": ConfigKey(20.0, float, "run horizon in g*t"),
        "laser.kappa": ConfigKey(0.6, float, "Bogoliubov mixing angle"),
        "laser.loss_c": ConfigKey(0.35, float, "cavity loss rate C (units of g)"),
        "laser.pump_r": ConfigKey(92.0, float, "atomic pumping rate R = K p (units of g)"),
        "laser.gamma": ConfigKey(0.5, float, "effective atomic decay rate (units of g)"),
        "laser.excite_p": ConfigKey(1.0, float, "excitation probability of injected atoms"),
        "laser.injection_k": ConfigKey(0.0, float,
                                       "atom arrival rate k (units of g); 0 = pump_r"),
        "laser.fidelity_r": ConfigKey(0.69, float,
                                      "squeeze degree of the ideal reference state"),
        "steady.eps": ConfigKey(0.1, float,
                                "steady-detection spread (half the acceptance band)"),
        "steady.window": ConfigKey(1.0, float, "steady-detection trailing window in g*t"),
        "wigner.half_width": ConfigKey(3.0, float, "phase-space grid half width"),
        "wigner.points": ConfigKey(121, int, "grid points per axis"),
    },
    "compare-states": {
        **_common_keys(60, 1e-8, 1e-10),
        "state.kappa": ConfigKey(0.6, float, "Bogoliubov mixing angle"),
        "state.alpha": ConfigKey(0.18, float, "generalized coherent amplitude"),
        "wigner.half_width": ConfigKey(3.0, float, "phase-space grid half width"),
        "wigner.points": ConfigKey(121, int, "grid points per axis"),
    },
    "reservoir-baseline": {
        **_common_keys(40, 1e-8, 1e-10),
        "reservoir.gamma": ConfigKey(1.0, float, "engineered decay rate Gamma (time unit)"),
        "reservoir.ratios": ConfigKey("0,0.01,0.05,0.1", str,
                                      "comma-separated Gamma_tilde/Gamma sweep"),
        "reservoir.t_end": ConfigKey(30.0, float, "relaxation horizon in 1/Gamma"),
        "run.samples": ConfigKey(201, int, "output grid points"),
        "state.kappa": ConfigKey(0.6, float, "Bogoliubov mixing angle of the target"),
    },
}

SCENARIOS = tuple(SCHEMAS)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key or not val:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def resolve_config(scenario: str, file_values: dict[str, str] | None = None,
                   overrides: dict[str, str] | None = None) -> dict[str, object]:
    """Merge defaults <- file <- overrides, coerce types, reject unknown keys."""
    if scenario not in SCHEMAS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    schema = SCHEMAS[scenario]
    merged: dict[str, str] = {}
    for source in (file_values or {}), (overrides or {}):
        for key, val in source.items():
            if key not in schema:
                raise ConfigError(f"unknown config key {key!r} for scenario {scenario!r}")
            merged[key] = val
    cfg: dict[str, object] = {}
    for key, spec in schema.items():
        if key in merged:
            try:
                cfg[key] = spec.kind(merged[key])
            except ValueError as exc:
                raise ConfigError(f"cannot parse {key} = {merged[key]!r} as "
                                  f"{spec.kind.__name__}") from exc
        else:
            cfg[key] = spec.default
    _validate_physics(scenario, cfg)
    return cfg


def _validate_physics(scenario: str, cfg: dict[str, object]) -> None:
    """Run the model-level constraint checks on the parsed values."""
    if cfg["run.dim"] < 2:
        raise ConfigError("run.dim must be >= 2")
    if cfg["run.rel_tol"] <= 0 or cfg["run.abs_tol"] <= 0:
        raise ConfigError("tolerances must be positive")
    try:
        if scenario == "validate-effective":
            models.LambdaSystemParams.from_detunings(
                cfg["lambda.delta_g1"], cfg["lambda.delta_e1"],
                cfg["lambda.drive_omega"], cfg["lambda.coupling"])
        elif scenario == "run-laser":
            models.LaserRateParams.from_pump(
                cfg["laser.pump_r"], cfg["laser.gamma"], cfg["laser.loss_c"],
                excite_p=cfg["laser.excite_p"])
            algebra.squeeze_parameter(cfg["laser.kappa"])
            if cfg["laser.injection_k"] < 0:
                raise ConfigError("laser.injection_k must be >= 0")
        elif scenario == "compare-states":
            algebra.squeeze_parameter(cfg["state.kappa"])
        elif scenario == "reservoir-baseline":
            ratios = _parse_ratios(cfg["reservoir.ratios"])
            for ratio in ratios:
                models.EngineeredReservoirParams(
                    Gamma=cfg["reservoir.gamma"],
                    Gamma_tilde=ratio * cfg["reservoir.gamma"])
            algebra.squeeze_parameter(cfg["state.kappa"])
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"physical-constraint check failed: {exc}") from exc


def _parse_ratios(text: str) -> list[float]:
    try:
        ratios = [float(part) for part in str(text).split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"cannot parse ratio list {text!r}") from exc
    if not ratios or any(r < 0 for r in ratios):
        raise ConfigError("reservoir.ratios must be non-negative numbers")
    return ratios


def config_echo(cfg: dict[str, object]) -> dict[str, str]:
    """Round-trippable string form of a resolved config."""
    out = {}
    for key, val in cfg.items():
        if isinstance(val, float):
            out[key] = _FMT % val
        else:
            out[key] = str(val)
    return out


# ---------------------------------------------------------------------------
# emission helpers
# ---------------------------------------------------------------------------

def _json_safe(obj):
    """Recursively map numpy scalars to python and non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_FMT % col[i] for col in columns) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_wigner_csv(path: Path, grid: observables.WignerGrid) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("x_quadrature,p_quadrature,wigner_value\n")
        for ix, xv in enumerate(grid.x):
            for ip, pv in enumerate(grid.p):
                fh.write(f"{_FMT % xv},{_FMT % pv},{_FMT % grid.values[ix, ip]}\n")


class ManifestWriter:
    """Collects derived values and file checksums, then writes manifest.json."""

    def __init__(self, scenario: str, cfg: dict[str, object], out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.t0 = time.monotonic()
        self.data = {
            "artifact_version": __version__,
            "scenario": scenario,
            "config": config_echo(cfg),
            "derived": {},
            "integrator": {},
            "truncation_tail_max": 0.0,
            "files": {},
        }

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def register(self, name: str) -> None:
        self.data["files"][name] = _sha256(self.out_dir / name)

    def note_tail(self, value: float) -> None:
        self.data["truncation_tail_max"] = max(self.data["truncation_tail_max"],
                                               float(value))

    def finish(self) -> dict:
        self.data["wallclock_s"] = round(time.monotonic() - self.t0, 3)
        with open(self.out_dir / "manifest.json", "w") as fh:
            json.dump(_json_safe(self.data), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return self.data


def _integrator_config(cfg: dict[str, object], max_step: float = math.inf,
                       first_step: float | None = None) -> IntegratorConfig:
    fixed = cfg["run.fixed_step"] or None
    return IntegratorConfig(rel_tol=cfg["run.rel_tol"], abs_tol=cfg["run.abs_tol"],
                            max_step=max_step, first_step=first_step, fixed_step=fixed)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def run_validate_effective(cfg: dict[str, object], out_dir) -> dict:
    """Full Lambda model vs. effective bilinear model from |e>|0>, side by side."""
    man = ManifestWriter("validate-effective", cfg, out_dir)
    dim = cfg["run.dim"]
    space = FockSpace(dim)
    params = models.LambdaSystemParams.from_detunings(
        cfg["lambda.delta_g1"], cfg["lambda.delta_e1"],
        cfg["lambda.drive_omega"], cfg["lambda.coupling"])
    g = params.coupling_g
    man.data["derived"].update({
        "kappa": params.kappa, "coupling_g": g,
        "squeeze_r": math.atanh(params.kappa),
    })

    max_step = cfg["run.max_step"] or 0.05 / params.delta_g1
    t_end = cfg["run.t_end_gt"] / g
    n_samples = cfg["run.samples"]

    psi0_full = np.zeros(3 * dim, dtype=complex)
    psi0_full[models.LVL_E * dim] = 1.0
    full = evolve_pure(
        models.full_hamiltonian_terms(params, space), StateVector(psi0_full), t_end,
        _integrator_config(cfg, max_step=max_step),
        joint_pure_observers(3, dim), n_samples=n_samples)

    pair = algebra.build_bogoliubov(params.kappa, space)
    h_eff = models.effective_hamiltonian(models.EffectiveParams.from_lambda(params), pair)
    psi0_eff = np.zeros(2 * dim, dtype=complex)
    psi0_eff[1 * dim] = 1.0
    eff = evolve_pure(
        h_eff, StateVector(psi0_eff), t_end,
        _integrator_config(cfg), joint_pure_observers(2, dim), n_samples=n_samples)

    gt = full.times * g
    names = ["var_x1", "var_x2", "mean_photon_number", "excited_population"]
    header = ["t_in_g_units", "t_in_lambda_units"]
    columns = [gt, full.times]
    for name in names:
        header += [f"{name}_full", f"{name}_effective"]
        columns += [full.series[name].values, eff.series[name].values]
    _write_csv(man.path("observables.csv"), header, columns)
    man.register("observables.csv")

    window = gt <= 5.0
    divergence = {}
    for name in names:
        d = np.abs(full.series[name].values - eff.series[name].values)
        divergence[f"max_abs_diff_{name}_gt_le_5"] = float(d[window].max())
        divergence[f"max_abs_diff_{name}_full_window"] = float(d.max())
    man.data["derived"].update(divergence)
    man.data["integrator"] = {
        "full_model": {k: full.stats[k] for k in ("n_accepted", "n_rejected", "norm_drift")},
        "effective_model": {k: eff.stats[k] for k in ("n_accepted", "n_rejected", "norm_drift")},
        "max_step": max_step,
    }
    man.note_tail(full.series["tail_population"].values.max())
    man.note_tail(eff.series["tail_population"].values.max())
    return man.finish()


def run_run_laser(cfg: dict[str, object], out_dir) -> dict:
    """Sequential-atom laser run emitting every tracked observable plus final snapshots."""
    man = ManifestWriter("run-laser", cfg, out_dir)
    dim = cfg["run.dim"]
    space = FockSpace(dim)
    kappa = cfg["laser.kappa"]
    pair = algebra.build_bogoliubov(kappa, space)
    rates = models.LaserRateParams.from_pump(
        cfg["laser.pump_r"], cfg["laser.gamma"], cfg["laser.loss_c"],
        excite_p=cfg["laser.excite_p"])
    k_rate = cfg["laser.injection_k"] or rates.pump_R
    t_end = cfg["run.t_end_gt"]
    schedule = InjectionSchedule(atom_rate_k=k_rate, total_atoms=int(round(t_end * k_rate)))
    eff = models.EffectiveParams(g=1.0, kappa=kappa)

    man.data["derived"].update({
        "kappa": kappa,
        "squeeze_r": math.atanh(kappa) if kappa else 0.0,
        "fidelity_reference_r": cfg["laser.fidelity_r"],
        "gain_A_over_g": rates.gain_A,
        "saturation_B_over_g": rates.saturation_B,
        "loss_C_over_g": rates.loss_C,
        "injection_k_over_g": k_rate,
        "interaction_time_g": schedule.interaction_time,
        "atom_count": schedule.total_atoms,
    })

    obs = field_observers(dim, fidelity_r=cfg["laser.fidelity_r"])
    result = run_injection(schedule, eff, rates.loss_C, rates.gamma, pair,
                           observers=obs, cfg=_integrator_config(cfg))

    series = result.series
    t = result.times
    header = ["t_in_g_units", "mean_photon_number", "var_x1", "var_x2",
              "fidelity_squeezed_vacuum", "coherence_08_abs", "coherence_46_abs"]
    columns = [t, series["mean_photon_number"].values, series["var_x1"].values,
               series["var_x2"].values, series["fidelity_squeezed_vacuum"].values,
               series["coherence_08_abs"].values, series["coherence_46_abs"].values]
    _write_csv(man.path("observables.csv"), header, columns)
    man.register("observables.csv")

    # Mandel Q is undefined while <n> is numerically zero (vacuum start), so it
    # gets its own file starting at the first defined sample
    n_vals = series["mean_photon_number"].values
    defined = n_vals > 1e-6
    q_vals = (series["mean_photon_number_sq"].values[defined]
              - n_vals[defined] ** 2) / n_vals[defined] - 1.0
    _write_csv(man.path("mandel_q.csv"), ["t_in_g_units", "mandel_q"],
               [t[defined], q_vals])
    man.register("mandel_q.csv")

    pn = observables.photon_distribution(result.final_field)
    _write_csv(man.path("photon_distribution.csv"),
               ["fock_level", "probability"],
               [np.arange(dim, dtype=float), pn])
    man.register("photon_distribution.csv")

    grid = observables.wigner(result.final_field,
                              half_width=cfg["wigner.half_width"],
                              points=cfg["wigner.points"])
    _write_wigner_csv(man.path("wigner.csv"), grid)
    man.register("wigner.csv")

    detections = {}
    for eps_name, eps in (("configured", cfg["steady.eps"]), ("strict", 0.02)):
        try:
            det = detect_steady_state(series["mean_photon_number"],
                                      window=cfg["steady.window"], eps=eps)
            detections[eps_name] = {"eps": eps, "reached": det.reached,
                                    "t_steady_g": det.t_steady}
        except ValueError as exc:  # series shorter than two detection windows
            detections[eps_name] = {"eps": eps, "reached": False,
                                    "t_steady_g": math.nan, "note": str(exc)}
    steady_tail = t >= t[-1] - cfg["steady.window"]
    q_tail = t[defined] >= t[-1] - cfg["steady.window"]
    man.data["derived"].update({
        "steady_detection": detections,
        "steady_mean_photon_number": float(np.mean(n_vals[steady_tail])),
        "steady_var_x1": float(np.mean(series["var_x1"].values[steady_tail])),
        "steady_var_x2": float(np.mean(series["var_x2"].values[steady_tail])),
        "steady_mandel_q": float(np.mean(q_vals[q_tail])),
        "steady_fidelity": float(np.mean(
            series["fidelity_squeezed_vacuum"].values[steady_tail])),
        "final_purity": result.final_field.purity(),
        "photon_distribution_residual": float(abs(1.0 - pn.sum())),
        "wigner_grid_integral": grid.integral(),
    })
    man.data["integrator"] = {k: result.stats[k] for k in
                              ("n_accepted", "n_rejected", "trace_drift",
                               "herm_drift_rate", "min_eigenvalue_sampled",
                               "n_atoms", "interaction_time",
                               "exit_atom_excitation_total")}
    man.note_tail(series["tail_population"].values.max())
    return man.finish()


def run_compare_states(cfg: dict[str, object], out_dir) -> dict:
    """Generalized coherent state vs. ideal squeezed vacuum: P_n, Wigner, fidelity."""
    man = ManifestWriter("compare-states", cfg, out_dir)
    dim = cfg["run.dim"]
    space = FockSpace(dim)
    kappa = cfg["state.kappa"]
    alpha = cfg["state.alpha"]
    r = math.atanh(kappa)

    pair = algebra.build_bogoliubov(kappa, space)
    coherent = algebra.generalized_coherent(pair, alpha)
    squeezed = StateVector(observables.squeezed_vacuum_vector(dim, r))

    pn_c = observables.photon_distribution(coherent)
    pn_s = observables.photon_distribution(squeezed)
    _write_csv(man.path("photon_distribution.csv"),
               ["fock_level", "p_generalized_coherent", "p_squeezed_vacuum"],
               [np.arange(dim, dtype=float), pn_c, pn_s])
    man.register("photon_distribution.csv")

    for name, state in (("wigner_coherent.csv", coherent),
                        ("wigner_squeezed.csv", squeezed)):
        grid = observables.wigner(state, half_width=cfg["wigner.half_width"],
                                  points=cfg["wigner.points"])
        _write_wigner_csv(man.path(name), grid)
        man.register(name)

    fid = abs(np.vdot(coherent.amplitudes, squeezed.amplitudes)) ** 2
    man.data["derived"].update({
        "kappa": kappa, "alpha": alpha, "squeeze_r": r,
        "fidelity_coherent_vs_squeezed": float(fid),
        "odd_population_coherent": float(pn_c[1::2].sum()),
        "odd_population_squeezed": float(pn_s[1::2].sum()),
        "eigenvalue_residual": float(np.linalg.norm(
            pair.A.matrix @ coherent.amplitudes - alpha * coherent.amplitudes)),
    })
    man.note_tail(tail_population(coherent))
    man.note_tail(tail_population(squeezed))
    return man.finish()


def run_reservoir_baseline(cfg: dict[str, object], out_dir) -> dict:
    """Steady-state fidelity to the engineered dark state vs. residual-loss ratio."""
    man = ManifestWriter("reservoir-baseline", cfg, out_dir)
    dim = cfg["run.dim"]
    space = FockSpace(dim)
    kappa = cfg["state.kappa"]
    pair = algebra.build_bogoliubov(kappa, space)
    target = algebra.generalized_vacuum(pair).amplitudes
    gamma_rate = cfg["reservoir.gamma"]
    ratios = _parse_ratios(cfg["reservoir.ratios"])

    fidelities = []
    stats_all = {}
    for ratio in ratios:
        res = models.EngineeredReservoirParams(Gamma=gamma_rate,
                                               Gamma_tilde=ratio * gamma_rate)
        rhs = models.engineered_reservoir_generator(res, pair)
        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[0, 0] = 1.0  # bare vacuum start
        run = evolve_lindblad(rhs, rho0, cfg["reservoir.t_end"] / gamma_rate,
                              _integrator_config(cfg),
                              observers={"tail_population": tail_population},
                              n_samples=cfg["run.samples"], units="Gamma*t")
        fid = observables.fidelity_to_state(run.final_state, target)
        fidelities.append(fid)
        stats_all[f"ratio_{ratio:g}"] = {
            "fidelity": fid,
            "trace_drift": run.stats["trace_drift"],
            "min_eigenvalue": run.stats["min_eigenvalue"],
        }
        man.note_tail(run.series["tail_population"].values.max())

    _write_csv(man.path("fidelity_vs_ratio.csv"),
               ["gamma_tilde_over_gamma", "fidelity_dark_state", "one_minus_fidelity"],
               [np.asarray(ratios), np.asarray(fidelities),
                1.0 - np.asarray(fidelities)])
    man.register("fidelity_vs_ratio.csv")
    man.data["derived"].update({
        "kappa": kappa,
        "ratios": ratios,
        "fidelities": fidelities,
        "strictly_decreasing": bool(np.all(np.diff(fidelities) < 0)),
    })
    man.data["integrator"] = stats_all
    return man.finish()


RUNNERS = {
    "validate-effective": run_validate_effective,
    "run-laser": run_run_laser,
    "compare-states": run_compare_states,
    "reservoir-baseline": run_reservoir_baseline,
}


def verify_manifest(out_dir) -> dict[str, bool]:
    """Recompute the checksum of every file listed in a run manifest."""
    out_dir = Path(out_dir)
    with open(out_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    return {name: _sha256(out_dir / name) == digest
            for name, digest in manifest["files"].items()}


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Read one emitted CSV back into named float columns."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def run_scenario(scenario: str, cfg: dict[str, object], out_dir) -> dict:
    return RUNNERS[scenario](cfg, out_dir)


def default_out_dir(scenario: str) -> Path:
    base = os.environ.get(OUTDIR_ENV, "runs")
    return Path(base) / scenario
