"""Scenario configuration, sweep execution and machine-readable reports.

One YAML config file fully determines a run: every knob has a documented
default, every default actually applied is recorded in the report, and the
report carries a digest of the resolved config so identical runs are
identifiable by hash alone.

A scenario is: one synthetic-truth state, one observation set per leakage
level (identical noise realization, shifted by the level's induced
brightness-temperature error), one variational analysis and forecast per
ensemble member, and difference metrics against the unperturbed baseline.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import TextIO

import numpy as np
import yaml

from .assim import minimize
from .errors import ConfigError, ValidationError
from .forward import BiasModel, ForwardOperatorParams
from .leakage import (
    AGGRESSOR_CHANNEL,
    AntennaModel,
    EmissionMask,
    LinkBudget,
    TransmitterField,
    VICTIM_CHANNEL,
    aci_leakage_fraction,
    aggregate_leakage_power,
    brightness_perturbation,
    default_emission_mask,
    induced_noise_temperature,
    received_power,
)
from .model import ModelParams, ModelState, diagnostics, integrate, nature_run
from .osse import (
    ColumnMapping,
    build_problem,
    default_obs_locations,
    state_vector_to_model,
    synthesize_observations,
)
from .rng import SeededRng, derive_seed

CSV_HEADER = (
    "leakage_dBW,noise_K,delta_tb_K,precip_diff_max_mm,precip_diff_rms_mm,"
    "t2m_diff_max_C,t2m_diff_rms_C,analysis_cost,converged"
)

DEFAULT_LEAKAGE_SWEEP_DBW = (-55.0, -45.0, -35.0, -30.0, -25.0, -20.0, -15.0)


class ScenarioExecutionError(RuntimeError):
    """A module error during a run, annotated with level and member."""


@dataclass(frozen=True)
class Seeds:
    nature: int
    obs_noise: int
    init: int


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Fully resolved run description (defaults already applied)."""

    leakage_levels: tuple[float, ...]
    leakage_interpretation: str
    link: LinkBudget
    antenna: AntennaModel
    mask: EmissionMask
    field: TransmitterField
    mapping: ColumnMapping
    bias: BiasModel
    state_variance: float
    bias_variance: float
    obs_error_stddev_k: float
    model_params: ModelParams
    grid_size: int
    obs_locations: tuple[int, ...]
    seeds: Seeds
    spinup_steps: int
    forecast_length: float
    ensemble_size: int
    background_noise_std: float
    hold_bias_fixed: bool
    defaulted_fields: tuple[str, ...]
    config_hash: str


@dataclass(frozen=True)
class LevelMetrics:
    """One report row: forecast divergence caused by one leakage level."""

    label: str
    leakage_dbw: float | None
    noise_k: float
    delta_tb_k: float
    precip_diff_max_mm: float
    precip_diff_rms_mm: float
    t2m_diff_max_c: float
    t2m_diff_rms_c: float
    analysis_cost: float
    converged: bool


@dataclass(frozen=True, eq=False)
class ScenarioReport:
    baseline: LevelMetrics
    levels: tuple[LevelMetrics, ...]
    config_hash: str
    defaulted_fields: tuple[str, ...]
    ensemble_size: int
    forecast_length: float

    @property
    def rows(self) -> tuple[LevelMetrics, ...]:
        return (self.baseline, *self.levels)


_SECTION_DEFAULTS = {
    "link": {"distance_km": 800.0, "total_pathloss_db": 130.0, "transmittance": 1.0},
    "antenna": {"radiation_efficiency": 0.95, "physical_temperature_k": 290.0},
    "mask": {"breakpoints": None, "in_band_power_dbw": 0.0},
    "field": {
        "density_class": "custom",
        "count": 1,
        "per_device_eirp_dbw": -43.0,
        "elevation_gain_db": 0.0,
        "footprint_side_km": 48.0,
    },
    "forward": {
        "opacity_coefficient": 0.05,
        "surface_offset_k": 273.0,
        "atmosphere_temperature_k": 250.0,
    },
    "bias": {"constant_coefficient_k": 0.0, "coefficients": [], "predictors": []},
    "covariances": {
        "state_variance": 1.0,
        "bias_variance": 0.5,
        "observation_stddev_k": 0.3,
    },
    "model": {
        "grid_size": 40,
        "forcing": 8.0,
        "moisture_coupling": 0.1,
        "condensation_threshold": 25.0,
        "condensation_rate": 0.2,
        "dt": 0.01,
    },
    "observations": {"count": 20, "locations": None},
    "seeds": {"nature": 101, "obs_noise": 202, "init": 303},
}

_TOP_DEFAULTS = {
    "leakage_levels": list(DEFAULT_LEAKAGE_SWEEP_DBW),
    "leakage_interpretation": "aggregate",
    "spinup_steps": 500,
    "forecast_length": 12.0,
    "ensemble_size": 1,
    "background_noise_std": 0.5,
    "hold_bias_fixed": False,
}


def _resolve(raw: dict, defaulted: list[str]) -> dict:
    """Fill defaults into a parsed config dict, recording what was filled."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = dict(raw)
    resolved: dict = {}
    for key, default in _TOP_DEFAULTS.items():
        if key in raw:
            resolved[key] = raw.pop(key)
        else:
            resolved[key] = default
            defaulted.append(key)
    for section, keys in _SECTION_DEFAULTS.items():
        data = raw.pop(section, None)
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("section must be a mapping", field=section)
        unknown = sorted(set(data) - set(keys))
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown}", field=section)
        block = {}
        for key, default in keys.items():
            if key in data:
                block[key] = data[key]
            else:
                block[key] = default
                defaulted.append(f"{section}.{key}")
        resolved[section] = block
    if raw:
        raise ConfigError(f"unknown top-level key(s) {sorted(raw)}")
    if resolved["mask"]["breakpoints"] is None:
        resolved["mask"]["breakpoints"] = [
            list(bp) for bp in default_emission_mask().breakpoints
        ]
    return resolved


def _canonical_hash(resolved: dict) -> str:
    text = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def config_from_dict(raw: dict, seed_override: int | None = None) -> ScenarioConfig:
    """Validate a parsed config mapping and build the resolved ScenarioConfig."""
    defaulted: list[str] = []
    resolved = _resolve(raw, defaulted)
    if seed_override is not None:
        resolved["seeds"] = {
            "nature": int(seed_override),
            "obs_noise": int(seed_override) + 1,
            "init": int(seed_override) + 2,
        }

    levels = resolved["leakage_levels"]
    if not isinstance(levels, (list, tuple)) or len(levels) == 0:
        raise ConfigError("must be a non-empty list", field="leakage_levels")
    levels = tuple(float(v) for v in levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("must be sorted strictly ascending", field="leakage_levels")

    interpretation = resolved["leakage_interpretation"]
    if interpretation not in ("aggregate", "per_device"):
        raise ConfigError(
            "must be 'aggregate' or 'per_device'", field="leakage_interpretation"
        )

    ensemble_size = resolved["ensemble_size"]
    if not isinstance(ensemble_size, int) or ensemble_size < 1:
        raise ConfigError("must be an integer >= 1", field="ensemble_size")
    spinup_steps = resolved["spinup_steps"]
    if not isinstance(spinup_steps, int) or spinup_steps < 0:
        raise ConfigError("must be an integer >= 0", field="spinup_steps")
    forecast_length = float(resolved["forecast_length"])
    if forecast_length <= 0:
        raise ConfigError("must be positive", field="forecast_length")
    background_noise_std = float(resolved["background_noise_std"])
    if background_noise_std < 0:
        raise ConfigError("must be >= 0", field="background_noise_std")

    seeds_block = resolved["seeds"]
    for name in ("nature", "obs_noise", "init"):
        if not isinstance(seeds_block[name], int):
            raise ConfigError("seed must be an integer", field=f"seeds.{name}")
    seeds = Seeds(seeds_block["nature"], seeds_block["obs_noise"], seeds_block["init"])

    def build(section: str, builder, **kwargs):
        try:
            return builder(**kwargs)
        except ValidationError as exc:
            raise ConfigError(str(exc), field=section) from exc

    link_block = resolved["link"]
    link = build(
        "link",
        LinkBudget,
        distance_km=float(link_block["distance_km"]),
        total_pathloss_db=float(link_block["total_pathloss_db"]),
        transmittance=float(link_block["transmittance"]),
    )
    antenna_block = resolved["antenna"]
    antenna = build(
        "antenna",
        AntennaModel,
        radiation_efficiency=float(antenna_block["radiation_efficiency"]),
        physical_temperature_k=float(antenna_block["physical_temperature_k"]),
    )
    mask_block = resolved["mask"]
    mask = build(
        "mask",
        EmissionMask,
        breakpoints=tuple((float(o), float(p)) for o, p in mask_block["breakpoints"]),
        in_band_power_dbw=float(mask_block["in_band_power_dbw"]),
    )
    field_block = dict(resolved["field"])
    if field_block["density_class"] == "metropolitan":
        field_block["count"] = 250
    elif field_block["density_class"] == "rural":
        field_block["count"] = 10
    field = build(
        "field",
        TransmitterField,
        density_class=field_block["density_class"],
        count=int(field_block["count"]),
        per_device_eirp_dbw=float(field_block["per_device_eirp_dbw"]),
        elevation_gain_db=float(field_block["elevation_gain_db"]),
        footprint_side_km=float(field_block["footprint_side_km"]),
    )
    fwd_block = resolved["forward"]
    mapping = build(
        "forward",
        ColumnMapping,
        params=ForwardOperatorParams(float(fwd_block["opacity_coefficient"])),
        surface_offset_k=float(fwd_block["surface_offset_k"]),
        atmosphere_temperature_k=float(fwd_block["atmosphere_temperature_k"]),
    )
    bias_block = resolved["bias"]
    bias = build(
        "bias",
        BiasModel,
        constant_coefficient_k=float(bias_block["constant_coefficient_k"]),
        coefficients=tuple(float(c) for c in bias_block["coefficients"]),
        predictor_definitions=tuple(bias_block["predictors"]),
    )
    cov_block = resolved["covariances"]
    state_variance = float(cov_block["state_variance"])
    bias_variance = float(cov_block["bias_variance"])
    obs_error_stddev = float(cov_block["observation_stddev_k"])
    if state_variance <= 0 or bias_variance <= 0 or obs_error_stddev <= 0:
        raise ConfigError("variances and stddevs must be positive", field="covariances")

    model_block = resolved["model"]
    grid_size = model_block["grid_size"]
    if not isinstance(grid_size, int) or grid_size < 4:
        raise ConfigError("must be an integer >= 4", field="model.grid_size")
    params = build(
        "model",
        ModelParams,
        forcing=float(model_block["forcing"]),
        moisture_coupling=float(model_block["moisture_coupling"]),
        condensation_threshold=float(model_block["condensation_threshold"]),
        condensation_rate=float(model_block["condensation_rate"]),
        dt=float(model_block["dt"]),
    )
    obs_block = resolved["observations"]
    if obs_block["locations"] is not None:
        locations = tuple(int(loc) for loc in obs_block["locations"])
        if any(not 0 <= loc < grid_size for loc in locations):
            raise ConfigError(
                "locations must index the model grid", field="observations.locations"
            )
        if len(set(locations)) != len(locations):
            raise ConfigError("locations must be unique", field="observations.locations")
    else:
        count = obs_block["count"]
        if not isinstance(count, int):
            raise ConfigError("must be an integer", field="observations.count")
        try:
            locations = default_obs_locations(grid_size, count)
        except ValidationError as exc:
            raise ConfigError(str(exc), field="observations.count") from exc

    return ScenarioConfig(
        leakage_levels=levels,
        leakage_interpretation=interpretation,
        link=link,
        antenna=antenna,
        mask=mask,
        field=field,
        mapping=mapping,
        bias=bias,
        state_variance=state_variance,
        bias_variance=bias_variance,
        obs_error_stddev_k=obs_error_stddev,
        model_params=params,
        grid_size=grid_size,
        obs_locations=locations,
        seeds=seeds,
        spinup_steps=spinup_steps,
        forecast_length=forecast_length,
        ensemble_size=ensemble_size,
        background_noise_std=background_noise_std,
        hold_bias_fixed=bool(resolved["hold_bias_fixed"]),
        defaulted_fields=tuple(defaulted),
        config_hash=_canonical_hash(resolved),
    )


def load_config(path: str, seed_override: int | None = None) -> ScenarioConfig:
    """Parse and validate a YAML scenario config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        line = None
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise ConfigError(f"could not parse config: {exc}", line=line) from exc
    if raw is None:
        raw = {}
    return config_from_dict(raw, seed_override=seed_override)


def leakage_chain(config: ScenarioConfig, level_dbw: float) -> tuple[float, float]:
    """Leakage level to (induced noise temperature K, brightness error K).

    In the default 'aggregate' interpretation the level is the total leakage
    power entering the link. In 'per_device' it is one device's in-band
    EIRP: the emission mask sets the leaked fraction and the transmitter
    field aggregates over the footprint.
    """
    if config.leakage_interpretation == "per_device":
        fraction = aci_leakage_fraction(config.mask, AGGRESSOR_CHANNEL, VICTIM_CHANNEL)
        field = replace(config.field, per_device_eirp_dbw=level_dbw)
        aggregate_dbw = aggregate_leakage_power(field, fraction)
    else:
        aggregate_dbw = level_dbw
    p_rx = received_power(aggregate_dbw, config.link)
    noise = induced_noise_temperature(p_rx, VICTIM_CHANNEL)
    return noise.value_k, brightness_perturbation(noise, config.antenna)


def _member_background(config: ScenarioConfig, truth: ModelState, member: int) -> ModelState:
    rng = SeededRng(derive_seed(config.seeds.init, member))
    n = config.grid_size
    noise_t = config.background_noise_std * np.array(rng.normals(n))
    noise_q = config.background_noise_std * np.array(rng.normals(n))
    return ModelState(
        truth.temperature_field + noise_t,
        np.maximum(0.0, truth.moisture_field + noise_q),
    )


def _analyze_and_forecast(config: ScenarioConfig, background: ModelState, observations,
                          trace_stream: TextIO | None = None, trace_label: str = ""):
    problem = build_problem(
        background,
        config.bias,
        observations,
        config.obs_locations,
        config.mapping,
        state_variance=config.state_variance,
        bias_variance=config.bias_variance,
    )
    on_iteration = None
    if trace_stream is not None:
        def on_iteration(iteration, cost_value, gradient_norm):
            trace_stream.write(
                f"{trace_label} iter {iteration:3d}: J={cost_value:.9g} |grad|={gradient_norm:.3e}\n"
            )
    result = minimize(
        problem, hold_bias_fixed=config.hold_bias_fixed, on_iteration=on_iteration
    )
    analysis = state_vector_to_model(result.analysis_state, config.grid_size)
    n_steps = int(round(config.forecast_length / config.model_params.dt))
    forecast = integrate(analysis, config.model_params, n_steps)
    return result, diagnostics(forecast, config.model_params)


def run_scenario(
    config: ScenarioConfig, trace_stream: TextIO | None = None
) -> ScenarioReport:
    """Execute baseline plus every leakage level; difference the forecasts.

    Observation noise is one fixed realization shared by the baseline and
    every level, so levels differ only through the injected brightness
    error. Ensemble members differ only in their background perturbation;
    metrics are averaged over members. Levels and members are independent,
    but results are always assembled in config order. When ``trace_stream``
    is given (the CLI's verbose mode), every analysis writes its iteration
    trace there.
    """
    truth = nature_run(
        config.model_params,
        config.seeds.nature,
        config.spinup_steps,
        0,
        grid_size=config.grid_size,
        moisture_base=config.model_params.condensation_threshold + 5.0,
    ).final

    obs_baseline = synthesize_observations(
        truth,
        config.mapping,
        config.bias,
        config.seeds.obs_noise,
        0.0,
        config.obs_locations,
        error_stddev_k=config.obs_error_stddev_k,
    )

    backgrounds = [
        _member_background(config, truth, m) for m in range(config.ensemble_size)
    ]
    baseline_diags = []
    baseline_costs = []
    baseline_converged = True
    for m, background in enumerate(backgrounds):
        try:
            result, diag = _analyze_and_forecast(
                config, background, obs_baseline,
                trace_stream=trace_stream, trace_label=f"baseline m{m}",
            )
        except Exception as exc:
            raise ScenarioExecutionError(f"baseline, member {m}: {exc}") from exc
        baseline_diags.append(diag)
        baseline_costs.append(result.final_cost)
        baseline_converged &= result.converged

    baseline = LevelMetrics(
        label="baseline",
        leakage_dbw=None,
        noise_k=0.0,
        delta_tb_k=0.0,
        precip_diff_max_mm=0.0,
        precip_diff_rms_mm=0.0,
        t2m_diff_max_c=0.0,
        t2m_diff_rms_c=0.0,
        analysis_cost=float(np.mean(baseline_costs)),
        converged=baseline_converged,
    )

    level_rows = []
    for level in config.leakage_levels:
        noise_k, delta_tb = leakage_chain(config, level)
        observations = synthesize_observations(
            truth,
            config.mapping,
            config.bias,
            config.seeds.obs_noise,
            delta_tb,
            config.obs_locations,
            error_stddev_k=config.obs_error_stddev_k,
        )
        precip_max = []
        precip_rms = []
        t2m_max = []
        t2m_rms = []
        costs = []
        converged = True
        for m, background in enumerate(backgrounds):
            try:
                result, diag = _analyze_and_forecast(
                    config, background, observations,
                    trace_stream=trace_stream, trace_label=f"level {level:g} m{m}",
                )
            except Exception as exc:
                raise ScenarioExecutionError(
                    f"level {level} dBW, member {m}: {exc}"
                ) from exc
            d_precip = (
                diag.accumulated_precipitation_mm
                - baseline_diags[m].accumulated_precipitation_mm
            )
            d_t2m = diag.two_meter_temperature_k - baseline_diags[m].two_meter_temperature_k
            precip_max.append(float(np.max(np.abs(d_precip))))
            precip_rms.append(float(np.sqrt(np.mean(d_precip**2))))
            t2m_max.append(float(np.max(np.abs(d_t2m))))
            t2m_rms.append(float(np.sqrt(np.mean(d_t2m**2))))
            costs.append(result.final_cost)
            converged &= result.converged
        level_rows.append(
            LevelMetrics(
                label=f"{level:g}",
                leakage_dbw=level,
                noise_k=noise_k,
                delta_tb_k=delta_tb,
                precip_diff_max_mm=float(np.mean(precip_max)),
                precip_diff_rms_mm=float(np.mean(precip_rms)),
                t2m_diff_max_c=float(np.mean(t2m_max)),
                t2m_diff_rms_c=float(np.mean(t2m_rms)),
                analysis_cost=float(np.mean(costs)),
                converged=converged,
            )
        )

    return ScenarioReport(
        baseline=baseline,
        levels=tuple(level_rows),
        config_hash=config.config_hash,
        defaulted_fields=config.defaulted_fields,
        ensemble_size=config.ensemble_size,
        forecast_length=config.forecast_length,
    )


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def _row_cells(row: LevelMetrics) -> list[str]:
    return [
        row.label,
        _fmt(row.noise_k),
        _fmt(row.delta_tb_k),
        _fmt(row.precip_diff_max_mm),
        _fmt(row.precip_diff_rms_mm),
        _fmt(row.t2m_diff_max_c),
        _fmt(row.t2m_diff_rms_c),
        _fmt(row.analysis_cost),
        "true" if row.converged else "false",
    ]


def emit_csv(report: ScenarioReport, path: str) -> None:
    """Write the report as CSV: a hash comment, the header, baseline row,
    then one row per leakage level in config order. Numbers carry 9
    significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={report.config_hash}\n")
        fh.write(CSV_HEADER + "\n")
        for row in report.rows:
            fh.write(",".join(_row_cells(row)) + "\n")


def emit_summary(report: ScenarioReport, stream: TextIO) -> None:
    """Human-readable table of the same rows, plus provenance."""
    columns = CSV_HEADER.split(",")
    table = [columns] + [_row_cells(row) for row in report.rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(columns))]
    stream.write(f"config hash: {report.config_hash}\n")
    stream.write(
        f"ensemble size: {report.ensemble_size}, "
        f"forecast length: {report.forecast_length:g} model time units\n"
    )
    if report.defaulted_fields:
        stream.write(f"defaults applied: {', '.join(report.defaulted_fields)}\n")
    stream.write("\n")
    for line in table:
        stream.write("  ".join(cell.rjust(w) for cell, w in zip(line, widths)) + "\n")


def parse_report_csv(path: str) -> list[dict]:
    """Read back an emitted CSV (comment lines skipped) as row dicts."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header: list[str] | None = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            cells = line.split(",")
            row: dict = dict(zip(header, cells))
            for key in header[1:-1]:
                row[key] = float(row[key])
            row["converged"] = row["converged"] == "true"
            rows.append(row)
    return rows


def noise_table(
    levels_dbw,
    link: LinkBudget,
    antenna: AntennaModel,
) -> list[dict]:
    """Induced-noise curve: one row per leakage level (aggregate dBW)."""
    rows = []
    for level in levels_dbw:
        p_rx = received_power(level, link)
        noise = induced_noise_temperature(p_rx, VICTIM_CHANNEL)
        rows.append(
            {
                "leakage_dBW": level,
                "received_power_W": p_rx,
                "noise_K": noise.value_k,
                "delta_tb_K": brightness_perturbation(noise, antenna),
            }
        )
    return rows


def emit_noise_table_csv(rows: list[dict], stream: TextIO) -> None:
    stream.write("leakage_dBW,received_power_W,noise_K,delta_tb_K\n")
    for row in rows:
        cells = [
            _fmt(row["leakage_dBW"]),
            _fmt(row["received_power_W"]),
            _fmt(row["noise_K"]),
            _fmt(row["delta_tb_K"]),
        ]
        stream.write(",".join(cells) + "\n")
