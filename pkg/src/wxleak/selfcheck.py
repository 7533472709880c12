"""Built-in invariant checks backing the CLI ``check`` subcommand.

Each check is quick, deterministic and self-contained; together they cover
the cross-module contracts that matter most in the field: the physics
identities of the leakage chain, the gradient of the analysis cost, and the
end-to-end determinism of a tiny scenario.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import assim, experiment, leakage, model, osse
from .forward import BiasModel, ColumnState, ForwardOperatorParams
from .forward import forward as forward_operator
from .rng import SeededRng


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_noise_scaling() -> CheckResult:
    link = leakage.LinkBudget()
    temps = [
        leakage.induced_noise_temperature(
            leakage.received_power(level, link), leakage.VICTIM_CHANNEL
        ).value_k
        for level in (-55.0, -45.0, -35.0, -25.0, -15.0)
    ]
    worst = max(abs(b / a - 10.0) for a, b in zip(temps, temps[1:]))
    return CheckResult(
        "noise temperature decade law",
        worst < 1e-9 * 10.0,
        f"max ratio deviation {worst:.3e}",
    )


def _check_antenna_identities() -> CheckResult:
    rng = SeededRng(11)
    worst = 0.0
    for _ in range(1000):
        eta = rng.uniform()
        t_b = 150.0 + 150.0 * rng.uniform()
        t_p = 250.0 + 60.0 * rng.uniform()
        antenna = leakage.AntennaModel(eta, t_p)
        t_a = leakage.antenna_temperature(t_b, antenna)
        if not (min(t_b, t_p) - 1e-9 <= t_a <= max(t_b, t_p) + 1e-9):
            return CheckResult("antenna temperature bounds", False, f"t_a {t_a} out of range")
        noise = leakage.induced_noise_temperature(
            3e-15 * rng.uniform(), leakage.VICTIM_CHANNEL
        )
        if eta > 0.01:
            dtb = leakage.brightness_perturbation(noise, antenna)
            recovered = leakage.antenna_temperature(
                t_b + dtb, antenna
            ) - leakage.antenna_temperature(t_b, antenna)
            if noise.value_k > 0:
                worst = max(worst, abs(recovered - noise.value_k) / noise.value_k)
    return CheckResult(
        "antenna perturbation round trip", worst < 1e-9, f"max relative error {worst:.3e}"
    )


def _check_mask_additivity() -> CheckResult:
    mask = leakage.default_emission_mask()
    victim = leakage.VICTIM_CHANNEL
    aggressor = leakage.AGGRESSOR_CHANNEL
    whole = leakage.aci_leakage_fraction(mask, aggressor, victim)
    mid = 0.5 * (victim.f_low_hz + victim.f_high_hz)
    low = leakage.aci_leakage_fraction(
        mask, aggressor, leakage.ChannelSpec.from_edges(victim.f_low_hz, mid)
    )
    high = leakage.aci_leakage_fraction(
        mask, aggressor, leakage.ChannelSpec.from_edges(mid, victim.f_high_hz)
    )
    err = abs((low + high) - whole)
    ok = 0.0 <= whole <= 1.0 and err < 1e-6
    return CheckResult("mask fraction sub-band additivity", ok, f"split error {err:.3e}")


def _check_aggregation_partition() -> CheckResult:
    a = leakage.TransmitterField(count=37, per_device_eirp_dbw=-41.0)
    b = leakage.TransmitterField(count=63, per_device_eirp_dbw=-41.0)
    union = leakage.TransmitterField(count=100, per_device_eirp_dbw=-41.0)
    split = leakage.sum_power_dbw(
        [leakage.aggregate_leakage_power(a, 0.37), leakage.aggregate_leakage_power(b, 0.37)]
    )
    whole = leakage.aggregate_leakage_power(union, 0.37)
    err = abs(split - whole)
    return CheckResult("aggregation partition invariance", err < 1e-9, f"error {err:.3e} dB")


def _check_forward_bounds() -> CheckResult:
    params = ForwardOperatorParams()
    for q in np.linspace(0.0, 120.0, 61):
        state = ColumnState(q, 288.0, 248.0)
        t_b = forward_operator(state, params)
        if not (248.0 - 1e-12 <= t_b <= 288.0 + 1e-12):
            return CheckResult("forward operator bounds", False, f"t_b {t_b} at q {q}")
    return CheckResult("forward operator bounds", True, "within [T_atm, T_surf] on grid")


def _check_gradient() -> CheckResult:
    truth = model.nature_run(model.ModelParams(), 5, 200, 0, grid_size=12).final
    mapping = osse.ColumnMapping()
    bias = BiasModel(0.0, (0.0,), ("surface_temperature",))
    obs = osse.synthesize_observations(truth, mapping, bias, 9, 0.1, tuple(range(0, 12, 2)))
    background = model.ModelState(
        truth.temperature_field + 0.3, np.maximum(0.0, truth.moisture_field - 0.2)
    )
    problem = osse.build_problem(background, bias, obs, tuple(range(0, 12, 2)), mapping)
    control = problem.background_control()
    gs, gb = assim.gradient(control, problem)
    analytic = np.concatenate([gs, gb])
    flat = np.concatenate([control.state, control.bias])

    def cost_flat(v):
        n = len(control.state)
        return assim.cost(assim.Control(v[:n], v[n:]), problem)

    fd = np.zeros_like(flat)
    for i in range(len(flat)):
        h = 1e-5 * max(1.0, abs(flat[i]))
        up = flat.copy()
        dn = flat.copy()
        up[i] += h
        dn[i] -= h
        fd[i] = (cost_flat(up) - cost_flat(dn)) / (2.0 * h)
    err = float(np.linalg.norm(analytic - fd) / max(1e-300, np.linalg.norm(fd)))
    return CheckResult("analysis gradient vs finite differences", err < 1e-6, f"relative error {err:.3e}")


def _check_model_fixed_point() -> CheckResult:
    params = model.ModelParams(moisture_coupling=0.0)
    n = 12
    state = model.ModelState(np.full(n, params.forcing), np.zeros(n))
    stepped = model.step(state, params)
    err = float(
        max(
            np.max(np.abs(stepped.temperature_field - state.temperature_field)),
            np.max(np.abs(stepped.moisture_field - state.moisture_field)),
        )
    )
    return CheckResult("uniform-forcing fixed point", err < 1e-12, f"max drift {err:.3e}")


def _check_null_experiment() -> CheckResult:
    raw = {
        "leakage_levels": [-300.0],
        "model": {"grid_size": 8},
        "observations": {"count": 4},
        "spinup_steps": 50,
        "forecast_length": 0.5,
    }
    config = experiment.config_from_dict(raw)
    report_a = experiment.run_scenario(config)
    report_b = experiment.run_scenario(config)
    row = report_a.levels[0]
    zero = (
        row.precip_diff_max_mm == 0.0
        and row.precip_diff_rms_mm == 0.0
        and row.t2m_diff_max_c == 0.0
        and row.t2m_diff_rms_c == 0.0
    )
    identical = report_a.rows == report_b.rows
    return CheckResult(
        "null-perturbation experiment",
        zero and identical,
        "zero diffs and repeatable" if zero and identical else "nonzero or unstable",
    )


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    _check_noise_scaling,
    _check_antenna_identities,
    _check_mask_additivity,
    _check_aggregation_partition,
    _check_forward_bounds,
    _check_gradient,
    _check_model_fixed_point,
    _check_null_experiment,
)


def run_all() -> list[CheckResult]:
    return [check() for check in CHECKS]
