"""Synthetic-truth harness: model state to radiance observations and back.

Ties the toy model to the radiance operator. A ``ColumnMapping`` says how a
grid cell becomes a single-column atmosphere (surface temperature is the
cell value plus the reporting offset, the effective atmosphere temperature
is a fixed constant, moisture is the cell's moisture). On top of that:

* ``synthesize_observations`` builds observations from a truth state, with
  seeded Gaussian noise and an optional uniform brightness-temperature
  perturbation, the knob the interference chain drives.
* ``RadianceOperator`` exposes the same mapping to the variational analysis
  over the flattened control vector [temperature_field, moisture_field].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assim import AssimilationProblem, CovarianceSpec
from .errors import ValidationError
from .forward import (
    BiasModel,
    ColumnState,
    ForwardOperatorParams,
    RadianceObservation,
    VICTIM_CHANNEL,
    bias_corrected_forward,
)
from .model import ModelState, TEMPERATURE_REPORT_OFFSET_K
from .rng import SeededRng

DEFAULT_OBS_ERROR_STDDEV_K = 0.3


@dataclass(frozen=True)
class ColumnMapping:
    """Grid cell to single-column state, plus the operator parameters."""

    params: ForwardOperatorParams = ForwardOperatorParams()
    surface_offset_k: float = TEMPERATURE_REPORT_OFFSET_K
    atmosphere_temperature_k: float = 250.0

    def __post_init__(self):
        if self.atmosphere_temperature_k <= 0:
            raise ValidationError("atmosphere temperature must be positive")

    def column(self, temperature_value: float, moisture_value: float) -> ColumnState:
        return ColumnState(
            water_vapor_kg_m2=max(0.0, moisture_value),
            surface_temperature_k=self.surface_offset_k + temperature_value,
            atmosphere_temperature_k=self.atmosphere_temperature_k,
        )

    def column_at(self, state: ModelState, location: int) -> ColumnState:
        return self.column(
            float(state.temperature_field[location]), float(state.moisture_field[location])
        )


def default_obs_locations(grid_size: int, count: int = 20) -> tuple[int, ...]:
    """Evenly thinned network: ``count`` cells spread over the grid."""
    if count < 1 or count > grid_size:
        raise ValidationError("observation count must be in [1, grid size]")
    stride = grid_size // count
    return tuple(range(0, stride * count, stride))


def synthesize_observations(
    truth: ModelState,
    mapping: ColumnMapping,
    bias_truth: BiasModel,
    obs_error_seed: int,
    delta_tb_k: float,
    obs_locations: tuple[int, ...],
    error_stddev_k: float = DEFAULT_OBS_ERROR_STDDEV_K,
) -> tuple[RadianceObservation, ...]:
    """Observations a radiometer would report over the truth state.

    Per location: operator value at the truth column, plus the true bias,
    plus seeded Gaussian noise, plus the uniform perturbation
    ``delta_tb_k`` (applied to every observation, as a field of emitters
    spread under the whole footprint would). The perturbation is recorded on
    each observation for bookkeeping.
    """
    n = truth.grid_size
    if any(not 0 <= loc < n for loc in obs_locations):
        raise ValidationError("observation locations must index the model grid")
    rng = SeededRng(obs_error_seed)
    observations = []
    for loc in obs_locations:
        column = mapping.column_at(truth, loc)
        proto = RadianceObservation(
            channel=VICTIM_CHANNEL,
            value_k=0.0,
            error_stddev_k=error_stddev_k,
            scan_position=loc,
        )
        value = bias_corrected_forward(column, bias_truth, proto, mapping.params)
        value += rng.normal(0.0, error_stddev_k)
        value += delta_tb_k
        observations.append(
            RadianceObservation(
                channel=VICTIM_CHANNEL,
                value_k=value,
                error_stddev_k=error_stddev_k,
                scan_position=loc,
                applied_perturbation_k=delta_tb_k,
            )
        )
    return tuple(observations)


@dataclass(frozen=True, eq=False)
class RadianceOperator:
    """Observation operator over the flattened control [T-field, q-field].

    The bias part of the control is [beta_0, beta_1, ...]; its Jacobian
    column for beta_0 is one and the others are the predictor values.
    Moisture below zero is floored before evaluating the column (matching
    the model's own clipping), with zero sensitivity there. Evaluation is
    vectorized over observations; predictors without a vectorized form fall
    back to per-observation calls.
    """

    mapping: ColumnMapping
    bias_template: BiasModel
    observations: tuple[RadianceObservation, ...]
    obs_locations: tuple[int, ...]
    grid_size: int

    def __post_init__(self):
        if len(self.observations) != len(self.obs_locations):
            raise ValidationError("one location per observation required")
        if any(not 0 <= loc < self.grid_size for loc in self.obs_locations):
            raise ValidationError("observation locations must index the model grid")
        object.__setattr__(self, "_locs", np.array(self.obs_locations, dtype=int))
        object.__setattr__(
            self, "_scan", np.array([o.scan_position for o in self.observations], dtype=float)
        )

    @property
    def n_state(self) -> int:
        return 2 * self.grid_size

    @property
    def n_bias(self) -> int:
        return 1 + self.bias_template.n_predictors

    def _columns(self, state: np.ndarray):
        """(surface temperature, floored moisture, raw-moisture-positive mask)."""
        locs = self._locs  # type: ignore[attr-defined]
        t_surf = self.mapping.surface_offset_k + state[locs]
        q_raw = state[self.grid_size + locs]
        return t_surf, np.maximum(0.0, q_raw), q_raw > 0.0

    def _predictor_matrix(self, t_surf, q, defs) -> np.ndarray:
        columns = []
        for pdef in defs:
            if pdef.vector_value is not None:
                columns.append(pdef.vector_value(t_surf, q, self._scan))  # type: ignore[attr-defined]
            else:
                columns.append(
                    np.array(
                        [
                            pdef.value(
                                self.mapping.column(ts - self.mapping.surface_offset_k, qq),
                                obs,
                            )
                            for ts, qq, obs in zip(t_surf, q, self.observations)
                        ]
                    )
                )
        if not columns:
            return np.zeros((len(self.observations), 0))
        return np.column_stack(columns)

    def values(self, state: np.ndarray, bias: np.ndarray) -> np.ndarray:
        t_surf, q, _ = self._columns(state)
        t_atm = self.mapping.atmosphere_temperature_k
        w = np.exp(-self.mapping.params.opacity_coefficient * q)
        h = t_surf * w + t_atm * (1.0 - w)
        pred = self._predictor_matrix(t_surf, q, self.bias_template.resolved())
        return h + bias[0] + pred @ bias[1:]

    def jacobians(self, state: np.ndarray, bias: np.ndarray):
        n_obs = len(self.observations)
        defs = self.bias_template.resolved()
        t_surf, q, active = self._columns(state)
        t_atm = self.mapping.atmosphere_temperature_k
        kappa = self.mapping.params.opacity_coefficient
        w = np.exp(-kappa * q)

        d_dtemp = w.copy()
        d_dmoist = kappa * (t_atm - t_surf) * w
        for coeff, pdef in zip(bias[1:], defs):
            d_dtemp += coeff * pdef.d_surface_temperature
            d_dmoist += coeff * pdef.d_water_vapor
        d_dmoist = np.where(active, d_dmoist, 0.0)

        rows = np.arange(n_obs)
        locs = self._locs  # type: ignore[attr-defined]
        jac_state = np.zeros((n_obs, self.n_state))
        jac_state[rows, locs] = d_dtemp
        jac_state[rows, self.grid_size + locs] = d_dmoist
        jac_bias = np.empty((n_obs, self.n_bias))
        jac_bias[:, 0] = 1.0
        jac_bias[:, 1:] = self._predictor_matrix(t_surf, q, defs)
        return jac_state, jac_bias


def build_problem(
    background: ModelState,
    background_bias: BiasModel,
    observations: tuple[RadianceObservation, ...],
    obs_locations: tuple[int, ...],
    mapping: ColumnMapping,
    state_variance: float = 1.0,
    bias_variance: float = 0.5,
) -> AssimilationProblem:
    """Assemble the analysis problem for one cycle with diagonal covariances."""
    n = background.grid_size
    x_b = np.concatenate([background.temperature_field, background.moisture_field])
    beta_b = np.array(
        [background_bias.constant_coefficient_k, *background_bias.coefficients]
    )
    operator = RadianceOperator(
        mapping=mapping,
        bias_template=background_bias,
        observations=tuple(observations),
        obs_locations=tuple(obs_locations),
        grid_size=n,
    )
    return AssimilationProblem(
        background_state=x_b,
        background_bias=beta_b,
        state_covariance=CovarianceSpec.diagonal(np.full(2 * n, state_variance)),
        bias_covariance=CovarianceSpec.diagonal(np.full(len(beta_b), bias_variance)),
        obs_covariance=CovarianceSpec.diagonal(
            np.array([o.error_stddev_k**2 for o in observations])
        ),
        observations=tuple(observations),
        operator=operator,
    )


def state_vector_to_model(vector: np.ndarray, grid_size: int) -> ModelState:
    """Flattened analysis state back to a model state; moisture floored at zero."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (2 * grid_size,):
        raise ValidationError(
            f"state vector length {vector.shape} does not match grid size {grid_size}"
        )
    temperature = vector[:grid_size]
    moisture = np.maximum(0.0, vector[grid_size:])
    return ModelState(temperature, moisture)
