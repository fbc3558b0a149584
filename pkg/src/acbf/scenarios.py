"""Built-in scenario presets and numeric override files.

Dynamics, regressors and barriers are compiled per preset. An override file
(YAML or JSON) may change numbers only: gains, bounds, nominal values,
initial conditions, simulation settings, the extended-barrier ``alpha`` and
the plant truth.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import yaml

from .controller import ControllerModel, GainConfig, NominalSelection
from .model import (
    DIAGONAL,
    FULL,
    Barrier,
    ConfigurationError,
    UncertainSystem,
    UncertaintyPrior,
    UncertaintyTruth,
    check_truth_in_prior,
    linear_extended_barrier,
    make_prior,
    make_truth,
)
from .sim import DatasetPlan, ReferenceController, SimConfig, TrackingSpec


@dataclass(frozen=True)
class Scenario:
    name: str
    system: UncertainSystem
    barrier: Barrier
    prior: UncertaintyPrior
    truth: UncertaintyTruth
    nominal: NominalSelection
    gains: GainConfig
    x0: np.ndarray
    mu_hat0: np.ndarray
    nu_hat0: np.ndarray
    reference: ReferenceController
    tracking: TrackingSpec
    sim: SimConfig
    audit_grid: Callable[[], list]
    dataset_plan: DatasetPlan
    data_driven_gains: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @cached_property
    def _model(self) -> ControllerModel:
        return ControllerModel(self.system, self.barrier, self.prior, self.nominal, self.gains)

    def controller_model(self) -> ControllerModel:
        """Controller-side view of the scenario; never touches the truth."""
        return self._model


def _const(values):
    v = np.asarray(values, dtype=float)
    return lambda x: v


def _gains(p) -> GainConfig:
    return GainConfig(gamma=float(p["gamma"]), eps1=float(p["eps1"]), eps2=float(p["eps2"]),
                      gamma_theta=p["gamma_theta"], gamma_lambda=p["gamma_lambda"],
                      rho=p["rho"], b=p["b"])


def _nominal(p) -> NominalSelection:
    return NominalSelection(p["theta0"], p["lambda0"], p.get("mu_bar"), p.get("nu_bar"))


def _grid(*axes):
    mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
    return [np.array(pt) for pt in np.stack([m.ravel() for m in mesh], axis=1)]


# ----------------------------------------------------------------------------
# example1: scalar system, unknown drift and input gain
# ----------------------------------------------------------------------------

EXAMPLE1 = {
    "gains": {"gamma": 800.0, "eps1": 0.001, "eps2": 0.001, "gamma_theta": [550.0], "gamma_lambda": [300.0],
              "rho": [1.0], "b": [0.5]},
    "bounds": {"theta_lo": [[-10.0, -10.0]], "theta_hi": [[10.0, 10.0]],
               "lambda_lo": [[-10.0, -10.0]], "lambda_hi": [[10.0, 10.0]],
               "f_u_lo": [-2.0], "f_u_hi": [2.0], "lipschitz": [1.0]},
    "nominal": {"theta0": [[0.0, 0.0]], "lambda0": [[0.5, 0.0]], "mu_bar": [15.0], "nu_bar": [15.0]},
    "truth": {"theta": [[2.0, 2.0]], "lambda": [[1.0, 2.0]]},
    "initial": {"x0": [2.0], "mu_hat0": [0.1], "nu_hat0": [0.1]},
    "sim": {"dt": 1e-4, "t_end": 4 * math.pi, "log_stride": 10},
    "reference": {"k": 5.0, "amplitude": 3.0},
    "data": {"n_points": 10, "start": [4.5], "end": [1.0], "probe": [10.0, 30.0], "jitter": 0.1,
             "gains": {"gamma_theta": [60.0], "gamma_lambda": [30.0]}},
}


def build_example1(p) -> Scenario:
    system = UncertainSystem(
        m=0, n=1, mode=DIAGONAL,
        f=_const([0.0]), g=_const([0.0]),
        phi=lambda x: [np.array([math.sin(x[0]), x[0] * x[0]])],
        psi=lambda x: [np.array([1.0, x[0] * x[0]])],
        p=(2,), q=(2,))
    b = p["bounds"]
    prior = make_prior(system, b["theta_lo"], b["theta_hi"], b["lambda_lo"], b["lambda_hi"],
                       _const(b["f_u_lo"]), _const(b["f_u_hi"]), b["lipschitz"])
    truth = make_truth(system, p["truth"]["theta"], p["truth"]["lambda"], lambda x: np.array([math.cos(x[0])]))
    barrier = Barrier(h=lambda x: float(x[0]) - 1.0, grad=_const([1.0]))
    amp = float(p["reference"]["amplitude"])
    reference = ReferenceController("feedback_lin", {"k": float(p["reference"]["k"])},
                                    lambda t: (np.array([amp * math.sin(t)]), np.array([amp * math.cos(t)])))
    tracking = TrackingSpec((0,), ("x",), lambda r: r[0] - 1.0 >= 0.0)
    return _assemble("example1", p, system, barrier, prior, truth, reference, tracking,
                     lambda: _grid(np.linspace(1.0, 10.0, 91)))


# ----------------------------------------------------------------------------
# example2: adaptive cruise control
# ----------------------------------------------------------------------------

EXAMPLE2 = {
    "gains": {"gamma": 300.0, "eps1": 0.001, "eps2": 0.001, "gamma_theta": [0.01], "gamma_lambda": [1e-4],
              "rho": [1.0], "b": [1.0 / 3000.0]},
    "bounds": {"theta_lo": [[-0.1, -0.5, -0.2]], "theta_hi": [[0.0, 0.0, 0.0]],
               "lambda_lo": [[1.0 / 3000.0]], "lambda_hi": [[0.01]],
               "f_u_lo": [0.0, 0.0, 0.0], "f_u_hi": [0.0, 0.0, 0.0], "lipschitz": [0.0]},
    "nominal": {"theta0": [[-0.05, -0.5, -0.2]], "lambda0": [[1.0 / 3000.0]], "mu_bar": None, "nu_bar": None},
    "truth": {"theta": [[-0.1 / 1650, -5.0 / 1650, -0.25 / 1650]], "lambda": [[1.0 / 1650]]},
    "initial": {"x0": [100.0, 20.0, 22.0], "mu_hat0": [0.001], "nu_hat0": [0.001]},
    "sim": {"dt": 1e-3, "t_end": 30.0, "log_stride": 10},
    "reference": {"k": 0.5, "v_des": 22.0, "lead_accel": 0.0},
    "data": {"n_points": 5, "start": [100.0, 20.0, 22.0], "end": [60.0, 20.0, 14.0], "probe": [500.0, 3000.0],
             "jitter": 0.0, "gains": {}},
}


def build_example2(p) -> Scenario:
    a_lead = float(p["reference"]["lead_accel"])
    system = UncertainSystem(
        m=2, n=1, mode=DIAGONAL,
        f=lambda x: np.array([x[1] - x[2], a_lead, 0.0]), g=_const([0.0]),
        phi=lambda x: [np.array([1.0, x[2], x[2] * x[2]])],
        psi=lambda x: [np.array([1.0])],
        p=(3,), q=(1,))
    b = p["bounds"]
    prior = make_prior(system, b["theta_lo"], b["theta_hi"], b["lambda_lo"], b["lambda_hi"],
                       _const(b["f_u_lo"]), _const(b["f_u_hi"]), b["lipschitz"])
    zero = np.zeros(3)
    truth = make_truth(system, p["truth"]["theta"], p["truth"]["lambda"], lambda x: zero)
    grad = np.array([1.0, 0.0, -1.8])
    barrier = Barrier(h=lambda x: float(x[0] - 1.8 * x[2]), grad=lambda x: grad)
    v_des = float(p["reference"]["v_des"])
    reference = ReferenceController("velocity", {"k": float(p["reference"]["k"])},
                                    lambda t: (np.array([v_des]), np.array([0.0])))
    tracking = TrackingSpec((2,), ("v_f",), lambda r: True)
    return _assemble("example2", p, system, barrier, prior, truth, reference, tracking,
                     lambda: _grid(np.linspace(30.0, 150.0, 25), [15.0, 20.0, 25.0], np.linspace(10.0, 30.0, 21)))


# ----------------------------------------------------------------------------
# example3: two masses and springs, relative-degree-two barrier
# ----------------------------------------------------------------------------

EXAMPLE3 = {
    "gains": {"gamma": 300.0, "eps1": 0.001, "eps2": 0.001, "gamma_theta": [20000.0, 5000.0],
              "gamma_lambda": [200.0, 200.0], "rho": [0.5, 0.5], "b": [1.0, 1.0]},
    "bounds": {"theta_lo": [[-100.0, 0.0], [0.0, -50.0]], "theta_hi": [[0.0, 50.0], [50.0, 0.0]],
               "lambda_lo": [[2.0], [2.0]], "lambda_hi": [[10.0], [10.0]],
               "f_u_lo": [0.0] * 4, "f_u_hi": [0.0] * 4, "lipschitz": [0.0]},
    "nominal": {"theta0": [[-50.0, 25.0], [25.0, -25.0]], "lambda0": [[6.0], [6.0]],
                "mu_bar": None, "nu_bar": None},
    "truth": {"theta": [[-10.0, 5.0], [5.0, -5.0]], "lambda": [[5.0], [5.0]]},
    "initial": {"x0": [0.0, 1.0, 0.0, 0.0], "mu_hat0": [0.1, 0.1], "nu_hat0": [0.1, 0.1]},
    "sim": {"dt": 1e-3, "t_end": 4 * math.pi, "log_stride": 10},
    "reference": {"kp": 10.0, "kd": 5.0, "compensate": True},
    "barrier": {"alpha": 10.0},
    "data": {"n_points": 4, "start": [0.0, 1.0, 0.0, 0.0], "end": [0.5, 2.0, 1.0, 1.0], "probe": [1.0, 5.0],
             "jitter": 0.0, "gains": {}},
}

EXAMPLE3_FULL = copy.deepcopy(EXAMPLE3)
EXAMPLE3_FULL["gains"] = {"gamma": 1000.0, "eps1": 0.001, "eps2": 0.001, "gamma_theta": [7000.0],
                          "gamma_lambda": [70.0], "rho": [1.0], "b": [1.0]}
EXAMPLE3_FULL["bounds"]["lambda_lo"] = [[[2.0], [-1.0]], [[-1.0], [2.0]]]
EXAMPLE3_FULL["bounds"]["lambda_hi"] = [[[10.0], [1.0]], [[1.0], [10.0]]]
EXAMPLE3_FULL["nominal"]["lambda0"] = [[[6.0], [0.0]], [[0.0], [6.0]]]
EXAMPLE3_FULL["truth"]["lambda"] = [[[5.0], [0.0]], [[0.0], [5.0]]]
EXAMPLE3_FULL["initial"]["mu_hat0"] = [0.1]
EXAMPLE3_FULL["initial"]["nu_hat0"] = [0.1]


def _build_example3(p, full: bool) -> Scenario:
    one = np.array([1.0])
    if full:
        system = UncertainSystem(
            m=2, n=2, mode=FULL,
            f=lambda x: np.array([x[2], x[3], 0.0, 0.0]), g=_const(np.zeros((2, 2))),
            phi=lambda x: [np.array([x[0], x[1]]), np.array([x[0], x[1]])],
            psi=lambda x: [[one, one], [one, one]],
            p=(2, 2), q=((1, 1), (1, 1)))
    else:
        system = UncertainSystem(
            m=2, n=2, mode=DIAGONAL,
            f=lambda x: np.array([x[2], x[3], 0.0, 0.0]), g=_const([0.0, 0.0]),
            phi=lambda x: [np.array([x[0], x[1]]), np.array([x[0], x[1]])],
            psi=lambda x: [one, one],
            p=(2, 2), q=(1, 1))
    b = p["bounds"]
    prior = make_prior(system, b["theta_lo"], b["theta_hi"], b["lambda_lo"], b["lambda_hi"],
                       _const(b["f_u_lo"]), _const(b["f_u_hi"]), b["lipschitz"])
    zero = np.zeros(4)
    truth = make_truth(system, p["truth"]["theta"], p["truth"]["lambda"], lambda x: zero)
    barrier = linear_extended_barrier([-1.0, 1.0], -0.5, m=2, alpha=float(p["barrier"]["alpha"]))
    r = p["reference"]
    reference = ReferenceController(
        "pd", {"kp": float(r["kp"]), "kd": float(r["kd"]), "compensate": bool(r["compensate"])},
        lambda t: (np.array([0.0, 1.0 + math.sin(t)]), np.array([0.0, math.cos(t)])))
    tracking = TrackingSpec((0, 1), ("x1", "x2"), lambda ref: ref[1] - ref[0] - 0.5 >= 0.0)
    name = "example3-full" if full else "example3"
    return _assemble(name, p, system, barrier, prior, truth, reference, tracking,
                     lambda: _grid(np.linspace(-1.0, 1.0, 9), np.linspace(0.0, 2.5, 11),
                                   np.linspace(-2.0, 2.0, 5), np.linspace(-2.0, 2.0, 5)))


def build_example3(p) -> Scenario:
    return _build_example3(p, full=False)


def build_example3_full(p) -> Scenario:
    return _build_example3(p, full=True)


def _assemble(name, p, system, barrier, prior, truth, reference, tracking, grid) -> Scenario:
    check_truth_in_prior(system, prior, truth)
    init = p["initial"]
    x0 = np.asarray(init["x0"], dtype=float)
    if x0.shape != (system.dim,):
        raise ConfigurationError(f"x0 must have {system.dim} entries")
    k = system.n if system.diagonal else 1
    mu0 = np.atleast_1d(np.asarray(init["mu_hat0"], dtype=float))
    nu0 = np.atleast_1d(np.asarray(init["nu_hat0"], dtype=float))
    if mu0.shape != (k,) or nu0.shape != (k,):
        raise ConfigurationError(f"initial estimates need {k} entries each")
    if np.any(mu0 < 0) or np.any(nu0 < 0):
        raise ConfigurationError("initial estimates must be nonnegative")
    s = p["sim"]
    d = p["data"]
    plan = DatasetPlan(tuple(d["start"]), tuple(d["end"]), int(d["n_points"]), tuple(d["probe"]),
                       float(d["jitter"]))
    scenario = Scenario(
        name=name, system=system, barrier=barrier, prior=prior, truth=truth, nominal=_nominal(p["nominal"]),
        gains=_gains(p["gains"]), x0=x0, mu_hat0=mu0, nu_hat0=nu0, reference=reference, tracking=tracking,
        sim=SimConfig(float(s["dt"]), float(s["t_end"]), log_stride=int(s["log_stride"])),
        audit_grid=grid, dataset_plan=plan, data_driven_gains=dict(d.get("gains") or {}), params=p)
    scenario.controller_model()  # validates nominal values, overrides and gains
    return scenario


PRESETS = {
    "example1": (EXAMPLE1, build_example1),
    "example2": (EXAMPLE2, build_example2),
    "example3": (EXAMPLE3, build_example3),
    "example3-full": (EXAMPLE3_FULL, build_example3_full),
}


class UnknownScenario(KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown scenario {self.name!r}; known presets: {{{', '.join(PRESETS)}}}"


def preset_params(name: str) -> dict:
    if name not in PRESETS:
        raise UnknownScenario(name)
    return copy.deepcopy(PRESETS[name][0])


def merge_overrides(base: dict, overrides: dict, path: str = "") -> dict:
    """Recursively replace entries of ``base``; unknown keys are rejected."""
    out = copy.deepcopy(base)
    if not isinstance(overrides, dict):
        raise ConfigurationError(f"override {path or '<root>'} must be a mapping")
    for key, val in overrides.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in out:
            raise ConfigurationError(f"unknown override key {where!r}")
        if isinstance(out[key], dict) and out[key]:
            out[key] = merge_overrides(out[key], val, where)
        else:
            # leaves and free-form mappings (data.gains) are replaced whole
            out[key] = val
    return out


def load_overrides(path) -> dict:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: cannot parse override file ({exc})") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: override file must contain a mapping")
    return data


def load_scenario(name: str, overrides: dict | None = None) -> Scenario:
    params = preset_params(name)
    if overrides:
        params = merge_overrides(params, overrides)
    builder = PRESETS[name][1]
    try:
        return builder(params)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{name}: invalid override values ({exc})") from exc
