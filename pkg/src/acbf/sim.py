"""Fixed-step closed-loop simulation of the true plant under the adaptive CBF controller."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .controller import (
    AdaptiveState,
    ConditionReport,
    ControllerModel,
    InfeasibleError,
    KbfReport,
    check_condition_iv,
    check_kbf_sampled,
    make_controller,
    parameter_mismatch,
)
from .model import ConfigurationError, check_truth_in_prior, eval_plant_derivative
from .tightening import ChannelBounds, Dataset, rebuild_scenario, refine_all

log = logging.getLogger(__name__)

RK4 = "rk4"
EULER = "euler"


class SimulationError(RuntimeError):
    def __init__(self, message: str, t: float | None = None, x=None):
        super().__init__(message)
        self.t = t
        self.x = None if x is None else np.asarray(x, dtype=float)
        self.trace: Trace | None = None


class AuditFailure(RuntimeError):
    """A premise of the safety guarantee does not hold for the scenario."""

    def __init__(self, message: str, condition: ConditionReport | None = None, kbf: KbfReport | None = None):
        super().__init__(message)
        self.condition = condition
        self.kbf = kbf


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    integrator: str = RK4
    log_stride: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError("dt must be positive")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ConfigurationError("t_end must be positive")
        if self.integrator not in (RK4, EULER):
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")
        if int(self.log_stride) < 1:
            raise ConfigurationError("log_stride must be a positive integer")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class ReferenceController:
    """Nominal (performance) controller ``u_d``.

    ``target(t)`` returns the reference and its time derivative. Kinds:

    * ``feedback_lin``: cancels the nominal model of the directly
      controlled states and imposes ``e' = -k e`` on ``x2 - r``.
    * ``velocity``: ``u = k (r - x2)`` scaled by the inverse nominal input gain.
    * ``pd``: positions in ``x1``, velocities in ``x2``; PD acceleration
      command, with the nominal drift cancelled when ``compensate`` is set.
    """

    kind: str
    gains: dict
    target: Callable[[float], tuple]

    def __call__(self, t: float, x: np.ndarray, model: ControllerModel) -> np.ndarray:
        sys_ = model.system
        r, r_dot = self.target(t)
        r, r_dot = np.atleast_1d(r), np.atleast_1d(r_dot)
        x2 = x[sys_.m:]
        G0 = sys_.input_matrix(x, model.nominal.lambda0)
        if self.kind == "velocity":
            return np.linalg.solve(G0, self.gains["k"] * (r - x2))
        drift = np.asarray(sys_.f(x), dtype=float)[sys_.m:] + sys_.f_theta(x, model.nominal.theta0)
        if self.kind == "feedback_lin":
            fu_mid = 0.5 * (np.asarray(model.prior.f_u_lo(x)) + np.asarray(model.prior.f_u_hi(x)))[sys_.m:]
            accel = r_dot - self.gains["k"] * (x2 - r)
            return np.linalg.solve(G0, accel - drift - fu_mid)
        if self.kind == "pd":
            accel = self.gains["kp"] * (r - x[:sys_.m]) + self.gains["kd"] * (r_dot - x2)
            if self.gains.get("compensate", True):
                accel = accel - drift
            return np.linalg.solve(G0, accel)
        raise ConfigurationError(f"unknown reference controller kind {self.kind!r}")


@dataclass(frozen=True)
class TrackingSpec:
    """Which state entries follow which reference entries, and when the
    reference itself lies in the safe set."""

    state_index: tuple
    labels: tuple
    inside: Callable[[np.ndarray], bool]


@dataclass
class Trace:
    columns: list
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    ud: np.ndarray
    h: np.ndarray
    h_bar: np.ndarray
    mu_hat: np.ndarray
    nu_hat: np.ndarray
    branches: list
    h_raw: np.ndarray
    ref: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def records(self):
        for k in range(len(self.t)):
            yield TraceRecord(self.t[k], self.x[k], self.u[k], self.ud[k], self.h[k], self.h_bar[k],
                              self.mu_hat[k], self.nu_hat[k], self.branches[k])


@dataclass(frozen=True)
class TraceRecord:
    t: float
    x: np.ndarray
    u: np.ndarray
    ud: np.ndarray
    h: float
    h_bar: float
    mu_hat: np.ndarray
    nu_hat: np.ndarray
    branches: tuple


@dataclass(frozen=True)
class Summary:
    scenario: str
    min_h: float
    min_h_bar: float
    min_certificate_slack: float
    rmse_inside: dict
    max_abs_u: float
    infeasible_count: int
    min_estimate: float
    steps: int
    dt: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SimResult:
    scenario: object
    config: SimConfig
    trace: Trace
    summary: Summary
    condition: ConditionReport
    kbf: KbfReport
    tightened: list[ChannelBounds] | None = None
    dataset: Dataset | None = None


def rk4_step(deriv: Callable, y: np.ndarray, dt: float, t: float = 0.0) -> np.ndarray:
    """One classical Runge-Kutta step of ``y' = deriv(t, y)``."""
    k1 = _finite(deriv(t, y), t, y)
    k2 = _finite(deriv(t + 0.5 * dt, y + 0.5 * dt * k1), t, y)
    k3 = _finite(deriv(t + 0.5 * dt, y + 0.5 * dt * k2), t, y)
    k4 = _finite(deriv(t + dt, y + dt * k3), t, y)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(deriv: Callable, y: np.ndarray, dt: float, t: float = 0.0) -> np.ndarray:
    return y + dt * _finite(deriv(t, y), t, y)


def _finite(v, t, y):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        size = float(np.max(np.abs(y))) if np.all(np.isfinite(y)) else math.inf
        raise SimulationError(f"non-finite derivative at t={t:.6g} (state diverging, max |z| = {size:.3g})", t, y)
    return v


def certificate_values(h, mu_hat, nu_hat, mu, nu, gamma_theta, gamma_lambda) -> np.ndarray:
    """``h - sum((mu - mu_hat)^2 / 2 gamma_theta + (nu - nu_hat)^2 / 2 gamma_lambda)``."""
    mu_hat = np.atleast_2d(mu_hat)
    nu_hat = np.atleast_2d(nu_hat)
    pen = np.sum((mu - mu_hat) ** 2 / (2 * gamma_theta) + (nu - nu_hat) ** 2 / (2 * gamma_lambda), axis=1)
    return np.asarray(h, dtype=float) - pen


def certificate_series(trace: Trace, truth, nominal, gains, system) -> list[tuple[float, float]]:
    """``(t, h_bar)`` pairs using the true parameter mismatch."""
    mu, nu = parameter_mismatch(system, truth, nominal)
    hb = certificate_values(trace.h, trace.mu_hat, trace.nu_hat, mu, nu, gains.gamma_theta, gains.gamma_lambda)
    return list(zip(trace.t.tolist(), hb.tolist()))


def certificate_slack(trace: Trace, gamma: float) -> np.ndarray:
    """``h_bar(t) - h_bar(0) exp(-gamma t)`` at every logged step."""
    return trace.h_bar - trace.h_bar[0] * np.exp(-gamma * (trace.t - trace.t[0]))


def audit(scenario) -> tuple[ConditionReport, KbfReport]:
    model = scenario.controller_model()
    cond = check_condition_iv(model.barrier.h(scenario.x0), AdaptiveState(scenario.mu_hat0, scenario.nu_hat0),
                              model.mu_bar, model.nu_bar, model.gains)
    kbf = check_kbf_sampled(model, scenario.audit_grid())
    return cond, kbf


def run_closed_loop(scenario, config: SimConfig | None = None, data_driven: bool = False, seed: int = 0,
                    dataset: Dataset | None = None) -> SimResult:
    """Integrate plant and estimates under the safe controller.

    With ``data_driven`` the controller first tightens its bounds from a
    dataset (generated from ``seed`` unless one is given).
    """
    config = config or scenario.sim
    tightened = None
    if data_driven:
        if dataset is None:
            dataset = generate_dataset(scenario, seed)
        tightened = refine_all(dataset, scenario.system, scenario.prior)
        scenario = rebuild_scenario(scenario, tightened, scenario.data_driven_gains)
    check_truth_in_prior(scenario.system, scenario.prior, scenario.truth)
    cond, kbf = audit(scenario)
    if not cond.passed or not kbf.passed:
        raise AuditFailure(f"{scenario.name}: initial-condition margin {cond.margin:.6g}, "
                           f"{len(kbf.violations)} K_BF violation(s)", cond, kbf)
    if config.dt * scenario.gains.gamma >= 2.5:
        warnings.warn(f"dt*gamma = {config.dt * scenario.gains.gamma:.3g} >= 2.5; the adaptive laws may be "
                      "under-resolved", RuntimeWarning, stacklevel=2)
    trace = _integrate(scenario, config)
    summary = summarize(trace, scenario, config)
    return SimResult(scenario, config, trace, summary, cond, kbf, tightened, dataset)


class _TraceBuilder:
    """Append-only row store for a trace; also yields a partial trace on abort."""

    def __init__(self, dim, n, k, mu, nu, gamma_theta, gamma_lambda):
        self.dim, self.n, self.k = dim, n, k
        self.mu, self.nu, self.gt, self.gl = mu, nu, gamma_theta, gamma_lambda
        self.rows = {key: [] for key in ("t", "x", "u", "ud", "h", "est", "br", "raw", "ref")}

    def add(self, t, z, out, ud, h_raw, ref):
        r = self.rows
        r["t"].append(t)
        r["x"].append(z[:self.dim].copy())
        r["u"].append(np.asarray(out.u, dtype=float).copy())
        r["ud"].append(np.asarray(ud, dtype=float).copy())
        r["h"].append(out.h)
        r["est"].append(z[self.dim:].copy())
        r["br"].append(tuple(d.branch.value for d in out.diagnostics))
        r["raw"].append(h_raw)
        r["ref"].append(np.atleast_1d(ref).astype(float))

    def __len__(self):
        return len(self.rows["t"])

    def build(self) -> Trace:
        r, dim, n, k = self.rows, self.dim, self.n, self.k
        est = np.array(r["est"])
        mu_hat, nu_hat = est[:, :k], est[:, k:]
        h = np.array(r["h"])
        h_bar = certificate_values(h, mu_hat, nu_hat, self.mu, self.nu, self.gt, self.gl)
        columns = (["t"] + [f"x_{i + 1}" for i in range(dim)] + [f"u_{i + 1}" for i in range(n)]
                   + [f"ud_{i + 1}" for i in range(n)] + ["h", "h_bar"]
                   + [f"mu_hat_{i + 1}" for i in range(k)] + [f"nu_hat_{i + 1}" for i in range(k)]
                   + [f"branch_{i + 1}" for i in range(len(r["br"][0]))] + ["h_raw"]
                   + [f"ref_{i + 1}" for i in range(len(r["ref"][0]))])
        return Trace(columns, np.array(r["t"]), np.array(r["x"]), np.array(r["u"]), np.array(r["ud"]), h, h_bar,
                     mu_hat, nu_hat, r["br"], np.array(r["raw"]), np.array(r["ref"]))


def _integrate(scenario, config: SimConfig) -> Trace:
    """Fixed-step integration of ``[x, mu_hat, nu_hat]``.

    On abort the raised :class:`SimulationError` carries the trace logged so
    far in its ``trace`` attribute.
    """
    model = scenario.controller_model()
    controller = make_controller(model)
    system, truth = scenario.system, scenario.truth
    reference = scenario.reference
    dim = system.dim
    k = len(np.atleast_1d(scenario.mu_hat0))
    mu, nu = parameter_mismatch(system, truth, model.nominal)
    h_raw_fn = model.barrier.h_raw
    builder = _TraceBuilder(dim, system.n, k, mu, nu, model.gains.gamma_theta, model.gains.gamma_lambda)

    last = {}

    def deriv(t, z):
        x = z[:dim]
        if not np.all(np.isfinite(z)):
            raise SimulationError(f"non-finite state at t={t:.6g}", t, x)
        ud = reference(t, x, model)
        try:
            out = controller(x, z[dim:dim + k], z[dim + k:], ud)
        except InfeasibleError as exc:
            raise SimulationError(f"{exc} at t={t:.6g}, x={x.tolist()}", t, x) from exc
        except ArithmeticError as exc:
            raise SimulationError(f"numeric overflow in the controller at t={t:.6g}", t, x) from exc
        last["out"], last["ud"] = out, ud
        xdot = eval_plant_derivative(system, truth, x, out.u)
        return np.concatenate([xdot, out.mu_dot, out.nu_dot])

    step = rk4_step if config.integrator == RK4 else euler_step
    z = np.concatenate([np.asarray(scenario.x0, dtype=float), np.atleast_1d(scenario.mu_hat0),
                        np.atleast_1d(scenario.nu_hat0)]).astype(float)
    n_steps = config.steps
    stride = int(config.log_stride)

    with np.errstate(all="ignore"):
        try:
            for j in range(n_steps + 1):
                t = j * config.dt
                if j % stride == 0 or j == n_steps:
                    deriv(t, z)
                    x = z[:dim]
                    builder.add(t, z, last["out"], last["ud"],
                                h_raw_fn(x) if h_raw_fn is not None else last["out"].h, reference.target(t)[0])
                if j == n_steps:
                    break
                z = step(deriv, z, config.dt, t)
        except SimulationError as exc:
            exc.trace = builder.build() if len(builder) else None
            raise
    return builder.build()


def summarize(trace: Trace, scenario, config: SimConfig) -> Summary:
    tracking: TrackingSpec = scenario.tracking
    inside = np.array([bool(tracking.inside(r)) for r in trace.ref])
    rmse = {}
    for idx, (si, label) in enumerate(zip(tracking.state_index, tracking.labels)):
        if inside.any():
            err = trace.x[inside, si] - trace.ref[inside, idx]
            rmse[label] = float(np.sqrt(np.mean(err ** 2)))
        else:
            rmse[label] = math.nan
    slack = certificate_slack(trace, scenario.gains.gamma)
    infeasible = sum(1 for br in trace.branches if "Infeasible" in br)
    return Summary(
        scenario=scenario.name,
        min_h=float(np.min(trace.h)),
        min_h_bar=float(np.min(trace.h_bar)),
        min_certificate_slack=float(np.min(slack)),
        rmse_inside=rmse,
        max_abs_u=float(np.max(np.abs(trace.u))),
        infeasible_count=infeasible,
        min_estimate=float(min(np.min(trace.mu_hat), np.min(trace.nu_hat))),
        steps=config.steps,
        dt=config.dt,
    )


def write_trace_csv(trace: Trace, path) -> None:
    """Header plus one row per logged step; floats in shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace.columns)
        for k in range(len(trace.t)):
            row = [repr(float(trace.t[k]))]
            row += [repr(float(v)) for v in trace.x[k]]
            row += [repr(float(v)) for v in trace.u[k]]
            row += [repr(float(v)) for v in trace.ud[k]]
            row += [repr(float(trace.h[k])), repr(float(trace.h_bar[k]))]
            row += [repr(float(v)) for v in trace.mu_hat[k]]
            row += [repr(float(v)) for v in trace.nu_hat[k]]
            row += list(trace.branches[k])
            row += [repr(float(trace.h_raw[k]))]
            row += [repr(float(v)) for v in trace.ref[k]]
            w.writerow(row)


def write_summary(summary: Summary, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary.as_dict(), fh, indent=2)
        fh.write("\n")


# ----------------------------------------------------------------------------
# datasets for the data-driven variant
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetPlan:
    """Exploratory sweep: states evenly spaced from ``start`` to ``end`` with
    seeded jitter; inputs alternate between zero and a seeded probe."""

    start: tuple
    end: tuple
    n_points: int
    probe: tuple = (10.0, 30.0)
    jitter: float = 0.0
    extra: dict = field(default_factory=dict)


def generate_dataset(scenario, seed: int = 0, n_points: int | None = None) -> Dataset:
    """Sample the true plant with exact derivatives."""
    plan: DatasetPlan = scenario.dataset_plan
    n_points = plan.n_points if n_points is None else int(n_points)
    rng = np.random.default_rng(seed)
    start = np.asarray(plan.start, dtype=float)
    end = np.asarray(plan.end, dtype=float)
    system, truth = scenario.system, scenario.truth
    xs, xds, us = [], [], []
    for k in range(n_points):
        frac = k / max(n_points - 1, 1)
        x = start + frac * (end - start)
        if plan.jitter:
            x = x + plan.jitter * rng.uniform(-1.0, 1.0, size=x.shape) * (end - start != 0)
        if k % 2 == 0:
            u = np.zeros(system.n)
        else:
            u = rng.uniform(plan.probe[0], plan.probe[1], size=system.n) * rng.choice([-1.0, 1.0], size=system.n)
        xs.append(x)
        us.append(u)
        xds.append(eval_plant_derivative(system, truth, x, u))
    t = np.arange(n_points, dtype=float)
    if n_points == 0:
        return Dataset.empty(system.dim, system.n)
    return Dataset(np.array(xs), np.array(xds), np.array(us), t)
