"""Adaptive CBF controller: bound constants, CBF condition terms, adaptive laws,
condition audits and the closed-form safe input, for diagonal and full input maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    Barrier,
    ConfigurationError,
    UncertainSystem,
    UncertaintyPrior,
    UncertaintyTruth,
    iter_lambda,
    lambda_dims,
)
from .nlp import ZERO_TOL, Branch, SolveDiagnostics, closed_form_solve, s_scalar, solve_scalar


class InfeasibleError(RuntimeError):
    """The admissible set K_BF is empty at the current state."""

    def __init__(self, message: str, x=None, branch: Branch = Branch.INFEASIBLE):
        super().__init__(message)
        self.x = None if x is None else np.asarray(x, dtype=float)
        self.branch = branch


@dataclass(frozen=True)
class NominalSelection:
    """Nominal parameter values and optional upward overrides of mu_bar, nu_bar.

    ``lambda0`` is a per-channel list (diagonal mode) or an ``n x n`` grid
    (full mode). Overrides are a scalar (full mode) or one value per channel;
    ``None`` entries keep the formula value.
    """

    theta0: list
    lambda0: list
    mu_bar_override: Sequence[float | None] | float | None = None
    nu_bar_override: Sequence[float | None] | float | None = None


@dataclass(frozen=True)
class GainConfig:
    """Positive tuning constants.

    Per-channel arrays have length ``n`` in diagonal mode and length 1 in
    full mode, where ``b`` holds the single constant ``b*``.
    """

    gamma: float
    eps1: float
    eps2: float
    gamma_theta: np.ndarray
    gamma_lambda: np.ndarray
    rho: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("gamma_theta", "gamma_lambda", "rho", "b"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        for name in ("gamma", "eps1", "eps2"):
            if not float(getattr(self, name)) > 0:
                raise ConfigurationError(f"gain {name} must be positive")
        for name in ("gamma_theta", "gamma_lambda", "rho", "b"):
            if not np.all(getattr(self, name) > 0):
                raise ConfigurationError(f"gain {name} must be positive")


@dataclass
class AdaptiveState:
    mu_hat: np.ndarray
    nu_hat: np.ndarray

    def __post_init__(self):
        self.mu_hat = np.atleast_1d(np.asarray(self.mu_hat, dtype=float))
        self.nu_hat = np.atleast_1d(np.asarray(self.nu_hat, dtype=float))


def estimate_count(system: UncertainSystem) -> int:
    """Number of (mu_hat, nu_hat) pairs: one per channel, or one in full mode."""
    return system.n if system.diagonal else 1


def _check_nominal(system: UncertainSystem, prior: UncertaintyPrior, nominal: NominalSelection):
    for i in range(system.n):
        th0 = np.asarray(nominal.theta0[i], dtype=float)
        if th0.shape != prior.theta_lo[i].shape:
            raise ConfigurationError(f"nominal theta_{i} has wrong length")
        if np.any(th0 < prior.theta_lo[i]) or np.any(th0 > prior.theta_hi[i]):
            raise ConfigurationError(f"nominal theta_{i}={th0} outside its bounds")
    for lam0, lo, hi in zip(iter_lambda(system, nominal.lambda0), iter_lambda(system, prior.lambda_lo),
                            iter_lambda(system, prior.lambda_hi)):
        lam0 = np.asarray(lam0, dtype=float)
        if lam0.shape != lo.shape:
            raise ConfigurationError("nominal lambda has wrong length")
        if np.any(lam0 < lo) or np.any(lam0 > hi):
            raise ConfigurationError(f"nominal lambda {lam0} outside its bounds [{lo}, {hi}]")


def worst_case_radius(lo, hi, nominal) -> float:
    """sqrt(sum_j max((hi_j - c_j)^2, (lo_j - c_j)^2)): the largest distance
    from ``nominal`` to a point of the box."""
    lo, hi, c = (np.asarray(v, dtype=float) for v in (lo, hi, nominal))
    return math.sqrt(float(np.sum(np.maximum((hi - c) ** 2, (lo - c) ** 2))))


def _apply_override(formula: np.ndarray, override, label: str) -> np.ndarray:
    if override is None:
        return formula
    vals = np.atleast_1d(np.asarray(
        [np.nan if v is None else v for v in np.atleast_1d(np.asarray(override, dtype=object))],
        dtype=float))
    if vals.shape != formula.shape:
        raise ConfigurationError(f"{label} override needs {formula.size} value(s)")
    out = formula.copy()
    for k, v in enumerate(vals):
        if math.isnan(v):
            continue
        if v < formula[k] * (1 - 1e-12):
            raise ConfigurationError(
                f"{label}[{k}] override {v:g} is below the bound formula value {formula[k]:g}; "
                "overrides may only raise it")
        out[k] = v
    return out


def compute_bound_constants(system: UncertainSystem, prior: UncertaintyPrior,
                            nominal: NominalSelection) -> tuple[np.ndarray, np.ndarray]:
    """Upper bounds on ``||theta - theta0||`` and ``||lambda - lambda0||``.

    Per channel in diagonal mode, over the stacked parameter vectors in full
    mode (returned as length-1 arrays).
    """
    _check_nominal(system, prior, nominal)
    if system.diagonal:
        mu = np.array([worst_case_radius(prior.theta_lo[i], prior.theta_hi[i], nominal.theta0[i])
                       for i in range(system.n)])
        nu = np.array([worst_case_radius(prior.lambda_lo[i], prior.lambda_hi[i], nominal.lambda0[i])
                       for i in range(system.n)])
    else:
        st = stack_general(system, prior, nominal, apply_overrides=False)
        mu, nu = np.array([st.mu_bar_formula]), np.array([st.nu_bar_formula])
    return (_apply_override(mu, nominal.mu_bar_override, "mu_bar"),
            _apply_override(nu, nominal.nu_bar_override, "nu_bar"))


def compute_M(hx, f_val, fu_lo, fu_hi) -> float:
    """Worst case of ``h_x (f + f_u)`` over the f_u bounds."""
    hx = np.asarray(hx, dtype=float)
    lo_t = hx * np.asarray(fu_lo, dtype=float)
    hi_t = hx * np.asarray(fu_hi, dtype=float)
    return float(hx @ np.asarray(f_val, dtype=float)) + float(np.sum(np.minimum(lo_t, hi_t)))


@dataclass(frozen=True)
class ControllerModel:
    """Everything the controller is allowed to know."""

    system: UncertainSystem
    barrier: Barrier
    prior: UncertaintyPrior
    nominal: NominalSelection
    gains: GainConfig
    mu_bar: np.ndarray = field(default=None)
    nu_bar: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mu_bar is None or self.nu_bar is None:
            mu, nu = compute_bound_constants(self.system, self.prior, self.nominal)
            object.__setattr__(self, "mu_bar", mu)
            object.__setattr__(self, "nu_bar", nu)
        k = estimate_count(self.system)
        g = self.gains
        if g.gamma_theta.size not in (1, k) or g.gamma_lambda.size not in (1, k):
            raise ConfigurationError(f"adaptation gains need {k} entries")
        if self.system.diagonal and (g.b.size not in (1, k) or g.rho.size not in (1, k)):
            raise ConfigurationError(f"b and rho need {k} entries")
        # broadcast scalars to per-channel arrays
        object.__setattr__(self, "gains", GainConfig(
            gamma=g.gamma, eps1=g.eps1, eps2=g.eps2,
            gamma_theta=np.broadcast_to(g.gamma_theta, (k,)).copy(),
            gamma_lambda=np.broadcast_to(g.gamma_lambda, (k,)).copy(),
            rho=np.broadcast_to(g.rho, (k,)).copy() if self.system.diagonal else g.rho,
            b=np.broadcast_to(g.b, (k,)).copy() if self.system.diagonal else g.b[:1].copy()))
        if not self.system.diagonal:
            object.__setattr__(self, "_stack", stack_general(self.system, self.prior, self.nominal))

    @property
    def adaptation_budget(self) -> float:
        """sum(mu_bar^2 / 2 gamma_theta + nu_bar^2 / 2 gamma_lambda)."""
        g = self.gains
        return float(np.sum(self.mu_bar ** 2 / (2 * g.gamma_theta) + self.nu_bar ** 2 / (2 * g.gamma_lambda)))


# ----------------------------------------------------------------------------
# diagonal input map
# ----------------------------------------------------------------------------

def compute_psi(model: ControllerModel, x) -> tuple[float, np.ndarray]:
    """CBF condition terms ``(Psi0, Psi1)`` for a diagonal input map."""
    x = np.asarray(x, dtype=float)
    return _diag_terms(model, x)[:2]


def _diag_terms(model: ControllerModel, x):
    sys_, g = model.system, model.gains
    if not sys_.diagonal:
        raise ConfigurationError("compute_psi needs a diagonal input map; use compute_psi_general")
    h = float(model.barrier.h(x))
    hx = np.asarray(model.barrier.grad(x), dtype=float)
    hx2 = hx[sys_.m:]
    M = compute_M(hx, sys_.f(x), model.prior.f_u_lo(x), model.prior.f_u_hi(x))
    phis = sys_.phi(x)
    psis = sys_.psi(x)
    gx = sys_.g(x)
    n = sys_.n
    drift = 0.0
    psi1 = np.empty(n)
    for i in range(n):
        drift += hx2[i] * float(np.dot(model.nominal.theta0[i], phis[i]))
        psi1[i] = hx2[i] * hx2[i] * (gx[i] + float(np.dot(model.nominal.lambda0[i], psis[i])))
    psi0 = M + drift - n * (g.eps1 + g.eps2) + g.gamma * (h - model.adaptation_budget)
    return psi0, psi1, h, hx2, phis, psis


def split_phi(psi0: float, psi1, rho) -> tuple[np.ndarray, np.ndarray]:
    """Split the joint constraint into one constraint per channel.

    Returns ``(Phi0, Phi1)`` with ``sum(Phi0) == Psi0`` and ``Phi1 == Psi1``.
    """
    psi1 = np.asarray(psi1, dtype=float)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), psi1.shape)
    n = psi1.size
    weights = rho * np.abs(psi1)
    total = float(np.sum(weights))
    if np.max(np.abs(psi1)) > ZERO_TOL and total > 0.0:
        phi0 = weights * (psi0 / total)
    else:
        phi0 = np.full(n, psi0 / n)
    return phi0, psi1.copy()


def kappas(mu_hat: float, nu_hat: float, phi_norm: float, psi_norm: float, hx2_abs: float,
           eps1: float) -> tuple[float, float]:
    a = mu_hat * phi_norm
    k1 = a * a / (a * hx2_abs + eps1)
    k2 = nu_hat * psi_norm * hx2_abs
    return k1, k2


def adapt_rates(model: ControllerModel, x, state: AdaptiveState, u0) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side of the adaptive laws for ``mu_hat`` and ``nu_hat``."""
    x = np.asarray(x, dtype=float)
    sys_, g = model.system, model.gains
    hx2 = np.asarray(model.barrier.grad(x), dtype=float)[sys_.m:]
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    if sys_.diagonal:
        phis, psis = sys_.phi(x), sys_.psi(x)
        drive_mu = np.array([abs(hx2[i]) * _norm(phis[i]) for i in range(sys_.n)])
        drive_nu = np.array([hx2[i] ** 2 * abs(u0[i]) * _norm(psis[i]) for i in range(sys_.n)])
    else:
        st = model._stack
        hn = _norm(hx2)
        drive_mu = np.array([hn * _norm(st.omega_phi(x))])
        drive_nu = np.array([hn * hn * abs(u0[0]) * _norm(st.omega_psi(x))])
    return (-g.gamma * state.mu_hat + g.gamma_theta * drive_mu,
            -g.gamma * state.nu_hat + g.gamma_lambda * drive_nu)


def _norm(v) -> float:
    v = np.asarray(v, dtype=float)
    return math.sqrt(float(v @ v))


@dataclass(frozen=True)
class ControlOutput:
    u: np.ndarray
    u0: np.ndarray
    mu_dot: np.ndarray
    nu_dot: np.ndarray
    h: float
    diagnostics: tuple[SolveDiagnostics, ...]


class AdaptiveCBFController:
    """Safe controller for diagonal input maps: one closed-form program per channel."""

    def __init__(self, model: ControllerModel):
        if not model.system.diagonal:
            raise ConfigurationError("AdaptiveCBFController needs a diagonal input map")
        self.model = model

    def __call__(self, x, mu_hat, nu_hat, ud) -> ControlOutput:
        model = self.model
        g = model.gains
        psi0, psi1, h, hx2, phis, psis = _diag_terms(model, x)
        phi0, phi1 = split_phi(psi0, psi1, g.rho)
        n = model.system.n
        u = np.empty(n)
        u0 = np.empty(n)
        mu_dot = np.empty(n)
        nu_dot = np.empty(n)
        diags = []
        for i in range(n):
            pn, qn = _norm(phis[i]), _norm(psis[i])
            ha = abs(hx2[i])
            k1, k2 = kappas(mu_hat[i], nu_hat[i], pn, qn, ha, g.eps1)
            ui, d = closed_form_solve(phi0[i], phi1[i], hx2[i], ud[i], k1, k2, g.b[i], g.eps2)
            if d.branch is Branch.INFEASIBLE:
                raise InfeasibleError(
                    f"K_BF empty in channel {i}: Phi0={phi0[i]:.6g}, Phi1={phi1[i]:.6g}", x, d.branch)
            u[i] = ui
            u0[i] = d.u0
            diags.append(d)
            mu_dot[i] = -g.gamma * mu_hat[i] + g.gamma_theta[i] * ha * pn
            nu_dot[i] = -g.gamma * nu_hat[i] + g.gamma_lambda[i] * ha * ha * abs(d.u0) * qn
        return ControlOutput(u, u0, mu_dot, nu_dot, h, tuple(diags))


# ----------------------------------------------------------------------------
# condition audits
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    margin: float

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0


def check_condition_iv(h0: float, state0: AdaptiveState, mu_bar, nu_bar, gains: GainConfig) -> ConditionReport:
    """Initial-condition requirement: ``h(x0)`` must cover the adaptation budget."""
    mu_bar, nu_bar = np.atleast_1d(mu_bar), np.atleast_1d(nu_bar)
    gt = np.broadcast_to(gains.gamma_theta, mu_bar.shape)
    gl = np.broadcast_to(gains.gamma_lambda, nu_bar.shape)
    budget = np.sum((state0.mu_hat ** 2 + mu_bar ** 2) / (2 * gt) + (state0.nu_hat ** 2 + nu_bar ** 2) / (2 * gl))
    return ConditionReport(float(h0) - float(budget))


@dataclass(frozen=True)
class KbfReport:
    checked: int
    skipped_outside: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_kbf_sampled(model: ControllerModel, grid: Sequence) -> KbfReport:
    """Audit non-emptiness of K_BF at sampled states of the safe set.

    Samples with ``h < 0`` are skipped and counted.
    """
    checked = skipped = 0
    violations = []
    for x in grid:
        x = np.asarray(x, dtype=float)
        if model.barrier.h(x) < 0:
            skipped += 1
            continue
        checked += 1
        if model.system.diagonal:
            psi0, psi1 = compute_psi(model, x)
            nonzero = bool(np.max(np.abs(psi1)) > ZERO_TOL)
        else:
            psi0, psi1 = compute_psi_general(model, x)
            nonzero = abs(psi1) > ZERO_TOL
        if not (nonzero or psi0 >= 0):
            violations.append((x, psi0, psi1))
    return KbfReport(checked, skipped, violations)


def parameter_mismatch(system: UncertainSystem, truth: UncertaintyTruth,
                       nominal: NominalSelection) -> tuple[np.ndarray, np.ndarray]:
    """True ``mu = ||theta - theta0||`` and ``nu = ||lambda - lambda0||``
    (per channel, or stacked in full mode)."""
    if system.diagonal:
        mu = [_norm(truth.theta[i] - np.asarray(nominal.theta0[i])) for i in range(system.n)]
        nu = [_norm(truth.lam[i] - np.asarray(nominal.lambda0[i])) for i in range(system.n)]
        return np.array(mu), np.array(nu)
    dth = np.concatenate([truth.theta[i] - np.asarray(nominal.theta0[i]) for i in range(system.n)])
    dla = np.concatenate([a - np.asarray(b) for a, b in zip(iter_lambda(system, truth.lam),
                                                           iter_lambda(system, nominal.lambda0))])
    return np.array([_norm(dth)]), np.array([_norm(dla)])


# ----------------------------------------------------------------------------
# full (non-diagonal) input map
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneralStack:
    """Stacked parameters and regressors for a full input map."""

    theta0: np.ndarray
    theta_lo: np.ndarray
    theta_hi: np.ndarray
    lambda0: np.ndarray
    lambda_lo: np.ndarray
    lambda_hi: np.ndarray
    mu_bar_formula: float
    nu_bar_formula: float
    mu_bar: float
    nu_bar: float
    system: UncertainSystem
    theta0_blocks: tuple
    lambda0_grid: tuple

    def omega_phi(self, x) -> np.ndarray:
        return np.concatenate([np.asarray(v, dtype=float) for v in self.system.phi(x)])

    def omega_psi(self, x) -> np.ndarray:
        psis = self.system.psi(x)
        if self.system.diagonal:
            return np.concatenate([np.asarray(v, dtype=float) for v in psis])
        return np.concatenate([np.asarray(psis[i][j], dtype=float) for i, j in self.system.lambda_blocks()])

    def f_theta0(self, x) -> np.ndarray:
        phis = self.system.phi(x)
        return np.array([float(np.dot(self.theta0_blocks[i], phis[i])) for i in range(self.system.n)])

    def g_lambda0(self, x) -> np.ndarray:
        n = self.system.n
        psis = self.system.psi(x)
        out = np.zeros((n, n))
        if self.system.diagonal:
            for i in range(n):
                out[i, i] = float(np.dot(self.lambda0_grid[i], psis[i]))
        else:
            for i in range(n):
                for j in range(n):
                    out[i, j] = float(np.dot(self.lambda0_grid[i][j], psis[i][j]))
        return out


def stack_vector(blocks) -> np.ndarray:
    return np.concatenate([np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks])


def stack_general(system: UncertainSystem, prior: UncertaintyPrior, nominal: NominalSelection,
                  apply_overrides: bool = True) -> GeneralStack:
    """Stack per-channel parameters, bounds and regressors.

    A diagonal system stacks its diagonal blocks, which makes ``n = 1``
    reduce exactly to the per-channel quantities.
    """
    _check_nominal(system, prior, nominal)
    if len(nominal.theta0) != system.n:
        raise ConfigurationError("one nominal theta per channel required")
    th0 = stack_vector(nominal.theta0)
    th_lo, th_hi = stack_vector(prior.theta_lo), stack_vector(prior.theta_hi)
    la0 = stack_vector(iter_lambda(system, nominal.lambda0))
    la_lo = stack_vector(iter_lambda(system, prior.lambda_lo))
    la_hi = stack_vector(iter_lambda(system, prior.lambda_hi))
    if th0.size != sum(system.p) or la0.size != sum(lambda_dims(system)):
        raise ConfigurationError("stacked dimensions disagree with regressor dimensions")
    mu_f = worst_case_radius(th_lo, th_hi, th0)
    nu_f = worst_case_radius(la_lo, la_hi, la0)
    mu, nu = mu_f, nu_f
    if apply_overrides:
        mu = float(_apply_override(np.array([mu_f]), _scalar_override(nominal.mu_bar_override), "mu_bar")[0])
        nu = float(_apply_override(np.array([nu_f]), _scalar_override(nominal.nu_bar_override), "nu_bar")[0])
    lam_grid = tuple(np.asarray(v, dtype=float) for v in nominal.lambda0) if system.diagonal else \
        tuple(tuple(np.asarray(v, dtype=float) for v in row) for row in nominal.lambda0)
    return GeneralStack(th0, th_lo, th_hi, la0, la_lo, la_hi, mu_f, nu_f, mu, nu, system,
                        tuple(np.asarray(v, dtype=float) for v in nominal.theta0), lam_grid)


def _scalar_override(ov):
    if ov is None:
        return None
    vals = np.atleast_1d(np.asarray(ov, dtype=object))
    if vals.size != 1:
        raise ConfigurationError("full mode takes a single mu_bar / nu_bar override")
    return vals[0]


def compute_psi_general(model: ControllerModel, x) -> tuple[float, float]:
    """Scalar CBF condition terms for a full input map."""
    x = np.asarray(x, dtype=float)
    return _general_terms(model, x)[:2]


def _general_terms(model: ControllerModel, x):
    sys_, g = model.system, model.gains
    st = model._stack if not sys_.diagonal else stack_general(sys_, model.prior, model.nominal)
    h = float(model.barrier.h(x))
    hx = np.asarray(model.barrier.grad(x), dtype=float)
    hx2 = hx[sys_.m:]
    M = compute_M(hx, sys_.f(x), model.prior.f_u_lo(x), model.prior.f_u_hi(x))
    gx = np.asarray(sys_.g(x), dtype=float)
    if sys_.diagonal:
        gx = np.diag(gx)
    G0 = gx.reshape(sys_.n, sys_.n) + st.g_lambda0(x)
    budget = float(model.mu_bar[0] ** 2 / (2 * g.gamma_theta[0]) + model.nu_bar[0] ** 2 / (2 * g.gamma_lambda[0]))
    psi0 = M + float(hx2 @ st.f_theta0(x)) - (g.eps1 + g.eps2) + g.gamma * (h - budget)
    psi1 = float(hx2 @ G0 @ hx2)
    return psi0, psi1, h, hx2, st


def solve_general(psi0: float, psi1: float, hx2, ud, kappa1g: float, kappa2g: float, b_star: float,
                  eps2: float) -> tuple[np.ndarray, SolveDiagnostics]:
    """Safe input ``u = s_g(u0*) hx2^T`` for a full input map.

    The nominal input enters through its least-squares coefficient on the
    ray spanned by ``hx2``.
    """
    hx2 = np.asarray(hx2, dtype=float)
    ud = np.asarray(ud, dtype=float)
    hn = _norm(hx2)
    if hn < ZERO_TOL:
        if psi0 < 0.0:
            return np.full(hx2.shape, np.nan), SolveDiagnostics(Branch.INFEASIBLE, math.nan, psi0)
        return np.zeros(hx2.shape), SolveDiagnostics(Branch.GRAD_ZERO, 0.0, psi0)
    ud_bar = float(hx2 @ ud) / (hn * hn)
    sol = solve_scalar(psi0, psi1, hn, ud_bar, kappa1g, kappa2g, b_star, eps2)
    if sol.branch is Branch.INFEASIBLE:
        return np.full(hx2.shape, np.nan), SolveDiagnostics(sol.branch, math.nan, sol.margin)
    return sol.s_value * hx2, SolveDiagnostics(sol.branch, sol.u0, sol.margin)


class GeneralAdaptiveCBFController:
    """Safe controller for full input maps: a single scalar program along ``hx2``."""

    def __init__(self, model: ControllerModel):
        if model.system.diagonal:
            raise ConfigurationError("GeneralAdaptiveCBFController needs a full input map")
        self.model = model

    def __call__(self, x, mu_hat, nu_hat, ud) -> ControlOutput:
        model = self.model
        g = model.gains
        psi0, psi1, h, hx2, st = _general_terms(model, x)
        hn = _norm(hx2)
        pn, qn = _norm(st.omega_phi(x)), _norm(st.omega_psi(x))
        k1, k2 = kappas(mu_hat[0], nu_hat[0], pn, qn, hn, g.eps1)
        u, d = solve_general(psi0, psi1, hx2, ud, k1, k2, g.b[0], g.eps2)
        if d.branch is Branch.INFEASIBLE:
            raise InfeasibleError(f"K_BF empty: Psi0={psi0:.6g}, Psi1={psi1:.6g}", x, d.branch)
        mu_dot = np.array([-g.gamma * mu_hat[0] + g.gamma_theta[0] * hn * pn])
        nu_dot = np.array([-g.gamma * nu_hat[0] + g.gamma_lambda[0] * hn * hn * abs(d.u0) * qn])
        return ControlOutput(u, np.array([d.u0]), mu_dot, nu_dot, h, (d,))


def make_controller(model: ControllerModel):
    if model.system.diagonal:
        return AdaptiveCBFController(model)
    return GeneralAdaptiveCBFController(model)


def s_general(u0: float, kappa1g: float, kappa2g: float, b_star: float, hx2_norm: float, eps2: float) -> float:
    return s_scalar(u0, kappa1g, kappa2g, b_star, hx2_norm, eps2)
