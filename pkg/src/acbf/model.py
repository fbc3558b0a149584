"""Partitioned uncertain systems, barriers, priors and plant truth.

The state is ``x = (x1; x2)`` with ``x1`` of length ``m`` (uncontrolled part,
possibly empty) and ``x2`` of length ``n`` (one entry per control channel).
The true plant is

    xdot = f(x) + f_u(x) + (0; f_theta(x)) + (0; g(x) + g_lambda(x)) u

where ``f_theta`` and ``g_lambda`` are linear in unknown parameter vectors
through known regressors. In ``"diagonal"`` mode ``g`` and ``g_lambda`` are
diagonal; in ``"full"`` mode every entry ``(i, j)`` carries its own regressor
``psi_ij`` and parameter ``lambda_ij``.

Controller-side code only ever sees :class:`UncertainSystem`,
:class:`UncertaintyPrior` and :class:`Barrier`. :class:`UncertaintyTruth` is
consumed by the plant simulator alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DIAGONAL = "diagonal"
FULL = "full"

Vector = np.ndarray
StateFn = Callable[[np.ndarray], np.ndarray]


class ConfigurationError(ValueError):
    """Scenario, bound or gain configuration is inconsistent."""


def _as_vectors(items) -> list[np.ndarray]:
    return [np.atleast_1d(np.asarray(v, dtype=float)) for v in items]


def _as_grid(items) -> list[list[np.ndarray]]:
    return [_as_vectors(row) for row in items]


@dataclass(frozen=True)
class UncertainSystem:
    """Known part of the dynamics plus regressors.

    ``f(x)`` returns the drift (length ``m + n``). ``g(x)`` returns the ``n``
    diagonal entries in diagonal mode and an ``n x n`` array in full mode.
    ``phi(x)`` returns the ``n`` drift regressors. ``psi(x)`` returns ``n``
    input regressors (diagonal) or an ``n x n`` nested list (full).
    """

    m: int
    n: int
    mode: str
    f: StateFn
    g: StateFn
    phi: Callable[[np.ndarray], Sequence[np.ndarray]]
    psi: Callable[[np.ndarray], Sequence]
    p: tuple[int, ...]
    q: tuple

    def __post_init__(self):
        if self.mode not in (DIAGONAL, FULL):
            raise ConfigurationError(f"unknown g mode {self.mode!r}")
        if self.n < 1 or self.m < 0:
            raise ConfigurationError("need n >= 1 and m >= 0")
        if len(self.p) != self.n:
            raise ConfigurationError("one drift regressor dimension per channel required")
        if self.mode == DIAGONAL and len(self.q) != self.n:
            raise ConfigurationError("one input regressor dimension per channel required")
        if self.mode == FULL and (len(self.q) != self.n
                                  or any(not isinstance(r, (tuple, list)) or len(r) != self.n for r in self.q)):
            raise ConfigurationError("full mode needs an n x n grid of input regressor dimensions")

    @property
    def dim(self) -> int:
        return self.m + self.n

    @property
    def diagonal(self) -> bool:
        return self.mode == DIAGONAL

    def lambda_blocks(self) -> list[tuple[int, int]]:
        """(row, column) of every lambda block, in stacking order."""
        if self.diagonal:
            return [(i, i) for i in range(self.n)]
        return [(i, j) for i in range(self.n) for j in range(self.n)]

    def input_matrix(self, x: np.ndarray, lambdas) -> np.ndarray:
        """``g(x) + g_lambda(x)`` for the given lambda values."""
        gx = np.asarray(self.g(x), dtype=float)
        psis = self.psi(x)
        n = self.n
        if self.diagonal:
            return np.diag([gx[i] + float(np.dot(lambdas[i], psis[i])) for i in range(n)])
        out = np.array(gx, dtype=float, copy=True).reshape(n, n)
        for i in range(n):
            for j in range(n):
                out[i, j] += float(np.dot(lambdas[i][j], psis[i][j]))
        return out

    def f_theta(self, x: np.ndarray, thetas) -> np.ndarray:
        phis = self.phi(x)
        return np.array([float(np.dot(thetas[i], phis[i])) for i in range(self.n)])


@dataclass(frozen=True)
class Barrier:
    """Scalar barrier ``h`` with its gradient.

    ``kind`` is ``"direct"`` or ``"extended"``. For an extended barrier the
    stored ``h`` is ``d/dt h_raw + alpha * h_raw`` and ``h_raw`` is kept for
    reporting.
    """

    h: Callable[[np.ndarray], float]
    grad: StateFn
    kind: str = "direct"
    alpha: float | None = None
    h_raw: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        if self.kind not in ("direct", "extended"):
            raise ConfigurationError(f"unknown barrier kind {self.kind!r}")
        if self.kind == "extended" and not (self.alpha and self.alpha > 0):
            raise ConfigurationError("extended barrier needs alpha > 0")


def barrier_value_and_grad(barrier: Barrier, x) -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    return float(barrier.h(x)), np.asarray(barrier.grad(x), dtype=float)


def linear_extended_barrier(raw_grad: Sequence[float], offset: float, m: int, alpha: float) -> Barrier:
    """Extended barrier for a raw barrier ``c . x1 + offset`` whose time
    derivative is ``c . x2`` (positions in ``x1``, velocities in ``x2``).

    Returns ``h_e = c . x2 + alpha * (c . x1 + offset)``.
    """
    c = np.asarray(raw_grad, dtype=float)
    if c.shape != (m,):
        raise ConfigurationError("raw barrier gradient must have length m")
    grad = np.concatenate([alpha * c, c])

    def h_raw(x):
        return float(c @ x[:m]) + offset

    def h(x):
        return float(c @ x[m:]) + alpha * h_raw(x)

    return Barrier(h=h, grad=lambda x: grad, kind="extended", alpha=alpha, h_raw=h_raw)


@dataclass(frozen=True)
class UncertaintyPrior:
    """Known bounds available to the controller.

    ``theta_lo/theta_hi`` hold one vector per channel. ``lambda_lo/lambda_hi``
    hold one vector per channel (diagonal) or an ``n x n`` grid (full).
    ``lipschitz`` is a Lipschitz constant of ``f_u`` per channel.
    """

    theta_lo: list
    theta_hi: list
    lambda_lo: list
    lambda_hi: list
    f_u_lo: StateFn
    f_u_hi: StateFn
    lipschitz: tuple[float, ...] = ()

    def lipschitz_for(self, channel: int) -> float:
        if not self.lipschitz:
            raise ConfigurationError("no Lipschitz constant configured for f_u")
        if len(self.lipschitz) == 1:
            return float(self.lipschitz[0])
        return float(self.lipschitz[channel])


@dataclass(frozen=True)
class UncertaintyTruth:
    """True parameters and unknown drift. Plant-side only."""

    theta: list
    lam: list
    f_u: StateFn


def make_prior(system: UncertainSystem, theta_lo, theta_hi, lambda_lo, lambda_hi,
               f_u_lo: StateFn, f_u_hi: StateFn, lipschitz=()) -> UncertaintyPrior:
    conv = _as_vectors if system.diagonal else _as_grid
    prior = UncertaintyPrior(
        theta_lo=_as_vectors(theta_lo), theta_hi=_as_vectors(theta_hi),
        lambda_lo=conv(lambda_lo), lambda_hi=conv(lambda_hi),
        f_u_lo=f_u_lo, f_u_hi=f_u_hi,
        lipschitz=tuple(float(v) for v in np.atleast_1d(lipschitz)) if lipschitz != () else (),
    )
    check_prior_shapes(system, prior)
    return prior


def make_truth(system: UncertainSystem, theta, lam, f_u: StateFn) -> UncertaintyTruth:
    conv = _as_vectors if system.diagonal else _as_grid
    return UncertaintyTruth(theta=_as_vectors(theta), lam=conv(lam), f_u=f_u)


def iter_lambda(system: UncertainSystem, lam) -> list[np.ndarray]:
    """Lambda blocks flattened in stacking order."""
    if system.diagonal:
        return list(lam)
    return [lam[i][j] for i, j in system.lambda_blocks()]


def lambda_dims(system: UncertainSystem) -> list[int]:
    if system.diagonal:
        return list(system.q)
    return [system.q[i][j] for i, j in system.lambda_blocks()]


def check_prior_shapes(system: UncertainSystem, prior: UncertaintyPrior) -> None:
    for i in range(system.n):
        lo, hi = prior.theta_lo[i], prior.theta_hi[i]
        if lo.shape != (system.p[i],) or hi.shape != (system.p[i],):
            raise ConfigurationError(f"theta bounds of channel {i} must have length {system.p[i]}")
        if np.any(lo > hi):
            raise ConfigurationError(f"theta bounds of channel {i} have lo > hi")
    for (lo, hi, q) in zip(iter_lambda(system, prior.lambda_lo), iter_lambda(system, prior.lambda_hi),
                           lambda_dims(system)):
        if lo.shape != (q,) or hi.shape != (q,):
            raise ConfigurationError(f"lambda bounds must have length {q}")
        if np.any(lo > hi):
            raise ConfigurationError("lambda bounds have lo > hi")


def check_truth_in_prior(system: UncertainSystem, prior: UncertaintyPrior, truth: UncertaintyTruth,
                         tol: float = 1e-9) -> None:
    """Abort when the plant truth violates the stated parameter bounds."""
    for i in range(system.n):
        th = truth.theta[i]
        lo, hi = prior.theta_lo[i], prior.theta_hi[i]
        if th.shape != lo.shape:
            raise ConfigurationError(f"theta_{i} has wrong length")
        bad = np.nonzero((th < lo - tol) | (th > hi + tol))[0]
        if bad.size:
            k = int(bad[0])
            raise ConfigurationError(
                f"truth theta[{i}][{k}]={th[k]:g} outside prior [{lo[k]:g}, {hi[k]:g}]")
    blocks = system.lambda_blocks()
    for b, (lam, lo, hi) in enumerate(zip(iter_lambda(system, truth.lam),
                                          iter_lambda(system, prior.lambda_lo),
                                          iter_lambda(system, prior.lambda_hi))):
        if lam.shape != lo.shape:
            raise ConfigurationError(f"lambda block {blocks[b]} has wrong length")
        bad = np.nonzero((lam < lo - tol) | (lam > hi + tol))[0]
        if bad.size:
            k = int(bad[0])
            raise ConfigurationError(
                f"truth lambda{blocks[b]}[{k}]={lam[k]:g} outside prior [{lo[k]:g}, {hi[k]:g}]")


def check_f_u_bounds(prior: UncertaintyPrior, samples: Sequence[np.ndarray]) -> None:
    for x in samples:
        lo, hi = np.asarray(prior.f_u_lo(x)), np.asarray(prior.f_u_hi(x))
        if np.any(lo > hi):
            raise ConfigurationError(f"f_u lower bound exceeds upper bound at x={x}")


def eval_plant_derivative(system: UncertainSystem, truth: UncertaintyTruth, x, u) -> np.ndarray:
    """True right-hand side of the plant."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape != (system.dim,) or u.shape != (system.n,):
        raise ConfigurationError(
            f"dimension mismatch: x{x.shape} u{u.shape} for m={system.m}, n={system.n}")
    out = np.asarray(system.f(x), dtype=float) + np.asarray(truth.f_u(x), dtype=float)
    out = out.copy()
    out[system.m:] += system.f_theta(x, truth.theta) + system.input_matrix(x, truth.lam) @ u
    return out


def vector_norm(v) -> float:
    return math.sqrt(float(np.dot(v, v)))


@dataclass
class PartitionedState:
    x1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x2: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(self.x1), np.atleast_1d(self.x2)]).astype(float)

    @classmethod
    def split(cls, x, m: int) -> PartitionedState:
        x = np.asarray(x, dtype=float)
        return cls(x[:m].copy(), x[m:].copy())
