"""Closed-form solution of the scalar adaptive-CBF nonlinear program

    min_{u0}  (s(u0) - ud_bar)^2   s.t.  Psi0 + Psi1 * u0 >= 0

where ``s`` is the robustifying map

    s(y) = y + k1/b + k2^2 y^2 / (b (k2 |hx2| |y| + eps2)).

``s`` is strictly increasing when ``b |hx2| >= k2`` and has a single global
minimum at a negative ``y*`` otherwise, so the program is solved by case
analysis instead of an iterative solver.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

ZERO_TOL = 1e-12


class Branch(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    PSI1_ZERO_MONOTONE = "Psi1ZeroMonotone"
    GRAD_ZERO = "GradZero"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True, slots=True)
class SolveDiagnostics:
    branch: Branch
    u0: float
    certificate_margin: float


@dataclass(frozen=True, slots=True)
class ScalarSolution:
    s_value: float
    u0: float
    branch: Branch
    margin: float


def s_scalar(y: float, kappa1: float, kappa2: float, b: float, hx2_abs: float, eps2: float) -> float:
    return y + kappa1 / b + kappa2 * kappa2 * y * y / (b * (kappa2 * hx2_abs * abs(y) + eps2))


def ds_dy(y: float, kappa2: float, b: float, hx2_abs: float, eps2: float) -> float:
    """Analytic derivative of ``s`` (independent of ``kappa1``)."""
    b_bar = b * hx2_abs
    e_bar = eps2 / hx2_abs
    k = kappa2
    if y >= 0:
        return 1.0 + k * k * y * (k * y + 2 * e_bar) / (b_bar * (k * y + e_bar) ** 2)
    return ((b_bar - k) * k * k * y * y - 2 * k * e_bar * (b_bar - k) * y + b_bar * e_bar * e_bar) / (
        b_bar * (-k * y + e_bar) ** 2)


def is_monotone(kappa2: float, b: float, hx2_abs: float) -> bool:
    return b * hx2_abs - kappa2 >= -ZERO_TOL


def stationary_point(kappa2: float, b: float, hx2_abs: float, eps2: float) -> float:
    """Global minimiser of ``s`` when ``b |hx2| < kappa2``.

    Evaluated in the cancellation-free form
    ``-e_bar * b_bar / (k sqrt(k - b_bar) (sqrt(k) + sqrt(k - b_bar)))``.
    """
    b_bar = b * hx2_abs
    gap = kappa2 - b_bar
    if not gap > 0:
        raise ValueError(f"s is monotone for b_bar={b_bar!r} >= kappa2={kappa2!r}; no stationary point")
    e_bar = eps2 / hx2_abs
    rg = math.sqrt(gap)
    return -e_bar * b_bar / (kappa2 * rg * (math.sqrt(kappa2) + rg))


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    if a == 0.0:
        return [] if b == 0.0 else [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        if disc < -1e-13 * (b * b + abs(4.0 * a * c)):
            return []
        disc = 0.0
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return [0.0]
    return [q / a, c / q]


def s_inverse(target: float, kappa1: float, kappa2: float, b: float, hx2_abs: float,
              eps2: float) -> list[float]:
    """All real ``y`` with ``s(y) == target``, ascending."""
    t = target - kappa1 / b
    k = kappa2
    if k == 0.0:
        return [t]
    h, e = hx2_abs, eps2
    roots = []
    # y >= 0:  (b h k + k^2) y^2 - b (t h k - e) y - b t e = 0
    for y in _quadratic_roots(k * (b * h + k), -b * (t * h * k - e), -b * t * e):
        if y >= 0.0:
            roots.append(y)
    # y < 0:   (b h k - k^2) y^2 - b (t h k + e) y + b t e = 0
    for y in _quadratic_roots(k * (b * h - k), -b * (t * h * k + e), b * t * e):
        if y < 0.0:
            roots.append(y)
    return sorted(_polish(y, target, kappa1, kappa2, b, h, e) for y in roots)


def _polish(y, target, kappa1, kappa2, b, h, e):
    # one guarded Newton step; the quadratic formula is already accurate to a few ulps
    d = ds_dy(y, kappa2, b, h, e)
    if d == 0.0 or not math.isfinite(d):
        return y
    y_new = y - (s_scalar(y, kappa1, kappa2, b, h, e) - target) / d
    if (y_new >= 0.0) != (y >= 0.0):
        return y
    r_old = abs(s_scalar(y, kappa1, kappa2, b, h, e) - target)
    r_new = abs(s_scalar(y_new, kappa1, kappa2, b, h, e) - target)
    return y_new if r_new < r_old else y


def solve_scalar(psi0: float, psi1: float, hx2_abs: float, ud_bar: float, kappa1: float,
                 kappa2: float, b: float, eps2: float) -> ScalarSolution:
    """Solve the scalar program for ``hx2_abs > 0``.

    Returns the optimal value of ``s``, the intermediate input ``u0`` that
    attains it, the branch taken and the constraint margin ``psi0 + psi1*u0``.
    """
    def s(y):
        return s_scalar(y, kappa1, kappa2, b, hx2_abs, eps2)

    def feasible(y):
        return psi0 + psi1 * y >= 0.0

    def invert(target, pick):
        roots = s_inverse(target, kappa1, kappa2, b, hx2_abs, eps2)
        if not roots:
            return None
        return pick(roots)

    psi1_zero = abs(psi1) <= ZERO_TOL
    if psi1_zero and psi0 < 0.0:
        return ScalarSolution(math.nan, math.nan, Branch.INFEASIBLE, psi0)

    if is_monotone(kappa2, b, hx2_abs):
        if psi1_zero:
            u0 = invert(ud_bar, max)
            return _finish(ud_bar, u0, Branch.PSI1_ZERO_MONOTONE, psi0, 0.0)
        y_bar = -psi0 / psi1
        s_bar = s(y_bar)
        if psi1 > 0.0:
            branch, active = Branch.A1, ud_bar <= s_bar
        else:
            branch, active = Branch.A2, ud_bar >= s_bar
        if active:
            return _finish(s_bar, y_bar, branch, psi0, psi1)
        u0 = invert(ud_bar, max)
        return _finish(ud_bar, _clip(u0, y_bar, psi1), branch, psi0, psi1)

    y_star = stationary_point(kappa2, b, hx2_abs, eps2)
    if psi1_zero or feasible(y_star):
        s_min = s(y_star)
        if ud_bar <= s_min:
            return _finish(s_min, y_star, Branch.A3, psi0, psi1)
        roots = s_inverse(ud_bar, kappa1, kappa2, b, hx2_abs, eps2)
        if not roots:
            return _finish(s_min, y_star, Branch.A3, psi0, psi1)
        right, left = max(roots), min(roots)
        u0 = right if feasible(right) else left
        return _finish(ud_bar, u0, Branch.A3, psi0, psi1)

    # y* outside the admissible half-line: s is monotone on it
    y_bar = -psi0 / psi1
    s_bar = s(y_bar)
    if ud_bar <= s_bar:
        return _finish(s_bar, y_bar, Branch.A1, psi0, psi1)
    u0 = invert(ud_bar, max if psi1 > 0.0 else min)
    return _finish(ud_bar, _clip(u0, y_bar, psi1), Branch.A1, psi0, psi1)


def _clip(u0, y_bar, psi1):
    if u0 is None:
        return y_bar
    # the inverse lies in the admissible half-line analytically; guard round-off
    if psi1 > 0.0:
        return max(u0, y_bar)
    if psi1 < 0.0:
        return min(u0, y_bar)
    return u0


def _finish(s_value, u0, branch, psi0, psi1) -> ScalarSolution:
    if u0 is None:
        raise ArithmeticError("failed to invert s on an onto branch")
    return ScalarSolution(s_value, u0, branch, psi0 + psi1 * u0)


def closed_form_solve(phi0: float, phi1: float, hx2: float, ud: float, kappa1: float,
                      kappa2: float, b: float, eps2: float) -> tuple[float, SolveDiagnostics]:
    """Per-channel safe input ``u = hx2 * s(u0*)`` and its diagnostics.

    ``ud`` is the channel's nominal input (not yet divided by ``hx2``).
    """
    if abs(hx2) < ZERO_TOL:
        if phi0 < 0.0:
            return math.nan, SolveDiagnostics(Branch.INFEASIBLE, math.nan, phi0)
        return 0.0, SolveDiagnostics(Branch.GRAD_ZERO, 0.0, phi0)
    sol = solve_scalar(phi0, phi1, abs(hx2), ud / hx2, kappa1, kappa2, b, eps2)
    if sol.branch is Branch.INFEASIBLE:
        return math.nan, SolveDiagnostics(sol.branch, math.nan, sol.margin)
    if sol.branch is Branch.PSI1_ZERO_MONOTONE:
        return ud, SolveDiagnostics(sol.branch, sol.u0, sol.margin)
    return hx2 * sol.s_value, SolveDiagnostics(sol.branch, sol.u0, sol.margin)
