import math

import numpy as np
import pytest

from acbf.controller import ControllerModel, GainConfig, NominalSelection
from acbf.model import DIAGONAL, Barrier, UncertainSystem, make_prior, make_truth

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def const(values):
    v = np.asarray(values, dtype=float)
    return lambda x: v


def scalar_system(phi=None, psi=None, p=1, q=1):
    """``xdot = theta . phi(x) + (lambda . psi(x)) u`` with ``m = 0, n = 1``."""
    phi = phi or (lambda x: [np.ones(p)])
    psi = psi or (lambda x: [np.ones(q)])
    return UncertainSystem(m=0, n=1, mode=DIAGONAL, f=const([0.0]), g=const([0.0]), phi=phi, psi=psi,
                           p=(p,), q=(q,))


def example1_model(mu_bar=15.0, nu_bar=15.0):
    system = UncertainSystem(
        m=0, n=1, mode=DIAGONAL, f=const([0.0]), g=const([0.0]),
        phi=lambda x: [np.array([math.sin(x[0]), x[0] ** 2])],
        psi=lambda x: [np.array([1.0, x[0] ** 2])], p=(2,), q=(2,))
    prior = make_prior(system, [[-10, -10]], [[10, 10]], [[-10, -10]], [[10, 10]],
                       const([-2.0]), const([2.0]), [1.0])
    truth = make_truth(system, [[2.0, 2.0]], [[1.0, 2.0]], lambda x: np.array([math.cos(x[0])]))
    barrier = Barrier(h=lambda x: float(x[0]) - 1.0, grad=const([1.0]))
    gains = GainConfig(gamma=800.0, eps1=0.001, eps2=0.001, gamma_theta=[550.0], gamma_lambda=[300.0],
                       rho=[1.0], b=[0.5])
    nominal = NominalSelection([[0.0, 0.0]], [[0.5, 0.0]], [mu_bar], [nu_bar])
    return ControllerModel(system, barrier, prior, nominal, gains), truth


@pytest.fixture
def ex1():
    return example1_model()
