import math

import numpy as np
import pytest

from acbf.model import (
    DIAGONAL,
    FULL,
    Barrier,
    ConfigurationError,
    PartitionedState,
    UncertainSystem,
    barrier_value_and_grad,
    check_truth_in_prior,
    eval_plant_derivative,
    linear_extended_barrier,
    make_prior,
    make_truth,
)
from acbf.scenarios import load_scenario

from conftest import const, example1_model


def test_example1_plant_derivative():
    model, truth = example1_model()
    xdot = eval_plant_derivative(model.system, truth, [2.0], [0.0])
    expected = math.cos(2) + 2 * math.sin(2) + 8
    assert xdot[0] == pytest.approx(expected, abs=1e-12)
    assert xdot[0] == pytest.approx(9.4024, abs=1e-4)


def test_zero_everything_gives_zero_derivative():
    sys_ = UncertainSystem(m=1, n=2, mode=DIAGONAL, f=const([0, 0, 0]), g=const([0, 0]),
                           phi=lambda x: [x[:2], x[1:]], psi=lambda x: [np.ones(1), np.ones(1)],
                           p=(2, 2), q=(1, 1))
    truth = make_truth(sys_, [[0, 0], [0, 0]], [[0], [0]], const([0, 0, 0]))
    assert np.array_equal(eval_plant_derivative(sys_, truth, np.zeros(3), np.zeros(2)), np.zeros(3))


def test_full_mode_identity_input_map():
    sys_ = UncertainSystem(m=1, n=2, mode=FULL, f=const([0, 0, 0]), g=const(np.eye(2)),
                           phi=lambda x: [np.zeros(1), np.zeros(1)],
                           psi=lambda x: [[np.ones(1)] * 2] * 2, p=(1, 1), q=((1, 1), (1, 1)))
    truth = make_truth(sys_, [[0], [0]], [[[0], [0]], [[0], [0]]], const([0, 0, 0]))
    xdot = eval_plant_derivative(sys_, truth, np.zeros(3), [1.0, 0.0])
    assert np.array_equal(xdot, [0.0, 1.0, 0.0])


def test_dimension_mismatch_rejected():
    model, truth = example1_model()
    with pytest.raises(ConfigurationError):
        eval_plant_derivative(model.system, truth, [1.0, 2.0], [0.0])
    with pytest.raises(ConfigurationError):
        eval_plant_derivative(model.system, truth, [1.0], [0.0, 1.0])


def test_plant_derivative_decomposes_into_known_and_regressor_parts():
    sc = load_scenario("example3-full")
    sys_, truth = sc.system, sc.truth
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.normal(size=4)
        u = rng.normal(size=2)
        got = eval_plant_derivative(sys_, truth, x, u) - sys_.f(x) - truth.f_u(x)
        # independent evaluation from the raw parameter values
        th = truth.theta
        f_theta = np.array([th[0] @ x[:2], th[1] @ x[:2]])
        G = np.array([[truth.lam[i][j][0] for j in range(2)] for i in range(2)])
        assert np.allclose(got[:2], 0.0)
        assert np.allclose(got[2:], f_theta + G @ u, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("name,x,h,grad", [
    ("example1", [2.0], 1.0, [1.0]),
    ("example2", [100.0, 20.0, 22.0], 60.4, [1.0, 0.0, -1.8]),
])
def test_barrier_values(name, x, h, grad):
    sc = load_scenario(name)
    val, g = barrier_value_and_grad(sc.barrier, x)
    assert val == pytest.approx(h, abs=1e-12)
    assert np.allclose(g, grad)


def test_example3_raw_barrier_and_extension():
    sc = load_scenario("example3")
    x = np.array([0.0, 1.0, 0.0, 0.0])
    assert sc.barrier.h_raw(x) == pytest.approx(0.5)
    assert sc.barrier.kind == "extended" and sc.barrier.alpha == 10.0
    # h_e = (v2 - v1) + alpha * (x2 - x1 - 0.5)
    assert sc.barrier.h(x) == pytest.approx(5.0)
    assert sc.barrier.h([0.0, 1.0, 1.0, 0.0]) == pytest.approx(4.0)
    assert np.allclose(sc.barrier.grad(x), [-10.0, 10.0, -1.0, 1.0])


def test_extended_barrier_validation():
    with pytest.raises(ConfigurationError):
        linear_extended_barrier([1.0], 0.0, m=2, alpha=1.0)
    with pytest.raises(ConfigurationError):
        Barrier(h=lambda x: 0.0, grad=const([1.0]), kind="extended", alpha=0.0)
    with pytest.raises(ConfigurationError):
        Barrier(h=lambda x: 0.0, grad=const([1.0]), kind="other")


def test_truth_outside_prior_rejected():
    model, _ = example1_model()
    bad = make_truth(model.system, [[11.0, 0.0]], [[1.0, 2.0]], const([0.0]))
    with pytest.raises(ConfigurationError, match=r"theta\[0\]\[0\]"):
        check_truth_in_prior(model.system, model.prior, bad)
    bad = make_truth(model.system, [[0.0, 0.0]], [[1.0, -12.0]], const([0.0]))
    with pytest.raises(ConfigurationError, match="lambda"):
        check_truth_in_prior(model.system, model.prior, bad)


def test_prior_shape_and_order_checks():
    model, _ = example1_model()
    with pytest.raises(ConfigurationError):
        make_prior(model.system, [[-1]], [[1]], [[-1, -1]], [[1, 1]], const([0]), const([0]))
    with pytest.raises(ConfigurationError):
        make_prior(model.system, [[1, 1]], [[-1, -1]], [[-1, -1]], [[1, 1]], const([0]), const([0]))


def test_system_validation():
    with pytest.raises(ConfigurationError):
        UncertainSystem(m=0, n=1, mode="weird", f=const([0]), g=const([0]), phi=None, psi=None, p=(1,), q=(1,))
    with pytest.raises(ConfigurationError):
        UncertainSystem(m=0, n=2, mode=DIAGONAL, f=const([0]), g=const([0]), phi=None, psi=None, p=(1,), q=(1, 1))
    with pytest.raises(ConfigurationError):
        UncertainSystem(m=0, n=2, mode=FULL, f=const([0]), g=const([0]), phi=None, psi=None, p=(1, 1), q=(1, 1))


def test_partitioned_state_roundtrip():
    ps = PartitionedState.split([1.0, 2.0, 3.0], m=1)
    assert np.array_equal(ps.x1, [1.0]) and np.array_equal(ps.x2, [2.0, 3.0])
    assert np.array_equal(ps.full, [1.0, 2.0, 3.0])
