import dataclasses
import math

import numpy as np
import pytest

from acbf.interval import Interval, IntervalRowVector
from acbf.model import ConfigurationError, eval_plant_derivative, make_prior
from acbf.scenarios import load_scenario
from acbf.sim import generate_dataset
from acbf.tightening import (
    DataInconsistent,
    Dataset,
    read_dataset_csv,
    rebuild_scenario,
    refine,
    refine_all,
    refine_channel,
    write_dataset_csv,
)

from conftest import const, scalar_system

ZERO = (lambda x: 0.0, lambda x: 0.0)


def exact_recovery():
    P0 = IntervalRowVector.from_bounds([-10.0], [10.0])
    Q0 = IntervalRowVector.from_bounds([-10.0], [10.0])
    return refine_channel([[0.0], [1.0]], [2.0, 3.0], [[1.0], [0.0]], [[0.0], [1.0]], P0, Q0, *ZERO, 0.0)


def test_exact_recovery():
    cb = exact_recovery()
    assert cb.P[0] == Interval(2.0, 2.0)
    assert cb.Q[0] == Interval(3.0, 3.0)
    assert cb.P_history[1][0] == Interval(2.0, 2.0)


def test_no_samples_returns_priors():
    P0 = IntervalRowVector.from_bounds([-1.0, -2.0], [1.0, 2.0])
    Q0 = IntervalRowVector.from_bounds([0.5], [3.0])
    cb = refine_channel([], [], [], [], P0, Q0, *ZERO, 1.0)
    assert cb.P == P0 and cb.Q == Q0 and cb.F_records == []
    assert cb.envelope([0.3]) == Interval(0.0, 0.0)


def test_zero_regressor_entry_keeps_previous_interval():
    P0 = IntervalRowVector.from_bounds([-10.0, -10.0], [10.0, 10.0])
    Q0 = IntervalRowVector.from_bounds([1.0], [1.0])
    cb = refine_channel([[0.0]], [4.0], [[0.0, 2.0]], [[0.0]], P0, Q0, *ZERO, 0.0)
    assert cb.P[0] == P0[0]
    assert cb.P[1] == Interval(2.0, 2.0)


def test_corrupted_sample_raises_with_index():
    P0 = IntervalRowVector.from_bounds([-1.0], [1.0])
    Q0 = IntervalRowVector.from_bounds([1.0], [2.0])
    ys = [0.5, 0.5, 50.0, 0.5]
    with pytest.raises(DataInconsistent) as err:
        refine_channel([[0.0]] * 4, ys, [[1.0]] * 4, [[0.0]] * 4, P0, Q0, *ZERO, 0.0)
    assert err.value.index == 2
    assert "sample 2" in str(err.value)


def test_lipschitz_violation_detected():
    P0 = IntervalRowVector.from_bounds([0.0], [0.0])
    Q0 = IntervalRowVector.from_bounds([0.0], [0.0])
    lo, hi = (lambda x: -5.0, lambda x: 5.0)
    # f_u jumps by 2 between points 0.1 apart while L = 1
    with pytest.raises(DataInconsistent, match="Lipschitz"):
        refine_channel([[0.0], [0.1]], [0.0, 2.0], [[0.0], [0.0]], [[0.0], [0.0]], P0, Q0, lo, hi, 1.0)


def test_envelope_at_sample_is_inside_record():
    P0 = IntervalRowVector.from_bounds([0.0], [0.0])
    Q0 = IntervalRowVector.from_bounds([0.0], [0.0])
    xs = [[0.0], [0.5], [1.0]]
    cb = refine_channel(xs, [0.2, 0.4, 0.3], [[0.0]] * 3, [[0.0]] * 3, P0, Q0,
                        lambda x: -1.0, lambda x: 1.0, 0.5)
    for x, F in cb.F_records:
        assert cb.envelope(x).issubset(F)


def test_envelope_without_lipschitz_is_constant():
    P0 = IntervalRowVector.from_bounds([-1.0], [1.0])
    Q0 = IntervalRowVector.from_bounds([0.0], [0.0])
    cb = refine_channel([[0.0], [3.0]], [0.5, 0.7], [[1.0], [1.0]], [[0.0], [0.0]], P0, Q0,
                        lambda x: -2.0, lambda x: 2.0, 0.0)
    vals = {(cb.envelope([x]).lo, cb.envelope([x]).hi) for x in np.linspace(-5, 5, 11)}
    assert len(vals) == 1


def test_example1_envelope_contains_true_drift():
    sc = load_scenario("example1")
    rng = np.random.default_rng(0)
    xs = rng.uniform(1.0, 4.0, size=10)
    us = np.where(np.arange(10) % 2, rng.uniform(-5, 5, size=10), 0.0)
    data = Dataset(xs[:, None], [eval_plant_derivative(sc.system, sc.truth, [x], [u]) for x, u in zip(xs, us)],
                   us[:, None])
    cb = refine(data, sc.system, sc.prior)
    for x in np.linspace(1.0, 4.0, 301):
        assert cb.envelope([x]).contains(math.cos(x), tol=1e-9)
    for k, t in enumerate(sc.truth.theta[0]):
        assert cb.P[k].contains(t, tol=1e-9)
    for k, t in enumerate(sc.truth.lam[0]):
        assert cb.Q[k].contains(t, tol=1e-9)


def test_nested_refinement_and_prefix_monotone():
    sc = load_scenario("example1")
    data = generate_dataset(sc, seed=3)
    cb = refine(data, sc.system, sc.prior)
    for a, b in zip(cb.P_history, cb.P_history[1:]):
        assert b.issubset(a)
    for a, b in zip(cb.Q_history, cb.Q_history[1:]):
        assert b.issubset(a)
    widths = [sum(refine(data.prefix(k), sc.system, sc.prior).P.widths) for k in range(len(data) + 1)]
    assert all(w2 <= w1 + 1e-12 for w1, w2 in zip(widths, widths[1:]))
    assert widths[-1] < widths[0]


def test_soundness_under_reordering():
    sc = load_scenario("example1")
    data = generate_dataset(sc, seed=1)
    rng = np.random.default_rng(9)
    for _ in range(5):
        cb = refine(data.reordered(rng.permutation(len(data))), sc.system, sc.prior)
        assert cb.P.contains(sc.truth.theta[0], tol=1e-9)
        assert cb.Q.contains(sc.truth.lam[0], tol=1e-9)


def test_full_mode_channels_recover_truth():
    sc = load_scenario("example3-full")
    x = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
    u = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    xd = [eval_plant_derivative(sc.system, sc.truth, xi, ui) for xi, ui in zip(x, u)]
    chans = refine_all(Dataset(x, xd, u), sc.system, sc.prior)
    for i, cb in enumerate(chans):
        assert sum(cb.P.widths) == 0.0 and sum(cb.Q.widths) == 0.0
        assert cb.P.mid == pytest.approx(list(sc.truth.theta[i]))


def test_dataset_csv_roundtrip(tmp_path):
    sc = load_scenario("example2")
    data = generate_dataset(sc, seed=4)
    path = tmp_path / "d.csv"
    write_dataset_csv(data, path)
    back = read_dataset_csv(path, 3, 1)
    for a, b in ((data.x, back.x), (data.xdot, back.xdot), (data.u, back.u), (data.t, back.t)):
        assert np.array_equal(a, b)


def test_dataset_csv_rejects_wrong_columns(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("t,x_1,xdot_1,u_1\n0,1,2,3\n")
    with pytest.raises(ConfigurationError, match="columns"):
        read_dataset_csv(path, 2, 1)


def test_dataset_dimension_check():
    sc = load_scenario("example1")
    with pytest.raises(ConfigurationError):
        refine(Dataset([[1.0, 2.0]], [[0.0, 0.0]], [[0.0]]), sc.system, sc.prior)


def degenerate_scenario(lam_lo, lam_hi, theta_lo=2.0, theta_hi=2.0):
    sc = load_scenario("example1")
    P0 = IntervalRowVector.from_bounds([theta_lo, theta_lo], [theta_hi, theta_hi])
    Q0 = IntervalRowVector.from_bounds([lam_lo, lam_lo], [lam_hi, lam_hi])
    cb = refine_channel([], [], [], [], P0, Q0, lambda x: -2.0, lambda x: 2.0, 1.0)
    return sc, cb


def test_rebuild_degenerate_intervals():
    sc, cb = degenerate_scenario(1.0, 1.0)
    new = rebuild_scenario(sc, [cb])
    model = new.controller_model()
    assert [float(v) for v in new.nominal.theta0[0]] == [2.0, 2.0]
    assert model.mu_bar[0] == 0.0 and model.nu_bar[0] == 0.0
    assert new.name == "example1+data"


def test_rebuild_symmetric_intervals():
    sc, cb = degenerate_scenario(1.0, 1.0, theta_lo=-3.0, theta_hi=3.0)
    new = rebuild_scenario(sc, [cb])
    assert [float(v) for v in new.nominal.theta0[0]] == [0.0, 0.0]
    assert new.controller_model().mu_bar[0] == pytest.approx(3.0 * math.sqrt(2))


def test_rebuild_rejects_gain_interval_through_zero():
    sys_ = scalar_system()
    prior = make_prior(sys_, [[-1.0]], [[1.0]], [[-1.0]], [[1.0]], const([0.0]), const([0.0]), [0.0])
    sc = load_scenario("example1")
    sc = dataclasses.replace(sc, system=sys_, prior=prior)
    cb = refine_channel([], [], [], [], IntervalRowVector.from_bounds([-1.0], [1.0]),
                        IntervalRowVector.from_bounds([-1.0], [1.0]), *ZERO, 0.0)
    with pytest.raises(ConfigurationError, match="contains 0"):
        rebuild_scenario(sc, [cb])


def test_rebuild_uses_envelope_for_drift_bounds():
    sc = load_scenario("example1")
    data = generate_dataset(sc, seed=2)
    cb = refine(data, sc.system, sc.prior)
    new = rebuild_scenario(sc, [cb])
    x = data.x[3]
    iv = cb.envelope(x)
    assert new.prior.f_u_lo(x)[0] == iv.lo and new.prior.f_u_hi(x)[0] == iv.hi
    assert new.controller_model().mu_bar[0] < 15.0
    with pytest.raises(ConfigurationError, match="unknown gain"):
        rebuild_scenario(sc, [cb], {"nope": 1.0})

