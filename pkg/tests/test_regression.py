import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.sim.records import AgentRecord, DayLog
from src.stats.regression import (
    DegenerateDataError,
    SwitchObservation,
    design_matrix,
    extract_observations,
    fit_switching,
    interpret_fit,
    log_likelihood,
    logistic_predict,
    score,
)

OD = ("O", "D")


def simulate_switches(rng, theta0, theta1, n, spread=20.0):
    delta = rng.uniform(-spread, spread, size=n)
    switched = rng.random(n) < logistic_predict(theta0, theta1, delta)
    return [SwitchObservation(float(d), bool(s)) for d, s in zip(delta, switched)]


def test_logistic_predict_examples():
    assert logistic_predict(0.0, 0.0, 5.0) == 0.5
    assert logistic_predict(-0.773, 0.0324, 0.0) == pytest.approx(0.3158, abs=1e-4)
    assert logistic_predict(-1.5, 0.05, 15.0) == pytest.approx(0.3208, abs=1e-4)
    assert logistic_predict(-1.0, 0.5, 60.0) > logistic_predict(-1.0, 0.5, 30.0) > 0.99
    assert logistic_predict(-1.0, 0.0, [1.0, 2.0]) == pytest.approx([0.2689, 0.2689], abs=1e-4)


def test_recovers_known_parameters():
    """50,000 draws recover theta within three standard errors"""
    rng = np.random.default_rng(17)
    fit = fit_switching(simulate_switches(rng, -0.773, 0.0324, 50_000, spread=40.0))

    assert fit.converged
    assert abs(fit.theta0 - (-0.773)) <= 3 * fit.std_errors[0]
    assert abs(fit.theta1 - 0.0324) <= 3 * fit.std_errors[1]
    assert max(fit.p_values) < 0.01
    assert all(0.0 <= p <= 1.0 for p in fit.p_values)
    assert fit.n_obs == 50_000


def test_null_slope_is_rarely_significant():
    """With theta1 = 0 the Wald test rejects at 5% in at most 10 of 100 samples"""
    rng = np.random.default_rng(23)
    rejections = sum(fit_switching(simulate_switches(rng, -0.5, 0.0, 500)).p_values[1] < 0.05 for _ in range(100))
    assert rejections <= 10


def test_separation_is_flagged():
    observations = [SwitchObservation(d, d > 0) for d in (-3.0, -2.0, -1.0, 1.0, 2.0, 3.0)]
    fit = fit_switching(observations)

    assert not fit.converged
    assert "complete separation" in fit.diagnostic


def test_quasi_separation_is_flagged():
    observations = [SwitchObservation(d, s) for d, s in ((-2.0, False), (0.0, False), (0.0, True), (2.0, True))]
    fit = fit_switching(observations)
    assert not fit.converged
    assert "quasi-complete" in fit.diagnostic


@pytest.mark.parametrize(
    "observations",
    [
        [SwitchObservation(1.0, True), SwitchObservation(2.0, True)],
        [SwitchObservation(1.0, False)] * 5,
        [SwitchObservation(1.0, True)],
    ],
)
def test_degenerate_samples_raise(observations):
    with pytest.raises(DegenerateDataError):
        fit_switching(observations)


def test_score_matches_finite_differences():
    rng = np.random.default_rng(4)
    X, y = design_matrix(simulate_switches(rng, -0.3, 0.1, 400))
    h = 1e-6
    for _ in range(20):
        theta = rng.normal(0.0, 0.5, size=2)
        numeric = np.array(
            [
                (log_likelihood(theta + h * e, X, y) - log_likelihood(theta - h * e, X, y)) / (2 * h)
                for e in np.eye(2)
            ]
        )
        assert np.allclose(score(theta, X, y), numeric, rtol=1e-5, atol=1e-4)


def test_shifting_delta_moves_only_the_intercept():
    rng = np.random.default_rng(9)
    observations = simulate_switches(rng, -1.0, 0.1, 3000)
    shifted = [SwitchObservation(o.delta_t + 10.0, o.switched) for o in observations]

    base, moved = fit_switching(observations), fit_switching(shifted)
    assert moved.theta1 == pytest.approx(base.theta1, abs=1e-6)
    assert moved.theta0 == pytest.approx(base.theta0 - 10.0 * base.theta1, abs=1e-6)


def test_log_likelihood_never_decreases():
    rng = np.random.default_rng(12)
    fit = fit_switching(simulate_switches(rng, 2.0, -0.3, 2000))
    path = np.array(fit.log_likelihood_path)

    assert len(path) == fit.iterations + 1
    assert np.all(np.diff(path) >= -1e-9 * np.abs(path[:-1]))
    assert fit.log_likelihood == path[-1]


def test_agrees_with_statsmodels():
    sm = pytest.importorskip("statsmodels.api")
    rng = np.random.default_rng(31)
    observations = simulate_switches(rng, -0.8, 0.06, 5000)
    X, y = design_matrix(observations)

    reference = sm.Logit(y, X).fit(disp=0)
    fit = fit_switching(observations)

    assert (fit.theta0, fit.theta1) == pytest.approx(tuple(reference.params), rel=1e-6)
    assert fit.std_errors == pytest.approx(tuple(reference.bse), rel=1e-4)
    assert fit.log_likelihood == pytest.approx(reference.llf, rel=1e-9)


def test_extract_observations_pairs_days():
    def log(day, choices, times):
        records = tuple(AgentRecord(agent=i, od=OD, choice=c) for i, c in enumerate(choices))
        flows = (choices.count(0), choices.count(1))
        return DayLog(day=day, records=records, route_flows={OD: flows}, route_times={OD: times})

    logs = [log(1, [0, 0, 1], (14.0, 10.0)), log(2, [1, 0, 1], (12.0, 12.0)), log(3, [1, 1, 1], (6.0, 18.0))]
    leaving_1 = extract_observations([logs], (0, 1))
    leaving_2 = extract_observations([logs], (1, 0))

    assert [(o.delta_t, o.switched) for o in leaving_1] == [(4.0, True), (4.0, False), (0.0, True)]
    assert [(o.delta_t, o.switched) for o in leaving_2] == [(-4.0, False), (0.0, False), (0.0, False)]
    assert len(extract_observations([logs, logs], (0, 1))) == 6


def test_extract_observation_from_a_congested_day():
    records_today = (AgentRecord(agent=0, od=OD, choice=0), AgentRecord(agent=1, od=OD, choice=1))
    records_next = (AgentRecord(agent=0, od=OD, choice=1), AgentRecord(agent=1, od=OD, choice=1))
    logs = [
        DayLog(day=1, records=records_today, route_flows={OD: (1, 1)}, route_times={OD: (30.0, 14.0)}),
        DayLog(day=2, records=records_next, route_flows={OD: (0, 2)}, route_times={OD: (6.0, 10.0)}),
    ]
    observations = extract_observations([logs], (0, 1))
    assert [(o.delta_t, o.switched) for o in observations] == [(16.0, True)]


def test_interpret_fit():
    rng = np.random.default_rng(2)
    insight = interpret_fit("p12", fit_switching(simulate_switches(rng, -1.0, 0.2, 2000)))
    assert insight["Interpretation"].startswith("Switching responds significantly")
    assert insight["Converged"]
