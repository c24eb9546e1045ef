"""RTA detection, ETA predictors, and the evaluation metrics."""

import math
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from portsim.core import Voyage, route_length_nm, utc
from portsim.eta import (
    KinematicPredictor,
    KinematicSummary,
    LengthMismatch,
    NotFitted,
    PredictionInput,
    RidgeEtaPredictor,
    ShapeMismatch,
    ZeroActual,
    ZeroSpeed,
    detect_rta,
    evaluate,
    filter_by_remaining_distance,
    predict_eta_kinematic,
    predict_eta_model,
)
from portsim.pipeline import predictor_benchmark


def _voyage(promised):
    return Voyage(vessel_id="V", route=((34.0, 128.0), (35.0, 129.0)),
                  start_time=promised - timedelta(days=2),
                  promised_eta=promised, max_speed=18.0, van_count=1000,
                  draught=9.0)


def test_detect_rta_on_time():
    promised = utc(2021, 3, 2)
    v = _voyage(promised)
    total = route_length_nm(v.route)
    hours_needed = total / v.max_speed
    now = promised - timedelta(hours=hours_needed * 2)
    assert detect_rta(v.route[0], now, v).on_time


def test_detect_rta_detected_with_required_speed_above_bound():
    promised = utc(2021, 3, 2)
    v = _voyage(promised)
    total = route_length_nm(v.route)
    now = promised - timedelta(hours=total / v.max_speed / 2)
    status = detect_rta(v.route[0], now, v)
    assert not status.on_time
    assert status.required_speed > v.max_speed
    assert status.deficit_minutes == pytest.approx(
        total / v.max_speed * 60 - total / v.max_speed / 2 * 60)


def test_detect_rta_past_promise():
    promised = utc(2021, 3, 2)
    v = _voyage(promised)
    status = detect_rta(v.route[0], promised + timedelta(hours=1), v)
    assert not status.on_time
    assert status.required_speed == math.inf
    total = route_length_nm(v.route)
    assert status.deficit_minutes == pytest.approx(total / v.max_speed * 60)


def test_detect_rta_at_destination_is_on_time():
    v = _voyage(utc(2021, 3, 2))
    assert detect_rta(v.route[-1], utc(2021, 3, 3), v).on_time


@given(st.floats(5.0, 30.0), st.floats(5.0, 30.0))
@settings(max_examples=40, deadline=None)
def test_detect_rta_monotone_in_feasible_bound(b1, b2):
    """A faster feasible bound can only improve the verdict."""
    promised = utc(2021, 3, 2)
    v = _voyage(promised)
    now = promised - timedelta(hours=3)
    lo, hi = sorted((b1, b2))
    slow = detect_rta(v.route[0], now, v, feasible_speed=lo)
    fast = detect_rta(v.route[0], now, v, feasible_speed=hi)
    assert (not slow.on_time) or fast.on_time


def test_predict_eta_kinematic():
    promised = utc(2021, 3, 2)
    v = _voyage(promised)
    now = utc(2021, 3, 1)
    pred = predict_eta_kinematic(v.route[0], now, v, recent_sog=10.0)
    total = route_length_nm(v.route)
    assert pred.eta == now + timedelta(hours=total / 10.0)
    assert pred.eta >= now
    with pytest.raises(ZeroSpeed):
        predict_eta_kinematic(v.route[0], now, v, recent_sog=0.0)


def test_predict_eta_model_clamps_to_now():
    class Negative:
        predictor_id = "neg"

        def predict(self, x):
            return -50.0

    now = utc(2021, 3, 1)
    pred = predict_eta_model(Negative(), PredictionInput(), now)
    assert pred.eta == now


def test_evaluate_hand_arithmetic():
    report = evaluate([12.0, 18.0], [10.0, 20.0], predictor_id="hand")
    assert report.rmse_minutes == pytest.approx(2.0)
    assert report.mape_percent == pytest.approx(15.0)
    assert report.n == 2


def test_evaluate_rmse_zero_iff_exact():
    assert evaluate([5.0, 7.0], [5.0, 7.0]).rmse_minutes == 0.0
    assert evaluate([5.0, 7.1], [5.0, 7.0]).rmse_minutes > 0.0


def test_evaluate_errors():
    with pytest.raises(LengthMismatch):
        evaluate([1.0], [1.0, 2.0])
    with pytest.raises(LengthMismatch):
        evaluate([], [])
    with pytest.raises(ZeroActual):
        evaluate([1.0], [0.0])


def test_kinematic_predictor_contract():
    p = KinematicPredictor()
    x = PredictionInput(kinematics=KinematicSummary(remaining_nm=30.0,
                                                    recent_sog=15.0))
    assert p.fit([]) is p
    assert p.predict(x) == pytest.approx(120.0)
    with pytest.raises(ShapeMismatch):
        p.predict(PredictionInput())
    with pytest.raises(ZeroSpeed):
        p.predict(PredictionInput(
            kinematics=KinematicSummary(remaining_nm=30.0, recent_sog=0.0)))


def _ridge_samples(seed=0):
    from portsim.pipeline import benchmark_config, build_samples
    from portsim.ingest import generate_traffic
    voyages, weather, records, arrivals = generate_traffic(
        benchmark_config(seed, n_vessels=6))
    return build_samples(voyages, records, weather, arrivals)


def test_ridge_fit_predict_deterministic_and_serializable():
    samples = _ridge_samples()
    assert len(samples) > 10
    model = RidgeEtaPredictor().fit(samples)
    x = samples[0][0]
    y1, y2 = model.predict(x), model.predict(x)
    assert y1 == y2
    clone = RidgeEtaPredictor.from_json(model.to_json())
    assert clone.predict(x) == pytest.approx(y1, rel=1e-12)


def test_ridge_not_fitted_and_shape_mismatch():
    with pytest.raises(NotFitted):
        RidgeEtaPredictor().predict(PredictionInput())
    with pytest.raises(ShapeMismatch):
        RidgeEtaPredictor().fit([])
    with pytest.raises(ShapeMismatch):
        RidgeEtaPredictor.from_json('{"version": 9}')


def test_ridge_rejects_wrong_channel_count():
    import numpy as np
    from portsim.grid import GridSpec, GridTensor
    samples = _ridge_samples()
    model = RidgeEtaPredictor().fit(samples)
    spec = GridSpec(center=(35.0, 129.0), half_extent_cells=1, t_steps=1)
    bad = GridTensor(values=np.zeros((1, 3, 3, 7)),
                     channels=tuple("c%d" % i for i in range(7)), spec=spec)
    with pytest.raises(ShapeMismatch):
        model.predict(PredictionInput(tensor=bad,
                                      kinematics=samples[0][0].kinematics))


def test_filter_by_remaining_distance():
    samples = _ridge_samples()
    near = filter_by_remaining_distance(samples, max_nm=50.0)
    far = filter_by_remaining_distance(samples, min_nm=50.0)
    assert len(near) + len(far) == len(samples)
    assert all(s[0].kinematics.remaining_nm < 50.0 for s in near)


def test_predictor_benchmark_orders_predictors():
    kin, ridge = predictor_benchmark(0)
    assert ridge.mape_percent < kin.mape_percent
    assert kin.n == ridge.n > 0
