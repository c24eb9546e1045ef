"""RTA detection, pluggable ETA predictors, and evaluation metrics.

Predictors consume a :class:`PredictionInput` bundling the spatiotemporal
grid tensor with a kinematic summary (remaining distance, recent speed).
The kinematic baseline uses only the summary; the ridge reference model
combines the summary with weather features extracted from the tensor.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from .core import EmptyRoute, Voyage, route_remaining_nm


class EtaError(Exception):
    pass


class ZeroSpeed(EtaError):
    pass


class NotFitted(EtaError):
    pass


class ShapeMismatch(EtaError):
    pass


class LengthMismatch(EtaError):
    pass


class ZeroActual(EtaError):
    pass


@dataclass(frozen=True)
class RtaStatus:
    """Outcome of checking whether the promised ETA is still reachable."""

    on_time: bool
    required_speed: float | None = None    # knots, when detected
    deficit_minutes: float | None = None   # shortfall at the feasible bound

    @classmethod
    def ok(cls):
        return cls(on_time=True)

    @classmethod
    def detected(cls, required_speed, deficit_minutes):
        return cls(on_time=False, required_speed=required_speed,
                   deficit_minutes=deficit_minutes)


@dataclass(frozen=True)
class EtaPrediction:
    eta: object                 # UTC instant, never before the prediction instant
    predictor_id: str
    uncertainty_minutes: float | None = None


@dataclass(frozen=True)
class KinematicSummary:
    remaining_nm: float
    recent_sog: float           # knots


@dataclass(frozen=True)
class PredictionInput:
    """One predictor query: grid tensor and/or kinematic summary."""

    tensor: object = None       # GridTensor
    kinematics: KinematicSummary | None = None


@dataclass(frozen=True)
class MetricReport:
    predictor_id: str
    rmse_minutes: float
    mape_percent: float
    n: int

    def to_json_row(self) -> str:
        return json.dumps({"predictor_id": self.predictor_id,
                           "rmse_min": self.rmse_minutes,
                           "mape_pct": self.mape_percent,
                           "n": self.n}, sort_keys=True)


# -- RTA detection ------------------------------------------------------------

def detect_rta(pos, now, voyage: Voyage, feasible_speed=None) -> RtaStatus:
    """Check whether the promised ETA is reachable from pos at the given time.

    On time iff the remaining distance can be covered by the promised ETA at
    the feasible speed bound (default: voyage.max_speed).  Past the promise
    with distance still to run, the deficit is the full remaining sailing
    time at the bound.
    """
    bound = voyage.max_speed if feasible_speed is None else feasible_speed
    remaining = route_remaining_nm(voyage.route, pos)
    if remaining <= 1e-9:
        return RtaStatus.ok()
    hours_left = (voyage.promised_eta - now).total_seconds() / 3600.0
    if hours_left <= 0:
        return RtaStatus.detected(required_speed=math.inf,
                                  deficit_minutes=remaining / bound * 60.0)
    required = remaining / hours_left
    if required <= bound:
        return RtaStatus.ok()
    deficit = remaining / bound * 60.0 - hours_left * 60.0
    return RtaStatus.detected(required_speed=required, deficit_minutes=deficit)


def predict_eta_kinematic(pos, now, voyage: Voyage, recent_sog) -> EtaPrediction:
    """Dead-reckoning ETA: now + remaining distance / recent speed."""
    if recent_sog <= 0:
        raise ZeroSpeed("stationary vessel has no kinematic ETA")
    remaining = route_remaining_nm(voyage.route, pos)
    return EtaPrediction(eta=now + timedelta(hours=remaining / recent_sog),
                         predictor_id="kinematic")


def predict_eta_model(predictor, x: PredictionInput, now) -> EtaPrediction:
    """Model-based ETA; predicted remaining minutes are clamped to >= 0."""
    minutes = predictor.predict(x)
    minutes = max(0.0, minutes)
    return EtaPrediction(eta=now + timedelta(minutes=minutes),
                         predictor_id=predictor.predictor_id)


# -- predictor interface ------------------------------------------------------

class Predictor(ABC):
    """Contract for ETA predictors: fit on (input, label) pairs, then predict.

    predict after fit must be deterministic given the fitted state.
    """

    predictor_id = "abstract"

    @abstractmethod
    def fit(self, samples):
        """samples: sequence of (PredictionInput, EtaLabel)."""

    @abstractmethod
    def predict(self, x: PredictionInput) -> float:
        """Remaining minutes to arrival."""


class KinematicPredictor(Predictor):
    """Baseline with no learned state (the no-model reference)."""

    predictor_id = "kinematic"

    def fit(self, samples):
        return self

    def predict(self, x: PredictionInput) -> float:
        if x.kinematics is None:
            raise ShapeMismatch("kinematic predictor needs a kinematic summary")
        if x.kinematics.recent_sog <= 0:
            raise ZeroSpeed("stationary vessel has no kinematic ETA")
        return x.kinematics.remaining_nm / x.kinematics.recent_sog * 60.0


def _weather_features(tensor):
    """Occupancy-weighted mean of each weather channel, averaged over steps.

    Falls back to the plain spatial mean for steps with no occupancy.
    """
    occ = tensor.values[..., 0]
    feats = []
    for ci in range(1, tensor.values.shape[-1]):
        chan = tensor.values[..., ci]
        per_step = []
        for k in range(chan.shape[0]):
            w = occ[k]
            total = w.sum()
            if total > 0:
                per_step.append(float((chan[k] * w).sum() / total))
            else:
                per_step.append(float(chan[k].mean()))
        feats.append(sum(per_step) / len(per_step))
    return feats


class RidgeEtaPredictor(Predictor):
    """Closed-form ridge regression over kinematic + tensor weather features.

    Features per sample: intercept, the kinematic estimate, and for each
    weather channel w: [w, kin*w, kin*w^2].  The kinematic terms anchor the
    remaining-time scale; the weather interactions learn the systematic
    error a dead-reckoning estimate makes when conditions change along the
    remaining route.
    """

    predictor_id = "ridge-tensor"

    def __init__(self, alpha=1e-6):
        self.alpha = alpha
        self.coef_ = None
        self._n_channels = None

    def _features(self, x: PredictionInput):
        if x.kinematics is None or x.tensor is None:
            raise ShapeMismatch("ridge predictor needs tensor + kinematic summary")
        if x.kinematics.recent_sog <= 0:
            raise ZeroSpeed("stationary vessel has no kinematic estimate")
        kin = x.kinematics.remaining_nm / x.kinematics.recent_sog * 60.0
        row = [1.0, kin]
        for w in _weather_features(x.tensor):
            row.extend([w, kin * w, kin * w * w])
        return row

    def fit(self, samples):
        if not samples:
            raise ShapeMismatch("cannot fit on an empty sample set")
        self._n_channels = samples[0][0].tensor.values.shape[-1]
        X = np.array([self._features(x) for x, _ in samples])
        y = np.array([label.remaining_minutes for _, label in samples])
        # column scaling keeps one alpha meaningful across feature magnitudes
        scale = np.maximum(np.abs(X).max(axis=0), 1e-12)
        Xs = X / scale
        n = Xs.shape[1]
        beta = np.linalg.solve(Xs.T @ Xs + self.alpha * np.eye(n), Xs.T @ y)
        self.coef_ = beta / scale
        return self

    def predict(self, x: PredictionInput) -> float:
        if self.coef_ is None:
            raise NotFitted("fit the predictor before calling predict")
        if x.tensor is not None and x.tensor.values.shape[-1] != self._n_channels:
            raise ShapeMismatch(
                f"tensor has {x.tensor.values.shape[-1]} channels, "
                f"trained on {self._n_channels}")
        return float(np.dot(self._features(x), self.coef_))

    # -- serialization ---------------------------------------------------

    def to_json(self) -> str:
        if self.coef_ is None:
            raise NotFitted("nothing to serialize before fit")
        return json.dumps({"version": 1, "predictor_id": self.predictor_id,
                           "alpha": self.alpha,
                           "n_channels": self._n_channels,
                           "coef": list(self.coef_)}, sort_keys=True)

    @classmethod
    def from_json(cls, blob: str):
        data = json.loads(blob)
        if data.get("version") != 1 or data.get("predictor_id") != cls.predictor_id:
            raise ShapeMismatch(f"unrecognized predictor blob: {blob[:80]}")
        obj = cls(alpha=data["alpha"])
        obj.coef_ = np.array(data["coef"])
        obj._n_channels = data["n_channels"]
        return obj


PREDICTORS = {
    "kinematic": KinematicPredictor,
    "ridge-tensor": RidgeEtaPredictor,
}


# -- evaluation ---------------------------------------------------------------

def evaluate(predictions, actuals, predictor_id="unnamed") -> MetricReport:
    """RMSE and MAPE of predicted vs actual remaining minutes.

    MAPE is a hard error on any zero actual; silently skipping zeros would
    bias comparisons between predictors.
    """
    if len(predictions) != len(actuals):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(actuals)} actuals")
    if len(predictions) == 0:
        raise LengthMismatch("need at least one sample")
    if any(a == 0 for a in actuals):
        raise ZeroActual("MAPE undefined with zero actuals")
    sq = [(p - a) ** 2 for p, a in zip(predictions, actuals)]
    ape = [abs(p - a) / abs(a) for p, a in zip(predictions, actuals)]
    return MetricReport(predictor_id=predictor_id,
                        rmse_minutes=math.sqrt(sum(sq) / len(sq)),
                        mape_percent=100.0 * sum(ape) / len(ape),
                        n=len(predictions))


def filter_by_remaining_distance(samples, min_nm=0.0, max_nm=math.inf):
    """Optional distance-stratified evaluation bucket.

    Keeps samples whose kinematic summary's remaining distance at prediction
    time lies in [min_nm, max_nm).
    """
    return [s for s in samples
            if s[0].kinematics is not None
            and min_nm <= s[0].kinematics.remaining_nm < max_nm]
