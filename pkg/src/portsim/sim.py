"""Seeded discrete-event simulation of quay-side service under random RTAs.

The experiment: vessels that would arrive exactly on their promise are
randomly delayed.  Without prediction the port keeps the original berth
plan and the assigned cranes idle until the late vessel shows up.  With
prediction the delay is detected en route, a revised ETA (oracle arrival
plus a noisy residual) is produced, and the plan is rebuilt around it.
Throughput is measured in vans per crane-hour over committed crane time
(busy plus idle-waiting).

Randomness is keyed per (seed, vessel), independent of the RTA rate and
strategy, so rate sweeps are variance-coupled: raising the rate only adds
delayed vessels, it never re-rolls the existing ones.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import random
import statistics
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

from .berth import BerthPlan, build_initial_plan, replan_on_eta_update, validate_plan
from .core import utc

WITHOUT_PREDICTION = "without-prediction"
WITH_PREDICTION = "with-prediction"

# Committed calibration (see configs/calibrated_sim.kv).  The handling time
# and delay moments are pinned so that the expected mean throughput equals
# the 5%/30% reference endpoints and the expected mean punctuality deviation
# at a 30% RTA rate is 121.9 minutes.
DEFAULT_CALIBRATION = {
    "handling_seconds_per_van": 128.71792021229032,
    "delay_mean_minutes": 406.3333333333333,
    "delay_sigma": 0.7359683469639506,
    "prediction_residual_mean_minutes": 90.0,
    "prediction_residual_sigma": 0.6,
    "rta_detect_lead_minutes": 720.0,
    "n_vessels": 50,
    "van_count": 2655,
    "n_berths": 2,
    "crane_pool": 15,
    "cranes_per_vessel": 2,
    "horizon_hours": 1440.0,
}


class SimError(Exception):
    pass


class InfeasiblePlan(SimError):
    pass


class EmptySchedule(SimError):
    pass


class Empty(SimError):
    pass


class ZeroSpeedLeg(SimError):
    pass


class MismatchedVessels(SimError):
    pass


@dataclass(frozen=True)
class ScheduledVessel:
    vessel_id: str
    promised_eta: datetime
    van_count: int


@dataclass(frozen=True)
class DelayModel:
    """Distribution of RTA delay magnitudes (minutes)."""

    family: str = "lognormal"
    mean_minutes: float = DEFAULT_CALIBRATION["delay_mean_minutes"]
    dispersion: float = DEFAULT_CALIBRATION["delay_sigma"]

    def sample(self, rng) -> float:
        if self.family != "lognormal":
            raise SimError(f"unsupported delay family: {self.family}")
        mu = math.log(self.mean_minutes) - self.dispersion ** 2 / 2.0
        return rng.lognormvariate(mu, self.dispersion)


@dataclass(frozen=True)
class SimConfig:
    seed: int
    rta_rate: float
    vessels: tuple                      # ScheduledVessel, promised-ETA order
    strategy: str = WITHOUT_PREDICTION
    delay_model: DelayModel = field(default_factory=DelayModel)
    residual_mean_minutes: float = DEFAULT_CALIBRATION["prediction_residual_mean_minutes"]
    residual_sigma: float = DEFAULT_CALIBRATION["prediction_residual_sigma"]
    rta_detect_lead_minutes: float = DEFAULT_CALIBRATION["rta_detect_lead_minutes"]
    n_berths: int = DEFAULT_CALIBRATION["n_berths"]
    crane_pool: int = DEFAULT_CALIBRATION["crane_pool"]
    cranes_per_vessel: int = DEFAULT_CALIBRATION["cranes_per_vessel"]
    handling_seconds_per_van: float = DEFAULT_CALIBRATION["handling_seconds_per_van"]
    hotel_fuel_per_waiting_minute: float = 1.0
    horizon_hours: float = DEFAULT_CALIBRATION["horizon_hours"]

    def __post_init__(self):
        if not 0.0 <= self.rta_rate <= 1.0:
            raise SimError("rta_rate must lie in [0, 1]")
        if self.handling_seconds_per_van <= 0:
            raise SimError("handling_seconds_per_van must be > 0")
        if self.strategy not in (WITHOUT_PREDICTION, WITH_PREDICTION):
            raise SimError(f"unknown strategy: {self.strategy}")

    @property
    def handling_rate(self) -> float:
        """Vans per crane-hour at the baseline handling time."""
        return 3600.0 / self.handling_seconds_per_van

    def fingerprint(self) -> str:
        payload = {k: (v if not isinstance(v, (tuple, DelayModel)) else repr(v))
                   for k, v in self.__dict__.items()}
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SimReport:
    seed: int
    strategy: str
    rta_rate: float
    throughput_vans_per_crane_hour: float
    effective_seconds_per_van: float
    punctuality_mean: float
    punctuality_median: float
    punctuality_std: float
    total_waiting_minutes: float
    anchorage_waiting_minutes: dict     # vessel_id -> minutes
    emission_proxy: float
    vans_handled: int
    config_hash: str

    def metrics(self) -> dict:
        """Measured outputs only (excludes the strategy/config echo)."""
        return {
            "throughput_vans_per_crane_hour": self.throughput_vans_per_crane_hour,
            "effective_seconds_per_van": self.effective_seconds_per_van,
            "punctuality_mean": self.punctuality_mean,
            "punctuality_median": self.punctuality_median,
            "punctuality_std": self.punctuality_std,
            "total_waiting_minutes": self.total_waiting_minutes,
            "anchorage_waiting_minutes": dict(sorted(
                self.anchorage_waiting_minutes.items())),
            "emission_proxy": self.emission_proxy,
            "vans_handled": self.vans_handled,
        }

    def to_json(self) -> str:
        payload = dict(self.metrics())
        payload.update({"seed": self.seed, "strategy": self.strategy,
                        "rta_rate": self.rta_rate, "config_hash": self.config_hash})
        return json.dumps(payload, sort_keys=True)


# -- event queue --------------------------------------------------------------

# priority classes; lower fires first at equal times
EV_CRANE_SHIFT = 0
EV_DEPARTURE = 1
EV_RTA_REALIZED = 2
EV_ETA_UPDATED = 3
EV_SERVICE_COMPLETE = 4
EV_BERTHING_START = 5


class EventQueue:
    """Time-ordered queue; ties break on (priority class, insertion order)."""

    def __init__(self):
        self._heap = []
        self._seq = 0

    def push(self, time, priority, payload):
        heapq.heappush(self._heap, (time, priority, self._seq, payload))
        self._seq += 1

    def pop(self):
        time, priority, _, payload = heapq.heappop(self._heap)
        return time, priority, payload

    def __len__(self):
        return len(self._heap)


# -- statistics helpers -------------------------------------------------------

def punctuality_stats(deviations) -> dict:
    """Mean, lower-middle median, and population std of deviation minutes."""
    if len(deviations) == 0:
        raise Empty("no deviations")
    xs = sorted(deviations)
    n = len(xs)
    median = xs[(n - 1) // 2]           # lower-middle for even n
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / n
    return {"mean": mean, "median": median, "std": math.sqrt(var)}


def emission_proxy(legs, waiting_minutes, hotel_rate=1.0, k_cubic=1.0) -> float:
    """Fuel proxy: cubic propulsion law while sailing plus hotel load at anchor.

    Each sailing leg (distance nm, speed kn) burns k * d * v^2 (the cubic
    power law integrated over the leg time d/v); anchorage fuel is linear in
    waiting minutes.
    """
    total = 0.0
    for dist, speed in legs:
        if dist == 0:
            continue
        if speed <= 0:
            raise ZeroSpeedLeg(f"sailing leg of {dist} nm at speed {speed}")
        total += k_cubic * dist * speed ** 2
    return total + hotel_rate * waiting_minutes


# -- the simulation -----------------------------------------------------------

def _vessel_draws(seed, vessel_id, delay_model, res_mean, res_sigma):
    """Per-vessel randomness, independent of rate and strategy.

    Returns (uniform for the RTA coin, delay minutes, prediction residual
    minutes).  Delay and residual are always drawn so that changing the RTA
    rate only flips coins, never shifts other vessels' draws.
    """
    rng = random.Random(f"sim/{seed}/{vessel_id}")
    u = rng.random()
    delay = delay_model.sample(rng)
    mu_e = math.log(res_mean) - res_sigma ** 2 / 2.0
    residual = rng.lognormvariate(mu_e, res_sigma)
    return u, delay, residual


def make_schedule(seed, n_vessels=None, van_count=None, horizon_hours=None,
                  start=None) -> tuple:
    """Evenly spaced promised ETAs with a small per-seed jitter."""
    cal = DEFAULT_CALIBRATION
    n = cal["n_vessels"] if n_vessels is None else n_vessels
    vans = cal["van_count"] if van_count is None else van_count
    horizon = cal["horizon_hours"] if horizon_hours is None else horizon_hours
    t0 = utc(2021, 3, 1) if start is None else start
    rng = random.Random(f"schedule/{seed}")
    out = []
    for i in range(n):
        jitter = rng.uniform(-2.0, 2.0)
        eta = t0 + timedelta(hours=(i + 0.5) * horizon / max(n, 1) + jitter)
        out.append(ScheduledVessel(vessel_id=f"S{i:03d}", promised_eta=eta,
                                   van_count=vans))
    return tuple(out)


def initial_plan_for(cfg: SimConfig) -> BerthPlan:
    from .berth import Berth
    berths = tuple(Berth(berth_id=f"B{k}", crane_slots=max(cfg.cranes_per_vessel, 4))
                   for k in range(cfg.n_berths))
    return build_initial_plan(cfg.vessels, berths, cfg.crane_pool,
                              cfg.handling_rate, cfg.cranes_per_vessel)


def run_simulation(cfg: SimConfig, plan0: BerthPlan) -> SimReport:
    """Run one seeded scenario to completion and report quay-side outcomes."""
    if not cfg.vessels:
        raise EmptySchedule("no vessels scheduled")
    problems = validate_plan(plan0)
    if problems:
        raise InfeasiblePlan("; ".join(problems))

    promised = {v.vessel_id: v.promised_eta for v in cfg.vessels}
    vans = {v.vessel_id: v.van_count for v in cfg.vessels}

    arrivals, predicted = {}, {}
    for v in cfg.vessels:
        u, delay, residual = _vessel_draws(cfg.seed, v.vessel_id,
                                           cfg.delay_model,
                                           cfg.residual_mean_minutes,
                                           cfg.residual_sigma)
        if u < cfg.rta_rate:
            arrivals[v.vessel_id] = v.promised_eta + timedelta(minutes=delay)
            # the revised ETA can never precede the original promise: an RTA
            # means the vessel is late, so the prediction is clamped there
            pred = arrivals[v.vessel_id] - timedelta(minutes=residual)
            predicted[v.vessel_id] = max(v.promised_eta, pred)
        else:
            arrivals[v.vessel_id] = v.promised_eta

    plan = plan0
    queue = EventQueue()
    t0 = min(promised.values()) - timedelta(hours=48)

    for v in cfg.vessels:
        depart = v.promised_eta - timedelta(hours=36)
        queue.push(depart, EV_DEPARTURE, ("depart", v.vessel_id))
    for a in plan.assignments:
        queue.push(a.service_start, EV_BERTHING_START, ("berth", a.vessel_id))
    horizon_end = max(promised.values()) + timedelta(days=30)
    day = t0
    shift = 0
    while day <= horizon_end:
        queue.push(day, EV_CRANE_SHIFT, ("shift", shift))
        day += timedelta(days=1)
        shift += 1

    # 15 cranes available, alternating 13/14 in operation (mean 13.5)
    operating = 13
    cranes_in_use = 0
    berth_busy_until = {b.berth_id: t0 for b in plan.berths}
    started, completed = set(), set()
    committed_from = {}
    service_start_actual, service_end_actual = {}, {}

    while len(queue):
        now, _, payload = queue.pop()
        kind = payload[0]

        if kind == "shift":
            operating = 13 if payload[1] % 2 == 0 else 14
            operating = min(operating, cfg.crane_pool)

        elif kind == "depart":
            vid = payload[1]
            if arrivals[vid] > promised[vid]:
                detect = promised[vid] - timedelta(minutes=cfg.rta_detect_lead_minutes)
                queue.push(max(now, detect), EV_RTA_REALIZED, ("rta", vid))

        elif kind == "rta":
            vid = payload[1]
            if cfg.strategy == WITH_PREDICTION:
                queue.push(now, EV_ETA_UPDATED, ("eta", vid))

        elif kind == "eta":
            vid = payload[1]
            plan = replan_on_eta_update(plan, vid, predicted[vid],
                                        now=now, lenient=True)
            for a in plan.assignments:
                if a.vessel_id not in started:
                    queue.push(max(now, a.service_start), EV_BERTHING_START,
                               ("berth", a.vessel_id))

        elif kind == "berth":
            vid = payload[1]
            if vid in started:
                continue
            a = plan.assignment_for(vid)
            if a.service_start > now:
                queue.push(a.service_start, EV_BERTHING_START, ("berth", vid))
                continue
            free_at = berth_busy_until[a.berth_id]
            if free_at > now:
                queue.push(free_at, EV_BERTHING_START, ("berth", vid))
                continue
            if cranes_in_use + a.cranes_assigned > operating:
                queue.push(now + timedelta(hours=1), EV_BERTHING_START,
                           ("berth", vid))
                continue
            commit = max(a.service_start, free_at)
            if arrivals[vid] > now:
                committed_from[vid] = commit
                berth_busy_until[a.berth_id] = arrivals[vid]  # held for the vessel
                queue.push(arrivals[vid], EV_BERTHING_START, ("berth", vid))
                continue
            started.add(vid)
            committed_from.setdefault(vid, commit)
            duration = timedelta(
                seconds=vans[vid] * cfg.handling_seconds_per_van / a.cranes_assigned)
            service_start_actual[vid] = now
            service_end_actual[vid] = now + duration
            berth_busy_until[a.berth_id] = now + duration
            cranes_in_use += a.cranes_assigned
            queue.push(now + duration, EV_SERVICE_COMPLETE,
                       ("complete", vid, a.cranes_assigned))

        elif kind == "complete":
            vid, cranes = payload[1], payload[2]
            completed.add(vid)
            cranes_in_use -= cranes

    # -- reporting -------------------------------------------------------
    crane_seconds = 0.0
    waiting = {}
    deviations = []
    vans_handled = 0
    for v in cfg.vessels:
        vid = v.vessel_id
        if vid not in completed:
            continue
        vans_handled += vans[vid]
        a = plan.assignment_for(vid)
        span = (service_end_actual[vid] - committed_from[vid]).total_seconds()
        crane_seconds += a.cranes_assigned * span
        waiting[vid] = max(
            0.0, (service_start_actual[vid] - arrivals[vid]).total_seconds() / 60.0)
        believed = plan.eta_map[vid]
        deviations.append((arrivals[vid] - believed).total_seconds() / 60.0)

    if vans_handled == 0:
        raise SimError("no vessel completed service")
    crane_hours = crane_seconds / 3600.0
    throughput = vans_handled / crane_hours
    stats = punctuality_stats(deviations)
    total_wait = sum(waiting.values())

    return SimReport(
        seed=cfg.seed, strategy=cfg.strategy, rta_rate=cfg.rta_rate,
        throughput_vans_per_crane_hour=throughput,
        effective_seconds_per_van=crane_seconds / vans_handled,
        punctuality_mean=stats["mean"], punctuality_median=stats["median"],
        punctuality_std=stats["std"], total_waiting_minutes=total_wait,
        anchorage_waiting_minutes=waiting,
        emission_proxy=emission_proxy([], total_wait,
                                      hotel_rate=cfg.hotel_fuel_per_waiting_minute),
        vans_handled=vans_handled, config_hash=cfg.fingerprint())


def run_scenario(seed, rta_rate, strategy, **overrides) -> SimReport:
    """Convenience: calibrated schedule + initial plan + one simulation run."""
    vessels = make_schedule(seed,
                            n_vessels=overrides.pop("n_vessels", None),
                            van_count=overrides.pop("van_count", None),
                            horizon_hours=overrides.get("horizon_hours"))
    cfg = SimConfig(seed=seed, rta_rate=rta_rate, strategy=strategy,
                    vessels=vessels, **overrides)
    return run_simulation(cfg, initial_plan_for(cfg))


# -- sweeps and analysis tables -----------------------------------------------

def sweep(rates, seeds, **overrides):
    """Mean throughput/punctuality per (rate, strategy) over the seed list.

    Returns rows of dicts in rate-major, strategy-minor order.
    """
    if not rates or not seeds:
        raise SimError("rates and seeds must be non-empty")
    rows = []
    for rate in rates:
        for strategy in (WITHOUT_PREDICTION, WITH_PREDICTION):
            reports = [run_scenario(seed, rate, strategy, **dict(overrides))
                       for seed in seeds]
            rows.append({
                "rta_rate": rate,
                "strategy": strategy,
                "mean_throughput_vans_per_crane_hour": statistics.fmean(
                    r.throughput_vans_per_crane_hour for r in reports),
                "mean_seconds_per_van": statistics.fmean(
                    r.effective_seconds_per_van for r in reports),
                "mean_punctuality_minutes": statistics.fmean(
                    r.punctuality_mean for r in reports),
                "mean_total_waiting_minutes": statistics.fmean(
                    r.total_waiting_minutes for r in reports),
                "n_seeds": len(seeds),
            })
    return rows


def revenue_analysis(thr_without, thr_with, crane_counts,
                     hours_per_day=24, days=365, value_per_van=70.0):
    """Daily/annual extra vans and revenue per crane count (reference table).

    Row k: daily vans at each throughput, their difference, the annual van
    difference, and its value at value_per_van.
    """
    rows = []
    for k in crane_counts:
        daily_a = thr_without * hours_per_day * k
        daily_b = thr_with * hours_per_day * k
        day_diff = daily_b - daily_a
        year_diff = day_diff * days
        rows.append({
            "cranes": k,
            "daily_vans_without": daily_a,
            "daily_vans_with": daily_b,
            "day_difference": day_diff,
            "year_difference": year_diff,
            "additional_revenue": year_diff * value_per_van,
        })
    return rows


def waiting_time_report(waits_without: dict, waits_with: dict):
    """Per-vessel and aggregate anchorage-waiting comparison of two strategies."""
    if not waits_without and not waits_with:
        raise Empty("no vessels to compare")
    if set(waits_without) != set(waits_with):
        raise MismatchedVessels("strategies cover different vessel sets")
    rows = [{"vessel_id": vid,
             "waiting_without": waits_without[vid],
             "waiting_with": waits_with[vid],
             "reduction_minutes": waits_without[vid] - waits_with[vid]}
            for vid in sorted(waits_without)]
    total_a = sum(waits_without.values())
    total_b = sum(waits_with.values())
    reduction_pct = 0.0 if total_a == 0 else 100.0 * (total_a - total_b) / total_a
    return {"per_vessel": rows, "total_without": total_a, "total_with": total_b,
            "reduction_percent": reduction_pct}


# -- calibration --------------------------------------------------------------

def calibrate(seeds=range(8), tolerance=0.03,
              targets=(27.77, 26.82)):
    """Grid-search delay moments and handling time to hit the 5%/30% targets.

    Searches a small neighbourhood of the committed defaults and returns the
    first (best) parameter set whose WithoutPrediction mean throughputs land
    within ``tolerance`` of the targets at both rates.
    """
    cal = dict(DEFAULT_CALIBRATION)
    best = None
    for s_scale in (1.0, 0.99, 1.01):
        for d_scale in (1.0, 0.92, 1.08):
            s0 = cal["handling_seconds_per_van"] * s_scale
            dmean = cal["delay_mean_minutes"] * d_scale
            model = DelayModel(mean_minutes=dmean, dispersion=cal["delay_sigma"])
            means = []
            for rate in (0.05, 0.30):
                reports = [run_scenario(seed, rate, WITHOUT_PREDICTION,
                                        handling_seconds_per_van=s0,
                                        delay_model=model)
                           for seed in seeds]
                means.append(statistics.fmean(
                    r.throughput_vans_per_crane_hour for r in reports))
            err = max(abs(m - t) / t for m, t in zip(means, targets))
            if best is None or err < best[0]:
                best = (err, s0, dmean, tuple(means))
            if err <= tolerance and (s_scale, d_scale) == (1.0, 1.0):
                break
    err, s0, dmean, means = best
    result = dict(cal)
    result["handling_seconds_per_van"] = s0
    result["delay_mean_minutes"] = dmean
    result["calibration_error"] = err
    result["mean_throughput_5pct"] = means[0]
    result["mean_throughput_30pct"] = means[1]
    result["within_tolerance"] = err <= tolerance
    return result


def calibration_to_kv(cal: dict) -> str:
    lines = [f"{k} = {cal[k]!r}" if isinstance(cal[k], float) else f"{k} = {cal[k]}"
             for k in sorted(cal)]
    return "\n".join(lines) + "\n"


def calibration_from_kv(kv: dict) -> dict:
    out = dict(DEFAULT_CALIBRATION)
    for key in out:
        if key in kv:
            cast = int if isinstance(out[key], int) else float
            out[key] = cast(float(kv[key]))
    return out


def config_from_calibration(cal, seed, rta_rate, strategy) -> SimConfig:
    vessels = make_schedule(seed, n_vessels=int(cal["n_vessels"]),
                            van_count=int(cal["van_count"]),
                            horizon_hours=cal["horizon_hours"])
    return SimConfig(
        seed=seed, rta_rate=rta_rate, strategy=strategy, vessels=vessels,
        delay_model=DelayModel(mean_minutes=cal["delay_mean_minutes"],
                               dispersion=cal["delay_sigma"]),
        residual_mean_minutes=cal["prediction_residual_mean_minutes"],
        residual_sigma=cal["prediction_residual_sigma"],
        rta_detect_lead_minutes=cal["rta_detect_lead_minutes"],
        n_berths=int(cal["n_berths"]), crane_pool=int(cal["crane_pool"]),
        cranes_per_vessel=int(cal["cranes_per_vessel"]),
        handling_seconds_per_van=cal["handling_seconds_per_van"],
        horizon_hours=cal["horizon_hours"])
