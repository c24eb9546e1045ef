"""CSV ingest, synthetic traffic generation, and weather fields."""

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from portsim.core import utc
from portsim.ingest import (
    AIS_HEADER,
    HeaderMismatch,
    InvalidConfig,
    RowError,
    SynthConfig,
    ais_to_csv,
    generate_traffic,
    iot_to_csv,
    make_weather_field,
    parse_ais_csv,
    parse_iot_csv,
    parse_kv_config,
    synth_config_from_kv,
    weather_speed_multiplier,
)

AIS_CSV = """Timestamp,MMSI,Latitude,Longitude,SOG,COG,Heading,ROT,Draught,Ship Type,Ship Length,Ship Width
2019-07-03 00:00:15.015121 UTC,Ship1,35.09359667,129.0357483,0,0,137,0,4.4,52,30,10
2019-07-03 00:00:20.562121 UTC,Ship2,35.09411833,129.0362233,0.2,242.8,511,-128,5.1,52,48,12
"""

IOT_CSV = """Timestamp,Equipment Index,Device Identify,Latitude,Longitude,Altitude,Velocity,Direction,Work Type
2021-10-31T20:59:59Z,YT1,3,35.1,129.1,2.5,4.2,128,U
2021-10-31T21:00:59Z,QC2,4,35.2,129.2,2.5,0.0,0,L
"""


def _config(**overrides):
    base = dict(seed=3, n_vessels=4, horizon_hours=72.0,
                route_templates=(((33.2, 127.0), (35.05, 129.0)),),
                speed_range_knots=(10.0, 18.0), van_count_range=(500, 3000),
                weather_perturbation=0.3)
    base.update(overrides)
    return SynthConfig(**base)


def test_parse_ais_csv_sentinels_and_order():
    records = parse_ais_csv(io.StringIO(AIS_CSV))
    assert len(records) == 2
    assert records[0].heading == 137
    assert records[1].heading is None and records[1].rot is None


def test_parse_ais_csv_header_mismatch():
    bad = AIS_CSV.replace("MMSI", "Vessel")
    with pytest.raises(HeaderMismatch):
        parse_ais_csv(io.StringIO(bad))


def test_parse_ais_csv_strict_vs_lenient():
    bad = AIS_CSV + "not-a-time,S,35,129,0,0,0,0,1,52,30,10\n"
    with pytest.raises(RowError) as err:
        parse_ais_csv(io.StringIO(bad))
    assert err.value.line == 4
    records, errors = parse_ais_csv(io.StringIO(bad), lenient=True)
    assert len(records) == 2 and len(errors) == 1


def test_ais_csv_round_trip():
    records = parse_ais_csv(io.StringIO(AIS_CSV))
    text = ais_to_csv(records)
    again = parse_ais_csv(io.StringIO(text))
    assert again == records
    assert ais_to_csv(again) == text          # byte-stable on second pass
    assert text.splitlines()[0] == ",".join(AIS_HEADER)


def test_iot_csv_round_trip():
    records = parse_iot_csv(io.StringIO(IOT_CSV))
    assert [r.work_type for r in records] == ["Unloading", "Loading"]
    assert parse_iot_csv(io.StringIO(iot_to_csv(records))) == records


def test_synth_config_validation():
    with pytest.raises(InvalidConfig):
        _config(speed_range_knots=(0.0, 10.0)).validate()
    with pytest.raises(InvalidConfig):
        _config(route_templates=()).validate()
    with pytest.raises(InvalidConfig):
        _config(horizon_hours=-1).validate()
    with pytest.raises(InvalidConfig):
        _config(van_count_range=(10, 5)).validate()


def test_generate_traffic_deterministic():
    a = generate_traffic(_config())
    b = generate_traffic(_config())
    assert a[0] == b[0] and a[2] == b[2] and a[3] == b[3]
    c = generate_traffic(_config(seed=4))
    assert c[3] != a[3]


def test_generate_traffic_zero_perturbation_is_on_promise():
    voyages, _, _, arrivals = generate_traffic(
        _config(weather_perturbation=0.0))
    for v in voyages:
        assert abs((arrivals[v.vessel_id] - v.promised_eta).total_seconds()) < 1.0


def test_generate_traffic_perturbation_moves_arrivals():
    voyages, _, _, arrivals = generate_traffic(_config())
    moved = [v for v in voyages
             if abs((arrivals[v.vessel_id] - v.promised_eta).total_seconds()) > 60]
    assert moved, "weather perturbation should shift some arrival times"


def test_weather_field_invariants():
    import random
    field = make_weather_field(random.Random("wx"),
                               (((33.2, 127.0), (35.05, 129.0)),),
                               valid_at=utc(2021, 1, 1))
    for row in field.grid:
        for cell in row:
            assert cell.wind_speed >= 0
            assert 0.0 <= cell.humidity <= 100.0
            assert all(v >= 0 for v in cell.air_quality.values())


@given(st.floats(0.0, 1.0), st.floats(33.0, 36.0), st.floats(126.5, 129.5))
@settings(max_examples=40, deadline=None)
def test_weather_speed_multiplier_bounded(pert, lat, lon):
    import random
    field = make_weather_field(random.Random("wx"),
                               (((33.2, 127.0), (35.05, 129.0)),),
                               valid_at=utc(2021, 1, 1))
    m = weather_speed_multiplier(field, lat, lon, pert)
    assert 0.2 <= m <= 1.0 + pert + 1e-9


def test_parse_kv_config_and_schema():
    text = "# comment\nseed = 9\nroute.0 = 33.2,127.0;35.05,129.0\n\n"
    kv = parse_kv_config(io.StringIO(text))
    assert kv == {"seed": "9", "route.0": "33.2,127.0;35.05,129.0"}
    cfg = synth_config_from_kv(kv)
    assert cfg.seed == 9
    assert cfg.route_templates == (((33.2, 127.0), (35.05, 129.0)),)
    with pytest.raises(InvalidConfig):
        synth_config_from_kv({"seed": "1"})     # no routes
