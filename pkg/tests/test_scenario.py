"""Scenario files: strict validation, issue collection, round-trips."""

import copy
import json

import pytest

import helpers
from wmsnsim import Scenario, ScenarioError, from_dict, parse_scenario, to_dict


def codes(exc_info):
    return [i.code for i in exc_info.value.issues]


def expect(data, *want):
    with pytest.raises(ScenarioError) as ei:
        from_dict(data)
    got = codes(ei)
    for code in want:
        assert code in got, f"wanted {code} in {got}"
    return ei.value.issues


def test_minimal_scenario_parses():
    sc = from_dict(helpers.two_hop())
    assert len(sc.stations) == 3
    assert sc.sink == 9
    assert sc.grid.rp_modulus == 11
    assert sc.layout.rp_slots == 11 and sc.layout.cf_slots == 20
    assert len(sc.flows) == 1
    assert sc.flows[0].service.name == "CBR"
    net = sc.build_network()
    assert net.sink == 9
    assert net.ids() == (1, 2, 9)


def test_unknown_keys_rejected_everywhere():
    d = helpers.two_hop()
    d["bogus"] = 1
    d["stations"][0]["extra"] = True
    d["flows"][0]["rate"] = 5
    issues = expect(d, "E_UNKNOWN_KEY")
    paths = [i.path for i in issues if i.code == "E_UNKNOWN_KEY"]
    assert len(paths) == 3


def test_schema_type_errors():
    d = helpers.two_hop()
    d["horizon_frames"] = "twenty"
    d["stations"][0]["position"] = [1.0]
    expect(d, "E_SCHEMA")


def test_rp_modulus_floor():
    d = helpers.two_hop()
    d["grid"]["rp_modulus"] = 9
    expect(d, "E_RP_MODULUS")


def test_station_kind_and_sector_rules():
    d = helpers.two_hop()
    d["stations"][0]["kind"] = "relay"
    expect(d, "E_BAD_KIND")

    d = helpers.two_hop()
    del d["stations"][0]["sector"]
    expect(d, "E_MISSING_SECTOR")

    d = helpers.two_hop()
    d["stations"][2]["sector"] = {"theta": 0, "alpha": 1, "range": 5}
    expect(d, "E_SECTOR_FIELDS")


def test_station_and_flow_uniqueness():
    d = helpers.two_hop()
    d["stations"].append(dict(d["stations"][0]))
    expect(d, "E_DUP_STATION")

    d = helpers.two_hop()
    d["flows"].append(dict(d["flows"][0]))
    expect(d, "E_DUP_FLOW")


def test_base_station_count():
    d = helpers.two_hop()
    d["stations"] = [s for s in d["stations"] if s["kind"] != "base_station"]
    expect(d, "E_NO_BASE_STATION")

    d = helpers.two_hop()
    d["stations"].append(helpers.bs(10, 400, 50))
    expect(d, "E_MULTI_BASE_STATION")


def test_flow_class_mode_and_endpoint_rules():
    d = helpers.two_hop()
    d["flows"][0]["class"] = "VBR"
    expect(d, "E_UNKNOWN_CLASS")

    d = helpers.two_hop()
    d["flows"][0]["mode"] = "strict"
    expect(d, "E_BAD_SERVICE_MODE")

    # a service mode on a best-effort class is meaningless
    d = helpers.two_hop()
    d["flows"][0].update({"class": "ABR", "mode": "bonded", "rate_bps": 2_000_000})
    expect(d, "E_BAD_SERVICE_MODE")

    d = helpers.two_hop()
    d["flows"][0]["src"] = 77
    expect(d, "E_UNKNOWN_STATION")

    d = helpers.two_hop()
    d["flows"][0]["dst"] = d["flows"][0]["src"]
    expect(d, "E_FLOW_ENDPOINTS")

    # the base station only receives
    d = helpers.two_hop()
    d["flows"][0].update({"src": 9, "dst": 1})
    expect(d, "E_FLOW_ENDPOINTS")

    d = helpers.two_hop()
    d["flows"][0]["rate_bps"] = 1.0
    expect(d, "E_RATE_OUT_OF_CLASS")


def test_fault_validation():
    d = helpers.two_hop(faults=[{"kind": "CR", "frame": 0, "sender": 1}])
    sc = from_dict(d)
    assert sc.faults[0].kind == "CR"

    d = helpers.two_hop(faults=[{"kind": "NACK", "frame": 0, "sender": 1}])
    expect(d, "E_BAD_FAULT_KIND")

    d = helpers.two_hop(faults=[{"kind": "CR", "frame": -1, "sender": 1}])
    expect(d, "E_BAD_VALUE")

    d = helpers.two_hop(faults=[{"kind": "CR", "frame": 0, "sender": 55}])
    expect(d, "E_UNKNOWN_STATION")


def test_all_issues_collected_in_one_pass():
    d = helpers.two_hop()
    d["grid"]["rp_modulus"] = 3
    d["flows"][0]["class"] = "VBR"
    d["stations"][0]["kind"] = "relay"
    d["junk"] = {}
    with pytest.raises(ScenarioError) as ei:
        from_dict(d)
    got = set(codes(ei))
    assert {"E_RP_MODULUS", "E_UNKNOWN_CLASS", "E_BAD_KIND", "E_UNKNOWN_KEY"} <= got
    assert len(ei.value.issues) >= 4


def test_round_trip_preserves_everything():
    d = helpers.grid(3, flows=helpers.grid_flows(3, 2))
    d["faults"] = [{"kind": "SRB", "frame": 4, "sender": 0}]
    d["routing"] = {"progress_mode": "literal", "max_paths": 8}
    d["mac"] = {"contention_window": 16, "backoff": {"max_retries": 5}}
    d["energy"] = {"tx": 2.0, "rx": 1.0, "idle": 0.25, "sleep": 0.02}
    d["channel"] = {"interference_multiplier": 2.5}
    sc = from_dict(d)
    assert from_dict(to_dict(sc)) == sc
    assert sc.routing.progress_mode.value == "literal"
    assert sc.mac.contention_window == 16
    assert sc.mac.backoff.max_retries == 5
    assert sc.energy.tx == 2.0
    assert sc.channel.interference_multiplier == 2.5


def test_defaults_fill_optional_sections():
    sc = from_dict(helpers.two_hop())
    assert sc.routing.max_paths == 16
    assert sc.mac.slotting_enabled
    assert sc.mac.backoff.max_retries == 7
    assert sc.energy.tx == 1.0 and sc.energy.sleep == 0.01
    assert sc.channel.interference_multiplier == 1.0


def test_parse_scenario_reads_files(tmp_path):
    p = tmp_path / "net.json"
    p.write_text(json.dumps(helpers.two_hop()))
    sc = parse_scenario(str(p))
    assert sc.sink == 9

    bad = tmp_path / "broken.json"
    bad.write_text("{\n  \"stations\": [,]\n}")
    with pytest.raises(ScenarioError) as ei:
        parse_scenario(str(bad))
    assert codes(ei) == ["E_PARSE"]
    # the path pins the failure to file, line, and column
    assert ei.value.issues[0].path.endswith("broken.json:2:16")


def test_original_dict_is_not_mutated():
    d = helpers.two_hop()
    snapshot = copy.deepcopy(d)
    from_dict(d)
    assert d == snapshot
