"""Network data model: case loading, validation, device settings."""

import json
from importlib import resources

import pytest

from voltgrid.cases import CaseFileError, load_case
from voltgrid.network import NetworkValidationError, UnknownDeviceError


def _wscc9_raw():
    text = resources.files("voltgrid.data").joinpath("wscc9_augmented.json").read_text()
    return json.loads(text)


def test_wscc9_matches_augmentation(wscc9):
    assert len(wscc9.buses) == 9
    # three generation sources: two synchronous machines plus the battery
    assert len(wscc9.generators) == 2
    assert len(wscc9.batteries) == 1
    caps = {(c.bus, c.rated_kvar) for c in wscc9.capacitors}
    assert caps == {(7, 4000.0), (9, 4000.0)}
    assert sum(t.regulating for t in wscc9.transformers) == 3


def test_wscc9_battery_replaces_generator(wscc9):
    bat = wscc9.batteries[0]
    assert bat.bus == 3
    assert not any(g.bus == 3 for g in wscc9.generators)


def test_ieee24_matches_augmentation(ieee24):
    assert len(ieee24.buses) == 24
    assert len(ieee24.capacitors) == 9
    assert sorted(c.bus for c in ieee24.capacitors) == [6, 7, 10, 11, 13, 14, 15, 16, 19]
    assert sorted(b.bus for b in ieee24.batteries) == [2, 6, 21, 22]
    assert len(ieee24.branches) == 38


def test_two_slack_buses_rejected(tmp_path):
    raw = _wscc9_raw()
    raw["buses"][1]["type"] = "slack"
    bad = tmp_path / "two_slack.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(NetworkValidationError, match="slack"):
        load_case(bad)


def test_duplicate_bus_id_rejected(tmp_path):
    raw = _wscc9_raw()
    raw["buses"][2]["id"] = raw["buses"][1]["id"]
    bad = tmp_path / "dup.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(NetworkValidationError, match="duplicate"):
        load_case(bad)


def test_malformed_file_names_field(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text('{"buses": [{"id": 1}]}')
    with pytest.raises(CaseFileError, match="base_kv"):
        load_case(bad)


def test_json_syntax_error_reports_line(tmp_path):
    bad = tmp_path / "syntax.json"
    bad.write_text('{"buses": [,]}')
    with pytest.raises(CaseFileError, match="line"):
        load_case(bad)


def test_capacitor_toggle_only_changes_that_device(wscc9):
    net = wscc9.with_capacitor("cap1", True)
    out = net.with_capacitor("cap1", False)
    assert out.capacitor("cap1").on is False
    assert out.capacitor("cap2").on == wscc9.capacitor("cap2").on
    assert out.batteries == wscc9.batteries
    assert out.transformers == wscc9.transformers


def test_battery_full_cannot_charge(wscc9):
    charged = wscc9
    for _ in range(12):
        charged = charged.with_battery_power("bat1", -1.0)
    assert charged.battery("bat1").soc == 1.0
    again = charged.with_battery_power("bat1", -1.0)
    assert again.battery("bat1").soc == 1.0
    assert again.battery("bat1").power == 0.0


def test_battery_energy_bookkeeping():
    # SoC 0.5, capacity 4 MWh, max power 2 MW, full discharge for 1 h -> SoC 0
    from voltgrid.network import Battery, Bus, PowerNetwork

    net = PowerNetwork(
        name="toy",
        base_mva=100.0,
        buses=(Bus(1, 100.0, "slack"), Bus(2, 100.0, "pq")),
        branches=(),
        batteries=(Battery("b", 2, p_max_mw=2.0, capacity_mwh=4.0, soc=0.5),),
    )
    out = net.with_battery_power("b", 1.0)
    assert out.battery("b").soc == pytest.approx(0.0, abs=1e-12)
    assert out.battery("b").power == pytest.approx(1.0)


def test_apply_settings_idempotent(wscc9):
    a = wscc9.with_capacitor("cap1", True).with_tap("reg2", 3)
    b = a.with_capacitor("cap1", True).with_tap("reg2", 3)
    assert a.capacitors == b.capacitors
    assert a.transformers == b.transformers


def test_tap_out_of_range_rejected(wscc9):
    with pytest.raises(NetworkValidationError):
        wscc9.with_tap("reg1", 17)


def test_unknown_device_errors(wscc9):
    with pytest.raises(UnknownDeviceError):
        wscc9.with_capacitor("cap9", True)
    with pytest.raises(UnknownDeviceError):
        wscc9.with_battery_power("bat7", 0.5)


def test_device_id_order_is_stable(wscc9, ieee24):
    assert wscc9.device_ids() == ["cap1", "cap2", "reg1", "reg2", "reg3", "bat1"]
    assert ieee24.device_ids() == [f"cap{i}" for i in range(1, 10)] + [
        "bat1", "bat2", "bat3", "bat4"
    ]
