import pytest

from app.config.defaults import load_defaults, parse_defaults, render_defaults
from app.core.errors import EmptyTableError, MissingColumnError, ScenarioParseError, ScenarioSchemaError
from app.core.tables import ResultTable, embedded_hash
from app.scenarios.schema import LinkSweep, S11Sweep, parse_scenario_text

MINIMAL = """
name = "s11-sweep"

[frontend]
preset = "table1-custom"

[sweep]
kind = "s11"
start = "100 MHz"
stop = "2 GHz"
points = 1901
"""


def test_parses_minimal_scenario():
    sc = parse_scenario_text(MINIMAL)
    assert isinstance(sc.sweep, S11Sweep)
    assert sc.sweep.start == pytest.approx(100e6)
    assert sc.sweep.stop == pytest.approx(2e9)
    assert len(sc.sweep.grid()) == 1901


def test_unknown_key_is_named():
    with pytest.raises(ScenarioSchemaError) as exc:
        parse_scenario_text(MINIMAL.replace("points = 1901", "points = 1901\nbogus = 1"))
    assert any("bogus" in k for k in exc.value.keys)


def test_quantity_without_unit_is_rejected():
    with pytest.raises(ScenarioSchemaError):
        parse_scenario_text(MINIMAL.replace('"100 MHz"', '"100"'))


def test_bad_toml_reports_line():
    with pytest.raises(ScenarioParseError) as exc:
        parse_scenario_text('name = "x"\n[sweep\nkind = "s11"\n')
    assert exc.value.line == 2


def test_scenario_needs_work():
    with pytest.raises(ScenarioSchemaError):
        parse_scenario_text('name = "vazio"\n')


def test_power_grid_is_inclusive():
    sc = parse_scenario_text("""
name = "eff"
[sweep]
kind = "rect_efficiency"
powers = { start = "-20 dBm", stop = "10 dBm", step = "1 dB" }
""")
    levels = sc.sweep.powers.levels()
    assert len(levels) == 31
    assert levels[0].value_dbm == -20.0 and levels[-1].value_dbm == 10.0


def test_power_grid_rejects_mixed_forms():
    with pytest.raises(ScenarioSchemaError):
        parse_scenario_text("""
name = "eff"
[sweep]
kind = "mpp_ratio"
powers = { values = ["0 dBm"], start = "-20 dBm", stop = "10 dBm", step = "1 dB" }
""")


def test_link_distance_range_validated():
    with pytest.raises(ScenarioSchemaError):
        parse_scenario_text("""
name = "l"
[sweep]
kind = "link"
tx_power = "23 dBm"
distance_start = "5 m"
distance_stop = "1 m"
""")
    sc = parse_scenario_text("""
name = "l"
[sweep]
kind = "link"
tx_power = "23 dBm"
distance_start = "1 m"
distance_stop = "5 m"
""")
    assert isinstance(sc.sweep, LinkSweep)
    assert sc.sweep.frequency == pytest.approx(915e6)


def test_result_table_csv_contract(tmp_path):
    table = ResultTable("t", ["x", "y", "errors"], ["m", "dBm", ""], provenance={"scenario_sha256": "abc"})
    table.add_row([1.0, 1 / 3, ""])
    table.add_row([2.0, float("nan"), "not_converged"])
    path = table.write_csv(tmp_path / "t.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# scenario_sha256: abc"
    assert lines[1] == "x,y,errors"
    assert lines[3] == "1,0.333333333,"
    assert embedded_hash(path) == "abc"

    back = ResultTable.read_csv(path)
    assert back.columns == table.columns
    assert back.column("errors") == [None, "not_converged"]


def test_result_table_errors(tmp_path):
    table = ResultTable("t", ["x"], ["m"])
    with pytest.raises(EmptyTableError):
        table.write_csv(tmp_path / "t.csv")
    assert not (tmp_path / "t.csv").exists()
    with pytest.raises(MissingColumnError):
        table.column("y")


def test_shipped_defaults_render_back_identically():
    d = load_defaults()
    text = render_defaults(d, ["cabeçalho"])
    assert text.startswith("# cabeçalho\n")
    again = parse_defaults(text)
    assert render_defaults(again, ["cabeçalho"]) == text
    assert again.matching.shunt_capacitor == pytest.approx(d.matching.shunt_capacitor)


def test_defaults_reject_unknown_section():
    text = render_defaults(load_defaults(), []) + "\n[extra]\nx = 1\n"
    with pytest.raises(ScenarioSchemaError):
        parse_defaults(text)
