import csv
import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from plmecho.errors import InsufficientData, InvalidArgument, NotFound
from plmecho.materials import (
    RECORDS,
    TABLE,
    Quantity,
    feasibility,
    golden_csv_text,
    load_golden,
    lookup,
    parse,
    serialize,
    table_rows,
)
from plmecho.protocols import TimescaleBudget


def test_eu151_site1():
    r = lookup("Eu", 151, 1)
    assert [q.value for q in r.ground_splittings] == [34.533, 46.175]
    assert [q.value for q in r.excited_splittings] == [75.0, 102.0]
    zero_field = [q for q in r.T2_opt if q.b_field == 0.0]
    assert zero_field[0].value == 1.5 and zero_field[0].unit == "ms"
    assert r.T2_HF[0].si == 6 * 3600.0 and r.T2_HF[0].b_field == 1.37


def test_pr_site2():
    r = lookup("Pr", "-", "S2")
    assert [q.value for q in r.ground_splittings] == [4.93, 3.78]
    assert r.T2_HF[0].value == 2.6 and r.T2_HF[0].b_field == 0.0


def test_lookup_aliases_and_missing():
    assert lookup("eu", "151", "site 1") is lookup("Eu", 151, 1)
    assert lookup("Pr", "\u2014", 1) is lookup("Pr", None, 1)
    with pytest.raises(NotFound):
        lookup("Eu", 151, 3)
    with pytest.raises(NotFound):
        lookup("Nd", 145, 1)
    with pytest.raises(NotFound):
        lookup("Eu", "abc", 1)


def test_qualifiers():
    eu = lookup("Eu", 153, 2)
    assert eu.T1_HF.qualifier == "lower-bound" and eu.T1_HF.si == 20 * 86400.0
    assert lookup("Pr", None, 1).T1_HF.qualifier == "approx"
    assert eu.T2_HF == ()


def test_narrative_records():
    er = lookup("Er", None, None, host="CaWO4")
    assert er.T2_HF[0].si == pytest.approx(23e-3) and er.T2_opt == ()
    er167 = lookup("Er", 167, None)
    assert er167.T2_opt[0].qualifier == "lower-bound"
    assert er167.T2_HF[0].value == 1.3
    dy = lookup("Dy", None, None, host="SrY2O4")
    assert dy.T1_HF.value == 1400.0 and dy.T2_HF == () and dy.ground_splittings == ()


def _row_key(row):
    field = float(row["b_field_T"]) if row["b_field_T"] else None
    return tuple(row[k] for k in ("ion", "isotope", "site", "host", "quantity", "index", "unit", "qualifier")) + (field,)


def test_golden_csv_bit_exact():
    """Every transcribed cell parses to exactly the embedded float, and nothing is missing or extra."""
    golden = {_row_key(r): r["value"] for r in load_golden()}
    embedded = {_row_key(r): r["value"] for r in table_rows()}
    assert golden.keys() == embedded.keys()
    for key, text in golden.items():
        assert float(text) == float(embedded[key]), key
    for row in load_golden():
        rec = lookup(row["ion"], row["isotope"] or None, row["site"] or None, row["host"])
        attr = getattr(rec, row["quantity"])
        item = attr if isinstance(attr, Quantity) else attr[int(row["index"])]
        assert item.value == float(row["value"]) and item.unit == row["unit"]


def test_every_table_cell_in_one_row():
    rows = list(csv.DictReader(io.StringIO(golden_csv_text())))
    keys = [(r["ion"], r["isotope"], r["site"], r["quantity"], r["index"]) for r in rows]
    assert len(keys) == len(set(keys))
    assert len(rows) == sum(len(rec.rows()) for rec in TABLE)


@pytest.mark.parametrize("rec", RECORDS, ids=lambda r: "-".join(map(str, r.key)))
def test_round_trip(rec):
    assert parse(serialize(rec)) == rec


def test_quantity_validation():
    with pytest.raises(InvalidArgument):
        Quantity(1.0, "fortnights")
    with pytest.raises(InvalidArgument):
        Quantity(-1.0, "s")
    with pytest.raises(InvalidArgument):
        Quantity(1.0, "s", qualifier="guess")


def test_feasibility_eu_passes():
    b = TimescaleBudget(T2_star=0.1e-6, dt_s=10e-6, T=100e-6, tau=1e-6, t0=1.0)
    rep = feasibility(lookup("Eu", 151, 1), b, b_field=1.37)
    assert rep.passed, rep.failures
    assert rep.budget.T2_spin == 6 * 3600.0


def test_feasibility_pr_spin_fails():
    b = TimescaleBudget(T2_star=0.1e-6, dt_s=10e-6, T=100e-6, tau=1e-6, t0=10e-3)
    rep = feasibility(lookup("Pr", None, 1), b, b_field=0.0)
    assert not rep.passed
    assert "t0 < T2,s" in rep.failures
    assert rep.budget.T2_spin == pytest.approx(0.5e-3)


def test_feasibility_bandwidth_fails():
    b = TimescaleBudget(dt_s=1 / 50e6, T=100e-6)
    rep = feasibility(lookup("Pr", None, 1), b, b_field=0.0)
    assert rep.bandwidth_ok is False and "bandwidth <= splitting" in rep.failures
    assert rep.splitting_hz == pytest.approx(10.19e6)


def test_feasibility_missing_data():
    with pytest.raises(InsufficientData):
        feasibility(lookup("Eu", 153, 1), TimescaleBudget(T=1e-4))
    with pytest.raises(InvalidArgument):
        feasibility(lookup("Eu", 151, 1), TimescaleBudget(T=1e-4), b_field=-1.0)


@given(st.floats(0.0, 10.0))
def test_feasibility_picks_nearest_field(b):
    rep = feasibility(lookup("Eu", 151, 1), TimescaleBudget(T=1e-4), b_field=b)
    chosen = rep.chosen["T2_opt"]["b_field"]
    others = [q.b_field for q in lookup("Eu", 151, 1).T2_opt]
    assert all(abs(chosen - b) <= abs(o - b) for o in others)
