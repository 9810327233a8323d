"""Rare-earth material records and feasibility checks against a timescale budget.

Values are kept in the units they are quoted in (``MHz``, ``us``, ``ms``,
``s``, ``h``, ``days``) so they compare bit-exactly with the shipped CSV;
``Quantity.si`` converts to SI.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Optional

from .errors import InsufficientData, InvalidArgument, NotFound
from .protocols import TimescaleBudget, TimescaleReport, validate_timescales

UNIT_SCALE = {
    "MHz": 1e6,
    "GHz": 1e9,
    "us": 1e-6,
    "ms": 1e-3,
    "s": 1.0,
    "h": 3600.0,
    "days": 86400.0,
}
QUALIFIERS = ("exact", "lower-bound", "approx")
CSV_FIELDS = ("ion", "isotope", "site", "host", "quantity", "index", "value", "unit", "b_field_T", "qualifier")
DEFAULT_HOST = "Y2SiO5"


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str
    b_field: Optional[float] = None
    qualifier: str = "exact"

    def __post_init__(self) -> None:
        if self.unit not in UNIT_SCALE:
            raise InvalidArgument(f"unknown unit {self.unit!r}")
        if self.qualifier not in QUALIFIERS:
            raise InvalidArgument(f"unknown qualifier {self.qualifier!r}")
        if not self.value > 0:
            raise InvalidArgument("tabulated values must be positive")

    @property
    def si(self) -> float:
        return self.value * UNIT_SCALE[self.unit]


@dataclass(frozen=True)
class MaterialRecord:
    """One ion/isotope/site entry; unknown fields are ``None`` or empty."""

    ion: str
    isotope: Optional[int]
    site: Optional[int]
    host: str = DEFAULT_HOST
    ground_splittings: tuple = ()
    excited_splittings: tuple = ()
    T1_opt: Optional[Quantity] = None
    T2_opt: tuple = ()
    T1_HF: Optional[Quantity] = None
    T2_HF: tuple = ()
    source: str = "table"

    @property
    def key(self) -> tuple:
        return (self.ion, self.isotope, self.site, self.host)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MaterialRecord":
        def q(d):
            return None if d is None else Quantity(**d)

        return cls(
            ion=data["ion"],
            isotope=data["isotope"],
            site=data["site"],
            host=data["host"],
            ground_splittings=tuple(q(d) for d in data["ground_splittings"]),
            excited_splittings=tuple(q(d) for d in data["excited_splittings"]),
            T1_opt=q(data["T1_opt"]),
            T2_opt=tuple(q(d) for d in data["T2_opt"]),
            T1_HF=q(data["T1_HF"]),
            T2_HF=tuple(q(d) for d in data["T2_HF"]),
            source=data["source"],
        )

    def rows(self) -> list[dict]:
        """Flatten to CSV rows, one per tabulated value."""
        out = []
        for name in ("ground_splittings", "excited_splittings", "T1_opt", "T2_opt", "T1_HF", "T2_HF"):
            value = getattr(self, name)
            items = (value,) if isinstance(value, Quantity) else (value or ())
            for i, item in enumerate(items):
                out.append(
                    {
                        "ion": self.ion,
                        "isotope": "" if self.isotope is None else str(self.isotope),
                        "site": "" if self.site is None else str(self.site),
                        "host": self.host,
                        "quantity": name,
                        "index": str(i),
                        "value": repr(item.value),
                        "unit": item.unit,
                        "b_field_T": "" if item.b_field is None else repr(item.b_field),
                        "qualifier": item.qualifier,
                    }
                )
        return out


def serialize(record: MaterialRecord) -> str:
    return json.dumps(record.to_dict(), sort_keys=True)


def parse(text: str) -> MaterialRecord:
    return MaterialRecord.from_dict(json.loads(text))


def _mhz(*values) -> tuple:
    return tuple(Quantity(v, "MHz") for v in values)


_EU_T2_OPT = {
    1: (Quantity(1.5, "ms", 0.0), Quantity(2.6, "ms", 0.01)),
    2: (Quantity(1.1, "ms", 0.0), Quantity(1.9, "ms", 0.01)),
}
_EU_T1_OPT = {1: Quantity(1.9, "ms"), 2: Quantity(1.6, "ms")}
_EU_T1_HF = Quantity(20.0, "days", qualifier="lower-bound")
_PR_T1_HF = Quantity(100.0, "s", qualifier="approx")

TABLE = (
    MaterialRecord("Eu", 151, 1, ground_splittings=_mhz(34.533, 46.175), excited_splittings=_mhz(75.0, 102.0),
                   T1_opt=_EU_T1_OPT[1], T2_opt=_EU_T2_OPT[1], T1_HF=_EU_T1_HF, T2_HF=(Quantity(6.0, "h", 1.37),)),
    MaterialRecord("Eu", 153, 1, ground_splittings=_mhz(90.0, 119.2), excited_splittings=_mhz(191.0, 260.0),
                   T1_opt=_EU_T1_OPT[1], T2_opt=_EU_T2_OPT[1], T1_HF=_EU_T1_HF),
    MaterialRecord("Eu", 151, 2, ground_splittings=_mhz(29.527, 57.254), excited_splittings=_mhz(63.0, 108.0),
                   T1_opt=_EU_T1_OPT[2], T2_opt=_EU_T2_OPT[2], T1_HF=_EU_T1_HF),
    MaterialRecord("Eu", 153, 2, ground_splittings=_mhz(76.4, 148.1), excited_splittings=_mhz(160.0, 274.0),
                   T1_opt=_EU_T1_OPT[2], T2_opt=_EU_T2_OPT[2], T1_HF=_EU_T1_HF),
    MaterialRecord("Pr", None, 1, ground_splittings=_mhz(17.3, 10.19), excited_splittings=_mhz(4.84, 4.59),
                   T1_opt=Quantity(164.0, "us"), T2_opt=(Quantity(152.0, "us", 0.0077),), T1_HF=_PR_T1_HF,
                   T2_HF=(Quantity(0.5, "ms", 0.0), Quantity(42.0, "s", 0.08))),
    MaterialRecord("Pr", None, 2, ground_splittings=_mhz(4.93, 3.78), excited_splittings=_mhz(2.29, 2.29),
                   T1_opt=Quantity(222.0, "us"), T2_opt=(Quantity(377.0, "us", 0.0077),), T1_HF=_PR_T1_HF,
                   T2_HF=(Quantity(2.6, "ms", 0.0),)),
)

NARRATIVE = (
    MaterialRecord("Er", None, None, host="CaWO4", ground_splittings=(Quantity(8.0, "GHz", qualifier="approx"),),
                   T2_HF=(Quantity(23.0, "ms"),), source="narrative"),
    MaterialRecord("Er", 167, None, T2_opt=(Quantity(1.35, "ms", 3.0, "lower-bound"),),
                   T2_HF=(Quantity(1.3, "s", 3.0, "lower-bound"),), source="narrative"),
    MaterialRecord("Dy", None, None, host="SrY2O4", T1_HF=Quantity(1400.0, "s", qualifier="approx"), source="narrative"),
)

RECORDS = TABLE + NARRATIVE


def _norm_isotope(isotope) -> Optional[int]:
    if isotope is None or (isinstance(isotope, str) and isotope.strip() in ("", "-", "\u2014", "none", "None")):
        return None
    try:
        return int(isotope)
    except (TypeError, ValueError):
        raise NotFound(f"isotope {isotope!r} is not a mass number") from None


def _norm_site(site) -> Optional[int]:
    if site is None or (isinstance(site, str) and site.strip() in ("", "-", "\u2014", "none", "None")):
        return None
    text = str(site).strip().upper().removeprefix("SITE").removeprefix("S").strip()
    try:
        return int(text)
    except ValueError:
        raise NotFound(f"site {site!r} is not a site number") from None


def lookup(ion: str, isotope=None, site=None, host: str = DEFAULT_HOST) -> MaterialRecord:
    """Record for ``(ion, isotope, site, host)``; isotope/site may be ``None``, '-' or 'S1'-style."""
    key = (str(ion).strip().capitalize(), _norm_isotope(isotope), _norm_site(site), host)
    for rec in RECORDS:
        if rec.key == key:
            return rec
    raise NotFound(f"no material record for ion={ion} isotope={isotope} site={site} host={host}")


def all_records() -> tuple:
    return RECORDS


def table_rows(records=TABLE) -> list[dict]:
    return [row for rec in records for row in rec.rows()]


def to_csv(records=TABLE) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(table_rows(records))
    return buf.getvalue()


def golden_csv_text() -> str:
    return resources.files("plmecho").joinpath("data/materials.csv").read_text(encoding="utf-8")


def load_golden() -> list[dict]:
    return list(csv.DictReader(io.StringIO(golden_csv_text())))


def _nearest(entries: tuple, b_field: float) -> Optional[Quantity]:
    if not entries:
        return None
    known = [e for e in entries if e.b_field is not None]
    if not known:
        return entries[0]
    return min(known, key=lambda e: (abs(e.b_field - b_field), e.b_field))


@dataclass(frozen=True)
class FeasibilityReport:
    record_key: tuple
    b_field: float
    budget: TimescaleBudget
    timescales: TimescaleReport
    bandwidth_hz: Optional[float]
    splitting_hz: Optional[float]
    bandwidth_ok: Optional[bool]
    chosen: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.timescales.passed and self.bandwidth_ok is not False

    @property
    def failures(self) -> list[str]:
        out = list(self.timescales.failures)
        if self.bandwidth_ok is False:
            out.append("bandwidth <= splitting")
        return out

    def to_dict(self) -> dict:
        return {
            "record": list(self.record_key),
            "b_field_T": self.b_field,
            "passed": self.passed,
            "failures": self.failures,
            "bandwidth_hz": self.bandwidth_hz,
            "splitting_hz": self.splitting_hz,
            "bandwidth_ok": self.bandwidth_ok,
            "chosen": self.chosen,
            "timescales": self.timescales.to_dict(),
        }


def feasibility(record: MaterialRecord, budget: TimescaleBudget, b_field: float = 0.0, margin: float = 10.0) -> FeasibilityReport:
    """Fill the budget's material times from ``record`` at the nearest listed field and check it.

    The signal bandwidth ``1/dt_s`` must not exceed the smallest ground splitting.
    """
    if not math.isfinite(b_field) or b_field < 0:
        raise InvalidArgument("magnetic field must be a non-negative number of tesla")
    t2o = _nearest(record.T2_opt, b_field)
    t2s = _nearest(record.T2_HF, b_field)
    missing = [n for n, v in (("T2_opt", t2o), ("T2_HF", t2s)) if v is None]
    if missing:
        raise InsufficientData(f"{record.ion} {record.isotope} site {record.site}: no {', '.join(missing)} data")
    filled = replace(
        budget,
        T2_opt=t2o.si,
        T2_spin=t2s.si,
        T1_opt=record.T1_opt.si if record.T1_opt is not None else budget.T1_opt,
    )
    report = validate_timescales(filled, margin)
    bandwidth = splitting = ok = None
    if budget.dt_s is not None and record.ground_splittings:
        bandwidth = 1.0 / budget.dt_s
        splitting = min(q.si for q in record.ground_splittings)
        ok = bandwidth <= splitting
    chosen = {
        "T2_opt": asdict(t2o),
        "T2_HF": asdict(t2s),
    }
    return FeasibilityReport(record.key, b_field, filled, report, bandwidth, splitting, ok, chosen)
