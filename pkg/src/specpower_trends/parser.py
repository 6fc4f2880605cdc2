"""Parsing of SPECpower_ssj2008 ``.txt`` result reports.

The reports are semi-structured: a header block of ``Label: value`` pairs
(often two pairs per line, separated by a wide gap), a "Benchmark Results
Summary" table with one row per target load plus the active idle row, and a
hardware/software description block.  Everything here is anchored on labels
and row shapes rather than on column positions, because the layout drifted
over the years.

``parse_run`` never raises for bad input; it returns a :class:`ParseFailure`
so a batch over a thousand files always completes.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple

from .corpus import RawResultDocument

TARGET_LOADS = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1)

MONTHS = {
    "jan": 1, "january": 1,
    "feb": 2, "february": 2,
    "mar": 3, "march": 3,
    "apr": 4, "april": 4,
    "may": 5,
    "jun": 6, "june": 6,
    "jul": 7, "july": 7,
    "aug": 8, "august": 8,
    "sep": 9, "sept": 9, "september": 9,
    "oct": 10, "october": 10,
    "nov": 11, "november": 11,
    "dec": 12, "december": 12,
}


class ParseReason(str, enum.Enum):
    MISSING_FIELD = "MissingField"
    MALFORMED_VALUE = "MalformedValue"
    AMBIGUOUS_VALUE = "AmbiguousValue"
    TABLE_SHAPE_ERROR = "TableShapeError"


class Vendor(str, enum.Enum):
    INTEL = "Intel"
    AMD = "AMD"
    OTHER = "Other"


class MarketingClass(str, enum.Enum):
    XEON = "Xeon"
    OPTERON = "Opteron"
    EPYC = "EPYC"
    OTHER = "Other"


class OsFamily(str, enum.Enum):
    WINDOWS = "Windows"
    LINUX = "Linux"
    OTHER = "Other"


class ParseError(ValueError):
    """A single field could not be turned into a value."""

    def __init__(self, reason: ParseReason, text: str, message: str = "", field: str = ""):
        super().__init__(message or f"{reason.value}: {text!r}")
        self.reason = reason
        self.text = text
        self.field = field


class MonthYear(NamedTuple):
    year: int
    month: int

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    @classmethod
    def from_string(cls, text: str) -> "MonthYear":
        year, month = text.split("-")
        return cls(int(year), int(month))

    def months_since(self, other: "MonthYear") -> int:
        return (self.year - other.year) * 12 + (self.month - other.month)


@dataclass(frozen=True)
class LoadLevelMeasurement:
    target_load: float
    ssj_ops: int
    avg_power_w: float


@dataclass(frozen=True)
class BenchmarkRun:
    result_id: str
    accepted: bool
    acceptance_marker: str | None
    test_date: MonthYear | None
    submission_date: MonthYear | None
    hw_availability: MonthYear | None
    sw_availability: MonthYear | None
    # raw text of date fields that parsed as ambiguous, keyed by field name
    date_issues: dict[str, str]
    hardware_vendor: str | None
    system_model: str | None
    vendor: Vendor
    cpu_name: str
    cpu_names: tuple[str, ...]
    cpu_nominal_mhz: float
    nodes: int | None
    sockets: int
    cores_total: int
    threads_total: int | None
    cores_per_chip: int
    marketing_class: MarketingClass
    os_name: str | None
    os_family: OsFamily
    jvm_name: str | None
    memory_gb: float | None
    levels: tuple[LoadLevelMeasurement, ...]
    idle_power_w: float
    reported_overall_efficiency: float

    def level(self, target_load: float) -> LoadLevelMeasurement:
        for m in self.levels:
            if abs(m.target_load - target_load) < 1e-9:
                return m
        raise KeyError(f"{self.result_id}: no measurement at target load {target_load:g}")


@dataclass(frozen=True)
class ParseFailure:
    result_id: str
    field: str
    excerpt: str
    reason: ParseReason

    def __post_init__(self):
        if len(self.excerpt) > 120:
            object.__setattr__(self, "excerpt", self.excerpt[:120])


# ---------------------------------------------------------------------------
# field grammars

_CPU_ENABLED_RE = re.compile(
    r"^\s*(\d+)\s*cores?\s*,\s*(\d+)\s*chips?\s*,\s*(\d+)\s*cores?\s*/\s*chips?\s*$",
    re.IGNORECASE,
)


def parse_cpu_enabled(text: str) -> tuple[int, int, int]:
    """Parse ``"84 cores, 2 chips, 42 cores/chip"`` into (cores, chips, cores per chip)."""
    m = _CPU_ENABLED_RE.match(text)
    if not m:
        raise ParseError(ParseReason.MALFORMED_VALUE, text, f"unrecognised CPU(s) Enabled value {text!r}")
    counts = tuple(int(g) for g in m.groups())
    if min(counts) <= 0:
        raise ParseError(ParseReason.MALFORMED_VALUE, text, f"non-positive count in {text!r}")
    return counts


def format_cpu_enabled(cores: int, chips: int, cores_per_chip: int) -> str:
    def noun(n, word):
        return f"{n} {word}" if n == 1 else f"{n} {word}s"

    per_chip = "core/chip" if cores_per_chip == 1 else "cores/chip"
    return f"{noun(cores, 'core')}, {noun(chips, 'chip')}, {cores_per_chip} {per_chip}"


_MONTH_NAME = r"(?P<mon>[A-Za-z]{3,9})\.?"
_DATE_PATTERNS = [
    # "Nov 15, 2007" / "Nov 15 2007"
    re.compile(rf"^{_MONTH_NAME}\s+(?P<day>\d{{1,2}}),?\s+(?P<year>\d{{4}})$"),
    # "15 Nov 2007"
    re.compile(rf"^(?P<day>\d{{1,2}})[\s-]+{_MONTH_NAME},?[\s-]+(?P<year>\d{{4}})$"),
    # "Feb-2023", "February 2023", "Feb-23", "Feb 2023"
    re.compile(rf"^{_MONTH_NAME}\s*[-/ ,]\s*(?P<year>\d{{2}}|\d{{4}})$"),
    # "2023-02", "2023/2"
    re.compile(r"^(?P<year>\d{4})[-/.](?P<month>\d{1,2})$"),
    # "02-2023", "2/2023"
    re.compile(r"^(?P<month>\d{1,2})[-/.](?P<year>\d{4})$"),
    # "02/23"
    re.compile(r"^(?P<month>\d{1,2})[-/.](?P<year>\d{2})$"),
]
_EMBEDDED_DATE_RE = re.compile(r"\b([A-Za-z]{3,9})\.?\s*[-/ ]\s*(\d{4})\b")


def _resolve(text, mon, month, year, two_digit_century):
    if mon is not None:
        month = MONTHS.get(mon.lower())
        if month is None:
            raise ParseError(ParseReason.MALFORMED_VALUE, text, f"unknown month name in {text!r}")
    else:
        month = int(month)
    if not 1 <= month <= 12:
        raise ParseError(ParseReason.MALFORMED_VALUE, text, f"month out of range in {text!r}")
    if len(year) == 2:
        if two_digit_century is None:
            raise ParseError(ParseReason.AMBIGUOUS_VALUE, text, f"two-digit year in {text!r}")
        return MonthYear(two_digit_century + int(year), month)
    return MonthYear(int(year), month)


def parse_month_year(text: str, two_digit_century: int | None = None) -> MonthYear:
    """Normalise a report date to (year, month).

    Accepts the spellings seen in the reports (``Feb-2023``, ``February 2023``,
    ``Nov 15, 2007``, ``2023-02``).  Two-digit years are ambiguous unless a
    century is given.  A value naming several different months is ambiguous.
    """
    s = " ".join(text.split())
    for pattern in _DATE_PATTERNS:
        m = pattern.match(s)
        if m:
            g = m.groupdict()
            return _resolve(text, g.get("mon"), g.get("month"), g["year"], two_digit_century)

    found = set()
    for mon, year in _EMBEDDED_DATE_RE.findall(s):
        if mon.lower() in MONTHS:
            found.add(MonthYear(int(year), MONTHS[mon.lower()]))
    if len(found) > 1:
        raise ParseError(ParseReason.AMBIGUOUS_VALUE, text, f"several dates in {text!r}")
    if len(found) == 1:
        return found.pop()
    raise ParseError(ParseReason.MALFORMED_VALUE, text, f"unrecognised date {text!r}")


def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def classify_vendor_and_class(cpu_name: str) -> tuple[Vendor, MarketingClass]:
    tokens = _tokens(cpu_name)
    classes = [c for c in (MarketingClass.XEON, MarketingClass.OPTERON, MarketingClass.EPYC)
               if c.value.lower() in tokens]
    marketing_class = classes[0] if len(classes) == 1 else MarketingClass.OTHER

    has_intel, has_amd = "intel" in tokens, "amd" in tokens
    if has_intel and not has_amd:
        vendor = Vendor.INTEL
    elif has_amd and not has_intel:
        vendor = Vendor.AMD
    elif not has_intel and not has_amd and marketing_class is not MarketingClass.OTHER:
        # product line names are vendor-exclusive
        vendor = Vendor.INTEL if marketing_class is MarketingClass.XEON else Vendor.AMD
    else:
        vendor = Vendor.OTHER
    return vendor, marketing_class


_LINUX_MARKERS = ("linux", "suse", "red hat", "redhat", "ubuntu", "centos")


def classify_os_family(os_name: str | None) -> OsFamily:
    if not os_name:
        return OsFamily.OTHER
    lowered = os_name.lower()
    if "windows" in lowered:
        return OsFamily.WINDOWS
    if any(marker in lowered for marker in _LINUX_MARKERS):
        return OsFamily.LINUX
    return OsFamily.OTHER


def parse_number(text: str) -> float:
    """Parse ``"3,581,617"`` or ``"348.5 W"``; separators and unit suffixes are dropped."""
    m = re.match(r"^\s*([-+]?[\d,]*\.?\d+)", text)
    if not m:
        raise ParseError(ParseReason.MALFORMED_VALUE, text, f"not a number: {text!r}")
    return float(m.group(1).replace(",", ""))


# ---------------------------------------------------------------------------
# document scanning

_LABEL_RE = re.compile(r"^(?P<label>[A-Za-z#][\w#()/ .'&+-]{0,48}?)\s*:\s*(?P<value>.*)$")
_KNOWN_LABELS = {
    "test sponsor", "tested by", "spec license #", "test location", "test date",
    "publication", "hardware availability", "software availability", "system source",
    "system designation", "power provisioning", "hardware vendor", "model", "cpu name",
    "cpu frequency (mhz)", "cpu(s) enabled", "hardware threads", "memory amount (gb)",
    "operating system (os)", "operating system", "jvm vendor", "jvm version",
    "# of identical nodes", "number of nodes", "nodes", "set identifier",
}


@dataclass
class _Field:
    value: str
    line: str


def scan_labeled_fields(body: str) -> dict[str, list[_Field]]:
    """Collect ``Label: value`` pairs, several per line allowed.

    Pairs on one line are separated by runs of two or more spaces.  A label
    whose value is pushed into the next gap (``Test Date:      Nov 15, 2007``)
    takes the following segment as its value.
    """
    fields: dict[str, list[_Field]] = {}
    for line in body.splitlines():
        segments = [s for s in re.split(r"\s{2,}|\t+", line.strip()) if s]
        pending = None
        for seg in segments:
            m = _LABEL_RE.match(seg)
            is_label = bool(m) and (pending is None or m.group("label").strip().lower() in _KNOWN_LABELS)
            if is_label:
                label = m.group("label").strip().lower()
                value = m.group("value").strip()
                if value:
                    fields.setdefault(label, []).append(_Field(value, line))
                    pending = None
                else:
                    pending = label
            elif pending is not None:
                fields.setdefault(pending, []).append(_Field(seg.strip(), line))
                pending = None
    return fields


_ROW_RE = re.compile(
    r"^\s*(?P<target>\d{1,3})\s*%\s+(?P<actual>[\d.]+)\s*%\s+(?P<ops>[\d,]+)\s+"
    r"(?P<power>[\d,]*\.?\d+)\s+(?P<ratio>[\d,]*\.?\d+)\s*$"
)
_IDLE_RE = re.compile(r"^\s*Active\s+Idle\s+(?P<ops>[\d,]+)\s+(?P<power>[\d,]*\.?\d+)\s+(?P<ratio>[\d,]*\.?\d+)\s*$",
                      re.IGNORECASE)
_OVERALL_RE = re.compile(r"ssj_ops\s*/\s*\S*?power\s*=\s*(?P<score>[\d,]*\.?\d+)", re.IGNORECASE)
_HEADLINE_RE = re.compile(r"=\s*(?P<score>[\d,]*\.?\d+)\s+overall\s+ssj_ops/watt", re.IGNORECASE)
_NOT_ACCEPTED_RE = re.compile(r"non[- ]?compliant|not\s+accepted|withdrawn", re.IGNORECASE)


class _Failed(Exception):
    def __init__(self, failure_field: str, excerpt: str, reason: ParseReason):
        self.failure_field = failure_field
        self.excerpt = excerpt
        self.reason = reason


def _first(fields, *labels, required=True):
    for label in labels:
        if label in fields:
            return fields[label][0]
    if required:
        raise _Failed(labels[0], "", ParseReason.MISSING_FIELD)
    return None


def _parse_table(body: str):
    start = body.find("Benchmark Results Summary")
    region = body[start:] if start >= 0 else body
    levels = {}
    idle = None
    for line in region.splitlines():
        m = _ROW_RE.match(line)
        if m:
            target = int(m.group("target"))
            if target in levels or target % 10 or not 10 <= target <= 100:
                raise _Failed("levels", line.strip(), ParseReason.TABLE_SHAPE_ERROR)
            levels[target] = LoadLevelMeasurement(
                target_load=target / 100,
                ssj_ops=int(parse_number(m.group("ops"))),
                avg_power_w=parse_number(m.group("power")),
            )
            continue
        m = _IDLE_RE.match(line)
        if m and idle is None:
            idle = parse_number(m.group("power"))
    if len(levels) != 10:
        excerpt = region.strip().splitlines()[0] if region.strip() else ""
        raise _Failed("levels", excerpt, ParseReason.TABLE_SHAPE_ERROR)
    if idle is None:
        raise _Failed("idle_power_w", "", ParseReason.TABLE_SHAPE_ERROR)
    ordered = tuple(levels[t] for t in sorted(levels, reverse=True))
    for m in ordered:
        if m.avg_power_w <= 0:
            raise _Failed("levels", f"{m.avg_power_w:g}", ParseReason.MALFORMED_VALUE)
    if idle <= 0:
        raise _Failed("idle_power_w", f"{idle:g}", ParseReason.MALFORMED_VALUE)
    return ordered, idle


def _value(fields, label, convert, failure_field=None):
    f = fields[label][0]
    try:
        return convert(f.value)
    except ParseError as exc:
        raise _Failed(failure_field or label, f.value, exc.reason) from None


def _nominal_mhz(fields, cpu_name):
    for label in ("cpu frequency (mhz)", "cpu frequency", "cpu frequency (ghz)"):
        if label in fields:
            raw = fields[label][0].value
            value = _value(fields, label, parse_number, "cpu_nominal_mhz")
            if "ghz" in label or "ghz" in raw.lower():
                value *= 1000
            return value
    m = re.search(r"(\d+(?:\.\d+)?)\s*GHz", cpu_name, re.IGNORECASE)
    if m:
        return float(m.group(1)) * 1000
    raise _Failed("cpu_nominal_mhz", "", ParseReason.MISSING_FIELD)


def _parse_body(doc: RawResultDocument, two_digit_century: int | None) -> BenchmarkRun:
    body = doc.body
    fields = scan_labeled_fields(body)

    date_issues: dict[str, str] = {}

    def date(field_name, *labels, required=True):
        f = _first(fields, *labels, required=required)
        if f is None:
            return None
        try:
            return parse_month_year(f.value, two_digit_century)
        except ParseError as exc:
            if exc.reason is ParseReason.AMBIGUOUS_VALUE:
                date_issues[field_name] = f.value
                return None
            raise _Failed(field_name, f.value, exc.reason) from None

    test_date = date("test_date", "test date")
    submission_date = date("submission_date", "publication", required=False)
    hw = date("hw_availability", "hardware availability")
    sw = date("sw_availability", "software availability")

    cpu_field = _first(fields, "cpu name")
    cpu_names = tuple(dict.fromkeys(f.value for f in fields["cpu name"]))
    cpu_name = cpu_field.value
    vendor, marketing_class = classify_vendor_and_class(cpu_name)

    _first(fields, "cpu(s) enabled")
    cores_total, sockets, cores_per_chip = _value(fields, "cpu(s) enabled", parse_cpu_enabled)

    threads_total = None
    if "hardware threads" in fields:
        threads_total = int(_value(fields, "hardware threads", parse_number, "threads_total"))

    nodes = None
    for label in ("# of identical nodes", "number of nodes", "nodes"):
        if label in fields:
            counts = []
            for f in fields[label]:
                try:
                    counts.append(int(parse_number(f.value)))
                except ParseError:
                    raise _Failed("nodes", f.value, ParseReason.MALFORMED_VALUE) from None
            nodes = sum(counts)
            break

    memory_gb = None
    if "memory amount (gb)" in fields:
        memory_gb = _value(fields, "memory amount (gb)", parse_number, "memory_gb")

    os_field = _first(fields, "operating system (os)", "operating system", required=False)
    os_name = os_field.value if os_field else None
    jvm_field = _first(fields, "jvm version", required=False)
    vendor_field = _first(fields, "hardware vendor", required=False)
    model_field = _first(fields, "model", required=False)

    levels, idle = _parse_table(body)

    m = _OVERALL_RE.search(body) or _HEADLINE_RE.search(body)
    if not m:
        raise _Failed("reported_overall_efficiency", "", ParseReason.MISSING_FIELD)
    overall = parse_number(m.group("score"))

    marker = doc.reference.publication_marker
    if not marker:
        hit = _NOT_ACCEPTED_RE.search(body)
        marker = hit.group(0) if hit else None

    return BenchmarkRun(
        result_id=doc.reference.result_id,
        accepted=marker is None,
        acceptance_marker=marker,
        test_date=test_date,
        submission_date=submission_date,
        hw_availability=hw,
        sw_availability=sw,
        date_issues=date_issues,
        hardware_vendor=vendor_field.value if vendor_field else None,
        system_model=model_field.value if model_field else None,
        vendor=vendor,
        cpu_name=cpu_name,
        cpu_names=cpu_names,
        cpu_nominal_mhz=_nominal_mhz(fields, cpu_name),
        nodes=nodes,
        sockets=sockets,
        cores_total=cores_total,
        threads_total=threads_total,
        cores_per_chip=cores_per_chip,
        marketing_class=marketing_class,
        os_name=os_name,
        os_family=classify_os_family(os_name),
        jvm_name=jvm_field.value if jvm_field else None,
        memory_gb=memory_gb,
        levels=levels,
        idle_power_w=idle,
        reported_overall_efficiency=overall,
    )


def parse_run(doc: RawResultDocument, two_digit_century: int | None = None) -> BenchmarkRun | ParseFailure:
    """Parse one report, returning a ParseFailure for the first offending field."""
    try:
        return _parse_body(doc, two_digit_century)
    except _Failed as exc:
        excerpt = exc.excerpt if exc.excerpt in doc.body else ""
        return ParseFailure(doc.reference.result_id, exc.failure_field, excerpt, exc.reason)


def parse_many(docs: Iterable[RawResultDocument], jobs: int = 1,
               two_digit_century: int | None = None) -> tuple[list[BenchmarkRun], list[ParseFailure]]:
    docs = list(docs)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(partial(parse_run, two_digit_century=two_digit_century), docs, chunksize=32))
    else:
        results = [parse_run(d, two_digit_century) for d in docs]
    runs = [r for r in results if isinstance(r, BenchmarkRun)]
    failures = [r for r in results if isinstance(r, ParseFailure)]
    return runs, failures


# ---------------------------------------------------------------------------
# record format: one JSON object per line, keys sorted

def _date_str(d):
    return None if d is None else str(d)


def _date_from(s):
    return None if s is None else MonthYear.from_string(s)


def run_to_record(run: BenchmarkRun) -> dict:
    return {
        "record": "run",
        "result_id": run.result_id,
        "accepted": run.accepted,
        "acceptance_marker": run.acceptance_marker,
        "test_date": _date_str(run.test_date),
        "submission_date": _date_str(run.submission_date),
        "hw_availability": _date_str(run.hw_availability),
        "sw_availability": _date_str(run.sw_availability),
        "date_issues": dict(run.date_issues),
        "hardware_vendor": run.hardware_vendor,
        "system_model": run.system_model,
        "vendor": run.vendor.value,
        "cpu_name": run.cpu_name,
        "cpu_names": list(run.cpu_names),
        "cpu_nominal_mhz": run.cpu_nominal_mhz,
        "nodes": run.nodes,
        "sockets": run.sockets,
        "cores_total": run.cores_total,
        "threads_total": run.threads_total,
        "cores_per_chip": run.cores_per_chip,
        "marketing_class": run.marketing_class.value,
        "os_name": run.os_name,
        "os_family": run.os_family.value,
        "jvm_name": run.jvm_name,
        "memory_gb": run.memory_gb,
        "levels": [
            {"target_load": m.target_load, "ssj_ops": m.ssj_ops, "avg_power_w": m.avg_power_w}
            for m in run.levels
        ],
        "idle_power_w": run.idle_power_w,
        "reported_overall_efficiency": run.reported_overall_efficiency,
    }


def run_from_record(rec: dict) -> BenchmarkRun:
    return BenchmarkRun(
        result_id=rec["result_id"],
        accepted=rec["accepted"],
        acceptance_marker=rec["acceptance_marker"],
        test_date=_date_from(rec["test_date"]),
        submission_date=_date_from(rec["submission_date"]),
        hw_availability=_date_from(rec["hw_availability"]),
        sw_availability=_date_from(rec["sw_availability"]),
        date_issues=dict(rec["date_issues"]),
        hardware_vendor=rec["hardware_vendor"],
        system_model=rec["system_model"],
        vendor=Vendor(rec["vendor"]),
        cpu_name=rec["cpu_name"],
        cpu_names=tuple(rec["cpu_names"]),
        cpu_nominal_mhz=float(rec["cpu_nominal_mhz"]),
        nodes=rec["nodes"],
        sockets=rec["sockets"],
        cores_total=rec["cores_total"],
        threads_total=rec["threads_total"],
        cores_per_chip=rec["cores_per_chip"],
        marketing_class=MarketingClass(rec["marketing_class"]),
        os_name=rec["os_name"],
        os_family=OsFamily(rec["os_family"]),
        jvm_name=rec["jvm_name"],
        memory_gb=None if rec["memory_gb"] is None else float(rec["memory_gb"]),
        levels=tuple(
            LoadLevelMeasurement(float(m["target_load"]), int(m["ssj_ops"]), float(m["avg_power_w"]))
            for m in rec["levels"]
        ),
        idle_power_w=float(rec["idle_power_w"]),
        reported_overall_efficiency=float(rec["reported_overall_efficiency"]),
    )


def failure_to_record(failure: ParseFailure) -> dict:
    return {
        "record": "failure",
        "result_id": failure.result_id,
        "field": failure.field,
        "excerpt": failure.excerpt,
        "reason": failure.reason.value,
    }


def failure_from_record(rec: dict) -> ParseFailure:
    return ParseFailure(rec["result_id"], rec["field"], rec["excerpt"], ParseReason(rec["reason"]))


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, ensure_ascii=False)


def write_records(fh: IO[str], records: Iterable[dict]) -> None:
    for rec in records:
        fh.write(dumps_record(rec))
        fh.write("\n")


def read_records(fh: IO[str]) -> Iterator[dict]:
    for line in fh:
        line = line.strip()
        if line:
            yield json.loads(line)
