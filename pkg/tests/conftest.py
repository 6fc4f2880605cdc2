from __future__ import annotations

import dataclasses
import datetime as dt
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from specpower_trends.corpus import RawResultDocument, ResultReference
from specpower_trends.parser import (BenchmarkRun, LoadLevelMeasurement, MarketingClass, MonthYear, OsFamily,
                                     TARGET_LOADS, Vendor)

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLES = FIXTURES / "samples"


def make_run(result_id: str = "run-0001", ops=None, power=None, idle: float = 50.0, **overrides) -> BenchmarkRun:
    """A consistent, comparable two-socket Xeon run unless overridden.

    ``ops`` and ``power`` list the ten levels from 100% down to 10%.
    """
    ops = ops if ops is not None else [round(100_000 * t) for t in TARGET_LOADS]
    power = power if power is not None else [50.0 + 150.0 * t for t in TARGET_LOADS]
    levels = tuple(LoadLevelMeasurement(t, int(o), float(p)) for t, o, p in zip(TARGET_LOADS, ops, power))
    run = BenchmarkRun(
        result_id=result_id,
        accepted=True,
        acceptance_marker=None,
        test_date=MonthYear(2020, 3),
        submission_date=MonthYear(2020, 5),
        hw_availability=MonthYear(2020, 2),
        sw_availability=MonthYear(2019, 11),
        date_issues={},
        hardware_vendor="Acme Systems",
        system_model="Acme 1",
        vendor=Vendor.INTEL,
        cpu_name="Intel Xeon Gold 6230",
        cpu_names=("Intel Xeon Gold 6230",),
        cpu_nominal_mhz=2100.0,
        nodes=1,
        sockets=2,
        cores_total=40,
        threads_total=80,
        cores_per_chip=20,
        marketing_class=MarketingClass.XEON,
        os_name="Windows Server 2019 Datacenter",
        os_family=OsFamily.WINDOWS,
        jvm_name="HotSpot",
        memory_gb=192.0,
        levels=levels,
        idle_power_w=float(idle),
        reported_overall_efficiency=0.0,
    )
    return dataclasses.replace(run, **overrides)


def make_doc(body: str, result_id: str = "power_ssj2008-20230101-00001", marker: str | None = None):
    ref = ResultReference(result_id, f"https://example.invalid/{result_id}.txt", marker, dt.date(2023, 1, 1))
    return RawResultDocument.from_bytes(ref, body.encode("utf-8"), dt.datetime(2024, 6, 30, tzinfo=dt.timezone.utc))


@pytest.fixture
def samples_dir() -> Path:
    return SAMPLES


@pytest.fixture
def sample_text():
    def read(result_id: str) -> str:
        return (SAMPLES / f"{result_id}.txt").read_bytes().decode("utf-8", errors="replace")

    return read


class FakeSite:
    """A local HTTP server serving canned bodies; counts requests per path."""

    def __init__(self):
        self.pages: dict[str, tuple[int, bytes]] = {}
        self.hits: dict[str, int] = {}
        site = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                site.hits[self.path] = site.hits.get(self.path, 0) + 1
                status, body = site.pages.get(self.path, (404, b"not found"))
                self.send_response(status)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def add(self, path: str, body: bytes | str, status: int = 200):
        self.pages[path] = (status, body.encode("utf-8") if isinstance(body, str) else body)

    def publish_samples(self, ids, markers=None, index_path="/results/power_ssj2008.html"):
        markers = markers or {}
        rows = []
        for rid in ids:
            self.add(f"/res/{rid}.txt", (SAMPLES / f"{rid}.txt").read_bytes())
            link = f'<a href="../res/{rid}.html">HTML</a> <a href="../res/{rid}.txt">Text</a>'
            note = markers.get(rid, "")
            rows.append(f"<tr><td>Acme</td><td>{link}</td><td>{note}</td></tr>")
        self.add(index_path, "<html><body><table>" + "\n".join(rows) + "</table></body></html>")
        return self.url + index_path

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def site():
    s = FakeSite()
    yield s
    s.close()


def sample_ids() -> list[str]:
    return sorted(p.stem for p in SAMPLES.glob("*.txt"))


# acceptance verdicts, one per criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
