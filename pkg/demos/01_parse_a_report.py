"""
Reading one result report
=========================

Load the sample reports shipped with the tests and turn one of them into a
structured run.  Nothing here touches the network.
"""

from pathlib import Path

from specpower_trends import load_directory, parse_run
from specpower_trends.parser import ParseFailure

SAMPLES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "samples"
docs = load_directory(SAMPLES)
print(f"{len(docs)} reports, checksum of the first: {docs[0].checksum[:23]}...")

# the 2023 Xeon system
doc = next(d for d in docs if d.reference.result_id.endswith("00012"))
run = parse_run(doc)
print(run.result_id, run.cpu_name, run.vendor.value, run.marketing_class.value)
print("hardware available", run.hw_availability, "| tested", run.test_date)
print(f"{run.sockets} chips, {run.cores_total} cores, {run.threads_total} threads, {run.nodes} node(s)")

# the measurement table, full load first
for m in run.levels:
    print(f"{m.target_load:>5.0%}  {m.ssj_ops:>11,d} ssj_ops  {m.avg_power_w:7.1f} W")
print(f" idle  {'':>11s}          {run.idle_power_w:7.1f} W")

# a damaged report comes back as a failure value that quotes the offending text
broken = next(d for d in docs if d.reference.result_id.endswith("00016"))
failure = parse_run(broken)
assert isinstance(failure, ParseFailure)
print(failure.reason.value, failure.field, repr(failure.excerpt))
