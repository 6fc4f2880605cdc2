"""
Which runs are analysed
=======================

Two passes of exclusions.  Each dropped run is charged to the first stage it
fails and the reason quotes the field that tripped it.
"""

import io
from pathlib import Path

from specpower_trends import comparability_filter, consistency_filter, load_directory, parse_run
from specpower_trends.config import default_config
from specpower_trends.filters import FilterConfig, write_exclusions

SAMPLES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "samples"
parsed = [r for r in (parse_run(d) for d in load_directory(SAMPLES)) if hasattr(r, "levels")]

# thresholds come from the packaged config; copy and edit it to experiment
cfg = FilterConfig.from_mapping(default_config()["filters"])
print(cfg)

consistent, report1, excl1 = consistency_filter(parsed, cfg)
comparable, report2, excl2 = comparability_filter(consistent, cfg)
print(f"{report1.input_count} parsed -> {report1.retained_count} consistent -> {report2.retained_count} comparable")
for stage, n in {**report1.per_stage_counts, **report2.per_stage_counts}.items():
    print(f"  {stage.value:24s} {n}")

buf = io.StringIO()
write_exclusions(buf, excl1 + excl2)
print(buf.getvalue())
