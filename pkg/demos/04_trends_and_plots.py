"""
Year-by-vendor trends
=====================

Runs are binned by the year their hardware became available.  The same
pipeline the CLI uses produces the figure tables and SVG plots.
"""

import tempfile
from pathlib import Path

from specpower_trends import corpus, reporting, trends
from specpower_trends.config import default_config

SAMPLES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "samples"
result = reporting.run_pipeline(corpus.load_directory(SAMPLES), default_config())
runs = result.filtered

for (year, vendor), s in trends.bin_by_year_vendor(runs, trends.idle_fraction).items():
    print(f"{year} {vendor.value:5s} n={s.n} idle/full mean={s.mean:.3f}")

early = trends.era_mean(runs, trends.until(2010), trends.per_socket_power_at(1.0))
late = trends.era_mean(runs, trends.since(2022), trends.per_socket_power_at(1.0))
print(f"full-load W per socket: {early:.1f} up to 2010, {late:.1f} since 2022, ratio {late / early:.2f}")

print(trends.top_k_vendor_counts(runs, trends.overall_efficiency, 3))
print(trends.feature_share(result.consistent, lambda r: r.os_family, per_year=False))

out = Path(tempfile.mkdtemp(prefix="specpower-demo-"))
for fig, build in reporting.FIGURE_TABLES.items():
    table = build(result)
    (out / f"{table.name}.csv").write_text(table.to_text())
    (out / f"{table.name}.svg").write_text(reporting.figure_svg(result, fig))
print("tables and plots in", out)
print(reporting.fig3_overall_efficiency(result).to_text())
