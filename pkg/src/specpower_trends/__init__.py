"""Parse, filter and analyse published SPECpower_ssj2008 results."""

from .corpus import (CorpusManifest, RawResultDocument, ResultReference, fetch_index, fetch_result,
                     load_directory, sync_corpus)
from .filters import (ExclusionRecord, FilterConfig, FilterReport, Stage, canonical_year, comparability_filter,
                      consistency_filter)
from .metrics import (RunMetrics, compute_metrics, efficiency_at, eiq, extrapolated_idle, idle_fraction,
                      overall_efficiency, per_socket_power, relative_efficiency)
from .parser import (BenchmarkRun, LoadLevelMeasurement, MonthYear, ParseFailure, classify_vendor_and_class,
                     parse_cpu_enabled, parse_month_year, parse_run)
from .trends import (AnalysedRun, DistributionSummary, analyse, bin_by_year_vendor, correlation_scan, era_mean,
                     feature_share, submission_rate, top_k_vendor_counts)

__version__ = "0.1.0"
