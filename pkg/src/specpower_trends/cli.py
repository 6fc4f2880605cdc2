"""Command-line entry point: fetch, parse, filter, analyze, explain, report.

Exit codes: 0 success, 1 usage error, 2 pipeline failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import corpus, reporting
from .config import load_config
from .metrics import compute_metrics
from .parser import run_to_record

log = logging.getLogger("specpower_trends")

CACHE_ENV = "SPECPOWER_CACHE_DIR"
EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    pass


class PipelineFailure(Exception):
    pass


@dataclass
class PipelineConfig:
    index_url: str
    cache_dir: Path
    cutoff: dt.date
    out_dir: Path
    formats: frozenset[str]
    jobs: int
    offline: bool
    raw: dict

    def __post_init__(self):
        if self.out_dir.resolve() == self.cache_dir.resolve():
            raise UsageError("output directory must differ from the cache directory")
        if self.cutoff > dt.date.today():
            raise UsageError(f"cutoff {self.cutoff} lies in the future")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file overriding the packaged defaults")
    common.add_argument("--cutoff", help="snapshot cutoff, YYYY-MM-DD (inclusive)")
    common.add_argument("--cache-dir", help=f"corpus cache (default: ${CACHE_ENV} or config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker budget for downloads and parsing")
    common.add_argument("--offline", action="store_true", help="never touch the network")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="specpower-trends", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("fetch", parents=[common], help="download the result corpus into the cache")
    sub.add_parser("parse", parents=[common], help="parse cached reports into run records")
    sub.add_parser("filter", parents=[common], help="apply the exclusion stages and write the ledger")
    analyze = sub.add_parser("analyze", parents=[common], help="write every figure table and plot")
    analyze.add_argument("--only", action="append", default=[],
                         help="emit only this figure table (fig1..fig6) or named table; repeatable")
    explain = sub.add_parser("explain", parents=[common], help="print the dossier of one run")
    explain.add_argument("result_id")
    sub.add_parser("report", parents=[common], help="print the headline statistics")
    return parser


def resolve_config(args) -> PipelineConfig:
    raw = load_config(args.config)
    corpus_cfg, out_cfg = raw.get("corpus", {}), raw.get("output", {})
    cutoff = args.cutoff or corpus_cfg.get("cutoff")
    try:
        cutoff = cutoff if isinstance(cutoff, dt.date) else dt.date.fromisoformat(str(cutoff))
    except ValueError:
        raise UsageError(f"bad cutoff {cutoff!r}; expected YYYY-MM-DD") from None
    cache = args.cache_dir or os.environ.get(CACHE_ENV) or corpus_cfg.get("cache_dir", "specpower-cache")
    jobs = args.jobs if args.jobs is not None else int(corpus_cfg.get("jobs", 4))
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    return PipelineConfig(
        index_url=corpus_cfg.get("index_url", corpus.DEFAULT_INDEX_URL),
        cache_dir=Path(cache),
        cutoff=cutoff,
        out_dir=Path(args.out or out_cfg.get("out_dir", "specpower-out")),
        formats=frozenset(out_cfg.get("formats", ("table", "records", "svg"))),
        jobs=jobs,
        offline=args.offline,
        raw=raw,
    )


def load_corpus(cfg: PipelineConfig) -> list[corpus.RawResultDocument]:
    if not cfg.cache_dir.is_dir():
        raise PipelineFailure(f"load: no corpus cache at {cfg.cache_dir}; run `fetch` first")
    manifest_path = cfg.cache_dir / corpus.MANIFEST_NAME
    manifest = corpus.read_manifest(manifest_path) if manifest_path.exists() else None
    try:
        docs = corpus.load_directory(cfg.cache_dir, manifest)
    except corpus.CorpusError as exc:
        raise PipelineFailure(f"load: {exc}") from exc
    docs = [d for d in docs if d.reference.published is None or d.reference.published <= cfg.cutoff]
    if not docs:
        raise PipelineFailure(f"load: no result files in {cfg.cache_dir}")
    log.info("loaded %d result files from %s", len(docs), cfg.cache_dir)
    return docs


def _check_writable(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = tempfile.NamedTemporaryFile(dir=path, prefix=".probe-", delete=True)
        probe.close()
    except OSError as exc:
        raise PipelineFailure(f"output: {path} is not writable ({exc})") from exc


class _Staging:
    """Collects outputs in a scratch directory and moves them into place only on success."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.dir = Path(tempfile.mkdtemp(dir=out_dir, prefix=".staging-"))
        self.names: list[str] = []

    def write(self, name: str, text: str) -> None:
        (self.dir / name).write_text(text, encoding="utf-8", newline="\n")
        self.names.append(name)

    def commit(self) -> list[Path]:
        written = []
        for name in self.names:
            target = self.out_dir / name
            os.replace(self.dir / name, target)
            written.append(target)
        shutil.rmtree(self.dir, ignore_errors=True)
        return written

    def abort(self) -> None:
        shutil.rmtree(self.dir, ignore_errors=True)


def _pipeline(cfg: PipelineConfig) -> reporting.PipelineResult:
    docs = load_corpus(cfg)
    try:
        return reporting.run_pipeline(docs, cfg.raw, jobs=cfg.jobs)
    except Exception as exc:  # any module error is reported under the stage name
        raise PipelineFailure(f"parse/filter/metrics: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands

def cmd_fetch(cfg: PipelineConfig) -> int:
    if cfg.offline:
        manifest_path = cfg.cache_dir / corpus.MANIFEST_NAME
        if not manifest_path.exists():
            raise PipelineFailure(f"fetch: offline and no manifest at {manifest_path}")
        manifest = corpus.read_manifest(manifest_path)
        corpus.load_directory(cfg.cache_dir, manifest)
        print(f"verified {len(manifest.entries)} cached results against {manifest_path}")
        return EXIT_OK
    c = cfg.raw.get("corpus", {})
    try:
        manifest = corpus.sync_corpus(cfg.index_url, cfg.cutoff, cfg.cache_dir, jobs=cfg.jobs,
                                      per_host=int(c.get("per_host", 1)), delay=float(c.get("delay_s", 0.5)),
                                      retries=int(c.get("retries", 3)))
    except corpus.SyncError as exc:
        for rid, why in sorted(exc.failures.items()):
            print(f"failed: {rid}: {why}", file=sys.stderr)
        print(f"fetch: {len(exc.manifest.entries)} fetched, {len(exc.failures)} failed", file=sys.stderr)
        return EXIT_FAILURE
    except corpus.CorpusError as exc:
        raise PipelineFailure(f"fetch: {exc}") from exc
    print(f"{len(manifest.entries)} results up to {cfg.cutoff} in {cfg.cache_dir}")
    return EXIT_OK


def cmd_parse(cfg: PipelineConfig) -> int:
    _check_writable(cfg.out_dir)
    result = _pipeline(cfg)
    staging = _Staging(cfg.out_dir)
    staging.write("records.jsonl", reporting.run_records(result))
    staging.write("failures.jsonl", reporting.failure_records(result))
    staging.commit()
    print(f"parsed {len(result.parsed)} runs, {len(result.failures)} failures -> {cfg.out_dir}")
    return EXIT_OK


def cmd_filter(cfg: PipelineConfig) -> int:
    _check_writable(cfg.out_dir)
    result = _pipeline(cfg)
    staging = _Staging(cfg.out_dir)
    staging.write("filter_report.csv", reporting.filter_report_table(result).to_text())
    staging.write("exclusions.csv", reporting.exclusions_table(result).to_text())
    staging.commit()
    print(reporting.filter_report_table(result).to_text(), end="")
    return EXIT_OK


def _selected(only: list[str]) -> set[str]:
    known = set(reporting.FIGURES) | {t.__name__ for t in reporting.FIGURE_TABLES.values()} | {
        "filter_report", "exclusions", "records", "report"}
    chosen = set()
    for item in only:
        if item not in known:
            raise UsageError(f"--only: unknown output {item!r}")
        for fig, builder in reporting.FIGURE_TABLES.items():
            if item == builder.__name__:
                item = fig
        chosen.add(item)
    return chosen


def cmd_analyze(cfg: PipelineConfig, only: list[str]) -> int:
    chosen = _selected(only)
    _check_writable(cfg.out_dir)
    result = _pipeline(cfg)

    def wanted(name):
        return not chosen or name in chosen

    staging = _Staging(cfg.out_dir)
    try:
        if "table" in cfg.formats:
            if wanted("filter_report"):
                staging.write("filter_report.csv", reporting.filter_report_table(result).to_text())
            if wanted("exclusions"):
                staging.write("exclusions.csv", reporting.exclusions_table(result).to_text())
            for fig, builder in reporting.FIGURE_TABLES.items():
                if wanted(fig):
                    table = builder(result)
                    staging.write(f"{table.name}.csv", table.to_text())
        if "records" in cfg.formats and wanted("records"):
            staging.write("records.jsonl", reporting.run_records(result))
            staging.write("failures.jsonl", reporting.failure_records(result))
        if wanted("report"):
            staging.write("report.json", reporting.headline_text(result))
        if "svg" in cfg.formats and not chosen:
            for fig, builder in reporting.FIGURE_TABLES.items():
                if wanted(fig):
                    staging.write(f"{builder.__name__}.svg", reporting.figure_svg(result, fig))
    except Exception as exc:
        staging.abort()
        raise PipelineFailure(f"emit: {exc}") from exc
    written = staging.commit()
    c, k = result.consistency_report, result.comparability_report
    print(f"{c.input_count} parsed -> {c.retained_count} consistent -> {k.retained_count} comparable; "
          f"{len(written)} files in {cfg.out_dir}")
    return EXIT_OK


def cmd_explain(cfg: PipelineConfig, result_id: str) -> int:
    result = _pipeline(cfg)
    run = next((r for r in result.parsed if r.result_id == result_id), None)
    if run is None:
        failure = next((f for f in result.failures if f.result_id == result_id), None)
        if failure is None:
            print(f"{result_id}: not found", file=sys.stderr)
            return EXIT_FAILURE
        print(f"{result_id}: parse failure ({failure.reason.value}) in field {failure.field}: {failure.excerpt!r}")
        return EXIT_OK

    print(f"== {run.result_id}")
    for key, value in run_to_record(run).items():
        if key in ("record", "levels"):
            continue
        print(f"  {key:28s} {value}")
    print("  levels")
    for m in run.levels:
        print(f"    {round(m.target_load * 100):>4d}%  ssj_ops={m.ssj_ops:>12,d}  power={m.avg_power_w:8.1f} W")
    print(f"    idle   power={run.idle_power_w:.1f} W")

    exc = result.exclusion_for(result_id)
    print("\n== verdict")
    print(f"  excluded at {exc.stage.value}: {exc.detail}" if exc else "  retained in the analysis population")

    m = compute_metrics(run)
    print("\n== metrics")
    print(f"  overall_efficiency           {m.overall_efficiency:.1f} ssj_ops/W "
          f"(reported {run.reported_overall_efficiency:g})")
    print(f"  idle_fraction                {reporting.fmt_ratio(m.idle_fraction)}")
    print(f"  extrapolated_idle_w          {reporting.fmt_watts(m.extrapolated_idle_w)}"
          + ("  [<= 0 W, pathological]" if m.extrapolation_flag else ""))
    print(f"  eiq                          {reporting.fmt_ratio(m.eiq)}")
    print("  level   efficiency  relative  W/socket")
    for lvl in sorted(m.efficiency_per_level, reverse=True):
        print(f"  {round(lvl * 100):>4d}%  {m.efficiency_per_level[lvl]:11.1f}  "
              f"{reporting.fmt_ratio(m.relative_efficiency[lvl]):>8s}  {m.per_socket_power[lvl]:8.1f}")
    return EXIT_OK


def cmd_report(cfg: PipelineConfig) -> int:
    result = _pipeline(cfg)
    sys.stdout.write(reporting.headline_text(result))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on --help and on usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "fetch":
            return cmd_fetch(cfg)
        if args.command == "parse":
            return cmd_parse(cfg)
        if args.command == "filter":
            return cmd_filter(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.only)
        if args.command == "explain":
            return cmd_explain(cfg, args.result_id)
        if args.command == "report":
            return cmd_report(cfg)
    except UsageError as exc:
        print(f"specpower-trends: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineFailure, corpus.CorpusError) as exc:
        print(f"specpower-trends: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
