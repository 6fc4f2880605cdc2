"""Fetching and caching of the public result corpus.

Layout of a cache directory::

    <cache>/results/<result_id>.txt        raw report bytes, as served
    <cache>/results/<result_id>.meta.json  url, checksum, fetch time, index marker
    <cache>/manifest.tsv                   pinned snapshot (result_id<TAB>sha256)

Everything downstream of this module can run from a plain directory of
``.txt`` files (see :func:`load_directory`), so the network is only needed
once.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Mapping
from urllib.parse import urljoin, urlparse

import requests

log = logging.getLogger(__name__)

DEFAULT_INDEX_URL = "https://www.spec.org/power_ssj2008/results/power_ssj2008.html"
RESULT_SLUG_RE = re.compile(r"power_ssj2008-(\d{8})-(\d{5})")
MANIFEST_NAME = "manifest.tsv"


class CorpusError(Exception):
    pass


class FetchError(CorpusError):
    def __init__(self, message: str, status: int | None = None, retryable: bool = True):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class IndexFormatError(CorpusError):
    pass


class IntegrityError(CorpusError):
    pass


class SyncError(CorpusError):
    def __init__(self, failures: Mapping[str, str], manifest: "CorpusManifest"):
        super().__init__(f"{len(failures)} result file(s) failed to download")
        self.failures = dict(failures)
        self.manifest = manifest


@dataclass(frozen=True)
class ResultReference:
    result_id: str
    url: str
    publication_marker: str | None = None
    # date embedded in the result slug; bounds the snapshot cutoff
    published: dt.date | None = None


@dataclass(frozen=True)
class RawResultDocument:
    reference: ResultReference
    body: str
    fetched_at: dt.datetime
    checksum: str

    @classmethod
    def from_bytes(cls, reference: ResultReference, raw: bytes, fetched_at: dt.datetime) -> "RawResultDocument":
        return cls(reference, decode_body(raw), fetched_at, checksum_bytes(raw))


@dataclass(frozen=True)
class CorpusManifest:
    snapshot_date: dt.date
    cutoff: dt.date
    entries: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [rid for rid, _ in self.entries]
        if ids != sorted(ids) or len(set(ids)) != len(ids):
            raise ValueError("manifest entries must be sorted by result_id without duplicates")

    def to_text(self) -> str:
        lines = [f"# snapshot_date: {self.snapshot_date.isoformat()}", f"# cutoff: {self.cutoff.isoformat()}"]
        lines += [f"{rid}\t{checksum}" for rid, checksum in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CorpusManifest":
        header, entries = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                header[key.strip()] = value.strip()
            elif line.strip():
                rid, checksum = line.split("\t")
                entries.append((rid, checksum))
        return cls(
            snapshot_date=dt.date.fromisoformat(header["snapshot_date"]),
            cutoff=dt.date.fromisoformat(header["cutoff"]),
            entries=tuple(entries),
        )

    def checksums(self) -> dict[str, str]:
        return dict(self.entries)


def checksum_bytes(raw: bytes) -> str:
    return "sha256:" + hashlib.sha256(raw).hexdigest()


def decode_body(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        return raw.decode("latin-1")


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# index page

_MARKER_RE = re.compile(r"\bNC\b|non[- ]?compliant|not\s+accepted|withdrawn", re.IGNORECASE)


class _IndexParser(HTMLParser):
    """Groups result links by table row and notes strike-through or NC flags."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.rows: list[dict] = []
        self._row = None
        self._strike = 0
        self.saw_markup = False

    def _current(self):
        if self._row is None:
            # a link outside any table row forms its own entry
            return {"links": [], "text": [], "struck": False, "implicit": True}
        return self._row

    def handle_starttag(self, tag, attrs):
        self.saw_markup = True
        if tag == "tr":
            self._flush()
            self._row = {"links": [], "text": [], "struck": False, "implicit": False}
        elif tag in ("s", "strike", "del"):
            self._strike += 1
        elif tag == "a":
            href = dict(attrs).get("href")
            if href:
                row = self._current()
                row["links"].append(href)
                if self._strike:
                    row["struck"] = True
                if row.get("implicit"):
                    self.rows.append(row)

    def handle_endtag(self, tag):
        if tag == "tr":
            self._flush()
        elif tag in ("s", "strike", "del") and self._strike:
            self._strike -= 1

    def handle_data(self, data):
        if self._row is not None:
            self._row["text"].append(data)
            if self._strike and data.strip():
                self._row["struck"] = True

    def _flush(self):
        if self._row is not None and self._row["links"]:
            self.rows.append(self._row)
        self._row = None

    def close(self):
        super().close()
        self._flush()


def published_from_slug(result_id: str) -> dt.date | None:
    """The publication date embedded in a result id, if it has one."""
    m = RESULT_SLUG_RE.search(result_id)
    if not m:
        return None
    try:
        return dt.datetime.strptime(m.group(1), "%Y%m%d").date()
    except ValueError:
        return None


def parse_index(html: str, base_url: str) -> list[ResultReference]:
    parser = _IndexParser()
    parser.feed(html)
    parser.close()
    if not parser.saw_markup and html.strip():
        raise IndexFormatError(f"index is not an HTML listing: {html.strip()[:60]!r}")

    refs: dict[str, ResultReference] = {}
    for row in parser.rows:
        by_slug: dict[str, list[str]] = {}
        for href in row["links"]:
            m = RESULT_SLUG_RE.search(href)
            if m:
                by_slug.setdefault(m.group(0), []).append(href)
        text = " ".join(" ".join(row["text"]).split())
        marker_hit = _MARKER_RE.search(text)
        marker = "struck" if row["struck"] else (marker_hit.group(0) if marker_hit else None)
        for slug, hrefs in by_slug.items():
            txt = [h for h in hrefs if urlparse(h).path.endswith(".txt")]
            if not txt:
                raise IndexFormatError(f"result entry without a .txt link: {hrefs[0]!r}")
            if slug in refs:
                continue
            refs[slug] = ResultReference(slug, urljoin(base_url, txt[0]), marker, published_from_slug(slug))
    return list(refs.values())


def fetch_index(index_url: str = DEFAULT_INDEX_URL, session: requests.Session | None = None,
                timeout: float = 30.0) -> list[ResultReference]:
    session = session or requests.Session()
    try:
        resp = session.get(index_url, timeout=timeout)
    except requests.RequestException as exc:
        raise FetchError(f"{index_url}: {exc}") from exc
    if resp.status_code != 200:
        raise FetchError(f"{index_url}: HTTP {resp.status_code}", status=resp.status_code,
                         retryable=resp.status_code >= 500 or resp.status_code == 429)
    return parse_index(resp.text, index_url)


# ---------------------------------------------------------------------------
# result files

def _paths(cache_dir: Path, result_id: str) -> tuple[Path, Path]:
    base = Path(cache_dir) / "results"
    return base / f"{result_id}.txt", base / f"{result_id}.meta.json"


def _load_cached(ref: ResultReference, body_path: Path, meta_path: Path) -> RawResultDocument:
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    raw = body_path.read_bytes()
    checksum = checksum_bytes(raw)
    if checksum != meta["checksum"]:
        raise IntegrityError(f"{ref.result_id}: cached body does not match its recorded checksum")
    return RawResultDocument(ref, decode_body(raw), dt.datetime.fromisoformat(meta["fetched_at"]), checksum)


class _HostThrottle:
    """At most ``per_host`` requests in flight per host, ``delay`` seconds apart."""

    def __init__(self, per_host: int = 1, delay: float = 0.5):
        self.per_host = per_host
        self.delay = delay
        self._guard = threading.Lock()
        self._slots: dict[str, threading.Semaphore] = {}
        self._last: dict[str, float] = {}

    def __call__(self, url: str):
        host = urlparse(url).netloc
        with self._guard:
            slot = self._slots.setdefault(host, threading.Semaphore(self.per_host))
        return _ThrottleSlot(self, host, slot)

    def _wait_turn(self, host):
        with self._guard:
            now = time.monotonic()
            start = max(now, self._last.get(host, -1e9) + self.delay)
            self._last[host] = start
        if start > now:
            time.sleep(start - now)


class _ThrottleSlot:
    def __init__(self, throttle, host, slot):
        self.throttle, self.host, self.slot = throttle, host, slot

    def __enter__(self):
        self.slot.acquire()
        self.throttle._wait_turn(self.host)

    def __exit__(self, *exc):
        self.slot.release()


def fetch_result(ref: ResultReference, cache_dir: str | os.PathLike, session: requests.Session | None = None,
                 pinned: Mapping[str, str] | None = None, timeout: float = 30.0,
                 throttle: _HostThrottle | None = None) -> RawResultDocument:
    """Return the cached report for ``ref``, downloading it on a cache miss.

    A cached body is never rewritten.  With ``pinned`` (result_id -> checksum)
    both cached and fresh bodies must match the pin.
    """
    body_path, meta_path = _paths(Path(cache_dir), ref.result_id)
    expected = pinned.get(ref.result_id) if pinned else None

    if meta_path.exists() and body_path.exists():
        doc = _load_cached(ref, body_path, meta_path)
        if expected and doc.checksum != expected:
            raise IntegrityError(f"{ref.result_id}: cached checksum {doc.checksum} != pinned {expected}")
        return doc

    session = session or requests.Session()
    try:
        if throttle is not None:
            with throttle(ref.url):
                resp = session.get(ref.url, timeout=timeout)
        else:
            resp = session.get(ref.url, timeout=timeout)
    except requests.RequestException as exc:
        raise FetchError(f"{ref.url}: {exc}") from exc
    if resp.status_code != 200:
        raise FetchError(f"{ref.url}: HTTP {resp.status_code}", status=resp.status_code,
                         retryable=resp.status_code >= 500 or resp.status_code == 429)
    raw = resp.content
    if not raw.strip():
        raise FetchError(f"{ref.url}: empty body", status=resp.status_code)

    fetched_at = dt.datetime.now(dt.timezone.utc).replace(microsecond=0)
    doc = RawResultDocument.from_bytes(ref, raw, fetched_at)
    if expected and doc.checksum != expected:
        raise IntegrityError(f"{ref.result_id}: downloaded checksum {doc.checksum} != pinned {expected}")

    meta = {
        "result_id": ref.result_id,
        "url": ref.url,
        "publication_marker": ref.publication_marker,
        "published": ref.published.isoformat() if ref.published else None,
        "fetched_at": fetched_at.isoformat(),
        "checksum": doc.checksum,
    }
    atomic_write(body_path, raw)
    atomic_write(meta_path, (json.dumps(meta, indent=1, sort_keys=True) + "\n").encode("utf-8"))
    return doc


def _with_retries(fn, retries: int, backoff: float):
    for attempt in range(retries + 1):
        try:
            return fn()
        except FetchError as exc:
            if not exc.retryable or attempt == retries:
                raise
            log.warning("retrying after %s (attempt %d/%d)", exc, attempt + 1, retries)
            time.sleep(backoff * (2 ** attempt))


def sync_corpus(index_url: str, cutoff: dt.date, cache_dir: str | os.PathLike, *,
                session: requests.Session | None = None, jobs: int = 4, per_host: int = 1,
                delay: float = 0.5, retries: int = 3, backoff: float = 1.0,
                pinned: Mapping[str, str] | None = None) -> CorpusManifest:
    """Download every result published on or before ``cutoff`` and write the manifest.

    Raises :class:`SyncError` (carrying the manifest of what did succeed) when
    some files still fail after the retry budget.
    """
    cache_dir = Path(cache_dir)
    session = session or requests.Session()
    refs = _with_retries(lambda: fetch_index(index_url, session), retries, backoff)
    selected = [r for r in refs if r.published is None or r.published <= cutoff]
    log.info("%d of %d indexed results on or before %s", len(selected), len(refs), cutoff)

    throttle = _HostThrottle(per_host=per_host, delay=delay)
    failures: dict[str, str] = {}
    entries: list[tuple[str, str]] = []

    def one(ref):
        return _with_retries(lambda: fetch_result(ref, cache_dir, session, pinned, throttle=throttle),
                             retries, backoff)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = {ref.result_id: pool.submit(one, ref) for ref in selected}
        for rid, fut in futures.items():
            try:
                entries.append((rid, fut.result().checksum))
            except CorpusError as exc:
                failures[rid] = str(exc)

    entries.sort()
    dated = [r.published for r in selected if r.published and r.result_id not in failures]
    manifest = CorpusManifest(snapshot_date=max(dated) if dated else cutoff, cutoff=cutoff, entries=tuple(entries))
    atomic_write(cache_dir / MANIFEST_NAME, manifest.to_text().encode("utf-8"))
    if failures:
        raise SyncError(failures, manifest)
    return manifest


def read_manifest(path: str | os.PathLike) -> CorpusManifest:
    return CorpusManifest.from_text(Path(path).read_text(encoding="utf-8"))


def load_directory(path: str | os.PathLike, manifest: CorpusManifest | None = None) -> list[RawResultDocument]:
    """Offline corpus: every ``*.txt`` under ``path`` (or ``path/results``), sorted by id.

    Sidecar metadata is used when present.  With a manifest, only its entries
    are loaded and each checksum is verified.
    """
    root = Path(path)
    if (root / "results").is_dir():
        root = root / "results"
    pinned = manifest.checksums() if manifest else None
    docs = []
    for body_path in sorted(root.glob("*.txt")):
        rid = body_path.stem
        if pinned is not None and rid not in pinned:
            continue
        raw = body_path.read_bytes()
        meta_path = body_path.with_suffix(".meta.json")
        meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
        published = meta.get("published")
        ref = ResultReference(
            result_id=rid,
            url=meta.get("url", body_path.resolve().as_uri()),
            publication_marker=meta.get("publication_marker"),
            published=dt.date.fromisoformat(published) if published else published_from_slug(rid),
        )
        fetched = meta.get("fetched_at")
        fetched_at = (dt.datetime.fromisoformat(fetched) if fetched
                      else dt.datetime.fromtimestamp(body_path.stat().st_mtime, dt.timezone.utc).replace(microsecond=0))
        doc = RawResultDocument.from_bytes(ref, raw, fetched_at)
        if pinned is not None and doc.checksum != pinned[rid]:
            raise IntegrityError(f"{rid}: checksum {doc.checksum} != pinned {pinned[rid]}")
        docs.append(doc)
    if pinned is not None:
        missing = sorted(set(pinned) - {d.reference.result_id for d in docs})
        if missing:
            raise IntegrityError(f"{len(missing)} pinned result(s) missing from {root}, e.g. {missing[0]}")
    return docs

