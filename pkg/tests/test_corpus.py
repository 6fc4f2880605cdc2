import datetime as dt
import json

import pytest
import requests
from hypothesis import given
from hypothesis import strategies as st

from specpower_trends.corpus import (MANIFEST_NAME, CorpusManifest, FetchError, IndexFormatError, IntegrityError,
                                     RawResultDocument, ResultReference, SyncError, checksum_bytes, fetch_index,
                                     fetch_result, load_directory, parse_index, published_from_slug, read_manifest,
                                     sync_corpus)

from conftest import SAMPLES, sample_ids

BASE = "https://www.example.org/results/power_ssj2008.html"
FAST = dict(delay=0.0, backoff=0.0, retries=1, jobs=4)


# -- index page -------------------------------------------------------------

def test_parse_index_rows_and_markers():
    html = """
    <table>
      <tr><td>Acme</td><td><a href="res2023q1/power_ssj2008-20230307-00012.html">HTML</a>
          <a href="res2023q1/power_ssj2008-20230307-00012.txt">Text</a></td></tr>
      <tr><td><strike>Bolt <a href="/r/power_ssj2008-20120131-00006.txt">Text</a></strike></td></tr>
      <tr><td>Cray</td><td><a href="/r/power_ssj2008-20110208-00005.txt">Text</a> NC</td></tr>
      <tr><td>Raleigh, NC-free zone</td></tr>
    </table>"""
    refs = parse_index(html, BASE)
    assert [r.result_id for r in refs] == [
        "power_ssj2008-20230307-00012", "power_ssj2008-20120131-00006", "power_ssj2008-20110208-00005"]
    assert refs[0].url == "https://www.example.org/results/res2023q1/power_ssj2008-20230307-00012.txt"
    assert refs[0].publication_marker is None
    assert refs[0].published == dt.date(2023, 3, 7)
    assert refs[1].publication_marker == "struck"
    assert refs[2].publication_marker == "NC"
    assert all(r.url.endswith(".txt") and r.url.startswith("https://") for r in refs)


def test_empty_listing():
    assert parse_index("<html><body><table></table></body></html>", BASE) == []
    assert parse_index("", BASE) == []


def test_entry_without_txt_link_is_index_format_error():
    html = '<table><tr><td><a href="power_ssj2008-20230307-00012.html">HTML</a></td></tr></table>'
    with pytest.raises(IndexFormatError, match="00012.html"):
        parse_index(html, BASE)


def test_non_html_listing_is_index_format_error():
    with pytest.raises(IndexFormatError):
        parse_index("Service temporarily unavailable", BASE)


def test_duplicate_links_give_unique_ids():
    html = ('<tr><td><a href="a/power_ssj2008-20230307-00012.txt">x</a></td></tr>'
            '<tr><td><a href="b/power_ssj2008-20230307-00012.txt">y</a></td></tr>')
    assert len(parse_index(html, BASE)) == 1


def test_published_from_slug():
    assert published_from_slug("power_ssj2008-20240101-01400") == dt.date(2024, 1, 1)
    assert published_from_slug("power_ssj2008-20241301-01400") is None
    assert published_from_slug("local-run") is None


# -- single files -----------------------------------------------------------

def ref_for(site, rid, marker=None):
    return ResultReference(rid, f"{site.url}/res/{rid}.txt", marker, published_from_slug(rid))


def test_fetch_result_downloads_then_serves_from_cache(site, tmp_path):
    rid = sample_ids()[0]
    site.publish_samples([rid])
    ref = ref_for(site, rid)
    first = fetch_result(ref, tmp_path)
    assert "Benchmark Results Summary" in first.body
    assert first.checksum == checksum_bytes((SAMPLES / f"{rid}.txt").read_bytes())
    body = tmp_path / "results" / f"{rid}.txt"
    meta = json.loads((tmp_path / "results" / f"{rid}.meta.json").read_text())
    assert meta["checksum"] == first.checksum and meta["url"] == ref.url
    mtime = body.stat().st_mtime_ns

    site.pages.clear()  # any network access now would 404
    second = fetch_result(ref, tmp_path)
    assert second == first
    assert site.hits == {f"/res/{rid}.txt": 1}
    assert body.stat().st_mtime_ns == mtime


def test_fetch_result_http_error_carries_status(site, tmp_path):
    with pytest.raises(FetchError) as err:
        fetch_result(ref_for(site, "power_ssj2008-20230101-09999"), tmp_path)
    assert err.value.status == 404
    assert not err.value.retryable
    assert not (tmp_path / "results" / "power_ssj2008-20230101-09999.txt").exists()


def test_pinned_checksum_mismatch(site, tmp_path):
    rid = sample_ids()[0]
    site.publish_samples([rid])
    with pytest.raises(IntegrityError):
        fetch_result(ref_for(site, rid), tmp_path, pinned={rid: "sha256:" + "0" * 64})
    assert not (tmp_path / "results" / f"{rid}.txt").exists()
    doc = fetch_result(ref_for(site, rid), tmp_path)
    with pytest.raises(IntegrityError):
        fetch_result(ref_for(site, rid), tmp_path, pinned={rid: "sha256:" + "1" * 64})
    assert fetch_result(ref_for(site, rid), tmp_path, pinned={rid: doc.checksum}) == doc


def test_unreachable_host_is_fetch_error(tmp_path):
    ref = ResultReference("power_ssj2008-20230101-00001", "http://127.0.0.1:9/x.txt", None, None)
    with pytest.raises(FetchError) as err:
        fetch_result(ref, tmp_path, timeout=2)
    assert err.value.status is None and err.value.retryable


def test_fetch_index_http_error(site):
    with pytest.raises(FetchError) as err:
        fetch_index(site.url + "/nope.html", requests.Session())
    assert err.value.status == 404


# -- sync -------------------------------------------------------------------

def test_sync_corpus_writes_sorted_manifest(site, tmp_path):
    ids = sample_ids()
    index = site.publish_samples(ids, markers={ids[5]: "NC"})
    manifest = sync_corpus(index, dt.date(2024, 6, 30), tmp_path, **FAST)
    assert [rid for rid, _ in manifest.entries] == ids
    assert manifest.snapshot_date == max(published_from_slug(i) for i in ids)
    on_disk = (tmp_path / MANIFEST_NAME).read_bytes()
    assert on_disk.endswith(b"\n") and b"\r" not in on_disk
    assert read_manifest(tmp_path / MANIFEST_NAME) == manifest
    for rid, checksum in manifest.entries:
        assert checksum == checksum_bytes((tmp_path / "results" / f"{rid}.txt").read_bytes())
    meta = json.loads((tmp_path / "results" / f"{ids[5]}.meta.json").read_text())
    assert meta["publication_marker"] == "NC"

    # a second run over the warm cache is byte-identical and only re-reads the index
    site.hits.clear()
    again = sync_corpus(index, dt.date(2024, 6, 30), tmp_path, **FAST)
    assert again == manifest
    assert (tmp_path / MANIFEST_NAME).read_bytes() == on_disk
    assert set(site.hits) == {"/results/power_ssj2008.html"}


def test_cutoff_bounds_the_manifest(site, tmp_path):
    ids = sample_ids()
    index = site.publish_samples(ids)
    assert sync_corpus(index, dt.date(1990, 1, 1), tmp_path, **FAST).entries == ()
    assert not (tmp_path / "results").exists()
    upto = sync_corpus(index, dt.date(2012, 12, 31), tmp_path / "b", **FAST)
    assert [rid for rid, _ in upto.entries] == [i for i in ids if published_from_slug(i).year <= 2012]


def test_partial_sync_reports_failures(site, tmp_path):
    ids = sample_ids()[:3]
    index = site.publish_samples(ids)
    site.add(f"/res/{ids[1]}.txt", b"oops", status=503)
    with pytest.raises(SyncError) as err:
        sync_corpus(index, dt.date(2024, 6, 30), tmp_path, **FAST)
    assert list(err.value.failures) == [ids[1]]
    assert [rid for rid, _ in err.value.manifest.entries] == [ids[0], ids[2]]
    assert site.hits[f"/res/{ids[1]}.txt"] == 2  # one retry


def test_unreachable_index_propagates(tmp_path):
    with pytest.raises(FetchError):
        sync_corpus("http://127.0.0.1:9/index.html", dt.date(2024, 6, 30), tmp_path, **FAST)


# -- manifest and offline loading -------------------------------------------

ids = st.lists(st.from_regex(r"power_ssj2008-20\d{6}-\d{5}", fullmatch=True), unique=True, max_size=20)


@given(ids, st.dates(dt.date(2005, 1, 1), dt.date(2024, 12, 31)))
def test_manifest_text_round_trip(rids, day):
    entries = tuple(sorted((rid, checksum_bytes(rid.encode())) for rid in rids))
    m = CorpusManifest(day, day, entries)
    assert CorpusManifest.from_text(m.to_text()) == m
    for line in m.to_text().splitlines():
        assert line.startswith("#") or line.count("\t") == 1


def test_manifest_rejects_unsorted_or_duplicate():
    with pytest.raises(ValueError):
        CorpusManifest(dt.date(2024, 1, 1), dt.date(2024, 1, 1), (("b", "x"), ("a", "y")))
    with pytest.raises(ValueError):
        CorpusManifest(dt.date(2024, 1, 1), dt.date(2024, 1, 1), (("a", "x"), ("a", "x")))


@given(st.binary(min_size=1, max_size=200))
def test_checksum_depends_only_on_bytes(raw):
    ref = ResultReference("r", "http://x/r.txt", None, None)
    a = RawResultDocument.from_bytes(ref, raw, dt.datetime(2024, 1, 1, tzinfo=dt.timezone.utc))
    b = RawResultDocument.from_bytes(ref, raw, dt.datetime(2025, 1, 1, tzinfo=dt.timezone.utc))
    assert a.checksum == b.checksum == checksum_bytes(raw)


def test_load_directory_plain_samples():
    docs = load_directory(SAMPLES)
    assert [d.reference.result_id for d in docs] == sample_ids()
    assert all(d.body for d in docs)
    assert docs[0].reference.published == published_from_slug(docs[0].reference.result_id)


def test_load_directory_with_manifest(site, tmp_path):
    index = site.publish_samples(sample_ids()[:4])
    manifest = sync_corpus(index, dt.date(2024, 6, 30), tmp_path, **FAST)
    docs = load_directory(tmp_path, manifest)
    assert [(d.reference.result_id, d.checksum) for d in docs] == list(manifest.entries)

    body = tmp_path / "results" / f"{manifest.entries[0][0]}.txt"
    body.write_bytes(body.read_bytes() + b"tampered\n")
    with pytest.raises(IntegrityError):
        load_directory(tmp_path, manifest)
    body.unlink()
    with pytest.raises(IntegrityError, match="missing"):
        load_directory(tmp_path, manifest)
