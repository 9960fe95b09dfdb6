"""Tests for record ingestion, the title index, and its on-disk format."""

from __future__ import annotations

import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hallucheck.bibindex import (
    BibRecord,
    TitleIndex,
    build_index,
    get_by_id,
    ingest_acl_anthology,
    ingest_arxiv_snapshot,
    ingest_dblp,
    load_index,
    save_index,
)
from hallucheck.errors import (
    DuplicateIdError,
    FormatError,
    VersionMismatchError,
    XmlError,
)
from hallucheck.matching import normalize_title, trigram_counts

ACL_VOLUME_XML = """\
<collection id="2022.tacl">
  <volume id="1">
    <meta>
      <booktitle>Transactions of the Association for Computational Linguistics</booktitle>
      <year>2022</year>
    </meta>
    <paper id="5">
      <title>AI for language learning: <fixed-case>C</fixed-case>onversational agents</title>
      <author><first>Wei</first><last>Xu</last></author>
      <author><first>Yulia</first><last>Tsvetkov</last></author>
      <url>2022.tacl-1.5</url>
    </paper>
    <paper id="6">
      <title></title>
    </paper>
  </volume>
</collection>
"""

ACL_SECOND_XML = """\
<collection id="2021.emnlp">
  <volume id="main">
    <meta><booktitle>EMNLP</booktitle><year>2021</year></meta>
    <paper id="12">
      <title>Retrieval for everyone</title>
      <author>Ada Example</author>
      <url>https://aclanthology.org/2021.emnlp-main.12</url>
    </paper>
  </volume>
</collection>
"""

DBLP_XML = """\
<dblp>
  <article key="journals/tacl/XuTB22">
    <author>Wei Xu</author>
    <author>Yulia Tsvetkov</author>
    <title>AI for language learning.</title>
    <year>2022</year>
    <journal>Trans. Assoc. Comput. Linguistics</journal>
    <ee>https://example.org/tacl/xu22</ee>
  </article>
  <inproceedings key="conf/acl/Foo20">
    <title>Another paper entirely</title>
    <booktitle>ACL</booktitle>
    <year>2020</year>
  </inproceedings>
  <article key="journals/x/NoTitle21">
    <year>2021</year>
  </article>
  <phdthesis key="phd/us/Smith19">
    <title>A thesis about parsing</title>
    <year>2019</year>
  </phdthesis>
</dblp>
"""


# --- ingestion -------------------------------------------------------------------


def test_ingest_acl_anthology(tmp_path):
    (tmp_path / "2022.tacl.xml").write_text(ACL_VOLUME_XML, encoding="utf-8")
    (tmp_path / "2021.emnlp.xml").write_text(ACL_SECOND_XML, encoding="utf-8")
    result = ingest_acl_anthology(tmp_path)
    assert result.source_kind == "acl"
    assert result.skipped == 1  # the title-less paper
    assert len(result.records) == 2
    by_id = {r.id: r for r in result.records}
    tacl = by_id["acl:2022.tacl-1.5"]
    # nested markup flattens into the title text
    assert tacl.title == "AI for language learning: Conversational agents"
    assert tacl.authors == ("Wei Xu", "Yulia Tsvetkov")
    assert tacl.year == 2022
    assert tacl.venue == "Transactions of the Association for Computational Linguistics"
    assert tacl.url == "https://aclanthology.org/2022.tacl-1.5"
    emnlp = by_id["acl:2021.emnlp-main.12"]
    assert emnlp.authors == ("Ada Example",)
    assert emnlp.url == "https://aclanthology.org/2021.emnlp-main.12"
    assert result.describe()["records"] == 2
    assert result.describe()["max_year"] == 2022


def test_ingest_acl_empty_dir_is_format_error(tmp_path):
    with pytest.raises(FormatError):
        ingest_acl_anthology(tmp_path)


def test_ingest_acl_broken_xml(tmp_path):
    (tmp_path / "bad.xml").write_text("<collection><volume>", encoding="utf-8")
    with pytest.raises(XmlError):
        ingest_acl_anthology(tmp_path)


def test_ingest_arxiv_snapshot(tmp_path):
    p = tmp_path / "arxiv.jsonl"
    p.write_text(
        '{"id": "2402.12345", "title": "Homoclinic  Floer\\n homology", '
        '"authors": ["A. One", "B. Two"], "year": 2024}\n'
        '{"id": "1910.01708", "title": "Exposure bias", "authors": "C. Three and D. Four"}\n'
        "not json at all\n"
        '{"id": 5, "title": "numeric id"}\n'
        '{"title": "no id"}\n'
        "\n",
        encoding="utf-8",
    )
    result = ingest_arxiv_snapshot(p)
    assert result.source_kind == "arxiv"
    assert result.skipped == 3
    assert len(result.records) == 2
    first, second = result.records
    assert first.id == "arxiv:2402.12345"
    assert first.title == "Homoclinic Floer homology"  # whitespace collapsed
    assert first.authors == ("A. One", "B. Two")
    assert first.year == 2024
    assert first.url == "https://arxiv.org/abs/2402.12345"
    assert second.authors == ("C. Three", "D. Four")
    assert second.year is None


def test_ingest_dblp(tmp_path):
    p = tmp_path / "dblp.xml"
    p.write_text(DBLP_XML, encoding="utf-8")
    result = ingest_dblp(p)
    assert result.source_kind == "dblp"
    assert result.skipped == 1
    assert [r.id for r in result.records] == [
        "dblp:journals/tacl/XuTB22",
        "dblp:conf/acl/Foo20",
        "dblp:phd/us/Smith19",
    ]
    article = result.records[0]
    assert article.title == "AI for language learning"  # trailing period dropped
    assert article.venue == "Trans. Assoc. Comput. Linguistics"
    assert article.url == "https://example.org/tacl/xu22"
    assert article.year == 2022


def test_ingest_dblp_broken_xml(tmp_path):
    p = tmp_path / "dblp.xml"
    p.write_text("<dblp><article key='x'><title>t</title>", encoding="utf-8")
    with pytest.raises(XmlError):
        ingest_dblp(p)


# --- index construction -----------------------------------------------------------


def _records(titles: dict[str, str], **extra) -> list[BibRecord]:
    return [BibRecord.make(id=k, title=v, **extra) for k, v in sorted(titles.items())]


def test_build_index_and_get_by_id():
    index = build_index(
        _records({"acl:a": "First paper title", "dblp:b": "Second paper title"}),
        meta={"built": "test"},
    )
    assert len(index) == 2
    record = get_by_id(index, "acl:a")
    assert record is not None
    assert record.title == "First paper title"
    assert record.norm_title == normalize_title("First paper title")
    assert get_by_id(index, "missing:id") is None
    assert index.meta == {"built": "test"}


def test_build_index_rejects_duplicate_ids():
    records = _records({"acl:a": "One title here"})
    with pytest.raises(DuplicateIdError) as exc_info:
        build_index(records + records)
    assert exc_info.value.record_id == "acl:a"


def test_coverage_max_year():
    index = TitleIndex()
    index.add(BibRecord.make(id="a", title="t one", year=2019))
    assert index.coverage_max_year == 2019
    index.add(BibRecord.make(id="b", title="t two", year=None))
    assert index.coverage_max_year == 2019
    index.add(BibRecord.make(id="c", title="t three", year=2023))
    assert index.coverage_max_year == 2023


def test_postings_agree_with_records():
    rng = random.Random(7)
    words = "neural parsing speech graph model corpus data title query index".split()
    records = [
        BibRecord.make(
            id=f"r:{n}", title=" ".join(rng.choices(words, k=rng.randint(1, 8)))
        )
        for n in range(500)
    ]
    index = build_index(records)
    for rid in range(len(index)):
        norm = index.norm_titles[rid]
        bucket = index.buckets[len(norm) // TitleIndex.BUCKET_WIDTH]
        assert rid in set(bucket.roster)
        for gram, count in trigram_counts(norm).items():
            rids, counts = bucket.grams[gram]
            pos = list(rids).index(rid)
            assert counts[pos] == min(count, 0xFFFF)
    # conversely, every posted rid is a roster member of its bucket
    for bucket in index.buckets.values():
        roster = set(bucket.roster)
        for rids, counts in bucket.grams.values():
            assert len(rids) == len(counts)
            assert set(rids) <= roster


# --- persistence --------------------------------------------------------------------


def _assert_same_index(a: TitleIndex, b: TitleIndex) -> None:
    assert a.ids == b.ids
    assert a.titles == b.titles
    assert a.norm_titles == b.norm_titles
    assert a.authors == b.authors
    assert a.years == b.years
    assert a.venues == b.venues
    assert a.urls == b.urls
    assert a.id_to_rid == b.id_to_rid
    assert a.meta == b.meta
    assert a.coverage_max_year == b.coverage_max_year
    assert set(a.buckets) == set(b.buckets)
    for bucket_id in a.buckets:
        left, right = a.buckets[bucket_id], b.buckets[bucket_id]
        assert list(left.roster) == list(right.roster)
        assert set(left.grams) == set(right.grams)
        for gram in left.grams:
            assert list(left.grams[gram][0]) == list(right.grams[gram][0])
            assert list(left.grams[gram][1]) == list(right.grams[gram][1])


def test_save_load_round_trip_small(tmp_path):
    records = [
        BibRecord.make(
            id="acl:2022.tacl-1.5",
            title="AI for language learning: Conversational agents",
            authors=("Wei Xu", "Yulia Tsvetkov"),
            year=2022,
            venue="TACL",
            url="https://aclanthology.org/2022.tacl-1.5",
        ),
        BibRecord.make(id="arxiv:2402.12345", title="Homoclinic Floer homology", year=None),
        BibRecord.make(id="dblp:x", title="Étude des anaphores — ﬁne print", venue=None),
        BibRecord.make(id="empty:authors", title="zz", authors=()),
    ]
    index = build_index(records, meta={"sources": [{"kind": "acl", "records": 4}]})
    save_index(index, tmp_path)
    loaded = load_index(tmp_path)
    _assert_same_index(index, loaded)
    assert loaded.get("dblp:x").title == "Étude des anaphores — ﬁne print"


def test_save_load_round_trip_large(tmp_path):
    rng = random.Random(11)
    words = (
        "neural language parsing retrieval corpus evaluation graph speech "
        "transfer attention model benchmark data title lexical semantic"
    ).split()
    records = []
    for n in range(10_000):
        title = " ".join(rng.choices(words, k=rng.randint(1, 12)))
        records.append(
            BibRecord.make(
                id=f"r:{n:05d}",
                title=title,
                authors=tuple(f"A{k}" for k in range(rng.randint(0, 3))),
                year=rng.choice([None, rng.randint(1950, 2026)]),
                venue=rng.choice([None, "ACL", "EMNLP", "TACL"]),
                url=rng.choice([None, f"https://example.org/{n}"]),
            )
        )
    index = build_index(records)
    save_index(index, tmp_path)
    loaded = load_index(tmp_path)
    _assert_same_index(index, loaded)


def test_load_rejects_foreign_file(tmp_path):
    (tmp_path / "index.hcix").write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(VersionMismatchError, match="magic"):
        load_index(tmp_path)


def test_load_rejects_future_version(tmp_path):
    index = build_index(_records({"a": "some title"}))
    path = save_index(index, tmp_path)
    blob = bytearray(path.read_bytes())
    blob[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(blob))
    with pytest.raises(VersionMismatchError, match="version 99"):
        load_index(tmp_path)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.text(min_size=1, max_size=60),
            st.tuples(st.text(max_size=15), st.text(max_size=15)),
            st.one_of(st.none(), st.integers(min_value=1900, max_value=2027)),
        ),
        max_size=12,
    )
)
def test_save_load_round_trip_property(tmp_path_factory, rows):
    records = [
        BibRecord.make(
            id=f"id:{n}", title=title, authors=authors, year=year, venue=None, url=None
        )
        for n, (title, authors, year) in enumerate(rows)
    ]
    index = build_index(records, meta={"n": len(records)})
    target = tmp_path_factory.mktemp("idx")
    save_index(index, target)
    _assert_same_index(index, load_index(target))
