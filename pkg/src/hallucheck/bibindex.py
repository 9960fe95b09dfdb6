"""Bibliographic records and the on-disk title index.

Records come from three snapshot kinds (ACL Anthology volume XML, an arXiv
JSON-lines dump, a DBLP XML dump) and live under namespaced ids ("acl:…",
"arxiv:…", "dblp:…"). The index buckets records by normalized-title length
(buckets of 4 characters) and posts each record under its title's character
trigrams, which is what lets a lookup touch only a sliver of a large index.

On disk the index is a single segmented binary file with a versioned header
(magic "HCIX", little-endian u32 version) holding the meta block, the record
store, and the trigram postings.
"""

from __future__ import annotations

import json
import re
import struct
import sys
import xml.etree.ElementTree as ET
from array import array
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DuplicateIdError, FormatError, VersionMismatchError, XmlError
from .matching import normalize_title, trigram_counts

BUCKET_WIDTH = 4
MAGIC = b"HCIX"
FORMAT_VERSION = 1
_INDEX_FILENAME = "index.hcix"
_NONE_LEN = 0xFFFFFFFF


@dataclass(frozen=True)
class BibRecord:
    """One bibliographic record under a namespaced id."""

    id: str
    title: str
    norm_title: str
    authors: tuple[str, ...] = ()
    year: int | None = None
    venue: str | None = None
    url: str | None = None

    @classmethod
    def make(
        cls,
        id: str,
        title: str,
        authors: tuple[str, ...] = (),
        year: int | None = None,
        venue: str | None = None,
        url: str | None = None,
    ) -> "BibRecord":
        """Build a record, deriving norm_title so the invariant always holds."""
        return cls(
            id=id,
            title=title,
            norm_title=normalize_title(title),
            authors=authors,
            year=year,
            venue=venue,
            url=url,
        )


class _Bucket:
    """Records of one normalized-length band and their trigram postings."""

    __slots__ = ("roster", "grams")

    def __init__(self) -> None:
        self.roster: array = array("I")
        # gram -> (record ids, per-record trigram counts), parallel arrays
        self.grams: dict[str, tuple[array, array]] = {}

    def add(self, rid: int, gram_counts) -> None:
        self.roster.append(rid)
        for gram, count in gram_counts.items():
            posting = self.grams.get(gram)
            if posting is None:
                posting = (array("I"), array("H"))
                self.grams[gram] = posting
            posting[0].append(rid)
            posting[1].append(min(count, 0xFFFF))


class TitleIndex:
    """In-memory index over bibliographic records, keyed for fuzzy lookup."""

    BUCKET_WIDTH = BUCKET_WIDTH

    def __init__(self, meta: dict | None = None) -> None:
        self.ids: list[str] = []
        self.titles: list[str] = []
        self.norm_titles: list[str] = []
        self.authors: list[tuple[str, ...]] = []
        self.years: list[int | None] = []
        self.venues: list[str | None] = []
        self.urls: list[str | None] = []
        self.id_to_rid: dict[str, int] = {}
        self.buckets: dict[int, _Bucket] = {}
        self.meta: dict = dict(meta or {})
        self._max_year: int | None = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def coverage_max_year(self) -> int | None:
        """Newest publication year the snapshots cover (None if unknown)."""
        return self._max_year

    def add(self, record: BibRecord) -> None:
        if record.id in self.id_to_rid:
            raise DuplicateIdError(record.id)
        rid = len(self.ids)
        self.ids.append(record.id)
        self.titles.append(record.title)
        self.norm_titles.append(record.norm_title)
        self.authors.append(tuple(record.authors))
        self.years.append(record.year)
        self.venues.append(record.venue)
        self.urls.append(record.url)
        self.id_to_rid[record.id] = rid
        bucket_id = len(record.norm_title) // BUCKET_WIDTH
        bucket = self.buckets.get(bucket_id)
        if bucket is None:
            bucket = self.buckets[bucket_id] = _Bucket()
        bucket.add(rid, trigram_counts(record.norm_title))
        if record.year is not None and (self._max_year is None or record.year > self._max_year):
            self._max_year = record.year

    def record_at(self, rid: int) -> BibRecord:
        return BibRecord(
            id=self.ids[rid],
            title=self.titles[rid],
            norm_title=self.norm_titles[rid],
            authors=self.authors[rid],
            year=self.years[rid],
            venue=self.venues[rid],
            url=self.urls[rid],
        )

    def get(self, record_id: str) -> BibRecord | None:
        rid = self.id_to_rid.get(record_id)
        return None if rid is None else self.record_at(rid)

    def __iter__(self):
        return (self.record_at(rid) for rid in range(len(self.ids)))


def build_index(records: Iterable[BibRecord], meta: dict | None = None) -> TitleIndex:
    """Index a stream of records. A repeated id raises DuplicateIdError."""
    index = TitleIndex(meta=meta)
    for record in records:
        index.add(record)
    return index


def get_by_id(index: TitleIndex, record_id: str) -> BibRecord | None:
    """Exact lookup by namespaced id."""
    return index.get(record_id)


# --- persistence ---------------------------------------------------------------


def _le(arr: array) -> array:
    if sys.byteorder == "big":  # pragma: no cover - x86/arm little-endian hosts
        arr = array(arr.typecode, arr)
        arr.byteswap()
    return arr


def _write_str(out, s: str | None) -> None:
    if s is None:
        out.write(struct.pack("<I", _NONE_LEN))
        return
    b = s.encode("utf-8")
    out.write(struct.pack("<I", len(b)))
    out.write(b)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def read_str(self) -> str | None:
        (length,) = self.unpack("<I")
        if length == _NONE_LEN:
            return None
        raw = self.data[self.pos : self.pos + length]
        self.pos += length
        return raw.decode("utf-8")

    def read_array(self, typecode: str, count: int) -> array:
        arr = array(typecode)
        nbytes = arr.itemsize * count
        arr.frombytes(self.data[self.pos : self.pos + nbytes])
        self.pos += nbytes
        if sys.byteorder == "big":  # pragma: no cover
            arr.byteswap()
        return arr


def save_index(index: TitleIndex, directory: str | Path) -> Path:
    """Write the index under ``directory`` and return the file path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / _INDEX_FILENAME
    meta_blob = json.dumps(index.meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<I", FORMAT_VERSION))
        out.write(struct.pack("<Q", len(meta_blob)))
        out.write(meta_blob)
        out.write(struct.pack("<I", len(index.ids)))
        for rid in range(len(index.ids)):
            _write_str(out, index.ids[rid])
            _write_str(out, index.titles[rid])
            _write_str(out, index.norm_titles[rid])
            out.write(struct.pack("<I", len(index.authors[rid])))
            for author in index.authors[rid]:
                _write_str(out, author)
            year = index.years[rid]
            out.write(struct.pack("<i", -1 if year is None else year))
            _write_str(out, index.venues[rid])
            _write_str(out, index.urls[rid])
        out.write(struct.pack("<I", len(index.buckets)))
        for bucket_id in sorted(index.buckets):
            bucket = index.buckets[bucket_id]
            out.write(struct.pack("<II", bucket_id, len(bucket.roster)))
            out.write(_le(bucket.roster).tobytes())
            out.write(struct.pack("<I", len(bucket.grams)))
            for gram in sorted(bucket.grams):
                rids, counts = bucket.grams[gram]
                gram_bytes = gram.encode("utf-8")
                out.write(struct.pack("<B", len(gram_bytes)))
                out.write(gram_bytes)
                out.write(struct.pack("<I", len(rids)))
                out.write(_le(rids).tobytes())
                out.write(_le(counts).tobytes())
    return path


def load_index(directory: str | Path) -> TitleIndex:
    """Read an index written by save_index.

    A missing/foreign magic header or an unsupported version raises
    VersionMismatchError; underlying I/O problems surface as OSError.
    """
    path = Path(directory) / _INDEX_FILENAME
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise VersionMismatchError(f"{path}: not a title index (bad magic header)")
    reader = _Reader(data)
    reader.pos = 4
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})"
        )
    (meta_len,) = reader.unpack("<Q")
    meta = json.loads(reader.data[reader.pos : reader.pos + meta_len].decode("utf-8"))
    reader.pos += meta_len
    index = TitleIndex(meta=meta)
    (n_records,) = reader.unpack("<I")
    for rid in range(n_records):
        record_id = reader.read_str()
        title = reader.read_str()
        norm_title = reader.read_str()
        (n_authors,) = reader.unpack("<I")
        authors = tuple(reader.read_str() for _ in range(n_authors))
        (year_raw,) = reader.unpack("<i")
        year = None if year_raw < 0 else year_raw
        venue = reader.read_str()
        url = reader.read_str()
        index.ids.append(record_id)
        index.titles.append(title)
        index.norm_titles.append(norm_title)
        index.authors.append(authors)
        index.years.append(year)
        index.venues.append(venue)
        index.urls.append(url)
        index.id_to_rid[record_id] = rid
        if year is not None and (index._max_year is None or year > index._max_year):
            index._max_year = year
    (n_buckets,) = reader.unpack("<I")
    for _ in range(n_buckets):
        bucket_id, roster_len = reader.unpack("<II")
        bucket = _Bucket()
        bucket.roster = reader.read_array("I", roster_len)
        (n_grams,) = reader.unpack("<I")
        for _ in range(n_grams):
            (gram_len,) = reader.unpack("<B")
            gram = reader.data[reader.pos : reader.pos + gram_len].decode("utf-8")
            reader.pos += gram_len
            (n_postings,) = reader.unpack("<I")
            rids = reader.read_array("I", n_postings)
            counts = reader.read_array("H", n_postings)
            bucket.grams[gram] = (rids, counts)
        index.buckets[bucket_id] = bucket
    return index


# --- snapshot ingestion ----------------------------------------------------------


@dataclass
class IngestResult:
    """Records pulled from one snapshot, with a skip count for bad input."""

    records: list[BibRecord]
    skipped: int
    source_kind: str
    source_path: str

    def describe(self) -> dict:
        years = [r.year for r in self.records if r.year is not None]
        return {
            "kind": self.source_kind,
            "path": str(self.source_path),
            "records": len(self.records),
            "skipped": self.skipped,
            "max_year": max(years) if years else None,
        }


def _element_text(elem) -> str:
    return re.sub(r"\s+", " ", "".join(elem.itertext())).strip()


def ingest_acl_anthology(directory: str | Path) -> IngestResult:
    """Read ACL Anthology per-volume metadata XML files from a directory.

    Record ids follow the anthology scheme ``{collection}-{volume}.{paper}``
    (e.g. acl:2022.tacl-1.5). Papers without a title are counted as skipped.
    """
    directory = Path(directory)
    records: list[BibRecord] = []
    skipped = 0
    paths = sorted(directory.rglob("*.xml"))
    if not paths:
        raise FormatError(f"{directory}: no anthology XML files found")
    for path in paths:
        try:
            root = ET.parse(path).getroot()
        except ET.ParseError as exc:
            raise XmlError(f"{path}: {exc.msg}", position=exc.position) from exc
        collection_id = root.get("id") or path.stem
        year_guess = None
        ym = re.match(r"(19|20)\d{2}", collection_id)
        if ym:
            year_guess = int(ym.group(0))
        for volume in root.iter("volume"):
            volume_id = volume.get("id") or "1"
            meta = volume.find("meta")
            venue = None
            vol_year = year_guess
            if meta is not None:
                booktitle = meta.find("booktitle")
                if booktitle is not None:
                    venue = _element_text(booktitle) or None
                year_el = meta.find("year")
                if year_el is not None and (year_el.text or "").strip().isdigit():
                    vol_year = int(year_el.text.strip())
            for paper in volume.iter("paper"):
                paper_id = paper.get("id")
                title_el = paper.find("title")
                title = _element_text(title_el) if title_el is not None else ""
                if not paper_id or not title:
                    skipped += 1
                    continue
                authors = []
                for author in paper.iter("author"):
                    first = author.find("first")
                    last = author.find("last")
                    if first is not None or last is not None:
                        name = " ".join(
                            part
                            for part in (
                                _element_text(first) if first is not None else "",
                                _element_text(last) if last is not None else "",
                            )
                            if part
                        )
                    else:
                        name = _element_text(author)
                    if name:
                        authors.append(name)
                url_el = paper.find("url")
                url = _element_text(url_el) if url_el is not None else None
                if url and not url.startswith("http"):
                    url = f"https://aclanthology.org/{url}"
                records.append(
                    BibRecord.make(
                        id=f"acl:{collection_id}-{volume_id}.{paper_id}",
                        title=title,
                        authors=tuple(authors),
                        year=vol_year,
                        venue=venue,
                        url=url or None,
                    )
                )
    return IngestResult(records, skipped, "acl", str(directory))


def ingest_arxiv_snapshot(path: str | Path) -> IngestResult:
    """Read an arXiv metadata dump: JSON lines with at least id and title.

    Newlines inside titles collapse to single spaces. Undecodable lines and
    lines without a usable id/title are skipped and counted.
    """
    records: list[BibRecord] = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                skipped += 1
                continue
            if not isinstance(obj, dict):
                skipped += 1
                continue
            arxiv_id = obj.get("id")
            title = obj.get("title")
            if not isinstance(arxiv_id, str) or not isinstance(title, str):
                skipped += 1
                continue
            title = re.sub(r"\s+", " ", title).strip()
            if not arxiv_id.strip() or not title:
                skipped += 1
                continue
            authors: tuple[str, ...] = ()
            raw_authors = obj.get("authors")
            if isinstance(raw_authors, list):
                authors = tuple(a for a in raw_authors if isinstance(a, str))
            elif isinstance(raw_authors, str):
                authors = tuple(
                    a.strip() for a in re.split(r",| and ", raw_authors) if a.strip()
                )
            year = obj.get("year") if isinstance(obj.get("year"), int) else None
            records.append(
                BibRecord.make(
                    id=f"arxiv:{arxiv_id.strip()}",
                    title=title,
                    authors=authors,
                    year=year,
                    venue=None,
                    url=f"https://arxiv.org/abs/{arxiv_id.strip()}",
                )
            )
    return IngestResult(records, skipped, "arxiv", str(path))


_DBLP_KINDS = frozenset(
    {
        "article",
        "inproceedings",
        "proceedings",
        "incollection",
        "book",
        "phdthesis",
        "mastersthesis",
        "www",
    }
)


def ingest_dblp(path: str | Path) -> IngestResult:
    """Read a DBLP XML dump (plain XML, entities already resolved)."""
    records: list[BibRecord] = []
    skipped = 0
    try:
        for _, elem in ET.iterparse(str(path), events=("end",)):
            if elem.tag not in _DBLP_KINDS:
                continue
            key = elem.get("key")
            title_el = elem.find("title")
            title = _element_text(title_el) if title_el is not None else ""
            if not key or not title:
                skipped += 1
                elem.clear()
                continue
            authors = tuple(
                _element_text(a) for a in elem.iter("author") if _element_text(a)
            )
            year_el = elem.find("year")
            year = None
            if year_el is not None and (year_el.text or "").strip().isdigit():
                year = int(year_el.text.strip())
            venue_el = elem.find("journal")
            if venue_el is None:
                venue_el = elem.find("booktitle")
            venue = _element_text(venue_el) if venue_el is not None else None
            url_el = elem.find("ee")
            url = _element_text(url_el) if url_el is not None else None
            records.append(
                BibRecord.make(
                    id=f"dblp:{key}",
                    title=title.rstrip("."),
                    authors=authors,
                    year=year,
                    venue=venue or None,
                    url=url or None,
                )
            )
            elem.clear()
    except ET.ParseError as exc:
        raise XmlError(f"{path}: {exc.msg}", position=exc.position) from exc
    return IngestResult(records, skipped, "dblp", str(path))
