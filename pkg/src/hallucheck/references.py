"""Reference extraction and parsing.

Turns extracted paper text into structured citations: locate the references
section, segment it into entries, and pull out authors, year, title, venue,
pages, and identifiers. Parsing never rewrites text: every extracted value is
a contiguous substring of the entry it came from (modulo the whitespace
joining of wrapped lines), so a human reviewer can always find it in the PDF.
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BibtexSyntaxError,
    MalformedIdentifierError,
    NoIdentifierError,
    NoReferencesSectionError,
)

MIN_ENTRY_CHARS = 20  # shorter fragments are OCR debris, not citations

_HEADING_RE = re.compile(
    r"^\s*(?:\d{1,2}\.?\s+|[IVXL]{1,4}\.\s+)?(references|bibliography)\s*:?\s*$",
    re.IGNORECASE,
)
_SECTION_END_RE = re.compile(
    r"^\s*(?:appendix|appendices|acknowledgments|acknowledgements|supplementary\s+material)\b",
    re.IGNORECASE,
)
_NUMERIC_LABEL_RE = re.compile(r"^\s*\[(\d+)\]\s*")

# An entry opener is an author-like token run (capitalized words, initials,
# name particles, "and"/"et al."/organization connectives) whose sentence
# closes with a period followed by a 4-digit year sentence: "…Black. 2022.".
_NAME_PARTICLE = (
    r"(?:van|von|vander|der|den|de|del|della|da|di|do|dos|du|la|las|le|les|los|lo"
    r"|el|al\.?|ter|ten|te|bin|ibn|y|e|for|of|the|and|et|&)"
)
_NAME_TOKEN = r"(?:[A-Z][\w'’\-\.]*|" + _NAME_PARTICLE + r")"
_AUTHOR_YEAR_RE = re.compile(
    r"^(" + _NAME_TOKEN + r"(?:[,\s]+" + _NAME_TOKEN + r")*?[,.]?)\s+"
    r"((?:19|20)\d{2})([a-z])?\.(?:\s|$)"
)
_YEAR_ANCHOR_RE = re.compile(r"\.\s*((?:19|20)\d{2})([a-z])?\.\s*")
_PAREN_YEAR_RE = re.compile(r"\(((?:19|20)\d{2})([a-z])?\)\.?\s*")

_VENUE_CUE_RE = re.compile(
    r"(?:\bIn [A-Z0-9]|\bIn Proceedings\b|\bProceedings of\b|\bIn Findings\b"
    r"|\bFindings of\b|\bJournal of\b|\bTransactions of\b|\bComputational"
    r" Linguistics\b|\bCoRR\b|\barXiv preprint\b|arXiv:|https?://)"
)
# Only "." ends the title sentence: "?"/"!" are far more often inside a
# title ("Do parsers dream? Probing…") than at a title/venue boundary.
_SENTENCE_END_RE = re.compile(r"(?<![A-Z])\.(?=\s+[^a-z\s])")
_PAGES_RE = re.compile(
    r"(?:\b(?:pages?|pp)\.?\s+(\d+\s*[–—−-]+\s*\d+)"
    r"|\b(\d+(?:\(\d+\))?:\d+(?:[–—−-]+\d+)?)\b"
    r"|\b(\d+[–—−-]+\d+)\s*\.?\s*$)"
)

_ARXIV_MARKER_RE = re.compile(r"arxiv\s*:\s*", re.IGNORECASE)
_ARXIV_NEW_RE = re.compile(r"(\d{2})(\d{2})\.(\d{4,5})(?!\d)(v\d+)?")
_ARXIV_OLD_RE = re.compile(r"([a-z][a-z\-]*[a-z](?:\.[A-Z]{2})?)/(\d{7})(?!\d)")

_DOI_RE = re.compile(r"\b(10\.\d{4,9}/[^\s,;]+)")
_URL_RE = re.compile(r"\bhttps?://[^\s]+")
_ACL_URL_RE = re.compile(r"aclanthology\.org/([\w][\w.\-]*?)(?:\.pdf)?(?:[/\s]|$)")
_ACL_ID_RE = re.compile(r"\b((?:19|20)\d{2}\.[\w\-]+-[\w]+\.\d+|[A-Z]\d{2}-\d{4})\b")


@dataclass(frozen=True)
class DocumentText:
    """Extracted text of one paper: text blocks with their page numbers."""

    source_id: str
    blocks: tuple[tuple[str, int], ...]

    @classmethod
    def from_blocks_file(cls, path: str | Path, source_id: str | None = None) -> "DocumentText":
        """Read block text: one block per line, form feed separates pages."""
        p = Path(path)
        raw = p.read_text(encoding="utf-8")
        blocks: list[tuple[str, int]] = []
        for page_no, page in enumerate(raw.split("\f"), start=1):
            for line in page.splitlines():
                blocks.append((line, page_no))
        return cls(source_id=source_id or p.stem, blocks=tuple(blocks))

    def text(self) -> str:
        """The document linearized, one block per line."""
        return "\n".join(b[0] for b in self.blocks)


@dataclass(frozen=True)
class ReferenceSection:
    """The references span of a document, with offsets into its text."""

    source_id: str
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class RawReference:
    """One segmented entry, wrapped lines joined with single spaces."""

    source_id: str
    ordinal: int
    text: str
    span: tuple[int, int]  # character offsets into the reference section


@dataclass(frozen=True)
class ArxivId:
    """A validated arXiv identifier.

    style "new" is YYMM.NNNNN (optionally with a vN revision suffix kept in
    ``value``); style "old" is archive/NNNNNNN.
    """

    style: str
    value: str

    @property
    def base(self) -> str:
        """The identifier without any revision suffix."""
        return re.sub(r"v\d+$", "", self.value) if self.style == "new" else self.value

    def __str__(self) -> str:
        return f"arXiv:{self.value}"


@dataclass(frozen=True)
class Identifiers:
    """Identifiers found in one entry, plus any malformed arXiv snippets."""

    arxiv_id: ArxivId | None = None
    doi: str | None = None
    url: str | None = None
    acl_id: str | None = None
    malformed: tuple[str, ...] = ()


@dataclass(frozen=True)
class ParsedReference:
    """Structured view of one entry. Absent fields were not extractable."""

    raw: RawReference
    authors: tuple[str, ...] = ()
    year: int | None = None
    title: str | None = None
    venue: str | None = None
    pages: str | None = None
    identifiers: Identifiers | None = None


def extract_reference_section(doc: DocumentText) -> ReferenceSection:
    """Locate the references span of a document.

    The section begins after the first line reading "References" or
    "Bibliography" (case-insensitive, optionally numbered) and runs to the
    next appendix-level heading or the end of the document.
    """
    full = doc.text()
    start = None
    offset = 0
    for line in full.split("\n"):
        line_end = offset + len(line)
        if start is None:
            if _HEADING_RE.match(line):
                start = min(line_end + 1, len(full))
        elif _SECTION_END_RE.match(line) and len(line.split()) <= 6:
            return ReferenceSection(doc.source_id, full[start:offset], start, offset)
        offset = line_end + 1
    if start is None:
        raise NoReferencesSectionError(
            f"{doc.source_id}: no references/bibliography heading found"
        )
    return ReferenceSection(doc.source_id, full[start:], start, len(full))


def _is_entry_start(lines: list[str], i: int) -> bool:
    line = lines[i].strip()
    if not line:
        return False
    if _NUMERIC_LABEL_RE.match(line):
        return True
    # The author run may wrap, so give the pattern a bounded lookahead.
    window = line
    j = i + 1
    while len(window) < 300 and j < len(lines) and lines[j].strip():
        window = window + " " + lines[j].strip()
        j += 1
    if not _AUTHOR_YEAR_RE.match(window[:300]):
        return False
    if i == 0:
        return True
    prev = ""
    for k in range(i - 1, -1, -1):
        prev = lines[k].strip()
        if prev:
            break
    # Prefer not splitting: a new entry normally follows a finished one.
    return prev == "" or prev[-1] in ".)]\"'"


def segment_entries(section: ReferenceSection) -> list[RawReference]:
    """Split a reference section into entries.

    A new entry starts at a bracketed numeric label or at an author-like
    opener (see module header). When neither style is detectable the whole
    section is one entry; fabricating boundaries is worse than merging.
    """
    lines = section.text.split("\n")
    starts: list[int] = []
    offsets: list[int] = []
    pos = 0
    for i, line in enumerate(lines):
        offsets.append(pos)
        pos += len(line) + 1
        if _is_entry_start(lines, i):
            starts.append(i)
    if not starts or (starts[0] != 0 and any(l.strip() for l in lines[: starts[0]])):
        first_content = next((i for i, l in enumerate(lines) if l.strip()), None)
        if first_content is not None and (not starts or first_content < starts[0]):
            starts.insert(0, first_content)
    entries: list[RawReference] = []
    for n, start_line in enumerate(starts):
        stop_line = starts[n + 1] if n + 1 < len(starts) else len(lines)
        chunk = lines[start_line:stop_line]
        while chunk and not chunk[-1].strip():
            chunk.pop()
        if not chunk:
            continue
        text = " ".join(part.strip() for part in chunk if part.strip())
        span_start = offsets[start_line]
        span_end = offsets[start_line + len(chunk) - 1] + len(chunk[-1])
        entries.append(
            RawReference(
                source_id=section.source_id,
                ordinal=len(entries),
                text=text,
                span=(span_start, span_end),
            )
        )
    return entries


def _scan_arxiv(text: str) -> tuple[ArxivId | None, tuple[str, ...]]:
    """All-marker scan: first well-formed id wins, malformed snippets kept."""
    malformed: list[str] = []
    for marker in _ARXIV_MARKER_RE.finditer(text):
        tail = text[marker.end() :]
        m = _ARXIV_NEW_RE.match(tail)
        if m:
            month_ok = 1 <= int(m.group(2)) <= 12
            version_ok = m.group(4) is None or int(m.group(4)[1:]) >= 1
            if month_ok and version_ok:
                return ArxivId(style="new", value=m.group(0)), tuple(malformed)
            malformed.append(m.group(0))
            continue
        m = _ARXIV_OLD_RE.match(tail)
        if m:
            return ArxivId(style="old", value=m.group(0)), tuple(malformed)
        snippet = tail.split()[0][:25] if tail.split() else ""
        malformed.append(snippet)
    return None, tuple(malformed)


def parse_arxiv_id(text: str) -> ArxivId:
    """Return the first well-formed arXiv identifier after an "arXiv:" marker.

    >>> parse_arxiv_id("arXiv preprint arXiv:1910.01708, 7(1):2").value
    '1910.01708'
    """
    if not _ARXIV_MARKER_RE.search(text):
        raise NoIdentifierError("no arXiv marker in text")
    found, malformed = _scan_arxiv(text)
    if found is not None:
        return found
    if malformed:
        raise MalformedIdentifierError(
            f"identifier violates the arXiv grammar: {malformed[0]!r}"
        )
    raise NoIdentifierError("arXiv marker present but no identifier follows it")


def _extract_identifiers(text: str) -> Identifiers | None:
    arxiv, malformed = _scan_arxiv(text)
    doi = None
    m = _DOI_RE.search(text)
    if m:
        doi = m.group(1).rstrip(".,;)")
    url = None
    m = _URL_RE.search(text)
    if m:
        url = m.group(0).rstrip(".,;)")
    acl_id = None
    m = _ACL_URL_RE.search(text)
    if m:
        acl_id = m.group(1).rstrip(".")
    else:
        m = _ACL_ID_RE.search(text)
        if m:
            acl_id = m.group(1)
    if arxiv is None and doi is None and url is None and acl_id is None and not malformed:
        return None
    return Identifiers(arxiv_id=arxiv, doi=doi, url=url, acl_id=acl_id, malformed=malformed)


def _max_plausible_year() -> int:
    return datetime.date.today().year + 1


def _split_authors(authors_text: str) -> tuple[str, ...]:
    text = _NUMERIC_LABEL_RE.sub("", authors_text).strip()
    text = re.sub(r"\bet al\.?", "", text)
    parts = re.split(r",\s*(?:and\s+)?|\s+and\s+|\s*&\s*", text)
    out = []
    for part in parts:
        name = part.strip(" .,")
        if name:
            out.append(name)
    return tuple(out)


def _find_year_anchor(text: str) -> tuple[int, int, int] | None:
    """(authors_end, rest_start, year) for the first plausible year sentence."""
    hi = _max_plausible_year()
    for regex, authors_end_at in ((_YEAR_ANCHOR_RE, "start"), (_PAREN_YEAR_RE, "start")):
        for m in regex.finditer(text):
            year = int(m.group(1))
            if 1900 <= year <= hi:
                end = m.start() + (1 if regex is _YEAR_ANCHOR_RE else 0)
                return end, m.end(), year
    return None


def parse_reference(raw: RawReference) -> ParsedReference:
    """Parse one entry with the author-year grammar: authors "." year "." title "." tail.

    The title is the text between the year sentence and the first venue cue
    ("In Proceedings", "arXiv preprint", a journal-name cue, a URL) or the
    first sentence break. Entries under 20 characters come back with every
    field absent.
    """
    text = raw.text
    if len(text) < MIN_ENTRY_CHARS:
        return ParsedReference(raw=raw)
    identifiers = _extract_identifiers(text)
    anchor = _find_year_anchor(text)
    if anchor is None:
        return ParsedReference(raw=raw, identifiers=identifiers)
    authors_end, rest_start, year = anchor
    authors = _split_authors(text[:authors_end])
    rest = text[rest_start:]

    cue = _VENUE_CUE_RE.search(rest)
    sentence = _SENTENCE_END_RE.search(rest)
    cut_candidates = [m.start() for m in (cue, sentence) if m is not None]
    cut = min(cut_candidates) if cut_candidates else len(rest)
    title = rest[:cut].strip().rstrip(".,;").strip() or None

    remainder = rest[cut:]
    if sentence is not None and sentence.start() == cut:
        remainder = remainder[1:]  # drop the sentence period itself
    pages = None
    pm = _PAGES_RE.search(remainder)
    if pm:
        pages = next(g for g in pm.groups() if g)
    venue = remainder
    for stop in (_URL_RE.search(venue), re.search(r"arXiv:", venue), pm):
        if stop is not None:
            venue = venue[: min(len(venue), stop.start())]
    venue = venue.strip(" .,;:") or None
    return ParsedReference(
        raw=raw,
        authors=authors,
        year=year,
        title=title,
        venue=venue,
        pages=pages,
        identifiers=identifiers,
    )


def load_plaintext_list(path: str | Path, source_id: str | None = None) -> list[RawReference]:
    """Load a plaintext file that is itself a reference list (one section)."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    section = ReferenceSection(
        source_id=source_id or p.stem, text=text, start=0, end=len(text)
    )
    return segment_entries(section)


# --- BibTeX ------------------------------------------------------------------


def _bib_skip_ws(text: str, i: int) -> int:
    while i < len(text) and text[i].isspace():
        i += 1
    return i


def _bib_read_value(text: str, i: int, entry_index: int) -> tuple[str, int]:
    i = _bib_skip_ws(text, i)
    if i >= len(text):
        raise BibtexSyntaxError("unterminated field value", entry_index)
    ch = text[i]
    if ch == "{":
        depth = 1
        j = i + 1
        while j < len(text) and depth:
            if text[j] == "{":
                depth += 1
            elif text[j] == "}":
                depth -= 1
            j += 1
        if depth:
            raise BibtexSyntaxError("unbalanced braces in field value", entry_index)
        return text[i + 1 : j - 1], j
    if ch == '"':
        j = text.find('"', i + 1)
        if j < 0:
            raise BibtexSyntaxError("unterminated quoted value", entry_index)
        return text[i + 1 : j], j + 1
    m = re.match(r"[\w.\-+:/]+", text[i:])
    if not m:
        raise BibtexSyntaxError(f"unexpected character {ch!r} in value", entry_index)
    return m.group(0), i + m.end()


def _strip_braces(value: str) -> str:
    return re.sub(r"\s+", " ", value.replace("{", "").replace("}", "")).strip()


def load_bibtex(path: str | Path) -> list[ParsedReference]:
    """Load citations from a BibTeX file.

    Each entry becomes a ParsedReference whose raw text is the entry source.
    @comment/@string/@preamble blocks are skipped. Structural problems raise
    BibtexSyntaxError carrying the 0-based entry index.
    """
    text = Path(path).read_text(encoding="utf-8")
    out: list[ParsedReference] = []
    entry_index = 0
    i = 0
    while True:
        at = text.find("@", i)
        if at < 0:
            break
        m = re.match(r"@\s*(\w+)\s*", text[at:])
        if not m:
            raise BibtexSyntaxError("stray @ without an entry type", entry_index)
        etype = m.group(1).lower()
        i = at + m.end()
        if i >= len(text) or text[i] not in "{(":
            raise BibtexSyntaxError(f"@{etype} without an opening brace", entry_index)
        close_ch = "}" if text[i] == "{" else ")"
        body_start = i + 1
        brace_depth = 1 if close_ch == "}" else 0
        end = -1
        j = body_start
        while j < len(text):
            ch = text[j]
            if ch == "{":
                brace_depth += 1
            elif ch == "}":
                brace_depth -= 1
                if close_ch == "}" and brace_depth == 0:
                    end = j
                    break
            elif ch == ")" and close_ch == ")" and brace_depth == 0:
                end = j
                break
            j += 1
        if end < 0:
            raise BibtexSyntaxError("unterminated entry", entry_index)
        body = text[body_start:end]
        j = end + 1
        source = re.sub(r"\s+", " ", text[at:j]).strip()
        i = j
        if etype in ("comment", "string", "preamble"):
            continue
        key_m = re.match(r"\s*([^,\s]+)\s*,", body)
        if not key_m:
            raise BibtexSyntaxError("entry has no citation key", entry_index)
        fields: dict[str, str] = {}
        k = key_m.end()
        while True:
            k = _bib_skip_ws(body, k)
            if k >= len(body):
                break
            fm = re.match(r"([\w\-]+)\s*=", body[k:])
            if not fm:
                if body[k] == ",":
                    k += 1
                    continue
                raise BibtexSyntaxError(
                    f"expected a field assignment near {body[k:k+15]!r}", entry_index
                )
            value, k2 = _bib_read_value(body, k + fm.end(), entry_index)
            fields[fm.group(1).lower()] = value
            k = _bib_skip_ws(body, k2)
            if k < len(body) and body[k] == ",":
                k += 1
        raw = RawReference(
            source_id=str(path),
            ordinal=len(out),
            text=source,
            span=(at, j),
        )
        year: int | None = None
        if "year" in fields:
            ym = re.search(r"(19|20)\d{2}", fields["year"])
            if ym and 1900 <= int(ym.group(0)) <= _max_plausible_year():
                year = int(ym.group(0))
        authors = tuple(
            _strip_braces(a) for a in re.split(r"\s+and\s+", fields.get("author", "")) if a.strip()
        )
        title = _strip_braces(fields["title"]) or None if "title" in fields else None
        venue = None
        for vf in ("journal", "booktitle", "howpublished"):
            if fields.get(vf):
                venue = _strip_braces(fields[vf])
                break
        arxiv = None
        malformed: tuple[str, ...] = ()
        if fields.get("eprint"):
            try:
                arxiv = parse_arxiv_id("arXiv:" + fields["eprint"].strip())
            except (MalformedIdentifierError, NoIdentifierError):
                malformed = (fields["eprint"].strip(),)
        doi = fields.get("doi") or None
        url = fields.get("url") or None
        acl_id = None
        if url:
            am = _ACL_URL_RE.search(url)
            if am:
                acl_id = am.group(1).rstrip(".")
        idents = None
        if arxiv or doi or url or acl_id or malformed:
            idents = Identifiers(
                arxiv_id=arxiv, doi=doi, url=url, acl_id=acl_id, malformed=malformed
            )
        out.append(
            ParsedReference(
                raw=raw,
                authors=authors,
                year=year,
                title=title,
                venue=venue,
                pages=fields.get("pages") or None,
                identifiers=idents,
            )
        )
        entry_index += 1
    return out
