"""Report ingestion: text normalization, sentence segmentation, metadata.

Input reports are plain UTF-8 text files (one per report); any PDF-to-text
conversion happens upstream.  Normalization maps typographic quotes to
ASCII, strips a configurable symbol set, collapses whitespace while keeping
paragraph breaks, and is idempotent.  Segmentation is a deterministic
rule-based splitter with an abbreviation exception list.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

SentenceId = tuple[str, int]


class CorpusError(Exception):
    """Base class for ingestion failures."""


class NonUtf8Input(CorpusError):
    def __init__(self, position: int, source: str = "") -> None:
        self.position = position
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"input is not valid UTF-8 at byte offset {position}{where}")


class DuplicateDocId(CorpusError):
    pass


class MetadataParse(CorpusError):
    def __init__(self, row: int, message: str) -> None:
        self.row = row
        super().__init__(f"metadata row {row}: {message}")


class BatchParse(CorpusError):
    def __init__(self, row: int, message: str) -> None:
        self.row = row
        super().__init__(f"batches row {row}: {message}")


# Characters mapped before the allow-list filter.  Curly single quotes and
# backtick-like marks become ASCII apostrophes so possessives survive.
DEFAULT_CHAR_MAP: dict[str, str] = {
    "‘": "'",
    "’": "'",
    "‚": "'",
    "ʼ": "'",
    "“": '"',
    "”": '"',
    "„": '"',
    "–": "-",
    "—": "-",
    "…": "...",
    " ": " ",
}

DEFAULT_ALLOWED_PUNCT = frozenset(".,;:!?'\"()[]{}/%&+-*=<>@#_")

_PARA_SPLIT = re.compile(r"\n\s*\n")


@dataclass(frozen=True)
class NormalizeConfig:
    char_map: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_CHAR_MAP))
    strip_chars: frozenset[str] = frozenset("`")
    allowed_punct: frozenset[str] = DEFAULT_ALLOWED_PUNCT


def normalize_text(raw: bytes | str, config: NormalizeConfig | None = None,
                   source: str = "") -> str:
    """Decode and canonicalize report text.

    Strip-set characters are replaced by a space (so ``a``b`` becomes
    ``a b``), characters outside the allow-list are dropped, whitespace runs
    collapse to single spaces, and blank lines survive as exactly one
    ``\\n\\n`` paragraph break.  The function is idempotent.
    """
    cfg = config or NormalizeConfig()
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NonUtf8Input(exc.start, source) from None
    else:
        text = raw

    out: list[str] = []
    for ch in text:
        mapped = cfg.char_map.get(ch, ch)
        for m in mapped:
            if m in cfg.strip_chars:
                out.append(" ")
            elif m.isalnum() or m in cfg.allowed_punct or m in " \t\r\n":
                out.append(m)
            # anything else (control chars, stray symbols) is dropped
    flat = "".join(out)

    paragraphs = [" ".join(p.split()) for p in _PARA_SPLIT.split(flat)]
    return "\n\n".join(p for p in paragraphs if p)


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    idx: int
    section: str
    text: str
    span: tuple[int, int]

    @property
    def sentence_id(self) -> SentenceId:
        return (self.doc_id, self.idx)


@dataclass
class Document:
    doc_id: str
    source_path: str
    body: str
    year: int | None = None
    sections: list[tuple[str, tuple[int, int]]] = field(default_factory=list)


@dataclass(frozen=True)
class CaseMetadata:
    doc_id: str
    ethnic_group: str | None = None
    outcome: str | None = None
    year: int | None = None


@dataclass(frozen=True)
class Batch:
    batch_id: str
    doc_ids: tuple[str, ...]
    kind: str  # "real" | "synthetic"


DEFAULT_ABBREVIATIONS = (
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "e.g.", "i.e.", "etc.", "vs.", "cf.",
)

DEFAULT_ETHNIC_GROUPS = frozenset(
    {"Asian", "Black", "Data not received", "Mixed Background", "White British",
     "White Other"}
)
DEFAULT_OUTCOMES = frozenset({"TH", "NND", "MD", "Stillbirth"})


@dataclass(frozen=True)
class SegmentConfig:
    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS


@dataclass(frozen=True)
class SectionConfig:
    # Regexes matched against whole paragraphs; a match starts a new section
    # titled by the matching paragraph.  Empty list = single implicit section.
    heading_patterns: tuple[str, ...] = ()


@dataclass(frozen=True)
class CorpusConfig:
    normalize: NormalizeConfig = field(default_factory=NormalizeConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    sections: SectionConfig = field(default_factory=SectionConfig)
    ethnic_groups: frozenset[str] = DEFAULT_ETHNIC_GROUPS
    outcomes: frozenset[str] = DEFAULT_OUTCOMES


_BOUNDARY = re.compile(r"[.!?](?=\s+[A-Z0-9])")


def _is_abbreviation(body: str, punct_pos: int, abbreviations: Sequence[str]) -> bool:
    for abbr in abbreviations:
        start = punct_pos - len(abbr) + 1
        if start < 0:
            continue
        if body[start:punct_pos + 1].lower() != abbr.lower():
            continue
        if start == 0 or body[start - 1].isspace() or body[start - 1] in "([\"'":
            return True
    return False


def detect_sections(body: str, config: SectionConfig | None = None
                    ) -> list[tuple[str, tuple[int, int]]]:
    """Split a normalized body into titled sections via heading patterns.

    Headings are paragraphs that fully match one of the configured regexes;
    a heading opens a section running to the next heading.  With no match
    (or no patterns) the whole body is one untitled section.
    """
    cfg = config or SectionConfig()
    if not body:
        return [("", (0, 0))]
    patterns = [re.compile(p) for p in cfg.heading_patterns]
    if not patterns:
        return [("", (0, len(body)))]

    headings: list[tuple[int, int, str]] = []
    pos = 0
    for para in body.split("\n\n"):
        if any(p.fullmatch(para) for p in patterns):
            headings.append((pos, pos + len(para), para))
        pos += len(para) + 2

    if not headings:
        return [("", (0, len(body)))]

    sections: list[tuple[str, tuple[int, int]]] = []
    if headings[0][0] > 0:
        sections.append(("", (0, headings[0][0])))
    for i, (h_start, _h_end, title) in enumerate(headings):
        end = headings[i + 1][0] if i + 1 < len(headings) else len(body)
        sections.append((title, (h_start, end)))
    return sections


def segment_sentences(doc: Document, config: SegmentConfig | None = None) -> list[Sentence]:
    """Split a document body into ordered sentences with char spans.

    Boundaries are terminal punctuation followed by whitespace and a capital
    or digit, with abbreviation and decimal-number exceptions; paragraph
    breaks always split.  ``doc.body[span] == text`` for every sentence, and
    the gaps between consecutive spans contain only whitespace.
    """
    cfg = config or SegmentConfig()
    body = doc.body
    if not body.strip():
        return []

    cut_points: list[int] = []  # index just after each sentence-final char
    offset = 0
    for para in body.split("\n\n"):
        for match in _BOUNDARY.finditer(para):
            pos = match.start()
            if _is_abbreviation(para, pos, cfg.abbreviations):
                continue
            cut_points.append(offset + pos + 1)
        cut_points.append(offset + len(para))
        offset += len(para) + 2

    sentences: list[Sentence] = []
    prev = 0
    for cut in cut_points:
        raw = body[prev:cut]
        stripped = raw.strip()
        if stripped:
            start = prev + (len(raw) - len(raw.lstrip()))
            end = start + len(stripped)
            sentences.append(Sentence(
                doc_id=doc.doc_id,
                idx=len(sentences),
                section=_section_for(doc, start),
                text=stripped,
                span=(start, end),
            ))
        prev = cut
    return sentences


def _section_for(doc: Document, char_pos: int) -> str:
    for title, (start, end) in doc.sections:
        if start <= char_pos < end:
            return title
    return ""


class Corpus:
    """Immutable bundle of documents, sentences, case metadata, and batches."""

    def __init__(self) -> None:
        self.documents: dict[str, Document] = {}
        self.sentences_by_doc: dict[str, list[Sentence]] = {}
        self.metadata: dict[str, CaseMetadata] = {}
        self.batches: dict[str, Batch] = {}
        self.warnings: list[str] = []

    def sentences(self) -> Iterator[Sentence]:
        for doc_id in sorted(self.sentences_by_doc):
            yield from self.sentences_by_doc[doc_id]

    def sentence(self, doc_id: str, idx: int) -> Sentence:
        return self.sentences_by_doc[doc_id][idx]

    def group_of(self, doc_id: str) -> str:
        meta = self.metadata.get(doc_id)
        if meta is None or meta.ethnic_group is None:
            return "Data not received"
        return meta.ethnic_group

    def doc_groups(self) -> dict[str, str]:
        return {doc_id: self.group_of(doc_id) for doc_id in self.documents}

    def batch_sentences(self, batch_id: str) -> list[Sentence]:
        batch = self.batches[batch_id]
        out: list[Sentence] = []
        for doc_id in batch.doc_ids:
            out.extend(self.sentences_by_doc.get(doc_id, []))
        return out

    def dump_jsonl(self, fp: IO[str]) -> int:
        """Canonical dump: one ``{doc_id, idx, section, text}`` line per sentence."""
        n = 0
        for sent in self.sentences():
            fp.write(json.dumps(
                {"doc_id": sent.doc_id, "idx": sent.idx,
                 "section": sent.section, "text": sent.text},
                ensure_ascii=False) + "\n")
            n += 1
        return n


def _load_metadata(path: Path, config: CorpusConfig) -> dict[str, CaseMetadata]:
    rows: dict[str, CaseMetadata] = {}
    with path.open(newline="", encoding="utf-8") as fp:
        reader = csv.DictReader(fp)
        expected = ["doc_id", "ethnic_group", "outcome", "year"]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise MetadataParse(1, f"header must be {','.join(expected)}")
        for i, row in enumerate(reader, start=2):
            doc_id = (row["doc_id"] or "").strip()
            if not doc_id:
                raise MetadataParse(i, "missing doc_id")
            if doc_id in rows:
                raise MetadataParse(i, f"duplicate metadata for {doc_id!r}")
            group = (row["ethnic_group"] or "").strip() or None
            if group is not None and group not in config.ethnic_groups:
                raise MetadataParse(i, f"unknown ethnic_group {group!r}")
            outcome = (row["outcome"] or "").strip() or None
            if outcome is not None and outcome not in config.outcomes:
                raise MetadataParse(i, f"unknown outcome {outcome!r}")
            year_raw = (row["year"] or "").strip()
            try:
                year = int(year_raw) if year_raw else None
            except ValueError:
                raise MetadataParse(i, f"bad year {year_raw!r}") from None
            rows[doc_id] = CaseMetadata(doc_id, group, outcome, year)
    return rows


def _load_batches(path: Path, known_docs: Iterable[str]) -> dict[str, Batch]:
    known = set(known_docs)
    acc: dict[str, list[str]] = {}
    kinds: dict[str, str] = {}
    with path.open(newline="", encoding="utf-8") as fp:
        reader = csv.DictReader(fp)
        expected = ["batch_id", "doc_id", "kind"]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise BatchParse(1, f"header must be {','.join(expected)}")
        for i, row in enumerate(reader, start=2):
            batch_id = (row["batch_id"] or "").strip()
            doc_id = (row["doc_id"] or "").strip()
            kind = (row["kind"] or "").strip()
            if not batch_id or not doc_id:
                raise BatchParse(i, "missing batch_id or doc_id")
            if kind not in ("real", "synthetic"):
                raise BatchParse(i, f"kind must be real|synthetic, got {kind!r}")
            if doc_id not in known:
                raise BatchParse(i, f"batch {batch_id!r} references unknown doc {doc_id!r}")
            if batch_id in kinds and kinds[batch_id] != kind:
                raise BatchParse(i, f"batch {batch_id!r} has conflicting kinds")
            kinds[batch_id] = kind
            acc.setdefault(batch_id, [])
            if doc_id not in acc[batch_id]:
                acc[batch_id].append(doc_id)
    return {
        bid: Batch(bid, tuple(doc_ids), kinds[bid]) for bid, doc_ids in acc.items()
    }


def load_corpus(paths: Sequence[str | Path],
                metadata_file: str | Path | None = None,
                batches_file: str | Path | None = None,
                config: CorpusConfig | None = None) -> Corpus:
    """Load, normalize, and segment a set of report text files.

    ``doc_id`` is the file stem.  Metadata rows referencing unknown
    documents become warnings on the returned corpus, not errors.
    """
    cfg = config or CorpusConfig()
    corpus = Corpus()
    for p in paths:
        p = Path(p)
        doc_id = p.stem
        if doc_id in corpus.documents:
            raise DuplicateDocId(f"doc_id {doc_id!r} produced by more than one file")
        body = normalize_text(p.read_bytes(), cfg.normalize, source=str(p))
        doc = Document(doc_id=doc_id, source_path=str(p), body=body)
        doc.sections = detect_sections(body, cfg.sections)
        corpus.documents[doc_id] = doc
        corpus.sentences_by_doc[doc_id] = segment_sentences(doc, cfg.segment)

    if metadata_file is not None:
        meta = _load_metadata(Path(metadata_file), cfg)
        for doc_id, row in meta.items():
            if doc_id not in corpus.documents:
                corpus.warnings.append(f"metadata row for unknown doc {doc_id!r} ignored")
                continue
            corpus.metadata[doc_id] = row
            if row.year is not None:
                corpus.documents[doc_id].year = row.year

    if batches_file is not None:
        corpus.batches = _load_batches(Path(batches_file), corpus.documents)

    return corpus


def read_sentences_jsonl(path: str | Path) -> list[Sentence]:
    """Read a canonical sentence dump back into Sentence records.

    Spans are not stored in the dump; re-read sentences carry zero spans.
    """
    out: list[Sentence] = []
    with Path(path).open(encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                out.append(Sentence(
                    doc_id=row["doc_id"], idx=int(row["idx"]),
                    section=row.get("section", ""), text=row["text"],
                    span=(0, 0),
                ))
            except (KeyError, ValueError) as exc:
                raise CorpusError(f"{path}:{line_no}: bad sentence record ({exc})") from None
    return out
