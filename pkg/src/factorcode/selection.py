"""Sentence selection for annotation: negation cues, affirmation scope,
physical-characteristic and medication lexicons.

A sentence is exported for annotation when it carries a negation cue
outside any affirmation scope, or when a lexicon phrase matches.  The
phrase "in line with" opens an affirmation scope running to the next
comma, semicolon, or sentence end; cues inside a scope never fire.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .corpus import Sentence, SentenceId

DEFAULT_NEGATION_CUES: tuple[str, ...] = (
    "not", "never", "no", "without", "failed to", "did not", "was not",
    "were not", "unable to",
)

DEFAULT_AFFIRMATION_PHRASES: tuple[str, ...] = ("in line with",)

_WORD = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z0-9]+)*")
_CLAUSE_BREAK = re.compile(r"[,;]")


@dataclass(frozen=True)
class NegationConfig:
    cues: tuple[str, ...] = DEFAULT_NEGATION_CUES
    affirmation_phrases: tuple[str, ...] = DEFAULT_AFFIRMATION_PHRASES


@dataclass(frozen=True)
class Lexicon:
    name: str
    entries: frozenset[str]
    match_mode: str = "phrase"  # "phrase" | "token"

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError(f"lexicon {self.name!r} has no entries")
        for e in self.entries:
            if e != e.strip() or not e:
                raise ValueError(f"lexicon {self.name!r} entry {e!r} not trimmed")


@dataclass(frozen=True)
class SelectionFlags:
    sentence_id: SentenceId
    negated: bool
    affirmed_override: bool
    lexicon_hits: Mapping[str, tuple[str, ...]]
    selected: bool


def _tokens(text: str) -> list[tuple[str, int]]:
    """Lowercased word tokens with character start offsets."""
    return [(m.group().lower(), m.start()) for m in _WORD.finditer(text)]


def affirmation_scope(text: str, config: NegationConfig | None = None
                      ) -> list[tuple[int, int]]:
    """Token-index ranges (half-open) covered by an affirmation phrase.

    Each occurrence of a phrase opens a scope from its first token to the
    next clause boundary (comma, semicolon, or sentence end).
    """
    cfg = config or NegationConfig()
    toks = _tokens(text)
    scopes: list[tuple[int, int]] = []
    for phrase in cfg.affirmation_phrases:
        words = phrase.lower().split()
        for i in range(len(toks) - len(words) + 1):
            if [t for t, _ in toks[i:i + len(words)]] != words:
                continue
            phrase_end_char = toks[i + len(words) - 1][1] + len(toks[i + len(words) - 1][0])
            brk = _CLAUSE_BREAK.search(text, phrase_end_char)
            if brk is None:
                end_tok = len(toks)
            else:
                end_tok = len(toks)
                for j in range(i + len(words), len(toks)):
                    if toks[j][1] > brk.start():
                        end_tok = j
                        break
            scopes.append((i, end_tok))
    scopes.sort()
    return scopes


def _scan_cues(text: str, cfg: NegationConfig
               ) -> tuple[list[tuple[str, int]], list[tuple[str, int]]]:
    """Return (fired, suppressed) cues as (phrase, token_index) pairs.

    Longer cues win at a shared position, so "did not" never also reports
    a bare "not".  Cues whose tokens fall inside an affirmation scope are
    suppressed rather than fired.
    """
    toks = _tokens(text)
    scopes = affirmation_scope(text, cfg)
    cue_words = sorted((c.lower().split() for c in cfg.cues), key=len, reverse=True)

    def in_scope(start: int, length: int) -> bool:
        return any(s <= start and start + length <= e for s, e in scopes)

    fired: list[tuple[str, int]] = []
    suppressed: list[tuple[str, int]] = []
    i = 0
    while i < len(toks):
        matched = False
        for words in cue_words:
            if i + len(words) > len(toks):
                continue
            if [t for t, _ in toks[i:i + len(words)]] == words:
                cue = " ".join(words)
                if in_scope(i, len(words)):
                    suppressed.append((cue, i))
                else:
                    fired.append((cue, i))
                i += len(words)
                matched = True
                break
        if not matched:
            i += 1
    return fired, suppressed


def detect_negation(text: str, config: NegationConfig | None = None
                    ) -> tuple[bool, list[tuple[str, int]]]:
    """Rule-based negation detection over normalized sentence text.

    Returns (negated, cues) where cues lists every fired cue as
    (phrase, token_index); cues inside affirmation scope never fire.
    """
    cfg = config or NegationConfig()
    fired, _ = _scan_cues(text, cfg)
    return bool(fired), fired


def match_lexicon(text: str, lexicon: Lexicon) -> tuple[str, ...]:
    """Phrases from the lexicon that occur (as whole-token runs) in the text."""
    toks = [t for t, _ in _tokens(text)]
    hits: list[str] = []
    for entry in sorted(lexicon.entries):
        words = entry.split()
        if lexicon.match_mode == "token" and len(words) != 1:
            continue
        for i in range(len(toks) - len(words) + 1):
            if toks[i:i + len(words)] == words:
                hits.append(entry)
                break
    return tuple(hits)


def select_sentence(sentence: Sentence, lexicons: Sequence[Lexicon],
                    config: NegationConfig | None = None) -> SelectionFlags:
    cfg = config or NegationConfig()
    fired, suppressed = _scan_cues(sentence.text, cfg)
    negated = bool(fired)
    affirmed_override = bool(suppressed) and not negated
    hits = {
        lex.name: matched
        for lex in lexicons
        if (matched := match_lexicon(sentence.text, lex))
    }
    selected = (negated and not affirmed_override) or bool(hits)
    return SelectionFlags(
        sentence_id=sentence.sentence_id,
        negated=negated,
        affirmed_override=affirmed_override,
        lexicon_hits=hits,
        selected=selected,
    )


def select_batch(sentences: Iterable[Sentence], lexicons: Sequence[Lexicon],
                 config: NegationConfig | None = None) -> list[SelectionFlags]:
    """One SelectionFlags per input sentence, in input order."""
    cfg = config or NegationConfig()
    return [select_sentence(s, lexicons, cfg) for s in sentences]


def load_lexicon(path: str | Path, name: str | None = None,
                 match_mode: str = "phrase") -> Lexicon:
    """Read a lexicon file: one lowercase phrase per line, ``#`` comments."""
    path = Path(path)
    entries: set[str] = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entries.add(line.lower())
    return Lexicon(name=name or path.stem, entries=frozenset(entries),
                   match_mode=match_mode)


def default_lexicons() -> list[Lexicon]:
    base = resources.files("factorcode").joinpath("data/lexicons")
    return [
        load_lexicon(Path(str(base.joinpath("physical_characteristics.txt")))),
        load_lexicon(Path(str(base.joinpath("medications.txt")))),
    ]


def write_flags_csv(flags: Iterable[SelectionFlags], fp: IO[str]) -> int:
    """Export flags as ``doc_id,idx,negated,affirmed_override,lexicon_hits,selected``.

    Hits serialize as ``lexicon:phrase`` pairs joined with ``|``.
    """
    writer = csv.writer(fp)
    writer.writerow(["doc_id", "idx", "negated", "affirmed_override",
                     "lexicon_hits", "selected"])
    n = 0
    for f in flags:
        hits = "|".join(
            f"{name}:{phrase}"
            for name in sorted(f.lexicon_hits)
            for phrase in f.lexicon_hits[name]
        )
        writer.writerow([
            f.sentence_id[0], f.sentence_id[1],
            str(f.negated).lower(), str(f.affirmed_override).lower(),
            hits, str(f.selected).lower(),
        ])
        n += 1
    return n
