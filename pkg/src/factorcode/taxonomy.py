"""Hierarchical human-factors taxonomy: loading, validation, and lookup.

Concepts are addressed by dotted codes ("3.4.2") and by canonical labels
built as the hyphen-join of ancestor names ("Organisation-Communication
factor-Between staff and patient (verbal)").  The bundled default file
additionally carries the shorter label variants that appear in annotated
corpora as aliases, so either form resolves to the same node.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

CODE_RE = re.compile(r"\d+(\.\d+)*\Z")


class TaxonomyError(Exception):
    """Base class for taxonomy loading and lookup failures."""


class DuplicateCode(TaxonomyError):
    pass


class DuplicateLabel(TaxonomyError):
    pass


class OrphanCode(TaxonomyError):
    pass


class CycleDetected(TaxonomyError):
    pass


class NotFound(TaxonomyError):
    pass


class AmbiguousLabel(TaxonomyError):
    pass


@dataclass
class ConceptNode:
    """One taxonomy entry; children are derived from dotted-code structure."""

    code: str
    name: str
    annotatable: bool = False
    aliases: tuple[str, ...] = ()
    children: list["ConceptNode"] = field(default_factory=list)
    canonical_label: str = ""

    def is_leaf(self) -> bool:
        return not self.children


class Taxonomy:
    """Immutable concept hierarchy with code/label/alias lookup."""

    def __init__(self, roots: list[ConceptNode], version: str = "") -> None:
        self.roots = roots
        self.version = version
        self._by_code: dict[str, ConceptNode] = {}
        self._by_label: dict[str, ConceptNode] = {}
        self._by_alias: dict[str, ConceptNode] = {}
        self._index()
        self._validate()

    # -- construction ------------------------------------------------------

    def _index(self) -> None:
        for node in self._walk_structural():
            if node.code in self._by_code:
                raise DuplicateCode(f"code {node.code!r} defined more than once")
            self._by_code[node.code] = node
        for node in self._by_code.values():
            if not node.canonical_label:
                node.canonical_label = self._label_for(node)
        for node in self._by_code.values():
            if node.canonical_label in self._by_label:
                raise DuplicateLabel(
                    f"label {node.canonical_label!r} maps to more than one code"
                )
            self._by_label[node.canonical_label] = node
        for node in self._by_code.values():
            for alias in node.aliases:
                if alias in self._by_label or alias in self._by_alias:
                    raise DuplicateLabel(f"alias {alias!r} collides with another label")
                self._by_alias[alias] = node

    def _label_for(self, node: ConceptNode) -> str:
        parts = [node.name]
        code = node.code
        while "." in code:
            code = code.rsplit(".", 1)[0]
            parent = self._by_code.get(code)
            if parent is None:
                raise OrphanCode(f"code {node.code!r} has no parent {code!r}")
            parts.append(parent.name)
        return "-".join(reversed(parts))

    def _walk_structural(self) -> Iterator[ConceptNode]:
        seen: set[int] = set()
        stack = list(reversed(self.roots))
        while stack:
            node = stack.pop()
            if id(node) in seen:
                raise CycleDetected(f"node {node.code!r} reachable via a cycle")
            seen.add(id(node))
            yield node
            stack.extend(reversed(node.children))

    def _validate(self) -> None:
        if not self.roots:
            raise OrphanCode("taxonomy has no roots")
        for node in self._by_code.values():
            if not CODE_RE.match(node.code):
                raise TaxonomyError(f"malformed code {node.code!r}")
            for child in node.children:
                if child.code.rsplit(".", 1)[0] != node.code or "." not in child.code:
                    raise OrphanCode(
                        f"child {child.code!r} does not extend parent {node.code!r}"
                    )

    # -- queries -----------------------------------------------------------

    def nodes(self) -> Iterator[ConceptNode]:
        yield from self._by_code.values()

    def get(self, code: str) -> ConceptNode:
        try:
            return self._by_code[code]
        except KeyError:
            raise NotFound(f"unknown concept code {code!r}") from None

    def resolve(self, query: str) -> ConceptNode:
        """Look up a node by code, canonical label, alias, or bare name.

        Match order: exact code, exact label, exact alias, then
        case-insensitive label/alias, then unique case-insensitive bare
        node name.  A case-insensitive query matching several nodes raises
        AmbiguousLabel.
        """
        if query in self._by_code:
            return self._by_code[query]
        if query in self._by_label:
            return self._by_label[query]
        if query in self._by_alias:
            return self._by_alias[query]
        folded = query.casefold()
        ci_hits = {
            node.code: node
            for label, node in list(self._by_label.items()) + list(self._by_alias.items())
            if label.casefold() == folded
        }
        if len(ci_hits) == 1:
            return next(iter(ci_hits.values()))
        if len(ci_hits) > 1:
            raise AmbiguousLabel(f"{query!r} matches {sorted(ci_hits)} case-insensitively")
        name_hits = {n.code: n for n in self._by_code.values() if n.name.casefold() == folded}
        if len(name_hits) == 1:
            return next(iter(name_hits.values()))
        if len(name_hits) > 1:
            raise AmbiguousLabel(f"name {query!r} matches codes {sorted(name_hits)}")
        raise NotFound(f"no concept matches {query!r}")

    def descendants(self, code: str) -> set[str]:
        """The given code plus all transitive child codes."""
        node = self.get(code)
        out: set[str] = set()
        stack = [node]
        while stack:
            cur = stack.pop()
            out.add(cur.code)
            stack.extend(cur.children)
        return out

    def annotatable_codes(self) -> list[str]:
        return sorted(n.code for n in self._by_code.values() if n.annotatable)

    def require_annotatable(self, query: str) -> ConceptNode:
        node = self.resolve(query)
        if not node.annotatable:
            raise NotFound(f"concept {query!r} resolves to non-annotatable node {node.code}")
        return node

    def to_tree(self) -> list[dict]:
        """JSON-friendly nested representation (used by the HTTP API)."""

        def render(node: ConceptNode) -> dict:
            return {
                "code": node.code,
                "name": node.name,
                "label": node.canonical_label,
                "annotatable": node.annotatable,
                "aliases": list(node.aliases),
                "children": [render(c) for c in node.children],
            }

        return [render(r) for r in self.roots]


def _parse_bool(raw: str, where: str) -> bool:
    val = raw.strip().lower()
    if val in ("true", "1", "yes"):
        return True
    if val in ("false", "0", "no", ""):
        return False
    raise TaxonomyError(f"bad annotatable flag {raw!r} at {where}")


def load_taxonomy(path: str | Path, version: str = "") -> Taxonomy:
    """Load a taxonomy from CSV with header ``code,name,annotatable,aliases``.

    Aliases are ``|``-separated.  Parent/child structure is derived from the
    dotted codes; a child whose parent code is missing raises OrphanCode.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fp:
        reader = csv.DictReader(fp)
        if reader.fieldnames is None:
            raise OrphanCode(f"{path} is empty")
        expected = ["code", "name", "annotatable", "aliases"]
        if [f.strip() for f in reader.fieldnames] != expected:
            raise TaxonomyError(f"{path} header must be {','.join(expected)}")
        rows = list(reader)
    if not rows:
        raise OrphanCode(f"{path} defines no concepts")

    nodes: dict[str, ConceptNode] = {}
    for i, row in enumerate(rows, start=2):
        code = (row["code"] or "").strip()
        name = (row["name"] or "").strip()
        if not CODE_RE.match(code):
            raise TaxonomyError(f"malformed code {code!r} at {path}:{i}")
        if not name:
            raise TaxonomyError(f"missing name at {path}:{i}")
        if code in nodes:
            raise DuplicateCode(f"code {code!r} defined twice ({path}:{i})")
        aliases = tuple(a.strip() for a in (row["aliases"] or "").split("|") if a.strip())
        nodes[code] = ConceptNode(
            code=code,
            name=name,
            annotatable=_parse_bool(row["annotatable"] or "", f"{path}:{i}"),
            aliases=aliases,
        )

    roots: list[ConceptNode] = []
    for code in nodes:
        if "." in code:
            parent_code = code.rsplit(".", 1)[0]
            parent = nodes.get(parent_code)
            if parent is None:
                raise OrphanCode(f"code {code!r} has no parent {parent_code!r} in {path}")
            parent.children.append(nodes[code])
        else:
            roots.append(nodes[code])

    def sort_key(node: ConceptNode) -> tuple[int, ...]:
        return tuple(int(p) for p in node.code.split("."))

    roots.sort(key=sort_key)
    for node in nodes.values():
        node.children.sort(key=sort_key)
    return Taxonomy(roots, version=version or path.stem)


def default_taxonomy_path() -> Path:
    return Path(str(resources.files("factorcode").joinpath("data/sirch_taxonomy.csv")))


def load_default_taxonomy() -> Taxonomy:
    """The bundled coding scheme for safety-investigation human factors."""
    return load_taxonomy(default_taxonomy_path(), version="sirch-1")


def resolve_many(taxonomy: Taxonomy, queries: Iterable[str]) -> list[ConceptNode]:
    return [taxonomy.resolve(q) for q in queries]
