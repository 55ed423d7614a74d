"""Wordlist ingestion, validation and filtering.

Forms are assumed to be ASJP-transcribed already; every character of a form
is one sound class.
"""
from __future__ import annotations

import csv
import io
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, TextIO

from .errors import ConfigError, EmptyInputError

log = logging.getLogger(__name__)

ASJP_SYMBOLS = tuple("pbfvmw8tdszcnrlSZCjT5ykgxNqXh7L4G!ieE3auo")
GAP = "-"


class Alphabet:
    """Ordered sound-class alphabet with index lookup."""

    def __init__(self, symbols: Iterable[str] = ASJP_SYMBOLS, extra: Iterable[str] = ()):
        ordered = []
        for s in list(symbols) + list(extra):
            if len(s) != 1 or s.isspace() or s == GAP:
                raise ConfigError(f"invalid sound-class symbol {s!r}")
            if s not in ordered:
                ordered.append(s)
        self.symbols = tuple(ordered)
        self.index = {s: i for i, s in enumerate(self.symbols)}

    @classmethod
    def from_file(cls, path, extra: Iterable[str] = ()) -> "Alphabet":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln.strip() for ln in lines if ln.strip()], extra)

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, symbol):
        return symbol in self.index

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __hash__(self):
        return hash(self.symbols)

    def __repr__(self):
        return f"Alphabet({''.join(self.symbols)!r})"

    def invalid(self, form: str) -> list[str]:
        return [c for c in form if c not in self.index]

    def encode(self, form: str) -> list[int]:
        return [self.index[c] for c in form]


DEFAULT_ALPHABET = Alphabet()


@dataclass(frozen=True, order=True)
class WordForm:
    doculect: str
    concept: str
    segments: str
    cognate_set: str | None = field(default=None, compare=False)
    form_id: str = field(default="", compare=False)

    def __len__(self):
        return len(self.segments)


@dataclass(frozen=True)
class Wordlist:
    forms: tuple[WordForm, ...]
    alphabet: Alphabet = DEFAULT_ALPHABET

    @property
    def doculects(self) -> frozenset[str]:
        return frozenset(f.doculect for f in self.forms)

    @property
    def concepts(self) -> frozenset[str]:
        return frozenset(f.concept for f in self.forms)

    def __len__(self):
        return len(self.forms)

    def by_concept(self) -> dict[str, list[WordForm]]:
        out: dict[str, list[WordForm]] = defaultdict(list)
        for f in self.forms:
            out[f.concept].append(f)
        return dict(out)

    def by_doculect(self) -> dict[str, dict[str, list[WordForm]]]:
        """doculect -> concept -> forms"""
        out: dict[str, dict[str, list[WordForm]]] = defaultdict(lambda: defaultdict(list))
        for f in self.forms:
            out[f.doculect][f.concept].append(f)
        return {d: dict(c) for d, c in out.items()}

    def taxa(self) -> list[str]:
        return sorted(self.doculects)

    def subset(self, keep) -> "Wordlist":
        return Wordlist(tuple(f for f in self.forms if keep(f)), self.alphabet)


@dataclass
class ParseResult:
    wordlist: Wordlist
    rows_read: int
    diagnostics: list[tuple[int, str]]

    @property
    def rejected(self) -> int:
        return len(self.diagnostics)

    def write_diagnostics(self, stream: TextIO):
        for row, reason in self.diagnostics:
            stream.write(f"{row}\t{reason}\n")


DEFAULT_COLUMNS = {
    "doculect": "Language_ID",
    "concept": "Concept",
    "form": "Form",
    "cognate_set": "Cognateset_ID",
    "id": "ID",
}
REQUIRED_ROLES = ("doculect", "concept", "form")


def _sniff_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def parse_wordlist(
    source: TextIO | str,
    column_map: Mapping[str, str] | None = None,
    alphabet: Alphabet = DEFAULT_ALPHABET,
) -> ParseResult:
    """Read a delimited wordlist table.

    ``column_map`` maps roles (doculect, concept, form, and optionally
    cognate_set and id) to header names. Optional roles whose column is
    absent are ignored. Rows with symbols outside ``alphabet`` are rejected
    and recorded in the diagnostics, keyed by 1-based data-row number.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    column_map = dict(DEFAULT_COLUMNS if column_map is None else column_map)
    header_line = source.readline()
    if not header_line.strip():
        raise EmptyInputError("wordlist has no header row")
    delim = _sniff_delimiter(header_line)
    reader = csv.reader(io.StringIO(header_line), delimiter=delim)
    header = [h.strip() for h in next(reader)]

    cols: dict[str, int] = {}
    for role, name in column_map.items():
        if name in header:
            cols[role] = header.index(name)
        elif role in REQUIRED_ROLES:
            raise ConfigError(f"column {name!r} for role {role!r} not found in header {header}")

    diagnostics: list[tuple[int, str]] = []
    seen: set[WordForm] = set()
    forms: list[WordForm] = []
    rows_read = 0
    for rownum, row in enumerate(csv.reader(source, delimiter=delim), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        rows_read += 1
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        doculect = row[cols["doculect"]].strip()
        concept = row[cols["concept"]].strip()
        form = row[cols["form"]].strip()
        if not doculect or not concept:
            diagnostics.append((rownum, "empty doculect or concept"))
            continue
        if not form:
            diagnostics.append((rownum, "empty form"))
            continue
        bad = alphabet.invalid(form)
        if bad:
            shown = "".join(dict.fromkeys(bad))
            diagnostics.append((rownum, f"symbols not in alphabet: {shown!r}"))
            continue
        cog = row[cols["cognate_set"]].strip() if "cognate_set" in cols else ""
        fid = row[cols["id"]].strip() if "id" in cols else ""
        wf = WordForm(doculect, concept, form, cog or None, fid or str(rownum))
        if wf in seen:
            continue
        seen.add(wf)
        forms.append(wf)

    if not forms:
        raise EmptyInputError("no valid forms in wordlist")
    log.info("read %d rows, kept %d forms, rejected %d", rows_read, len(forms), len(diagnostics))
    return ParseResult(Wordlist(tuple(forms), alphabet), rows_read, diagnostics)


def read_wordlist(path, column_map=None, alphabet=DEFAULT_ALPHABET) -> ParseResult:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_wordlist(fh, column_map, alphabet)


def write_wordlist(wl: Wordlist, stream: TextIO, column_map: Mapping[str, str] | None = None):
    column_map = dict(DEFAULT_COLUMNS if column_map is None else column_map)
    roles = ["id", "doculect", "concept", "form", "cognate_set"]
    writer = csv.writer(stream, delimiter="\t", lineterminator="\n")
    writer.writerow([column_map[r] for r in roles])
    for f in wl.forms:
        writer.writerow([f.form_id, f.doculect, f.concept, f.segments, f.cognate_set or ""])


def concept_coverage(wl: Wordlist) -> Counter:
    return Counter(c for c, _ in {(f.concept, f.doculect) for f in wl.forms})


def select_top_concepts(wl: Wordlist, n: int) -> Wordlist:
    """Keep the ``n`` concepts attested in the most doculects.

    Ties are broken by concept label.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    cov = concept_coverage(wl)
    if n > len(cov):
        log.warning("requested %d concepts but only %d available; keeping all", n, len(cov))
    ranked = sorted(cov, key=lambda c: (-cov[c], c))[:n]
    keep = set(ranked)
    return wl.subset(lambda f: f.concept in keep)


def filter_doculects(wl: Wordlist, keep: Iterable[str]) -> Wordlist:
    keep = set(keep)
    out = wl.subset(lambda f: f.doculect in keep)
    if not out.forms:
        raise EmptyInputError("no doculects left after filtering")
    return out
