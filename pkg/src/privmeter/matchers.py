"""Hostname classification used by the exit-stream counters.

Four matcher families: exact/suffix domain sets, rank buckets over a
ranked site list, sibling sets built from a site basename, and TLD
wildcard rules. Registrable-domain (SLD) extraction follows the public
suffix list algorithm: exact, wildcard and exception rules, exception
rules overriding wildcards, and an optional implicit "*" fallback.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources


def normalize_hostname(raw: str) -> str:
    """Lowercase, strip one trailing dot, reject malformed names.

    Internationalized names pass through byte-for-byte: distinct
    encodings stay distinct, matching how the counters treat them.
    """
    if not isinstance(raw, str):
        raise ValueError(f"hostname must be a string, got {type(raw).__name__}")
    h = raw
    if h.endswith("."):
        h = h[:-1]
    if not h:
        raise ValueError("empty hostname")
    if any(c.isspace() for c in h):
        raise ValueError(f"hostname contains whitespace: {raw!r}")
    h = h.lower()
    labels = h.split(".")
    if any(not lab for lab in labels):
        raise ValueError(f"hostname has an empty label: {raw!r}")
    if any(len(lab) > 63 for lab in labels):
        raise ValueError(f"hostname label longer than 63 chars: {raw!r}")
    return h


@dataclass(frozen=True)
class DomainSet:
    """A named set of hostnames matched exactly or by suffix."""

    set_id: str
    mode: str  # "exact" | "suffix"
    members: tuple

    def __post_init__(self):
        if self.mode not in ("exact", "suffix"):
            raise ValueError(f"unknown match mode {self.mode!r}")
        norm = tuple(normalize_hostname(m) for m in self.members)
        if len(set(norm)) != len(norm):
            raise ValueError(f"duplicate members in set {self.set_id!r}")
        object.__setattr__(self, "members", norm)

    def matches(self, hostname: str) -> bool:
        h = normalize_hostname(hostname)
        if self.mode == "exact":
            return h in self.members
        return any(h == m or h.endswith("." + m) for m in self.members)

    def __len__(self):
        return len(self.members)


class SuffixList:
    """Parsed public-suffix rules: exact, wildcard (*.x) and exception (!x)."""

    def __init__(self, rules, include_default: bool = True):
        self.exact = set()
        self.wildcard = set()  # tails: the labels after "*."
        self.exception = set()
        self.include_default = include_default
        for rule in rules:
            rule = rule.strip().lower()
            if not rule or rule.startswith("//"):
                continue
            if rule.startswith("!"):
                self.exception.add(tuple(rule[1:].split(".")))
            elif rule.startswith("*."):
                self.wildcard.add(tuple(rule[2:].split(".")))
            else:
                self.exact.add(tuple(rule.split(".")))

    @classmethod
    def from_text(cls, text: str, include_default: bool = True) -> "SuffixList":
        return cls(text.splitlines(), include_default=include_default)

    @classmethod
    def load(cls, path, include_default: bool = True) -> "SuffixList":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read(), include_default=include_default)

    def suffix_length(self, labels: tuple) -> int:
        """Label count of the public suffix of `labels`, 0 if no rule applies.

        The prevailing rule is the matching exception rule if any
        (minus its leftmost label), else the longest match, else the
        implicit "*" when enabled.
        """
        n = len(labels)
        best = 0
        for i in range(n):
            suffix = tuple(labels[i:])
            if suffix in self.exception:
                return len(suffix) - 1
        for i in range(n):
            suffix = tuple(labels[i:])
            if suffix in self.exact:
                best = max(best, n - i)
            # *.x matches one extra label in front of x
            if len(suffix) >= 2 and suffix[1:] in self.wildcard:
                best = max(best, n - i)
        if best == 0 and self.include_default:
            best = 1
        return best


def sld_of(hostname: str, suffixes: SuffixList) -> str:
    """Registrable domain: public suffix plus one label.

    Raises if the name is itself a public suffix (there is nothing
    registrable about "co.uk") or if no rule applies and the implicit
    default is disabled.
    """
    h = normalize_hostname(hostname)
    labels = tuple(h.split("."))
    k = suffixes.suffix_length(labels)
    if k == 0:
        raise ValueError(f"no public-suffix rule matches {hostname!r}")
    if k >= len(labels):
        raise ValueError(f"{hostname!r} is a bare public suffix")
    return ".".join(labels[len(labels) - k - 1:])


def registrable_or_none(hostname: str, suffixes: SuffixList):
    """sld_of that reports malformed or bare-suffix input as None."""
    try:
        return sld_of(hostname, suffixes)
    except ValueError:
        return None


def basename_of(hostname: str, suffixes: SuffixList) -> str:
    """Leftmost label of the registrable domain ("google" for google.co.in)."""
    return sld_of(hostname, suffixes).split(".")[0]


class RankedList:
    """A rank -> hostname list loaded from "rank,hostname" CSV."""

    def __init__(self, entries):
        self.entries = sorted(entries)
        self.rank_of = {}
        for rank, host in self.entries:
            if host in self.rank_of:
                raise ValueError(f"duplicate ranked entry {host!r}")
            self.rank_of[host] = rank

    @classmethod
    def from_csv_text(cls, text: str) -> "RankedList":
        entries = []
        for row in csv.reader(io.StringIO(text)):
            if not row:
                continue
            if not row[0].strip().isdigit():  # header line
                continue
            entries.append((int(row[0]), normalize_hostname(row[1].strip())))
        return cls(entries)

    @classmethod
    def load(cls, path) -> "RankedList":
        with open(path, encoding="utf-8") as f:
            return cls.from_csv_text(f.read())

    def __len__(self):
        return len(self.entries)


class RankBuckets:
    """Nested rank prefixes: bucket i holds the first 10^(i+1) sites minus
    earlier buckets, plus dedicated basename sets that win over rank."""

    def __init__(self, ranked: RankedList, suffixes: SuffixList,
                 dedicated_basenames=("torproject",), n_buckets: int = 6):
        self.ranked = ranked
        self.suffixes = suffixes
        self.dedicated = tuple(dedicated_basenames)
        self.n_buckets = n_buckets

    def _listed_rank(self, hostname: str):
        h = normalize_hostname(hostname)
        if h in self.ranked.rank_of:
            return self.ranked.rank_of[h]
        sld = registrable_or_none(h, self.suffixes)
        if sld is not None and sld in self.ranked.rank_of:
            return self.ranked.rank_of[sld]
        return None

    def bucket_of(self, hostname: str):
        """Bucket id (int), a dedicated basename (str), or None if unlisted."""
        rank = self._listed_rank(hostname)
        if rank is None:
            return None
        sld = registrable_or_none(normalize_hostname(hostname), self.suffixes)
        if sld is not None:
            base = sld.split(".")[0]
            for name in self.dedicated:
                if name in base:
                    return name
        for i in range(self.n_buckets):
            if rank <= 10 ** (i + 1):
                return i
        return None


def rank_bucket(hostname: str, buckets: RankBuckets):
    return buckets.bucket_of(hostname)


def sibling_set(basename: str, ranked: RankedList, suffixes: SuffixList) -> DomainSet:
    """All listed sites whose registrable basename contains `basename`.

    Substring match on the leftmost label of the registrable domain,
    so "google" collects google.co.in and googleusercontent.com alike.
    This choice affects set sizes and is pinned by the fixture tests.
    """
    if not basename:
        raise ValueError("basename must be non-empty")
    basename = basename.lower()
    members = []
    for _rank, host in ranked.entries:
        sld = registrable_or_none(host, suffixes)
        if sld is None:
            continue
        if basename in sld.split(".")[0]:
            members.append(host)
    return DomainSet(set_id=basename, mode="exact", members=tuple(members))


class TldRules:
    """Wildcard TLD rules, one "*.suffix" per line; longest suffix wins."""

    def __init__(self, rules):
        self.tails = []
        for rule in rules:
            rule = rule.strip().lower()
            if not rule or rule.startswith("//"):
                continue
            if not rule.startswith("*."):
                raise ValueError(f"TLD rule must look like *.tld, got {rule!r}")
            self.tails.append(tuple(rule[2:].split(".")))
        # longest first so the first hit is the best hit
        self.tails.sort(key=len, reverse=True)

    @classmethod
    def from_text(cls, text: str) -> "TldRules":
        return cls(text.splitlines())

    @classmethod
    def load(cls, path) -> "TldRules":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read())


def tld_match(hostname: str, rules: TldRules) -> str:
    """Id of the longest matching *.tld rule, or "other"."""
    labels = tuple(normalize_hostname(hostname).split("."))
    for tail in rules.tails:
        if len(labels) > len(tail) and labels[len(labels) - len(tail):] == tail:
            return ".".join(tail)
    return "other"


# ---------------------------------------------------------------------------
# Bundled fixtures


def _data_text(name: str) -> str:
    return resources.files("privmeter").joinpath("data", name).read_text(encoding="utf-8")


def bundled_suffix_list() -> SuffixList:
    return SuffixList.from_text(_data_text("public_suffix.dat"))


def bundled_ranked_list() -> RankedList:
    return RankedList.from_csv_text(_data_text("ranked_sites.csv"))


def bundled_tld_rules() -> TldRules:
    return TldRules.from_text(_data_text("tld_rules.txt"))
