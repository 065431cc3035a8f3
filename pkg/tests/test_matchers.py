import pytest

from privmeter.matchers import (
    RankBuckets, SuffixList, basename_of, bundled_ranked_list,
    bundled_suffix_list, bundled_tld_rules, registrable_or_none, sibling_set,
    sld_of, tld_match,
)


@pytest.fixture(scope="module")
def suffixes():
    return bundled_suffix_list()


@pytest.fixture(scope="module")
def ranked():
    return bundled_ranked_list()


def test_exact_rule(suffixes):
    assert sld_of("www.example.com", suffixes) == "example.com"
    assert sld_of("a.b.example.co.uk", suffixes) == "example.co.uk"


def test_case_and_trailing_dot(suffixes):
    assert sld_of("WWW.Example.COM.", suffixes) == "example.com"


def test_bare_suffix_raises(suffixes):
    for name in ("com", "co.uk"):
        with pytest.raises(ValueError):
            sld_of(name, suffixes)
        assert registrable_or_none(name, suffixes) is None


def test_wildcard_and_exception_rules():
    rules = SuffixList(["*.ck", "!www.ck"], include_default=False)
    # any single label under .ck is a suffix, so one more label registers
    assert sld_of("shop.site.ck", rules) == "shop.site.ck"
    with pytest.raises(ValueError):
        sld_of("site.ck", rules)
    # the exception re-registers www.ck itself
    assert sld_of("www.ck", rules) == "www.ck"


def test_unknown_tld_falls_back_to_last_label():
    rules = SuffixList([], include_default=False)
    with pytest.raises(ValueError):
        sld_of("example.zz", rules)


def test_basename(suffixes):
    assert basename_of("maps.google.co.in", suffixes) == "google"
    assert basename_of("cdn.reddit.com", suffixes) == "reddit"


def test_sibling_sets_fixture_counts(ranked, suffixes):
    assert len(sibling_set("google", ranked, suffixes)) == 212
    assert len(sibling_set("qq", ranked, suffixes)) == 3
    assert len(sibling_set("reddit", ranked, suffixes)) == 3


def test_sibling_set_substring_semantics(ranked, suffixes):
    google = sibling_set("google", ranked, suffixes)
    # substring match on the registrable basename, so googleusercontent
    # style names belong while unrelated hosts do not
    assert all("google" in sld_of(m, suffixes).split(".")[0]
               for m in google.members)
    # exact-mode set: listed hostnames only, not their subdomains
    assert google.matches("google.com")
    assert not google.matches("www.google.com")
    assert not google.matches("example.com")
    with pytest.raises(ValueError):
        sibling_set("", ranked, suffixes)


def test_rank_buckets_nesting(ranked, suffixes):
    buckets = RankBuckets(ranked, suffixes)
    top = ranked.entries[0][1]
    assert buckets.bucket_of(top) == 0
    assert buckets.bucket_of("www." + top) == 0  # subdomain maps via its SLD
    assert buckets.bucket_of("never-listed-host.example") is None
    # a dedicated basename beats its rank bucket
    listed = [h for _, h in ranked.entries if "torproject" in h]
    if listed:
        assert buckets.bucket_of(listed[0]) == "torproject"


def test_tld_rules_longest_match():
    rules = bundled_tld_rules()
    assert tld_match("example.com", rules) == "com"
    assert tld_match("example.de", rules) == "de"
    assert tld_match("example.invalid-zone", rules) == "other"
    # bare suffix itself does not match its own rule
    assert tld_match("com", rules) == "other"


def test_psl_reference_vectors(suffixes):
    import importlib.resources as resources
    text = resources.files("privmeter").joinpath("data/psl_check.txt").read_text()
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        inp, want = line.split("\t")
        got = registrable_or_none(inp, suffixes)
        assert got == (None if want == "-" else want), inp
