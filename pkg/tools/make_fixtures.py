#!/usr/bin/env python3
"""Regenerate the bundled ranked-site and IP-prefix fixtures.

The ranked list is engineered so the sibling-set sizes over it are
fixed, known numbers (google 212, youtube 7, facebook 11, baidu 8,
wikipedia 12, yahoo 11, reddit 3, qq 3, amazon 21, duckduckgo 1,
torproject 1) and so torproject.org sits at rank 10,244. Filler sites
use digits-only labels that cannot collide with any basename.
"""

import csv
import pathlib
import random

DATA = pathlib.Path(__file__).resolve().parent.parent / "src" / "privmeter" / "data"

TOP10 = [
    (1, "google.com"),
    (2, "youtube.com"),
    (3, "facebook.com"),
    (4, "baidu.com"),
    (5, "wikipedia.org"),
    (6, "yahoo.com"),
    (7, "google.co.in"),
    (8, "reddit.com"),
    (9, "qq.com"),
    (10, "amazon.com"),
]

CC_TLDS = ["ru", "de", "fr", "it", "nl", "es", "pl", "cn", "in", "jp", "uk",
           "au", "mx", "ua", "tr", "id", "ir", "vn", "th", "kr", "tw", "hk",
           "sg", "my", "ph", "za", "eg", "sa", "ae", "il", "us", "ca", "ar",
           "ch", "at", "be", "se", "no", "fi", "dk", "cz", "ro", "hu", "gr", "pt"]

SECOND_LEVEL = ["co.uk", "co.in", "com.br", "co.jp", "com.cn", "com.au",
                "com.mx", "com.ar", "com.tr", "com.ua", "co.il", "com.sa",
                "com.eg", "co.za", "com.sg", "com.my", "com.ph", "co.th",
                "com.vn", "co.kr", "com.tw", "com.hk"]


def google_extras():
    """210 further google sites (212 total with ranks 1 and 7)."""
    out = ["googleapis.com", "googleusercontent.com", "googlesyndication.com",
           "googleadservices.com", "googletagmanager.com", "googlevideo.com",
           "googleweblight.com", "google-analytics.com", "googlemail.com",
           "googlesource.com", "googleblog.com", "googledrive.com",
           "googlegroups.com", "googleplay.com"]
    out += [f"google.{t}" for t in CC_TLDS]                       # 44
    out += [f"google.{t}" for t in SECOND_LEVEL if t != "co.in"]  # 21
    i = 1
    while len(out) < 210:
        out.append(f"google{i}.com")
        i += 1
    return out[:210]


EXTRAS = {
    "google": google_extras(),
    "youtube": ["youtube.de", "youtube.co.uk", "youtube.fr", "youtubekids.com",
                "youtube-nocookie.com", "youtubegaming.com"],
    "facebook": ["facebook.de", "facebook.fr", "facebook.co.uk", "facebook.com.br",
                 "facebookmail.com", "facebook.net", "facebook.it", "facebook.es",
                 "facebook.pl", "facebookbrand.com"],
    "baidu": ["baidu.cn", "baidu.com.cn", "baidutranslate.com", "baidustatic.com",
              "baidupcs.com", "baiducontent.com", "baidu.jp"],
    "wikipedia": ["wikipedia.de", "wikipedia.fr", "wikipedia.it", "wikipedia.pl",
                  "wikipedia.nl", "wikipedia.es", "wikipedia.co.uk",
                  "wikipediastore.com", "wikipedia.jp", "wikipedia.ru", "wikipedia.in"],
    "yahoo": ["yahoo.co.jp", "yahoo.de", "yahoo.fr", "yahoo.it", "yahoo.es",
              "yahoo.co.uk", "yahoo.com.br", "yahoomail.com", "yahoosports.com",
              "yahoo.net"],
    "reddit": ["redditmedia.com", "redditstatic.com"],
    "qq": ["qq.cn", "qqmail.com"],
    "amazon": ["amazon.de", "amazon.co.uk", "amazon.fr", "amazon.it", "amazon.es",
               "amazon.cn", "amazon.co.jp", "amazon.com.br", "amazon.in",
               "amazon.com.au", "amazon.nl", "amazon.com.mx", "amazonaws.com",
               "amazonpay.com", "amazon-adsystem.com", "amazonvideo.com",
               "amazonmusic.com", "amazontrust.com", "amazoncognito.com", "amazon.ru"],
}

FILLER_TLDS = ["com", "net", "org", "ru", "de", "fr", "it", "nl", "es", "pl",
               "cn", "in", "jp", "co.uk", "com.br"]


def make_ranked(total=10300):
    fixed = dict(TOP10)
    fixed[342] = "duckduckgo.com"
    fixed[10244] = "torproject.org"

    extras = [host for lst in EXTRAS.values() for host in lst]
    rng = random.Random(20180512)
    free = [r for r in range(11, total + 1) if r not in fixed]
    slots = sorted(rng.sample(free, len(extras)))
    for rank, host in zip(slots, extras):
        fixed[rank] = host

    rows = []
    for rank in range(1, total + 1):
        host = fixed.get(rank)
        if host is None:
            host = f"site{rank}.{FILLER_TLDS[rank % len(FILLER_TLDS)]}"
        rows.append((rank, host))
    return rows


COUNTRIES = ["us", "de", "ru", "fr", "gb", "nl", "ua", "id", "in", "br", "ir",
             "it", "es", "pl", "cn", "jp", "ca", "se", "ch", "at", "ro", "cz",
             "tr", "mx", "ar", "au", "be", "dk", "fi", "no", "pt", "gr", "hu",
             "kr", "tw", "hk", "sg", "my", "th", "vn", "ph", "za", "eg", "sa",
             "ae", "il", "bg", "sk", "lt", "lv", "ee", "hr", "si", "rs", "by",
             "kz", "ge", "am", "md", "al"]


def make_prefixes():
    """Deterministic /8 prefix table: high byte -> (country, AS number)."""
    rows = []
    for hb in range(256):
        country = COUNTRIES[(hb * 7) % len(COUNTRIES)]
        asn = 64500 + (hb * 13) % 180
        rows.append((hb, country, asn))
    return rows


def main():
    ranked = make_ranked()
    with open(DATA / "ranked_sites.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["rank", "hostname"])
        w.writerows(ranked)
    print(f"wrote {len(ranked)} ranked sites")

    prefixes = make_prefixes()
    with open(DATA / "ip_prefixes.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["prefix", "country", "asn"])
        w.writerows(prefixes)
    print(f"wrote {len(prefixes)} IP prefixes")


if __name__ == "__main__":
    main()
