"""Standalone recomputation of the score matrix from dataset documents.

Shares no code with the package: it reads the raw JSON records and the
bundled catalog files, applies the rubric written out longhand, and runs
its own copy of the two aggregation strategies. Used to validate the
committed golden matrix and pipeline output.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "authdns_resilience" / "data"

ENTERPRISE_SCORE = {"state-owned": 5, "local-private": 4, "foreign-large": 3, "foreign-sme": 2, "unregistered": 1}
GOOD_ALGORITHMS = {8, 13, 14, 15, 16}

# attribute -> strategy per transition, leaf level first
ROUTES = {
    "PP1": ["worst", "-", "-"], "PP2": ["worst", "-", "-"],
    "PA1": ["best", "best", "-"], "PA2": ["best", "best", "-"],
    "CP1": ["best", "-", "-"], "CP2": ["worst", "-", "-"],
    "CP3": ["-", "-"], "CP4": ["-", "-"], "CP5": ["-", "-"],
    "CA1": ["best", "best", "-"],
    "CA2": ["best", "-"], "CA3": ["best", "-"], "CA4": ["best", "-"],
    "CA5": ["-"], "CA6": ["-"], "CA7": ["-"],
    "DP1": ["worst", "-", "-"], "DA1": ["worst", "worst", "-"],
}  # fmt: skip
ORDER = list(ROUTES)


def best(xs):
    if len(xs) == 1:
        return xs[0]
    top = max(xs)
    c = Counter(round(x, 12) for x in xs)
    return max(1.0, top - sum((k / len(xs)) ** v for v, k in c.items() if v < top - 1e-9))


def worst(xs):
    if len(xs) == 1:
        return xs[0]
    low = min(xs)
    c = Counter(round(x, 12) for x in xs)
    return min(5.0, low + sum((k / len(xs)) ** (6 - v) for v, k in c.items() if v > low + 1e-9))


def count_score(n):
    if n is None or n <= 1:
        return 1
    return 5 if n >= 5 else 4


def _v(inst, name):
    return inst[name]["value"]


def _gap(inst, name):
    return "gap" in inst[name]


class Oracle:
    def __init__(self, catalog_path=DATA / "catalog_au.json", managed_path=DATA / "managed_dns.json"):
        cat = json.loads(Path(catalog_path).read_text())
        self.country = cat["country_context"]
        self.entries = sorted(cat["entries"], key=lambda e: e.get("priority", 100))
        self.default = cat.get("default", "local-private")
        self.managed = [p["pattern"].lower() for p in json.loads(Path(managed_path).read_text())["providers"]]

    def org_type(self, org):
        if not org:
            return "unregistered"
        for e in self.entries:
            if e["pattern"].lower() in org.lower():
                return e["type"]
        return self.default

    def inside(self, doc, inst):
        if _v(inst, "anycast") and _v(inst, "responsive") and (doc.get("vantage_country") or self.country) == self.country:
            return True
        return _v(inst, "geolocation_country") == self.country

    def leaves(self, doc):
        """attribute -> {server name: [instance scores]} or a flat list for
        per-server / per-function attributes."""
        prim = doc["primary"]
        servers = doc["authoritative"]["name_servers"]
        auth_ips = {_v(i, "ip") for s in servers for i in s["instances"]}
        pi = prim["instances"]

        def distinct(insts, name):
            vals = [_v(i, name) for i in insts]
            return None if any(v is None for v in vals) else len(set(vals))

        L = {}
        L["PP1"] = {prim["fqdn"]: [ENTERPRISE_SCORE[self.org_type(_v(i, "host_org_name"))] for i in pi]}
        L["PP2"] = {prim["fqdn"]: [5 if self.inside(doc, i) else 1 for i in pi]}
        L["CP1"] = {prim["fqdn"]: [5 if _v(i, "anycast") else 1 for i in pi]}
        L["CP2"] = {prim["fqdn"]: [1 if _v(i, "ip") in auth_ips else 5 for i in pi]}
        L["CP3"] = [count_score(len({_v(i, "ip") for i in pi}))]
        L["CP4"] = [count_score(distinct(pi, "admin_subnet"))]
        L["CP5"] = [count_score(distinct(pi, "admin_asn"))]

        def dp1(i):
            status = _v(i, "axfr_status")
            if status in ("open", "not-probed"):
                return 1
            org = (_v(i, "host_org_name") or "").lower()
            return 5 if org and any(m in org for m in self.managed) else 3

        L["DP1"] = {prim["fqdn"]: [dp1(i) for i in pi]}

        def da1(i):
            if _gap(i, "dnssec_records"):
                return 1
            algs = {r["algorithm_number"] for r in _v(i, "dnssec_records")}
            if not algs:
                return 1
            return 5 if algs <= GOOD_ALGORITHMS else 3

        L["PA1"] = {s["fqdn"]: [ENTERPRISE_SCORE[self.org_type(_v(i, "host_org_name"))] for i in s["instances"]] for s in servers}
        L["PA2"] = {s["fqdn"]: [5 if self.inside(doc, i) else 1 for i in s["instances"]] for s in servers}
        L["CA1"] = {s["fqdn"]: [5 if _v(i, "anycast") else 1 for i in s["instances"]] for s in servers}
        L["CA2"] = [count_score(len({_v(i, "ip") for i in s["instances"]})) for s in servers]
        L["CA3"] = [count_score(distinct(s["instances"], "admin_subnet")) for s in servers]
        L["CA4"] = [count_score(distinct(s["instances"], "admin_asn")) for s in servers]
        every = [i for s in servers for i in s["instances"]]
        L["CA5"] = [count_score(len(servers))]
        L["CA6"] = [count_score(distinct(every, "admin_subnet"))]
        L["CA7"] = [count_score(distinct(every, "admin_asn"))]
        L["DA1"] = {s["fqdn"]: [da1(i) for i in s["instances"]] for s in servers}
        return L

    def row(self, doc):
        L = self.leaves(doc)
        fn = {"best": best, "worst": worst, "-": lambda xs: xs[0] if len(xs) == 1 else None}
        v = {}
        for attr, route in ROUTES.items():
            data = L[attr]
            steps = list(route)
            if isinstance(data, dict):  # instance level: first step per server
                first = fn[steps.pop(0)]
                data = [first([float(x) for x in xs]) if len(xs) > 1 else float(xs[0]) for xs in data.values()]
            data = [float(x) for x in data]
            for s in steps:
                if len(data) > 1:
                    data = [fn[s](data)]
            assert len(data) == 1 and data[0] is not None, attr
            v[attr] = data[0]
        mean = lambda xs: sum(xs) / len(xs)  # noqa: E731
        cp = [v[f"CP{i}"] for i in range(1, 6)]
        ca = [v[f"CA{i}"] for i in range(1, 8)]
        f_p = mean([v["PP1"], v["PP2"], v["PA1"], v["PA2"]])
        f_c = mean(cp + ca)
        f_d = mean([v["DP1"], v["DA1"]])
        summary = [mean([v["PP1"], v["PP2"]]), mean([v["PA1"], v["PA2"]]), mean(cp), mean(ca), f_p, f_c, f_d,
                   mean([f_p, f_c, f_d])]
        return [v[a] for a in ORDER] + summary


def recompute(dataset_dir):
    """{domain: 26 floats} for every record document in a dataset directory."""
    o = Oracle()
    out = {}
    for f in sorted(Path(dataset_dir).glob("*.json")):
        if f.name == "index.json":
            continue
        doc = json.loads(f.read_text())
        out[doc["domain_name"]] = o.row(doc)
    return out
