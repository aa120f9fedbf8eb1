"""Writes the synthetic banking logs and the metric values they should
produce.

Each session is simulated here as plain Python data; the CSV files are
rendered from that data and the expected metrics are computed from the
same data, without reading the CSV back. Run from this directory:

    python3 make_fixture.py
"""

import itertools
import json
import os
import random
import statistics
from datetime import datetime, timedelta

from scipy.stats import kruskal

HEADER = "timestamp, mode, operation, classes-real, class-reco, attrib-real, attrib-reco, assoc-real,assoc-reco"
CLASSES = ["Bank", "Client", "Customer", "Account", "BankAccount", "Transaction", "Payment",
           "Card", "Branch", "Loan", "Employee", "Address"]
ATTRS = [("name", "String"), ("id", "int"), ("number", "int"), ("balance", "float"),
         ("amount", "float"), ("date", "Date"), ("email", "String")]
KINDS = ["ass", "agg", "comp", "inh"]
BAGS = [["Client", "Customer"], ["Account", "BankAccount"], ["Payment", "Transaction"], ["number", "id"]]
MODES = ["none", "request", "auto"]
LIMIT = 600.0


class Session:
    def __init__(self, mode, seed):
        self.rng = random.Random(seed)
        self.mode = mode
        self.classes = {}  # name -> list of (attr, type); dicts keep insertion order
        self.edges = []  # (source, target, kind)
        self.class_reco = []
        self.attrib_reco = {}
        self.assoc_reco = []
        self.rows = []
        self.accepted = []
        self.accept_rows = 0
        self.suggested = set()
        self.t = datetime(2024, 4, 2, 10, 0, 0) + timedelta(minutes=seed)

    # element identities, mirroring what a log row exposes
    @staticmethod
    def edge_id(s, t, k):
        a, b = sorted([s, t])
        return ("E", a, b, k)

    def real(self):
        out = {("C", c) for c in self.classes}
        out |= {("A", c, a) for c, attrs in self.classes.items() for a, _ in attrs}
        out |= {self.edge_id(*e) for e in self.edges}
        return out

    def reco(self):
        out = {("C", c) for c in self.class_reco}
        out |= {("A", c, a) for c, attrs in self.attrib_reco.items() for a, _ in attrs}
        out |= {self.edge_id(*e) for e in self.assoc_reco}
        return out

    def row(self, op):
        self.t += timedelta(milliseconds=self.rng.randint(5_000, 75_000))
        self.suggested |= self.reco()
        self.rows.append((self.t, self.mode, op, self.snapshot()))

    def snapshot(self):
        return (list(self.classes), list(self.class_reco),
                [(c, list(a)) for c, a in self.classes.items()],
                [(c, list(a)) for c, a in self.attrib_reco.items() if a or c in self.class_reco],
                list(self.edges), list(self.assoc_reco))

    def linked(self, a, b):
        return any({s, t} == {a, b} for s, t, _ in self.edges + self.assoc_reco)

    def suggest(self):
        free = [c for c in CLASSES if c not in self.classes]
        self.class_reco = self.rng.sample(free, min(len(free), self.rng.randint(2, 4)))
        self.attrib_reco = {}
        for c in self.rng.sample(list(self.classes), min(2, len(self.classes))):
            have = {a for a, _ in self.classes[c]}
            options = [x for x in ATTRS if x[0] not in have]
            self.attrib_reco[c] = self.rng.sample(options, min(2, len(options)))
        for c in self.class_reco:
            self.attrib_reco.setdefault(c, [])
        self.assoc_reco = []
        names = list(self.classes)
        for _ in range(2):
            if len(names) < 2:
                break
            a, b = self.rng.sample(names, 2)
            if not self.linked(a, b):
                self.assoc_reco.append((a, b, self.rng.choice(KINDS)))
        self.row("suggestions" if self.mode == "auto" else "request-suggestions")

    def accept(self):
        choices = [("class", c) for c in self.class_reco]
        choices += [("attribute", (c, a)) for c, attrs in self.attrib_reco.items()
                    if c in self.classes for a in attrs]
        choices += [("association", e) for e in self.assoc_reco]
        if not choices:
            return
        kind, item = self.rng.choice(choices)
        if kind == "class":
            self.class_reco.remove(item)
            self.classes[item] = []
            self.accepted.append(("C", item))
        elif kind == "attribute":
            c, a = item
            self.attrib_reco[c].remove(a)
            self.classes[c].append(a)
            self.accepted.append(("A", c, a[0]))
        else:
            self.assoc_reco.remove(item)
            self.edges.append(item)
            self.accepted.append(self.edge_id(*item))
        self.accept_rows += 1
        self.row("accept-" + kind)

    def create(self):
        what = self.rng.random()
        free = [c for c in CLASSES if c not in self.classes and c not in self.class_reco]
        if what < 0.45 and free or not self.classes:
            self.classes[self.rng.choice(free)] = []
            self.row("create-class")
        elif what < 0.8:
            c = self.rng.choice(list(self.classes))
            have = {a for a, _ in self.classes[c]}
            options = [x for x in ATTRS if x[0] not in have]
            if options:
                self.classes[c].append(self.rng.choice(options))
                self.row("create-attribute")
        elif len(self.classes) >= 2:
            a, b = self.rng.sample(list(self.classes), 2)
            if not self.linked(a, b):
                self.edges.append((a, b, self.rng.choice(KINDS)))
                self.row("create-association")

    def delete(self):
        if len(self.classes) < 3:
            return
        c = self.rng.choice(list(self.classes))
        del self.classes[c]
        self.edges = [e for e in self.edges if c not in e[:2]]
        self.assoc_reco = [e for e in self.assoc_reco if c not in e[:2]]
        self.attrib_reco.pop(c, None)
        self.row("delete-class")

    def run(self, target_seconds):
        self.row("task-start")
        start = self.t
        for _ in range(self.rng.randint(10, 16)):
            r = self.rng.random()
            if self.mode != "none" and r < 0.25:
                self.suggest()
            elif self.mode != "none" and r < 0.6:
                self.accept()
            elif r < 0.93:
                self.create()
            else:
                self.delete()
        end = start + timedelta(seconds=target_seconds, milliseconds=self.rng.randint(0, 999))
        self.t = max(self.t, end) - timedelta(milliseconds=1)
        self.t += timedelta(milliseconds=1)
        self.suggested |= self.reco()
        self.rows.append((self.t, self.mode, "task-end", self.snapshot()))
        return (self.t - start).total_seconds()


def quote(cell):
    if "," in cell or '"' in cell:
        return '"' + cell.replace('"', '""') + '"'
    return cell


def attrs_cell(groups):
    return ", ".join(f"{c}:[{', '.join(f'{a}: {t}' for a, t in attrs)}]" for c, attrs in groups)


def edges_cell(edges):
    return ", ".join(f"[{s}-{t}]=>{k}" for s, t, k in edges)


def render(rows):
    lines = [HEADER]
    for t, mode, op, (cr, cc, ar, ac, er, ec) in rows:
        cells = [t.strftime("%Y-%m-%d %H:%M:%S.") + f"{t.microsecond // 1000:03d}", mode, op,
                 ", ".join(cr), ", ".join(cc), attrs_cell(ar), attrs_cell(ac), edges_cell(er), edges_cell(ec)]
        lines.append(", ".join(quote(c) for c in cells))
    return "\n".join(lines) + "\n"


def element_set(classes):
    return {c for c in classes} | {f"{c}.{a}" for c, attrs in classes.items() for a, _ in attrs}


def bag_of(element):
    lookup = {n.lower(): i for i, bag in enumerate(BAGS) for n in bag}

    def part(p):
        return f"#{lookup[p.lower()]}" if p.lower() in lookup else p.lower()
    return ".".join(part(p) for p in element.split("."))


def overlap(a, b):
    return len(a & b) / min(len(a), len(b))


def spread(values):
    if not values:
        return None
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return {"mean": statistics.fmean(values), "std": std, "n": len(values)}


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    out_dir = os.path.join(here, "banking")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "bags.txt"), "w") as f:
        f.write("# synonym bags for the banking task\n")
        for bag in BAGS:
            f.write(", ".join(bag) + "\n")

    targets = {"none": [545, 610, 652, 590], "request": [480, 515, 602, 530], "auto": [455, 505, 498, 640]}
    logs = []
    for m_index, mode in enumerate(MODES):
        for i in range(4):
            s = Session(mode, 10 * m_index + i + 1)
            duration = s.run(targets[mode][i])
            name = f"{mode}-{i + 1}.csv"
            with open(os.path.join(out_dir, name), "w") as f:
                f.write(render(s.rows))
            final = s.real()
            surviving = [e for e in s.accepted if e in final]
            logs.append({
                "file": name,
                "mode": mode,
                "durationSecs": duration,
                "acceptance": {"numerator": s.accept_rows, "denominator": len(s.suggested)},
                "contribution": {"numerator": len(surviving), "denominator": len(final)},
                "elements": element_set(s.classes),
            })

    groups = {}
    for mode in MODES:
        members = [l for l in logs if l["mode"] == mode]
        times = [l["durationSecs"] for l in members]
        acc = [l["acceptance"]["numerator"] / l["acceptance"]["denominator"]
               for l in members if l["acceptance"]["denominator"]]
        con = [l["contribution"]["numerator"] / l["contribution"]["denominator"]
               for l in members if l["contribution"]["denominator"]]
        sets = [l["elements"] for l in members]
        pairs = list(itertools.combinations(range(len(sets)), 2))
        exact = [overlap(sets[i], sets[j]) for i, j in pairs]
        bagged = [overlap({bag_of(e) for e in sets[i]}, {bag_of(e) for e in sets[j]}) for i, j in pairs]
        groups[mode] = {
            "time": {"mean": statistics.fmean(times), "std": statistics.stdev(times),
                     "completionRatio": sum(t <= LIMIT for t in times) / len(times)},
            "acceptance": spread(acc),
            "contribution": spread(con),
            "overlapExact": spread(exact),
            "overlapBagged": spread(bagged),
            "samples": {"time": times, "acceptance": acc, "contribution": con},
        }

    tests = []
    for a, b in itertools.combinations(MODES, 2):
        entry = {"first": a, "second": b}
        if "end" not in (a, b):
            entry["time"] = kruskal(groups[a]["samples"]["time"], groups[b]["samples"]["time"]).pvalue
        if "none" not in (a, b):
            entry["acceptance"] = kruskal(groups[a]["samples"]["acceptance"], groups[b]["samples"]["acceptance"]).pvalue
            entry["contribution"] = kruskal(groups[a]["samples"]["contribution"], groups[b]["samples"]["contribution"]).pvalue
        tests.append(entry)

    for l in logs:
        l["elements"] = sorted(l["elements"])
    for g in groups.values():
        del g["samples"]
    expected = {"limitSecs": LIMIT, "logs": logs, "groups": groups, "pairwise": tests}
    with open(os.path.join(here, "expected.json"), "w") as f:
        json.dump(expected, f, indent=2, default=float)
        f.write("\n")


if __name__ == "__main__":
    main()
