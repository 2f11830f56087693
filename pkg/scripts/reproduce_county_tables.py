"""Recompute the Leon metric cells and the Duval count table from the fixtures.

Prints each table and flags any cell that differs from the published value.

    python scripts/reproduce_county_tables.py
"""
from pathlib import Path

from turnlane import fileio
from turnlane.evaluate import MatchCounts, fmt_pct, metrics
from turnlane.inventory import count_table, count_table_csv, read_records

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"
CELLS = ("Completeness", "Correctness", "Quality", "F1")


def leon():
    bad = 0
    print("model    class       GT    conf  M     TP    FP    FN    Compl   Corr    Qual    F1")
    for r in fileio.read_csv(DATA / "leon_metrics.csv"):
        c = MatchCounts(int(r["GT"]), int(r["M"]), int(r["TP"]), int(r["FP"]), int(r["FN"]))
        m = metrics(c)
        ours = [fmt_pct(v) for v in (m.completeness, m.correctness, m.quality, m.f1)]
        off = [k for k, v in zip(CELLS, ours) if abs(float(v) - float(r[k])) > 0.01]
        bad += len(off)
        print(f"{r['model']:<8} {r['class']:<11} {c.gt_total:<5} {r['Confidence']:<5} {c.model_total:<5} "
              f"{c.tp:<5} {c.fp:<5} {c.fn:<5} " + " ".join(f"{v:<7}" for v in ours)
              + ("  MISMATCH " + ",".join(off) if off else ""))
    return bad


def duval():
    ours = count_table_csv(count_table(read_records(DATA / "duval_inventory.csv"))).splitlines()
    want = ["class,Confidence,State,Local,Total"] + [
        ",".join(r[k] for k in ("class", "Confidence", "State", "Local", "Total"))
        for r in fileio.read_csv(DATA / "duval_counts.csv")]
    for line in ours:
        print(line)
    return sum(a != b for a, b in zip(ours, want)) + abs(len(ours) - len(want))


if __name__ == "__main__":
    n = leon()
    print()
    n += duval()
    print(f"\n{n} mismatched cells")
    raise SystemExit(1 if n else 0)
