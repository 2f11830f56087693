"""Expand the Duval State/Local count table into a per-record attribute file.

Each (class, road system) column of cumulative counts is turned into
records whose confidences fall in the matching band between floors, so
counting records at or above each floor gives the table back.

    python scripts/make_duval_fixture.py [table.csv] [out.csv]
"""
import argparse
import random
from collections import defaultdict
from pathlib import Path

from turnlane import fileio, inventory
from turnlane.aggregate import DetectionPoint, Source
from turnlane.geo import RoadSystem, WorldPoint
from turnlane.labels import LaneLabel

HERE = Path(__file__).resolve().parent
DATA = HERE.parent / "tests" / "data"


def expand(table_rows, seed=0):
    rng = random.Random(seed)
    cum = defaultdict(dict)
    for row in table_rows:
        floor = int(row["Confidence"]) / 100
        cum[row["class"]][floor] = {RoadSystem.STATE: int(row["State"]), RoadSystem.LOCAL: int(row["Local"])}
    records = []
    for cls, by_floor in cum.items():
        floors = sorted(by_floor, reverse=True)
        uppers = [1.0] + floors[:-1]
        for system in RoadSystem:
            prev = 0
            for lo, hi in zip(floors, uppers):
                n = by_floor[lo][system] - prev
                prev = by_floor[lo][system]
                for _ in range(n):
                    # rounding must not push a value up onto the next floor
                    conf = max(lo, round(rng.uniform(lo, hi), 4))
                    if hi < 1.0 and conf >= hi:
                        conf = round(hi - 1e-4, 4)
                    p = DetectionPoint(LaneLabel.parse(cls), WorldPoint(0.0, 0.0), conf, Source("duval", 0, 0))
                    records.append(inventory.InventoryRecord(p, system))
    return records


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("table", nargs="?", default=DATA / "duval_counts.csv")
    ap.add_argument("out", nargs="?", default=DATA / "duval_inventory.csv")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    records = expand(fileio.read_csv(args.table), args.seed)
    inventory.write_records(Path(args.out), records)
    print(f"wrote {len(records)} records to {args.out}")


if __name__ == "__main__":
    main()
