#!/usr/bin/env python3
"""Independent recheck of the unpaired comparison in a report directory.

Reads report.csv, recomputes the per-(loss, lipschitz, arch) unpaired
minima from scratch -- median best FID over seeds for each optimizer
setting, ok runs only, then the minimum over optimizer settings for each
conditioning -- and compares them with the numbers in report.json.

Shares no code with the library: plain csv/json/statistics only.
Exits 0 when everything agrees, 1 on any mismatch.
"""

import csv
import json
import statistics
import sys
from collections import defaultdict


def main(argv):
    if len(argv) != 2:
        print("usage: check_report.py <report_dir>")
        return 2
    report_dir = argv[1]

    with open(f"{report_dir}/report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    with open(f"{report_dir}/report.json") as fh:
        report = json.load(fh)

    # group -> side -> optimizer -> [best FIDs across seeds]
    fids = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    for row in rows:
        if row["status"] != "ok":
            continue
        group = (row["loss"], row["lipschitz"], row["arch"])
        side = "baseline" if row["conditioning"] == "none" else "selfmod"
        opt = (float(row["beta1"]), float(row["beta2"]), int(row["disc_iters"]))
        fids[group][side][opt].append(float(row["best_fid"]))

    failures = 0

    csv_groups = {(r["loss"], r["lipschitz"], r["arch"]) for r in rows}
    report_groups = {(u["loss"], u["lipschitz"], u["arch"]) for u in report["unpaired"]}
    if csv_groups != report_groups:
        print(f"group sets differ: csv {sorted(csv_groups)} vs report {sorted(report_groups)}")
        failures += 1

    for entry in report["unpaired"]:
        group = (entry["loss"], entry["lipschitz"], entry["arch"])
        for side in ("baseline", "selfmod"):
            reported = entry[f"{side}_fid"]
            per_opt = fids.get(group, {}).get(side, {})
            recomputed = min(
                (statistics.median(v) for v in per_opt.values()), default=None
            )
            if reported is None and recomputed is None:
                continue
            if reported is None or recomputed is None or abs(reported - recomputed) > 1e-9:
                print(f"mismatch {group} {side}: report {reported}, recomputed {recomputed}")
                failures += 1

    if failures:
        print(f"{failures} mismatch(es)")
        return 1
    print(f"unpaired minima verified for {len(report['unpaired'])} group(s)")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
