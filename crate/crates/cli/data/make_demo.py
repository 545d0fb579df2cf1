"""Regenerates the bundled synthetic two-sample dataset (stdlib only, fixed seed)."""
import csv
import random
from pathlib import Path

M, N1, N2 = 200, 10, 10
UP = range(0, 15)        # group 2 higher
BLOCK = range(60, 70)    # moderate shift in one neighbourhood of chr1
DOWN = range(149, 159)   # group 2 lower

rng = random.Random(2024)
here = Path(__file__).parent
samples = [f"S{j + 1:02d}" for j in range(N1 + N2)]
genes = [f"G{i + 1:03d}" for i in range(M)]

with open(here / "demo_matrix.csv", "w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["gene"] + samples)
    for i, g in enumerate(genes):
        base = rng.uniform(4.0, 8.0)
        shift = 1.5 if i in UP else 1.2 if i in BLOCK else -1.5 if i in DOWN else 0.0
        row = [base + rng.gauss(0.0, 1.0) + (shift if j >= N1 else 0.0) for j in range(N1 + N2)]
        w.writerow([g] + [f"{x:.4f}" for x in row])

with open(here / "demo_labels.csv", "w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["sample_id", "group"])
    for j, s in enumerate(samples):
        w.writerow([s, 1 if j < N1 else 2])

with open(here / "demo_annotations.csv", "w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["id", "chrom", "position"])
    for i, g in enumerate(genes):
        chrom, pos = ("chr1", i + 1) if i < 120 else ("chr2", i - 119)
        w.writerow([g, chrom, pos * 1000])
