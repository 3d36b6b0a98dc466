"""Regenerates synthetic_3d.csv. Synthetic data for structural demos only."""
import csv
import random

rng = random.Random(7)
rows = []
for i in range(30):
    h = rng.uniform(0.062, 0.125)
    a = rng.uniform(0.0, 30.0)
    v = rng.uniform(2300.0, 2700.0)
    g = 0.012 * (v - 2300.0) + 40.0 * (h - 0.062) + rng.uniform(-0.25, 0.25)
    rows.append((f"s{i:02d}", round(h, 5), round(a, 3), round(v, 1), round(g, 4)))
rows.append(("top_a", 0.062, 0.0, 3000.0, 8.0))
rows.append(("top_b", 0.062, 30.0, 3000.0, 8.0))

with open("synthetic_3d.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["label", "h", "alpha", "v", "g"])
    w.writerows(rows)
