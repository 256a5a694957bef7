#!/usr/bin/env python3
"""Regenerates the bundled synthetic inputs under data/.

The numbers are made up: a handful of function profiles in the range of
public FaaS traces, a diurnal invocation trace, and a subtropical-looking
hourly grid and cooling series.
"""
import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data"

# id, avg exec seconds, image MB, mean invocations per 15 min at 1x
PROFILES = [
    ("thumbnail", 1.2, 180, 60),
    ("ocr", 6.0, 420, 18),
    ("auth", 0.4, 60, 90),
    ("etl-batch", 30.0, 350, 3),
    ("recommend", 4.5, 260, 24),
    ("video-probe", 12.0, 500, 8),
    ("webhook", 0.8, 90, 45),
    ("report", 18.0, 300, 5),
]


def diurnal(epoch):
    hour = epoch / 4.0
    return 1.0 + 0.45 * math.sin((hour - 9.0) / 24.0 * 2 * math.pi)


def poisson(rng, lam):
    # Knuth for small rates, normal approximation above
    if lam > 40:
        return max(0, round(rng.gauss(lam, math.sqrt(lam))))
    l, k, p = math.exp(-lam), 0, 1.0
    while True:
        p *= rng.random()
        if p <= l:
            return k
        k += 1


def trace(rng, epochs):
    rows = []
    for e in epochs:
        for fid, _, _, mean in PROFILES:
            n = poisson(rng, mean * diurnal(e))
            if n:
                rows.append((e, fid, n))
    return rows


def environment():
    rows = []
    for h in range(24):
        day = math.sin((h - 6) / 24.0 * 2 * math.pi)
        ci = 420 - 55 * max(day, 0) + 25 * max(-day, 0)
        price = 0.085 + 0.05 * max(math.sin((h - 10) / 24.0 * 2 * math.pi), 0)
        cooling = 0.28 + 0.14 * max(math.sin((h - 8) / 24.0 * 2 * math.pi), 0)
        water = 18 + 10 * max(day, 0)
        rows.append((h, round(ci, 1), round(price, 4), round(cooling, 3), round(water, 1)))
    return rows


def write(name, header, rows):
    with open(OUT / name, "w") as f:
        f.write(header + "\n")
        for r in rows:
            f.write(",".join(str(x) for x in r) + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    rng = random.Random(2024)
    write("profiles.csv", "function_id,avg_exec_s,image_mb", [p[:3] for p in PROFILES])
    write("day_trace.csv", "epoch,function_id,invocations", trace(rng, range(96)))
    # two hours around the afternoon peak, renumbered from zero
    mini = [(e - 52, f, n) for e, f, n in trace(random.Random(7), range(52, 60))]
    write("mini_trace.csv", "epoch,function_id,invocations", mini)
    write("environment.csv", "hour,ci_g_per_kwh,price_per_kwh,cooling_eff,water_factor", environment())


if __name__ == "__main__":
    main()
