"""Regenerates ausgrid_fixture.csv: a miniature in the Ausgrid solar-home layout.

Customer 1: 18 Monday-anchored weeks from 2013-01-07 plus 2012-12-27..31,
with one day dropped in three of the weeks (15 complete 2013 weeks remain)
and CL rows omitted on Sundays. Customer 2: two full weeks, no CL at all.
"""
import datetime as dt
import math
import random

rng = random.Random(20130107)


def labels():
    out = []
    for s in range(48):
        end = (s + 1) * 30
        out.append(f"{(end // 60) % 24}:{'00' if end % 60 == 0 else '30'}")
    return out


def day_rows(customer, day, with_cl):
    gc, cl, gg = [], [], []
    cloud = 0.6 + 0.4 * rng.random()
    for s in range(48):
        h = (s + 0.5) / 2
        solar = 0.0
        if 6 < h < 18:
            solar = 0.55 * math.sin(math.pi * (h - 6) / 12) * cloud
        demand = 0.12 + 0.45 * max(0.0, math.cos(math.pi * (h - 19.5) / 6)) * (abs(h - 19.5) < 3)
        demand += 0.2 * max(0.0, math.cos(math.pi * (h - 7.5) / 3)) * (abs(h - 7.5) < 1.5)
        gc.append(round(demand * (0.85 + 0.3 * rng.random()), 3))
        gg.append(round(solar, 3))
        cl.append(round(0.3 * (0.9 + 0.2 * rng.random()), 3) if (s >= 46 or s < 6) else 0.0)
    date = f"{day.day}/{day.month}/{day.year}"
    rows = [(customer, "GC", date, gc)]
    if with_cl:
        rows.append((customer, "CL", date, cl))
    rows.append((customer, "GG", date, gg))
    return rows


def fmt(v):
    return f"{v:.3f}".rstrip("0").rstrip(".") if v else "0"


rows = []
start = dt.date(2012, 12, 27)
dropped = {dt.date(2013, 1, 23), dt.date(2013, 3, 7), dt.date(2013, 4, 14)}
day = start
end = dt.date(2013, 1, 7) + dt.timedelta(days=18 * 7)
while day < end:
    if day not in dropped:
        rows += day_rows(1, day, with_cl=day.weekday() != 6)
    day += dt.timedelta(days=1)
for i in range(14):
    rows += day_rows(2, dt.date(2013, 6, 3) + dt.timedelta(days=i), with_cl=False)

with open("ausgrid_fixture.csv", "w") as f:
    f.write("Solar home electricity data (fixture in the published layout)\n")
    f.write(",".join(["Customer", "Generator Capacity", "Postcode", "Consumption Category", "date"] + labels() + ["Row Quality"]) + "\n")
    for customer, cat, date, values in rows:
        cap, post = ("1.5", "2076") if customer == 1 else ("2.2", "2100")
        f.write(",".join([str(customer), cap, post, cat, date] + [fmt(v) for v in values] + [""]) + "\n")
