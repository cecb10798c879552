"""Distances between two small diagrams and the optimal matching behind them."""

import math

from epdq.measures import PersistenceMeasure
from epdq.transport import DIAGONAL, bottleneck_distance, ot_distance

a = PersistenceMeasure([(0.0, 4.0), (1.0, 1.5), (2.0, 3.0)])
b = PersistenceMeasure([(0.5, 4.5), (2.2, 2.9)])

for p in (1.0, 2.0):
    value, plan = ot_distance(a, b, p)
    print(f"OT_{p:g} = {value:.4f}")
    for i, j, mass in plan.pairs:
        src = "diagonal" if i == DIAGONAL else tuple(a.points[i].tolist())
        dst = "diagonal" if j == DIAGONAL else tuple(b.points[j].tolist())
        print(f"    {src} -> {dst}  mass {mass:g}")

value, _ = bottleneck_distance(a, b)
print(f"bottleneck = {value:.4f}; the distance of (1, 1.5) to the diagonal is {0.5 / math.sqrt(2):.4f}")
