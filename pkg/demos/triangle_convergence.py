"""Convergence of the empirical expected diagram on the triangle model.

Draws n diagrams for growing n, bins their average on a 50 x 50 grid and
measures OT_2^2 to the binned closed-form expected diagram. Writes the CSV
and a log-log SVG next to this script.

    python demos/triangle_convergence.py
"""

from pathlib import Path

from epdq.experiments import run_convergence_triangles, write_csv
from epdq.plotting import plot

here = Path(__file__).parent
records, summary = run_convergence_triangles(reps=10)
write_csv(here / "triangles.csv", records)
plot(here / "triangles.csv", "loglog", here / "triangles.svg", "triangle model")
print(f"fitted slope {summary.slope:.3f} (r2 {summary.r2:.3f}) over {summary.n_points} sample sizes")
