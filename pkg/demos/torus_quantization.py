"""Quantizing the expected diagram of random tori.

Samples 40 H1 diagrams of noisy tori, then compares codebooks with and
without the diagonal cell at k = 2. The two prominent loops of the torus
form two clusters far from the diagonal; the rest of the mass is noise.

    python demos/torus_quantization.py
"""

import math

from epdq.generators import TorusParams, make_rng, sample_torus_diagram
from epdq.measures import empirical_epd
from epdq.quantize import distortion, lloyd_no_diagonal, online_quantize, top_persistence_init

rng = make_rng(0)
diagrams = [sample_torus_diagram(TorusParams(mean_points=200, epsilon=0.1), rng) for _ in range(40)]
epd = empirical_epd(diagrams)
init = top_persistence_init(diagrams[0], 2)

for name, codebook in [
    ("diagonal cell, p=2", online_quantize(diagrams, 2, 2.0, 8, init)),
    ("diagonal cell, p=inf", online_quantize(diagrams, 2, math.inf, 8, init)),
    ("no diagonal cell", lloyd_no_diagonal(diagrams, 2, 2.0, 8, init)),
]:
    centroids = ", ".join(f"({b:.2f}, {d:.2f})" for b, d in codebook.centroids)
    print(f"{name:22s} centroids {centroids}  "
          f"distortion_2 {distortion(codebook, epd, 2):.3f}  distortion_inf {distortion(codebook, epd, math.inf):.3f}")
