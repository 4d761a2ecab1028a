#!/usr/bin/env python3
"""Analog combiner design: fully digital optimum vs hardware-constrained.

The per-cell weight tr(Q W* (W Q W*)^{-1} W Q) only depends on the row
space of the combiner and is capped by the sum of the leading eigenvalues
of the receive correlation. This script shows the cap being attained by
the fully digital solution and approached by the unimodular designs
(alternating quantization and greedy dictionary search).
"""

import numpy as np

from pilotforge.channel import complex_normal
from pilotforge.combiner import (
    fully_digital,
    grtm_combiner,
    magiq,
    unimodular_dictionary,
    weight,
)
from pilotforge.estimator import UNIMODULAR
from pilotforge.matlin import herm_eig

rng = np.random.default_rng(11)
n_antennas, n_rf = 10, 3
x = complex_normal(rng, (n_antennas, n_antennas))
q = x @ x.conj().T

lam = herm_eig(q).values
cap = lam[:n_rf].sum()
print(f"{n_antennas} antennas mapped to {n_rf} RF chains")
print(f"weight cap (top-{n_rf} eigenvalue sum): {cap:.4f}\n")

w_fd = fully_digital(q, n_rf)
print(f"fully digital       weight {weight(q, w_fd):.4f}  (attains the cap)")

w_mq, state = magiq(w_fd, UNIMODULAR)
print(f"magiq (unimodular)  weight {weight(q, w_mq):.4f}  "
      f"gap {state.gap:.4f} after {state.iterations} iterations")

dictionary = unimodular_dictionary(n_antennas, 300, rng)
w_gr = grtm_combiner(q, n_rf, dictionary)
print(f"grtm (dictionary)   weight {weight(q, w_gr):.4f}  "
      f"(300 uniform-phase candidate rows)")

print("\nmagiq gap trace (first 8 iterations):",
      np.round(state.gap_trace[:8], 5).tolist())
print("the trace never increases; the quantization floor is where it stalls")
