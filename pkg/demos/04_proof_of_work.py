"""
Proof-of-work IDs
=================

An adversary with 5% of the compute gets about 5% of the IDs, and the IDs
are spread uniformly.  If the ID were read straight off the puzzle input,
the adversary could choose where its IDs land; hashing twice prevents it.
"""

import numpy as np

from tinygroups import pow as pw

params = pw.PuzzleParams.calibrated(T=20, rate=1, n=20_000)
budget = pw.ComputeBudget.for_network(20_000, 0.05)
rng = np.random.default_rng(2)
r = rng.bytes(params.nbytes)

certs = pw.adversary_generate(budget, 11, rng, params, r)
print(f"tau={params.tau}  units={budget.adversary_units}  certificates={len(certs)}"
      f"  bound={pw.count_bound(budget.adversary_units, params.epsilon):.0f}")
print("uniformity p-value:", round(pw.chi_square_uniform([float(c.id_value) for c in certs]), 3))

biased = pw.adversary_generate(budget, 11, rng, params, r, "bias_small_outputs", single_hash=True)
print("single-hash IDs under biasing, p-value:", pw.chi_square_uniform([float(c.id_value) for c in biased]))
print("largest biased ID:", max(float(c.id_value) for c in biased))

valid, total = pw.precompute_attack(budget, params, rng, epochs=3)
print(f"hoarded over 3 epochs: {total} certificates, still valid with rotating strings: {valid}")
