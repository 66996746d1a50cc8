"""Hochschild and cyclic homology, Connes' B and the shuffle product.

HH of the dual numbers in characteristic 3 is (2, 1, 1, 1, ...), HH of the
group algebra of Z/2 is concentrated in degree 0 (it is étale), and
M_2(F_3) is Morita equivalent to F_3.
"""

from nccartier.algebras import group_algebra, matrix_algebra, truncated_polynomial
from nccartier.cyclic import build_asharp, constant_module
from nccartier.homology import (
    cyclic_homology,
    derivation_failures,
    edgewise_subdivision,
    hochschild_homology,
    is_invertible,
    mixed_identities,
)

p = 3
for A, d in ((truncated_polynomial(2, p), 3), (group_algebra(2, p), 2), (matrix_algebra(2, p), 1)):
    print(f"HH_0..{d}({A.name}) = {hochschild_homology(build_asharp(A, d + 1), d)}")

E = build_asharp(truncated_polynomial(2, p), 4)
print("b^2 = 0, B^2 = 0, bB + Bb = 0 at level 2:", mixed_identities(E, 2))
print("HC_0..4 of the ground field:", cyclic_homology(constant_module(p, 6), 4))

sub = edgewise_subdivision(truncated_polynomial(2, p), p, 1)
print("edgewise subdivision is a chain map:", sub.is_chain_map,
      "| isomorphism on HH_0, HH_1:", [bool(is_invertible(M, p)) for M in sub.induced])
print("B is a derivation of the shuffle product through degree 2 (failures):",
      derivation_failures(truncated_polynomial(2, p), 2))
