"""The Cartier map C: ZHH -> HH for the dual numbers and for F_3[Z/2].

cartier_map builds K^3, its subcomplexes ZK and BK, computes HH, BHH and
ZHH, and checks the factorisation B = zeta xi beta, both long exact
sequences and HC(ZK/BK) = HH.  Then C o Phi = id is checked, and C is
transported along a change of basis.
"""

import numpy as np

from nccartier import linalg as la
from nccartier.algebras import group_algebra, permute_basis, truncated_polynomial
from nccartier.cartier import CartierPipeline, cartier_conjugation_check, cartier_map

p = 3
pkg = cartier_map(truncated_polynomial(2, p), p, 1)
print(f"{pkg.algebra}: dims {pkg.dims}")
print("checks:", {k: v for k, v in pkg.checks.items()})
print("C in degree 0 (ZHH_0 -> HH_0):\n", pkg.C[0].toarray())

P = pkg.pipeline
print("C o Phi = id on HH_0, HH_1:",
      [la.equal(P.cartier_of_phi(d), la.identity(P.hh(d).dim), p) for d in range(2)])

A = group_algebra(2, p)
B, _ = permute_basis(A, [1, 0])
swap = np.array([[0, 1], [1, 0]])
print("C commutes with swapping the basis of F_3[Z/2]:",
      cartier_conjugation_check(CartierPipeline(A, p, 1), CartierPipeline(B, p, 1), swap))
print("but not with diag(2, 1), which moves the unit:",
      cartier_conjugation_check(P, P, np.diag([2, 1]), 1))
