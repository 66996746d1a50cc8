"""Comparison with de Rham theory for commutative algebras.

Kähler forms of a presented algebra, the HKR map P: HH -> Omega, and the
identity P o B = d o P.  The rotation-sum formula for B *without* Koszul
signs does not satisfy it, which is why the signed operator is used
throughout.  For the étale algebra F_3[t]/(t^2 - 1) the non-commutative
C in degree 0 is the inverse Frobenius.
"""

from nccartier.derham import (
    compare_cartier,
    connes_vs_derham,
    cyclic_presentation,
    kaehler_forms,
    laurent_hkr_check,
    parse_presentation,
)

p = 3
A = parse_presentation(p, ["x", "y"], ["x**2", "y**2"])
F = kaehler_forms(A, 2)
print(f"{A.describe()}: dim Omega^0..2 = {[F.dim(i) for i in range(3)]}, d^2 = 0: {F.d_squared_zero()}")
signed = connes_vs_derham(A, 1)
unsigned = connes_vs_derham(A, 1, signed=False)
print("P o B = d o P with Connes' B:          ", signed.intertwines)
print("P o B = d o P with the unsigned sum:   ", unsigned.intertwines, "<- fails in degree 1")

Z2 = cyclic_presentation(2, p)
r = compare_cartier(Z2, p, 1)
print(f"{Z2.describe()}: HH = Omega = 0 above degree 0: {r.degenerate}; "
      f"C_0 = inverse Frobenius: {r.agrees_degree0}; xi, zeta injective: {r.xi_injective}, {r.zeta_injective}")
print("Laurent ring k[t, 1/t], HKR degrees 0/1 on sampled monomials:", laurent_hkr_check(p, 1, 0))
