"""Cyclic objects: A_#, its p-fold subdivision i_p^*A_#, and the sigma quotients.

For the dual numbers F_3[x]/x^2 we build A_# and i_3^*A_#, verify the
cyclic relations, count the invariants by necklaces, and check that the
diagonal x -> x^{(x)3} lands in the kernel of the trace.
"""

from nccartier import linalg as la
from nccartier.algebras import truncated_polynomial
from nccartier.cyclic import (
    SigmaQuotients,
    build_asharp,
    build_ip_pullback,
    build_K_twists,
    four_term_exact,
    psi,
    tightness_check,
    verify_cyclic_relations,
)

p = 3
A = truncated_polynomial(2, p)
E = build_asharp(A, 3)
print(f"A_# of {A.name}: dims {E.dims}; relations hold: {verify_cyclic_relations(E)}")

F = build_ip_pullback(A, p, 2)
print(f"i_3^*A_#: dims {F.dims} (level n is A^(x)3(n+1)); relations hold: {verify_cyclic_relations(F)}")

q = SigmaQuotients(F)
print("sigma-invariants by level:", [q.invariants.dim(n) for n in range(3)],
      "= necklace counts (a^3m + 2 a^m)/3 for a = 2")
tr = q.trace()
f = psi(A, p, 2)
print("tr o psi = 0 at every level:", all(la.is_zero(la.matmul(tr.at(n), f.at(n), p), p) for n in range(3)))
print("i_3^*A_# is tight (Coker tr = Ker tr via e):", tightness_check(F))

tw = build_K_twists(E)
print("four-term sequence 0 -> E -> K1 -> K0 -> E -> 0 exact at levels 0..3:",
      all(four_term_exact(tw, n) for n in range(4)))
