"""The closed formula for zeta o Phi on monoid algebras.

On a basis chain g_0 (x) ... (x) g_d of a commutative monoid algebra,
zeta o Phi is a single chain built from p-th powers.  We compare it with
the pipeline on finite monoids and with a symbolic recomputation over
Z and N x Z on random chains.
"""

from nccartier import linalg as la
from nccartier.algebras import cyclic_group, monoid_algebra, truncated_monoid
from nccartier.monoid import (
    MonoidChain,
    _zeta_phi_chain,
    formula_matrix,
    mixed_monoid,
    random_formula_check,
    zeta_phi,
)

p = 3
M = mixed_monoid(2, 1)
c = MonoidChain(((1, 2), (0, -1)), 1)
print(f"zeta Phi of {c.entries} over N x Z at p = 3:", zeta_phi(M, c, p).entries)

for G in (cyclic_group(2), cyclic_group(3), truncated_monoid(2)):
    A = monoid_algebra(G, p)
    same = [la.equal(_zeta_phi_chain(A, p, d), formula_matrix(G, p, d), p) for d in range(3)]
    print(f"{G.name}: closed formula = pipeline chain map in degrees 0..2: {same}")

for p in (3, 5):
    r = random_formula_check(2, 1, p, 1000, seed=1)
    print(f"p = {p}: 1000 random chains over N x Z agree with the symbolic recomputation: {r.ok}")
