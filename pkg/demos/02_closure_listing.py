"""Print the closed A-term system behind the first-order cubic coefficient.

The seed A(1,0,0,1;1) needs three further terms; bigger seeds (the full
order-2 cubic expansion) close after a few hundred.
"""

from asymfilter import ATermSpec, decompose_j_term, derive_closure
from asymfilter.poly import MU

seed = ATermSpec.make([1], [0], 0, [1])
system = derive_closure([seed])
print(system.format())
print()

combo = decompose_j_term(1, 3, 1) - decompose_j_term(0, 3, 1).scale(MU)
print("J1(X) - mu J1(1) for g(x) = x^3:")
for spec, coef in combo.items():
    print(f"  {coef}  *  {spec.label()}")

for order in (1, 2):
    seeds = set()
    for n in range(1, order + 1):
        for i in (0, 1):
            seeds.update(s for s in decompose_j_term(i, 3, n).specs() if not s.is_unit)
    print(f"order {order}: {len(seeds)} seeds -> closure of {len(derive_closure(sorted(seeds)))} terms")
