"""Operator-framework probes on three prototypes.

Multiplication operators are banded, so their quasi-banded tails vanish.  A
convolution with a compactly supported kernel (the cubic B-spline) is banded
up to aliasing.  The Cauchy singular integral S has a 1/(x - y) kernel: its
tails stay of order one and its commutators with slowly dilated exponentials
do not decay.  The logarithmic bound on ||P_m S Q_n|| is shown last.
"""

from finsec.discretize import make_grid
from finsec.operators import Conv, Mult, cauchy
from finsec.pframework import cauchy_tail_check, commutator_probe, quasibanded_probe
from finsec.symbols import symbol

grid = make_grid(64, 8, 2)
ms = [1, 2, 4, 8, 16]
ops = {
    "mult(2+atan(x))": Mult(symbol("2+atan(x)")),
    "conv(B-spline)": Conv(symbol("(sin(xi/2)/(xi/2))^4")),
    "S": cauchy(),
}

print("quasi-banded tails d(m) = max_n ||Q_{n+m} A P_n||")
for name, op in ops.items():
    tr = quasibanded_probe(op, ms, 32, grid)
    print(f"  {name:<16} " + " ".join(f"{v:.2e}" for v in tr.values) + f"  -> {tr.tag}")

print("\ncommutators ||A e_t - e_t A|| with e_t(x) = exp(+-ix/t), t = 1, 2, 4, 8, 16")
for name in ("conv(B-spline)", "S"):
    tr = commutator_probe(ops[name], "Exponential", [1, 2, 4, 8, 16], grid)
    print(f"  {name:<16} " + " ".join(f"{v:.2e}" for v in tr.values) + f"  -> {tr.tag}")

print("\nCauchy tail bound")
for m, n in ((1, 10), (2, 20), (4, 40)):
    c = cauchy_tail_check(m, n, grid=grid)
    print(f"  ||P_{m} S Q_{n}|| = {c.measured:.4f} <= bound {c.bound:.4f}: {c.passed}")
