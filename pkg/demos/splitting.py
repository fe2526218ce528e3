"""Singular value splitting caused by a lifted rank-one perturbation.

I - V_n P_u V_-n moves a rank-one projection along with the right end of the
window.  Its W+ snapshot I - P_u has a one-dimensional kernel, so exactly one
singular value of the truncations vanishes while the next stays at 1.
"""

from finsec import analysis
from finsec.opgrammar import parse_operator

seq = parse_operator("FS(I) + liftplus(-gaussian(-4, 0.25))")
report = analysis.stability_report(seq)
print(f"predicted alpha = {report.alpha} (culprits: {', '.join(map(str, report.culprits))})\n")

res = analysis.splitting_study(seq, 3, (8, 16, 32))
print(f"{'n':>4} {'s_1':>12} {'s_2':>12} {'s_3':>12}")
for n, row in zip(res.n_list, res.trajectories):
    print(f"{n:>4} " + " ".join(f"{v:>12.4e}" for v in row))
print(f"\nobserved vanishing values: {res.observed}, verdict: {res.verdict}")
