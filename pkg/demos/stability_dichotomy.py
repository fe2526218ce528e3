"""Stable and unstable finite sections side by side.

The full-line convolution with symbol 2 + atan(xi) has snapshots that are all
invertible, so its truncations are uniformly well conditioned.  The Cayley
symbol (xi - i)/(xi + i) is unimodular but winds once around the origin: its
half-line snapshots are Fredholm of index +1 and -1, hence not invertible, and
the smallest singular value of the truncations collapses exponentially.
"""

from finsec import analysis
from finsec.opgrammar import parse_operator

N_LIST = (4, 8, 16, 32)

for text in ('FS(conv("2+atan(xi)"))', 'FS(conv("(xi-i)/(xi+i)"))'):
    seq = parse_operator(text)
    report = analysis.stability_report(seq, analysis.AnalysisConfig(n_list=N_LIST))
    print(text)
    print(report.table())
    print(f"\n{'n':>4} {'sigma_min':>12} {'cond':>12}")
    for n, smin, cond in analysis.condition_trajectory(seq, N_LIST):
        print(f"{n:>4} {smin:>12.4e} {cond:>12.4e}")
    print("\n" + "=" * 72 + "\n")
