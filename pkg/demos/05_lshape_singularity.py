"""The reentrant corner: r^(5/3) sin(5 theta/3) on the L-shaped domain.

The solution only has H^(8/3 - eps) regularity, so the energy error
stalls at h^(2/3) for every k, while the interior L2 error still beats
it by a wide margin. Level 1 here is the six-triangle mesh refined twice.
"""
import sys

from wgbiharmonic.analysis import run_convergence

levels = int(sys.argv[1]) if len(sys.argv) > 1 else 4
for k in (2, 3):
    table = run_convergence(3, k, levels)
    print(table.to_markdown())
    last = table.rows[-1]
    print(f"finest pair: H2 order {last.rate_H2:.3f} (2/3 = 0.667), L2 order {last.rate_L2:.3f}\n")
