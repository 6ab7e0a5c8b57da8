"""Convergence on the unit square for the two smooth examples.

Energy-type errors drop like h^(k-1) and the interior L2 errors like
h^(k+1). Example 1 is the clamped bump x^2(1-x)^2 y^2(1-y)^2; pass
``verbatim=True`` to run the y^2(1-y^2) variant with nonzero normal data.
"""
import sys

from wgbiharmonic.analysis import run_convergence

levels = int(sys.argv[1]) if len(sys.argv) > 1 else 4
for example in (1, 2):
    for k in (2, 3):
        table = run_convergence(example, k, levels)
        print(table.to_markdown())
