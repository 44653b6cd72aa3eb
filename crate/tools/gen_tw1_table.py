#!/usr/bin/env python3
"""Generate the embedded Tracy-Widom (beta = 1) CDF table.

F1(s) = det(I - K_s) on L2(s, inf) with kernel K_s(x, y) = Ai((x + y) / 2) / 2,
evaluated by Nystrom discretisation with Gauss-Legendre nodes on a truncated
interval [s, s + L]. Writes `x,F1(x)` rows to stdout.
"""
import sys

import numpy as np
from scipy.special import airy


def f1_cdf(s, nodes=240, upper=16.0):
    hi = max(s, 0.0) + upper
    xi, wi = np.polynomial.legendre.leggauss(nodes)
    x = s + (hi - s) * (xi + 1.0) / 2.0
    w = wi * (hi - s) / 2.0
    sw = np.sqrt(w)
    ai = airy((x[:, None] + x[None, :]) / 2.0)[0]
    k = 0.5 * sw[:, None] * ai * sw[None, :]
    return np.linalg.det(np.eye(nodes) - k)


def main():
    lo, hi, step = -10.0, 8.0, 0.01
    n = int(round((hi - lo) / step)) + 1
    prev = 0.0
    out = sys.stdout
    out.write("x,F1\n")
    for i in range(n):
        s = lo + i * step
        f = min(max(f1_cdf(s), 0.0), 1.0)
        f = max(f, prev)
        prev = f
        out.write(f"{s:.2f},{f:.17e}\n")


if __name__ == "__main__":
    main()
