"""Brute-force reference values for the two-color, edgeless, ball-Hamming instance.

Only numpy: the log-MGF is log(1/2 + e^t / 2) in closed form and the
Legendre transform is taken as a maximum over a fine t-grid, then polished
by golden-section search on the bracketing cell.  The printed values are
frozen into tests/test_acceptance.py.
"""
import numpy as np


def lam(t):
    return np.logaddexp(0.0, t) - np.log(2.0)


def legendre(z, lo=-30.0, hi=30.0, num=600_001):
    t = np.linspace(lo, hi, num)
    k = int(np.argmax(z * t - lam(t)))
    a, b = t[max(k - 1, 0)], t[min(k + 1, num - 1)]
    g = (np.sqrt(5) - 1) / 2
    for _ in range(200):
        c, d = b - g * (b - a), a + g * (b - a)
        if z * c - lam(c) > z * d - lam(d):
            b = d
        else:
            a = c
    s = 0.5 * (a + b)
    return float(z * s - lam(s))


if __name__ == "__main__":
    for z in (0.1, 0.25, 0.4, 0.75):
        print(f"{z}: {legendre(z)!r}")
