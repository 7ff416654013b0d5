"""Independent reference values frozen into the C++ tests.

Run with python3; needs numpy, scipy and mpmath. Every number printed here is
computed without the C++ library.
"""
import math

import mpmath as mp
import numpy as np
import scipy.stats as st
from scipy.signal import fftconvolve

mp.mp.dps = 40


def edgeworth_vs_gamma():
    n = 50
    grid = [-2, -1, -0.5, 0, 0.5, 1, 2]
    print("# centered Exp(1), n=50: s, exact Gamma cdf, edgeworth, phi")
    worst_e = worst_p = 0.0
    for s in grid:
        exact = st.gamma.cdf(n + s * math.sqrt(n), n)
        ed = st.norm.cdf(s) + st.norm.pdf(s) * (2 / 6) * (1 - s * s) / math.sqrt(n)
        worst_e = max(worst_e, abs(exact - ed))
        worst_p = max(worst_p, abs(exact - st.norm.cdf(s)))
        print(f"{s:5} {exact:.17g} {ed:.17g}")
    print("max edgeworth err", worst_e, "max normal err", worst_p)


def roots():
    lam = lambda a: -a - mp.log(1 - a)
    target = lam(mp.mpf("0.2"))
    a0 = mp.findroot(lambda a: lam(a) - target, -0.23)
    print("centered exp conjugate of 0.2:", mp.nstr(a0, 20), "Lambda(0.2) =", mp.nstr(target, 20))
    a = mp.findroot(lambda a: 0.2 * mp.e**a + 0.8 * mp.e ** (-2 * a) - 1, 1.5)
    print("two-point tail root:", mp.nstr(a, 20))
    print("gaussian ladder rho+ = -zeta(1/2)/sqrt(2 pi):", mp.nstr(-mp.zeta(0.5) / mp.sqrt(2 * mp.pi), 20))
    print("corrected example e^0.4 Phi(-1.15):", mp.nstr(mp.e**0.4 * mp.ncdf(-1.15), 20))


def log_lambda(P, mgf, a):
    K = len(P)
    A = mp.matrix(K, K)
    for i in range(K):
        for j in range(K):
            A[i, j] = P[i][j] * (mgf[i][j](a) if P[i][j] > 0 else 0)
    ev = mp.eig(A, left=False, right=False)
    return mp.log(max(ev, key=lambda z: mp.re(z)).real)


def lambda_derivs(name, P, mgf):
    h = mp.mpf("1e-8")
    f = lambda a: log_lambda(P, mgf, a)
    d1 = mp.diff(f, 0, 1, h=h)
    d2 = mp.diff(f, 0, 2, h=h)
    d3 = mp.diff(f, 0, 3, h=h)
    print(f"{name}: Lambda' {mp.nstr(d1, 17)} Lambda'' {mp.nstr(d2, 17)} Lambda''' {mp.nstr(d3, 17)}")


def gauss(m, s):
    return lambda a: mp.e ** (a * m + a * a * s * s / 2)


def twop(v1, p, v2):
    return lambda a: p * mp.e ** (a * v1) + (1 - p) * mp.e ** (a * v2)


def expo(r, shift):
    return lambda a: mp.e ** (a * shift) * r / (r - a)


def point(v):
    return lambda a: mp.e ** (a * v)


def spectral_models():
    mp.mp.dps = 60
    P = [[0.9, 0.1], [0.3, 0.7]]
    g = [gauss(0.5, 1.0), gauss(-1.0, 0.6)]
    lambda_derivs("gauss2", P, [g, g])
    P = [[0.6, 0.4], [0.3, 0.7]]
    t = [twop(1, 0.6, -1), twop(2, 0.3, -1)]
    lambda_derivs("twopoint2", P, [[t[0]] * 2, [t[1]] * 2])
    P = [[0.2, 0.5, 0.3], [0.4, 0.0, 0.6], [0.5, 0.25, 0.25]]
    L = [[gauss(0.2, 0.8), expo(3.0, -0.5), point(0.25)],
         [twop(1.5, 0.4, -0.5), point(0.0), gauss(-0.3, 1.1)],
         [expo(2.0, -0.2), twop(-1.0, 0.5, 0.5), gauss(0.0, 0.5)]]
    lambda_derivs("mixed3", P, L)
    P = [[0.8, 0.2], [0.4, 0.6]]
    g = [gauss(0.25, 1.0), gauss(-0.5, 0.8)]
    lambda_derivs("modulated zero-drift", P, [[g[0]] * 2, [g[1]] * 2])
    mp.mp.dps = 40


def killed_density(m, b, h, width=9.0):
    lo = -7 * math.sqrt(m) - 10
    n = int(round((b - lo) / h))
    x = b - h * np.arange(n + 1)[::-1]
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2
    k = np.arange(-int(width / h), int(width / h) + 1) * h
    ker = st.norm.pdf(k)
    f = st.norm.pdf(x)
    for _ in range(2, m):
        f = fftconvolve(f * w, ker, mode="same")
    return x, w, f


def gaussian_references():
    """Standard normal walk, b = sqrt(m), c = sqrt(m)/2, bridge endpoint 0."""
    print("# m, joint P(tau<m, S_m<c), bridge P(tau<m | S_m=0)  (Richardson in h)")
    for m in (100, 400, 1600):
        b, c = math.sqrt(m), 0.5 * math.sqrt(m)
        vals = []
        for h in (0.1, 0.05, 0.025):
            x, w, f = killed_density(m, b, h)
            joint = st.norm.cdf(c / math.sqrt(m)) - np.sum(w * f * st.norm.cdf(c - x))
            bridge = 1 - np.sum(w * f * st.norm.pdf(-x)) / st.norm.pdf(0, scale=math.sqrt(m))
            vals.append((joint, bridge))
        ext = [vals[2][k] + (vals[2][k] - vals[1][k]) / 3 for k in range(2)]
        print(m, repr(float(ext[0])), repr(float(ext[1])))


if __name__ == "__main__":
    edgeworth_vs_gamma()
    roots()
    spectral_models()
    gaussian_references()
