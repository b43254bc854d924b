"""Independent reference implementations used only by the tests.

Everything here is written with plain loops straight from the textbook
definitions, deliberately sharing no code with the package.
"""

from __future__ import annotations

import math

from fractions import Fraction

import numpy as np
import scipy.linalg
import sympy


def glcm_loops(q, dx, dy, levels):
    """Directional co-occurrence counts by visiting every pixel pair."""
    h, w = len(q), len(q[0])
    P = [[0] * levels for _ in range(levels)]
    for y in range(h):
        for x in range(w):
            y2, x2 = y + dy, x + dx
            if 0 <= y2 < h and 0 <= x2 < w:
                P[q[y][x]][q[y2][x2]] += 1
    return P


def _xlogx(v):
    return v * math.log(v) if v > 0 else 0.0


def haralick_literal(P):
    """f1..f14 computed term by term from their defining sums (0-based levels)."""
    ng = len(P)
    R = sum(sum(row) for row in P)
    p = [[P[i][j] / R for j in range(ng)] for i in range(ng)]
    px = [sum(p[i][j] for j in range(ng)) for i in range(ng)]
    py = [sum(p[i][j] for i in range(ng)) for j in range(ng)]
    p_sum = [0.0] * (2 * ng - 1)
    p_diff = [0.0] * ng
    for i in range(ng):
        for j in range(ng):
            p_sum[i + j] += p[i][j]
            p_diff[abs(i - j)] += p[i][j]

    mu_x = sum(i * px[i] for i in range(ng))
    mu_y = sum(j * py[j] for j in range(ng))
    sd_x = math.sqrt(sum((i - mu_x) ** 2 * px[i] for i in range(ng)))
    sd_y = math.sqrt(sum((j - mu_y) ** 2 * py[j] for j in range(ng)))
    mu = sum(i * p[i][j] for i in range(ng) for j in range(ng))

    hxy = -sum(_xlogx(p[i][j]) for i in range(ng) for j in range(ng))
    hx = -sum(_xlogx(v) for v in px)
    hy = -sum(_xlogx(v) for v in py)
    hxy1 = 0.0
    hxy2 = 0.0
    for i in range(ng):
        for j in range(ng):
            prod = px[i] * py[j]
            if p[i][j] > 0:
                hxy1 -= p[i][j] * math.log(prod)
            hxy2 -= _xlogx(prod)

    f = [0.0] * 14
    f[0] = sum(p[i][j] ** 2 for i in range(ng) for j in range(ng))
    f[1] = sum(k * k * p_diff[k] for k in range(ng))
    cov = sum(i * j * p[i][j] for i in range(ng) for j in range(ng)) - mu_x * mu_y
    f[2] = cov / (sd_x * sd_y) if sd_x * sd_y > 0 else 0.0
    f[3] = sum((i - mu) ** 2 * p[i][j] for i in range(ng) for j in range(ng))
    f[4] = sum(p[i][j] / (1 + (i - j) ** 2) for i in range(ng) for j in range(ng))
    f[5] = sum(k * p_sum[k] for k in range(2 * ng - 1))
    f[6] = sum((k - f[5]) ** 2 * p_sum[k] for k in range(2 * ng - 1))
    f[7] = -sum(_xlogx(v) for v in p_sum)
    f[8] = hxy
    mu_d = sum(k * p_diff[k] for k in range(ng))
    f[9] = sum((k - mu_d) ** 2 * p_diff[k] for k in range(ng))
    f[10] = -sum(_xlogx(v) for v in p_diff)
    hmax = max(hx, hy)
    f[11] = (hxy - hxy1) / hmax if hmax > 0 else 0.0
    f[12] = math.sqrt(min(1.0, max(0.0, 1 - math.exp(-2 * (hxy2 - hxy)))))

    f[13] = math.sqrt(max(0.0, float(second_eigenvalue_exact(P))))
    return f


def second_eigenvalue_exact(P, digits=30):
    """Second eigenvalue (by real part) of Q from its exact characteristic polynomial."""
    ng = len(P)
    R = sum(sum(row) for row in P)
    p = [[Fraction(P[i][j], R) for j in range(ng)] for i in range(ng)]
    px = [sum(p[i]) for i in range(ng)]
    py = [sum(p[i][j] for i in range(ng)) for j in range(ng)]
    Q = [[sum((p[i][k] * p[j][k] / (px[i] * py[k]) for k in range(ng)
               if px[i] > 0 and py[k] > 0), Fraction(0)) for j in range(ng)]
         for i in range(ng)]
    x = sympy.Symbol("x")
    M = sympy.Matrix([[sympy.Rational(q.numerator, q.denominator) for q in row] for row in Q])
    poly = M.charpoly(x)
    roots = []
    # exact square-free factorization keeps repeated roots (e.g. 0, 1) exact
    for factor, mult in sympy.sqf_list(poly.as_expr(), x)[1]:
        fp = sympy.Poly(factor, x)
        if fp.degree() == 1:
            c = fp.all_coeffs()
            found = [-c[1] / c[0]]
        else:
            found = fp.nroots(n=digits, maxsteps=500)
        roots += [complex(r) for r in found] * mult
    roots.sort(key=lambda z: -z.real)
    return roots[1].real


def admissible_paths(J, p, m):
    """All scattering paths up to order m with strictly increasing scale index."""
    out = [()]

    def extend(path, depth):
        if depth == m:
            return
        start = path[-1][0] + 1 if path else 0
        for j in range(start, J):
            for l in range(p):
                new = path + ((j, l),)
                out.append(new)
                extend(new, depth + 1)

    extend((), 0)
    return out


def box_downsample(img, factor):
    h, w = img.shape
    return img.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def pca_by_power_free_svd(X):
    """Eigenvalues of the unnormalized scatter matrix via SVD of the centred data."""
    Z = X - X.mean(axis=0)
    s = scipy.linalg.svdvals(Z)
    vals = np.zeros(X.shape[1])
    vals[: len(s)] = s ** 2
    return vals
