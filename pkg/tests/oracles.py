"""Brute-force reference implementations used only by the tests."""
import itertools

import numpy as np


def jacobi_eigenvalues(a, tol=1e-14, max_sweeps=100):
    """Cyclic complex Jacobi rotations on a Hermitian matrix."""
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diag(a)) ** 2)))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                # phase-rotate so the pivot is real, then do a real Jacobi rotation
                phase = apq / abs(apq)
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * np.arctan2(2 * abs(apq), aqq - app)
                c, s = np.cos(theta), np.sin(theta)
                # A <- J^dagger A J touches only rows/columns p and q
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * np.conj(phase) * cq
                a[:, q] = s * phase * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * phase * rq
                a[q, :] = s * np.conj(phase) * rp + c * rq
    return np.sort(np.diag(a).real)


def naive_qr_eigenvalues(a, iters=500):
    """Unshifted QR iteration; slow but independent of LAPACK's eigensolvers."""
    a = np.array(a, dtype=complex)
    for _ in range(iters):
        q, r = np.linalg.qr(a)
        a = r @ q
    return np.sort(np.diag(a).real)


def char_poly_sign_changes(a, lam, eps=1e-7):
    """det(A - x I) changes sign (or vanishes) around an eigenvalue of odd multiplicity."""
    n = a.shape[0]
    lo = np.linalg.det(a - (lam - eps) * np.eye(n)).real
    hi = np.linalg.det(a - (lam + eps) * np.eye(n)).real
    return lo * hi <= 0


def auc_pairs(scores, labels):
    """Mann-Whitney statistic over all positive/negative pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for sp, sn in itertools.product(pos, neg):
        if sp > sn:
            total += 1
        elif sp == sn:
            total += 0.5
    return total / (len(pos) * len(neg))


def trace_expectation(op, rho):
    return np.trace(op @ rho)


def relu_margin(m, x):
    """Smallest |pre-activation| of any hidden unit; finite differences need it away from 0."""
    h = np.asarray(x, dtype=float)
    margin = np.inf
    for w, b in zip(m.weights[:-1], m.biases[:-1]):
        h = h @ w + b
        margin = min(margin, float(np.min(np.abs(h))))
        h = np.maximum(h, 0.0)
    return margin


def numeric_gradient(loss, params, h=1e-5):
    """Central differences of ``loss()`` with respect to every entry of ``params`` (edited in place)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            up = loss()
            p[i] = old - h
            down = loss()
            p[i] = old
            g[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def max_relative_error(a, b, floor=1e-6):
    worst = 0.0
    for x, y in zip(a, b):
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst
