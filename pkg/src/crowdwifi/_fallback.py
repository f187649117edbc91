"""Pure-Python twin of the compiled Stage II solver.

Same constructor, same methods, same solution codes.  Price-independent
tables and the per-price tables are built with numpy; scalar roots go through
``scipy.optimize.brentq``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import optimize, special


def _law_cdf(kind, a, b, lo, mass, norm, t):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    if kind == 0:
        out = t
    elif kind == 1:
        out = (special.ndtr((t - a) / b) - lo) / mass
    elif kind == 2:
        out = np.expm1(-a * t) / norm
    else:
        out = -np.expm1(-a * np.log1p(t / b)) / norm
    out = np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, np.clip(out, 0.0, 1.0)))
    return out


def _law_ppf(kind, a, b, lo, mass, norm, u):
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == 0:
            out = u
        elif kind == 1:
            out = a + b * special.ndtri(lo + u * mass)
        elif kind == 2:
            out = -np.log1p(u * norm) / a
        else:
            out = b * np.expm1(-np.log1p(-u * norm) / a)
    return np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, np.clip(out, 0.0, 1.0)))


def _bracketed(fn, a, b):
    fa, fb = fn(a), fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0.0) == (fb > 0.0):
        return a if abs(fa) <= abs(fb) else b
    return optimize.brentq(fn, a, b, xtol=1e-15, rtol=8.9e-16, maxiter=200)


def _vector_bisect(fn, lo, hi, iters=60):
    """Elementwise bisection for an increasing ``fn`` with fn(lo) <= 0 <= fn(hi)."""
    lo, hi = lo.copy(), hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = fn(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


class Stage2Kernel:
    """Grid-based Stage II solver; see the compiled module for the algorithm."""

    def __init__(self, k, margin, alpha, beta, V1, V2, kind, a, b, lo, mass, norm, M):
        if M < 2:
            raise ValueError("grid needs at least two cells")
        self.M = int(M)
        self.k, self.D0, self.alpha, self.beta = float(k), float(margin), float(alpha), float(beta)
        self.dV = float(V1) - float(V2)
        self._law = (int(kind), float(a), float(b), float(lo), float(mass), float(norm))
        self.inert = self.alpha == 0.0 or self.beta >= self.k
        self.xs = np.arange(self.M + 1, dtype=float) / self.M
        self.H = self._boundary(self.xs, 0.0)
        self._phi_key = None
        self._p2int_key = None

    # -- law ------------------------------------------------------------------

    def _F(self, t):
        return _law_cdf(*self._law, t)

    def _G(self, u):
        return _law_ppf(*self._law, u)

    def cdf(self, t):
        return float(self._F(t))

    def ppf(self, u):
        return float(self._G(u))

    def boundary_table(self):
        return self.H.copy()

    # -- model pieces (vectorised over x2 where it helps) ----------------------

    def _boundary(self, x, p2):
        w = self.alpha * x
        return w * (self.k * (1.0 - self.alpha * x * x) - self.beta) * self._G(1.0 - x) - w * self.dV - p2

    def _slack(self, x, D, p2):
        w = self.alpha * x
        return D - w * self.dV - p2 - ((1.0 - w) * self.k * (1.0 - self.alpha * x * x) + w * self.beta)

    def _inner_x1(self, x2, P):
        x2 = np.asarray(x2, dtype=float)
        P = np.broadcast_to(np.asarray(P, dtype=float), x2.shape)
        k, alpha, beta = self.k, self.alpha, self.beta
        w = alpha * x2
        c0 = x2 * (1.0 - alpha * x2)
        hi = 1.0 - x2
        if self._law[0] == 0:
            a = w * k
            b = w * (k * c0 - beta)
            disc = np.sqrt(b * b + 4.0 * a * P)
            with np.errstate(divide="ignore", invalid="ignore"):
                pos = np.where(b + disc > 0.0, 2.0 * P / (b + disc), 0.0)
                neg = (disc - b) / (2.0 * a)
            x1 = np.where(b >= 0.0, pos, neg)
            return np.clip(np.nan_to_num(x1), 0.0, np.maximum(hi, 0.0))
        lo = np.clip(beta / k - c0, 0.0, None)

        def g(x1):
            return w * (k * (x1 + c0) - beta) * self._G(x1) - P

        top = g(hi) <= 0.0
        root = _vector_bisect(g, np.minimum(lo, hi), np.maximum(hi, 0.0), iters=64)
        return np.where(top | (lo >= hi), np.maximum(hi, 0.0), root)

    def _participation(self, x2, D, p2):
        x2 = np.asarray(x2, dtype=float)
        w = self.alpha * x2
        P = p2 + w * self.dV
        x1 = self._inner_x1(x2, P)
        load = x1 + x2 * (1.0 - self.alpha * x2)
        return D - P - ((1.0 - w) * self.k * load + w * self.beta) * self._G(x1 + x2)

    def _indifference(self, x1, x2, P):
        w = self.alpha * x2
        return w * (self.k * (x1 + x2 * (1.0 - self.alpha * x2)) - self.beta) * self._G(x1) - P

    def _no_wifi_share(self, D):
        k = self.k
        if D >= k:
            return 1.0, 2, 0.0
        if D <= 0.0:
            return 0.0, 4, 0.0
        if self._law[0] == 0:
            x1 = math.sqrt(D / k)
            return x1, 3, abs(k * x1 * x1 - D)
        t = _bracketed(lambda t: k * float(self._F(t)) * t - D, 0.0, 1.0)
        x1 = float(self._F(t))
        return x1, 3, abs(k * x1 * t - D)

    # -- per-price tables -----------------------------------------------------

    def _build_phi(self, p2):
        phi = -self._participation(self.xs, 0.0, p2)
        phi[(self.H < p2)] = np.inf
        phi[0] = np.inf
        self._phi = phi
        self._phi_key = p2

    def _build_p2int(self, p1):
        k, alpha, beta = self.k, self.alpha, self.beta
        D = self.D0 - p1
        x2 = self.xs
        w = alpha * x2
        c0 = x2 * (1.0 - alpha * x2)
        hi = 1.0 - x2
        lo = np.clip(beta / k - c0, 0.0, None)

        def bill(x1):
            load = x1 + c0
            return (w * (k * load - beta) * self._G(x1)
                    + ((1.0 - w) * k * load + w * beta) * self._G(x1 + x2) - D)

        e_lo, e_hi = bill(np.minimum(lo, hi)), bill(hi)
        if self._law[0] == 0:
            a1 = k * (c0 + (1.0 - w) * x2)
            a0 = (1.0 - w) * k * c0 * x2 + w * beta * x2 - D
            disc = np.sqrt(np.maximum(a1 * a1 - 4.0 * k * a0, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                x1 = np.where(a1 > 0.0, -2.0 * a0 / (a1 + disc), (disc - a1) / (2.0 * k))
            x1 = np.clip(np.nan_to_num(x1), lo, np.maximum(hi, lo))
        else:
            x1 = _vector_bisect(bill, np.minimum(lo, hi), hi, iters=64)
        p2int = w * (k * (x1 + c0) - beta) * self._G(x1) - w * self.dV
        p2int = np.where(e_hi < 0.0, np.inf, p2int)
        p2int = np.where((e_lo > 0.0) | (lo > hi), -np.inf, p2int)
        p2int[0] = -np.inf
        self._p2int = p2int
        self._p2int_key = p1

    # -- search ---------------------------------------------------------------

    def _locate(self, p1, p2, mode):
        D = self.D0 - p1
        xs, H = self.xs, self.H
        part = lambda x: float(self._participation(x, D, p2))
        edge = lambda x: float(self._boundary(x, p2))
        if not self.inert:
            if mode == 0:
                signs = D - self._phi >= 0.0
            elif mode == 1:
                signs = self._p2int >= p2
            else:
                signs = None
            inside = H >= p2
            j = self.M
            while j >= 1:
                if not inside[j]:
                    # jump to the next grid point that belongs to a run
                    hits = np.nonzero(inside[1:j])[0]
                    if hits.size == 0:
                        break
                    j = int(hits[-1]) + 1
                if j == self.M:
                    xR, i = 1.0, j - 1
                else:
                    xR, i = _bracketed(edge, xs[j], xs[j + 1]), j
                if self._slack(xR, D, p2) >= 0.0:
                    return 1.0 - xR, xR, 0, abs(edge(xR))
                outside = np.nonzero(~inside[1:i + 1])[0]
                start = int(outside[-1]) + 2 if outside.size else 1
                # grid points start..i form the rest of this run
                if signs is None:
                    block = self._participation(xs[start:i + 1], D, p2) >= 0.0
                else:
                    block = signs[start:i + 1]
                found = np.nonzero(block)[0]
                x2 = -1.0
                if found.size:
                    pos = start + int(found[-1])
                    prev = xs[pos + 1] if pos + 1 <= i else xR
                    x2 = _bracketed(part, xs[pos], prev)
                else:
                    prev = xs[start] if start <= i else xR
                    if start >= 2:
                        xL = _bracketed(edge, xs[start - 1], xs[start])
                        if part(xL) >= 0.0:
                            x2 = _bracketed(part, xL, prev)
                if x2 > 0.0:
                    P = p2 + self.alpha * x2 * self.dV
                    x1 = float(self._inner_x1(x2, P))
                    res = max(abs(part(x2)), abs(float(self._indifference(x1, x2, P))))
                    return x1, x2, 0 if x1 + x2 >= 1.0 else 1, res
                j = start - 1
        x1, code, res = self._no_wifi_share(D)
        return x1, 0.0, code, res

    def solve(self, p1, p2):
        p1, p2 = float(p1), float(p2)
        if self._phi_key is not None and self._phi_key == p2:
            mode = 0
        elif self._p2int_key is not None and self._p2int_key == p1:
            mode = 1
        else:
            mode = 2
        return self._locate(p1, p2, mode)

    def solve_p1_batch(self, p1s, p2):
        p2 = float(p2)
        if self._phi_key != p2:
            self._build_phi(p2)
        return np.array([self._locate(float(p), p2, 0) for p in np.asarray(p1s, dtype=float)],
                        dtype=float).reshape(-1, 4)

    def solve_p2_batch(self, p1, p2s):
        p1 = float(p1)
        if self._p2int_key != p1:
            self._build_p2int(p1)
        return np.array([self._locate(p1, float(p), 1) for p in np.asarray(p2s, dtype=float)],
                        dtype=float).reshape(-1, 4)


def sequential_round(thetas, labels, order, k, margin_minus_p1, alpha, beta, dV, p2):
    """One random-sequential best-response sweep; returns the number of switches."""
    n = len(thetas)
    n1 = int(np.count_nonzero(labels == 1))
    n2 = int(np.count_nonzero(labels == 2))
    changes = 0
    for i in order:
        t = thetas[i]
        old = int(labels[i])
        m1 = n1 - (old == 1)
        m2 = n2 - (old == 2)
        x1, x2 = (m1 + 1) / n, m2 / n
        u1 = margin_minus_p1 - k * (x1 + x2 * (1.0 - alpha * x2)) * t
        x1, x2 = m1 / n, (m2 + 1) / n
        w = alpha * x2
        load = x1 + x2 * (1.0 - alpha * x2)
        u2 = margin_minus_p1 - w * dV - p2 - ((1.0 - w) * k * load + w * beta) * t
        if u1 >= u2 and u1 >= 0.0:
            new = 1
        elif u2 > u1 and u2 >= 0.0:
            new = 2
        else:
            new = 0
        if new != old:
            n1 += (new == 1) - (old == 1)
            n2 += (new == 2) - (old == 2)
            labels[i] = new
            changes += 1
    return changes
