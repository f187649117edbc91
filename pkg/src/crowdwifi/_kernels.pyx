# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Stage II solver and agent update loop.

The subscription equilibrium is found on the grid x2 = j/M.  Everything that
does not depend on prices (coverage, boundary load, the boundary indifference
curve H) is tabulated once; per-price work is either a cached table lookup or
a short leftward scan from the largest admissible x2.
"""
from libc.math cimport sqrt, fabs, expm1, log1p, INFINITY
from scipy.special.cython_special cimport ndtr, ndtri

import numpy as np

ctypedef double (*root_fn)(void*, double) noexcept nogil


cdef struct Law:
    int kind
    double a
    double b
    double lo
    double mass
    double norm


cdef struct Model:
    double k
    double D0
    double alpha
    double beta
    double dV
    double V1
    double V2
    double p1
    Law law


cdef inline double clamp01(double v) noexcept nogil:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


cdef double law_cdf(const Law* d, double t) noexcept nogil:
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    if d.kind == 0:
        return t
    if d.kind == 1:
        return clamp01((ndtr((t - d.a) / d.b) - d.lo) / d.mass)
    if d.kind == 2:
        return clamp01(expm1(-d.a * t) / d.norm)
    return clamp01(-expm1(-d.a * log1p(t / d.b)) / d.norm)


cdef double law_ppf(const Law* d, double u) noexcept nogil:
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    if d.kind == 0:
        return u
    if d.kind == 1:
        return clamp01(d.a + d.b * ndtri(d.lo + u * d.mass))
    if d.kind == 2:
        return clamp01(-log1p(u * d.norm) / d.a)
    return clamp01(d.b * expm1(-log1p(-u * d.norm) / d.a))


cdef double brent(root_fn f, void* ctx, double a, double b, double fa, double fb,
                  double xtol) noexcept nogil:
    """Brent's zeroin on [a, b]; the caller guarantees fa and fb differ in sign."""
    cdef double c = a, fc = fa, d = b - a, e = d
    cdef double tol, m, p, q, r, s
    cdef int it
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    for it in range(200):
        if (fb > 0.0) == (fc > 0.0):
            c = a
            fc = fa
            d = b - a
            e = d
        if fabs(fc) < fabs(fb):
            a = b
            b = c
            c = a
            fa = fb
            fb = fc
            fc = fa
        tol = 2.0 * 2.2e-16 * fabs(b) + 0.5 * xtol
        m = 0.5 * (c - b)
        if fabs(m) <= tol or fb == 0.0:
            return b
        if fabs(e) >= tol and fabs(fa) > fabs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            if 2.0 * p < 3.0 * m * q - fabs(tol * q) and p < fabs(0.5 * e * q):
                e = d
                d = p / q
            else:
                d = m
                e = m
        else:
            d = m
            e = m
        a = b
        fa = fb
        if fabs(d) > tol:
            b += d
        elif m > 0.0:
            b += tol
        else:
            b -= tol
        fb = f(ctx, b)
    return b


cdef double bracketed(root_fn f, void* ctx, double a, double b, double xtol) noexcept nogil:
    cdef double fa = f(ctx, a), fb = f(ctx, b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0.0) == (fb > 0.0):
        # no sign change (rounding at a grid point); keep the smaller defect
        return a if fabs(fa) <= fabs(fb) else b
    return brent(f, ctx, a, b, fa, fb, xtol)


# -- model pieces ------------------------------------------------------------

cdef struct Query:
    Model* m
    double x2
    double D
    double p2
    double P


cdef double boundary_defect(void* raw, double x) noexcept nogil:
    # H(x) - p2 with H the boundary indifference curve
    cdef Query* q = <Query*> raw
    cdef Model* m = q.m
    cdef double w = m.alpha * x
    return (w * (m.k * (1.0 - m.alpha * x * x) - m.beta) * law_ppf(&m.law, 1.0 - x)
            - w * m.dV - q.p2)


cdef double boundary_slack(Model* m, double x, double D, double p2) noexcept nogil:
    cdef double w = m.alpha * x
    return D - w * m.dV - p2 - ((1.0 - w) * m.k * (1.0 - m.alpha * x * x) + w * m.beta)


cdef double indifference(void* raw, double x1) noexcept nogil:
    cdef Query* q = <Query*> raw
    cdef Model* m = q.m
    cdef double w = m.alpha * q.x2
    cdef double load = x1 + q.x2 * (1.0 - m.alpha * q.x2)
    return w * (m.k * load - m.beta) * law_ppf(&m.law, x1) - q.P


cdef double inner_x1(Model* m, double x2, double P) noexcept nogil:
    """5G-only fraction that makes the inner cutoff user indifferent."""
    cdef double w = m.alpha * x2
    cdef double c0 = x2 * (1.0 - m.alpha * x2)
    cdef double hi = 1.0 - x2, lo, a, b, disc, x1
    cdef Query q
    if hi <= 0.0:
        return 0.0
    if m.law.kind == 0:
        a = w * m.k
        b = w * (m.k * c0 - m.beta)
        disc = sqrt(b * b + 4.0 * a * P)
        if b >= 0.0:
            x1 = 2.0 * P / (b + disc) if b + disc > 0.0 else 0.0
        else:
            x1 = (disc - b) / (2.0 * a)
        if x1 < 0.0:
            return 0.0
        return x1 if x1 < hi else hi
    lo = m.beta / m.k - c0
    if lo < 0.0:
        lo = 0.0
    if lo >= hi:
        return hi
    q.m = m
    q.x2 = x2
    q.P = P
    if indifference(&q, hi) <= 0.0:
        return hi
    return bracketed(indifference, &q, lo, hi, 1e-15)


cdef double participation(void* raw, double x2) noexcept nogil:
    """D minus the price-plus-congestion bill of the outer cutoff user."""
    cdef Query* q = <Query*> raw
    cdef Model* m = q.m
    cdef double w = m.alpha * x2
    cdef double P = q.p2 + w * m.dV
    cdef double x1 = inner_x1(m, x2, P)
    cdef double load = x1 + x2 * (1.0 - m.alpha * x2)
    return q.D - P - ((1.0 - w) * m.k * load + w * m.beta) * law_ppf(&m.law, x1 + x2)


cdef double outer_bill(void* raw, double x1) noexcept nogil:
    # E(x1) - D at fixed x2 with p2 eliminated through the indifference condition
    cdef Query* q = <Query*> raw
    cdef Model* m = q.m
    cdef double w = m.alpha * q.x2
    cdef double load = x1 + q.x2 * (1.0 - m.alpha * q.x2)
    return (w * (m.k * load - m.beta) * law_ppf(&m.law, x1)
            + ((1.0 - w) * m.k * load + w * m.beta) * law_ppf(&m.law, x1 + q.x2) - q.D)


cdef double benchmark_gap(void* raw, double t) noexcept nogil:
    cdef Query* q = <Query*> raw
    return q.m.k * law_cdf(&q.m.law, t) * t - q.D


cdef void no_wifi_share(Model* m, double D, double* x1, double* code, double* res) noexcept nogil:
    cdef Query q
    cdef double t
    if D >= m.k:
        x1[0] = 1.0
        code[0] = 2
        res[0] = 0.0
        return
    if D <= 0.0:
        x1[0] = 0.0
        code[0] = 4
        res[0] = 0.0
        return
    code[0] = 3
    if m.law.kind == 0:
        x1[0] = sqrt(D / m.k)
        res[0] = fabs(m.k * x1[0] * x1[0] - D)
        return
    q.m = m
    q.D = D
    t = bracketed(benchmark_gap, &q, 0.0, 1.0, 1e-15)
    x1[0] = law_cdf(&m.law, t)
    res[0] = fabs(m.k * x1[0] * t - D)


cdef class Stage2Kernel:
    """Grid-based Stage II solver for one market and one sensitivity law.

    Solution codes: 0 full-market split, 1 interior split, 2 5G-only full,
    3 5G-only interior, 4 empty.
    """
    cdef Model m
    cdef readonly int M
    cdef readonly bint inert
    cdef double[::1] xs
    cdef double[::1] H
    cdef double[::1] phi
    cdef double[::1] p2int
    cdef double phi_key
    cdef double p2int_key
    cdef bint has_phi
    cdef bint has_p2int

    def __init__(self, double k, double margin, double alpha, double beta, double V1,
                 double V2, int kind, double a, double b, double lo, double mass,
                 double norm, int M):
        cdef int j
        cdef Query q
        if M < 2:
            raise ValueError("grid needs at least two cells")
        self.M = M
        self.m.k = k
        self.m.D0 = margin
        self.m.alpha = alpha
        self.m.beta = beta
        self.m.V1 = V1
        self.m.V2 = V2
        self.m.dV = V1 - V2
        self.m.law.kind = kind
        self.m.law.a = a
        self.m.law.b = b
        self.m.law.lo = lo
        self.m.law.mass = mass
        self.m.law.norm = norm
        self.inert = alpha == 0.0 or beta >= k
        self.xs = np.arange(M + 1, dtype=float) / M
        self.H = np.empty(M + 1)
        self.phi = np.empty(M + 1)
        self.p2int = np.empty(M + 1)
        self.has_phi = False
        self.has_p2int = False
        q.m = &self.m
        q.p2 = 0.0
        for j in range(M + 1):
            self.H[j] = boundary_defect(&q, self.xs[j])

    def cdf(self, double t):
        return law_cdf(&self.m.law, t)

    def ppf(self, double u):
        return law_ppf(&self.m.law, u)

    def boundary_table(self):
        return np.asarray(self.H).copy()

    cdef void build_phi(self, double p2) noexcept nogil:
        cdef int j
        cdef Query q
        q.m = &self.m
        q.D = 0.0
        q.p2 = p2
        for j in range(self.M + 1):
            if j == 0 or self.H[j] < p2:
                self.phi[j] = INFINITY
            else:
                self.phi[j] = -participation(&q, self.xs[j])
        self.phi_key = p2
        self.has_phi = True

    cdef void build_p2int(self, double p1) noexcept nogil:
        cdef Model* m = &self.m
        cdef double D = m.D0 - p1, x2, w, c0, lo, hi, x1, a1, a0, disc, e_lo, e_hi
        cdef int j
        cdef Query q
        q.m = m
        q.D = D
        self.p2int[0] = -INFINITY
        for j in range(1, self.M + 1):
            x2 = self.xs[j]
            w = m.alpha * x2
            c0 = x2 * (1.0 - m.alpha * x2)
            hi = 1.0 - x2
            lo = m.beta / m.k - c0
            if lo < 0.0:
                lo = 0.0
            if lo > hi:
                self.p2int[j] = -INFINITY
                continue
            q.x2 = x2
            e_lo = outer_bill(&q, lo)
            e_hi = outer_bill(&q, hi)
            if e_lo > 0.0:
                self.p2int[j] = -INFINITY
                continue
            if e_hi < 0.0:
                self.p2int[j] = INFINITY
                continue
            if m.law.kind == 0:
                a1 = m.k * (c0 + (1.0 - w) * x2)
                a0 = (1.0 - w) * m.k * c0 * x2 + w * m.beta * x2 - D
                disc = sqrt(a1 * a1 - 4.0 * m.k * a0)
                if a1 > 0.0:
                    x1 = -2.0 * a0 / (a1 + disc)
                else:
                    x1 = (disc - a1) / (2.0 * m.k)
                if x1 < lo:
                    x1 = lo
                elif x1 > hi:
                    x1 = hi
            else:
                x1 = brent(outer_bill, &q, lo, hi, e_lo, e_hi, 1e-15)
            self.p2int[j] = (w * (m.k * (x1 + c0) - m.beta) * law_ppf(&m.law, x1)
                             - w * m.dV)
        self.p2int_key = p1
        self.has_p2int = True

    cdef bint grid_sign(self, int mode, int i, double D, double p2) noexcept nogil:
        """True when the outer cutoff user weakly wants in at grid point i."""
        cdef Query q
        if mode == 0:
            return D - self.phi[i] >= 0.0
        if mode == 1:
            return self.p2int[i] >= p2
        q.m = &self.m
        q.D = D
        q.p2 = p2
        return participation(&q, self.xs[i]) >= 0.0

    cdef void locate(self, double p1, double p2, int mode, double* out) noexcept nogil:
        cdef Model* m = &self.m
        cdef double D = m.D0 - p1
        cdef double xR, xL, prev, x2, x1, P, w, load
        cdef int j = self.M, i
        cdef Query q
        q.m = m
        q.D = D
        q.p2 = p2
        if not self.inert:
            while j >= 1:
                if self.H[j] < p2:
                    j -= 1
                    continue
                if j == self.M:
                    xR = 1.0
                    i = j - 1
                else:
                    xR = bracketed(boundary_defect, &q, self.xs[j], self.xs[j + 1], 1e-15)
                    i = j
                if boundary_slack(m, xR, D, p2) >= 0.0:
                    out[0] = 1.0 - xR
                    out[1] = xR
                    out[2] = 0
                    out[3] = fabs(boundary_defect(&q, xR))
                    return
                prev = xR
                x2 = -1.0
                while i >= 1 and self.H[i] >= p2:
                    if self.grid_sign(mode, i, D, p2):
                        x2 = bracketed(participation, &q, self.xs[i], prev, 1e-15)
                        break
                    prev = self.xs[i]
                    i -= 1
                if x2 < 0.0 and i >= 1:
                    xL = bracketed(boundary_defect, &q, self.xs[i], self.xs[i + 1], 1e-15)
                    if participation(&q, xL) >= 0.0:
                        x2 = bracketed(participation, &q, xL, prev, 1e-15)
                if x2 > 0.0:
                    w = m.alpha * x2
                    P = p2 + w * m.dV
                    x1 = inner_x1(m, x2, P)
                    q.x2 = x2
                    q.P = P
                    out[0] = x1
                    out[1] = x2
                    out[2] = 1
                    out[3] = fabs(participation(&q, x2))
                    if fabs(indifference(&q, x1)) > out[3]:
                        out[3] = fabs(indifference(&q, x1))
                    if x1 + x2 >= 1.0:
                        out[2] = 0
                    return
                j = i
        out[1] = 0.0
        no_wifi_share(m, D, &out[0], &out[2], &out[3])

    def solve(self, double p1, double p2):
        """Return ``(x1, x2, code, residual)`` for one price pair."""
        cdef double out[4]
        cdef int mode = 2
        if self.has_phi and self.phi_key == p2:
            mode = 0
        elif self.has_p2int and self.p2int_key == p1:
            mode = 1
        with nogil:
            self.locate(p1, p2, mode, out)
        return out[0], out[1], int(out[2]), out[3]

    def solve_p1_batch(self, double[::1] p1s, double p2):
        """Solve for many 5G prices against one WiFi price."""
        cdef Py_ssize_t n = p1s.shape[0], i
        res = np.empty((n, 4))
        cdef double[:, ::1] r = res
        with nogil:
            if not (self.has_phi and self.phi_key == p2):
                self.build_phi(p2)
            for i in range(n):
                self.locate(p1s[i], p2, 0, &r[i, 0])
        return res

    def solve_p2_batch(self, double p1, double[::1] p2s):
        """Solve for many WiFi prices against one 5G price."""
        cdef Py_ssize_t n = p2s.shape[0], i
        res = np.empty((n, 4))
        cdef double[:, ::1] r = res
        with nogil:
            if not (self.has_p2int and self.p2int_key == p1):
                self.build_p2int(p1)
            for i in range(n):
                self.locate(p1, p2s[i], 1, &r[i, 0])
        return res


def sequential_round(double[::1] thetas, signed char[::1] labels, const long[::1] order,
                     double k, double margin_minus_p1, double alpha, double beta,
                     double dV, double p2):
    """One random-sequential best-response sweep; returns the number of switches.

    Payoffs are measured relative to the reservation level, so ``margin_minus_p1``
    is V1 - u_bar - p1.  Each option is priced with the mover counted in it,
    otherwise a marginal agent keeps joining and leaving.  Ties keep the
    cheaper option.
    """
    cdef Py_ssize_t n = thetas.shape[0], idx, i
    cdef long n1 = 0, n2 = 0, m1, m2, changes = 0
    cdef double x1, x2, w, load, t, u1, u2
    cdef signed char new
    for i in range(n):
        if labels[i] == 1:
            n1 += 1
        elif labels[i] == 2:
            n2 += 1
    with nogil:
        for idx in range(n):
            i = order[idx]
            t = thetas[i]
            # counts of everybody else
            m1 = n1 - (labels[i] == 1)
            m2 = n2 - (labels[i] == 2)
            x1 = <double> (m1 + 1) / n
            x2 = <double> m2 / n
            u1 = margin_minus_p1 - k * (x1 + x2 * (1.0 - alpha * x2)) * t
            x1 = <double> m1 / n
            x2 = <double> (m2 + 1) / n
            w = alpha * x2
            load = x1 + x2 * (1.0 - alpha * x2)
            u2 = margin_minus_p1 - w * dV - p2 - ((1.0 - w) * k * load + w * beta) * t
            if u1 >= u2 and u1 >= 0.0:
                new = 1
            elif u2 > u1 and u2 >= 0.0:
                new = 2
            else:
                new = 0
            if new != labels[i]:
                if labels[i] == 1:
                    n1 -= 1
                elif labels[i] == 2:
                    n2 -= 1
                if new == 1:
                    n1 += 1
                elif new == 2:
                    n2 += 1
                labels[i] = new
                changes += 1
    return changes
