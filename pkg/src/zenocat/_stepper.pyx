# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# cython: language_level=3
"""Compiled Dormand-Prince 5(4) stepper over sparse Liouvillian terms.

Twin of ``_stepper_py`` (same tableau, controller constants and dense
output); the hot loops are plain C over CSR arrays and release the GIL
except when a coefficient is a Python callable.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, fmax, fmin, pow, sqrt

from .envelopes import PiecewisePoly
from .errors import StiffnessError

BACKEND_NAME = "compiled"

cdef double C2 = 1.0 / 5.0
cdef double C3 = 3.0 / 10.0
cdef double C4 = 4.0 / 5.0
cdef double C5 = 8.0 / 9.0

cdef double[:, ::1] A_TAB = np.array(
    [
        [0, 0, 0, 0, 0, 0],
        [1.0 / 5.0, 0, 0, 0, 0, 0],
        [3.0 / 40.0, 9.0 / 40.0, 0, 0, 0, 0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0, 0, 0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0, 0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ],
    dtype=np.float64,
)

cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0

cdef double BETA = 0.04
cdef double EXPO = 0.2 - 0.75 * BETA
cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 10.0
cdef double HMIN_REL = 1e-14


cdef void csr_set(const double complex[::1] data, const int[::1] indices,
                  const int[::1] indptr, const double complex[::1] x,
                  double complex[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double complex acc
    for i in range(out.shape[0]):
        acc = 0
        for k in range(indptr[i], indptr[i + 1]):
            acc = acc + data[k] * x[indices[k]]
        out[i] = acc


cdef void csr_acc(const double complex[::1] data, const int[::1] indices,
                  const int[::1] indptr, const double complex[::1] x,
                  double complex[::1] out, double scale) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double complex acc
    for i in range(out.shape[0]):
        acc = 0
        for k in range(indptr[i], indptr[i + 1]):
            acc = acc + data[k] * x[indices[k]]
        out[i] = out[i] + scale * acc


cdef double poly_eval(const double[::1] breaks, Py_ssize_t nb,
                      const double[:, ::1] coefs, double t) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid, seg
    cdef double tc, local, val
    cdef Py_ssize_t ncoef = coefs.shape[1]
    tc = t
    if tc < breaks[0]:
        tc = breaks[0]
    elif tc > breaks[nb - 1]:
        tc = breaks[nb - 1]
    lo = 0
    hi = nb - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if breaks[mid] <= tc:
            lo = mid
        else:
            hi = mid
    seg = lo
    local = tc - breaks[seg]
    val = 0.0
    for mid in range(ncoef - 1, -1, -1):
        val = val * local + coefs[seg, mid]
    return val


cdef class _Terms:
    """Dynamic Liouvillian terms with polynomial or callable coefficients."""
    cdef list datas, indices, indptrs     # CSR arrays per term
    cdef list poly_breaks, poly_coefs     # memoryview-compatible arrays or None
    cdef list callables                   # python callables or None
    cdef int n

    def __init__(self, term_coeffs, term_mats):
        self.n = len(term_mats)
        self.datas, self.indices, self.indptrs = [], [], []
        self.poly_breaks, self.poly_coefs, self.callables = [], [], []
        for coeff, mat in zip(term_coeffs, term_mats):
            self.datas.append(np.ascontiguousarray(mat.data, dtype=np.complex128))
            self.indices.append(np.ascontiguousarray(mat.indices, dtype=np.int32))
            self.indptrs.append(np.ascontiguousarray(mat.indptr, dtype=np.int32))
            if isinstance(coeff, PiecewisePoly):
                self.poly_breaks.append(np.ascontiguousarray(coeff.breaks, dtype=np.float64))
                self.poly_coefs.append(np.ascontiguousarray(coeff.coeffs, dtype=np.float64))
                self.callables.append(None)
            else:
                self.poly_breaks.append(None)
                self.poly_coefs.append(None)
                self.callables.append(coeff)

    cdef double coeff_at(self, int j, double t):
        cdef double[::1] br
        cdef double[:, ::1] co
        if self.callables[j] is None:
            br = self.poly_breaks[j]
            co = self.poly_coefs[j]
            return poly_eval(br, br.shape[0], co, t)
        return float(self.callables[j](t))

    cdef void rhs(self, const double complex[::1] sdata, const int[::1] sind,
                  const int[::1] sptr, double t, const double complex[::1] y,
                  double complex[::1] out):
        cdef int j
        cdef double c
        cdef double complex[::1] d
        cdef int[::1] ii
        cdef int[::1] pp
        csr_set(sdata, sind, sptr, y, out)
        for j in range(self.n):
            c = self.coeff_at(j, t)
            if c != 0.0:
                d = self.datas[j]
                ii = self.indices[j]
                pp = self.indptrs[j]
                csr_acc(d, ii, pp, y, out, c)


cdef void stage_input(double complex[::1] out, const double complex[::1] y,
                      double h, const double[:] arow, int nst,
                      const double complex[:, ::1] K) noexcept nogil:
    cdef Py_ssize_t i, s
    cdef double c
    for i in range(out.shape[0]):
        out[i] = y[i]
    for s in range(nst):
        c = h * arow[s]
        if c != 0.0:
            for i in range(out.shape[0]):
                out[i] = out[i] + c * K[s, i]


cdef double error_norm(const double complex[:, ::1] K, const double complex[::1] y,
                       const double complex[::1] ynew, double h,
                       double rtol, double atol) noexcept nogil:
    cdef Py_ssize_t i, n = y.shape[0]
    cdef double complex e
    cdef double sk, mag0, mag1, acc = 0.0
    for i in range(n):
        e = h * (E1 * K[0, i] + E3 * K[2, i] + E4 * K[3, i]
                 + E5 * K[4, i] + E6 * K[5, i] + E7 * K[6, i])
        mag0 = sqrt(y[i].real * y[i].real + y[i].imag * y[i].imag)
        mag1 = sqrt(ynew[i].real * ynew[i].real + ynew[i].imag * ynew[i].imag)
        sk = atol + rtol * fmax(mag0, mag1)
        acc += (e.real * e.real + e.imag * e.imag) / (sk * sk)
    return sqrt(acc / n)


cdef void hermite(double complex[::1] out, double theta, double h,
                  const double complex[::1] y0, const double complex[::1] y1,
                  const double complex[::1] f0, const double complex[::1] f1) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a = 1.0 - theta
    cdef double b = theta * (theta - 1.0)
    cdef double c1 = 1.0 - 2.0 * theta
    cdef double c2 = (theta - 1.0) * h
    cdef double c3 = theta * h
    for i in range(out.shape[0]):
        out[i] = (a * y0[i] + theta * y1[i]
                  + b * (c1 * (y1[i] - y0[i]) + c2 * f0[i] + c3 * f1[i]))


cdef void obs_dots(const double complex[:, ::1] rows, const double complex[::1] y,
                   double complex[:, ::1] exps, Py_ssize_t col) noexcept nogil:
    cdef Py_ssize_t o, i
    cdef double complex acc
    for o in range(rows.shape[0]):
        acc = 0
        for i in range(rows.shape[1]):
            acc = acc + rows[o, i] * y[i]
        exps[o, col] = acc


cdef double rms_scaled(const double complex[::1] v, const double complex[::1] ref,
                       double rtol, double atol) noexcept nogil:
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double sk, mag, acc = 0.0
    for i in range(n):
        sk = atol + rtol * sqrt(ref[i].real * ref[i].real + ref[i].imag * ref[i].imag)
        mag = sqrt(v[i].real * v[i].real + v[i].imag * v[i].imag)
        acc += (mag / sk) * (mag / sk)
    return sqrt(acc / n)


def solve(dim, static, term_coeffs, term_mats, breakpoints, y0, t_grid,
          rtol, atol, max_step, obs_rows, store_states):
    """Same contract as zenocat._stepper_py.solve."""
    cdef Py_ssize_t D = len(y0)
    cdef double complex[::1] sdata = np.ascontiguousarray(static.data, dtype=np.complex128)
    cdef int[::1] sind = np.ascontiguousarray(static.indices, dtype=np.int32)
    cdef int[::1] sptr = np.ascontiguousarray(static.indptr, dtype=np.int32)
    cdef _Terms terms = _Terms(term_coeffs, term_mats)

    cdef double complex[::1] y = np.array(y0, dtype=np.complex128)
    cdef double complex[::1] ynew = np.empty(D, dtype=np.complex128)
    cdef double complex[::1] ytmp = np.empty(D, dtype=np.complex128)
    cdef double complex[:, ::1] K = np.empty((7, D), dtype=np.complex128)
    cdef double[::1] grid = np.ascontiguousarray(t_grid, dtype=np.float64)
    cdef double complex[:, ::1] rows = np.ascontiguousarray(obs_rows, dtype=np.complex128)

    cdef Py_ssize_t n_t = grid.shape[0]
    cdef Py_ssize_t n_obs = rows.shape[0]
    exps_arr = np.empty((n_obs, n_t), dtype=np.complex128)
    cdef double complex[:, ::1] exps = exps_arr
    states_arr = np.empty((n_t, D), dtype=np.complex128) if store_states else None
    cdef double complex[:, ::1] states = states_arr if store_states else np.empty((1, 1), dtype=np.complex128)
    cdef bint keep_states = bool(store_states)

    cdef double t = grid[0]
    cdef double t_end = grid[n_t - 1]
    cdef double hmax = float(max_step)
    cdef double rt = float(rtol), at = float(atol)
    cdef long nfev = 0, naccept = 0, nreject = 0
    cdef Py_ssize_t ptr = 0, i, ib = 0
    cdef double err, fac, errold = 1e-4, h, d0, d1, d2, dm, h0, h1, tg, theta, t_new
    cdef bint just_rejected = False

    if n_t >= 1 and grid[0] == t:
        obs_dots(rows, y, exps, 0)
        if keep_states:
            for i in range(D):
                states[0, i] = y[i]
        ptr = 1
    if ptr >= n_t:
        return exps_arr, states_arr, {"nfev": 0, "naccepted": 0, "nrejected": 0}

    bps_arr = np.asarray(
        [b for b in np.asarray(breakpoints, dtype=float) if t < b < t_end], dtype=float
    )
    cdef double[::1] bps = bps_arr
    cdef Py_ssize_t n_bp = bps.shape[0]

    # initial step heuristic (identical to the python twin)
    terms.rhs(sdata, sind, sptr, t, y, K[0])
    nfev += 1
    d0 = rms_scaled(y, y, rt, at)
    d1 = rms_scaled(K[0], y, rt, at)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    for i in range(D):
        ytmp[i] = y[i] + h0 * K[0, i]
    terms.rhs(sdata, sind, sptr, t + h0, ytmp, K[1])
    nfev += 1
    for i in range(D):
        ytmp[i] = K[1, i] - K[0, i]
    d2 = rms_scaled(ytmp, y, rt, at) / h0
    dm = fmax(d1, d2)
    if dm <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / dm, 0.2)
    h = fmin(fmin(100 * h0, h1), fmin(hmax, t_end - t))

    while t < t_end:
        h = fmin(h, fmin(hmax, t_end - t))
        while ib < n_bp and bps[ib] <= t + HMIN_REL * fmax(fabs(t), 1.0):
            ib += 1
        if ib < n_bp and t + h > bps[ib]:
            h = bps[ib] - t
        if h < HMIN_REL * fmax(fabs(t), 1.0):
            raise StiffnessError(
                f"step size underflow at t = {t:.6g} us (h = {h:.3g}); the model "
                "is too stiff for explicit stepping at these tolerances"
            )

        stage_input(ytmp, y, h, A_TAB[1], 1, K)
        terms.rhs(sdata, sind, sptr, t + C2 * h, ytmp, K[1])
        stage_input(ytmp, y, h, A_TAB[2], 2, K)
        terms.rhs(sdata, sind, sptr, t + C3 * h, ytmp, K[2])
        stage_input(ytmp, y, h, A_TAB[3], 3, K)
        terms.rhs(sdata, sind, sptr, t + C4 * h, ytmp, K[3])
        stage_input(ytmp, y, h, A_TAB[4], 4, K)
        terms.rhs(sdata, sind, sptr, t + C5 * h, ytmp, K[4])
        stage_input(ytmp, y, h, A_TAB[5], 5, K)
        terms.rhs(sdata, sind, sptr, t + h, ytmp, K[5])
        stage_input(ynew, y, h, A_TAB[6], 6, K)
        terms.rhs(sdata, sind, sptr, t + h, ynew, K[6])
        nfev += 6

        err = error_norm(K, y, ynew, h, rt, at)

        if err <= 1.0:
            t_new = t + h
            while ptr < n_t and grid[ptr] <= t_new:
                tg = grid[ptr]
                if tg == t_new:
                    obs_dots(rows, ynew, exps, ptr)
                    if keep_states:
                        for i in range(D):
                            states[ptr, i] = ynew[i]
                else:
                    theta = (tg - t) / h
                    hermite(ytmp, theta, h, y, ynew, K[0], K[6])
                    obs_dots(rows, ytmp, exps, ptr)
                    if keep_states:
                        for i in range(D):
                            states[ptr, i] = ytmp[i]
                ptr += 1
            if err > 0.0:
                fac = SAFETY * pow(err, -EXPO) * pow(errold, BETA)
            else:
                fac = FAC_MAX
            fac = fmin(1.0 if just_rejected else FAC_MAX, fmax(FAC_MIN, fac))
            errold = fmax(err, 1e-4)
            t = t_new
            for i in range(D):
                y[i] = ynew[i]
                K[0, i] = K[6, i]
            h = h * fac
            naccept += 1
            just_rejected = False
        else:
            h = h * fmin(1.0, fmax(0.1, SAFETY * pow(err, -0.2)))
            nreject += 1
            just_rejected = True

    return exps_arr, states_arr, {"nfev": nfev, "naccepted": naccept, "nrejected": nreject}
