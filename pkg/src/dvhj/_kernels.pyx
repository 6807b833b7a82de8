# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping loop for the radial scheme.

Must stay operation-for-operation identical to ``_fallback.advance``.
"""

from libc.math cimport pow, INFINITY
from libc.string cimport memcpy

cdef extern from "_ftz.h":
    unsigned int dvhj_ftz_on() nogil
    void dvhj_csr_restore(unsigned int old) nogil

cdef extern from "_stencil.h":
    ctypedef struct dvhj_coef:
        double inv_dr, dt, eps2, eps_q, q, half_q, half_pm2, pm2
    double dvhj_sweep(const double *cu, double *co, const double *wp, const double *wm,
                      const double *wq, long na, const dvhj_coef *c, double *gmax_out,
                      int fmode, int smode, int son, int flat) nogil

cdef long REMEASURE = 100


cdef double _stable_dt(double G, double dr, double eps, double p, double q, int N,
                       double cfl, bint source_on) noexcept nogil:
    cdef double eps2 = eps * eps
    cdef double D, L, denom
    if eps2 == 0.0:
        D = (p - 1.0) * pow(G, p - 2.0)
    else:
        D = ((p - 1.0) * G * G + eps2) * pow(G * G + eps2, (p - 4.0) / 2.0)
    denom = 2.0 * N * D / (dr * dr)
    if source_on:
        if eps2 == 0.0:
            L = q * pow(G, q - 1.0)
        else:
            L = q * G * pow(G * G + eps2, (q - 2.0) / 2.0)
        denom = denom + (L + 1e-300) / dr
    if denom == 0.0:
        return INFINITY
    return cfl / denom


cdef bint _finite(double *v, Py_ssize_t na) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(na):
        if not (v[i] <= 1e300):
            return False
    return True


def stable_dt_value(double G, double dr, double eps, double p, double q, int N,
                    double cfl, bint source_on):
    return _stable_dt(G, dr, eps, p, q, N, cfl, source_on)


def advance(double[::1] u, double[::1] work, double[::1] wp, double[::1] wm, double[::1] wq,
            double t, double t_end, double dr, double eps, double p, double q, int N,
            bint source_on, double cfl, double G, long n_active, long step_count,
            int flux_mode, int source_mode):
    """Step ``u`` in place from ``t`` to ``t_end``.

    Returns ``(t, n_active, G, steps, step_count, source_integral, status)``;
    status 1 means a non-finite or overflowing value appeared. The check runs
    every ``REMEASURE`` steps and on exit, so ``u`` is then unusable.
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef double *src_buf = &u[0]
    cdef double *dst_buf = &work[0]
    cdef double *tmp
    cdef dvhj_coef c
    cdef double dt_stable = _stable_dt(G, dr, eps, p, q, N, cfl, source_on)
    cdef double dt, gmax, s_int, total_src = 0.0
    cdef long na = n_active
    cdef long steps = 0
    cdef int status = 0
    cdef bint clipped
    cdef int flat = N == 1
    cdef unsigned int csr

    c.inv_dr = 1.0 / dr
    c.eps2 = eps * eps
    c.eps_q = pow(eps, q)
    c.q = q
    c.half_q = q / 2.0
    c.half_pm2 = (p - 2.0) / 2.0
    c.pm2 = p - 2.0

    with nogil:
        csr = dvhj_ftz_on()
        while t < t_end:
            dt = dt_stable
            clipped = t + dt >= t_end
            if clipped:
                dt = t_end - t
            c.dt = dt
            s_int = dvhj_sweep(src_buf, dst_buf, &wp[0], &wm[0], &wq[0], na, &c, &gmax,
                               flux_mode, source_mode, source_on, flat)
            total_src = total_src + dt * s_int
            steps += 1
            step_count += 1
            if clipped:
                t = t_end
            else:
                t = t + dt
            tmp = src_buf
            src_buf = dst_buf
            dst_buf = tmp
            # support grows by at most one node per step
            if src_buf[na - 1] > 0.0 and na < n - 1:
                na = na + 1
            # lipschitz bound: raised at once if exceeded, lowered only at re-measure points
            if step_count % REMEASURE == 0 and not _finite(src_buf, na):
                status = 1
                break
            if gmax > G or step_count % REMEASURE == 0:
                if gmax != G:
                    G = gmax
                    dt_stable = _stable_dt(G, dr, eps, p, q, N, cfl, source_on)
        if status == 0 and not _finite(src_buf, na):
            status = 1
        dvhj_csr_restore(csr)
        if src_buf != &u[0]:
            memcpy(&u[0], src_buf, n * sizeof(double))

    return t, na, G, steps, step_count, total_src, status
