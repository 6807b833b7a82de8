/* One explicit sweep of the radial scheme over nodes 0 .. na-1.

   dvhj_sweep dispatches to copies of the body specialised on the exponent
   modes, the source switch, N == 1 and eps == 0, so the inner loop carries
   no invariant branches.  Must stay operation-for-operation identical to
   _fallback.advance. */
#ifndef DVHJ_STENCIL_H
#define DVHJ_STENCIL_H

#include <math.h>

#define DVHJ_TINY 1e-150

#if defined(__GNUC__)
#define DVHJ_INLINE static inline __attribute__((always_inline))
#else
#define DVHJ_INLINE static inline
#endif

typedef struct {
    double inv_dr, dt, eps2, eps_q, q, half_q, half_pm2, pm2;
} dvhj_coef;

DVHJ_INLINE double dvhj_flux(double g, int fmode, int e0, const dvhj_coef *c) {
    if (fmode == 1) return e0 ? fabs(g) * g : sqrt(g * g + c->eps2) * g;
    if (fmode == 2) return (g * g + c->eps2) * g;
    return e0 ? pow(fabs(g), c->pm2) * g : pow(g * g + c->eps2, c->half_pm2) * g;
}

DVHJ_INLINE double dvhj_source(double m, int smode, int e0, const dvhj_coef *c) {
    if (smode == 1) return e0 ? m * m : (m * m + c->eps2) - c->eps_q;
    return e0 ? pow(m, c->q) : pow(m * m + c->eps2, c->half_q) - c->eps_q;
}

DVHJ_INLINE double dvhj_sweep_body(const double *cu, double *co, const double *wp,
                                   const double *wm, const double *wq, long na,
                                   const dvhj_coef *c, double *gmax_out,
                                   int fmode, int smode, int son, int flat, int e0) {
    double gmax = 0.0, s_int = 0.0;
    const double inv_dr = c->inv_dr, dt = c->dt;
    /* mirror ghost at the axis */
    double gm = -((cu[1] - cu[0]) * inv_dr);
    double fm = dvhj_flux(gm, fmode, e0, c);
    for (long i = 0; i < na; i++) {
        double gp = (cu[i + 1] - cu[i]) * inv_dr;
        double fp = dvhj_flux(gp, fmode, e0, c);
        double agp = fabs(gp);
        double diff, val;
        gmax = agp > gmax ? agp : gmax;
        diff = flat ? (fp - fm) * inv_dr : (wp[i] * fp - wm[i] * fm) * inv_dr;
        if (son) {
            /* Godunov modulus for the concave -|xi|^q: max(-gm, gp, 0) */
            double m = -gm > gp ? -gm : gp;
            double src;
            m = m > 0.0 ? m : 0.0;
            src = dvhj_source(m, smode, e0, c);
            s_int = s_int + wq[i] * src;
            val = cu[i] + dt * (diff + src);
        } else {
            val = cu[i] + dt * diff;
        }
        co[i] = val < DVHJ_TINY ? 0.0 : val;
        gm = gp;
        fm = fp;
    }
    *gmax_out = gmax;
    return s_int;
}

#define DVHJ_CASE(F, S, SON, FLAT, E0) \
    return dvhj_sweep_body(cu, co, wp, wm, wq, na, c, gmax_out, F, S, SON, FLAT, E0)

#define DVHJ_E0(F, S, SON, FLAT) \
    if (e0) { DVHJ_CASE(F, S, SON, FLAT, 1); } else { DVHJ_CASE(F, S, SON, FLAT, 0); }

#define DVHJ_FLAT(F, S, SON) \
    if (flat) { DVHJ_E0(F, S, SON, 1) } else { DVHJ_E0(F, S, SON, 0) }

#define DVHJ_SON(F, S) \
    if (son) { DVHJ_FLAT(F, S, 1) } else { DVHJ_FLAT(F, 0, 0) }

#define DVHJ_SMODE(F) \
    if (smode == 1) { DVHJ_SON(F, 1) } else { DVHJ_SON(F, 0) }

/* returns the weighted source sum; stores max |forward difference| */
static double dvhj_sweep(const double *cu, double *co, const double *wp, const double *wm,
                         const double *wq, long na, const dvhj_coef *c, double *gmax_out,
                         int fmode, int smode, int son, int flat) {
    int e0 = c->eps2 == 0.0;
    if (fmode == 1) { DVHJ_SMODE(1) }
    if (fmode == 2) { DVHJ_SMODE(2) }
    DVHJ_SMODE(0)
}

#endif
