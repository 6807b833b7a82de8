"""Pure-numpy twin of the compiled stepping loop.

Mirrors ``_kernels.pyx`` operation for operation so both paths agree bit for
bit; any change here must be made there too.
"""

import math

import numpy as np

TINY = 1e-150
REMEASURE = 100

MODE_GENERIC = 0
MODE_P3 = 1
MODE_P4 = 2
MODE_Q2 = 1


def _flux(g, mode, eps2, half_pm2, pm2):
    if mode == MODE_P3:
        if eps2 == 0.0:
            return np.abs(g) * g
        return np.sqrt(g * g + eps2) * g
    if mode == MODE_P4:
        return (g * g + eps2) * g
    if eps2 == 0.0:
        return np.power(np.abs(g), pm2) * g
    return np.power(g * g + eps2, half_pm2) * g


def _source(m, mode, eps2, eps_q, q, half_q):
    if mode == MODE_Q2:
        if eps2 == 0.0:
            return m * m
        return (m * m + eps2) - eps_q
    if eps2 == 0.0:
        return np.power(m, q)
    return np.power(m * m + eps2, half_q) - eps_q


def stable_dt_value(G, dr, eps, p, q, N, cfl, source_on):
    eps2 = eps * eps
    if eps2 == 0.0:
        D = (p - 1.0) * math.pow(G, p - 2.0)
    else:
        D = ((p - 1.0) * G * G + eps2) * math.pow(G * G + eps2, (p - 4.0) / 2.0)
    denom = 2.0 * N * D / (dr * dr)
    if source_on:
        if eps2 == 0.0:
            L = q * math.pow(G, q - 1.0)
        else:
            L = q * G * math.pow(G * G + eps2, (q - 2.0) / 2.0)
        denom = denom + (L + 1e-300) / dr
    if denom == 0.0:
        return math.inf
    return cfl / denom


def _finite(v):
    return bool(np.all(v <= 1e300))


def godunov_modulus(gm, gp):
    """Gradient modulus of the Godunov Hamiltonian for ``-|ξ|^q``.

    ``gm``/``gp`` are backward/forward differences. The case formula (largest
    slope on a rising pair, zero at a discrete maximum, smallest slope
    otherwise) collapses to ``max(-gm, gp, 0)``.
    """
    return np.maximum(np.maximum(-gm, gp), 0.0)


def advance(u, work, wp, wm, wq, t, t_end, dr, eps, p, q, N, source_on, cfl, G,
            n_active, step_count, flux_mode, source_mode):
    n = u.shape[0]
    inv_dr = 1.0 / dr
    eps2 = eps * eps
    eps_q = math.pow(eps, q)
    half_pm2 = (p - 2.0) / 2.0
    pm2 = p - 2.0
    half_q = q / 2.0
    dt_stable = stable_dt_value(G, dr, eps, p, q, N, cfl, source_on)
    total_src = 0.0
    na = n_active
    steps = 0
    status = 0
    cur, nxt = u, work
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        while t < t_end:
            dt = dt_stable
            clipped = t + dt >= t_end
            if clipped:
                dt = t_end - t
            cu = cur[: na + 1]
            gp = (cu[1:] - cu[:-1]) * inv_dr
            fp = _flux(gp, flux_mode, eps2, half_pm2, pm2)
            gm = np.empty_like(gp)
            fm = np.empty_like(fp)
            gm[0] = -gp[0]
            fm[0] = _flux(gm[:1], flux_mode, eps2, half_pm2, pm2)[0]
            gm[1:] = gp[:-1]
            fm[1:] = fp[:-1]
            gmax = float(np.max(np.abs(gp)))
            diff = (wp[:na] * fp - wm[:na] * fm) * inv_dr
            if source_on:
                src = _source(godunov_modulus(gm, gp), source_mode, eps2, eps_q, q, half_q)
                # sequential summation, matching the compiled loop
                s_int = float(np.cumsum(wq[:na] * src)[-1])
                val = cu[:na] + dt * (diff + src)
            else:
                s_int = 0.0
                val = cu[:na] + dt * diff
            val[val < TINY] = 0.0
            nxt[:na] = val
            total_src = total_src + dt * s_int
            steps += 1
            step_count += 1
            t = t_end if clipped else t + dt
            cur, nxt = nxt, cur
            if cur[na - 1] > 0.0 and na < n - 1:
                na += 1
            if step_count % REMEASURE == 0 and not _finite(cur[:na]):
                status = 1
                break
            if gmax > G or step_count % REMEASURE == 0:
                if gmax != G:
                    G = gmax
                    dt_stable = stable_dt_value(G, dr, eps, p, q, N, cfl, source_on)
    if status == 0 and not _finite(cur[:na]):
        status = 1
    if cur is not u:
        u[:] = cur
    return t, na, G, steps, step_count, total_src, status
