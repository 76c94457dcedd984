"""Numba kernels for pairwise, panel, and Filon-type spectral sums.

Everything here works on unnormalized cf sums (no 1/n factors); callers
normalize.  Loop orders are fixed so reruns are bit-identical.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# degeneracy threshold for pair separations, relative to boundary size
_DEGEN = 1e-12


@njit(cache=True, nogil=True)
def pair_prefix_sums(x, bounds, out):
    """S(v) = sum_{l<m} sin(v*(x_l - x_m))/(x_l - x_m) at each v in bounds.

    Kahan-compensated, index-ascending.  The caller turns prefix values into
    block energies via n^-2 * (n*(b-a) + 2*(S(b)-S(a))).
    """
    n = x.shape[0]
    nb = bounds.shape[0]
    bmax = 1.0
    for j in range(nb):
        if abs(bounds[j]) > bmax:
            bmax = abs(bounds[j])
    comp = np.zeros(nb)
    for j in range(nb):
        out[j] = 0.0
    thresh = _DEGEN * bmax
    for l in range(n):
        xl = x[l]
        for m in range(l + 1, n):
            d = xl - x[m]
            if abs(d) < thresh:
                d2 = d * d
                for j in range(nb):
                    v = bounds[j]
                    y = v - v * v * v * d2 / 6.0 - comp[j]
                    t = out[j] + y
                    comp[j] = (t - out[j]) - y
                    out[j] = t
            else:
                inv = 1.0 / d
                for j in range(nb):
                    y = np.sin(bounds[j] * d) * inv - comp[j]
                    t = out[j] + y
                    comp[j] = (t - out[j]) - y
                    out[j] = t


@njit(cache=True, nogil=True)
def panel_cf_values(x, u0, w, npan, s, out_re, out_im):
    """Unnormalized cf sums sum_l exp(i*u*x_l) at Gauss-Legendre nodes of
    npan uniform panels of width w starting at u0.

    Node q of panel j sits at u0 + (j+0.5)*w + (w/2)*s[q].  The per-point
    phase advances panel to panel by one complex multiply, so trig calls are
    O(n*p) rather than O(n*npan*p).
    """
    n = x.shape[0]
    p = s.shape[0]
    h = 0.5 * w
    ere = np.empty((n, p))
    eim = np.empty((n, p))
    pre = np.empty(n)
    pim = np.empty(n)
    sre = np.empty(n)
    sim = np.empty(n)
    for l in range(n):
        xl = x[l]
        for q in range(p):
            a = h * s[q] * xl
            ere[l, q] = np.cos(a)
            eim[l, q] = np.sin(a)
        c0 = (u0 + h) * xl
        pre[l] = np.cos(c0)
        pim[l] = np.sin(c0)
        st = w * xl
        sre[l] = np.cos(st)
        sim[l] = np.sin(st)
    for j in range(npan):
        base = j * p
        for q in range(p):
            out_re[base + q] = 0.0
            out_im[base + q] = 0.0
        for l in range(n):
            pr = pre[l]
            pi = pim[l]
            for q in range(p):
                er = ere[l, q]
                ei = eim[l, q]
                out_re[base + q] += pr * er - pi * ei
                out_im[base + q] += pr * ei + pi * er
            pre[l] = pr * sre[l] - pi * sim[l]
            pim[l] = pr * sim[l] + pi * sre[l]


@njit(cache=True, nogil=True)
def ecf_sums(x, us, out_re, out_im):
    """Unnormalized cf sums at arbitrary frequencies."""
    n = x.shape[0]
    m = us.shape[0]
    for j in range(m):
        u = us[j]
        ar = 0.0
        ai = 0.0
        for l in range(n):
            a = u * x[l]
            ar += np.cos(a)
            ai += np.sin(a)
        out_re[j] = ar
        out_im[j] = ai


@njit(cache=True)
def spherical_j(z, jmax, out):
    """j_0..j_jmax at z >= 0: series near 0, Miller downward for moderate z,
    upward recurrence once it is stable (z well above jmax)."""
    if z < 1e-10:
        z2 = z * z
        fac = 1.0
        zm = 1.0
        for m in range(jmax + 1):
            if m > 0:
                fac = fac / (2.0 * m + 1.0)
                zm = zm * z
            else:
                fac = 1.0
            out[m] = zm * fac * (1.0 - z2 / (2.0 * (2.0 * m + 3.0)))
        return
    if z > jmax + 12.0:
        j0 = np.sin(z) / z
        out[0] = j0
        if jmax >= 1:
            j1 = j0 / z - np.cos(z) / z
            out[1] = j1
            for m in range(1, jmax):
                jn = (2.0 * m + 1.0) / z * out[m] - out[m - 1]
                out[m + 1] = jn
        return
    # Miller downward: start above jmax, recur toward 0, normalize by j_0
    mstart = jmax + 26 + int(z)
    fp = 0.0
    fc = 1e-250
    m = mstart
    while m > 0:
        fm = (2.0 * m + 1.0) / z * fc - fp
        fp = fc
        fc = fm
        m -= 1
        if m <= jmax:
            out[m] = fc
        if abs(fc) > 1e250:
            fp *= 1e-250
            fc *= 1e-250
            for i in range(m, jmax + 1):
                out[i] *= 1e-250
    scale = (np.sin(z) / z) / out[0]
    for m in range(jmax + 1):
        out[m] *= scale


@njit(cache=True, nogil=True)
def filon_cross_table(x, centers, halfw, cre, cim, panel_block, nblocks, out):
    """out[k] += sum_l Re integral over the panels of block k of
    g(u) * exp(i*u*x_l) du, where g on each panel is the Legendre series with
    coefficients (cre, cim) rows.

    integral over a panel = h * e^{i c x} * sum_m coef_m * 2 i^m j_m(h x),
    with j_m(-t) = (-1)^m j_m(t) folded through a sign variable.
    """
    npan = centers.shape[0]
    deg1 = cre.shape[1]
    n = x.shape[0]
    jv = np.empty(deg1)
    for k in range(nblocks):
        out[k] = 0.0
    for l in range(n):
        xl = x[l]
        for jp in range(npan):
            h = halfw[jp]
            z = h * xl
            az = abs(z)
            spherical_j(az, deg1 - 1, jv)
            sgn = 1.0 if z >= 0.0 else -1.0
            # sum_m coef_m * i^m * j_m(z), split by m mod 4
            ar = 0.0
            ai = 0.0
            sm = 1.0
            for m in range(deg1):
                jm = jv[m] * sm
                r = cre[jp, m]
                im = cim[jp, m]
                mm = m & 3
                if mm == 0:
                    ar += r * jm
                    ai += im * jm
                elif mm == 1:
                    ar -= im * jm
                    ai += r * jm
                elif mm == 2:
                    ar -= r * jm
                    ai -= im * jm
                else:
                    ar += im * jm
                    ai -= r * jm
                sm *= sgn
            c = centers[jp] * xl
            pr = np.cos(c)
            pi = np.sin(c)
            val = 2.0 * h * (pr * ar - pi * ai)
            out[panel_block[jp]] += val


@njit(cache=True, nogil=True)
def filon_cross_uniform(xt, coef_re, coef_im, block_first_panel, block_halfw,
                        block_u0, block_w, out):
    """Core-tail cross sums on per-block uniform panels.

    coef rows are Legendre coefficients of the unnormalized core cf on each
    panel; for each tail point the integral sum_panels of
    core_cf(u) * exp(-i*u*xt) du is accumulated into out[block].  Bessel
    values are computed once per (tail point, block) because the panel
    half-width is constant within a block.
    """
    nblocks = block_first_panel.shape[0] - 1
    deg1 = coef_re.shape[1]
    nt = xt.shape[0]
    jv = np.empty(deg1)
    for k in range(nblocks):
        out[k] = 0.0
    for it in range(nt):
        xl = xt[it]
        for k in range(nblocks):
            h = block_halfw[k]
            z = h * xl
            az = abs(z)
            spherical_j(az, deg1 - 1, jv)
            sgn = 1.0 if z >= 0.0 else -1.0
            w = block_w[k]
            # phasor for e^{-i c x} across the block's panels
            c0 = (block_u0[k] + 0.5 * w) * xl
            pr = np.cos(c0)
            pi = -np.sin(c0)
            sr = np.cos(w * xl)
            si = -np.sin(w * xl)
            acc = 0.0
            for jp in range(block_first_panel[k], block_first_panel[k + 1]):
                ar = 0.0
                ai = 0.0
                sm = 1.0
                for m in range(deg1):
                    jm = jv[m] * sm
                    r = coef_re[jp, m]
                    im = coef_im[jp, m]
                    mm = m & 3
                    # multiply by (-i)^m
                    if mm == 0:
                        ar += r * jm
                        ai += im * jm
                    elif mm == 1:
                        ar += im * jm
                        ai -= r * jm
                    elif mm == 2:
                        ar -= r * jm
                        ai -= im * jm
                    else:
                        ar -= im * jm
                        ai += r * jm
                    sm *= sgn
                acc += 2.0 * h * (pr * ar - pi * ai)
                prn = pr * sr - pi * si
                pin = pr * si + pi * sr
                pr = prn
                pi = pin
            out[k] += acc


@njit(cache=True, nogil=True)
def boundary_jump_density(sample, gam, bj, xs, out):
    """f(x) = (1/(n*pi)) * sum_l sum_j gam_j sin(bj_j (X_l - x))/(X_l - x).

    Direct trig evaluation; callers pass only boundaries with nonzero jump.
    """
    n = sample.shape[0]
    nj = gam.shape[0]
    m = xs.shape[0]
    bmax = 1.0
    for j in range(nj):
        if abs(bj[j]) > bmax:
            bmax = abs(bj[j])
    thresh = _DEGEN * bmax
    for g in range(m):
        xg = xs[g]
        acc = 0.0
        for l in range(n):
            d = sample[l] - xg
            if abs(d) < thresh:
                for j in range(nj):
                    b = bj[j]
                    acc += gam[j] * (b - b * b * b * d * d / 6.0)
            else:
                inv = 1.0 / d
                for j in range(nj):
                    acc += gam[j] * np.sin(bj[j] * d) * inv
        out[g] = acc / (n * np.pi)


@njit(cache=True, nogil=True)
def boundary_jump_density_panels(sample, gam, bj, x0, w, npan, s, out):
    """Same density values as boundary_jump_density, on GL nodes of npan
    uniform panels of width w starting at x0, with per-(point, boundary)
    phasors advanced panel to panel so trig stays O(n*nj*p)."""
    n = sample.shape[0]
    nj = gam.shape[0]
    p = s.shape[0]
    h = 0.5 * w
    ere = np.empty((nj, p))
    eim = np.empty((nj, p))
    for j in range(nj):
        for q in range(p):
            a = -bj[j] * h * s[q]
            ere[j, q] = np.cos(a)
            eim[j, q] = np.sin(a)
    pre = np.empty((n, nj))
    pim = np.empty((n, nj))
    sre = np.empty(nj)
    sim = np.empty(nj)
    for j in range(nj):
        a = -bj[j] * w
        sre[j] = np.cos(a)
        sim[j] = np.sin(a)
    c0 = x0 + h
    for l in range(n):
        for j in range(nj):
            a = bj[j] * (sample[l] - c0)
            pre[l, j] = np.cos(a)
            pim[l, j] = np.sin(a)
    for jp in range(npan):
        base = jp * p
        xc = x0 + (jp + 0.5) * w
        for q in range(p):
            out[base + q] = 0.0
        for l in range(n):
            xl = sample[l]
            for q in range(p):
                d = xl - (xc + h * s[q])
                if abs(d) < 1e-9:
                    acc = 0.0
                    for j in range(nj):
                        b = bj[j]
                        acc += gam[j] * (b - b * b * b * d * d / 6.0)
                    out[base + q] += acc
                else:
                    inv = 1.0 / d
                    acc = 0.0
                    for j in range(nj):
                        # sin(b*d) = Im(P * E)
                        acc += gam[j] * (pre[l, j] * eim[j, q]
                                         + pim[l, j] * ere[j, q]) * inv
                    out[base + q] += acc
            for j in range(nj):
                prn = pre[l, j] * sre[j] - pim[l, j] * sim[j]
                pin = pre[l, j] * sim[j] + pim[l, j] * sre[j]
                pre[l, j] = prn
                pim[l, j] = pin
    inv_npi = 1.0 / (n * np.pi)
    for i in range(npan * p):
        out[i] *= inv_npi
