"""Compiled inner loops for power-law models ``p = v**-gamma``, ``mu = mu0 v**-beta``.

All kernels use the same face fluxes as the numpy reference path:

    Fv = c (3 v_{i+1} - v_{i+2}) / 2 + (u_i + u_{i+1}) / 2
    Fu = c (3 u_{i+1} - u_{i+2}) / 2 - (p_i + p_{i+1}) / 2 + sigma'(vbar) (u_{i+1} - u_i) / dx

with ``vbar`` the arithmetic mean and ``c >= 0`` the speed of the moving frame.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _pow(v, e):
    # integer exponents dominate in practice; skip the libm pow for them
    if e == -1.0:
        return 1.0 / v
    if e == -2.0:
        r = 1.0 / v
        return r * r
    if e == -3.0:
        r = 1.0 / v
        return r * r * r
    return v ** e


@njit(cache=True, inline="always")
def _sig1(v, mu0, beta):
    return mu0 * _pow(v, -beta - 1.0)


@njit(cache=True)
def periodic_rhs(v, u, dx, gamma, mu0, beta, c, dv, du, fv, fu, p):
    n = v.size
    for i in range(n):
        p[i] = _pow(v[i], -gamma)
    for i in range(n):
        ip = i + 1
        if ip >= n:
            ip -= n
        ip2 = ip + 1
        if ip2 >= n:
            ip2 -= n
        vm = 0.5 * (v[i] + v[ip])
        fv[i] = 0.5 * c * (3.0 * v[ip] - v[ip2]) + 0.5 * (u[i] + u[ip])
        fu[i] = (0.5 * c * (3.0 * u[ip] - u[ip2]) - 0.5 * (p[i] + p[ip])
                 + _sig1(vm, mu0, beta) * (u[ip] - u[i]) / dx)
    for i in range(n):
        im = i - 1 if i > 0 else n - 1
        dv[i] = (fv[i] - fv[im]) / dx
        du[i] = (fu[i] - fu[im]) / dx


@njit(cache=True)
def periodic_rk4(v, u, dx, dt, gamma, mu0, beta, c, work):
    """One RK4 step in place.  ``work`` is a (13, n) scratch array."""
    k1v, k1u, k2v, k2u, k3v, k3u, k4v, k4u = (work[0], work[1], work[2], work[3],
                                              work[4], work[5], work[6], work[7])
    tv, tu, fv, fu, p = work[8], work[9], work[10], work[11], work[12]
    n = v.size
    periodic_rhs(v, u, dx, gamma, mu0, beta, c, k1v, k1u, fv, fu, p)
    for i in range(n):
        tv[i] = v[i] + 0.5 * dt * k1v[i]
        tu[i] = u[i] + 0.5 * dt * k1u[i]
    periodic_rhs(tv, tu, dx, gamma, mu0, beta, c, k2v, k2u, fv, fu, p)
    for i in range(n):
        tv[i] = v[i] + 0.5 * dt * k2v[i]
        tu[i] = u[i] + 0.5 * dt * k2u[i]
    periodic_rhs(tv, tu, dx, gamma, mu0, beta, c, k3v, k3u, fv, fu, p)
    for i in range(n):
        tv[i] = v[i] + dt * k3v[i]
        tu[i] = u[i] + dt * k3u[i]
    periodic_rhs(tv, tu, dx, gamma, mu0, beta, c, k4v, k4u, fv, fu, p)
    ok = True
    for i in range(n):
        v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
        u[i] += dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i])
        if not (v[i] > 0.0) or not np.isfinite(u[i]):
            ok = False
    return ok


@njit(cache=True)
def _pressure_potential(v, vbar, gamma):
    # -int_vbar^v p + p(vbar) (v - vbar), nonnegative by convexity
    P = (_pow(v, 1.0 - gamma) - _pow(vbar, 1.0 - gamma)) / (1.0 - gamma)
    return -P + _pow(vbar, -gamma) * (v - vbar)


@njit(cache=True)
def periodic_evolve(v, u, dx, dt, nsteps, gamma, mu0, beta, c, vbar, ubar, sample_every):
    """Advance ``nsteps`` steps; record per-step energy and mean pressure excess.

    Returns ``(status, snaps_v, snaps_u, energy, pdev)``; ``status`` is the
    number of completed steps (``nsteps`` on success).
    """
    n = v.size
    work = np.empty((13, n))
    nsnap = nsteps // sample_every + 1
    snaps_v = np.empty((nsnap, n))
    snaps_u = np.empty((nsnap, n))
    energy = np.empty(nsteps + 1)
    pdev = np.empty(nsteps + 1)
    pbar = vbar ** -gamma
    snaps_v[0] = v
    snaps_u[0] = u
    for step in range(nsteps + 1):
        if step > 0:
            if not periodic_rk4(v, u, dx, dt, gamma, mu0, beta, c, work):
                return step, snaps_v, snaps_u, energy, pdev
            if step % sample_every == 0:
                snaps_v[step // sample_every] = v
                snaps_u[step // sample_every] = u
        e = 0.0
        pd = 0.0
        for i in range(n):
            e += 0.5 * (u[i] - ubar) ** 2 + _pressure_potential(v[i], vbar, gamma)
            pd += _pow(v[i], -gamma) - pbar
        energy[step] = e * dx
        pdev[step] = pd / n
    return nsteps, snaps_v, snaps_u, energy, pdev


# ---------------------------------------------------------------------------
# full-line solver in the frame of the shock

@njit(cache=True, inline="always")
def profile_eval(t, tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu):
    """``(g, 1 - g, dg)`` of the Hermite profile table at ``t = xi - centre``.

    ``dg`` is the exact derivative of the interpolant, so sums of ``dg`` are
    the exact derivatives of sums of ``g`` under a shift.
    """
    if t < -reach_l:
        g = tab_g[0] * np.exp(lam * (t + reach_l))
        return g, 1.0 - g, lam * g
    if t > reach_r:
        q = tab_q[tab_q.size - 1] * np.exp(-mu * (t - reach_r))
        return 1.0 - q, q, mu * q
    n = tab_g.size
    j = int(np.floor(t / h + nl))
    if j < 0:
        j = 0
    if j > n - 2:
        j = n - 2
    th = (t - (j - nl) * h) / h
    om = 1.0 - th
    h00 = (1.0 + 2.0 * th) * om * om
    h10 = th * om * om
    h01 = th * th * (3.0 - 2.0 * th)
    h11 = th * th * (th - 1.0)
    d00 = 6.0 * th * th - 6.0 * th
    d10 = 3.0 * th * th - 4.0 * th + 1.0
    d11 = 3.0 * th * th - 2.0 * th
    m0 = h * tab_gp[j]
    m1 = h * tab_gp[j + 1]
    # left half interpolates g, right half q = 1 - g (slope -g'); both are formed
    # and one is picked at the end, which numba compiles far better than branching
    mm = h10 * m0 + h11 * m1
    dm = (d10 * m0 + d11 * m1) / h
    gl = h00 * tab_g[j] + h01 * tab_g[j + 1] + mm
    dgl = d00 * (tab_g[j] - tab_g[j + 1]) / h + dm
    qr = h00 * tab_q[j] + h01 * tab_q[j + 1] - mm
    dgr = -d00 * (tab_q[j] - tab_q[j + 1]) / h + dm
    if t <= 0.0:
        return gl, 1.0 - gl, dgl
    return 1.0 - qr, qr, dgr


@njit(cache=True)
def _face_fluxes(ve, ue, pe, dx, c, mu0, beta, fv, fu):
    # ve, ue, pe carry two ghost nodes on each side; faces 0..M
    m = fv.size - 1
    for j in range(m + 1):
        a = j + 1
        vm = 0.5 * (ve[a] + ve[a + 1])
        fv[j] = 0.5 * c * (3.0 * ve[a + 1] - ve[a + 2]) + 0.5 * (ue[a] + ue[a + 1])
        fu[j] = (0.5 * c * (3.0 * ue[a + 1] - ue[a + 2]) - 0.5 * (pe[a] + pe[a + 1])
                 + _sig1(vm, mu0, beta) * (ue[a + 1] - ue[a]) / dx)


@njit(cache=True)
def cauchy_rhs(y, dy, m, nlft, nrgt, i0, dx, gamma, mu0, beta, c,
               tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu, center, ratio, scratch):
    """Right-hand side of the packed state ``[v, u, vL, uL, vR, uR, X, Y]``.

    Interior nodes sit at ``xi_i = (i0 + i) dx``; the donors are periodic with
    ``nlft``/``nrgt`` nodes, node ``k`` at ``k dx``.  The shifts evolve so the
    discrete masses of ``v - v~`` and ``u - u~`` stay fixed.
    """
    v = y[0:m]
    u = y[m:2 * m]
    o = 2 * m
    lv = y[o:o + nlft]
    lu = y[o + nlft:o + 2 * nlft]
    o2 = o + 2 * nlft
    rv = y[o2:o2 + nrgt]
    ru = y[o2 + nrgt:o2 + 2 * nrgt]
    X = y[o2 + 2 * nrgt]
    Y = y[o2 + 2 * nrgt + 1]

    dlv = dy[o:o + nlft]
    dlu = dy[o + nlft:o + 2 * nlft]
    drv = dy[o2:o2 + nrgt]
    dru = dy[o2 + nrgt:o2 + 2 * nrgt]
    periodic_rhs(lv, lu, dx, gamma, mu0, beta, c, dlv, dlu,
                 scratch[0, :nlft], scratch[1, :nlft], scratch[2, :nlft])
    periodic_rhs(rv, ru, dx, gamma, mu0, beta, c, drv, dru,
                 scratch[0, :nrgt], scratch[1, :nrgt], scratch[2, :nrgt])

    ve = scratch[3, :m + 4]
    ue = scratch[4, :m + 4]
    pe = scratch[5, :m + 4]
    for k in range(2):
        jl = ((i0 - 2 + k) % nlft + nlft) % nlft
        ve[k] = lv[jl]
        ue[k] = lu[jl]
        jr = ((i0 + m + k) % nrgt + nrgt) % nrgt
        ve[m + 2 + k] = rv[jr]
        ue[m + 2 + k] = ru[jr]
    for i in range(m):
        ve[i + 2] = v[i]
        ue[i + 2] = u[i]
    for i in range(m + 4):
        pe[i] = _pow(ve[i], -gamma)
    fv = scratch[6, :m + 1]
    fu = scratch[7, :m + 1]
    _face_fluxes(ve, ue, pe, dx, c, mu0, beta, fv, fu)
    for i in range(m):
        dy[i] = (fv[i + 1] - fv[i]) / dx
        dy[m + i] = (fu[i + 1] - fu[i]) / dx

    # shift rates from the discrete mass balance
    dy[o2 + 2 * nrgt] = _shift_rate(X, lv, rv, dlv, drv, fv[m] - fv[0], i0, m, dx, center,
                                    tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu, ratio)
    dy[o2 + 2 * nrgt + 1] = _shift_rate(Y, lu, ru, dlu, dru, fu[m] - fu[0], i0, m, dx, center,
                                        tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu,
                                        ratio)


@njit(cache=True)
def _shift_rate(z, lo, hi, dlo, dhi, flux_jump, i0, m, dx, center,
                tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu, ratio):
    """Rate keeping ``sum(f - lo (1 - g(xi - z)) - hi g(xi - z)) dx`` fixed.

    ``ratio > 0`` means ``dx == ratio * h``: every node then shares the same
    Hermite weights and only the table index moves.
    """
    nlo = lo.size
    nhi = hi.size
    n = tab_g.size
    # past these offsets the tails are below 1e-18 of the jump
    cut_l = -reach_l - max(math.log(tab_g[0] * 1e18), 0.0) / lam
    cut_r = reach_r + max(math.log(tab_q[n - 1] * 1e18), 0.0) / mu
    t0 = i0 * dx - center - z
    a0 = t0 / h + nl
    jb = int(math.floor(a0))
    th = a0 - jb
    om = 1.0 - th
    h00 = (1.0 + 2.0 * th) * om * om
    h10 = th * om * om
    h01 = th * th * (3.0 - 2.0 * th)
    h11 = th * th * (th - 1.0)
    d00 = 6.0 * th * th - 6.0 * th
    d10 = 3.0 * th * th - 4.0 * th + 1.0
    d11 = 3.0 * th * th - 2.0 * th
    num = 0.0
    den = 0.0
    tail_l = -1.0
    tail_r = -1.0
    fac_l = math.exp(lam * dx)
    fac_r = math.exp(-mu * dx)
    il = (i0 % nlo + nlo) % nlo
    ir = (i0 % nhi + nhi) % nhi
    for i in range(m):
        t = t0 + i * dx
        if t < cut_l:
            num += dlo[il]
        elif t > cut_r:
            num += dhi[ir]
        else:
            j = jb + ratio * i
            if ratio > 0 and j >= 0 and j <= n - 2 and t >= -reach_l and t <= reach_r:
                m0 = h * tab_gp[j]
                m1 = h * tab_gp[j + 1]
                mm = h10 * m0 + h11 * m1
                dm = (d10 * m0 + d11 * m1) / h
                gl = h00 * tab_g[j] + h01 * tab_g[j + 1] + mm
                qr = h00 * tab_q[j] + h01 * tab_q[j + 1] - mm
                if t <= 0.0:
                    g = gl
                    q = 1.0 - gl
                    dg = d00 * (tab_g[j] - tab_g[j + 1]) / h + dm
                else:
                    g = 1.0 - qr
                    q = qr
                    dg = -d00 * (tab_q[j] - tab_q[j + 1]) / h + dm
            elif t < -reach_l:
                # exponential tails advance by a constant factor per node
                if tail_l < 0.0:
                    tail_l = tab_g[0] * math.exp(lam * (t + reach_l))
                else:
                    tail_l *= fac_l
                g = tail_l
                q = 1.0 - g
                dg = lam * g
            elif t > reach_r:
                if tail_r < 0.0:
                    tail_r = tab_q[n - 1] * math.exp(-mu * (t - reach_r))
                else:
                    tail_r *= fac_r
                q = tail_r
                g = 1.0 - q
                dg = mu * q
            else:
                g, q, dg = profile_eval(t, tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu)
            num += q * dlo[il] + g * dhi[ir]
            den += (hi[ir] - lo[il]) * dg
        il += 1
        if il == nlo:
            il = 0
        ir += 1
        if ir == nhi:
            ir = 0
    num = num * dx - flux_jump
    # equal donors (no jump) leave the shift undefined; hold it still
    if den == 0.0:
        return 0.0
    return num / (den * dx)


@njit(cache=True)
def cauchy_evolve(y, nsteps, dt, sample_every, m, nlft, nrgt, i0, dx, gamma, mu0, beta, c,
                  tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu, center, ratio):
    """RK4 for ``nsteps`` steps; returns ``(completed, snapshots)``."""
    size = y.size
    nmax = max(max(nlft, nrgt), m + 4)
    scratch = np.empty((8, nmax))
    k1 = np.empty(size)
    k2 = np.empty(size)
    k3 = np.empty(size)
    k4 = np.empty(size)
    tmp = np.empty(size)
    snaps = np.empty((nsteps // sample_every + 1, size))
    snaps[0] = y
    for step in range(1, nsteps + 1):
        cauchy_rhs(y, k1, m, nlft, nrgt, i0, dx, gamma, mu0, beta, c,
                   tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu, center, ratio, scratch)
        for i in range(size):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        cauchy_rhs(tmp, k2, m, nlft, nrgt, i0, dx, gamma, mu0, beta, c,
                   tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu, center, ratio, scratch)
        for i in range(size):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        cauchy_rhs(tmp, k3, m, nlft, nrgt, i0, dx, gamma, mu0, beta, c,
                   tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu, center, ratio, scratch)
        for i in range(size):
            tmp[i] = y[i] + dt * k3[i]
        cauchy_rhs(tmp, k4, m, nlft, nrgt, i0, dx, gamma, mu0, beta, c,
                   tab_g, tab_q, tab_gp, h, nl, reach_l, reach_r, lam, mu, center, ratio, scratch)
        ok = True
        for i in range(size):
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(y[i]):
                ok = False
        for i in range(m):
            if not (y[i] > 0.0):
                ok = False
        if not ok:
            return step, snaps
        if step % sample_every == 0:
            snaps[step // sample_every] = y
    return nsteps, snaps
