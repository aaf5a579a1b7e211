"""Numba-compiled numerical cores.

Every floating-point update of the model state funnels through the scalar
routines in this module, so single-path runs, ensemble chunks of any width,
and the deterministic integrator all perform bit-identical arithmetic.
Transcendentals use libm via ``math`` (never numpy's SIMD variants), which
keeps results independent of batch width and thread count.

Parameter packing: ``pars = (Pi, alpha, beta_bar, m, omega, gamma, xi,
sigma, eta, k)``.
"""

import math

from numba import njit

NAN = float("nan")


@njit(cache=True, nogil=True)
def compartment_drift(s, v, e, i, beta_eff, pars):
    """Drift of (S, V, E, I) with the transmission coefficient held at beta_eff."""
    Pi, alpha, beta_bar, m, omega, gamma, xi, sigma, eta, k = pars
    inc = beta_eff * s * i / (1.0 + k * i)
    ds = Pi - alpha * s - inc - m * s + omega * v
    dv = alpha * s + gamma * i + xi * e - (m + omega) * v
    de = inc - (m + sigma + xi) * e
    di = sigma * e - (m + gamma + eta) * i
    return ds, dv, de, di


@njit(cache=True, nogil=True)
def rk4_compartments(s, v, e, i, beta_eff, h, pars):
    """One classical fourth-order Runge-Kutta step of the compartment block."""
    k1s, k1v, k1e, k1i = compartment_drift(s, v, e, i, beta_eff, pars)
    s2 = s + 0.5 * h * k1s
    v2 = v + 0.5 * h * k1v
    e2 = e + 0.5 * h * k1e
    i2 = i + 0.5 * h * k1i
    k2s, k2v, k2e, k2i = compartment_drift(s2, v2, e2, i2, beta_eff, pars)
    s3 = s + 0.5 * h * k2s
    v3 = v + 0.5 * h * k2v
    e3 = e + 0.5 * h * k2e
    i3 = i + 0.5 * h * k2i
    k3s, k3v, k3e, k3i = compartment_drift(s3, v3, e3, i3, beta_eff, pars)
    s4 = s + h * k3s
    v4 = v + h * k3v
    e4 = e + h * k3e
    i4 = i + h * k3i
    k4s, k4v, k4e, k4i = compartment_drift(s4, v4, e4, i4, beta_eff, pars)
    sixth = h / 6.0
    return (
        s + sixth * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
        v + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        e + sixth * (k1e + 2.0 * k2e + 2.0 * k3e + k4e),
        i + sixth * (k1i + 2.0 * k2i + 2.0 * k3i + k4i),
    )


@njit(cache=True, nogil=True)
def _most_negative(s, v, e, i):
    """Return (value, component code 0..3 for S,V,E,I) of the smallest entry."""
    val = s
    code = 0
    if v < val:
        val = v
        code = 1
    if e < val:
        val = e
        code = 2
    if i < val:
        val = i
        code = 3
    return val, code


@njit(cache=True, nogil=True)
def rk4_checked(s, v, e, i, beta_eff, h, pars, eps_neg):
    """RK4 step with one retry at h/2; returns (s, v, e, i, ok, code).

    The retry splits the step into two half steps at the same held
    transmission coefficient. ok=False means the retry also undershot
    below -eps_neg; code identifies the offending compartment.
    """
    s1, v1, e1, i1 = rk4_compartments(s, v, e, i, beta_eff, h, pars)
    val, code = _most_negative(s1, v1, e1, i1)
    if val >= -eps_neg:
        return s1, v1, e1, i1, True, 0
    hh = 0.5 * h
    sa, va, ea, ia = rk4_compartments(s, v, e, i, beta_eff, hh, pars)
    s1, v1, e1, i1 = rk4_compartments(sa, va, ea, ia, beta_eff, hh, pars)
    val, code = _most_negative(s1, v1, e1, i1)
    if val >= -eps_neg:
        return s1, v1, e1, i1, True, 0
    return s1, v1, e1, i1, False, code


@njit(cache=True, nogil=True)
def splitting_block(S, V, E, I, Z, EZ, ACC, noise, step0, dt, decay, sd,
                    hold_factor, stride, out_states, out_cum, fail_step,
                    fail_comp, fail_value, pars, eps_neg):
    """Advance a chunk of paths by noise.shape[1] splitting steps of size dt.

    Per step and path: the compartments take one RK4 step with the
    transmission coefficient frozen at beta_bar * exp(z * hold_factor)
    (hold_factor = 1 for left-point, exp(-theta*dt/2) for midpoint), then z
    takes its exact Gaussian transition z*decay + sd*xi. Full-resolution
    trapezoid integrals of (S, V, E, I, z, e^z) accumulate in ACC and
    recorded nodes land in out_states/out_cum at global steps divisible by
    stride. A path whose retried step still undershoots is marked in
    fail_step/fail_comp and emits NaN from the failing node onward.
    """
    w, nblk = noise.shape
    beta_bar = pars[2]
    for p in range(w):
        if fail_step[p] >= 0:
            for n in range(nblk):
                gs = step0 + n + 1
                if gs % stride == 0:
                    node = gs // stride
                    for c in range(5):
                        out_states[p, node, c] = NAN
                    for c in range(6):
                        out_cum[p, node, c] = NAN
            continue
        s = S[p]
        v = V[p]
        e = E[p]
        i = I[p]
        z = Z[p]
        ez = EZ[p]
        accS = ACC[p, 0]
        accV = ACC[p, 1]
        accE = ACC[p, 2]
        accI = ACC[p, 3]
        accZ = ACC[p, 4]
        accR = ACC[p, 5]
        for n in range(nblk):
            gs = step0 + n + 1
            if hold_factor == 1.0:
                be = beta_bar * ez
            else:
                be = beta_bar * math.exp(z * hold_factor)
            s1, v1, e1, i1, ok, code = rk4_checked(s, v, e, i, be, dt, pars,
                                                   eps_neg)
            if not ok:
                fail_step[p] = gs
                fail_comp[p] = code
                if code == 0:
                    fail_value[p] = s1
                elif code == 1:
                    fail_value[p] = v1
                elif code == 2:
                    fail_value[p] = e1
                else:
                    fail_value[p] = i1
                s = NAN
                v = NAN
                e = NAN
                i = NAN
                z = NAN
                ez = NAN
                for nn in range(n, nblk):
                    g2 = step0 + nn + 1
                    if g2 % stride == 0:
                        node = g2 // stride
                        for c in range(5):
                            out_states[p, node, c] = NAN
                        for c in range(6):
                            out_cum[p, node, c] = NAN
                break
            z1 = z * decay + sd * noise[p, n]
            ez1 = math.exp(z1)
            half = 0.5 * dt
            accS += half * (s + s1)
            accV += half * (v + v1)
            accE += half * (e + e1)
            accI += half * (i + i1)
            accZ += half * (z + z1)
            accR += half * (ez + ez1)
            s = s1
            v = v1
            e = e1
            i = i1
            z = z1
            ez = ez1
            if gs % stride == 0:
                node = gs // stride
                out_states[p, node, 0] = s
                out_states[p, node, 1] = v
                out_states[p, node, 2] = e
                out_states[p, node, 3] = i
                out_states[p, node, 4] = z
                out_cum[p, node, 0] = accS
                out_cum[p, node, 1] = accV
                out_cum[p, node, 2] = accE
                out_cum[p, node, 3] = accI
                out_cum[p, node, 4] = accZ
                out_cum[p, node, 5] = accR
        S[p] = s
        V[p] = v
        E[p] = e
        I[p] = i
        Z[p] = z
        EZ[p] = ez
        ACC[p, 0] = accS
        ACC[p, 1] = accV
        ACC[p, 2] = accE
        ACC[p, 3] = accI
        ACC[p, 4] = accZ
        ACC[p, 5] = accR


@njit(cache=True, nogil=True)
def euler_block(S, V, E, I, Z, EZ, ACC, noise, step0, dt, theta, delta,
                stride, out_states, out_cum, pars):
    """Full-truncation Euler-Maruyama on all five coordinates.

    Drift is evaluated at the positive part of each compartment; stored
    values may carry small negative excursions. Used only to cross-validate
    the splitting scheme, so there is no failure path.
    """
    w, nblk = noise.shape
    beta_bar = pars[2]
    sqdt = math.sqrt(dt)
    for p in range(w):
        s = S[p]
        v = V[p]
        e = E[p]
        i = I[p]
        z = Z[p]
        ez = EZ[p]
        accS = ACC[p, 0]
        accV = ACC[p, 1]
        accE = ACC[p, 2]
        accI = ACC[p, 3]
        accZ = ACC[p, 4]
        accR = ACC[p, 5]
        for n in range(nblk):
            gs = step0 + n + 1
            sp = s if s > 0.0 else 0.0
            vp = v if v > 0.0 else 0.0
            ep = e if e > 0.0 else 0.0
            ip = i if i > 0.0 else 0.0
            be = beta_bar * ez
            ds, dv, de, di = compartment_drift(sp, vp, ep, ip, be, pars)
            s1 = s + dt * ds
            v1 = v + dt * dv
            e1 = e + dt * de
            i1 = i + dt * di
            z1 = z - dt * (theta * z) + delta * sqdt * noise[p, n]
            ez1 = math.exp(z1)
            half = 0.5 * dt
            accS += half * (s + s1)
            accV += half * (v + v1)
            accE += half * (e + e1)
            accI += half * (i + i1)
            accZ += half * (z + z1)
            accR += half * (ez + ez1)
            s = s1
            v = v1
            e = e1
            i = i1
            z = z1
            ez = ez1
            if gs % stride == 0:
                node = gs // stride
                out_states[p, node, 0] = s
                out_states[p, node, 1] = v
                out_states[p, node, 2] = e
                out_states[p, node, 3] = i
                out_states[p, node, 4] = z
                out_cum[p, node, 0] = accS
                out_cum[p, node, 1] = accV
                out_cum[p, node, 2] = accE
                out_cum[p, node, 3] = accI
                out_cum[p, node, 4] = accZ
                out_cum[p, node, 5] = accR
        S[p] = s
        V[p] = v
        E[p] = e
        I[p] = i
        Z[p] = z
        EZ[p] = ez
        ACC[p, 0] = accS
        ACC[p, 1] = accV
        ACC[p, 2] = accE
        ACC[p, 3] = accI
        ACC[p, 4] = accZ
        ACC[p, 5] = accR
