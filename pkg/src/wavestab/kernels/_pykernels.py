"""Pure numpy implementation of the array-level stepping kernels.

This module is the reference backend; ``_ckernels`` must agree with it to
rounding. Every function works on plain float64 arrays and never mutates
its inputs.

Boundary convention::

    u_x(0) = al*u(0) + bl*u_t(0) + gl
    u_x(1) = ar*u(1) + br*u_t(1) + gr        (or u(1) = g_right if dirichlet)

Every boundary term is evaluated at t + dt/2, u as u[k] + dt/2 * u_t.

``char_step`` is the dt == h scheme. Its state is u at the nodes and
``s`` = u_t at the cell midpoints. p = u_t + u_x and m = u_t - u_x are
then known on every cell; over one step p moves one cell left and m one
cell right, exactly. At an end the arriving invariant is known and the
boundary condition gives the leaving one. Nodal leapfrog at Courant
number 1 is the same scheme up to one extra state, the pattern
(-1)^(i+k), which no boundary row can damp; storing cell velocities
removes it.

``leapfrog_step`` is the dt < h scheme: staggered leapfrog on nodal half
step velocities with ghost-node boundary rows, the u_t term centered.
"""

from __future__ import annotations

import numpy as np


def _left_leaving(p0, u0, h, al, bl, gl):
    # m(0) from u_x = (p - m)/2, u_t = (p + m)/2, u = u0 + h/4 (p + m)
    return (p0 * (1.0 - bl - 0.5 * al * h) - 2.0 * al * u0 - 2.0 * gl) / (1.0 + bl + 0.5 * al * h)


def _right_leaving(mr, un, h, ar, br, gr, dirichlet, g_right):
    if dirichlet:
        return 2.0 * (g_right - un) / h - mr
    return (mr * (1.0 + br + 0.5 * ar * h) + 2.0 * ar * un + 2.0 * gr) / (1.0 - br - 0.5 * ar * h)


def char_step(u, s, h, al, bl, gl, ar, br, gr, dirichlet, g_right):
    """Returns (u, nodal half-step u_t, cell u_t, u_x(0), u_x(1)) for one step of length h."""
    d = (u[1:] - u[:-1]) / h
    p = s + d
    m = s - d
    m0 = _left_leaving(p[0], u[0], h, al, bl, gl)
    pn = _right_leaving(m[-1], u[-1], h, ar, br, gr, dirichlet, g_right)
    vn = np.empty_like(u)
    vn[1:-1] = 0.5 * (p[1:] + m[:-1])
    vn[0] = 0.5 * (p[0] + m0)
    vn[-1] = 0.5 * (pn + m[-1])
    un = u + h * vn
    if dirichlet:
        un[-1] = g_right
    pp = np.empty_like(p)
    pp[:-1] = p[1:]
    pp[-1] = pn
    mm = np.empty_like(m)
    mm[1:] = m[:-1]
    mm[0] = m0
    sn = 0.5 * (pp + mm)
    return un, vn, sn, 0.5 * (p[0] - m0), 0.5 * (pn - m[-1])


def char_right_velocity(u, s, h, ar, br, gr):
    """Nodal half-step velocity at x=1 that ``char_step`` will produce (non-Dirichlet)."""
    mr = s[-1] - (u[-1] - u[-2]) / h
    pn = _right_leaving(mr, u[-1], h, ar, br, gr, False, 0.0)
    return 0.5 * (pn + mr)


def leapfrog_step(u, ut, dt, h, al, bl, gl, ar, br, gr, dirichlet, g_right):
    ih2 = 1.0 / (h * h)
    d = 2.0 * dt / h
    vn = np.empty_like(ut)
    vn[1:-1] = ut[1:-1] + dt * ih2 * (u[2:] - 2.0 * u[1:-1] + u[:-2])
    acc0 = 2.0 * ih2 * (u[1] - u[0]) - (2.0 / h) * (al * u[0] + gl)
    vn[0] = (ut[0] * (1.0 - 0.5 * d * bl) + dt * acc0) / (1.0 + d * (0.5 * al * dt + 0.5 * bl))
    if dirichlet:
        vn[-1] = (g_right - u[-1]) / dt
    else:
        vn[-1] = leapfrog_right_velocity(u, ut, dt, h, ar, br, gr)
    un = u + dt * vn
    if dirichlet:
        un[-1] = g_right
    return un, vn


def leapfrog_right_velocity(u, ut, dt, h, ar, br, gr):
    ih2 = 1.0 / (h * h)
    d = 2.0 * dt / h
    accn = 2.0 * ih2 * (u[-2] - u[-1]) + (2.0 / h) * (ar * u[-1] + gr)
    return (ut[-1] * (1.0 + 0.5 * d * br) + dt * accn) / (1.0 - d * (0.5 * ar * dt + 0.5 * br))


def transport_shift(f, inflow):
    out = np.empty_like(f)
    out[1:] = f[:-1]
    out[0] = inflow
    return out


def transport_upwind(f, inflow, nu):
    out = np.empty_like(f)
    out[1:] = f[1:] - nu * (f[1:] - f[:-1])
    out[0] = inflow
    return out


def exp_kernel_cumulative(f, h, s):
    """I[m] = trapezoid approximation of int_0^{x_m} exp(s (x_m - xi)) f(xi) dxi."""
    n = f.size
    out = np.empty(n)
    e = np.exp(s * h)
    acc = 0.0
    out[0] = 0.0
    half = 0.5 * h
    for k in range(n - 1):
        acc = e * acc + half * (e * f[k] + f[k + 1])
        out[k + 1] = acc
    return out
