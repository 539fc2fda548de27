# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``; same signatures, same arithmetic order."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


cdef inline double _left_leaving(double p0, double u0, double h, double al, double bl, double gl):
    return (p0 * (1.0 - bl - 0.5 * al * h) - 2.0 * al * u0 - 2.0 * gl) / (1.0 + bl + 0.5 * al * h)


cdef inline double _right_leaving(double mr, double un, double h, double ar, double br, double gr,
                                  bint dirichlet, double g_right):
    if dirichlet:
        return 2.0 * (g_right - un) / h - mr
    return (mr * (1.0 + br + 0.5 * ar * h) + 2.0 * ar * un + 2.0 * gr) / (1.0 - br - 0.5 * ar * h)


def char_step(const double[::1] u, const double[::1] s, double h,
              double al, double bl, double gl, double ar, double br, double gr,
              bint dirichlet, double g_right):
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t nc = m - 1
    cdef Py_ssize_t i
    cdef double d, m0, pn
    p_arr = np.empty(nc)
    q_arr = np.empty(nc)
    un_arr = np.empty(m)
    vn_arr = np.empty(m)
    sn_arr = np.empty(nc)
    cdef double[::1] p = p_arr
    cdef double[::1] q = q_arr
    cdef double[::1] un = un_arr
    cdef double[::1] vn = vn_arr
    cdef double[::1] sn = sn_arr

    for i in range(nc):
        d = (u[i + 1] - u[i]) / h
        p[i] = s[i] + d
        q[i] = s[i] - d
    m0 = _left_leaving(p[0], u[0], h, al, bl, gl)
    pn = _right_leaving(q[nc - 1], u[m - 1], h, ar, br, gr, dirichlet, g_right)
    for i in range(1, m - 1):
        vn[i] = 0.5 * (p[i] + q[i - 1])
    vn[0] = 0.5 * (p[0] + m0)
    vn[m - 1] = 0.5 * (pn + q[nc - 1])
    for i in range(m):
        un[i] = u[i] + h * vn[i]
    if dirichlet:
        un[m - 1] = g_right
    for i in range(nc - 1):
        sn[i] = 0.5 * (p[i + 1] + (q[i - 1] if i > 0 else m0))
    sn[nc - 1] = 0.5 * (pn + (q[nc - 2] if nc > 1 else m0))
    return un_arr, vn_arr, sn_arr, 0.5 * (p[0] - m0), 0.5 * (pn - q[nc - 1])


def char_right_velocity(const double[::1] u, const double[::1] s, double h,
                        double ar, double br, double gr):
    cdef Py_ssize_t m = u.shape[0]
    cdef double mr = s[m - 2] - (u[m - 1] - u[m - 2]) / h
    cdef double pn = _right_leaving(mr, u[m - 1], h, ar, br, gr, False, 0.0)
    return 0.5 * (pn + mr)


def leapfrog_step(const double[::1] u, const double[::1] ut, double dt, double h,
                  double al, double bl, double gl, double ar, double br, double gr,
                  bint dirichlet, double g_right):
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t i
    cdef double ih2 = 1.0 / (h * h)
    cdef double d = 2.0 * dt / h
    cdef double acc0
    un_arr = np.empty(m)
    vn_arr = np.empty(m)
    cdef double[::1] un = un_arr
    cdef double[::1] vn = vn_arr
    for i in range(1, m - 1):
        vn[i] = ut[i] + dt * ih2 * (u[i + 1] - 2.0 * u[i] + u[i - 1])
    acc0 = 2.0 * ih2 * (u[1] - u[0]) - (2.0 / h) * (al * u[0] + gl)
    vn[0] = (ut[0] * (1.0 - 0.5 * d * bl) + dt * acc0) / (1.0 + d * (0.5 * al * dt + 0.5 * bl))
    if dirichlet:
        vn[m - 1] = (g_right - u[m - 1]) / dt
    else:
        vn[m - 1] = leapfrog_right_velocity(u, ut, dt, h, ar, br, gr)
    for i in range(m):
        un[i] = u[i] + dt * vn[i]
    if dirichlet:
        un[m - 1] = g_right
    return un_arr, vn_arr


cpdef double leapfrog_right_velocity(const double[::1] u, const double[::1] ut, double dt, double h,
                                     double ar, double br, double gr):
    cdef Py_ssize_t m = u.shape[0]
    cdef double ih2 = 1.0 / (h * h)
    cdef double d = 2.0 * dt / h
    cdef double accn = 2.0 * ih2 * (u[m - 2] - u[m - 1]) + (2.0 / h) * (ar * u[m - 1] + gr)
    return (ut[m - 1] * (1.0 + 0.5 * d * br) + dt * accn) / (1.0 - d * (0.5 * ar * dt + 0.5 * br))


def transport_shift(const double[::1] f, double inflow):
    cdef Py_ssize_t m = f.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    for i in range(m - 1, 0, -1):
        out[i] = f[i - 1]
    out[0] = inflow
    return out_arr


def transport_upwind(const double[::1] f, double inflow, double nu):
    cdef Py_ssize_t m = f.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    for i in range(1, m):
        out[i] = f[i] - nu * (f[i] - f[i - 1])
    out[0] = inflow
    return out_arr


def exp_kernel_cumulative(const double[::1] f, double h, double s):
    cdef Py_ssize_t m = f.shape[0]
    cdef Py_ssize_t k
    cdef double e = exp(s * h)
    cdef double half = 0.5 * h
    cdef double acc = 0.0
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    out[0] = 0.0
    for k in range(m - 1):
        acc = e * acc + half * (e * f[k] + f[k + 1])
        out[k + 1] = acc
    return out_arr
