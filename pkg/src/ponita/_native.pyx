# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ponita._fallback."""
import numpy as np
cimport numpy as cnp
from libc.math cimport erf, erff, exp, expf, sqrt, INFINITY

cnp.import_array()

ctypedef fused real:
    float
    double

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT2PI = 0.3989422804014327


def segment_sum(real[:, ::1] values, const cnp.int64_t[::1] index, Py_ssize_t num_segments):
    cdef Py_ssize_t E = values.shape[0], K = values.shape[1]
    cdef Py_ssize_t e, k, s
    if index.shape[0] != E:
        raise ValueError(f"index length {index.shape[0]} != rows {E}")
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((num_segments, K), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    for e in range(E):
        s = index[e]
        if s < 0 or s >= num_segments:
            raise IndexError(f"segment id {s} out of range [0, {num_segments})")
        for k in range(K):
            out[s, k] += values[e, k]
    return out_arr


def edge_conv(real[:, ::1] kernel, real[:, ::1] features,
              const cnp.int64_t[::1] senders, const cnp.int64_t[::1] receivers,
              Py_ssize_t num_nodes):
    cdef Py_ssize_t E = kernel.shape[0], K = kernel.shape[1]
    cdef Py_ssize_t P = features.shape[0]
    cdef Py_ssize_t e, k, r, s
    if features.shape[1] != K:
        raise ValueError(f"kernel width {K} != feature width {features.shape[1]}")
    if senders.shape[0] != E or receivers.shape[0] != E:
        raise ValueError("edge index length mismatch")
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((num_nodes, K), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    for e in range(E):
        r = receivers[e]
        s = senders[e]
        if r < 0 or r >= num_nodes or s < 0 or s >= P:
            raise IndexError(f"edge {e} = ({r} <- {s}) out of range")
        for k in range(K):
            out[r, k] += kernel[e, k] * features[s, k]
    return out_arr


def gelu(x):
    arr = np.ascontiguousarray(x)
    out = np.empty_like(arr)
    if arr.dtype == np.float32:
        _gelu_f(arr.reshape(-1), out.reshape(-1))
    else:
        _gelu_d(arr.reshape(-1), out.reshape(-1))
    return out


def gelu_deriv(x):
    arr = np.ascontiguousarray(x)
    out = np.empty_like(arr)
    if arr.dtype == np.float32:
        _gelu_deriv_f(arr.reshape(-1), out.reshape(-1))
    else:
        _gelu_deriv_d(arr.reshape(-1), out.reshape(-1))
    return out


cdef void _gelu_d(const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = 0.5 * x[i] * (1.0 + erf(x[i] * INV_SQRT2))


cdef void _gelu_f(const float[::1] x, float[::1] out) noexcept nogil:
    cdef Py_ssize_t i
    cdef float v
    for i in range(x.shape[0]):
        v = x[i]
        out[i] = <float>0.5 * v * (<float>1.0 + erff(v * <float>INV_SQRT2))


cdef void _gelu_deriv_d(const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i
    cdef double v
    for i in range(x.shape[0]):
        v = x[i]
        out[i] = 0.5 * (1.0 + erf(v * INV_SQRT2)) + v * INV_SQRT2PI * exp(-0.5 * v * v)


cdef void _gelu_deriv_f(const float[::1] x, float[::1] out) noexcept nogil:
    cdef Py_ssize_t i
    cdef float v
    for i in range(x.shape[0]):
        v = x[i]
        out[i] = <float>0.5 * (<float>1.0 + erff(v * <float>INV_SQRT2)) + v * <float>INV_SQRT2PI * expf(<float>-0.5 * v * v)


def gelu_pair(x):
    """(gelu(x), gelu'(x)) in one pass; shares the erf evaluation."""
    arr = np.ascontiguousarray(x)
    out = np.empty_like(arr)
    der = np.empty_like(arr)
    if arr.dtype == np.float32:
        _gelu_pair_f(arr.reshape(-1), out.reshape(-1), der.reshape(-1))
    else:
        _gelu_pair_d(arr.reshape(-1), out.reshape(-1), der.reshape(-1))
    return out, der


cdef void _gelu_pair_d(const double[::1] x, double[::1] out, double[::1] der) noexcept nogil:
    cdef Py_ssize_t i
    cdef double v, cdf
    for i in range(x.shape[0]):
        v = x[i]
        cdf = 0.5 * (1.0 + erf(v * INV_SQRT2))
        out[i] = v * cdf
        der[i] = cdf + v * INV_SQRT2PI * exp(-0.5 * v * v)


cdef void _gelu_pair_f(const float[::1] x, float[::1] out, float[::1] der) noexcept nogil:
    cdef Py_ssize_t i
    cdef float v, cdf
    for i in range(x.shape[0]):
        v = x[i]
        cdf = <float>0.5 * (<float>1.0 + erff(v * <float>INV_SQRT2))
        out[i] = v * cdf
        der[i] = cdf + v * <float>INV_SQRT2PI * expf(<float>-0.5 * v * v)


def repulsion_energy_grad(const double[:, ::1] points):
    cdef Py_ssize_t N = points.shape[0], n = points.shape[1]
    cdef Py_ssize_t i, j, d
    cdef double energy = 0.0, r2, inv, inv3, diff
    grad_arr = np.zeros((N, n), dtype=np.float64)
    cdef double[:, ::1] grad = grad_arr
    for i in range(N):
        for j in range(i + 1, N):
            r2 = 0.0
            for d in range(n):
                diff = points[i, d] - points[j, d]
                r2 += diff * diff
            if r2 == 0.0:
                return INFINITY, grad_arr
            inv = 1.0 / sqrt(r2)
            energy += inv
            inv3 = inv * inv * inv
            for d in range(n):
                diff = points[i, d] - points[j, d]
                grad[i, d] -= inv3 * diff
                grad[j, d] += inv3 * diff
    return energy, grad_arr
