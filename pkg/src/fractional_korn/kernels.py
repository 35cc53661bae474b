"""Hot numeric kernels, in a numba and a pure-numpy flavour.

``grid_pair_sum`` is bound to the numba version when numba is importable and
``FRACKORN_DISABLE_NUMBA`` is unset; the element-wise pair kernels always
use numpy.
Both flavours are always importable under ``*_numba`` / ``*_numpy`` so the
benchmark and the tests can compare them.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


def pair_values_numpy(du, theta, r, weight, p, exponent, projected):
    """Weighted difference-quotient integrand for a batch of pairs.

    Returns ``weight * |du|^p / r^exponent`` or, with ``projected``, the same
    with ``|du . theta|`` in place of ``|du|``.
    """
    if projected:
        a = np.abs(np.einsum("ij,ij->i", du, theta))
    else:
        a = np.sqrt(np.einsum("ij,ij->i", du, du))
    out = np.zeros(r.shape[0])
    nz = weight != 0.0
    out[nz] = weight[nz] * a[nz] ** p / r[nz] ** exponent
    return out


@njit
def pair_values_numba(du, theta, r, weight, p, exponent, projected):
    n, d = du.shape
    out = np.zeros(n)
    for i in range(n):
        w = weight[i]
        if w == 0.0:
            continue
        a = 0.0
        if projected:
            for k in range(d):
                a += du[i, k] * theta[i, k]
            a = abs(a)
        else:
            for k in range(d):
                a += du[i, k] * du[i, k]
            a = np.sqrt(a)
        if a > 0.0:
            # one exp instead of two float powers
            out[i] = w * np.exp(p * np.log(a) - exponent * np.log(r[i]))
    return out


def pair_columns_numpy(du, theta, r, p, exponent):
    """Both integrands at once: column 0 full, column 1 projected."""
    rinv = r ** -exponent
    out = np.empty((r.shape[0], 2))
    out[:, 0] = np.einsum("ij,ij->i", du, du) ** (0.5 * p) * rinv
    out[:, 1] = np.abs(np.einsum("ij,ij->i", du, theta)) ** p * rinv
    return out


@njit
def pair_columns_numba(du, theta, r, p, exponent):
    n, d = du.shape
    out = np.zeros((n, 2))
    for i in range(n):
        sq = 0.0
        dot = 0.0
        for k in range(d):
            sq += du[i, k] * du[i, k]
            dot += du[i, k] * theta[i, k]
        if sq == 0.0:
            continue
        lr = exponent * np.log(r[i])
        out[i, 0] = np.exp(0.5 * p * np.log(sq) - lr)
        if dot != 0.0:
            out[i, 1] = np.exp(p * np.log(abs(dot)) - lr)
    return out


def grid_pair_sum_numpy(points, values, weights, p, exponent, projected, block=512):
    """Sum over ordered pairs i != j of w_i w_j |du|^p / |x_i - x_j|^exponent."""
    n = points.shape[0]
    total = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        dx = points[None, :, :] - points[start:stop, None, :]
        du = values[None, :, :] - values[start:stop, None, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", dx, dx))
        if projected:
            a = np.abs(np.einsum("ijk,ijk->ij", du, dx))
            safe = np.where(r > 0, r, 1.0)
            a = a / safe
        else:
            a = np.sqrt(np.einsum("ijk,ijk->ij", du, du))
        w = weights[start:stop, None] * weights[None, :]
        r_safe = np.where(r > 0, r, 1.0)
        term = np.where(r > 0, w * a ** p / r_safe ** exponent, 0.0)
        total += float(term.sum())
    return total


@njit
def grid_pair_sum_numba(points, values, weights, p, exponent, projected):
    n, d = points.shape
    total = 0.0
    for i in range(n):
        row = 0.0
        wi = weights[i]
        for j in range(i + 1, n):
            r2 = 0.0
            for k in range(d):
                t = points[j, k] - points[i, k]
                r2 += t * t
            r = np.sqrt(r2)
            a = 0.0
            if projected:
                for k in range(d):
                    a += (values[j, k] - values[i, k]) * (points[j, k] - points[i, k])
                a = abs(a) / r
            else:
                for k in range(d):
                    t = values[j, k] - values[i, k]
                    a += t * t
                a = np.sqrt(a)
            row += weights[j] * a ** p / r ** exponent
        total += wi * row
    return 2.0 * total


# Element-wise pair kernels are bound to numpy in both modes: vectorised
# float powers match the compiled loop (see benchmarks/bench_kernels.py).
# The O(N^2) grid sum is where compilation pays off.
pair_values = pair_values_numpy
pair_columns = pair_columns_numpy
grid_pair_sum = grid_pair_sum_numba if USE_NUMBA else grid_pair_sum_numpy
