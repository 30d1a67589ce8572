"""Hot loops: exhaustive Hölder pair scans and nonuniform trigonometric evaluation.

Each kernel has a numba implementation and a pure-numpy implementation with
identical semantics.  The numba path is used when numba imports cleanly and
``TORUSFLOW_DISABLE_NUMBA`` is not set to a truthy value; the flag is read once
at import time.  Both paths stay importable so tests and the benchmark can
compare them directly.
"""

import os

import numpy as np

_FLAG = os.environ.get("TORUSFLOW_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA and not _DISABLED

# pair blocks kept under ~64 MB of float64 temporaries
_BLOCK = 1024


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def holder_pairs_numpy(values, coords, periods, beta):
    """max_{i<j} |f_i - f_j| / d(x_i, x_j)^beta on a flat periodic grid.

    values: (m, c) samples (c = tensor components, compared in Euclidean norm)
    coords: (m, d) positions; periods: (d,) axis periods for the wrap-around distance.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    periods = np.asarray(periods, dtype=np.float64)
    m = values.shape[0]
    best = 0.0
    for i0 in range(0, m, _BLOCK):
        vi = values[i0:i0 + _BLOCK]
        xi = coords[i0:i0 + _BLOCK]
        for j0 in range(i0, m, _BLOCK):
            vj = values[j0:j0 + _BLOCK]
            xj = coords[j0:j0 + _BLOCK]
            diff = vi[:, None, :] - vj[None, :, :]
            num = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            dx = np.abs(xi[:, None, :] - xj[None, :, :])
            dx = np.minimum(dx, periods - dx)
            dist = np.sqrt(np.einsum("ijk,ijk->ij", dx, dx))
            mask = dist > 0.0
            if not mask.any():
                continue
            q = num[mask] / dist[mask] ** beta
            best = max(best, float(q.max()))
    return best


def time_holder_numpy(values, times, weight_exp, beta):
    """max over i<j of t_i^w * max_x |g_j(x) - g_i(x)| / (t_j - t_i)^(beta/4).

    values: (nt, m, c); times strictly increasing, t_i > 0 for weighted rows
    (rows with t_i == 0 contribute only if weight_exp == 0).
    """
    values = np.asarray(values, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    nt = values.shape[0]
    best = 0.0
    for i in range(nt - 1):
        ti = times[i]
        if ti <= 0.0 and weight_exp != 0.0:
            continue
        w = ti ** weight_exp if weight_exp != 0.0 else 1.0
        diff = values[i + 1:] - values[i]
        num = np.sqrt((diff * diff).sum(axis=-1)).max(axis=-1)
        h = times[i + 1:] - ti
        q = w * num / h ** (beta / 4.0)
        best = max(best, float(q.max()))
    return best


def trig_eval_numpy(coefs, freqs, points):
    """Real part of sum_k coefs_k exp(i freqs_k x) at arbitrary points x."""
    phase = np.exp(1j * np.outer(points, freqs))
    return (phase @ coefs).real


def real_trig_eval_numpy(rcoefs, points):
    """Real periodic interpolant and its derivative from half-spectrum coefficients.

    ``rcoefs`` is ``rfft(row) / n`` for an even-length row; the Nyquist term
    contributes a cosine to the value and nothing to the derivative.
    """
    m = rcoefs.shape[0] - 1
    k = np.arange(m + 1)
    w = np.full(m + 1, 2.0)
    w[0] = 1.0
    w[m] = 1.0
    ph = np.exp(1j * np.outer(points, k))
    val = (ph @ (w * rcoefs)).real
    kd = k * w
    kd[m] = 0.0
    der = (ph @ (1j * kd * rcoefs)).real
    return val, der


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _holder_pairs_nb(values, coords, periods, beta):
        m, c = values.shape
        d = coords.shape[1]
        best = 0.0
        for i in range(m):
            for j in range(i + 1, m):
                dist2 = 0.0
                for a in range(d):
                    dx = abs(coords[i, a] - coords[j, a])
                    alt = periods[a] - dx
                    if alt < dx:
                        dx = alt
                    dist2 += dx * dx
                if dist2 <= 0.0:
                    continue
                num2 = 0.0
                for k in range(c):
                    df = values[i, k] - values[j, k]
                    num2 += df * df
                q = np.sqrt(num2) / dist2 ** (0.5 * beta)
                if q > best:
                    best = q
        return best

    @njit(cache=True)
    def _time_holder_nb(values, times, weight_exp, beta):
        nt, m, c = values.shape
        best = 0.0
        for i in range(nt - 1):
            ti = times[i]
            if ti <= 0.0 and weight_exp != 0.0:
                continue
            w = ti ** weight_exp if weight_exp != 0.0 else 1.0
            for j in range(i + 1, nt):
                h = (times[j] - ti) ** (beta / 4.0)
                for x in range(m):
                    num2 = 0.0
                    for k in range(c):
                        df = values[j, x, k] - values[i, x, k]
                        num2 += df * df
                    q = w * np.sqrt(num2) / h
                    if q > best:
                        best = q
        return best

    @njit(cache=True)
    def _trig_eval_nb(coefs_re, coefs_im, freqs, points):
        out = np.empty(points.shape[0])
        for p in range(points.shape[0]):
            x = points[p]
            acc = 0.0
            for k in range(freqs.shape[0]):
                ang = freqs[k] * x
                acc += coefs_re[k] * np.cos(ang) - coefs_im[k] * np.sin(ang)
            out[p] = acc
        return out


    @njit(cache=True)
    def _real_trig_eval_nb(cre, cim, points):
        m = cre.shape[0] - 1
        val = np.empty(points.shape[0])
        der = np.empty(points.shape[0])
        for p in range(points.shape[0]):
            c1 = np.cos(points[p])
            s1 = np.sin(points[p])
            zr, zi = 1.0, 0.0
            v = cre[0]
            d = 0.0
            for k in range(1, m + 1):
                zr, zi = zr * c1 - zi * s1, zr * s1 + zi * c1
                re = cre[k] * zr - cim[k] * zi
                if k < m:
                    im = cre[k] * zi + cim[k] * zr
                    v += 2.0 * re
                    d -= 2.0 * k * im
                else:
                    v += re
            val[p] = v
            der[p] = d
        return val, der


def holder_pairs_numba(values, coords, periods, beta):
    return float(_holder_pairs_nb(np.ascontiguousarray(values, dtype=np.float64),
                                  np.ascontiguousarray(coords, dtype=np.float64),
                                  np.asarray(periods, dtype=np.float64), float(beta)))


def time_holder_numba(values, times, weight_exp, beta):
    return float(_time_holder_nb(np.ascontiguousarray(values, dtype=np.float64),
                                 np.asarray(times, dtype=np.float64),
                                 float(weight_exp), float(beta)))


def trig_eval_numba(coefs, freqs, points):
    coefs = np.asarray(coefs, dtype=np.complex128)
    return _trig_eval_nb(np.ascontiguousarray(coefs.real), np.ascontiguousarray(coefs.imag),
                         np.asarray(freqs, dtype=np.float64),
                         np.ascontiguousarray(points, dtype=np.float64))


def real_trig_eval_numba(rcoefs, points):
    rcoefs = np.asarray(rcoefs, dtype=np.complex128)
    return _real_trig_eval_nb(np.ascontiguousarray(rcoefs.real), np.ascontiguousarray(rcoefs.imag),
                              np.ascontiguousarray(points, dtype=np.float64))


if USING_NUMBA:
    holder_pairs = holder_pairs_numba
    time_holder = time_holder_numba
    trig_eval = trig_eval_numba
    real_trig_eval = real_trig_eval_numba
else:
    holder_pairs = holder_pairs_numpy
    time_holder = time_holder_numpy
    trig_eval = trig_eval_numpy
    real_trig_eval = real_trig_eval_numpy
