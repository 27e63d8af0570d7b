"""Numerical kernels for bridge likelihood sums.

The scoring hot path reduces each document to two floats:

* ``sum_log_alpha`` -- sum over interior rows of ``log(alpha_i)``, where
  ``alpha_i = 2*pi*(i-1)*(T-i)/(T-1)`` (1-based positions ``i = 2..T-1``);
* ``sum_beta`` -- sum of the normalized squared deviations
  ``beta_i = (T-1)*||s_i - mu_i||^2 / (2*(i-1)*(T-i))`` from the straight
  line ``mu_i`` between the endpoints.

Every score, log-likelihood, and diffusion estimate is a cheap function of
those two numbers, so grid sweeps re-use a single pass over the data.

Kernels come in two flavors: numba ``@njit`` implementations and pure-numpy
fallbacks.  The active flavor is chosen at import time: set the environment
variable ``BBSCORE_NO_NUMBA`` to a non-empty value (other than ``0``) to
force the numpy path; otherwise numba is used when importable.  The module
attribute ``USING_NUMBA`` records the outcome, and both flavors stay
importable for benchmarking.

Kernels do not validate their input (callers are responsible for ``T >= 3``
and finite values); they are deliberately dumb inner loops.
"""

import os

import numpy as np

TWO_PI = 2.0 * np.pi


def _numba_disabled() -> bool:
    flag = os.environ.get("BBSCORE_NO_NUMBA", "")
    return flag not in ("", "0")


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def bridge_parts_numpy(rows):
    """Return ``(sum_log_alpha, sum_beta)`` for one document ``(T, n)``."""
    T = rows.shape[0]
    j = np.arange(1, T - 1, dtype=np.float64)  # interior offsets, 1-based i = j+1
    span = float(T - 1)
    weight = j * (span - j)
    mu = rows[0] + (j / span)[:, None] * (rows[-1] - rows[0])
    sq = ((rows[1:-1] - mu) ** 2).sum(axis=1)
    sum_log_alpha = float(np.sum(np.log(TWO_PI * weight / span)))
    sum_beta = float(np.sum(span * sq / (2.0 * weight)))
    return sum_log_alpha, sum_beta


def bridge_parts_many_numpy(flat, offsets):
    """Per-document parts for a ragged corpus.

    ``flat`` stacks all rows ``(N, n)``; ``offsets`` has length ``D + 1`` and
    document ``k`` occupies ``flat[offsets[k]:offsets[k+1]]``.
    """
    ndoc = len(offsets) - 1
    sum_log_alpha = np.empty(ndoc, dtype=np.float64)
    sum_beta = np.empty(ndoc, dtype=np.float64)
    for k in range(ndoc):
        a, b = bridge_parts_numpy(flat[offsets[k]:offsets[k + 1]])
        sum_log_alpha[k] = a
        sum_beta[k] = b
    return sum_log_alpha, sum_beta


def windowed_beta_sum_numpy(rows, w):
    """Sum of windowed deviations ``beta_{i,w}`` for half-width ``w``.

    Windows are centered on positions ``i = w+1 .. T-w`` (1-based) and the
    local straight line runs from ``s_{i-w}`` to ``s_{i+w}``:

        mu_i   = s_{i-w} + ((w+1)/(2w+1)) * (s_{i+w} - s_{i-w})
        beta_i = (2w+1) * ||s_i - mu_i||^2 / (2*w*(w+1))
    """
    T = rows.shape[0]
    left = rows[: T - 2 * w]
    right = rows[2 * w:]
    center = rows[w: T - w]
    mu = left + ((w + 1.0) / (2.0 * w + 1.0)) * (right - left)
    sq = ((center - mu) ** 2).sum(axis=1)
    return float(np.sum((2.0 * w + 1.0) * sq / (2.0 * w * (w + 1.0))))


def windowed_beta_sum_many_numpy(flat, offsets, w):
    ndoc = len(offsets) - 1
    out = np.empty(ndoc, dtype=np.float64)
    for k in range(ndoc):
        out[k] = windowed_beta_sum_numpy(flat[offsets[k]:offsets[k + 1]], w)
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

bridge_parts_jit = None
bridge_parts_many_jit = None
windowed_beta_sum_jit = None
windowed_beta_sum_many_jit = None

_numba_ok = False
if not _numba_disabled():
    try:
        from numba import njit

        @njit(cache=True)
        def _bridge_parts(rows):  # pragma: no cover - exercised via wrapper
            T = rows.shape[0]
            n = rows.shape[1]
            span = T - 1.0
            sum_log_alpha = 0.0
            sum_beta = 0.0
            for j in range(1, T - 1):
                weight = j * (span - j)
                frac = j / span
                sq = 0.0
                for d in range(n):
                    mu = rows[0, d] + frac * (rows[T - 1, d] - rows[0, d])
                    diff = rows[j, d] - mu
                    sq += diff * diff
                sum_log_alpha += np.log(TWO_PI * weight / span)
                sum_beta += span * sq / (2.0 * weight)
            return sum_log_alpha, sum_beta

        @njit(cache=True)
        def _bridge_parts_many(flat, offsets):  # pragma: no cover
            ndoc = offsets.shape[0] - 1
            sum_log_alpha = np.empty(ndoc, dtype=np.float64)
            sum_beta = np.empty(ndoc, dtype=np.float64)
            for k in range(ndoc):
                a, b = _bridge_parts(flat[offsets[k]:offsets[k + 1]])
                sum_log_alpha[k] = a
                sum_beta[k] = b
            return sum_log_alpha, sum_beta

        @njit(cache=True)
        def _windowed_beta_sum(rows, w):  # pragma: no cover
            T = rows.shape[0]
            n = rows.shape[1]
            lam = (w + 1.0) / (2.0 * w + 1.0)
            scale = (2.0 * w + 1.0) / (2.0 * w * (w + 1.0))
            total = 0.0
            for c in range(w, T - w):
                sq = 0.0
                for d in range(n):
                    mu = rows[c - w, d] + lam * (rows[c + w, d] - rows[c - w, d])
                    diff = rows[c, d] - mu
                    sq += diff * diff
                total += scale * sq
            return total

        @njit(cache=True)
        def _windowed_beta_sum_many(flat, offsets, w):  # pragma: no cover
            ndoc = offsets.shape[0] - 1
            out = np.empty(ndoc, dtype=np.float64)
            for k in range(ndoc):
                out[k] = _windowed_beta_sum(flat[offsets[k]:offsets[k + 1]], w)
            return out

        bridge_parts_jit = _bridge_parts
        bridge_parts_many_jit = _bridge_parts_many
        windowed_beta_sum_jit = _windowed_beta_sum
        windowed_beta_sum_many_jit = _windowed_beta_sum_many
        _numba_ok = True
    except ImportError:  # numba missing: quietly fall back
        _numba_ok = False

USING_NUMBA = _numba_ok

if USING_NUMBA:
    bridge_parts = bridge_parts_jit
    bridge_parts_many = bridge_parts_many_jit
    windowed_beta_sum = windowed_beta_sum_jit
    windowed_beta_sum_many = windowed_beta_sum_many_jit
else:
    bridge_parts = bridge_parts_numpy
    bridge_parts_many = bridge_parts_many_numpy
    windowed_beta_sum = windowed_beta_sum_numpy
    windowed_beta_sum_many = windowed_beta_sum_many_numpy


def pack_ragged(list_of_rows):
    """Stack a list of ``(T_k, n)`` arrays into ``(flat, offsets)`` form."""
    offsets = np.zeros(len(list_of_rows) + 1, dtype=np.int64)
    for k, rows in enumerate(list_of_rows):
        offsets[k + 1] = offsets[k] + rows.shape[0]
    if list_of_rows:
        flat = np.concatenate([np.ascontiguousarray(r, dtype=np.float64)
                               for r in list_of_rows], axis=0)
    else:
        flat = np.zeros((0, 0), dtype=np.float64)
    return flat, offsets
