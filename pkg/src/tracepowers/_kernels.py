"""Hot numeric kernels, numba-compiled with a pure-numpy fallback.

Two inner loops dominate sampling throughput and are worth compiling: the
quaternionic column orthonormalization behind the compact-symplectic
sampler, and the trace-power sums over eigenangle batches.  The backend is
chosen once at import from the ``TRACEPOWERS_BACKEND`` environment variable
("numba" or "numpy"); the default is numba when it is importable.  Both
implementations of every kernel stay importable (see ``IMPLEMENTATIONS``)
so they can be benchmarked and cross-checked against each other.

Quaternions are carried in Cayley-Dickson form q = a + b*j with a, b
complex, so an n x n quaternion matrix is a pair of complex (n, n) arrays.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "IMPLEMENTATIONS",
    "quat_orthonormalize",
    "trace_powers",
]

_ENV_VAR = "TRACEPOWERS_BACKEND"


# ---------------------------------------------------------------------------
# Pure-numpy implementations (vectorized over the sample axis).
# ---------------------------------------------------------------------------

def _np_quat_orthonormalize(a: np.ndarray, b: np.ndarray) -> None:
    """In place, for each sample: classical Gram-Schmidt with one
    re-orthogonalization pass on the quaternion columns a[s] + b[s]*j,
    leaving the R diagonal positive real (the Haar-correct convention).

    Multiplication rule: (a1+b1*j)(a2+b2*j) = (a1*a2 - b1*conj(b2))
    + (a1*b2 + b1*conj(a2))*j; inner products put the conjugate on the
    left factor, projections put the scalar on the right of the column.
    """
    n = a.shape[1]
    for k in range(n):
        va = a[:, :, k].copy()
        vb = b[:, :, k].copy()
        if k:
            qa = a[:, :, :k]
            qb = b[:, :, :k]
            for _ in range(2):
                ha = (np.einsum("srk,sr->sk", qa.conj(), va)
                      + np.einsum("srk,sr->sk", qb, vb.conj()))
                hb = (np.einsum("srk,sr->sk", qa.conj(), vb)
                      - np.einsum("srk,sr->sk", qb, va.conj()))
                va = va - (np.einsum("srk,sk->sr", qa, ha)
                           - np.einsum("srk,sk->sr", qb, hb.conj()))
                vb = vb - (np.einsum("srk,sk->sr", qa, hb)
                           + np.einsum("srk,sk->sr", qb, ha.conj()))
        norm = np.sqrt((va.real ** 2 + va.imag ** 2
                        + vb.real ** 2 + vb.imag ** 2).sum(axis=1))
        a[:, :, k] = va / norm[:, None]
        b[:, :, k] = vb / norm[:, None]


def _np_trace_powers(angles: np.ndarray, js: np.ndarray) -> np.ndarray:
    """Sum of exp(i*j*theta) over each sample's angles, for every j."""
    phases = angles[:, :, None] * js[None, None, :]
    return np.exp(1j * phases).sum(axis=1)


# ---------------------------------------------------------------------------
# Numba implementations (per-sample loops, GIL released).
# ---------------------------------------------------------------------------

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _quat_orthonormalize_one(a, b):  # pragma: no cover - compiled
        n = a.shape[0]
        for k in range(n):
            for _ in range(2):
                for i in range(k):
                    ha = 0.0 + 0.0j
                    hb = 0.0 + 0.0j
                    for r in range(n):
                        ha += np.conj(a[r, i]) * a[r, k] \
                            + b[r, i] * np.conj(b[r, k])
                        hb += np.conj(a[r, i]) * b[r, k] \
                            - b[r, i] * np.conj(a[r, k])
                    for r in range(n):
                        qa = a[r, i]
                        qb = b[r, i]
                        a[r, k] -= qa * ha - qb * np.conj(hb)
                        b[r, k] -= qa * hb + qb * np.conj(ha)
            norm = 0.0
            for r in range(n):
                norm += (a[r, k].real ** 2 + a[r, k].imag ** 2
                         + b[r, k].real ** 2 + b[r, k].imag ** 2)
            inv = 1.0 / np.sqrt(norm)
            for r in range(n):
                a[r, k] *= inv
                b[r, k] *= inv

    @njit(cache=True, nogil=True)
    def _nb_quat_orthonormalize(a, b):  # pragma: no cover - compiled
        for s in range(a.shape[0]):
            _quat_orthonormalize_one(a[s], b[s])

    @njit(cache=True, nogil=True)
    def _nb_trace_powers(angles, js):  # pragma: no cover - compiled
        n_samples, dim = angles.shape
        n_js = js.shape[0]
        out = np.empty((n_samples, n_js), dtype=np.complex128)
        for s in range(n_samples):
            for q in range(n_js):
                re = 0.0
                im = 0.0
                for k in range(dim):
                    x = js[q] * angles[s, k]
                    re += np.cos(x)
                    im += np.sin(x)
                out[s, q] = complex(re, im)
        return out


IMPLEMENTATIONS: dict[str, dict] = {
    "numpy": {
        "quat_orthonormalize": _np_quat_orthonormalize,
        "trace_powers": _np_trace_powers,
    },
}
if _HAVE_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "quat_orthonormalize": _nb_quat_orthonormalize,
        "trace_powers": _nb_trace_powers,
    }


def _resolve_backend() -> str:
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested:
        if requested not in ("numba", "numpy"):
            raise ValueError(
                f"{_ENV_VAR} must be 'numba' or 'numpy', got {requested!r}")
        if requested == "numba" and not _HAVE_NUMBA:
            raise ImportError(f"{_ENV_VAR}=numba but numba is not importable")
        return requested
    return "numba" if _HAVE_NUMBA else "numpy"


BACKEND = _resolve_backend()

quat_orthonormalize = IMPLEMENTATIONS[BACKEND]["quat_orthonormalize"]
trace_powers = IMPLEMENTATIONS[BACKEND]["trace_powers"]
