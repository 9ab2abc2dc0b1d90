"""Haar sampling, eigenangle statistics and the empirical KS distance.

Samplers
--------
U(n): complex Ginibre -> QR, then rescale the columns by the phases of the
R diagonal (plain QR of a Ginibre matrix is *not* Haar; the phase fix makes
the R diagonal positive real, which is).  SO(n): real Ginibre -> QR with
the sign fix, giving Haar on O(n); samples landing on the det = -1 coset
are moved to SO(n) by negating a fixed column (right translation by a fixed
reflection preserves Haar).  USp(2n): quaternion Ginibre in Cayley-Dickson
form, orthonormalized over the quaternions with a positive real R diagonal
(see ``_kernels``), then embedded as the 2n x 2n complex block matrix
[[A, B], [-conj(B), conj(A)]], which is structurally compatible with the
alternating form J.

Every emitted sample is validated against its membership residuals
(unitarity, determinant, J-compatibility, eigenvalue moduli, conjugate
pairing); violations raise :class:`IntegrityError` rather than polluting
statistics.

Randomness is counter-based (Philox) with one child stream per fixed-size
chunk, so runs are reproducible for a given (seed, group, n, count) no
matter how many worker threads execute the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.special import erfc

from . import _kernels
from .stein import StatisticSpec
from .symfunc import Group, Monomial

__all__ = [
    "IntegrityError",
    "MatrixSample",
    "SpectralSample",
    "BatchStats",
    "ExperimentBatch",
    "TOLERANCES",
    "DEFAULT_CHUNK",
    "sample_unitary",
    "sample_special_orthogonal",
    "sample_symplectic",
    "eigenangles",
    "trace_power",
    "traces_via_matrix_powers",
    "statistic_w",
    "normal_cdf",
    "ks_distance",
    "empirical_moment",
    "sample_traces",
    "batch_stats",
    "worker_count",
]

DEFAULT_CHUNK = 1024
_WORKERS_ENV = "TRACEPOWERS_WORKERS"

TOLERANCES = {
    "unitarity": 1e-10,
    "determinant": 1e-8,
    "symplectic_form": 1e-10,
    "eigen_modulus": 1e-8,
    "angle_symmetry": 1e-8,
    "trace_imag": 1e-8,
}


class IntegrityError(RuntimeError):
    """A sample failed its membership or numerical-integrity checks."""


def worker_count() -> int:
    env = os.environ.get(_WORKERS_ENV, "").strip()
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def matrix_dim(group: Group, n: int) -> int:
    return 2 * n if group is Group.USP else n


# ---------------------------------------------------------------------------
# Batched samplers (arrays of shape (count, dim, dim)).
# ---------------------------------------------------------------------------

def _as_generator(rng: "np.random.Generator | int") -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))


def sample_unitary_batch(n: int, count: int,
                         rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((count, n, n)) \
        + 1j * rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(z)
    d = np.einsum("...ii->...i", r)
    q *= (d / np.abs(d))[:, None, :]
    return q


def sample_special_orthogonal_batch(n: int, count: int,
                                    rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(g)
    d = np.einsum("...ii->...i", r)
    q *= np.sign(d)[:, None, :]
    sign, _ = np.linalg.slogdet(q)
    q[sign < 0, :, 0] *= -1.0
    return q


def sample_symplectic_batch(n: int, count: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Haar on USp(2n), returned as (count, 2n, 2n) complex matrices."""
    a = rng.standard_normal((count, n, n)) \
        + 1j * rng.standard_normal((count, n, n))
    b = rng.standard_normal((count, n, n)) \
        + 1j * rng.standard_normal((count, n, n))
    _kernels.quat_orthonormalize(a, b)
    m = np.empty((count, 2 * n, 2 * n), dtype=np.complex128)
    m[:, :n, :n] = a
    m[:, :n, n:] = b
    m[:, n:, :n] = -b.conj()
    m[:, n:, n:] = a.conj()
    return m


_BATCH_SAMPLERS = {
    Group.U: sample_unitary_batch,
    Group.SO: sample_special_orthogonal_batch,
    Group.USP: sample_symplectic_batch,
}


def symplectic_form(n: int) -> np.ndarray:
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def membership_residuals(matrices: np.ndarray, group: Group,
                         n: int) -> dict[str, float]:
    """Max membership residuals over a batch (unitarity, det, form)."""
    m = matrices if matrices.ndim == 3 else matrices[None]
    mh = np.conj(np.transpose(m, (0, 2, 1)))
    dim = matrix_dim(group, n)
    eye = np.eye(dim)
    out = {"unitarity": float(np.abs(mh @ m - eye).max())}
    if group is Group.SO:
        sign, logdet = np.linalg.slogdet(m)
        det = sign * np.exp(logdet)
        out["determinant"] = float(np.abs(det - 1.0).max())
        if np.iscomplexobj(m):
            out["realness"] = float(np.abs(m.imag).max())
    if group is Group.USP:
        j = symplectic_form(n)
        mt = np.transpose(m, (0, 2, 1))
        out["symplectic_form"] = float(np.abs(m @ j @ mt - j).max())
    return out


def _validate_residuals(res: Mapping[str, float], context: str) -> None:
    for name, value in res.items():
        tol = TOLERANCES.get(name, TOLERANCES["unitarity"])
        if value > tol:
            raise IntegrityError(
                f"{context}: residual {name}={value:.3e} exceeds {tol:.0e}")


# ---------------------------------------------------------------------------
# Single-sample interface.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixSample:
    """One group element with its sampling provenance."""

    matrix: np.ndarray
    group: Group
    n: int
    seed: int | None = None
    stream: int = 0
    index: int = 0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def residuals(self) -> dict[str, float]:
        return membership_residuals(self.matrix, self.group, self.n)

    def validate(self) -> "MatrixSample":
        _validate_residuals(self.residuals(),
                            f"{self.group.value}(n={self.n}) seed={self.seed}")
        return self


def _sample_one(group: Group, n: int,
                rng: "np.random.Generator | int") -> MatrixSample:
    seed = rng if isinstance(rng, int) else None
    gen = _as_generator(rng)
    m = _BATCH_SAMPLERS[group](n, 1, gen)[0]
    return MatrixSample(m, group, n, seed=seed).validate()


def sample_unitary(n: int, rng: "np.random.Generator | int") -> MatrixSample:
    """One Haar sample from U(n)."""
    return _sample_one(Group.U, n, rng)


def sample_special_orthogonal(n: int,
                              rng: "np.random.Generator | int") -> MatrixSample:
    """One Haar sample from SO(n)."""
    return _sample_one(Group.SO, n, rng)


def sample_symplectic(n: int,
                      rng: "np.random.Generator | int") -> MatrixSample:
    """One Haar sample from USp(2n) (a 2n x 2n matrix)."""
    return _sample_one(Group.USP, n, rng)


@dataclass(frozen=True)
class SpectralSample:
    """Sorted eigenangles of one sample, in (-pi, pi]."""

    angles: np.ndarray
    group: Group
    n: int

    @property
    def dim(self) -> int:
        return self.angles.shape[0]


def _eigenangles_batch(matrices: np.ndarray, group: Group, n: int,
                       context: str = "") -> np.ndarray:
    try:
        ev = np.linalg.eigvals(matrices)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - no known input
        raise IntegrityError(f"eigensolver failed ({context}): {exc}") from exc
    modulus = float(np.abs(np.abs(ev) - 1.0).max())
    if modulus > TOLERANCES["eigen_modulus"]:
        raise IntegrityError(
            f"eigenvalue modulus residual {modulus:.3e} ({context})")
    angles = np.sort(np.angle(ev), axis=-1)
    if group in (Group.SO, Group.USP):
        sym = float(np.abs(angles + angles[..., ::-1]).max())
        if sym > TOLERANCES["angle_symmetry"]:
            raise IntegrityError(
                f"conjugate-pair symmetry residual {sym:.3e} ({context})")
    return angles


def eigenangles(sample: MatrixSample) -> SpectralSample:
    """All eigenangles of the sample, sorted, with integrity checks."""
    ang = _eigenangles_batch(sample.matrix[None], sample.group, sample.n,
                             context=f"seed={sample.seed}")[0]
    return SpectralSample(ang, sample.group, sample.n)


def trace_power(spectral: SpectralSample, j: int) -> "complex | float":
    """Tr(M^j) from the eigenangles; real groups drop the imaginary part."""
    if j == 0:
        raise ValueError("j must be a nonzero integer")
    value = complex(np.exp(1j * j * spectral.angles).sum())
    if spectral.group is Group.U:
        return value
    if abs(value.imag) > TOLERANCES["trace_imag"]:
        raise IntegrityError(
            f"trace of a real-spectrum group has imaginary part {value.imag:.3e}")
    return value.real


def traces_via_matrix_powers(sample: MatrixSample,
                             js: Iterable[int]) -> dict[int, complex]:
    """Slow cross-check path: Tr(M^j) by repeated matrix multiplication."""
    out: dict[int, complex] = {}
    m = np.asarray(sample.matrix, dtype=np.complex128)
    for j in js:
        base = m if j > 0 else np.conj(m.T)
        acc = np.eye(m.shape[0], dtype=np.complex128)
        for _ in range(abs(j)):
            acc = acc @ base
        out[j] = complex(np.trace(acc))
    return out


def statistic_w(spec: StatisticSpec, spectral: SpectralSample) -> float:
    """The real normalized statistic W evaluated on one spectrum."""
    if spec.group is not spectral.group:
        raise ValueError("group mismatch between spec and sample")
    tr = trace_power(spectral, spec.j)
    if spec.group is Group.U:
        return float((2.0 * tr.real) / math.sqrt(2 * spec.j))
    return float((tr + spec.shift) / math.sqrt(spec.j))


def _w_from_traces(spec: StatisticSpec, traces: np.ndarray) -> np.ndarray:
    if spec.group is Group.U:
        return 2.0 * traces.real / math.sqrt(2 * spec.j)
    imag = float(np.abs(traces.imag).max()) if traces.size else 0.0
    if imag > TOLERANCES["trace_imag"]:
        raise IntegrityError(f"trace imaginary residual {imag:.3e}")
    return (traces.real + spec.shift) / math.sqrt(spec.j)


# ---------------------------------------------------------------------------
# Normal CDF and the one-sample Kolmogorov statistic.
# ---------------------------------------------------------------------------

def normal_cdf(x):
    """Standard normal CDF via the complementary error function."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * erfc(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BatchStats:
    """Per-(group, n, j) empirical summary of the W sample."""

    group: Group
    n: int
    j: int
    count: int
    seed: int
    w_sorted: np.ndarray
    mean: float
    variance: float

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count)


def ks_distance(batch: "BatchStats | np.ndarray") -> float:
    """Exact sup-distance between the empirical CDF and the normal CDF."""
    w = batch.w_sorted if isinstance(batch, BatchStats) else np.sort(
        np.asarray(batch, dtype=np.float64))
    count = w.shape[0]
    if count < 1:
        raise ValueError("need at least one sample")
    cdf = normal_cdf(w)
    grid = np.arange(1, count + 1, dtype=np.float64) / count
    upper = float(np.max(grid - cdf))
    lower = float(np.max(cdf - (grid - 1.0 / count)))
    return max(upper, lower, 0.0)


# ---------------------------------------------------------------------------
# Chunked, threaded experiment driver.
# ---------------------------------------------------------------------------

@dataclass
class ExperimentBatch:
    """All trace powers of one (group, n) run, aggregated in chunk order."""

    group: Group
    n: int
    count: int
    seed: int
    traces: dict[int, np.ndarray]
    residual_max: dict[str, float] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return matrix_dim(self.group, self.n)


def _chunk_sizes(count: int, chunk: int) -> list[int]:
    sizes = [chunk] * (count // chunk)
    if count % chunk:
        sizes.append(count % chunk)
    return sizes


def sample_traces(group: Group, n: int, count: int, seed: int,
                  js: Iterable[int], *, workers: int | None = None,
                  chunk: int = DEFAULT_CHUNK,
                  validate: bool = True) -> ExperimentBatch:
    """Sample ``count`` Haar matrices and collect Tr(M^j) for every j.

    Chunks own independent Philox child streams and are aggregated by
    index, so the result is reproducible for fixed (seed, group, n, count,
    chunk) regardless of the worker count.
    """
    js = sorted(set(int(j) for j in js))
    if any(j < 1 for j in js):
        raise ValueError("trace powers need j >= 1")
    if count < 1:
        raise ValueError("need count >= 1")
    sizes = _chunk_sizes(count, chunk)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    js_arr = np.asarray(js, dtype=np.int64)
    sampler = _BATCH_SAMPLERS[group]

    def run_chunk(args):
        size, stream = args
        rng = np.random.Generator(np.random.Philox(stream))
        matrices = sampler(n, size, rng)
        residuals = membership_residuals(matrices, group, n)
        if validate:
            _validate_residuals(residuals, f"{group.value}(n={n}) seed={seed}")
        angles = _eigenangles_batch(matrices, group, n,
                                    context=f"seed={seed}")
        tp = _kernels.trace_powers(np.ascontiguousarray(angles), js_arr)
        return tp, residuals

    n_workers = workers if workers is not None else worker_count()
    if n_workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_chunk, zip(sizes, streams)))
    else:
        results = [run_chunk(args) for args in zip(sizes, streams)]

    all_tp = np.concatenate([tp for tp, _ in results], axis=0)
    residual_max: dict[str, float] = {}
    for _, res in results:
        for key, value in res.items():
            residual_max[key] = max(residual_max.get(key, 0.0), value)
    traces = {j: np.ascontiguousarray(all_tp[:, idx])
              for idx, j in enumerate(js)}
    return ExperimentBatch(group, n, count, seed, traces, residual_max)


def batch_stats(batch: ExperimentBatch, j: int) -> BatchStats:
    """W statistics for one j of a sampled batch."""
    if j not in batch.traces:
        raise KeyError(f"trace power {j} was not collected")
    spec = StatisticSpec(batch.group, j)
    w = _w_from_traces(spec, batch.traces[j])
    w_sorted = np.sort(w)
    mean = float(w.mean())
    variance = float(w.var(ddof=1)) if batch.count > 1 else 0.0
    return BatchStats(batch.group, batch.n, j, batch.count, batch.seed,
                      w_sorted, mean, variance)


def empirical_moment(batch: ExperimentBatch,
                     monomial: Monomial) -> tuple[complex, float]:
    """Sample mean and standard error of a trace-power monomial.

    The empty monomial is exactly 1 with zero error.  For the real-spectrum
    groups the product is real; on U it is complex and the standard error
    combines both components (sqrt of the complex variance over N).
    """
    if not monomial.letters:
        return 1.0 + 0.0j, 0.0
    values = np.ones(batch.count, dtype=np.complex128)
    for letter in monomial.letters:
        if letter.index not in batch.traces:
            raise KeyError(f"trace power {letter.index} was not collected")
        factor = batch.traces[letter.index]
        values = values * (np.conj(factor) if letter.conjugated else factor)
    if batch.group is not Group.U:
        values = values.real.astype(np.complex128)
    mean = complex(values.mean())
    if batch.count > 1:
        se = math.sqrt(float(np.var(values, ddof=1).real) / batch.count)
    else:
        se = 0.0
    return mean, se
