"""Spectral calculus on the unit-area periodic grid.

All fields live on an n x n sampling of the flat torus [0,1)^2 with
n a power of two, so integrals carry the cell weight h^2 = 1/n^2 and
differential operators act diagonally in Fourier space with integer
wavenumbers.  Fields are immutable value objects; every operation
returns a new field and validates finiteness on construction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "sample_function",
    "random_smooth_field",
    "integral",
    "mean",
    "laplacian",
    "dirichlet_pairing",
    "log_integral_exp",
    "inverse_laplacian",
    "disk_mass",
    "field_to_bytes",
    "field_from_bytes",
    "save_field",
    "load_field",
    "write_field_csv",
]

TWO_PI_SQ = 2.0 * np.pi**2


def _validate_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 8 or (n & (n - 1)) != 0:
        raise ValueError("n must be a power of two ≥ 8")


@dataclass(frozen=True)
class GridSpec:
    """Resolution of the periodic grid; h = 1/n is the cell width."""

    n: int

    def __post_init__(self):
        _validate_n(self.n)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample coordinates (x, y) as 1-D arrays of length n."""
        xs = np.arange(self.n) / self.n
        return xs, xs.copy()


@lru_cache(maxsize=None)
def _ksq_rfft(n: int) -> np.ndarray:
    """|k|^2 on the half-spectrum grid used by rfft2, integer wavenumbers."""
    kx = np.fft.fftfreq(n, d=1.0 / n)
    ky = np.fft.rfftfreq(n, d=1.0 / n)
    return kx[:, None] ** 2 + ky[None, :] ** 2


@lru_cache(maxsize=None)
def _rfft_column_weights(n: int) -> np.ndarray:
    """Multiplicity of each rfft2 column when summing over the full spectrum.

    The ky = 0 and ky = n/2 columns are self-conjugate and count once;
    interior columns stand in for a conjugate pair and count twice.
    """
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


@dataclass(frozen=True)
class ScalarField:
    """Real field sampled on a GridSpec; values are read-only float64."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.shape != self.spec.shape:
            raise ValueError(
                f"field shape {arr.shape} does not match grid {self.spec.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite field")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def sample_function(spec: GridSpec, fn) -> ScalarField:
    """Sample fn(x, y) at the grid points (vectorized over meshgrid arrays)."""
    xs, ys = spec.coords()
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return ScalarField(spec, fn(gx, gy))


def random_smooth_field(
    spec: GridSpec, rng: np.random.Generator, k_max: int = 4, amplitude: float = 0.5
) -> ScalarField:
    """Band-limited Gaussian noise: modes with max(|k1|,|k2|) <= k_max.

    The result has zero mean and is rescaled so its max absolute value
    equals `amplitude`, which keeps test fields well resolved.
    """
    n = spec.n
    white = rng.standard_normal((n, n))
    fhat = np.fft.rfft2(white)
    kx = np.fft.fftfreq(n, d=1.0 / n)
    ky = np.fft.rfftfreq(n, d=1.0 / n)
    keep = (np.abs(kx)[:, None] <= k_max) & (ky[None, :] <= k_max)
    fhat[~keep] = 0.0
    fhat[0, 0] = 0.0
    vals = np.fft.irfft2(fhat, s=(n, n))
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals = vals * (amplitude / peak)
    return ScalarField(spec, vals)


def _require_same_grid(f: ScalarField, g: ScalarField) -> None:
    if f.spec != g.spec:
        raise ValueError("grid mismatch")


def integral(f: ScalarField) -> float:
    """Integral over the torus, h^2 times the sample sum."""
    return float(np.sum(f.values)) * f.spec.h**2


def mean(f: ScalarField) -> float:
    """Mean value; equals the integral since the torus has unit area."""
    return float(np.mean(f.values))


def laplacian(f: ScalarField) -> ScalarField:
    """Periodic Laplacian, eigenvalue -4 pi^2 |k|^2 on mode k.

    The mean is removed before transforming: the operator kills constants
    exactly, and keeping the large zero mode out of the transform stops
    its rounding noise from leaking into the high-wavenumber eigenvalues.
    """
    n = f.spec.n
    fhat = np.fft.rfft2(f.values - np.mean(f.values))
    out = np.fft.irfft2(-2.0 * TWO_PI_SQ * _ksq_rfft(n) * fhat, s=(n, n))
    return ScalarField(f.spec, out)


def dirichlet_pairing(f: ScalarField, g: ScalarField) -> float:
    """Energy pairing of gradients: sum over modes of 4 pi^2 |k|^2 Re(fhat conj(ghat)).

    Fourier coefficients are normalized to the unit torus (DFT / n^2),
    so the mode sum carries a 1/n^4 factor.
    """
    _require_same_grid(f, g)
    n = f.spec.n
    # means drop out of the pairing; removing them first keeps the large
    # zero mode from polluting the |k|^2-weighted sum with roundoff
    fhat = np.fft.rfft2(f.values - np.mean(f.values))
    ghat = np.fft.rfft2(g.values - np.mean(g.values))
    cross = np.real(fhat * np.conj(ghat)) * _ksq_rfft(n)
    total = float(np.sum(cross @ _rfft_column_weights(n)))
    return 2.0 * TWO_PI_SQ * total / n**4


def log_integral_exp(f: ScalarField) -> float:
    """log of the integral of exp(f), max-shifted so it never overflows."""
    m = float(np.max(f.values))
    return m + float(np.log(np.sum(np.exp(f.values - m)) * f.spec.h**2))


def inverse_laplacian(f: ScalarField) -> ScalarField:
    """Zero-mean solution g of -lap(g) = f; the source must have zero mean."""
    if abs(mean(f)) >= 1e-10:
        raise ValueError("incompatible source")
    n = f.spec.n
    fhat = np.fft.rfft2(f.values)
    denom = 2.0 * TWO_PI_SQ * _ksq_rfft(n)
    denom[0, 0] = 1.0  # placeholder; the zero mode is discarded below
    ghat = fhat / denom
    ghat[0, 0] = 0.0
    return ScalarField(f.spec, np.fft.irfft2(ghat, s=(n, n)))


def _periodic_dist_sq(spec: GridSpec, center: tuple[float, float]) -> np.ndarray:
    xs, ys = spec.coords()
    dx = np.abs(xs - center[0] % 1.0)
    dx = np.minimum(dx, 1.0 - dx)
    dy = np.abs(ys - center[1] % 1.0)
    dy = np.minimum(dy, 1.0 - dy)
    return dx[:, None] ** 2 + dy[None, :] ** 2


def disk_mass(rho: ScalarField, center: tuple[float, float], radius: float) -> float:
    """Mass of a nonnegative density inside a periodic disk (masked cell sum)."""
    if radius <= 0 or radius > 0.5:
        raise ValueError("radius must lie in (0, 0.5]")
    if np.min(rho.values) < 0:
        raise ValueError("density must be nonnegative")
    mask = _periodic_dist_sq(rho.spec, center) <= radius**2
    return float(np.sum(rho.values[mask])) * rho.spec.h**2


# ---------------------------------------------------------------------------
# serialization: binary container and CSV table

_HEADER = struct.Struct("<I")


def field_to_bytes(f: ScalarField) -> bytes:
    """Binary container: uint32 n (little-endian), then row-major float64."""
    return _HEADER.pack(f.spec.n) + f.values.astype("<f8").tobytes(order="C")


def field_from_bytes(data: bytes) -> ScalarField:
    if len(data) < _HEADER.size:
        raise ValueError("truncated field container")
    (n,) = _HEADER.unpack_from(data)
    _validate_n(n)
    body = data[_HEADER.size :]
    if len(body) != 8 * n * n:
        raise ValueError("truncated field container")
    vals = np.frombuffer(body, dtype="<f8").reshape(n, n)
    return ScalarField(GridSpec(int(n)), vals)


def save_field(f: ScalarField, path) -> None:
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(f))


def load_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def write_field_csv(f: ScalarField, path) -> None:
    """Plain-text dump with header x,y,value, one row per sample."""
    xs, ys = f.spec.coords()
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for i in range(f.spec.n):
            for j in range(f.spec.n):
                fh.write(f"{xs[i]:.17g},{ys[j]:.17g},{f.values[i, j]:.17g}\n")
