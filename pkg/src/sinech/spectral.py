"""Sine-basis spectral representation on the square (0, side)^2.

Fields satisfying u = lap(u) = 0 on the boundary are expanded in the
L2-orthonormal eigenbasis of A = -lap with Dirichlet conditions,

    e_jk(x, y) = (2/side) sin(j pi x/side) sin(k pi y/side),
    eigenvalue(j, k) = (j pi/side)^2 + (k pi/side)^2,

truncated to 1 <= j, k <= n_modes.  Fractional powers of A are diagonal
in this basis, which makes the Sobolev-scale norms used throughout the
package cheap modal sums.

Nodal representations live on the interior collocation points
x_p = p*side/(n+1), 1 <= p <= n; the modal<->nodal maps are type-I
discrete sine transforms, O(n^2 log n) via scipy.fft.  The interior
quadrature sum with weight (side/(n+1))^2 reproduces the L2 norm of a
band-limited field exactly (discrete Parseval).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .errors import DimensionMismatchError, FileFormatError

_MFLD_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Square-domain discretization: n_modes per axis on (0, side)^2."""

    n_modes: int
    side: float

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        if not (self.side > 0.0):
            raise ValueError(f"side must be > 0, got {self.side}")

    @property
    def shape(self):
        return (self.n_modes, self.n_modes)


@lru_cache(maxsize=64)
def _eigenvalue_table(n_modes: int, side: float) -> np.ndarray:
    j = np.arange(1, n_modes + 1) * np.pi / side
    lam = j[:, None] ** 2 + j[None, :] ** 2
    lam.setflags(write=False)
    return lam


def eigenvalues(grid: GridSpec) -> np.ndarray:
    """Read-only (n, n) table of eigenvalue(j, k), 1-based mode indices."""
    return _eigenvalue_table(grid.n_modes, grid.side)


def eigenvalue(grid: GridSpec, j: int, k: int) -> float:
    """Eigenvalue of A = -lap for mode (j, k); indices are 1-based."""
    _check_mode(grid, j, k)
    return float(eigenvalues(grid)[j - 1, k - 1])


def lambda_max(grid: GridSpec) -> float:
    """Largest resolved eigenvalue, 2*(n_modes*pi/side)^2."""
    return 2.0 * (grid.n_modes * np.pi / grid.side) ** 2


def _check_mode(grid: GridSpec, j: int, k: int) -> None:
    n = grid.n_modes
    if not (1 <= j <= n and 1 <= k <= n):
        raise IndexError(
            f"mode ({j}, {k}) outside 1..{n} for n_modes={n}"
        )


@dataclass
class ModalField:
    """Coefficients against the orthonormal sine basis; coeff[j-1, k-1]."""

    grid: GridSpec
    coeff: np.ndarray

    def __post_init__(self):
        self.coeff = np.ascontiguousarray(self.coeff, dtype=np.float64)
        if self.coeff.shape != self.grid.shape:
            raise DimensionMismatchError(
                f"coeff shape {self.coeff.shape} != grid {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ModalField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def single_mode(cls, grid: GridSpec, j: int, k: int, amp: float = 1.0) -> "ModalField":
        _check_mode(grid, j, k)
        c = np.zeros(grid.shape)
        c[j - 1, k - 1] = amp
        return cls(grid, c)

    def copy(self) -> "ModalField":
        return ModalField(self.grid, self.coeff.copy())

    def project(self, m: int) -> "ModalField":
        return project(self, m)

    def resample(self, n_modes: int) -> "ModalField":
        return resample(self, n_modes)

    # Small arithmetic surface; all operands must share the grid.
    def __add__(self, other: "ModalField") -> "ModalField":
        check_same_grid(self, other)
        return ModalField(self.grid, self.coeff + other.coeff)

    def __sub__(self, other: "ModalField") -> "ModalField":
        check_same_grid(self, other)
        return ModalField(self.grid, self.coeff - other.coeff)

    def __mul__(self, scalar: float) -> "ModalField":
        return ModalField(self.grid, self.coeff * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "ModalField":
        return ModalField(self.grid, -self.coeff)


@dataclass
class NodalField:
    """Values on the interior collocation grid; values[p-1, q-1]."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise DimensionMismatchError(
                f"values shape {self.values.shape} != grid {self.grid.shape}"
            )


def check_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise DimensionMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def collocation_points(grid: GridSpec) -> np.ndarray:
    """Interior points x_p = p*side/(n+1), p = 1..n."""
    n = grid.n_modes
    return np.arange(1, n + 1) * (grid.side / (n + 1))


def quadrature_weight(side: float, n_points: int) -> float:
    """Weight of the interior quadrature sum on an n_points grid."""
    return (side / (n_points + 1)) ** 2


def _five_smooth(k: int) -> bool:
    for p in (2, 3, 5):
        while k % p == 0:
            k //= p
    return k == 1


def padded_points(n_modes: int, factor: int = 2) -> int:
    """Smallest grid size m >= factor * n_modes with (m + 1) 5-smooth.

    Dealiasing only requires m >= factor * n_modes; growing m further
    changes nothing mathematically, but the DST-I of length m rides on
    an FFT of length 2(m + 1), which is slow when m + 1 has large prime
    factors (e.g. n_modes = 128, factor 2: 257 is prime).
    """
    m = factor * n_modes
    while not _five_smooth(m + 1):
        m += 1
    return m


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

# reused zero-padded staging buffers, keyed by (pad, block) size; the
# tail beyond the block stays zero across calls (the transform does not
# write into its input), so only the corner is refreshed per call.
# Single-threaded use assumed, as everywhere in this package.
_pad_pool: dict = {}


def nodal_values(z: ModalField, n_points: int | None = None) -> np.ndarray:
    """Evaluate the sine series on the interior grid with n_points per axis.

    n_points >= n_modes (defaults to n_modes).  Zero-padding the
    coefficients before the inverse DST-I gives exact point values of
    the band-limited field on the finer grid.
    """
    n = z.grid.n_modes
    m = n if n_points is None else int(n_points)
    if m < n:
        raise ValueError(f"n_points={m} < n_modes={n}")
    if m == n:
        c = z.coeff
    else:
        c = _pad_pool.get((m, n))
        if c is None:
            c = _pad_pool[(m, n)] = np.zeros((m, m))
        c[:n, :n] = z.coeff
    vals = sfft.dstn(c, type=1)
    vals /= 2.0 * z.grid.side
    return vals


def modal_from_values(values: np.ndarray, side: float) -> np.ndarray:
    """Sine coefficients interpolating nodal values on their own grid."""
    m = values.shape[0]
    out = sfft.dstn(values, type=1)
    out *= side / (2.0 * (m + 1) ** 2)
    return out


def inverse_transform(z: ModalField) -> NodalField:
    """Modal -> nodal on the grid's own collocation points."""
    return NodalField(z.grid, nodal_values(z))


def forward_transform(w: NodalField) -> ModalField:
    """Nodal -> modal; exact inverse of inverse_transform."""
    return ModalField(w.grid, modal_from_values(w.values, w.grid.side))


def field_integral(z: ModalField) -> float:
    """Exact integral of the sine polynomial over the square.

    Only odd-odd modes contribute: integral of e_jk is
    8*side/(pi^2 j k) for j, k both odd, else zero.
    """
    n = z.grid.n_modes
    j = np.arange(1, n + 1)
    w = np.where(j % 2 == 1, 1.0 / j, 0.0)
    return (8.0 * z.grid.side / np.pi**2) * float(w @ z.coeff @ w)


def gradient_values(z: ModalField, n_points: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Nodal values of (du/dx, du/dy) on the interior n_points grid.

    Differentiating the sine series gives a cosine series along the
    differentiated axis; it is evaluated by a type-I DCT on the closed
    grid (boundary points carry no sine content) and sliced back to the
    interior points.
    """
    n = z.grid.n_modes
    m = n if n_points is None else int(n_points)
    if m < n:
        raise ValueError(f"n_points={m} < n_modes={n}")
    side = z.grid.side
    freq = np.arange(1, n + 1) * np.pi / side

    def _ddx(coeff):
        # coefficients of the cosine-in-x, sine-in-y series of du/dx
        d = coeff * (2.0 / side) * freq[:, None]
        a = np.zeros((n, m))
        a[:, :n] = d / 2.0
        t = sfft.dst(a, type=1, axis=1)  # sine evaluation along y
        b = np.zeros((m + 2, m))
        b[1 : n + 1, :] = t / 2.0
        return sfft.dct(b, type=1, axis=0)[1 : m + 1, :]  # cos eval along x

    ux = _ddx(z.coeff)
    uy = _ddx(z.coeff.T).T
    return ux, uy


def sup_norm(z: ModalField, refine: int = 4) -> float:
    """Max |z| over a refine*n_modes interior grid (sup-norm estimate)."""
    return float(np.abs(nodal_values(z, refine * z.grid.n_modes)).max())


# ---------------------------------------------------------------------------
# operator powers, projections, norms
# ---------------------------------------------------------------------------

def apply_power(z: ModalField, s: float) -> ModalField:
    """A^s z, diagonal in the sine basis: coeff * eigenvalue^s."""
    lam = eigenvalues(z.grid)
    return ModalField(z.grid, z.coeff * lam**s)


def project(z: ModalField, m: int) -> ModalField:
    """Galerkin projector P_m: zero all coefficients with j > m or k > m."""
    n = z.grid.n_modes
    if not (1 <= m <= n):
        raise IndexError(f"projection order {m} outside 1..{n}")
    c = np.zeros_like(z.coeff)
    c[:m, :m] = z.coeff[:m, :m]
    return ModalField(z.grid, c)


def resample(z: ModalField, n_modes: int) -> ModalField:
    """Re-express z on a grid with n_modes per axis (same side).

    Growing the grid embeds the coefficients; shrinking truncates to
    the retained block (lossy for under-resolved fields).
    """
    n = z.grid.n_modes
    new = GridSpec(n_modes, z.grid.side)
    c = np.zeros(new.shape)
    k = min(n, n_modes)
    c[:k, :k] = z.coeff[:k, :k]
    return ModalField(new, c)


def inner(a: ModalField, b: ModalField) -> float:
    """L2 inner product (modal dot product by orthonormality)."""
    check_same_grid(a, b)
    return float(np.vdot(a.coeff, b.coeff))


def norm_Hs(z: ModalField, s: float) -> float:
    """|| A^s z ||_{L2} = sqrt(sum eigenvalue^{2s} coeff^2)."""
    lam = eigenvalues(z.grid)
    return float(np.sqrt(np.sum(lam ** (2.0 * s) * z.coeff**2)))


def norm_pair(u: ModalField, v: ModalField, s: float) -> float:
    """Phase-space norm || (u, v) ||_s at smoothness index s.

    ||(u, v)||_s^2 = ||A^{(s+1)/2} u||^2 + ||A^{(s-1)/2} v||^2; s = 0 is
    the energy space, s = 2 the quasi-strong space, s = -1 the weak
    space used for the Galerkin gap.
    """
    check_same_grid(u, v)
    lam = eigenvalues(u.grid)
    qu = np.sum(lam ** (s + 1.0) * u.coeff**2)
    qv = np.sum(lam ** (s - 1.0) * v.coeff**2)
    return float(np.sqrt(qu + qv))


def random_band_limited(grid: GridSpec, band: int, amplitude: float, seed: int) -> ModalField:
    """Gaussian coefficients on modes j, k <= band, scaled so the
    V-norm ||A^{1/2} u|| equals amplitude (zero field for amplitude 0)."""
    if not (1 <= band <= grid.n_modes):
        raise IndexError(f"band {band} outside 1..{grid.n_modes}")
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.shape)
    c[:band, :band] = rng.standard_normal((band, band))
    z = ModalField(grid, c)
    if amplitude == 0.0:
        return ModalField.zeros(grid)
    nv = norm_Hs(z, 0.5)
    return ModalField(grid, c * (amplitude / nv))


# ---------------------------------------------------------------------------
# snapshot files (.mfld)
# ---------------------------------------------------------------------------

def save_field(path, z: ModalField, time: float = 0.0, kind: str = "u") -> None:
    """Write a snapshot: one UTF-8 JSON header line, then the raw
    row-major little-endian float64 coefficient block."""
    header = {
        "n_modes": z.grid.n_modes,
        "side": z.grid.side,
        "time": float(time),
        "kind": kind,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(z.coeff, dtype="<f8").tobytes())


def load_field(path) -> tuple[ModalField, float, str]:
    """Read a .mfld snapshot; returns (field, time, kind)."""
    with open(path, "rb") as fh:
        raw = fh.readline()
        try:
            header = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FileFormatError(f"{path}: bad snapshot header") from exc
        for key in ("n_modes", "side", "time", "kind"):
            if key not in header:
                raise FileFormatError(f"{path}: header missing '{key}'")
        n = int(header["n_modes"])
        blob = fh.read(8 * n * n)
        if len(blob) != 8 * n * n:
            raise FileFormatError(f"{path}: truncated coefficient block")
        coeff = np.frombuffer(blob, dtype="<f8").reshape(n, n).copy()
    grid = GridSpec(n, float(header["side"]))
    return ModalField(grid, coeff), float(header["time"]), str(header["kind"])
