"""Image <-> patch-matrix transforms, ground-truth preparation, risk metric and image I/O.

Patch layout (normative for every file this package writes): patches are
enumerated left-to-right, top-to-bottom, and each ``p x p`` patch becomes one
column of the patch matrix by stacking its columns.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._constants import DEFAULT_PATCH
from .exceptions import ConfigError, DimensionError
from .linalg import as_matrix, svd

__all__ = [
    "ImageSpec",
    "load_image",
    "normalized_risk",
    "patchify",
    "rank_truncate",
    "read_csv_grid",
    "read_pgm",
    "scale_intensity",
    "synthetic_flare",
    "unpatchify",
    "write_csv_grid",
    "write_pgm",
]


@dataclass(frozen=True)
class ImageSpec:
    height: int
    width: int
    patch: int = DEFAULT_PATCH
    alpha: float = 1.0

    def __post_init__(self):
        if min(self.height, self.width, self.patch) < 1:
            raise ConfigError("height, width and patch must be positive")
        if self.height % self.patch or self.width % self.patch:
            raise ConfigError(
                f"image {self.height}x{self.width} is not tiled by {self.patch}x{self.patch} patches"
            )
        if self.alpha < 1:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")

    @property
    def n_patches(self):
        return (self.height // self.patch) * (self.width // self.patch)

    @property
    def patch_matrix_shape(self):
        return (self.patch * self.patch, self.n_patches)


def patchify(img, spec):
    img = as_matrix(img)
    if img.shape != (spec.height, spec.width):
        raise DimensionError(f"image has shape {img.shape}, spec says {(spec.height, spec.width)}")
    p = spec.patch
    blocks = img.reshape(spec.height // p, p, spec.width // p, p)
    # (block row, block col, col in patch, row in patch) -> column-major patch vectors
    return blocks.transpose(0, 2, 3, 1).reshape(spec.n_patches, p * p).T.copy()


def unpatchify(pm, spec):
    pm = as_matrix(pm)
    if pm.shape != spec.patch_matrix_shape:
        raise DimensionError(f"patch matrix has shape {pm.shape}, expected {spec.patch_matrix_shape}")
    p = spec.patch
    blocks = pm.T.reshape(spec.height // p, spec.width // p, p, p)
    return blocks.transpose(0, 3, 1, 2).reshape(spec.height, spec.width).copy()


def rank_truncate(m, r, clip=True):
    """Best rank-`r` approximation of `m`.

    With ``clip=True`` negative entries left by the truncation are set to zero
    and the result is rescaled to the total intensity of `m`, so a nonnegative
    input stays a valid ground truth.
    """
    if r < 1:
        raise ValueError(f"rank must be >= 1, got {r}")
    m = as_matrix(m)
    f = svd(m)
    r = min(r, f.rank)
    out = (f.u[:, :r] * f.sigma[:r]) @ f.v[:, :r].T
    if clip:
        out = np.maximum(out, 0.0)
        total, kept = float(m.sum()), float(out.sum())
        if kept > 0:
            out *= total / kept
    return out


def normalized_risk(m_true, m_est, intensity):
    """``||m_true - m_est||_F**2 / intensity**2``."""
    a, b = as_matrix(m_true), as_matrix(m_est)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    if not intensity > 0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    d = a - b
    return float(np.sum(d * d)) / intensity**2


def scale_intensity(m, alpha):
    if alpha < 1:
        raise ConfigError(f"alpha must be >= 1, got {alpha}")
    return alpha * as_matrix(m)


def synthetic_flare(height=64, width=64, n_bumps=5, seed=0, intensity=1.0, background=0.02):
    """Seeded flare-like test image: a sum of separable Gaussian bumps on a faint background.

    The image is scaled so its entries sum to `intensity`.
    """
    rng = np.random.default_rng(seed)
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    img = np.zeros((height, width))
    for _ in range(n_bumps):
        cy, cx = rng.uniform(0.2, 0.8) * height, rng.uniform(0.2, 0.8) * width
        sy, sx = rng.uniform(0.04, 0.2) * height, rng.uniform(0.04, 0.2) * width
        amp = rng.uniform(0.3, 1.0)
        img += amp * np.exp(-0.5 * ((rows - cy) / sy) ** 2) * np.exp(-0.5 * ((cols - cx) / sx) ** 2)
    img += background * img.max()
    return img * (intensity / img.sum())


def read_pgm(path):
    """Read a plain-text (P2) PGM file into a float array."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain-text P2 PGM file")
    width, height, _maxval = (int(t) for t in tokens[1:4])
    values = np.array(tokens[4:], dtype=np.float64)
    if values.size != width * height:
        raise ValueError(f"{path}: expected {width * height} pixels, found {values.size}")
    return values.reshape(height, width)


def write_pgm(path, img):
    """Write `img` as P2 PGM, mapping ``[min, max]`` linearly to ``[0, 255]``.

    The mapping is recorded in a one-line sidecar file ``<path>.meta``.
    """
    img = as_matrix(img)
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo
    levels = np.zeros(img.shape, dtype=int) if span == 0 else np.rint((img - lo) / span * 255).astype(int)
    height, width = img.shape
    body = "\n".join(" ".join(str(v) for v in row) for row in levels)
    Path(path).write_text(f"P2\n{width} {height}\n255\n{body}\n")
    Path(f"{path}.meta").write_text(f"scale=linear min={lo!r} max={hi!r}\n")


def read_csv_grid(path):
    return as_matrix(np.loadtxt(path, delimiter=",", ndmin=2))


def write_csv_grid(path, m):
    np.savetxt(path, as_matrix(m), delimiter=",", fmt="%.17g")


def load_image(path):
    """Load a P2 PGM or CSV grid, chosen by file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix in (".csv", ".txt"):
        return read_csv_grid(path)
    raise ValueError(f"unsupported image format: {path}")
