"""Random 0 / (1/N) mask sensing operator and Poisson measurement simulation.

Mask ``i`` is drawn from a Philox stream keyed by ``(seed, i)``; the draw for
entry ``(j, k)`` sits at counter position ``j * m2 + k``. Any single mask can
therefore be regenerated on its own, and the whole operator is a pure function
of its :class:`SensingConfig`. Photon counts use the same scheme keyed by
``(noise_seed, i)``.
"""

from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from ._backend import make_kernel
from ._constants import FLUX_ATOL
from .exceptions import ConfigError, DimensionError
from .linalg import as_matrix

__all__ = [
    "MeasurementSet",
    "SensingConfig",
    "SensingOperator",
    "adjoint",
    "forward",
    "generate",
    "load_config",
    "sample_poisson",
    "save_config",
    "verify_flux_preserving",
]

_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class SensingConfig:
    m1: int
    m2: int
    n_meas: int
    zero_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise ConfigError(f"matrix shape must be positive, got {self.m1}x{self.m2}")
        if self.n_meas < 1:
            raise ConfigError(f"n_meas must be >= 1, got {self.n_meas}")
        if not 0.0 <= self.zero_prob < 1.0:
            raise ConfigError(f"zero_prob must lie in [0, 1), got {self.zero_prob}")
        if not 0 <= self.seed <= _UINT64_MAX:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def shape(self):
        return (self.m1, self.m2)


@dataclass(frozen=True, eq=False)
class SensingOperator:
    """The N masks of a sensing operator.

    ``support`` is a boolean ``(N, m1 * m2)`` array marking the nonzero
    positions of each row-major flattened mask; every nonzero entry equals
    ``1 / N``. Products go through ``kernel`` (see :mod:`pmlsv._backend`),
    built from ``support`` when not given.
    """

    config: SensingConfig
    support: np.ndarray
    kernel: object = None

    def __post_init__(self):
        expected = (self.config.n_meas, self.config.m1 * self.config.m2)
        if self.support.shape != expected:
            raise DimensionError(f"support has shape {self.support.shape}, expected {expected}")
        if self.kernel is None:
            object.__setattr__(self, "kernel", make_kernel(self.support))

    @property
    def n_meas(self):
        return self.config.n_meas

    @property
    def shape(self):
        return self.config.shape

    @property
    def backend(self):
        return self.kernel.name

    @cached_property
    def matrix(self):
        """Dense ``(N, m1 * m2)`` array of mask values (rows are flattened masks)."""
        return self.support * (1.0 / self.n_meas)

    def mask(self, i):
        """Mask ``A_i`` as a dense ``m1 x m2`` array."""
        return (self.support[i] * (1.0 / self.n_meas)).reshape(self.shape)

    def nonzero_positions(self, i):
        """``(row, col)`` index arrays of the nonzero entries of mask `i`."""
        return np.unravel_index(np.flatnonzero(self.support[i]), self.shape)


@dataclass(frozen=True)
class MeasurementSet:
    counts: np.ndarray
    noise_seed: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise DimensionError("counts must be a vector")
        if np.any(counts < 0):
            raise ValueError("photon counts must be nonnegative")

    def __len__(self):
        return len(self.counts)


def _stream(seed, index):
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def generate(config, backend=None):
    """Draw the masks for `config`; identical configs give identical operators.

    `backend` picks the product kernel (``"compiled"`` or ``"python"``);
    the default follows :data:`pmlsv._backend.BACKEND`.
    """
    size = config.m1 * config.m2
    support = np.empty((config.n_meas, size), dtype=bool)
    for i in range(config.n_meas):
        support[i] = _stream(config.seed, i).random(size) >= config.zero_prob
    support.setflags(write=False)
    return SensingOperator(config, support, make_kernel(support, backend))


def forward(op, m):
    """Measurement vector ``[<A_i, m>]_i`` of length N."""
    m = as_matrix(m)
    if m.shape != op.shape:
        raise DimensionError(f"signal has shape {m.shape}, operator expects {op.shape}")
    return op.kernel.matvec(m.ravel(), 1.0 / op.n_meas)


def adjoint(op, w):
    """``sum_i w_i A_i`` as an ``m1 x m2`` matrix."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (op.n_meas,):
        raise DimensionError(f"weight vector has shape {w.shape}, expected ({op.n_meas},)")
    return op.kernel.rmatvec(w, 1.0 / op.n_meas).reshape(op.shape)


def sample_poisson(op, m, noise_seed):
    """Draw ``y_i ~ Poisson(<A_i, m>)`` independently for each measurement."""
    rates = forward(op, m)
    if np.any(np.asarray(m) < 0) or np.any(rates < 0):
        raise ValueError("Poisson rates must be nonnegative; the signal has negative entries")
    counts = np.empty(op.n_meas, dtype=np.int64)
    for i, rate in enumerate(rates):
        counts[i] = _stream(noise_seed, i).poisson(rate) if rate > 0 else 0
    return MeasurementSet(counts=counts, noise_seed=int(noise_seed))


def verify_flux_preserving(op, trials, seed=0, atol=FLUX_ATOL):
    """Check ``sum(forward(op, m)) <= sum(m)`` on `trials` random nonnegative matrices."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        # Mix dense and sparse draws so single hot pixels are covered too.
        m = rng.exponential(size=op.shape)
        m *= rng.random(op.shape) < rng.uniform(0.05, 1.0)
        if forward(op, m).sum() > m.sum() + atol:
            return False
    return True


_CFG_KEYS = ("m1", "m2", "n_meas", "zero_prob", "seed")


def save_config(config, path):
    """Write the canonical ``sensing.cfg`` (masks are regenerated, never stored)."""
    lines = [f"{key} = {value!r}" for key, value in asdict(config).items()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_config(path):
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    missing = set(_CFG_KEYS) - set(values)
    if missing:
        raise ConfigError(f"{path}: missing keys {sorted(missing)}")
    return SensingConfig(
        m1=int(values["m1"]),
        m2=int(values["m2"]),
        n_meas=int(values["n_meas"]),
        zero_prob=float(values["zero_prob"]),
        seed=int(values["seed"]),
    )
