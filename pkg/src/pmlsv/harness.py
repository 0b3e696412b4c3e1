"""Experiment grid runner: single recoveries, sweeps over (N, alpha, lambda) and plot data.

Every run's operator and noise seeds are derived from the base seed, the
number of measurements and the repetition index, so runs that differ only in
``alpha`` or ``lambda`` see the same masks and the same noise stream.
"""

import csv
import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _constants as C
from ._backend import BACKEND
from .exceptions import ConfigError, PmlsvError
from .imaging import (
    ImageSpec,
    load_image,
    normalized_risk,
    patchify,
    rank_truncate,
    scale_intensity,
    synthetic_flare,
    unpatchify,
    write_pgm,
)
from .sensing import SensingConfig, generate, sample_poisson, save_config
from .solver import SolverConfig, initialize, solve, write_trace_csv

log = logging.getLogger(__name__)

__all__ = [
    "Cell",
    "ExperimentSpec",
    "RESULT_FIELDS",
    "build_truth",
    "derive_seed",
    "emit_plot_data",
    "read_results",
    "run_single",
    "run_sweep",
]

RESULT_FIELDS = (
    "n_meas", "alpha", "lambda", "rep", "op_seed", "noise_seed", "zero_prob",
    "step_l", "gamma", "noi", "backtrack_mode", "intensity", "risk_init",
    "risk_raw", "risk_clipped", "iters", "stop_reason", "final_objective",
    "status", "error", "backend", "wall_ms",
)
PLOT_AXES = {"n_meas": "n_meas", "alpha": "alpha", "lambda": "lambda"}

_SEED_TAG_OPERATOR = 1
_SEED_TAG_NOISE = 2
_SEED_TAG_IMAGE = 3


def derive_seed(base, *coords):
    """64-bit seed derived deterministically from a base seed and integer coordinates."""
    state = np.random.SeedSequence([int(base), *(int(c) for c in coords)]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class Cell:
    n_meas: int
    alpha: float
    lam: float
    rep: int


@dataclass(frozen=True)
class ExperimentSpec:
    """A grid over (N, alpha, lambda) with repetitions.

    ``image=None`` selects the seeded synthetic flare generator, normalised to
    ``base_intensity`` before scaling by ``alpha``. A supplied image keeps its
    own total intensity unless ``base_intensity`` is set explicitly.
    """

    n_meas: tuple = (1000,)
    alphas: tuple = (4.0,)
    lambdas: tuple = (C.DEFAULT_LAMBDA,)
    reps: int = 1
    image: str = None
    height: int = 64
    width: int = 64
    base_intensity: float = 1e7
    truth_rank: int = 5
    patch: int = C.DEFAULT_PATCH
    zero_prob: float = C.DEFAULT_ZERO_PROB
    seed: int = 0
    step_l: float = C.DEFAULT_STEP_L
    gamma: float = C.DEFAULT_GAMMA
    noi: int = C.DEFAULT_NOI
    backtrack_mode: str = "paper_goto6"
    stop_tol_mode: str = "paper_rule"
    stop_tol: float = 1e-6
    max_backtracks: int = C.DEFAULT_MAX_BACKTRACKS
    out_dir: str = None
    workers: int = 1
    save_artifacts: bool = True
    explicit_intensity: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("n_meas", "alphas", "lambdas"):
            values = tuple(getattr(self, name))
            if not values:
                raise ConfigError(f"{name} grid must not be empty")
            object.__setattr__(self, name, values)
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.truth_rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.truth_rank}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.base_intensity > 0:
            raise ConfigError(f"intensity must be positive, got {self.base_intensity}")
        # Validate the pieces that carry their own invariants.
        for alpha in self.alphas:
            ImageSpec(self.height, self.width, self.patch, alpha)
        for n in self.n_meas:
            SensingConfig(self.patch**2, 1, n, self.zero_prob, self.seed)
        for lam in self.lambdas:
            self.solver_config(lam, 1.0)

    def cells(self):
        for n, alpha, lam, rep in itertools.product(self.n_meas, self.alphas, self.lambdas, range(self.reps)):
            yield Cell(int(n), float(alpha), float(lam), rep)

    def image_spec(self, alpha):
        return ImageSpec(self.height, self.width, self.patch, alpha)

    def solver_config(self, lam, intensity):
        return SolverConfig(
            lam=lam, step_l=self.step_l, gamma=self.gamma, max_iters=self.noi,
            stop_tol_mode=self.stop_tol_mode, stop_tol=self.stop_tol,
            backtrack_mode=self.backtrack_mode, max_backtracks=self.max_backtracks,
            target_intensity=intensity,
        )

    def seeds(self, cell):
        op_seed = derive_seed(self.seed, _SEED_TAG_OPERATOR, cell.n_meas, cell.rep)
        noise_seed = derive_seed(self.seed, _SEED_TAG_NOISE, cell.n_meas, cell.rep)
        return op_seed, noise_seed

    def n_cells(self):
        return len(self.n_meas) * len(self.alphas) * len(self.lambdas) * self.reps


def _base_image(spec):
    if spec.image is None:
        return synthetic_flare(
            spec.height, spec.width, n_bumps=spec.truth_rank,
            seed=derive_seed(spec.seed, _SEED_TAG_IMAGE), intensity=spec.base_intensity,
        )
    img = load_image(spec.image)
    if img.shape != (spec.height, spec.width):
        raise ConfigError(f"{spec.image}: image is {img.shape}, spec expects {(spec.height, spec.width)}")
    if spec.explicit_intensity:
        img = img * (spec.base_intensity / img.sum())
    return img


def build_truth(spec, alpha):
    """Ground-truth patch matrix: patchify, truncate to ``truth_rank``, scale by `alpha`."""
    ispec = spec.image_spec(alpha)
    pm = rank_truncate(patchify(_base_image(spec), ispec), spec.truth_rank)
    return scale_intensity(pm, alpha)


def _run_dir(spec, cell):
    return Path(spec.out_dir) / "runs" / f"n{cell.n_meas}_a{cell.alpha:g}_l{cell.lam:g}_r{cell.rep}"


def run_single(spec, cell, truth=None, callback=None):
    """Recover one grid cell and return its result row.

    Module errors are caught and reported as a ``status="failed"`` row.
    `callback`, if given, is called as ``callback(cell, k, m)`` for every
    accepted iterate.
    """
    start = time.perf_counter()
    op_seed, noise_seed = spec.seeds(cell)
    row = {
        "n_meas": cell.n_meas, "alpha": cell.alpha, "lambda": cell.lam, "rep": cell.rep,
        "op_seed": op_seed, "noise_seed": noise_seed, "zero_prob": spec.zero_prob,
        "step_l": spec.step_l, "gamma": spec.gamma, "noi": spec.noi,
        "backtrack_mode": spec.backtrack_mode, "backend": BACKEND,
    }
    try:
        if truth is None:
            truth = build_truth(spec, cell.alpha)
        intensity = float(truth.sum())
        sconf = SensingConfig(truth.shape[0], truth.shape[1], cell.n_meas, spec.zero_prob, op_seed)
        op = generate(sconf)
        y = sample_poisson(op, truth, noise_seed)
        m0 = initialize(op, y, intensity)
        hook = None if callback is None else (lambda k, m_k: callback(cell, k, m_k))
        m, trace = solve(op, y, spec.solver_config(cell.lam, intensity), callback=hook)
        row.update(
            intensity=intensity,
            risk_init=normalized_risk(truth, m0, intensity),
            risk_raw=normalized_risk(truth, m, intensity),
            risk_clipped=normalized_risk(truth, np.maximum(m, 0.0), intensity),
            iters=trace.iterations, stop_reason=trace.stop_reason,
            final_objective=trace.final_objective, status="ok", error="",
        )
        if spec.save_artifacts and spec.out_dir is not None:
            run_dir = _run_dir(spec, cell)
            run_dir.mkdir(parents=True, exist_ok=True)
            save_config(sconf, run_dir / "sensing.cfg")
            write_trace_csv(trace, run_dir / "trace.csv")
            write_pgm(run_dir / "recovered.pgm", unpatchify(m, spec.image_spec(cell.alpha)))
    except (PmlsvError, ValueError) as exc:
        log.warning("cell %s failed: %s", cell, exc)
        row.update(
            intensity=row.get("intensity", float("nan")), risk_init=float("nan"),
            risk_raw=float("nan"), risk_clipped=float("nan"), iters=0, stop_reason="",
            final_objective=float("nan"), status="failed", error=f"{type(exc).__name__}: {exc}",
        )
    row["wall_ms"] = (time.perf_counter() - start) * 1e3
    return row


def _run_cell_job(args):
    spec, cell = args
    return run_single(spec, cell)


def run_sweep(spec, callback=None):
    """Run every grid cell and write ``results.csv`` to ``spec.out_dir``.

    Returns the list of result rows in grid order (N, alpha, lambda, rep).
    A `callback` (see :func:`run_single`) requires ``workers == 1``.
    """
    cells = list(spec.cells())
    if callback is not None and spec.workers > 1:
        raise ConfigError("iterate callbacks need a serial sweep (workers = 1)")
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_run_cell_job, [(spec, c) for c in cells]))
    else:
        truths = {}
        rows = []
        for cell in cells:
            if cell.alpha not in truths:
                try:
                    truths[cell.alpha] = build_truth(spec, cell.alpha)
                except (PmlsvError, ValueError):
                    truths[cell.alpha] = None
            rows.append(run_single(spec, cell, truths[cell.alpha], callback))
            log.info("cell %s: %s risk=%s", cell, rows[-1]["status"], rows[-1]["risk_raw"])
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results(rows, out / "results.csv")
        if spec.save_artifacts:
            for alpha in spec.alphas:
                try:
                    write_pgm(out / f"truth_a{alpha:g}.pgm", unpatchify(build_truth(spec, alpha), spec.image_spec(alpha)))
                except (PmlsvError, ValueError):
                    pass
    return rows


def write_results(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_results(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plot_data(results_csv, axis, out_path=None, metric="risk_raw"):
    """Aggregate successful rows by `axis` into ``x, median, min, max, count`` columns.

    Rows sharing an x value are combined by their median; output is sorted by x.
    """
    if axis not in PLOT_AXES:
        raise ConfigError(f"axis must be one of {sorted(PLOT_AXES)}, got {axis!r}")
    groups = {}
    for row in read_results(results_csv):
        if row["status"] != "ok":
            continue
        groups.setdefault(float(row[PLOT_AXES[axis]]), []).append(float(row[metric]))
    if not groups:
        raise ValueError(f"{results_csv}: no successful rows to aggregate")
    if out_path is None:
        out_path = Path(results_csv).with_name(f"plot_{axis}.csv")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([axis, f"median_{metric}", f"min_{metric}", f"max_{metric}", "count"])
        for x in sorted(groups):
            vals = np.array(groups[x])
            writer.writerow([repr(x), repr(float(np.median(vals))), repr(float(vals.min())),
                             repr(float(vals.max())), len(vals)])
    return Path(out_path)


def spec_with(spec, **changes):
    return replace(spec, **changes)


def spec_as_dict(spec):
    return asdict(spec)
