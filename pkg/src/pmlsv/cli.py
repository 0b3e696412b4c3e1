"""Command-line entry point: ``pmlsv {recover,sweep,plotdata,checks}``.

Settings may come from a flat ``key = value`` file (``--config``); flags given
on the command line override the file. Keys are the long flag names with
dashes or underscores, e.g. ``n-meas = 500, 1000``.

Exit codes: 0 on success, 1 if any cell or check failed, 2 on invalid config.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import _constants as C
from ._backend import BACKEND
from .checks import run_checks
from .exceptions import ConfigError
from .harness import Cell, ExperimentSpec, emit_plot_data, run_single, run_sweep, write_results

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("pmlsv")


def _floats(text):
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in str(text).replace(",", " ").split())


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (ExperimentSpec field, parser)
SPEC_KEYS = {
    "image": ("image", str),
    "synthetic": ("synthetic", _bool),
    "rank": ("truth_rank", int),
    "patch": ("patch", int),
    "height": ("height", int),
    "width": ("width", int),
    "alpha": ("alphas", _floats),
    "n_meas": ("n_meas", _ints),
    "lambda": ("lambdas", _floats),
    "reps": ("reps", int),
    "zero_prob": ("zero_prob", float),
    "seed": ("seed", int),
    "intensity": ("base_intensity", float),
    "noi": ("noi", int),
    "step_l": ("step_l", float),
    "gamma": ("gamma", float),
    "backtrack_mode": ("backtrack_mode", str),
    "stop_tol_mode": ("stop_tol_mode", str),
    "stop_tol": ("stop_tol", float),
    "max_backtracks": ("max_backtracks", int),
    "out_dir": ("out_dir", str),
    "workers": ("workers", int),
}


def read_config_file(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in SPEC_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_spec(args):
    """Merge the config file and command-line flags into an :class:`ExperimentSpec`."""
    raw = read_config_file(args.config) if args.config else {}
    for key in SPEC_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    kwargs = {}
    for key, value in raw.items():
        field_name, parse = SPEC_KEYS[key]
        try:
            kwargs[field_name] = parse(value) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
    if kwargs.pop("synthetic", False):
        if kwargs.get("image"):
            raise ConfigError("--image and --synthetic are mutually exclusive")
        kwargs["image"] = None
    if "base_intensity" in kwargs:
        kwargs["explicit_intensity"] = True
    return ExperimentSpec(**kwargs)


def _add_spec_flags(p, grid):
    many = " (comma-separated list)" if grid else ""
    src = p.add_argument_group("signal")
    src.add_argument("--image", help="ground-truth image (P2 .pgm or .csv grid)")
    src.add_argument("--synthetic", action="store_const", const=True,
                     help="use the seeded synthetic flare image (default)")
    src.add_argument("--rank", type=int, help="truth rank after truncation (default 5)")
    src.add_argument("--patch", type=int, help=f"patch side length (default {C.DEFAULT_PATCH})")
    src.add_argument("--height", type=int, help="synthetic image height (default 64)")
    src.add_argument("--width", type=int, help="synthetic image width (default 64)")
    src.add_argument("--intensity", type=float,
                     help="total intensity before alpha scaling (synthetic default 1e7)")
    src.add_argument("--alpha", help="intensity scale factor(s) >= 1" + many)

    sense = p.add_argument_group("sensing")
    sense.add_argument("--n-meas", dest="n_meas", help="number of measurements" + many)
    sense.add_argument("--zero-prob", dest="zero_prob", type=float,
                       help=f"probability a mask entry is zero (default {C.DEFAULT_ZERO_PROB})")
    sense.add_argument("--seed", type=int, help="base seed for masks, noise and image (default 0)")

    solv = p.add_argument_group("solver")
    solv.add_argument("--lambda", dest="lambda", help="nuclear-norm weight" + many)
    solv.add_argument("--noi", type=int, help="iteration budget; also sets the 0.5/NOI stop rule")
    solv.add_argument("--step-l", dest="step_l", type=float, help=f"initial L (default {C.DEFAULT_STEP_L:g})")
    solv.add_argument("--gamma", type=float, help=f"backtracking factor (default {C.DEFAULT_GAMMA})")
    solv.add_argument("--backtrack-mode", dest="backtrack_mode", choices=("paper_goto6", "full_recompute"))
    solv.add_argument("--stop-tol-mode", dest="stop_tol_mode", choices=("paper_rule", "absolute"))
    solv.add_argument("--stop-tol", dest="stop_tol", type=float, help="tolerance for --stop-tol-mode absolute")
    solv.add_argument("--max-backtracks", dest="max_backtracks", type=int)

    out = p.add_argument_group("output")
    out.add_argument("--out-dir", dest="out_dir", help="directory for results and per-run artifacts")
    out.add_argument("--config", help="flat 'key = value' file; flags override it")
    if grid:
        out.add_argument("--reps", type=int, help="repetitions per grid cell (default 1)")
        out.add_argument("--workers", type=int, help="parallel worker processes (default 1)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pmlsv",
        description="Poisson low-rank recovery with singular value thresholding.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("recover", help="recover a single (N, alpha, lambda) cell")
    _add_spec_flags(rec, grid=False)
    rec.add_argument("--rep", type=int, default=0, help="repetition index used for seeding (default 0)")

    sweep = sub.add_parser("sweep", help="run a grid over N, alpha and lambda")
    _add_spec_flags(sweep, grid=True)

    plot = sub.add_parser("plotdata", help="aggregate results.csv into plot data")
    plot.add_argument("results", help="results.csv written by 'sweep'")
    plot.add_argument("--axis", required=True, choices=("n_meas", "alpha", "lambda"))
    plot.add_argument("--metric", default="risk_raw", choices=("risk_raw", "risk_clipped", "risk_init"))
    plot.add_argument("--output", help="output path (default plot_<axis>.csv next to the input)")

    chk = sub.add_parser("checks", help="verify operator physics, gradient and prox")
    chk.add_argument("--m1", type=int, default=16)
    chk.add_argument("--m2", type=int, default=16)
    chk.add_argument("--n-meas", dest="n_meas", type=int, default=50)
    chk.add_argument("--zero-prob", dest="zero_prob", type=float, default=C.DEFAULT_ZERO_PROB)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--trials", type=int, default=1000)
    return parser


def _print_row(row):
    if row["status"] == "ok":
        print(
            f"N={row['n_meas']} alpha={row['alpha']:g} lambda={row['lambda']:g} rep={row['rep']}: "
            f"risk={row['risk_raw']:.6g} clipped={row['risk_clipped']:.6g} "
            f"iters={row['iters']} stop={row['stop_reason']}"
        )
    else:
        print(f"N={row['n_meas']} alpha={row['alpha']:g} lambda={row['lambda']:g} rep={row['rep']}: "
              f"FAILED {row['error']}")


def cmd_recover(args):
    spec = build_spec(args)
    if spec.n_cells() != 1:
        raise ConfigError("recover takes a single value for --n-meas, --alpha and --lambda; use sweep")
    cell = Cell(spec.n_meas[0], spec.alphas[0], spec.lambdas[0], args.rep)
    row = run_single(spec, cell)
    if spec.out_dir is not None:
        Path(spec.out_dir).mkdir(parents=True, exist_ok=True)
        write_results([row], Path(spec.out_dir) / "results.csv")
    _print_row(row)
    return EXIT_OK if row["status"] == "ok" else EXIT_FAILED


def cmd_sweep(args):
    spec = build_spec(args)
    log.info("sweep of %d cells, backend %s", spec.n_cells(), BACKEND)
    rows = run_sweep(spec)
    for row in rows:
        _print_row(row)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} cells ok")
    return EXIT_OK if failed == 0 else EXIT_FAILED


def cmd_plotdata(args):
    if not Path(args.results).is_file():
        raise ConfigError(f"results file not found: {args.results}")
    path = emit_plot_data(args.results, args.axis, args.output, metric=args.metric)
    print(path)
    return EXIT_OK


def cmd_checks(args):
    results = run_checks(args.m1, args.m2, args.n_meas, args.seed, args.trials, args.zero_prob)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<12} {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


COMMANDS = {"recover": cmd_recover, "sweep": cmd_sweep, "plotdata": cmd_plotdata, "checks": cmd_checks}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"pmlsv: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
