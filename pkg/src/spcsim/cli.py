"""Command-line front end: configuration, scene ingest, and artifact layout.

Subcommands:

  run           full acquisition pipeline on an ingested scene
  baseline      single-pass reconstruction (ClassicalCS or MultilevelCS)
  verify-bound  Monte Carlo check of the refinement-residual bound
  detect        region detection on an image, result as JSON
  ingest        normalize input bands into a working scene
  metrics       NMSE/SSIM between two images

Exit codes: 0 success, 2 configuration error, 3 measurement budget
infeasible, 4 numerical failure. Output lands under the directory named by
the configuration; a relative name is placed under $SPCSIM_OUTPUT_ROOT when
that variable is set. Every artifact is written without timestamps or
absolute paths so identical runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .detection import (SCORE_BLOCK_VARIANCE, SCORE_CONTRAST, DetectionParams,
                        detect_rois_scored, rois_to_json)
from .imaging import (Image, RoIWindow, extract_window, load_pgm, load_raw,
                      macro_upsample, save_pgm, save_raw)
from .metrics import MetricReport, nmse, ssim
from .operators import (SCHEME_RADEMACHER, GridSystem,
                        build_macro_mask_operator, build_walsh_operator,
                        cycle_cost, default_level_fractions,
                        design_sampling_map, substream)
from .rps import (ENSEMBLE_MACRO_BINARY01, ENSEMBLE_MACRO_RADEMACHER,
                  ENSEMBLE_WALSH, BudgetError, Ledger, rps_run)
from .solvers import NumericalError, SolverOptions, solve_analysis_tv
from .transforms import KIND_DWT, TransformSpec
from .verification import check_expected_bound, expected_bound_csv

__all__ = [
    "ConfigError",
    "RunConfig",
    "BaselineResult",
    "ingest_scene",
    "run_pipeline",
    "run_baseline",
    "main",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_BUDGET",
    "EXIT_NUMERICAL",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERICAL = 4

OUTPUT_ROOT_ENV = "SPCSIM_OUTPUT_ROOT"

METHOD_CLASSICAL = "ClassicalCS"
METHOD_MULTILEVEL = "MultilevelCS"

_ENSEMBLES = (ENSEMBLE_MACRO_BINARY01, ENSEMBLE_MACRO_RADEMACHER,
              ENSEMBLE_WALSH)


class ConfigError(ValueError):
    """Invalid run configuration; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs, mirroring the flat JSON config.

    Solver and detection fields are kept flat here (one JSON key, one CLI
    flag each) and bundled into SolverOptions / DetectionParams on demand.
    ri_fraction and beta2 default per ensemble when left unset.
    """

    input: str | None = None
    ensemble: str = ENSEMBLE_MACRO_BINARY01
    budget: int = 9600
    lowres_count: int = 1000
    lowres_macro: int = 8
    ri_fraction: float | None = None
    seed: int = 0
    noise_sigma: float = 0.0
    ri_normalized: bool = False
    output_dir: str = "spcsim-out"
    scene_side: int = 256
    # detection
    max_regions: int = 10
    merge_radius: int = 1
    score: str = SCORE_BLOCK_VARIANCE
    min_side: int = 32
    max_side: int = 128
    # solver
    max_iters: int = 20000
    continuation_rounds: int = 3
    gamma: float = 100.0
    beta1: float = 1.0
    beta2: float | None = None
    eta: float = 0.0
    tol: float = 1e-4
    feas_floor_rel: float = 1e-3
    # optional fixed regions: list of [row, col, side] triples
    rois: tuple | None = None

    def __post_init__(self):
        if self.ensemble not in _ENSEMBLES:
            raise ConfigError(
                f"ensemble must be one of {_ENSEMBLES}, got {self.ensemble!r}"
            )
        for name in ("budget", "lowres_count", "lowres_macro", "scene_side"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.ri_fraction is not None and not 0.0 < self.ri_fraction <= 1.0:
            raise ConfigError(
                f"ri_fraction must be in (0, 1], got {self.ri_fraction}"
            )
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be nonnegative")
        side = int(self.scene_side)
        if side & (side - 1):
            raise ConfigError(f"scene_side must be a power of two, got {side}")
        if self.rois is not None:
            object.__setattr__(self, "rois", tuple(
                tuple(int(v) for v in r) for r in self.rois))

    def detection_params(self):
        try:
            return DetectionParams(
                max_regions=self.max_regions, merge_radius=self.merge_radius,
                score=self.score, min_side=self.min_side,
                max_side=self.max_side)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def solver_options(self):
        beta2 = self.beta2
        if beta2 is None:
            beta2 = 0.6 if self.ensemble == ENSEMBLE_WALSH else 0.4
        try:
            return SolverOptions(
                max_iters=self.max_iters,
                continuation_rounds=self.continuation_rounds,
                gamma=self.gamma, beta1=self.beta1, beta2=beta2,
                eta=self.eta, tol=self.tol,
                feas_floor_rel=self.feas_floor_rel)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def roi_windows(self):
        if self.rois is None:
            return None
        out = []
        for i, (row, col, side) in enumerate(self.rois):
            try:
                out.append(RoIWindow(row, col, side, 8, i + 1))
            except ValueError as e:
                raise ConfigError(f"rois[{i}]: {e}") from e
        return out

    def to_json_dict(self):
        doc = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = [list(r) for r in v]
            doc[f.name] = v
        return doc

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**mapping)
        except TypeError as e:
            raise ConfigError(str(e)) from e


def load_config(path, overrides=None):
    """JSON file (optional) updated by non-None CLI overrides."""
    doc = {}
    if path is not None:
        try:
            with open(path, "r", encoding="ascii") as f:
                doc = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(doc)


# --- scene ingest -----------------------------------------------------------

def _load_band(path):
    if path.endswith(".pgm"):
        return load_pgm(path)
    if path.endswith(".raw"):
        return load_raw(path)
    raise ConfigError(f"unsupported image format: {path}")


def _normalize_band(img, name):
    lo = float(img.data.min())
    hi = float(img.data.max())
    if hi <= lo:
        raise ConfigError(
            f"band {name!r} is degenerate: min equals max ({lo})"
        )
    return (img.data - lo) / (hi - lo)


def _fit_to_side(data, side):
    """Center-crop oversized axes, pad undersized ones by edge replication."""
    h, w = data.shape
    if h > side:
        top = (h - side) // 2
        data = data[top:top + side, :]
    if w > side:
        left = (w - side) // 2
        data = data[:, left:left + side]
    h, w = data.shape
    if h < side or w < side:
        pt = (side - h) // 2
        pl = (side - w) // 2
        data = np.pad(data, ((pt, side - h - pt), (pl, side - w - pl)),
                      mode="edge")
    return data


def ingest_scene(paths, band_names=None, side=256):
    """Normalize one band per input file to [0,1], average the bands, and
    fit the result to a side x side dyadic scene.

    An 8-bit graymap holding only {0, 255} therefore lands exactly on
    {0.0, 1.0}. A band whose values are all equal cannot be normalized and
    raises a ConfigError naming that band.
    """
    if isinstance(paths, str):
        paths = [paths]
    paths = list(paths)
    if not paths:
        raise ConfigError("ingest needs at least one input file")
    if side < 1 or side & (side - 1):
        raise ConfigError(f"scene side must be a power of two, got {side}")
    if band_names is None:
        band_names = [os.path.basename(p) for p in paths]
    if len(band_names) != len(paths):
        raise ConfigError("band_names must match the number of inputs")
    bands = []
    shape = None
    for path, name in zip(paths, band_names):
        try:
            img = _load_band(path)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read band {name!r}: {e}") from e
        if shape is None:
            shape = img.data.shape
        elif img.data.shape != shape:
            raise ConfigError(
                f"band {name!r} shape {img.data.shape} differs from {shape}"
            )
        bands.append(_normalize_band(img, name))
    mean = bands[0] if len(bands) == 1 else np.mean(bands, axis=0)
    return Image(_fit_to_side(mean, side))


# --- artifact layout --------------------------------------------------------

def _resolve_output_dir(config):
    out = config.output_dir
    if not os.path.isabs(out):
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root:
            out = os.path.join(root, out)
    return out


def _ensure_layout(outdir):
    for sub in ("images", "logs", "metrics", "config"):
        os.makedirs(os.path.join(outdir, sub), exist_ok=True)
    return outdir


def _save_image(img, outdir, stem):
    save_pgm(img, os.path.join(outdir, "images", stem + ".pgm"), bits=16)
    save_raw(img, os.path.join(outdir, "images", stem + ".raw"))


def _write_text(outdir, sub, name, text):
    with open(os.path.join(outdir, sub, name), "w", encoding="ascii") as f:
        f.write(text)


def _ledger_csv(ledger):
    lines = ["label,purpose,logical,physical"]
    for label, purpose, logical, physical in ledger.to_rows():
        lines.append(f"{label},{purpose},{logical},{physical}")
    return "\n".join(lines) + "\n"


def _metrics_csv(rows):
    lines = ["label,side,macro,nmse,ssim"]
    for label, side, macro, report in rows:
        lines.append(f"{label},{side},{macro},{report.nmse!r},{report.ssim!r}")
    return "\n".join(lines) + "\n"


def _roi_metrics(scene, states):
    """MetricReport per region per visited scale, natively lifted."""
    rows = []
    for st in states:
        truth = extract_window(scene, st.window)
        for macro in sorted(st.solutions_by_macro, reverse=True):
            sol = st.solutions_by_macro[macro]
            lift = macro_upsample(sol, st.window.side // sol.height)
            rows.append((st.label, st.window.side, macro,
                         MetricReport(nmse(lift, truth), ssim(lift, truth))))
    return rows


def run_pipeline(config, scene=None):
    """Ingest (unless a scene is given), run the loop, write all artifacts.

    Returns the rps result. Artifacts: composite/overview/per-scale images
    under images/, evolution log and ledger under logs/, per-region metric
    table under metrics/, and the fully resolved replay configuration under
    config/.
    """
    if scene is None:
        if config.input is None:
            raise ConfigError("no input scene configured")
        scene = ingest_scene(config.input, side=config.scene_side)
    run_cfg = _RunView(config)
    result = rps_run(scene, run_cfg)
    assert result.ledger.spent <= result.ledger.budget

    outdir = _ensure_layout(_resolve_output_dir(config))
    _save_image(result.reconstruction, outdir, "composite")
    _save_image(result.lowres, outdir, "lowres")
    for st in result.states:
        for macro in sorted(st.solutions_by_macro, reverse=True):
            sol = st.solutions_by_macro[macro]
            lift = macro_upsample(sol, st.window.side // sol.height)
            _save_image(lift, outdir, f"roi-{st.label}-macro-{macro}")
    _write_text(outdir, "logs", "evolution.csv", result.log.to_csv())
    _write_text(outdir, "logs", "evolution.json", result.log.to_json())
    _write_text(outdir, "logs", "ledger.csv", _ledger_csv(result.ledger))
    _write_text(outdir, "logs", "ledger.json", json.dumps(
        {"budget": result.ledger.budget, "spent": result.ledger.spent,
         "physical_spent": result.ledger.physical_spent},
        indent=2, sort_keys=True))
    rows = _roi_metrics(scene, result.states)
    rows.append(("scene", scene.height, 0,
                 MetricReport(nmse(result.reconstruction, scene),
                              ssim(result.reconstruction, scene))))
    _write_text(outdir, "metrics", "metrics.csv", _metrics_csv(rows))
    _write_text(outdir, "config", "replay.json", json.dumps(
        config.to_json_dict(), indent=2, sort_keys=True))
    return result


class _RunView:
    """Adapter handing the acquisition loop resolved config objects."""

    def __init__(self, config):
        self.ensemble = config.ensemble
        self.budget = config.budget
        self.lowres_count = config.lowres_count
        self.lowres_macro = config.lowres_macro
        self.ri_fraction = config.ri_fraction
        self.seed = config.seed
        self.noise_sigma = config.noise_sigma
        self.ri_normalized = config.ri_normalized
        self.detection = config.detection_params()
        self.solver = config.solver_options()
        self.rois = config.roi_windows()


# --- baselines --------------------------------------------------------------

@dataclass(frozen=True)
class BaselineResult:
    method: str
    reconstruction: Image
    rows: int
    report: MetricReport


def _baseline_solve(system, side, opts):
    W = TransformSpec(KIND_DWT, min(3, max(1, int(np.log2(side)) - 3)))
    rep = solve_analysis_tv(system, W, system.y, opts)
    return Image(system.image_from(rep.solution.data))


def run_baseline(config, method, scene=None):
    """One-shot whole-scene reconstruction at the configured budget.

    ClassicalCS draws a single native-resolution random +-1 mask ensemble;
    MultilevelCS samples a three-level Walsh map. A full budget (every
    coefficient) makes the multilevel baseline an exact inverse transform.
    """
    if scene is None:
        if config.input is None:
            raise ConfigError("no input scene configured")
        scene = ingest_scene(config.input, side=config.scene_side)
    side = scene.height
    if scene.width != side:
        raise ConfigError("baseline scenes must be square")
    budget = int(config.budget)
    n = side * side
    if budget < 1 or budget > n:
        raise BudgetError(
            f"baseline budget must be in [1, {n}], got {budget}"
        )
    opts = config.solver_options()
    sigma = float(config.noise_sigma)
    if sigma > 0.0:
        opts = replace(opts, eta=sigma * sigma * budget * 1.1)
    if method == METHOD_CLASSICAL:
        seed = int(substream(config.seed, "baseline", method)
                   .integers(0, 2 ** 63))
        op = build_macro_mask_operator(side, 1, SCHEME_RADEMACHER, budget,
                                       seed)
    elif method == METHOD_MULTILEVEL:
        fractions = ((1.0, 0.0, 0.0) if budget == n
                     else default_level_fractions(side))
        try:
            smap = design_sampling_map(side, budget, fractions,
                                       seed=config.seed)
        except ValueError as e:
            raise ConfigError(f"sampling map design failed: {e}") from e
        op = build_walsh_operator(smap)
    else:
        raise ConfigError(
            f"method must be {METHOD_CLASSICAL} or {METHOD_MULTILEVEL}, "
            f"got {method!r}"
        )
    y = op.matvec(scene.data)
    if sigma > 0.0:
        y = y + sigma * substream(config.seed, "noise", "baseline",
                                  method).standard_normal(op.rows)
    ledger = Ledger(budget)
    lo, ph = cycle_cost(op)
    ledger.debit("baseline", method, lo, ph)
    system = GridSystem([(op, y)], side)
    recon = _baseline_solve(system, side, opts)
    assert ledger.spent <= ledger.budget
    report = MetricReport(nmse(recon, scene), ssim(recon, scene))
    return BaselineResult(method, recon, op.rows, report)


# --- subcommand handlers ----------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", help="JSON file with flat run configuration")
    p.add_argument("--input")
    p.add_argument("--ensemble", choices=_ENSEMBLES)
    p.add_argument("--budget", type=int)
    p.add_argument("--lowres-count", type=int, dest="lowres_count")
    p.add_argument("--lowres-macro", type=int, dest="lowres_macro")
    p.add_argument("--ri-fraction", type=float, dest="ri_fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--ri-normalized", action="store_const", const=True,
                   default=None, dest="ri_normalized")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--scene-side", type=int, dest="scene_side")
    p.add_argument("--max-regions", type=int, dest="max_regions")
    p.add_argument("--merge-radius", type=int, dest="merge_radius")
    p.add_argument("--score", choices=(SCORE_BLOCK_VARIANCE, SCORE_CONTRAST))
    p.add_argument("--min-side", type=int, dest="min_side")
    p.add_argument("--max-side", type=int, dest="max_side")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--continuation-rounds", type=int,
                   dest="continuation_rounds")
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--feas-floor-rel", type=float, dest="feas_floor_rel")


_CONFIG_KEYS = [f.name for f in fields(RunConfig)]


def _config_from_args(args):
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    return load_config(args.config, overrides)


def _cmd_run(args):
    config = _config_from_args(args)
    result = run_pipeline(config)
    outdir = _resolve_output_dir(config)
    refined = sum(1 for st in result.states
                  if st.window.current_macro == 1 and not st.dropped)
    print(f"spent {result.ledger.spent}/{result.ledger.budget} "
          f"({result.ledger.physical_spent} cycles), "
          f"{len(result.states)} regions, {refined} fully refined")
    print(f"artifacts in {outdir}")
    return EXIT_OK


def _cmd_baseline(args):
    config = _config_from_args(args)
    result = run_baseline(config, args.method)
    outdir = _ensure_layout(_resolve_output_dir(config))
    stem = f"baseline-{result.method}"
    _save_image(result.reconstruction, outdir, stem)
    _write_text(outdir, "metrics", stem + ".csv",
                _metrics_csv([("scene", result.reconstruction.height, 0,
                               result.report)]))
    print(f"{result.method}: rows {result.rows}, "
          f"nmse {result.report.nmse:.6g}, ssim {result.report.ssim:.4f}")
    return EXIT_OK


def _cmd_verify_bound(args):
    alphas = [float(a) for a in args.alpha.split(",") if a]
    if not alphas:
        raise ConfigError("need at least one alpha")
    n = args.n
    rows_c = args.rows_coarse
    if n < 1 or rows_c < 1 or args.rows_b < 1:
        raise ConfigError("dimensions must be positive")
    rng = substream(args.seed, "verify-bound", "instance")
    A_C = rng.standard_normal((rows_c, n)) / np.sqrt(rows_c)
    k = max(1, n // 4)
    x_true = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    x_true[support] = rng.choice([-1.0, 1.0], size=k) * (
        0.5 + rng.random(k))
    summaries = []
    all_hold = True
    for alpha in alphas:
        s = check_expected_bound(A_C, x_true, alpha, args.rows_b,
                                 trials=args.trials, seed=args.seed)
        summaries.append(s)
        all_hold = all_hold and s.holds
        print(f"alpha {alpha:g}: lhs {s.mean_lhs:.6g} <= "
              f"rhs {s.mean_rhs:.6g} + 2se {2 * s.stderr_diff:.3g} "
              f"[{'holds' if s.holds else 'VIOLATED'}] "
              f"rate {s.holds_rate:.3f}")
    if args.output:
        with open(args.output, "w", encoding="ascii") as f:
            f.write(expected_bound_csv(summaries))
    return EXIT_OK if all_hold else EXIT_NUMERICAL


def _cmd_detect(args):
    img = _load_band(args.input)
    params = DetectionParams(
        max_regions=args.max_regions if args.max_regions is not None else 10,
        merge_radius=args.merge_radius if args.merge_radius is not None else 1,
        score=args.score or SCORE_BLOCK_VARIANCE,
        min_side=args.min_side if args.min_side is not None else 32,
        max_side=args.max_side if args.max_side is not None else 128)
    scored = detect_rois_scored(img, params)
    text = rois_to_json(scored)
    if args.output:
        with open(args.output, "w", encoding="ascii") as f:
            f.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _cmd_ingest(args):
    names = args.band_names.split(",") if args.band_names else None
    scene = ingest_scene(args.inputs, band_names=names, side=args.side)
    if args.output.endswith(".pgm"):
        save_pgm(scene, args.output, bits=16)
    elif args.output.endswith(".raw"):
        save_raw(scene, args.output)
    else:
        raise ConfigError(f"unsupported output format: {args.output}")
    print(f"{scene.height}x{scene.width} scene -> {args.output}")
    return EXIT_OK


def _cmd_metrics(args):
    est = _load_band(args.input)
    ref = _load_band(args.reference)
    report = MetricReport(nmse(est, ref), ssim(est, ref))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spcsim",
        description="Single-pixel camera simulator with region-prioritised "
                    "sampling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full acquisition pipeline")
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("baseline", help="single-pass reconstruction")
    p.add_argument("method", choices=(METHOD_CLASSICAL, METHOD_MULTILEVEL))
    _add_config_flags(p)
    p.set_defaults(handler=_cmd_baseline)

    p = sub.add_parser("verify-bound",
                       help="Monte Carlo refinement-bound check")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--rows-coarse", type=int, default=6, dest="rows_coarse")
    p.add_argument("--rows-b", type=int, default=6, dest="rows_b")
    p.add_argument("--alpha", default="0.01,0.1,1.0")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="write summary CSV here")
    p.set_defaults(handler=_cmd_verify_bound)

    p = sub.add_parser("detect", help="region detection on an image")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--max-regions", type=int, dest="max_regions")
    p.add_argument("--merge-radius", type=int, dest="merge_radius")
    p.add_argument("--score", choices=(SCORE_BLOCK_VARIANCE, SCORE_CONTRAST))
    p.add_argument("--min-side", type=int, dest="min_side")
    p.add_argument("--max-side", type=int, dest="max_side")
    p.set_defaults(handler=_cmd_detect)

    p = sub.add_parser("ingest", help="normalize bands into a scene")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--band-names", dest="band_names",
                   help="comma-separated names, one per input")
    p.add_argument("--side", type=int, default=256)
    p.add_argument("--output", required=True)
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("metrics", help="NMSE/SSIM between two images")
    p.add_argument("--input", required=True)
    p.add_argument("--reference", required=True)
    p.set_defaults(handler=_cmd_metrics)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags, which matches the config-error code
        return int(e.code) if e.code else EXIT_OK
    try:
        return args.handler(args)
    except BudgetError as e:
        print(f"budget infeasible: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as e:
        print(f"configuration error: no such file: {e.filename}",
              file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
