"""Region-prioritised acquisition: budgeted coarse-to-fine refinement.

The driver reconstructs a low-resolution overview of the scene first, finds
regions of interest in it, then spends the remaining measurement budget
refining those regions one resolution level at a time. Which region is
refined next is decided by the refinement indicator (RI): the squared
residual of the measurements already bought for the next level against the
current coarse solution lifted to that level. Large residual means the
coarse picture explains the new measurements badly, so the region most in
need of detail is always served first.

Two acquisition styles share the loop. Macro-pixel ensembles buy a fresh
random mask batch per level (8 -> 4 -> 2 -> 1 macro pixels); the multi-level
Walsh style buys the levels of a precomputed sampling map (low, then mid,
then high sequency bands) and re-solves with the accumulated union after
each purchase, with the overview reconstruction standing in as the coarse
step so the first indicator costs nothing.

All spending runs through a Ledger that records logical measurement counts
and physical modulator cycles separately and refuses to overdraw.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .detection import DetectionParams, detect_rois_scored
from .imaging import Image, extract_window, macro_upsample, paste_window
from .operators import (
    SCHEME_BINARY01,
    SCHEME_RADEMACHER,
    GridSystem,
    build_macro_mask_operator,
    cycle_cost,
    default_level_fractions,
    design_sampling_map,
    stack_all,
    substream,
    walsh_level_operator,
)
from .solvers import SolverOptions, solve_analysis_bpdn, solve_analysis_tv
from .transforms import KIND_DCT, KIND_DWT, TransformSpec

__all__ = [
    "ENSEMBLE_MACRO_BINARY01",
    "ENSEMBLE_MACRO_RADEMACHER",
    "ENSEMBLE_WALSH",
    "BudgetError",
    "LedgerEntry",
    "Ledger",
    "RoIState",
    "LogRow",
    "EvolutionLog",
    "RpsResult",
    "compute_ri",
    "ri_budget",
    "select_next",
    "rps_run",
]

ENSEMBLE_MACRO_BINARY01 = "MacroBinary01"
ENSEMBLE_MACRO_RADEMACHER = "MacroRademacher"
ENSEMBLE_WALSH = "WalshMultilevel"
_ENSEMBLES = (ENSEMBLE_MACRO_BINARY01, ENSEMBLE_MACRO_RADEMACHER,
              ENSEMBLE_WALSH)

# measurement-noise slack factor: eta = sigma^2 * rows * (1 + _ETA_SLACK)
_ETA_SLACK = 0.1

_LEVEL_ORDER = ("low", "mid", "high")


class BudgetError(RuntimeError):
    """The measurement budget cannot cover a mandatory acquisition."""


@dataclass(frozen=True)
class LedgerEntry:
    """One debit: who spent, what for, and the logical/physical amounts."""

    label: str
    purpose: str
    logical: int
    physical: int


class Ledger:
    """Append-only spending record against a fixed measurement budget.

    `spent` counts logical measurements (rows of measurement operators);
    `physical_spent` counts modulator cycles, which differ for schemes whose
    patterns take two display cycles per row. Debits that would exceed the
    budget raise BudgetError, so spent <= budget is an invariant.
    """

    def __init__(self, budget):
        budget = int(budget)
        if budget < 0:
            raise ValueError("budget must be nonnegative")
        self.budget = budget
        self.spent = 0
        self.physical_spent = 0
        self.entries = []

    @property
    def available(self):
        return self.budget - self.spent

    def can_afford(self, logical):
        return self.spent + int(logical) <= self.budget

    def debit(self, label, purpose, logical, physical):
        logical = int(logical)
        physical = int(physical)
        if logical < 1 or physical < logical:
            raise ValueError(f"bad debit amounts ({logical}, {physical})")
        if not self.can_afford(logical):
            raise BudgetError(
                f"debit of {logical} exceeds remaining budget {self.available}"
            )
        self.entries.append(LedgerEntry(str(label), str(purpose),
                                        logical, physical))
        self.spent += logical
        self.physical_spent += physical

    def replay(self):
        """Fresh ledger rebuilt from the audit trail; totals must agree."""
        other = Ledger(self.budget)
        for e in self.entries:
            other.debit(e.label, e.purpose, e.logical, e.physical)
        return other

    def to_rows(self):
        return [(e.label, e.purpose, e.logical, e.physical)
                for e in self.entries]


@dataclass
class RoIState:
    """Mutable per-region record carried through the refinement loop.

    `coarse_solution` is the most recent reconstruction at the window's
    current macro grid. `pending_refinement` holds measurements already
    bought for the next level but not yet solved with; `ri` is set exactly
    when a pending batch exists. `resolved` flips when the region reaches
    full resolution or is dropped for lack of budget (`dropped` says which).
    The remaining fields are working storage: the acquisition history used
    to assemble stacked solves, the per-level raw Walsh coefficients, and
    the reconstruction retained at each visited scale.
    """

    window: object
    coarse_solution: Image | None = None
    ri: float | None = None
    coarse_op: object | None = None
    pending_refinement: tuple | None = None
    resolved: bool = False
    dropped: bool = False
    batches: list = field(default_factory=list)
    solutions_by_macro: dict = field(default_factory=dict)
    refine_rows: int = 0
    sampling_map: object | None = None
    raw_levels: dict = field(default_factory=dict)
    solved_levels: tuple = ()
    pending_level: str | None = None

    @property
    def label(self):
        return self.window.label


@dataclass(frozen=True)
class LogRow:
    """One refinement step: indicator table, choice made, budget left."""

    iteration: int
    ris: dict
    selected: int | None
    refined_macro: int | None
    available: int


class EvolutionLog:
    """Row-per-step trace of the refinement loop.

    Row 0 is the coarse step; rows 1..k each record the indicator values at
    selection time, the selected region and its new macro resolution, and
    the measurements still available after that step's purchases.
    `available` never increases from row to row.
    """

    def __init__(self):
        self.rows = []

    def append(self, row):
        if self.rows and row.available > self.rows[-1].available:
            raise ValueError("available measurements must be non-increasing")
        self.rows.append(row)

    def labels(self):
        out = set()
        for row in self.rows:
            out.update(row.ris.keys())
        return sorted(out)

    def to_csv(self):
        labels = self.labels()
        header = ["iteration"] + [f"ri_{k}" for k in labels]
        header += ["selected", "resolution", "available"]
        lines = [",".join(header)]
        for row in self.rows:
            cells = [str(row.iteration)]
            for k in labels:
                cells.append(repr(row.ris[k]) if k in row.ris else "")
            cells.append("" if row.selected is None else str(row.selected))
            cells.append("" if row.refined_macro is None
                         else str(row.refined_macro))
            cells.append(str(row.available))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json(self):
        doc = []
        for row in self.rows:
            doc.append({
                "iteration": row.iteration,
                "ri": {str(k): v for k, v in row.ris.items()},
                "selected": row.selected,
                "refined_macro": row.refined_macro,
                "available": row.available,
            })
        return json.dumps(doc, indent=2, sort_keys=True)


@dataclass
class RpsResult:
    """Everything a run produces: images, per-region states, trace, ledger."""

    reconstruction: Image
    lowres: Image
    states: list
    log: EvolutionLog
    ledger: Ledger


def ri_budget(window, percent):
    """Per-region measurement allowance: floor(percent% of native pixels)."""
    percent = float(percent)
    if not 0.0 < percent <= 100.0:
        raise ValueError(f"percent must be in (0, 100], got {percent}")
    v = percent * (window.side * window.side) / 100.0
    return int(np.floor(v + 1e-9))


def compute_ri(y_b, op_b, x_coarse):
    """Refinement indicator: squared residual of the pending batch.

    x_coarse lives on a macro grid of op_b's window; it is lifted to the
    native window by pixel replication before applying the operator.
    """
    y_b = np.asarray(y_b, dtype=np.float64).ravel()
    if y_b.shape[0] != op_b.rows:
        raise ValueError(
            f"measurement length {y_b.shape[0]} != operator rows {op_b.rows}"
        )
    g = x_coarse.height
    if x_coarse.width != g or op_b.window_side % g != 0:
        raise ValueError(
            f"coarse solution {x_coarse.height}x{x_coarse.width} does not "
            f"tile window side {op_b.window_side}"
        )
    lifted = macro_upsample(x_coarse, op_b.window_side // g)
    r = y_b - op_b.matvec(lifted.data)
    return float(r @ r)


def select_next(states):
    """Live region with the largest indicator; ties prefer the larger
    window, then the smaller label. None when nothing is pending."""
    live = [s for s in states if not s.resolved and s.ri is not None]
    if not live:
        return None
    return max(live, key=lambda s: (s.ri, s.window.side, -s.window.label))


# --- run configuration access ----------------------------------------------

def _cfg(config, name, default):
    return getattr(config, name, default)


def _base_options(config, ensemble):
    opts = _cfg(config, "solver", None)
    if opts is None:
        beta2 = 0.6 if ensemble == ENSEMBLE_WALSH else 0.4
        opts = SolverOptions(beta2=beta2)
    return opts


def _ri_fraction(config, ensemble):
    f = _cfg(config, "ri_fraction", None)
    if f is None:
        f = 0.2 if ensemble == ENSEMBLE_WALSH else 0.1
    f = float(f)
    if not 0.0 < f <= 1.0:
        raise ValueError(f"ri_fraction must be in (0, 1], got {f}")
    return f


def _dwt_levels(side):
    # keep the coarsest band at least 4x4 and never go past 3 levels
    return int(min(3, max(1, int(np.log2(side)) - 3)))


def _derive_seed(seed, *tags):
    return int(substream(seed, "derive", *tags).integers(0, 2 ** 63))


def _acquire(window_data, op, sigma, noise_rng):
    y = op.matvec(window_data)
    if sigma > 0.0:
        y = y + sigma * noise_rng.standard_normal(op.rows)
    return y


def _default_solve(system, W, opts, info):
    if info["stage"] == "lowres":
        return solve_analysis_bpdn(system, W, system.y, opts)
    return solve_analysis_tv(system, W, system.y, opts)


def _solve_image(solve_fn, system, W, opts, info):
    report = solve_fn(system, W, opts, info)
    return Image(system.image_from(report.solution.data))


def _tv_opts(base, sigma, rows):
    if sigma > 0.0:
        return replace(base, eta=sigma * sigma * rows * (1.0 + _ETA_SLACK))
    return base


def _walsh_eta(sampling_map, levels, sigma, union_scale):
    """Noise allowance for a union solve: acquisition noise was added per
    level at that level's scale, then renormalized to the union's."""
    counts = dict(zip(_LEVEL_ORDER, sampling_map.counts))
    n = sampling_map.window_side ** 2
    total = 0.0
    for name in levels:
        rows_l = counts[name]
        s_l = np.sqrt(n / rows_l)
        total += rows_l * (sigma * union_scale / s_l) ** 2
    return total * (1.0 + _ETA_SLACK)


# --- the acquisition loop ---------------------------------------------------

def _detect_windows(config, lowres_native):
    explicit = _cfg(config, "rois", None)
    if explicit is not None:
        return list(explicit)
    params = _cfg(config, "detection", None)
    if params is None:
        params = DetectionParams()
    return [wn for wn, _ in detect_rois_scored(lowres_native, params)]


def _init_macro_roi(state, scene, config, ledger, ensemble, pct, sigma,
                    solve_fn, base_opts):
    """Coarse batch, coarse solve, and ledger debit for one region."""
    w = state.window
    n = ri_budget(w, pct)
    if n < 1 or not ledger.can_afford(n):
        state.resolved = True
        state.dropped = True
        return
    seed = config.seed
    op = build_macro_mask_operator(
        w.side, w.current_macro, SCHEME_BINARY01, n,
        _derive_seed(seed, "acq", w.label, "coarse"))
    data = extract_window(scene, w).data
    y = _acquire(data, op, sigma,
                 substream(seed, "noise", w.label, "coarse"))
    lo, ph = cycle_cost(op)
    ledger.debit(f"roi-{w.label}", "coarse", lo, ph)
    state.batches.append((op, y))
    state.coarse_op = op
    state.refine_rows = n
    g = w.grid_side
    system = GridSystem(state.batches, g)
    W = TransformSpec(KIND_DWT, _dwt_levels(g))
    opts = _tv_opts(base_opts, sigma, system.rows)
    info = {"stage": "coarse", "label": w.label, "macro": w.current_macro,
            "rows": system.rows}
    sol = _solve_image(solve_fn, system, W, opts, info)
    state.coarse_solution = sol
    state.solutions_by_macro[w.current_macro] = sol


def _buy_macro_batch(state, scene, config, ledger, scheme, sigma, normalized):
    """Acquire the next-level mask batch for a region, if affordable."""
    w = state.window
    next_macro = w.current_macro // 2
    n = state.refine_rows
    if not ledger.can_afford(n):
        state.resolved = True
        state.dropped = True
        return
    seed = config.seed
    op = build_macro_mask_operator(
        w.side, next_macro, scheme, n,
        _derive_seed(seed, "acq", w.label, "refine", next_macro))
    data = extract_window(scene, w).data
    y = _acquire(data, op, sigma,
                 substream(seed, "noise", w.label, "refine", next_macro))
    lo, ph = cycle_cost(op)
    ledger.debit(f"roi-{w.label}", f"refine-{next_macro}", lo, ph)
    state.pending_refinement = (op, y)
    ri = compute_ri(y, op, state.coarse_solution)
    state.ri = ri / op.rows if normalized else ri


def _init_walsh_roi(state, scene, config, ledger, lowres_native, pct, sigma,
                    normalized):
    """Design the sampling map, buy its low band, and price the first
    refinement with the overview reconstruction standing in as coarse."""
    w = state.window
    total = ri_budget(w, pct)
    fractions = _cfg(config, "level_fractions", None)
    if fractions is None:
        fractions = default_level_fractions(w.side)
    seed = config.seed
    state.sampling_map = design_sampling_map(
        w.side, total, fractions, seed=_derive_seed(seed, "map", w.label))
    n_low = state.sampling_map.counts[0]
    if not ledger.can_afford(n_low):
        state.resolved = True
        state.dropped = True
        return
    op = walsh_level_operator(state.sampling_map, ("low",))
    data = extract_window(scene, w).data
    y = _acquire(data, op, sigma,
                 substream(seed, "noise", w.label, "level", "low"))
    lo, ph = cycle_cost(op)
    ledger.debit(f"roi-{w.label}", "level-low", lo, ph)
    state.raw_levels["low"] = y / op.column_scale
    surrogate = extract_window(lowres_native, w)
    state.coarse_solution = surrogate
    state.solutions_by_macro[w.current_macro] = surrogate
    state.pending_refinement = (op, y)
    state.pending_level = "low"
    # the low band was already paid for, so this indicator is free
    ri = compute_ri(y, op, surrogate)
    state.ri = ri / op.rows if normalized else ri


def _next_walsh_level(sampling_map, after):
    counts = dict(zip(_LEVEL_ORDER, sampling_map.counts))
    idx = _LEVEL_ORDER.index(after) + 1
    for name in _LEVEL_ORDER[idx:]:
        if counts[name] > 0:
            return name
    return None


def _buy_walsh_level(state, scene, config, ledger, sigma, normalized):
    """Acquire the next sampling-map level for a region, if affordable."""
    w = state.window
    name = _next_walsh_level(state.sampling_map, state.pending_level
                             or state.solved_levels[-1])
    if name is None:
        state.resolved = True
        return
    counts = dict(zip(_LEVEL_ORDER, state.sampling_map.counts))
    if not ledger.can_afford(counts[name]):
        state.resolved = True
        state.dropped = True
        return
    seed = config.seed
    op = walsh_level_operator(state.sampling_map, (name,))
    data = extract_window(scene, w).data
    y = _acquire(data, op, sigma,
                 substream(seed, "noise", w.label, "level", name))
    lo, ph = cycle_cost(op)
    ledger.debit(f"roi-{w.label}", f"level-{name}", lo, ph)
    state.raw_levels[name] = y / op.column_scale
    state.pending_refinement = (op, y)
    state.pending_level = name
    ri = compute_ri(y, op, state.coarse_solution)
    state.ri = ri / op.rows if normalized else ri


def _refine_selected(state, config, ensemble, sigma, solve_fn, base_opts):
    """Solve the selected region one level finer using everything bought."""
    new_window = state.window.refined()
    if ensemble == ENSEMBLE_WALSH:
        levels = state.solved_levels + (state.pending_level,)
        union = walsh_level_operator(state.sampling_map, levels)
        raw = np.concatenate([state.raw_levels[n] for n in levels])
        y = union.column_scale * raw
        system = GridSystem([(union, y)], state.window.side)
        opts = base_opts
        if sigma > 0.0:
            eta = _walsh_eta(state.sampling_map, levels, sigma,
                             union.column_scale)
            opts = replace(base_opts, eta=eta)
        state.batches = [(union, y)]
        state.coarse_op = union
        state.solved_levels = levels
        g = state.window.side
    else:
        op, y = state.pending_refinement
        state.batches.append((op, y))
        state.coarse_op = (state.batches[0][0] if len(state.batches) == 1
                           else stack_all([b[0] for b in state.batches]))
        g = new_window.grid_side
        system = GridSystem(state.batches, g)
        opts = _tv_opts(base_opts, sigma, system.rows)
    W = TransformSpec(KIND_DWT, _dwt_levels(g))
    info = {"stage": "refine", "label": new_window.label,
            "macro": new_window.current_macro, "rows": system.rows}
    sol = _solve_image(solve_fn, system, W, opts, info)
    state.window = new_window
    state.coarse_solution = sol
    state.solutions_by_macro[new_window.current_macro] = sol
    state.pending_refinement = None
    state.pending_level = None
    state.ri = None


def _composite(lowres_native, states):
    """Overview background with every refined window pasted in, higher
    priority regions painted last."""
    out = lowres_native
    for st in sorted(states, key=lambda s: -s.window.label):
        if st.coarse_solution is None:
            continue
        factor = st.window.side // st.coarse_solution.height
        patch = macro_upsample(st.coarse_solution, factor)
        out = paste_window(out, st.window, patch)
    return out


def rps_run(scene, config, solve_fn=None):
    """Run the full acquisition pipeline on a scene.

    `config` supplies ensemble, budget, seed, low-res and detection
    settings (see the CLI run configuration). `solve_fn(system, W, opts,
    info)` replaces the built-in solver dispatch when given; tests use it
    to study the loop with instant stub solves.
    """
    if scene.height != scene.width:
        raise ValueError(f"scene must be square, got {scene.height}x{scene.width}")
    ensemble = config.ensemble
    if ensemble not in _ENSEMBLES:
        raise ValueError(f"unknown ensemble {ensemble!r}; expected one of {_ENSEMBLES}")
    budget = int(config.budget)
    lowres_count = int(_cfg(config, "lowres_count", 1000))
    lowres_macro = int(_cfg(config, "lowres_macro", 8))
    if lowres_count < 1:
        raise ValueError("lowres_count must be positive")
    if scene.height % lowres_macro != 0:
        raise ValueError(
            f"low-res macro {lowres_macro} does not divide scene side {scene.height}"
        )
    sigma = float(_cfg(config, "noise_sigma", 0.0))
    if sigma < 0.0:
        raise ValueError("noise_sigma must be nonnegative")
    normalized = bool(_cfg(config, "ri_normalized", False))
    seed = config.seed
    pct = _ri_fraction(config, ensemble) * 100.0
    base_opts = _base_options(config, ensemble)
    if solve_fn is None:
        solve_fn = _default_solve
    refine_scheme = (SCHEME_RADEMACHER
                     if ensemble == ENSEMBLE_MACRO_RADEMACHER
                     else SCHEME_BINARY01)

    ledger = Ledger(budget)
    if budget < lowres_count:
        raise BudgetError(
            f"budget {budget} cannot cover the {lowres_count}-measurement overview"
        )

    # overview: coarse scene reconstruction that seeds detection
    side = scene.height
    op0 = build_macro_mask_operator(side, lowres_macro, SCHEME_BINARY01,
                                    lowres_count,
                                    _derive_seed(seed, "acq", "lowres"))
    y0 = _acquire(scene.data, op0, sigma, substream(seed, "noise", "lowres"))
    lo, ph = cycle_cost(op0)
    ledger.debit("lowres", "lowres", lo, ph)
    system0 = GridSystem([(op0, y0)], side // lowres_macro)
    info0 = {"stage": "lowres", "label": None, "macro": lowres_macro,
             "rows": system0.rows}
    lowres_grid = _solve_image(solve_fn, system0, TransformSpec(KIND_DCT),
                               base_opts, info0)
    lowres_native = macro_upsample(lowres_grid, lowres_macro)

    windows = _detect_windows(config, lowres_native)
    states = [RoIState(window=w) for w in windows]

    log = EvolutionLog()
    if ensemble == ENSEMBLE_WALSH:
        for st in states:
            _init_walsh_roi(st, scene, config, ledger, lowres_native, pct,
                            sigma, normalized)
    else:
        for st in states:
            _init_macro_roi(st, scene, config, ledger, ensemble, pct, sigma,
                            solve_fn, base_opts)
        for st in states:
            if not st.resolved:
                _buy_macro_batch(st, scene, config, ledger, refine_scheme,
                                 sigma, normalized)

    acquired_any = any(st.batches or st.raw_levels for st in states)
    if acquired_any:
        ris = {st.label: st.ri for st in states
               if not st.resolved and st.ri is not None}
        log.append(LogRow(0, ris, None, lowres_macro, ledger.available))

    iteration = 0
    while True:
        sel = select_next(states)
        if sel is None:
            break
        iteration += 1
        ris = {st.label: st.ri for st in states
               if not st.resolved and st.ri is not None}
        _refine_selected(sel, config, ensemble, sigma, solve_fn, base_opts)
        if sel.window.current_macro == 1:
            sel.resolved = True
        elif ensemble == ENSEMBLE_WALSH:
            _buy_walsh_level(sel, scene, config, ledger, sigma, normalized)
        else:
            _buy_macro_batch(sel, scene, config, ledger, refine_scheme,
                             sigma, normalized)
        log.append(LogRow(iteration, ris, sel.window.label,
                          sel.window.current_macro, ledger.available))

    return RpsResult(
        reconstruction=_composite(lowres_native, states),
        lowres=lowres_native,
        states=states,
        log=log,
        ledger=ledger,
    )
