"""spcsim: single-pixel-camera acquisition simulator with budgeted RoI refinement.

The package simulates a DMD-based single-pixel camera: random macro-pixel
masks and multi-level Walsh row subsets produce scalar measurements of a
scene, first-order solvers reconstruct from them, and an acquisition loop
spends a hard measurement budget refining detected regions of interest in
priority order of their refinement indicator.
"""

from .imaging import (
    Image,
    MacroGrid,
    RoIWindow,
    extract_window,
    macro_downsample,
    macro_upsample,
    paste_window,
)
from .metrics import MetricReport, nmse, ssim
from .operators import (
    MaskEnsemble,
    MeasurementOperator,
    WalshSamplingMap,
    build_macro_mask_operator,
    build_walsh_operator,
    cycle_cost,
    design_sampling_map,
    stack,
)
from .rps import EvolutionLog, Ledger, RoIState, compute_ri, ri_budget, rps_run, select_next
from .solvers import (
    SolveReport,
    SolverOptions,
    high_precision_reference_solve,
    solve_analysis_bpdn,
    solve_analysis_tv,
)
from .transforms import TransformSpec, dct2d, dwt2d_db8, idct2d, idwt2d_db8, iwalsh2d, tv_value, walsh2d

__version__ = "0.1.0"

__all__ = [
    "Image",
    "MacroGrid",
    "RoIWindow",
    "macro_downsample",
    "macro_upsample",
    "extract_window",
    "paste_window",
    "MaskEnsemble",
    "WalshSamplingMap",
    "MeasurementOperator",
    "build_macro_mask_operator",
    "build_walsh_operator",
    "design_sampling_map",
    "stack",
    "cycle_cost",
    "TransformSpec",
    "walsh2d",
    "iwalsh2d",
    "dct2d",
    "idct2d",
    "dwt2d_db8",
    "idwt2d_db8",
    "tv_value",
    "SolverOptions",
    "SolveReport",
    "solve_analysis_bpdn",
    "solve_analysis_tv",
    "high_precision_reference_solve",
    "MetricReport",
    "nmse",
    "ssim",
    "Ledger",
    "RoIState",
    "EvolutionLog",
    "compute_ri",
    "ri_budget",
    "rps_run",
    "select_next",
    "__version__",
]
