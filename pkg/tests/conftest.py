"""Shared fixtures: the end-to-end scene and the expensive pipeline runs.

The full-scene acquisition runs are session-scoped so the acceptance tests
that examine different aspects of the same run share one execution. Each
value carries the wall time its run took, for the runtime assertions.
"""

import time
from types import SimpleNamespace

import pytest

from spcsim.cli import RunConfig, run_baseline
from spcsim.rps import rps_run
from spcsim.solvers import SolverOptions

from scenes import fixture_rois, fixture_scene

# macro-ensemble refinement solves run a tighter stationarity tolerance
# than the package default so the last halving step keeps improving
MACRO_OPTS = SolverOptions(beta2=0.4, tol=5e-5)


@pytest.fixture(scope="session")
def e2e_scene():
    return fixture_scene()


@pytest.fixture(scope="session")
def refinement_runs(e2e_scene):
    """All three acquisition styles at a 15% budget of the 256x256 scene."""
    out = {}
    for ensemble in ("MacroBinary01", "MacroRademacher", "WalshMultilevel"):
        cfg = SimpleNamespace(ensemble=ensemble, budget=9830, seed=7,
                              rois=fixture_rois())
        if ensemble != "WalshMultilevel":
            cfg.solver = MACRO_OPTS
        t0 = time.perf_counter()
        result = rps_run(e2e_scene, cfg)
        out[ensemble] = (result, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def comparison_runs(e2e_scene):
    """Prioritised Walsh run and both single-pass baselines at ~8% budget."""
    t0 = time.perf_counter()
    cfg = SimpleNamespace(ensemble="WalshMultilevel", budget=5300, seed=7,
                          rois=fixture_rois())
    walsh = rps_run(e2e_scene, cfg)
    base_cfg = RunConfig(ensemble="WalshMultilevel", budget=5300, seed=7,
                         scene_side=256,
                         rois=[[0, 0, 128], [160, 160, 64], [192, 32, 32]])
    classical = run_baseline(base_cfg, "ClassicalCS", scene=e2e_scene)
    multilevel = run_baseline(base_cfg, "MultilevelCS", scene=e2e_scene)
    elapsed = time.perf_counter() - t0
    return {"walsh": walsh, "classical": classical,
            "multilevel": multilevel, "elapsed": elapsed}
