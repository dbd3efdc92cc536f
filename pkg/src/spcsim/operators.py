"""Measurement operators for the simulated single-pixel camera.

Three kinds: random macro-pixel mask stacks (0/1 or +-1 entries, constant on
macro blocks), row subsets of the sequency-ordered Walsh transform chosen by
a multi-level sampling map, and vertical stackings of either. Every operator
carries a scalar `column_scale` making the expected column l2 norm equal to
one (exactly one for Walsh subsets), a forward/adjoint pair at native
resolution, and a composed pair acting on a coarser solve grid through the
pixel-replication lift.

Physical-cycle accounting: a 0/1 mask costs one DMD exposure per row; +-1
masks and Walsh rows cost two.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .kernels import packed_matvec, packed_rmatvec
from .transforms import iwalsh2d, walsh2d

__all__ = [
    "SCHEME_BINARY01",
    "SCHEME_RADEMACHER",
    "MaskEnsemble",
    "WalshSamplingMap",
    "MeasurementOperator",
    "MacroMaskOperator",
    "WalshSubsetOperator",
    "StackedOperator",
    "DenseOperator",
    "GridSystem",
    "build_macro_mask_operator",
    "build_walsh_operator",
    "design_sampling_map",
    "default_level_fractions",
    "stack",
    "cycle_cost",
    "substream",
]

SCHEME_BINARY01 = "Binary01"
SCHEME_RADEMACHER = "Rademacher"
_SCHEMES = (SCHEME_BINARY01, SCHEME_RADEMACHER)

# masks stay bit-packed above this many dense float64 entries
DENSE_VALUE_CACHE_MAX = 30_000_000
# hard cap on the packed store per ensemble
PACKED_CAPACITY_BYTES = 1 << 28

# Level fractions (low, mid, high) for the multi-level Walsh maps, keyed by
# window side. Tuned so that, with the largest-full-square rule for the low
# level and s_mid = min(2 s_low, side), the per-level counts follow the
# asymptotically decreasing allocation used throughout the experiments.
_LEVEL_FRACTIONS = {
    128: (0.63, 0.2104, 0.1596),
    64: (0.85, 0.097, 0.053),
    32: (0.65, 0.33, 0.02),
}
_LEVEL_FRACTIONS_DEFAULT = (0.7, 0.2, 0.1)


def default_level_fractions(window_side):
    """Recommended (low, mid, high) budget fractions for a window side."""
    return _LEVEL_FRACTIONS.get(int(window_side), _LEVEL_FRACTIONS_DEFAULT)


def substream(seed, *tags):
    """Deterministic named RNG substream: Philox keyed by seed and tag hashes."""
    key = tuple(zlib.crc32(str(t).encode("utf-8")) for t in tags)
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


class MaskEnsemble:
    """A seeded stack of random macro-pixel masks, stored bit-packed.

    Bit (r, c) set means macro pixel c of mask r is ON (value 1); clear means
    0 for Binary01 and -1 for Rademacher. Identical (seed, dims, scheme,
    num_masks) reproduce bit-identical masks on any platform.
    """

    def __init__(self, window_side, macro_side, scheme, num_masks, seed):
        if macro_side < 1 or window_side % macro_side != 0:
            raise ValueError(
                f"macro side {macro_side} does not divide window side {window_side}"
            )
        if scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        if num_masks < 1:
            raise ValueError("num_masks must be >= 1")
        self.window_side = int(window_side)
        self.macro_side = int(macro_side)
        self.scheme = scheme
        self.num_masks = int(num_masks)
        self.seed = int(seed)
        self.grid_side = self.window_side // self.macro_side
        self.cells = self.grid_side ** 2
        nbytes = (self.cells + 7) // 8
        if self.num_masks * nbytes > PACKED_CAPACITY_BYTES:
            raise ValueError(
                f"mask ensemble of {self.num_masks}x{self.cells} exceeds the "
                f"{PACKED_CAPACITY_BYTES} byte capacity"
            )
        rng = substream(seed, "mask-ensemble", self.window_side, self.macro_side, scheme)
        packed = rng.integers(0, 256, size=(self.num_masks, nbytes), dtype=np.uint8)
        if self.cells % 8:
            packed[:, -1] &= (1 << (self.cells % 8)) - 1
        packed.setflags(write=False)
        self.packed = packed
        self._values = None

    @property
    def has_dense(self):
        return self.num_masks * self.cells <= DENSE_VALUE_CACHE_MAX

    def values(self):
        """Dense float64 mask values, (num_masks, cells). Cached; small ensembles only."""
        if not self.has_dense:
            raise ValueError("ensemble too large for dense values; use the packed path")
        if self._values is None:
            bits = np.unpackbits(self.packed, axis=1, count=self.cells,
                                 bitorder="little").astype(np.float64)
            if self.scheme == SCHEME_RADEMACHER:
                bits = 2.0 * bits - 1.0
            bits.setflags(write=False)
            self._values = bits
        return self._values


class MeasurementOperator:
    """Forward/adjoint pair over a window_side x window_side field.

    Subclasses set kind, rows, cols, column_scale and implement the
    grid-composed pair; the native pair is the grid pair at full resolution.
    `grid_gain(g)` is the factor by which composition with the replicate
    lift onto a g x g solve grid scales the (expected) column norms.
    """

    kind = "Abstract"

    def matvec(self, x):
        return self.matvec_grid(np.asarray(x, dtype=np.float64), self.window_side)

    def rmatvec(self, y):
        return self.rmatvec_grid(np.asarray(y, dtype=np.float64), self.window_side)

    @property
    def x_shape(self):
        return (self.window_side, self.window_side)

    def matvec_grid(self, xg, grid_side):
        raise NotImplementedError

    def rmatvec_grid(self, y, grid_side):
        raise NotImplementedError

    def grid_gain(self, grid_side):
        raise NotImplementedError


class MacroMaskOperator(MeasurementOperator):
    kind = "MacroMask"

    def __init__(self, ensemble):
        self.ensemble = ensemble
        self.window_side = ensemble.window_side
        self.rows = ensemble.num_masks
        self.cols = ensemble.window_side ** 2
        if ensemble.scheme == SCHEME_BINARY01:
            self.column_scale = float(np.sqrt(2.0 / self.rows))
        else:
            self.column_scale = float(np.sqrt(1.0 / self.rows))

    def _check_grid(self, grid_side):
        side = self.window_side
        if grid_side < 1 or side % grid_side:
            raise ValueError(f"grid side {grid_side} does not divide window {side}")
        if grid_side % self.ensemble.grid_side:
            raise ValueError(
                f"solve grid {grid_side} is coarser than the {self.ensemble.grid_side} mask grid"
            )
        return side // grid_side  # native pixels per solve cell, per axis

    def _block_sum(self, xg, grid_side):
        f = grid_side // self.ensemble.grid_side
        if f == 1:
            return np.ascontiguousarray(xg, dtype=np.float64)
        gs = self.ensemble.grid_side
        return xg.reshape(gs, f, gs, f).sum(axis=(1, 3))

    def matvec_grid(self, xg, grid_side):
        xg = np.asarray(xg, dtype=np.float64)
        if xg.shape != (grid_side, grid_side):
            raise ValueError(f"expected shape {(grid_side, grid_side)}, got {xg.shape}")
        m2 = self._check_grid(grid_side) ** 2
        bs = self._block_sum(xg, grid_side)
        ens = self.ensemble
        if ens.has_dense:
            acc = ens.values() @ bs.ravel()
            return (self.column_scale * m2) * acc
        flat = np.ascontiguousarray(bs.ravel())
        out = np.empty(self.rows)
        packed_matvec(ens.packed, flat, ens.cells, out)
        if ens.scheme == SCHEME_RADEMACHER:
            out = 2.0 * out - flat.sum()
        return (self.column_scale * m2) * out

    def rmatvec_grid(self, y, grid_side):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.rows,):
            raise ValueError(f"expected {self.rows} measurements, got {y.shape}")
        m2 = self._check_grid(grid_side) ** 2
        ens = self.ensemble
        w = np.ascontiguousarray(y)
        if ens.has_dense:
            cellvals = ens.values().T @ w
        else:
            cellvals = np.empty(ens.cells)
            packed_rmatvec(ens.packed, w, ens.cells, cellvals)
            if ens.scheme == SCHEME_RADEMACHER:
                cellvals = 2.0 * cellvals - w.sum()
        f = grid_side // ens.grid_side
        grid = cellvals.reshape(ens.grid_side, ens.grid_side)
        if f > 1:
            grid = np.repeat(np.repeat(grid, f, axis=0), f, axis=1)
        return (self.column_scale * m2) * grid

    def grid_gain(self, grid_side):
        self._check_grid(grid_side)
        return float((self.window_side // grid_side) ** 2)


class WalshSubsetOperator(MeasurementOperator):
    """Selected sequency coefficients of the orthonormal 2D Walsh transform."""

    kind = "WalshSubset"

    def __init__(self, window_side, indices, sampling_map=None):
        indices = np.asarray(indices, dtype=np.int64).reshape(-1, 2)
        if indices.shape[0] == 0:
            raise ValueError("Walsh operator needs at least one coefficient")
        if indices.min() < 0 or indices.max() >= window_side:
            raise ValueError("coefficient index outside the window grid")
        self.sampling_map = sampling_map
        self.window_side = int(window_side)
        self.rows = indices.shape[0]
        self.cols = self.window_side ** 2
        self.column_scale = float(np.sqrt(self.cols / self.rows))
        self._u = np.ascontiguousarray(indices[:, 0])
        self._v = np.ascontiguousarray(indices[:, 1])

    def _check_grid(self, grid_side):
        if grid_side != self.window_side:
            raise ValueError("Walsh subsets act at native window resolution only")

    def matvec_grid(self, xg, grid_side):
        self._check_grid(grid_side)
        xg = np.asarray(xg, dtype=np.float64)
        if xg.shape != (grid_side, grid_side):
            raise ValueError(f"expected shape {(grid_side, grid_side)}, got {xg.shape}")
        coeffs = walsh2d(xg)
        return self.column_scale * coeffs[self._u, self._v]

    def rmatvec_grid(self, y, grid_side):
        self._check_grid(grid_side)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.rows,):
            raise ValueError(f"expected {self.rows} measurements, got {y.shape}")
        grid = np.zeros((self.window_side, self.window_side))
        grid[self._u, self._v] = self.column_scale * y
        return iwalsh2d(grid)

    def grid_gain(self, grid_side):
        self._check_grid(grid_side)
        return 1.0


class StackedOperator(MeasurementOperator):
    """Vertical stacking: forward outputs concatenate, adjoints sum.

    column_scale is 1.0 by convention; the per-part scales already live
    inside the parts, and the composed column gain is reported by grid_gain.
    """

    kind = "Stacked"
    column_scale = 1.0

    def __init__(self, parts):
        parts = tuple(parts)
        if not parts:
            raise ValueError("stack needs at least one operator")
        cols = parts[0].cols
        side = parts[0].window_side
        for p in parts[1:]:
            if p.cols != cols or p.window_side != side:
                raise ValueError(
                    f"stacked operators must share dimensions: {p.cols} vs {cols}"
                )
        self.parts = parts
        self.window_side = side
        self.cols = cols
        self.rows = sum(p.rows for p in parts)

    def matvec_grid(self, xg, grid_side):
        return np.concatenate([p.matvec_grid(xg, grid_side) for p in self.parts])

    def rmatvec_grid(self, y, grid_side):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.rows,):
            raise ValueError(f"expected {self.rows} measurements, got {y.shape}")
        out = None
        start = 0
        for p in self.parts:
            piece = p.rmatvec_grid(y[start:start + p.rows], grid_side)
            out = piece if out is None else out + piece
            start += p.rows
        return out

    def grid_gain(self, grid_side):
        return float(np.sqrt(sum(p.grid_gain(grid_side) ** 2 for p in self.parts)))


class DenseOperator(MeasurementOperator):
    """Explicit-matrix operator for tests, references, and zero-row edge cases."""

    kind = "Dense"

    def __init__(self, matrix, x_shape=None, column_scale=1.0):
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("matrix must be 2D")
        self.matrix = m
        self.rows, self.cols = m.shape
        self.column_scale = float(column_scale)
        if x_shape is None:
            side = int(round(np.sqrt(self.cols)))
            if side * side != self.cols:
                raise ValueError("non-square cols need an explicit x_shape")
            x_shape = (side, side)
        if int(np.prod(x_shape)) != self.cols:
            raise ValueError(f"x_shape {x_shape} incompatible with {self.cols} columns")
        self._x_shape = tuple(x_shape)
        self.window_side = self._x_shape[0] if len(self._x_shape) == 2 else None

    @property
    def x_shape(self):
        return self._x_shape

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.column_scale * (self.matrix @ x.ravel())

    def rmatvec(self, y):
        y = np.asarray(y, dtype=np.float64)
        return (self.column_scale * (self.matrix.T @ y)).reshape(self._x_shape)

    def matvec_grid(self, xg, grid_side):
        if grid_side != self.window_side:
            raise ValueError("dense operators act at native resolution only")
        return self.matvec(xg)

    def rmatvec_grid(self, y, grid_side):
        if grid_side != self.window_side:
            raise ValueError("dense operators act at native resolution only")
        return self.rmatvec(y)

    def grid_gain(self, grid_side):
        if grid_side != self.window_side:
            raise ValueError("dense operators act at native resolution only")
        return 1.0


def build_macro_mask_operator(window_side, macro_side, scheme, num_masks, seed):
    """Seeded random macro-pixel mask operator (0/1 or +-1 entries)."""
    return MacroMaskOperator(MaskEnsemble(window_side, macro_side, scheme,
                                          num_masks, seed))


def build_walsh_operator(sampling_map):
    """Row-subset Walsh operator for a multi-level sampling map."""
    return WalshSubsetOperator(sampling_map.window_side,
                               sampling_map.selected_indices(), sampling_map)


def walsh_level_operator(sampling_map, levels):
    """Walsh operator restricted to a union of the map's named levels.

    levels is a subset of ("low", "mid", "high"); rows follow level order
    with each level's block kept in its stored lexicographic order.
    """
    known = ("low", "mid", "high")
    levels = tuple(levels)
    for name in levels:
        if name not in known:
            raise ValueError(f"unknown level {name!r}")
    arrs = [getattr(sampling_map, f"{name}_indices")
            for name in known if name in levels]
    arrs = [a for a in arrs if a.shape[0] > 0]
    if not arrs:
        raise ValueError("selected levels contain no coefficients")
    return WalshSubsetOperator(sampling_map.window_side, np.concatenate(arrs))


def stack(a, b):
    """A over B: rows concatenate; (A;B)*(A;B) = A*A + B*B."""
    parts = []
    for op in (a, b):
        parts.extend(op.parts if isinstance(op, StackedOperator) else (op,))
    return StackedOperator(parts)


def stack_all(ops):
    parts = []
    for op in ops:
        parts.extend(op.parts if isinstance(op, StackedOperator) else (op,))
    return StackedOperator(parts)


def cycle_cost(op):
    """(logical measurements, physical DMD cycles) for acquiring op's rows."""
    if isinstance(op, StackedOperator):
        totals = [cycle_cost(p) for p in op.parts]
        return (sum(t[0] for t in totals), sum(t[1] for t in totals))
    if isinstance(op, MacroMaskOperator):
        if op.ensemble.scheme == SCHEME_BINARY01:
            return (op.rows, op.rows)
        return (op.rows, 2 * op.rows)
    if isinstance(op, WalshSubsetOperator):
        return (op.rows, 2 * op.rows)
    return (op.rows, op.rows)


# --- multi-level Walsh sampling maps ---------------------------------------

def _sorted_lex(idx):
    idx = np.asarray(idx, dtype=np.int64).reshape(-1, 2)
    if idx.shape[0] == 0:
        return idx
    order = np.lexsort((idx[:, 1], idx[:, 0]))
    return np.ascontiguousarray(idx[order])


@dataclass(frozen=True, eq=False)
class WalshSamplingMap:
    """Three square frequency levels over the sequency grid.

    low = indices with max(u,v) < s_low, mid = up to s_mid, high = the rest.
    Index arrays are lexicographically sorted within each level; the union
    (in low, mid, high order) fixes the measurement row order.
    """

    window_side: int
    s_low: int
    s_mid: int
    low_indices: np.ndarray
    mid_indices: np.ndarray
    high_indices: np.ndarray
    seed: int = 0

    def __post_init__(self):
        side = self.window_side
        if not _is_pow2(side):
            raise ValueError(f"window side must be a power of two, got {side}")
        if not (1 <= self.s_low <= self.s_mid <= side):
            raise ValueError(
                f"level bounds must satisfy 1 <= s_low <= s_mid <= side, "
                f"got ({self.s_low}, {self.s_mid})"
            )
        for name, arr, lo, hi in (
            ("low", self.low_indices, 0, self.s_low),
            ("mid", self.mid_indices, self.s_low, self.s_mid),
            ("high", self.high_indices, self.s_mid, side),
        ):
            arr = _sorted_lex(arr)
            object.__setattr__(self, f"{name}_indices", arr)
            if arr.size:
                m = arr.max(axis=1)
                if arr.min() < 0 or (arr >= side).any():
                    raise ValueError(f"{name} indices out of the grid")
                if (m < lo).any() or (m >= hi).any():
                    raise ValueError(f"{name} indices outside their level region")
        allsel = self.selected_indices()
        if allsel.shape[0] != len({(int(u), int(v)) for u, v in allsel}):
            raise ValueError("duplicate selected indices")
        if not ((allsel[:, 0] == 0) & (allsel[:, 1] == 0)).any():
            raise ValueError("the DC index (0,0) must be selected")

    @property
    def level_bounds(self):
        return (self.s_low, self.s_mid)

    @property
    def counts(self):
        return (self.low_indices.shape[0], self.mid_indices.shape[0],
                self.high_indices.shape[0])

    @property
    def rows(self):
        return sum(self.counts)

    def selected_indices(self):
        return np.concatenate([self.low_indices, self.mid_indices,
                               self.high_indices], axis=0)

    def level_slices(self):
        """Row ranges of the three levels inside the stacked measurement vector."""
        n_low, n_mid, n_high = self.counts
        return (slice(0, n_low), slice(n_low, n_low + n_mid),
                slice(n_low + n_mid, n_low + n_mid + n_high))

    def to_json(self):
        sel = _sorted_lex(self.selected_indices())
        doc = {
            "window_side": self.window_side,
            "level_bounds": [self.s_low, self.s_mid],
            "counts": list(self.counts),
            "seed": self.seed,
            "selected_indices": [[int(u), int(v)] for u, v in sel],
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        side = int(doc["window_side"])
        s_low, s_mid = (int(b) for b in doc["level_bounds"])
        sel = np.asarray(doc["selected_indices"], dtype=np.int64).reshape(-1, 2)
        m = sel.max(axis=1)
        low = sel[m < s_low]
        mid = sel[(m >= s_low) & (m < s_mid)]
        high = sel[m >= s_mid]
        out = cls(side, s_low, s_mid, low, mid, high, int(doc["seed"]))
        if list(out.counts) != [int(c) for c in doc["counts"]]:
            raise ValueError("stored counts do not match stored indices")
        return out


def design_sampling_map(window_side, total_budget, level_fractions=None, seed=0):
    """Allocate a measurement budget across three square frequency levels.

    The low level is the largest fully-sampled square with s_low^2 <=
    fraction_low * budget; the mid count is floor(fraction_mid * budget);
    the high level absorbs the remainder. Mid/high indices are drawn
    uniformly without replacement inside their regions.
    """
    side = int(window_side)
    if not _is_pow2(side):
        raise ValueError(f"window side must be a power of two, got {side}")
    budget = int(total_budget)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > side * side:
        raise ValueError(f"budget {budget} exceeds the {side * side} grid")
    if level_fractions is None:
        level_fractions = default_level_fractions(side)
    fr = tuple(float(f) for f in level_fractions)
    if len(fr) == 2:
        fr = (fr[0], fr[1], 1.0 - fr[0] - fr[1])
    if len(fr) != 3 or any(f < -1e-12 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise ValueError(f"level fractions must be nonnegative and sum to 1, got {fr}")

    s_low = max(1, int(np.floor(np.sqrt(fr[0] * budget))))
    s_low = min(s_low, side)
    n_low = s_low * s_low
    n_mid = int(np.floor(fr[1] * budget))
    n_high = budget - n_low - n_mid
    if n_high < 0:
        raise ValueError(
            f"fractions {fr} infeasible for budget {budget}: low {n_low} + mid {n_mid} overflow"
        )
    s_mid = min(2 * s_low, side)

    mid_cap = s_mid * s_mid - n_low
    high_cap = side * side - s_mid * s_mid
    if n_mid > mid_cap or n_high > high_cap:
        raise ValueError(
            f"level capacities exceeded: mid {n_mid}/{mid_cap}, high {n_high}/{high_cap}"
        )

    u = np.arange(side)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    level = np.maximum(uu, vv)
    low_idx = np.stack([uu[level < s_low], vv[level < s_low]], axis=1)
    mid_all = np.stack([uu[(level >= s_low) & (level < s_mid)],
                        vv[(level >= s_low) & (level < s_mid)]], axis=1)
    high_all = np.stack([uu[level >= s_mid], vv[level >= s_mid]], axis=1)
    mid_all = _sorted_lex(mid_all)
    high_all = _sorted_lex(high_all)

    rng = substream(seed, "sampling-map", side, budget)
    mid_pick = rng.choice(mid_all.shape[0], size=n_mid, replace=False) if n_mid else []
    high_pick = rng.choice(high_all.shape[0], size=n_high, replace=False) if n_high else []
    return WalshSamplingMap(
        window_side=side,
        s_low=s_low,
        s_mid=s_mid,
        low_indices=low_idx,
        mid_indices=mid_all[np.asarray(mid_pick, dtype=np.int64)],
        high_indices=high_all[np.asarray(high_pick, dtype=np.int64)],
        seed=int(seed),
    )


# --- solver-facing assembly ------------------------------------------------

class GridSystem:
    """Batches of (operator, measurements) composed to one solve grid.

    Columns of the composed stack are normalized by kappa (the joint column
    gain), so the solver sees a system with unit-scale columns and solves for
    z = kappa * x; `image_from` undoes the change of variables.
    """

    def __init__(self, batches, grid_side):
        if not batches:
            raise ValueError("need at least one (operator, measurements) batch")
        self.ops = [op for op, _ in batches]
        side = self.ops[0].window_side
        for op in self.ops:
            if op.window_side != side:
                raise ValueError("batches must share a window")
        ys = []
        for op, y in batches:
            y = np.asarray(y, dtype=np.float64).ravel()
            if y.shape[0] != op.rows:
                raise ValueError(f"measurement length {y.shape[0]} != rows {op.rows}")
            ys.append(y)
        self.grid_side = int(grid_side)
        self.kappa = float(np.sqrt(sum(op.grid_gain(self.grid_side) ** 2
                                       for op in self.ops)))
        self.y = np.concatenate(ys)
        self.rows = int(self.y.shape[0])
        self.x_shape = (self.grid_side, self.grid_side)

    def matvec(self, zg):
        return np.concatenate([op.matvec_grid(zg, self.grid_side)
                               for op in self.ops]) / self.kappa

    def rmatvec(self, y):
        out = None
        start = 0
        for op in self.ops:
            piece = op.rmatvec_grid(np.ascontiguousarray(y[start:start + op.rows]),
                                    self.grid_side)
            out = piece if out is None else out + piece
            start += op.rows
        return out / self.kappa

    def image_from(self, zg):
        """Map the solver's normalized solution back to image values."""
        return np.asarray(zg, dtype=np.float64) / self.kappa
