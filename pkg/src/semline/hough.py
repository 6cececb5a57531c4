"""Hough voting over intensity maps: a slow, obviously-correct reference
kernel and a JIT-compiled parallel kernel, plus per-level normalization,
grid resampling, and multi-scale aggregation.

Both kernels cast one vote per non-zero pixel per angle bin: the pixel's
center-relative position projected onto the bin-center direction picks the
distance bin receiving the pixel's intensity.  The reference kernel is
single-threaded and accumulates in row-major pixel order; the optimized
kernel partitions pixels into fixed row blocks whose partial accumulators
merge in block order, so its output is deterministic and differs from the
reference only by floating-point reassociation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit, prange
from scipy import ndimage

from .frontend import FeaturePyramid
from .geometry import HoughGridSpec, ImageGeometry

N_BLOCKS = 32  # fixed partial-accumulator count, independent of thread count


@dataclass(frozen=True)
class MultiScaleHough:
    """Per-level normalized accumulators plus their aggregate at the base grid."""

    per_level: tuple[np.ndarray, ...]
    aggregated: np.ndarray


def level_spec(base: HoughGridSpec, level: int) -> HoughGridSpec:
    """Grid resolution for a pyramid level: halves per level, floored at 2."""
    return HoughGridSpec(
        max(2, round(base.n_theta / 2 ** level)),
        max(2, round(base.n_r / 2 ** level)),
    )


def _theta_tables(spec: HoughGridSpec) -> tuple[np.ndarray, np.ndarray]:
    thetas = (np.arange(spec.n_theta) + 0.5) * np.pi / spec.n_theta
    return np.cos(thetas), np.sin(thetas)


def _check_vote_input(m: np.ndarray, geom: ImageGeometry) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D intensity map, got shape {m.shape}")
    if m.shape != (geom.height, geom.width):
        raise ValueError(f"map shape {m.shape} does not match geometry "
                         f"{geom.height}x{geom.width}")
    if m.size and m.min() < 0:
        raise ValueError("intensity map must be non-negative")
    return m


def vote_reference(m: np.ndarray, spec: HoughGridSpec, geom: ImageGeometry) -> np.ndarray:
    """Oracle kernel: vectorized only over pixels within each angle bin,
    accumulating with unbuffered in-order adds."""
    m = _check_vote_input(m, geom)
    acc = np.zeros(spec.shape)
    ys, xs = np.nonzero(m > 0)  # row-major pixel order
    if len(ys) == 0:
        return acc
    vals = m[ys, xs]
    cx, cy = geom.center
    xc = xs + 0.5 - cx
    yc = ys + 0.5 - cy
    big_r = geom.half_diagonal
    r_scale = spec.n_r / (2.0 * big_r)
    cos_t, sin_t = _theta_tables(spec)
    for i in range(spec.n_theta):
        r = xc * cos_t[i] + yc * sin_t[i]
        j = np.floor((r + big_r) * r_scale).astype(np.intp)
        np.clip(j, 0, spec.n_r - 1, out=j)
        np.add.at(acc[i], j, vals)
    return acc


@njit(parallel=True, cache=True)
def _vote_blocks(vals, xc, yc, cos_t, sin_t, r_offset, r_scale, n_r, n_blocks):
    n_theta = cos_t.shape[0]
    n = vals.shape[0]
    partials = np.zeros((n_blocks, n_theta, n_r))
    block = (n + n_blocks - 1) // n_blocks
    for b in prange(n_blocks):
        lo = b * block
        hi = min(lo + block, n)
        for p in range(lo, hi):
            v = vals[p]
            x = xc[p]
            y = yc[p]
            for i in range(n_theta):
                r = x * cos_t[i] + y * sin_t[i]
                j = int((r + r_offset) * r_scale)  # arg is >= 0, trunc == floor
                if j < 0:
                    j = 0
                elif j >= n_r:
                    j = n_r - 1
                partials[b, i, j] += v
    return partials


def vote_optimized(m: np.ndarray, spec: HoughGridSpec, geom: ImageGeometry) -> np.ndarray:
    """Parallel kernel; matches vote_reference within floating-point
    reassociation (<= 1e-4 relative per cell, typically ~1e-15)."""
    m = _check_vote_input(m, geom)
    ys, xs = np.nonzero(m > 0)
    if len(ys) == 0:
        return np.zeros(spec.shape)
    vals = m[ys, xs]
    cx, cy = geom.center
    xc = xs + 0.5 - cx
    yc = ys + 0.5 - cy
    big_r = geom.half_diagonal
    r_scale = spec.n_r / (2.0 * big_r)
    cos_t, sin_t = _theta_tables(spec)
    partials = _vote_blocks(vals, xc, yc, cos_t, sin_t, big_r, r_scale,
                            spec.n_r, N_BLOCKS)
    acc = np.zeros(spec.shape)
    for b in range(N_BLOCKS):  # fixed merge order
        acc += partials[b]
    return acc


VOTE_KERNELS: dict[str, Callable[[np.ndarray, HoughGridSpec, ImageGeometry], np.ndarray]] = {
    "reference": vote_reference,
    "optimized": vote_optimized,
}


def normalize(m: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant map maps to all zeros."""
    m = np.asarray(m, dtype=np.float64)
    lo = m.min()
    span = m.max() - lo
    if span <= 0:
        return np.zeros_like(m)
    return (m - lo) / span


def interpolate(m: np.ndarray, target: HoughGridSpec) -> np.ndarray:
    """Bilinear resample between grids, treating bin centers as the sample
    points and clamping beyond the outermost centers."""
    m = np.asarray(m, dtype=np.float64)
    src_t, src_r = m.shape
    if (src_t, src_r) == target.shape:
        return m.copy()
    ti = (np.arange(target.n_theta) + 0.5) / target.n_theta * src_t - 0.5
    ri = (np.arange(target.n_r) + 0.5) / target.n_r * src_r - 0.5
    grid = np.meshgrid(ti, ri, indexing="ij")
    return ndimage.map_coordinates(m, grid, order=1, mode="nearest")


def aggregate_pyramid(pyramid: FeaturePyramid, base_spec: HoughGridSpec,
                      geom: ImageGeometry, kernel: str = "optimized") -> MultiScaleHough:
    """Vote each pyramid level at its own grid resolution, normalize,
    resample everything to the base grid, and average."""
    vote = VOTE_KERNELS[kernel]
    if pyramid.base.shape != (geom.height, geom.width):
        raise ValueError("pyramid base does not match geometry")
    per_level = []
    resampled = []
    for k, level in enumerate(pyramid.levels):
        spec_k = level_spec(base_spec, k)
        geom_k = ImageGeometry(level.shape[1], level.shape[0])
        normed = normalize(vote(level, spec_k, geom_k))
        per_level.append(normed)
        resampled.append(interpolate(normed, base_spec))
    aggregated = normalize(sum(resampled) / len(resampled))
    return MultiScaleHough(tuple(per_level), aggregated)


@dataclass(frozen=True)
class BenchRecord:
    """Timing comparison of the two kernels on one input size."""

    width: int
    height: int
    spec: HoughGridSpec
    reference_s: float
    optimized_s: float
    max_rel_err: float

    @property
    def speedup(self) -> float:
        return self.reference_s / self.optimized_s if self.optimized_s > 0 else math.inf

    @property
    def equivalent(self) -> bool:
        return self.max_rel_err <= 1e-4


def max_relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Largest per-cell relative deviation of b from a (absolute where a is 0)."""
    err = np.abs(a - b)
    scale = np.abs(a)
    rel = np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), err)
    return float(rel.max()) if rel.size else 0.0


def benchmark_kernels(sizes: list[int], spec: HoughGridSpec, repeats: int = 5,
                      seed: int = 0) -> list[BenchRecord]:
    """Median-of-k wall time per kernel on dense seeded random maps, plus
    the per-cell equivalence check."""
    if repeats < 5:
        raise ValueError("repeats must be at least 5")
    rng = np.random.default_rng(seed)
    records = []
    for size in sizes:
        if size <= 0:
            raise ValueError(f"bench size must be positive, got {size}")
        m = rng.random((size, size))
        geom = ImageGeometry(size, size)
        vote_optimized(m, spec, geom)  # warm the JIT outside timing
        ref = opt = None
        times = {"reference": [], "optimized": []}
        for _ in range(repeats):
            t0 = time.perf_counter()
            ref = vote_reference(m, spec, geom)
            times["reference"].append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            opt = vote_optimized(m, spec, geom)
            times["optimized"].append(time.perf_counter() - t0)
        records.append(BenchRecord(
            width=size, height=size, spec=spec,
            reference_s=float(np.median(times["reference"])),
            optimized_s=float(np.median(times["optimized"])),
            max_rel_err=max_relative_error(ref, opt),
        ))
    return records
