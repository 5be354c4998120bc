"""Tiling enumeration and per-operator mapping search.

Every feasible tiling of an operator is scored in a single vectorized pass of
the cost estimator and the argmin is returned (`batch_search`).  The
`oracle_search` reference walks the same candidates strictly sequentially and
exists so the batched path can be checked for exact equivalence.  Results
aggregate from operators to subnets in `map_subnet`.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .accel import AcceleratorConfig, area
from .costmodel import (
    CostBreakdown,
    CostConstants,
    CostWeights,
    TILE_POW2_MAX,
    TilingPlan,
    _weighted,
    estimate_cost,
    evaluate_tilings,
    fits_caches_mask,
    hw_cost,
)
from .errors import NoFeasibleTiling
from .workload import OperatorDescriptor, SubnetDescriptor


@dataclass(frozen=True)
class TilingSearchResult:
    best: TilingPlan
    cost: CostBreakdown
    n_candidates: int
    n_feasible: int
    wall_time_s: float


@dataclass(frozen=True)
class SubnetMapping:
    per_op: tuple[TilingSearchResult, ...]
    total: CostBreakdown
    wall_time_s: float


def tile_size_choices(dim: int) -> tuple[int, ...]:
    """Powers of two from 1 up to the smallest power covering `dim`, capped at 2^10."""
    sizes = []
    for i in range(TILE_POW2_MAX + 1):
        size = 2**i
        sizes.append(size)
        if size >= dim:
            break
    return tuple(sizes)


def _candidate_arrays(op: OperatorDescriptor):
    """All raw tile-size candidates, lexicographic ascending on (t_oc, t_ic, t_oh, t_ow)."""
    oc = tile_size_choices(op.out_channels)
    ic = tile_size_choices(op.in_channels)
    oh = tile_size_choices(op.out_rows)
    ow = tile_size_choices(op.out_rows)
    grids = np.meshgrid(
        np.asarray(oc, dtype=np.int64),
        np.asarray(ic, dtype=np.int64),
        np.asarray(oh, dtype=np.int64),
        np.asarray(ow, dtype=np.int64),
        indexing="ij",
    )
    t_oc, t_ic, t_oh, t_ow = (g.ravel() for g in grids)
    return t_oc, t_ic, t_ow, t_oh, len(oc) * len(ic) * len(oh) * len(ow)


def enumerate_tilings(op: OperatorDescriptor, cfg: AcceleratorConfig) -> list[TilingPlan]:
    """Feasible tilings in deterministic (t_oc, t_ic, t_oh, t_ow) ascending order."""
    t_oc, t_ic, t_ow, t_oh, _ = _candidate_arrays(op)
    mask = fits_caches_mask(op, cfg, t_oc, t_ic, t_ow, t_oh)
    return [
        TilingPlan(int(a), int(b), int(c), int(d))
        for a, b, c, d in zip(t_oc[mask], t_ic[mask], t_ow[mask], t_oh[mask])
    ]


def _tiling_weights(weights: CostWeights | None) -> CostWeights:
    # Area does not depend on the tiling; zero it so constant offsets cannot
    # perturb ties between candidates.
    w = weights or CostWeights()
    return CostWeights(w.lambda_e, w.lambda_l, 0.0)


def batch_search(
    op: OperatorDescriptor,
    cfg: AcceleratorConfig,
    constants: CostConstants | None = None,
    weights: CostWeights | None = None,
) -> TilingSearchResult:
    """Cost-optimal tiling by one batched pass over every feasible candidate.

    Ties break toward the earliest candidate in enumeration order, so the
    result is independent of evaluation parallelism.
    """
    t0 = time.perf_counter()
    constants = constants or CostConstants()
    w = _tiling_weights(weights)
    t_oc, t_ic, t_ow, t_oh, n_candidates = _candidate_arrays(op)
    mask = fits_caches_mask(op, cfg, t_oc, t_ic, t_ow, t_oh)
    n_feasible = int(mask.sum())
    if n_feasible == 0:
        raise NoFeasibleTiling(
            f"no tiling of operator {op} fits caches "
            f"({cfg.act_cache_kb}/{cfg.wgt_cache_kb}/{cfg.out_cache_kb} KB)"
        )
    t_oc, t_ic, t_ow, t_oh = t_oc[mask], t_ic[mask], t_ow[mask], t_oh[mask]
    out = evaluate_tilings(op, cfg, t_oc, t_ic, t_ow, t_oh, constants=constants)
    costs = _weighted(out["energy_mj"], out["latency_ms"], area(cfg, constants.area), w)
    idx = int(np.argmin(costs))
    best = TilingPlan(int(t_oc[idx]), int(t_ic[idx]), int(t_ow[idx]), int(t_oh[idx]))
    breakdown = estimate_cost(op, cfg, best, constants)
    return TilingSearchResult(
        best=best,
        cost=breakdown,
        n_candidates=n_candidates,
        n_feasible=n_feasible,
        wall_time_s=time.perf_counter() - t0,
    )


def oracle_search(
    op: OperatorDescriptor,
    cfg: AcceleratorConfig,
    constants: CostConstants | None = None,
    weights: CostWeights | None = None,
) -> TilingSearchResult:
    """Reference implementation: same contract as `batch_search`, strictly
    sequential, no batching, no pruning."""
    t0 = time.perf_counter()
    constants = constants or CostConstants()
    w = _tiling_weights(weights)
    _, _, _, _, n_candidates = _candidate_arrays(op)
    plans = enumerate_tilings(op, cfg)
    if not plans:
        raise NoFeasibleTiling(
            f"no tiling of operator {op} fits caches "
            f"({cfg.act_cache_kb}/{cfg.wgt_cache_kb}/{cfg.out_cache_kb} KB)"
        )
    best_plan = None
    best_breakdown = None
    best_cost = None
    for plan in plans:
        breakdown = estimate_cost(op, cfg, plan, constants)
        cost = hw_cost(breakdown, w)
        if best_cost is None or cost < best_cost:
            best_plan, best_breakdown, best_cost = plan, breakdown, cost
    return TilingSearchResult(
        best=best_plan,
        cost=best_breakdown,
        n_candidates=n_candidates,
        n_feasible=len(plans),
        wall_time_s=time.perf_counter() - t0,
    )


def map_subnet(
    subnet: SubnetDescriptor,
    cfg: AcceleratorConfig,
    constants: CostConstants | None = None,
    weights: CostWeights | None = None,
    threads: int = 1,
) -> SubnetMapping:
    """Best tiling per operator plus the subnet-level aggregate.

    Operators execute sequentially at batch 1, so energies and latencies add;
    area is counted once.  With `threads > 1` the per-operator searches run in
    a thread pool; results are reduced in operator order, so the outcome is
    identical at any thread count.
    """
    t0 = time.perf_counter()
    constants = constants or CostConstants()

    def search_one(index_op):
        index, op = index_op
        try:
            return batch_search(op, cfg, constants, weights)
        except NoFeasibleTiling as exc:
            raise NoFeasibleTiling(f"operator {index}: {exc}", op_index=index) from exc

    items = list(enumerate(subnet))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = tuple(pool.map(search_one, items))
    else:
        results = tuple(search_one(item) for item in items)

    energy = 0.0
    latency = 0.0
    cycles = 0
    dram = 0.0
    for r in results:
        energy += r.cost.energy_mj
        latency += r.cost.latency_ms
        cycles += r.cost.cycles
        dram += r.cost.dram_bytes
    total = CostBreakdown(
        energy_mj=energy,
        latency_ms=latency,
        cycles=cycles,
        dram_bytes=dram,
        area_mm2=area(cfg, constants.area),
    )
    return SubnetMapping(per_op=results, total=total, wall_time_s=time.perf_counter() - t0)
