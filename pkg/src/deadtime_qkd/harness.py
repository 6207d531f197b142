"""Trial orchestration, estimators, parameter sweeps and result tables.

A :class:`TrialConfig` fully determines one Monte Carlo run; equal configs
(including seed) give bit-identical :class:`TrialStats` and output files.
Occupancy-style probabilities (basis availabilities, sifted rates) are
estimated over all post-burn-in slots and their standard errors come from
batch means over contiguous slot blocks, which stays honest under the strong
autocorrelation that dead time introduces.  Plain Bernoulli proportions
(error rate per sifted bit) carry the usual binomial standard error
``sqrt(p (1 - p) / n)``.

Sweeps assign every (grid point, algorithm, repeat) its own independent
random stream, so points can be computed in any order -- or concurrently --
without changing any result.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

from . import analytic
from .core import ParameterError, RandomStream, SystemParams
from .engine import DEFAULT_CHUNK_SLOTS, stream_trace
from .parties import EveStrategy, FixedStateResend, InterceptResend, Passive
from .sifting import (ACTIVE, DEACTIVATE, PASSIVE, AllActiveScanner,
                      DeactivateScanner, FourStateScanner, NaiveScanner,
                      RogersChains, RogersScanner, SiftedBits, TrialTrace)

__all__ = [
    "ALGORITHMS",
    "SweepSpec",
    "TrialConfig",
    "TrialResult",
    "TrialStats",
    "emit_results",
    "run_sweep",
    "run_trial",
    "sweep_rows",
]

ALGORITHMS = ("rogers", "all_active", "deactivate", "4state", "naive")

_BENCH_FOR = {
    "rogers": PASSIVE,
    "all_active": PASSIVE,
    "naive": PASSIVE,
    "deactivate": DEACTIVATE,
    "4state": ACTIVE,
}

#: slots per block for batch-means error estimation
BLOCK_SLOTS = 4096
#: target number of batches
N_BATCHES = 64


@dataclass(frozen=True)
class TrialConfig:
    """Everything needed to reproduce one trial."""

    params: SystemParams
    seed: int
    eve: EveStrategy = field(default_factory=Passive)
    algorithm: str = "rogers"
    bench: str | None = None
    n_slots: int = 1_000_000
    burn_in: int | None = None
    stream_id: int = 0
    chunk_slots: int = DEFAULT_CHUNK_SLOTS
    keep_trace: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(
                f"algorithm={self.algorithm!r} must be one of {ALGORITHMS}")
        if self.bench is not None and self.bench != _BENCH_FOR[self.algorithm]:
            raise ParameterError(
                f"bench={self.bench!r} is inconsistent with "
                f"algorithm={self.algorithm!r} (needs {_BENCH_FOR[self.algorithm]!r})")
        if self.n_slots < 1:
            raise ParameterError(f"n_slots={self.n_slots!r} must be >= 1")
        if self.effective_burn_in >= self.n_slots:
            raise ParameterError(
                f"burn_in={self.effective_burn_in} leaves no slots to estimate "
                f"from (n_slots={self.n_slots}); set burn_in explicitly")

    @property
    def effective_bench(self) -> str:
        return _BENCH_FOR[self.algorithm]

    @property
    def effective_burn_in(self) -> int:
        if self.burn_in is not None:
            if self.burn_in < 0:
                raise ParameterError(f"burn_in={self.burn_in!r} must be >= 0")
            return self.burn_in
        return 10 * self.params.dead_gap_slots

    def stream(self) -> RandomStream:
        return RandomStream(self.seed, self.stream_id)


@dataclass(frozen=True)
class TrialStats:
    """Estimates from one trial, burn-in excluded.

    On the four-detector benches ``p00_basis1`` / ``p00_basis2`` are the
    fractions of expected arrival times at which both detectors of that basis
    were active; on the two-detector bench they are the per-detector active
    fractions.  ``close_pair_*`` and the chain fields are populated only by
    the naive and chain-sifting algorithms, respectively.
    """

    algorithm: str
    bench: str
    n_slots: int
    burn_in: int
    k: float
    rho: float
    eta: float
    arrivals: int
    clicks_per_detector: tuple[int, ...]
    min_interclick_gap: tuple[int | None, ...]
    p00_basis1: float
    p00_basis1_se: float | None
    p00_basis2: float
    p00_basis2_se: float | None
    p_all_active: float
    p_all_active_se: float | None
    sifted_count: int
    sifted_rate: float
    sifted_rate_se: float | None
    qber: float | None
    qber_se: float | None
    same_basis_close_pairs: int | None = None
    close_pair_flip_prob: float | None = None
    lag1_same_basis_correlation: float | None = None
    chains_accepted: int | None = None
    chains_rejected: int | None = None
    chain_length_histogram: dict[int, int] | None = None
    chain_sifted_histogram: dict[int, int] | None = None

    @property
    def effective_slots(self) -> int:
        return self.n_slots - self.burn_in

    @property
    def duration_seconds(self) -> float:
        return self.effective_slots / self.rho

    def as_row(self) -> dict[str, Any]:
        """Flat scalar view for CSV output (histograms omitted)."""
        skip = {"chain_length_histogram", "chain_sifted_histogram",
                "clicks_per_detector", "min_interclick_gap"}
        row: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            if f.name in skip:
                continue
            row[f.name] = getattr(self, f.name)
        row["effective_slots"] = self.effective_slots
        row["total_clicks"] = int(sum(self.clicks_per_detector))
        return row


@dataclass(frozen=True)
class TrialResult:
    """Stats plus the optional full trace and chain summary."""

    stats: TrialStats
    sifted: SiftedBits
    trace: TrialTrace | None = None
    chains: RogersChains | None = None


def _batch_se(block_sums: np.ndarray, block_counts: np.ndarray,
              per_second: float | None = None) -> tuple[float, float | None]:
    """Overall mean and batch-means standard error from block sums.

    With ``per_second`` set, blocks are interpreted as event counts over
    ``block_counts`` slots and the result is a rate in events per second
    (``per_second`` = slots per second).
    """
    sel = block_counts > 0
    sums = block_sums[sel]
    counts = block_counts[sel]
    total = float(sums.sum()) / float(counts.sum())
    scale = 1.0 if per_second is None else per_second
    nb = sums.shape[0]
    n_batches = min(N_BATCHES, nb)
    if n_batches < 2:
        return total * scale, None
    means = np.array([s.sum() / c.sum() for s, c in
                      zip(np.array_split(sums, n_batches),
                          np.array_split(counts, n_batches))])
    se = float(np.std(means, ddof=1) / math.sqrt(n_batches))
    return total * scale, se * scale


class _Accumulator:
    """Streaming per-block sums of availability, clicks, and arrivals."""

    def __init__(self, cfg: TrialConfig, n_detectors: int):
        self.cfg = cfg
        self.burn_in = cfg.effective_burn_in
        self.n_det = n_detectors
        n_blocks = (cfg.n_slots - 1) // BLOCK_SLOTS + 1
        self.block_counts = np.zeros(n_blocks, dtype=np.int64)
        self.avail_1 = np.zeros(n_blocks, dtype=np.int64)
        self.avail_2 = np.zeros(n_blocks, dtype=np.int64)
        self.avail_all = np.zeros(n_blocks, dtype=np.int64)
        self.arrivals = 0
        self.clicks = [0] * n_detectors
        self.min_gap: list[int | None] = [None] * n_detectors
        self._last_fire: list[int | None] = [None] * n_detectors

    def _block_add(self, target: np.ndarray, values: np.ndarray, a: int) -> None:
        # chunk starts are multiples of chunk_slots; blocks only align when
        # that is a multiple of BLOCK_SLOTS, so handle the ragged head/tail
        first_block = a // BLOCK_SLOTS
        head = min((-a) % BLOCK_SLOTS, values.shape[0])
        if head:
            target[first_block] += int(values[:head].sum())
            first_block += 1
        body = values[head:]
        n_full = body.shape[0] // BLOCK_SLOTS
        if n_full:
            full = body[:n_full * BLOCK_SLOTS].reshape(n_full, BLOCK_SLOTS)
            target[first_block:first_block + n_full] += full.sum(axis=1)
        tail = body[n_full * BLOCK_SLOTS:]
        if tail.shape[0]:
            target[first_block + n_full] += int(tail.sum())

    def add(self, trace: TrialTrace) -> None:
        a, n = trace.start, trace.n_slots
        sv = max(self.burn_in - a, 0)
        if sv < n:
            mask = trace.active_mask
            if trace.bench == ACTIVE:
                s1 = mask[:, 0]
                s2 = mask[:, 1]
                sall = s1 & s2
            else:
                s1 = mask[:, 0] & mask[:, 1]
                s2 = mask[:, 2] & mask[:, 3]
                sall = mask.all(axis=1)
            start_abs = a + sv
            self._block_add(self.avail_1, s1[sv:], start_abs)
            self._block_add(self.avail_2, s2[sv:], start_abs)
            self._block_add(self.avail_all, sall[sv:], start_abs)
            self._block_add(self.block_counts,
                            np.ones(n - sv, dtype=np.int8), start_abs)
            self.arrivals += int(np.count_nonzero(trace.arrived[sv:]))
        # click bookkeeping uses the whole trace: the gap invariant holds
        # from slot 0, burn-in only concerns estimation
        clicked = trace.clicked
        for d in range(self.n_det):
            idx = np.nonzero(clicked == d)[0]
            if idx.shape[0] == 0:
                continue
            slots = a + idx.astype(np.int64)
            self.clicks[d] += int(idx.shape[0])
            if self._last_fire[d] is not None:
                slots = np.concatenate(([self._last_fire[d]], slots))
            if slots.shape[0] >= 2:
                gap = int(np.min(np.diff(slots)))
                if self.min_gap[d] is None or gap < self.min_gap[d]:
                    self.min_gap[d] = gap
            self._last_fire[d] = int(slots[-1])


def _make_scanner(cfg: TrialConfig):
    algorithm = cfg.algorithm
    if algorithm == "rogers":
        return RogersScanner(record_chains=True)
    if algorithm == "all_active":
        return AllActiveScanner()
    if algorithm == "deactivate":
        return DeactivateScanner()
    if algorithm == "4state":
        return FourStateScanner()
    return NaiveScanner(min_slot=cfg.effective_burn_in)


def run_trial(cfg: TrialConfig) -> TrialResult:
    """Execute one trial: slot loop, sifting, estimation."""
    bench = cfg.effective_bench
    n_det = 2 if bench == ACTIVE else 4
    acc = _Accumulator(cfg, n_det)
    scanner = _make_scanner(cfg)
    kept: list[TrialTrace] = []
    for chunk in stream_trace(cfg.params, cfg.eve, bench, cfg.n_slots,
                              cfg.stream(), cfg.chunk_slots):
        acc.add(chunk)
        scanner.feed(chunk)
        if cfg.keep_trace:
            kept.append(chunk)

    chains: RogersChains | None = None
    if cfg.algorithm == "rogers":
        bits, chains = scanner.finish()
    else:
        bits = scanner.finish()

    burn_in = cfg.effective_burn_in
    counted = bits.slot >= burn_in
    sifted_count = int(np.count_nonzero(counted))
    errors = int(np.count_nonzero(
        (bits.alice_bit != bits.bob_bit) & counted))

    n_blocks = acc.block_counts.shape[0]
    bit_blocks = np.bincount((bits.slot[counted] // BLOCK_SLOTS).astype(np.int64),
                             minlength=n_blocks).astype(np.int64)

    p1, p1_se = _batch_se(acc.avail_1, acc.block_counts)
    p2, p2_se = _batch_se(acc.avail_2, acc.block_counts)
    pall, pall_se = _batch_se(acc.avail_all, acc.block_counts)
    rate, rate_se = _batch_se(bit_blocks, acc.block_counts,
                              per_second=cfg.params.rho)

    if sifted_count > 0:
        qber = errors / sifted_count
        qber_se = math.sqrt(qber * (1.0 - qber) / sifted_count)
    else:
        qber = None
        qber_se = None

    stats_kwargs: dict[str, Any] = {}
    if isinstance(scanner, NaiveScanner):
        stats_kwargs.update(
            same_basis_close_pairs=scanner.close_pairs,
            close_pair_flip_prob=scanner.close_pair_flip_prob,
            lag1_same_basis_correlation=scanner.lag1_correlation,
        )
    if chains is not None:
        counted_chains = chains.start >= burn_in
        accepted = chains.accepted & counted_chains
        stats_kwargs.update(
            chains_accepted=int(np.count_nonzero(accepted)),
            chains_rejected=int(np.count_nonzero(~chains.accepted & counted_chains)),
            chain_length_histogram=chains.length_histogram(burn_in),
            chain_sifted_histogram=chains.sifted_histogram(burn_in),
        )

    stats = TrialStats(
        algorithm=cfg.algorithm,
        bench=bench,
        n_slots=cfg.n_slots,
        burn_in=burn_in,
        k=cfg.params.k,
        rho=cfg.params.rho,
        eta=cfg.params.eta,
        arrivals=acc.arrivals,
        clicks_per_detector=tuple(acc.clicks),
        min_interclick_gap=tuple(acc.min_gap),
        p00_basis1=p1, p00_basis1_se=p1_se,
        p00_basis2=p2, p00_basis2_se=p2_se,
        p_all_active=pall, p_all_active_se=pall_se,
        sifted_count=sifted_count,
        sifted_rate=rate, sifted_rate_se=rate_se,
        qber=qber, qber_se=qber_se,
        **stats_kwargs,
    )
    trace = TrialTrace.concat(kept) if cfg.keep_trace else None
    return TrialResult(stats=stats, sifted=bits, trace=trace, chains=chains)


# ---------------------------------------------------------------------------
# theory overlays
# ---------------------------------------------------------------------------

def _is_full_fixed_v(eve: EveStrategy) -> bool:
    return (isinstance(eve, FixedStateResend) and eve.fraction == 1.0
            and int(eve.state.basis) == 1 and eve.state.bit == 0)


def theory_columns(params: SystemParams, eve: EveStrategy) -> dict[str, float | None]:
    """Closed-form overlay values where they exist for these parameters.

    Availability formulas are attached for the full fixed-V attack (distinct
    per basis) and for a passive eavesdropper (both bases follow the
    two-detector pair formula).  Rates are attached for the deactivating and
    two-detector benches.  Values are None wherever no exact expression
    applies (non-integer k above 1, or no closed form at all).
    """
    out: dict[str, float | None] = {
        "theory_p00_basis1": None,
        "theory_p00_basis2": None,
        "theory_rate_deactivate": None,
        "theory_rate_4state": None,
    }
    k, eta = params.k, params.eta

    def _try(fn, *args):
        try:
            return fn(*args)
        except analytic.AnalyticValidityError:
            return None

    if _is_full_fixed_v(eve):
        out["theory_p00_basis1"] = _try(analytic.p00_basis1, k, eta)
        out["theory_p00_basis2"] = _try(analytic.p00_basis2_from_eta, k, eta)
    elif isinstance(eve, Passive):
        pair = _try(analytic.p00_basis2_from_eta, k, eta)
        out["theory_p00_basis1"] = pair
        out["theory_p00_basis2"] = pair
    out["theory_rate_deactivate"] = _try(analytic.rate_deactivate, params)
    out["theory_rate_4state"] = _try(analytic.rate_4state, params)
    return out


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_VARIABLES = ("k", "rho", "length_km")


@dataclass(frozen=True)
class SweepSpec:
    """A one-dimensional parameter sweep over independent trials."""

    variable: str
    grid: tuple[float, ...]
    base: TrialConfig
    algorithms: tuple[str, ...] | None = None
    trials_per_point: int = 1

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ParameterError(
                f"variable={self.variable!r} must be one of {SWEEP_VARIABLES}")
        if len(self.grid) == 0:
            raise ParameterError("grid must be non-empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ParameterError("grid values must be strictly increasing")
        if self.trials_per_point < 1:
            raise ParameterError(
                f"trials_per_point={self.trials_per_point!r} must be >= 1")
        if (self.variable == "length_km"
                and self.base.params.channel_loss_db is not None):
            raise ParameterError(
                "cannot sweep length_km while channel_loss_db overrides the loss")
        for algo in self.algorithms or ():
            if algo not in ALGORITHMS:
                raise ParameterError(f"unknown algorithm {algo!r}")

    @property
    def effective_algorithms(self) -> tuple[str, ...]:
        return self.algorithms or (self.base.algorithm,)

    def params_at(self, value: float) -> SystemParams:
        p = self.base.params
        if self.variable == "k":
            return replace(p, rho=value / p.tau)
        if self.variable == "rho":
            return replace(p, rho=value)
        return replace(p, length_km=value)

    def point_config(self, index: int, algorithm: str, trial: int) -> TrialConfig:
        """Config for one (grid point, algorithm, repeat) cell.

        Stream ids are derived from the cell's position in the (sorted) grid,
        so results do not depend on execution order.
        """
        algos = self.effective_algorithms
        stream_id = ((index * len(algos) + algos.index(algorithm))
                     * self.trials_per_point + trial)
        return replace(self.base, params=self.params_at(self.grid[index]),
                       algorithm=algorithm, bench=None, stream_id=stream_id)


def _combine_trials(stats: list[TrialStats]) -> dict[str, Any]:
    """Mean estimates and combined errors over independent repeats."""
    n = len(stats)

    def mean(attr):
        return float(np.mean([getattr(s, attr) for s in stats]))

    def mean_opt(attr):
        vals = [getattr(s, attr) for s in stats]
        if any(v is None for v in vals):
            return None
        return float(np.mean(vals))

    def comb_se(attr):
        ses = [getattr(s, attr) for s in stats]
        if any(s is None for s in ses):
            return None
        return float(math.sqrt(sum(s * s for s in ses)) / n)

    return {
        "sifted_count": int(sum(s.sifted_count for s in stats)),
        "sifted_rate": mean("sifted_rate"),
        "sifted_rate_se": comb_se("sifted_rate_se"),
        "p00_basis1": mean("p00_basis1"),
        "p00_basis1_se": comb_se("p00_basis1_se"),
        "p00_basis2": mean("p00_basis2"),
        "p00_basis2_se": comb_se("p00_basis2_se"),
        "p_all_active": mean("p_all_active"),
        "p_all_active_se": comb_se("p_all_active_se"),
        "qber": mean_opt("qber"),
        "qber_se": comb_se("qber_se"),
    }


def sweep_rows(spec: SweepSpec) -> list[dict[str, Any]]:
    """Run the sweep and return one flat row per grid point."""
    rows = []
    for i, value in enumerate(spec.grid):
        params = spec.params_at(value)
        row: dict[str, Any] = {
            spec.variable: value,
            "k": params.k,
            "rho": params.rho,
            "eta": params.eta,
        }
        for algo in spec.effective_algorithms:
            results = [run_trial(spec.point_config(i, algo, t))
                       for t in range(spec.trials_per_point)]
            agg = _combine_trials([r.stats for r in results])
            for key, val in agg.items():
                row[f"{algo}_{key}"] = val
        row.update(theory_columns(params, spec.base.eve))
        rows.append(row)
    return rows


def run_sweep(spec: SweepSpec) -> list[dict[str, Any]]:
    """Alias of :func:`sweep_rows`; the table is the sweep's product."""
    return sweep_rows(spec)


def add_z_scores(rows: list[dict[str, Any]],
                 algorithms: Sequence[str]) -> list[dict[str, Any]]:
    """Attach (sim - theory) / se columns where both sides exist."""
    pairs = []
    for algo in algorithms:
        if algo == "deactivate":
            pairs.append((f"{algo}_sifted_rate", "theory_rate_deactivate"))
        if algo == "4state":
            pairs.append((f"{algo}_sifted_rate", "theory_rate_4state"))
        pairs.append((f"{algo}_p00_basis1", "theory_p00_basis1"))
        pairs.append((f"{algo}_p00_basis2", "theory_p00_basis2"))
    out = []
    for row in rows:
        row = dict(row)
        for sim_key, th_key in pairs:
            sim = row.get(sim_key)
            theory = row.get(th_key)
            se = row.get(sim_key + "_se")
            z_key = "z_" + sim_key
            if sim is None or theory is None or not se:
                row[z_key] = None
            else:
                row[z_key] = (sim - theory) / se
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------

def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {"type": type(value).__name__,
                **{k: _jsonable(v) for k, v in dataclasses.asdict(value).items()}}
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def emit_results(rows: Iterable[dict[str, Any]], path: str,
                 manifest: dict[str, Any] | None = None,
                 columns: Sequence[str] | None = None) -> tuple[str, str]:
    """Write a CSV table plus a JSON manifest of the run next to it.

    The column set comes from ``columns`` or the first row; an empty table
    with explicit ``columns`` yields a header-only CSV.  Output is fully
    deterministic: no timestamps, stable key order, full-precision floats.
    Returns (csv path, manifest path).
    """
    rows = list(rows)
    if columns is None:
        if not rows:
            raise ParameterError("empty table needs an explicit column list")
        columns = list(rows[0].keys())
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(c)) for c in columns])
    except OSError as exc:
        raise OSError(f"could not write results to {path}: {exc}") from exc

    stem, _ = os.path.splitext(path)
    manifest_path = stem + ".manifest.json"
    payload = {"columns": list(columns), "n_rows": len(rows)}
    if manifest:
        payload.update({k: _jsonable(v) for k, v in manifest.items()})
    try:
        with open(manifest_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"could not write manifest to {manifest_path}: {exc}") from exc
    return path, manifest_path
