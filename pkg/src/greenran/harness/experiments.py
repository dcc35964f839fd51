"""Seeded experiment runners and their on-disk artifacts.

Every artifact is a pure function of the resolved config and the seed, so
re-running an experiment reproduces the files byte for byte.  Floats are
written with ``repr`` (shortest round-trip form) so re-aggregating a CSV
gives back exactly the numbers in the summary.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .. import __version__
from .. import beam_tracker as bt
from .. import carrier_switch as cs
from .. import network_env as ne
from .. import radio_env as re_
from ..errors import ParseError
from .config import BeamExperiment, CarrierExperiment, resolved

RNG_NAME = "numpy.random.PCG64 seeded via numpy.random.SeedSequence"

DECISION_COLUMNS = ("slot", "measured_count", "overhead_ratio", "predicted_az", "predicted_el",
                    "predicted_rsrp_dbm", "true_best_az", "true_best_el", "rsrp_error_db")
PERIOD_COLUMNS = ("period", "demand", "active_count", "sector_load", "max_carrier_load",
                  "served", "dropped", "congested", "power_w")
SWITCH_COLUMNS = ("period", "load", "rho_min", "rho_max", "active_carrier_count", "qos_satisfied", "action")
TRACE_COLUMNS = ("load", "rho_used", "satisfied")


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _median(values: Sequence[float]) -> float:
    return float(np.median(values)) if len(values) else math.nan


def _p95(values: Sequence[float]) -> float:
    return float(np.percentile(values, 95)) if len(values) else math.nan


# -- beam tracking -----------------------------------------------------------

@dataclass
class BeamRun:
    seed: int
    rows: list[tuple]
    summary: dict[str, Any]


def beam_metrics(errors: Sequence[float], overheads: Sequence[float], coldstart_slots: int,
                 threshold_db: float) -> dict[str, Any]:
    """Summary metrics from per-slot RSRP errors and overhead ratios."""
    steady = list(errors[coldstart_slots:])
    reached = [i for i, e in enumerate(errors) if e <= threshold_db]
    return {
        "median_rsrp_error_db": _median(steady),
        "p95_rsrp_error_db": _p95(steady),
        "mean_rsrp_error_db": float(np.mean(steady)),
        "overhead_ratio": float(np.mean(overheads)),
        "overhead_ratio_excluding_coldstart": float(np.mean(overheads[coldstart_slots:])),
        "coldstart_slots_to_3db": (reached[0] + 1) if reached else None,
        "slots": len(errors),
        "steady_state_slots": len(steady),
    }


def run_beam_seed(cfg: BeamExperiment, seed: int) -> BeamRun:
    scenario = cfg.scenario_for(seed)
    tracker_cfg = cfg.tracker_config()
    rng = re_.measurement_rng(scenario)

    def measure(point):
        return re_.measure(scenario, (point.az, point.el), point.slot, rng)

    decisions = bt.run_tracker(tracker_cfg, scenario.horizon_slots, measure)
    rows = []
    for d in decisions:
        (best_az, best_el), best = re_.best_beam_oracle(scenario, d.slot)
        achieved = re_.rsrp_true(scenario, d.predicted_beam, d.slot)
        rows.append((d.slot, len(d.measured), d.overhead_ratio, d.predicted_beam[0], d.predicted_beam[1],
                     d.predicted_rsrp, best_az, best_el, best - achieved))
    summary = beam_metrics([r[8] for r in rows], [r[2] for r in rows],
                           cfg.tracker.coldstart_slots, cfg.tracker.coldstart_threshold_db)
    summary["seed"] = seed
    return BeamRun(seed, rows, summary)


def aggregate_beam(cfg: BeamExperiment, runs: Sequence[BeamRun]) -> dict[str, Any]:
    cold = cfg.tracker.coldstart_slots
    errors = [r[8] for run in runs for r in run.rows[cold:]]
    overheads = [r[2] for run in runs for r in run.rows]
    overheads_steady = [r[2] for run in runs for r in run.rows[cold:]]
    to_3db = [run.summary["coldstart_slots_to_3db"] for run in runs]
    return {
        "median_rsrp_error_db": _median(errors),
        "p95_rsrp_error_db": _p95(errors),
        "mean_rsrp_error_db": float(np.mean(errors)),
        "overhead_ratio": float(np.mean(overheads)),
        "overhead_ratio_excluding_coldstart": float(np.mean(overheads_steady)),
        "coldstart_slots_to_3db": _median([math.inf if v is None else v for v in to_3db]),
        "coldstart_slots_to_3db_per_seed": to_3db,
        "baseline_overhead_ratio": 1.0,
    }


# -- carrier switch-off ------------------------------------------------------

@dataclass
class CarrierRun:
    seed: int
    policy: list[ne.PeriodResult]
    baseline: list[ne.PeriodResult]
    final_belief: cs.ThresholdBelief
    summary: dict[str, Any]


def read_trace(path: str | Path) -> list[cs.QosObservation]:
    """Historical ``load,rho_used,satisfied`` rows. Row numbers count data rows from 1."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return []
    if [h.strip() for h in header] != list(TRACE_COLUMNS):
        raise ParseError(0, f"expected header {','.join(TRACE_COLUMNS)}, got {','.join(header)}")
    out = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(row_no, f"expected 3 fields, got {len(row)}")
        try:
            load = float(row[0])
            rho = float(row[1])
        except ValueError:
            raise ParseError(row_no, f"non-numeric load or rho_used: {row}") from None
        flag = row[2].strip().lower()
        if flag in ("1", "true"):
            sat = True
        elif flag in ("0", "false"):
            sat = False
        else:
            raise ParseError(row_no, f"satisfied must be 0/1/true/false, got {row[2]!r}")
        if not (0 <= load <= 1 and 0 <= rho <= 1):
            raise ParseError(row_no, "load and rho_used must lie in [0, 1]")
        out.append(cs.QosObservation(rho, sat))
    return out


def warm_start_belief(cfg: CarrierExperiment, trace_path: str | Path | None) -> cs.ThresholdBelief:
    belief = cfg.prior()
    if trace_path is None:
        return belief
    return cs.warm_start(belief, read_trace(trace_path))


def carrier_metrics(env: ne.SectorEnv, policy: Sequence[ne.PeriodResult],
                    baseline: Sequence[ne.PeriodResult]) -> dict[str, Any]:
    n_total = len(env.carriers)
    energy = ne.energy_summary(
        [r.power_w for r in policy], [r.power_w for r in baseline], ne.PERIOD_HOURS,
        [n_total - r.kpi.active_count for r in policy], env.n_unlocked,
    )
    cong = float(np.mean([r.kpi.congested for r in policy]))
    base_cong = float(np.mean([r.kpi.congested for r in baseline]))
    dropped = math.fsum(r.kpi.dropped for r in policy)
    base_dropped = math.fsum(r.kpi.dropped for r in baseline)
    return {
        "kwh": energy.kwh,
        "baseline_kwh": energy.baseline_kwh,
        "saving_fraction": energy.saving_fraction,
        "off_time_fraction": energy.off_time_fraction,
        "congestion_rate": cong,
        "baseline_congestion_rate": base_cong,
        "congestion_rate_delta": cong - base_cong,
        "dropped_traffic": dropped,
        "baseline_dropped_traffic": base_dropped,
        "dropped_traffic_delta": dropped - base_dropped,
        "qos_satisfied_rate": float(np.mean([r.satisfied for r in policy])),
        "final_rho_min": policy[-1].rho_min if policy else None,
    }


def run_carrier_seed(cfg: CarrierExperiment, seed: int, prior: cs.ThresholdBelief | None = None) -> CarrierRun:
    env = cfg.env_for(seed)
    policy_cfg = cfg.policy_config()
    prior = prior if prior is not None else warm_start_belief(cfg, cfg.policy.warm_start_trace)
    policy, state = ne.simulate(env, policy_cfg, cfg.n_periods, prior)
    baseline, _ = ne.simulate(env, ne.all_on_policy(policy_cfg), cfg.n_periods, prior)
    summary = carrier_metrics(env, policy, baseline)
    summary["seed"] = seed
    return CarrierRun(seed, policy, baseline, state.belief, summary)


def aggregate_carrier(cfg: CarrierExperiment, runs: Sequence[CarrierRun]) -> dict[str, Any]:
    kwh = math.fsum(r.summary["kwh"] for r in runs)
    base = math.fsum(r.summary["baseline_kwh"] for r in runs)
    n = len(runs)
    mean = lambda key: math.fsum(r.summary[key] for r in runs) / n  # noqa: E731
    return {
        "kwh": kwh,
        "baseline_kwh": base,
        "saving_fraction": 1.0 - kwh / base if base > 0 else 0.0,
        "off_time_fraction": mean("off_time_fraction"),
        "congestion_rate": mean("congestion_rate"),
        "baseline_congestion_rate": mean("baseline_congestion_rate"),
        "congestion_rate_delta": mean("congestion_rate_delta"),
        "dropped_traffic_delta": math.fsum(r.summary["dropped_traffic_delta"] for r in runs),
        "final_rho_min": [r.summary["final_rho_min"] for r in runs],
    }


def period_rows(results: Sequence[ne.PeriodResult]) -> list[tuple]:
    return [(r.kpi.period, r.kpi.demand, r.kpi.active_count, r.kpi.sector_load, r.kpi.max_carrier_load,
             r.kpi.served, r.kpi.dropped, r.kpi.congested, r.power_w) for r in results]


def switch_rows(results: Sequence[ne.PeriodResult]) -> list[tuple]:
    return [(r.kpi.period, r.kpi.sector_load, r.rho_min, r.rho_max, r.kpi.active_count, r.satisfied, r.action)
            for r in results]


def belief_rows(belief: cs.ThresholdBelief) -> list[tuple]:
    return [(float(loc), float(scale), float(belief.density[i, j]))
            for i, loc in enumerate(belief.loc_grid) for j, scale in enumerate(belief.scale_grid)]


# -- artifact writing ----------------------------------------------------------

CONGESTION_KPI = ("proxy: share of periods in which some carrier's load exceeds sector.rho_critical; "
                  "not an operator congestion counter")


def _meta(cfg) -> dict[str, Any]:
    return {"config": resolved(cfg), "toolkit_version": __version__, "rng": RNG_NAME}


class ArtifactWriter:
    """Collects files in memory and writes them only once the whole experiment succeeded."""

    def __init__(self, out_dir: str | Path) -> None:
        self.out_dir = Path(out_dir)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def commit(self) -> list[Path]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name in sorted(self.files):
            path = self.out_dir / name
            path.write_text(self.files[name], encoding="utf-8", newline="")
            paths.append(path)
        return paths


def beam_artifacts(cfg: BeamExperiment, runs: Sequence[BeamRun], writer: ArtifactWriter) -> dict[str, Any]:
    meta = _meta(cfg)
    for run in runs:
        writer.add(f"beam_seed{run.seed}_decisions.csv", csv_text(DECISION_COLUMNS, run.rows))
        writer.add(f"beam_seed{run.seed}_summary.json", json_text({**meta, "summary": run.summary}))
    agg = aggregate_beam(cfg, runs)
    index = {**meta, "kind": "beam", "seeds": [r.seed for r in runs], "summary": agg,
             "files": sorted(writer.files)}
    writer.add("summary.json", json_text(index))
    return agg


def carrier_artifacts(cfg: CarrierExperiment, runs: Sequence[CarrierRun], writer: ArtifactWriter) -> dict[str, Any]:
    meta = _meta(cfg)
    for run in runs:
        s = run.seed
        writer.add(f"carrier_seed{s}_periods.csv", csv_text(PERIOD_COLUMNS, period_rows(run.policy)))
        writer.add(f"carrier_seed{s}_baseline_periods.csv", csv_text(PERIOD_COLUMNS, period_rows(run.baseline)))
        writer.add(f"carrier_seed{s}_decisions.csv", csv_text(SWITCH_COLUMNS, switch_rows(run.policy)))
        writer.add(f"carrier_seed{s}_belief.csv", csv_text(("loc", "scale", "density"), belief_rows(run.final_belief)))
        writer.add(f"carrier_seed{s}_summary.json", json_text({**meta, "summary": run.summary}))
    agg = aggregate_carrier(cfg, runs)
    index = {**meta, "kind": "carrier", "congestion_kpi": CONGESTION_KPI, "seeds": [r.seed for r in runs], "summary": agg,
             "files": sorted(writer.files)}
    writer.add("summary.json", json_text(index))
    return agg


def run_beam(cfg: BeamExperiment, out_dir: str | Path) -> dict[str, Any]:
    runs = [run_beam_seed(cfg, seed) for seed in cfg.seeds]
    writer = ArtifactWriter(out_dir)
    agg = beam_artifacts(cfg, runs, writer)
    writer.commit()
    return agg


def run_carrier(cfg: CarrierExperiment, out_dir: str | Path) -> dict[str, Any]:
    prior = warm_start_belief(cfg, cfg.policy.warm_start_trace)
    runs = [run_carrier_seed(cfg, seed, prior) for seed in cfg.seeds]
    writer = ArtifactWriter(out_dir)
    agg = carrier_artifacts(cfg, runs, writer)
    writer.commit()
    return agg


def run_experiment(cfg, out_dir):
    return run_beam(cfg, out_dir) if cfg.kind == "beam" else run_carrier(cfg, out_dir)


def sweep(cfg, axis: str, values: Sequence[Any], out_dir: str | Path) -> list[tuple]:
    """Long-format ``(axis_value, seed, metric, value)`` rows, one run per value per seed."""
    from .config import set_parameter

    points = [(value, set_parameter(cfg, axis, value)) for value in values]  # validate all first
    rows = []
    for value, point_cfg in points:
        for seed in point_cfg.seeds:
            if point_cfg.kind == "beam":
                summary = run_beam_seed(point_cfg, seed).summary
            else:
                summary = run_carrier_seed(point_cfg, seed).summary
            for metric in sorted(summary):
                v = summary[metric]
                if metric == "seed" or not isinstance(v, (int, float)) or isinstance(v, bool):
                    continue
                rows.append((value, seed, metric, v))
    writer = ArtifactWriter(out_dir)
    writer.add("sweep.csv", csv_text(("axis_value", "seed", "metric", "value"), rows))
    writer.add("sweep_summary.json", json_text({**_meta(cfg), "axis": axis, "values": list(values)}))
    writer.commit()
    return rows


def dump_groundtruth(cfg: BeamExperiment, out_dir: str | Path) -> list[Path]:
    writer = ArtifactWriter(out_dir)
    for seed in cfg.seeds:
        scenario = cfg.scenario_for(seed)
        grid_rows, oracle_rows = [], []
        for slot in range(scenario.horizon_slots):
            land = scenario.landscape(slot)
            for az in range(scenario.grid.n_az):
                for el in range(scenario.grid.n_el):
                    grid_rows.append((slot, az, el, float(land[az, el])))
            (b_az, b_el), best = re_.best_beam_oracle(scenario, slot)
            oracle_rows.append((slot, b_az, b_el, best))
        writer.add(f"groundtruth_seed{seed}.csv", csv_text(("slot", "az", "el", "rsrp_dbm"), grid_rows))
        writer.add(f"oracle_seed{seed}.csv", csv_text(("slot", "best_az", "best_el", "rsrp_dbm"), oracle_rows))
    return writer.commit()


def warm_start_artifact(cfg: CarrierExperiment, trace_path: str | Path, out_dir: str | Path) -> cs.ThresholdBelief:
    belief = warm_start_belief(cfg, trace_path)
    writer = ArtifactWriter(out_dir)
    writer.add("belief.csv", csv_text(("loc", "scale", "density"), belief_rows(belief)))
    writer.commit()
    return belief
