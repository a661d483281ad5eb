"""Experiment driver: run ICG / CENT / NoCoop over a horizon, emit reports."""

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import power_draw
from .policy import average_profits, cent_solve, nocoop_solve, solve_pricing_policy
from .scenario import Scenario

SCHEMES = ("ICG", "CENT", "NoCoop")
_PARTITION_P_CUTOFF = 1e-6


@dataclass
class SlotRecord:
    slot: int
    scheme: str
    sg_profit: float
    revenue_term: float
    mismatch_term: float
    cp_profit: dict                  # provider id -> $
    prices: dict                     # provider id -> realized/expected $/kWh
    partition_weights: list          # (partition string, probability)
    lp_objective: float = None       # ICG only


@dataclass
class RunReport:
    scenario_seed: int
    horizon: int
    providers: tuple
    records: list = field(default_factory=list)

    def by_scheme(self, scheme):
        return [r for r in self.records if r.scheme == scheme]


class SlotInfeasibleError(RuntimeError):
    def __init__(self, slot, scheme, cause):
        self.slot = slot
        self.scheme = scheme
        super().__init__(f"slot {slot}, scheme {scheme}: {cause}")


def _run_icg(model):
    policy = solve_pricing_policy(model)
    sg_avg, cp_avg = average_profits(policy, model)
    weights = policy.stationary[:, None] * policy.varphi
    revenue = 0.0
    mismatch = 0.0
    for k, p in enumerate(model.space.states):
        for a in range(len(model.action_grid)):
            w = weights[k, a]
            if w <= 0:
                continue
            rev, mis = model.utility_components(p, a)
            revenue += w * rev
            mismatch += w * mis
    part_weights = [
        (str(model.space.states[k]), float(policy.stationary[k]))
        for k in np.flatnonzero(policy.stationary > _PARTITION_P_CUTOFF)
    ]
    return SlotRecord(
        slot=-1,
        scheme="ICG",
        sg_profit=sg_avg,
        revenue_term=float(revenue),
        mismatch_term=float(mismatch),
        cp_profit=cp_avg,
        prices=dict(policy.expected_prices),
        partition_weights=part_weights,
        lp_objective=policy.expected_utility,
    )


def _run_cent(model):
    partition, action, utility, payoffs = cent_solve(model)
    revenue, mismatch = model.utility_components(partition, action)
    return SlotRecord(
        slot=-1,
        scheme="CENT",
        sg_profit=utility,
        revenue_term=revenue,
        mismatch_term=mismatch,
        cp_profit=dict(payoffs),
        prices=model.prices(partition, action),
        partition_weights=[(str(partition), 1.0)],
    )


def _run_nocoop(model):
    _, utility, profits, theta = nocoop_solve(model)
    singleton = "|".join(str(j) for j in model.providers)
    e = {j: power_draw(model.specs[j], model.workloads[j]).power
         for j in model.providers}
    revenue = sum(theta[j] * e[j] for j in model.providers)
    mismatch = sum(abs(e[j] - model.grid.supply[model.specs[j].bus])
                   for j in model.providers)
    return SlotRecord(
        slot=-1,
        scheme="NoCoop",
        sg_profit=utility,
        revenue_term=revenue,
        mismatch_term=mismatch,
        cp_profit=dict(profits),
        prices=dict(theta),
        partition_weights=[(singleton, 1.0)],
    )


_RUNNERS = {"ICG": _run_icg, "CENT": _run_cent, "NoCoop": _run_nocoop}


def _run_slot(scenario, slot, schemes):
    model = scenario.slot_model(slot)
    records = []
    for scheme in schemes:
        try:
            rec = _RUNNERS[scheme](model)
        except Exception as exc:
            raise SlotInfeasibleError(slot, scheme, exc) from exc
        rec.slot = slot
        records.append(rec)
    return records


def run_experiment(scenario: Scenario, schemes=SCHEMES, progress=None,
                   workers=None) -> RunReport:
    """Execute every requested scheme on every slot of the horizon.

    Slots are independent and run as a parallel map (``workers`` processes,
    defaulting to the CPU count); the report is assembled in slot order, so
    results are identical to a sequential run.  A ``progress`` callback
    forces sequential execution so updates arrive as they happen.
    """
    schemes = tuple(schemes)
    for s in schemes:
        if s not in _RUNNERS:
            raise ValueError(f"unknown scheme '{s}'; choose from {SCHEMES}")
    report = RunReport(
        scenario_seed=scenario.seed,
        horizon=scenario.horizon,
        providers=tuple(sorted(scenario.providers)),
    )
    if workers is None:
        workers = min(os.cpu_count() or 1, scenario.horizon)
    if progress is not None or workers <= 1 or scenario.horizon <= 1:
        for slot in range(scenario.horizon):
            for rec in _run_slot(scenario, slot, schemes):
                report.records.append(rec)
                if progress:
                    progress(slot, rec.scheme, rec)
        return report
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for records in pool.map(_run_slot, [scenario] * scenario.horizon,
                                range(scenario.horizon),
                                [schemes] * scenario.horizon):
            report.records.extend(records)
    return report


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_report(report: RunReport, out_dir) -> list:
    """Emit sg_profit.csv, cp_profit.csv, prices.csv, partitions.csv and
    summary.txt into ``out_dir``; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    path = os.path.join(out_dir, "sg_profit.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["slot", "scheme", "sg_profit", "revenue_term", "mismatch_term"])
        for r in report.records:
            w.writerow([r.slot, r.scheme, repr(r.sg_profit),
                        repr(r.revenue_term), repr(r.mismatch_term)])
    paths.append(path)

    path = os.path.join(out_dir, "cp_profit.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["slot", "scheme", "provider", "profit"])
        for r in report.records:
            for j in report.providers:
                w.writerow([r.slot, r.scheme, j, repr(r.cp_profit[j])])
    paths.append(path)

    path = os.path.join(out_dir, "prices.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["slot", "scheme", "provider", "price"])
        for r in report.records:
            for j in report.providers:
                w.writerow([r.slot, r.scheme, j, repr(r.prices[j])])
    paths.append(path)

    path = os.path.join(out_dir, "partitions.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(["slot", "scheme", "partition", "probability"])
        for r in report.records:
            for part, prob in r.partition_weights:
                w.writerow([r.slot, r.scheme, part, repr(prob)])
    paths.append(path)

    path = os.path.join(out_dir, "summary.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_summary(report))
    paths.append(path)
    return paths


def _averages(report, scheme):
    recs = report.by_scheme(scheme)
    if not recs:
        return None, None
    sg = float(np.mean([r.sg_profit for r in recs]))
    cp = float(np.mean([sum(r.cp_profit.values()) for r in recs]))
    return sg, cp


def format_summary(report: RunReport) -> str:
    lines = [
        f"horizon_slots {report.horizon}",
        f"scenario_seed {report.scenario_seed}",
    ]
    averages = {}
    for scheme in SCHEMES:
        sg, cp = _averages(report, scheme)
        if sg is None:
            continue
        averages[scheme] = (sg, cp)
        lines.append(f"{scheme}_avg_sg_profit {sg!r}")
        lines.append(f"{scheme}_avg_cp_total_profit {cp!r}")

    def pct(a, b):
        return 100.0 * (a - b) / abs(b)

    if "NoCoop" in averages:
        base_sg, base_cp = averages["NoCoop"]
        for scheme in ("ICG", "CENT"):
            if scheme in averages:
                sg, cp = averages[scheme]
                lines.append(
                    f"{scheme}_vs_NoCoop_sg_improvement_pct {pct(sg, base_sg)!r}"
                )
                lines.append(
                    f"{scheme}_vs_NoCoop_cp_improvement_pct {pct(cp, base_cp)!r}"
                )
    if "ICG" in averages and "CENT" in averages:
        lines.append(
            "CENT_vs_ICG_sg_improvement_pct "
            f"{pct(averages['CENT'][0], averages['ICG'][0])!r}"
        )
    return "\n".join(lines) + "\n"
