from typing import Any

from truss_shm.experiments.accuracy import AccuracyReport, TrialRecord
from truss_shm.experiments.factorial import EffectTable, FactorialRun, pareto_effects

__all__ = (
    "mode_count_rows",
    "sweep_rows",
    "accuracy_rows",
    "factorial_rows",
    "pareto_rows",
    "responses_rows",
)


def _seed_triple(record: TrialRecord) -> str:
    return f"{record.scenario_seed}:{record.noise_seed}:{record.search_seed}"


def mode_count_rows(report: AccuracyReport) -> list[list[Any]]:
    """
    Mode-count grid: `n_modes,noise_set,trials,loc_acc,mag_acc,near_acc,combined_acc,trial_seeds`.

    `trial_seeds` lists the scenario, noise and search sub-seeds of each trial of the cell as
    space-separated `scenario:noise:search` triples, in trial order.
    """
    rows = [["n_modes", "noise_set", "trials", "loc_acc", "mag_acc", "near_acc", "combined_acc", "trial_seeds"]]
    for row in report.rows:
        condition = dict(row.condition)
        seeds = " ".join(_seed_triple(record) for record in report.records if record.condition == row.condition)
        rows.append([
            condition["n_modes"], condition["noise_set"], row.trials,
            row.loc_acc, row.mag_acc, row.near_acc, row.combined_acc, seeds,
        ])
    return rows


def sweep_rows(report: AccuracyReport) -> list[list[Any]]:
    """
    Per-trial sweep table: `noise_pct,iteration,in_scenario,out_scenario,P,D`, then the In/Out damage
    magnitudes (e.g. `30-85`), the near-miss flag and the sub-seeds that replay the trial.
    """
    rows = [[
        "noise_pct", "iteration", "in_scenario", "out_scenario", "P", "D",
        "in_damage", "out_damage", "near", "scenario_seed", "noise_seed", "search_seed",
    ]]
    for record in report.records:
        rows.append([
            dict(record.condition)["noise_pct"], record.iteration + 1,
            record.true_scenario, record.predicted, record.location, record.magnitude,
            record.true_scenario.label, record.predicted.label, record.near,
            record.scenario_seed, record.noise_seed, record.search_seed,
        ])
    return rows


def accuracy_rows(report: AccuracyReport) -> list[list[Any]]:
    """Plot data of a sweep: `noise_pct,trials,loc_acc,mag_acc,near_acc,combined_acc`."""
    rows = [["noise_pct", "trials", "loc_acc", "mag_acc", "near_acc", "combined_acc"]]
    for row in report.rows:
        rows.append([
            dict(row.condition)["noise_pct"], row.trials, row.loc_acc, row.mag_acc, row.near_acc, row.combined_acc,
        ])
    return rows


def factorial_rows(table: EffectTable) -> list[list[Any]]:
    """Effect table: `term,effect,coef,se,t,p`."""
    rows = [["term", "effect", "coef", "se", "t", "p"]]
    for term in table.terms:
        rows.append([term.name, term.effect, term.coef, term.se, term.t_value, term.p_value])
    return rows


def pareto_rows(table: EffectTable) -> list[list[Any]]:
    """Pareto data: `term,abs_t`, sorted by decreasing |t|."""
    ranked, _ = pareto_effects(table)
    return [["term", "abs_t"], *([name, abs_t] for name, abs_t in ranked)]


def responses_rows(run: FactorialRun) -> list[list[Any]]:
    """Raw responses: one line per (treatment, replicate)."""
    rows = [[*run.factors, "replicate", "objective"]]
    for treatment, values in zip(run.treatments, run.responses):
        for replicate, value in enumerate(values):
            rows.append([*(treatment[name] for name in run.factors), replicate, float(value)])
    return rows
