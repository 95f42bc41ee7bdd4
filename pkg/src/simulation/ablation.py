"""
Ablations
---------

Paired comparisons of two pipeline variants over a set of seeds. Both arms
of a seed share the bin, the viewpoints and the sensor noise draws, so the
per-seed difference isolates the toggled component:

- memory: pose buffer on vs every filtered estimate treated as graspable
- depth: enhanced vs raw depth preset

Per metric the report gives the mean of each arm, the mean per-seed delta,
the share of seeds whose delta agrees in sign with the mean delta, a
Wilcoxon signed-rank test and Cohen's d.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from src.config import RunConfig
from src.grasping.candidates import GraspCandidate
from src.simulation.metrics import summary_row
from src.simulation.runner import load_databases, object_model_for, run

logger = logging.getLogger(__name__)

METRICS = ('sr', 'eer', 'mpph')
ALPHA = 0.05


class AblationAxis(Enum):
    """Toggled component"""
    MEMORY = "memory"
    DEPTH = "depth"

    def arms(self) -> List[Tuple[str, Dict[str, Any]]]:
        """``(label, overrides)`` of the reference arm, then the ablated arm."""
        if self is AblationAxis.MEMORY:
            return [('with_memory', {'buffer.memory': True}), ('no_memory', {'buffer.memory': False})]
        return [('enhanced', {'depth.preset': 'enhanced'}), ('raw', {'depth.preset': 'raw'})]


@dataclass
class AblationReport:
    axis: AblationAxis
    runs: pd.DataFrame                  # one row per (arm, seed)
    comparison: pd.DataFrame            # one row per metric

    def to_dict(self) -> Dict[str, Any]:
        return {
            'axis': self.axis.value,
            'runs': _records(self.runs),
            'comparison': _records(self.comparison),
        }


def _records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    rows = frame.astype(object).where(frame.notna(), None).to_dict(orient='records')
    return [{k: (v.item() if isinstance(v, np.generic) else v) for k, v in row.items()} for row in rows]


# =============================================================================
# STATISTICS
# =============================================================================

def paired_statistics(a: np.ndarray, b: np.ndarray) -> Tuple[float, float, float]:
    """
    Wilcoxon signed-rank statistic, its p-value and Cohen's d of ``a`` vs ``b``.
    The test is undefined (NaN) when every difference is zero or fewer than
    two pairs exist.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    stat, p_val = np.nan, np.nan
    if len(a) >= 2:
        try:
            stat, p_val = stats.wilcoxon(a, b)
        except ValueError:
            stat, p_val = np.nan, np.nan

    pooled_std = np.sqrt((np.std(a) ** 2 + np.std(b) ** 2) / 2)
    cohens_d = (np.mean(a) - np.mean(b)) / pooled_std if pooled_std > 0 else 0.0
    return float(stat), float(p_val), float(cohens_d)


def sign_consistency(deltas: np.ndarray) -> float:
    """Share of deltas with the sign of their mean (NaN when the mean is zero)."""
    deltas = np.asarray(deltas, dtype=float)
    if len(deltas) == 0:
        return float('nan')
    reference = np.sign(deltas.mean())
    if reference == 0:
        return float('nan')
    return float(np.mean(np.sign(deltas) == reference))


def compare_arms(runs: pd.DataFrame, reference: str, ablated: str,
                 metrics: Sequence[str] = METRICS) -> pd.DataFrame:
    """
    Paired per-seed comparison; seeds where a metric is undefined in either
    arm are left out of that metric.
    """
    rows = []
    for metric in metrics:
        wide = runs.pivot(index='seed', columns='arm', values=metric)
        wide = wide[[reference, ablated]].apply(pd.to_numeric, errors='coerce').dropna()
        a, b = wide[reference].to_numpy(), wide[ablated].to_numpy()
        deltas = a - b
        stat, p_val, cohens_d = paired_statistics(a, b) if len(wide) else (np.nan, np.nan, 0.0)
        rows.append({
            'metric': metric,
            'reference': reference,
            'ablated': ablated,
            'seeds': int(len(wide)),
            'mean_reference': float(np.mean(a)) if len(a) else np.nan,
            'mean_ablated': float(np.mean(b)) if len(b) else np.nan,
            'mean_delta': float(np.mean(deltas)) if len(deltas) else np.nan,
            'sign_consistency': sign_consistency(deltas),
            'wilcoxon_stat': stat,
            'p_value': p_val,
            'cohens_d': cohens_d,
            'significant': bool(not np.isnan(p_val) and p_val <= ALPHA),
        })
    return pd.DataFrame(rows)


# =============================================================================
# DRIVER
# =============================================================================

def run_ablation(config: RunConfig, axis: AblationAxis, seeds: Sequence[int],
                 out_dir: Optional[Union[str, Path]] = None,
                 databases: Optional[Mapping[str, Sequence[GraspCandidate]]] = None) -> AblationReport:
    """
    Run both arms of ``axis`` for every seed.

    Args:
        config: Base configuration; each arm overrides only its toggle.
        axis: Component to ablate.
        seeds: Run seeds; each seed runs once per arm.
        out_dir: Root for per-run outputs and the report files.
        databases: Grasp candidates shared by all runs; built once when omitted.
    """
    if databases is None:
        databases = load_databases(config, object_model_for(config))
    arms = axis.arms()
    rows = []
    for seed in seeds:
        for label, overrides in arms:
            arm_config = config.with_overrides({**overrides, 'seed': int(seed)})
            arm_dir = Path(out_dir) / label / f"seed_{seed}" if out_dir is not None else None
            result = run(arm_config, arm_dir, databases=databases)
            rows.append(summary_row(result.metrics, arm=label, seed=int(seed)))
            logger.info("%s seed %d: SR %s, EER %s, MPPH %.1f", label, seed,
                        _fmt(result.metrics.sr), _fmt(result.metrics.eer), result.metrics.mpph)

    runs = pd.DataFrame(rows)
    comparison = compare_arms(runs, arms[0][0], arms[1][0])
    report = AblationReport(axis, runs, comparison)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def _fmt(value: Optional[float]) -> str:
    return 'n/a' if value is None else f"{value:.3f}"


def write_report(report: AblationReport, out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.runs.to_csv(out / 'ablation_runs.csv', index=False, float_format='%.6f')
    report.comparison.to_csv(out / 'ablation_comparison.csv', index=False, float_format='%.6f')
    (out / 'ablation.json').write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + '\n')
    logger.info("wrote %s ablation report to %s", report.axis.value, out)
