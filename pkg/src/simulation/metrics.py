"""
Run Metrics
-----------

Per-iteration records and the three headline figures of a picking run:

- MPPH: successful picks per hour of simulated wall time
- SR: successes over grasp attempts (undefined without attempts)
- EER: iterations ending in an early exit over all iterations

The same figures are also computed per fixed-length time bucket (five
minutes by default) to show how performance evolves as the bin empties.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.errors import InvalidInput

logger = logging.getLogger(__name__)

BUCKET_COLUMNS = ['bucket', 'start', 'end', 'iterations', 'attempts', 'successes', 'early_exits',
                  'mpph', 'sr', 'eer']


@dataclass
class IterationRecord:
    """
    One pipeline iteration, or the final ``flush`` of the last pending motion.

    ``execution`` describes the grasp of the previous iteration, executed
    while this one was perceiving and planning.
    """
    iteration: int
    start: float                        # simulated seconds
    end: float                          # simulated seconds
    kind: str = 'iteration'
    viewpoint: Optional[int] = None
    estimates: int = 0
    rejected: int = 0
    tracks: int = 0
    validated: int = 0
    occupied_voxels: int = 0
    feasible: bool = False
    early_exit: Optional[str] = None
    planned_track: Optional[int] = None
    rank_fraction: Optional[float] = None
    execution: Optional[Dict[str, Any]] = None
    remaining: int = 0
    successes: int = 0                  # cumulative
    compute_seconds: Optional[float] = None

    @property
    def attempt(self) -> bool:
        return self.execution is not None

    @property
    def success(self) -> bool:
        return self.execution is not None and self.execution['status'] == 'success'

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'iteration': self.iteration,
            'kind': self.kind,
            'start': self.start,
            'end': self.end,
            'viewpoint': self.viewpoint,
            'estimates': self.estimates,
            'rejected': self.rejected,
            'tracks': self.tracks,
            'validated': self.validated,
            'occupied_voxels': self.occupied_voxels,
            'feasible': self.feasible,
            'early_exit': self.early_exit,
            'planned_track': self.planned_track,
            'rank_fraction': self.rank_fraction,
            'execution': self.execution,
            'remaining': self.remaining,
            'successes': self.successes,
        }
        if self.compute_seconds is not None:
            data['compute_seconds'] = self.compute_seconds
        return data


@dataclass
class RunMetrics:
    iterations: int
    attempts: int
    successes: int
    early_exits: int
    elapsed: float                      # simulated seconds
    initial_count: int = 0
    remaining: int = 0
    failures: Dict[str, int] = field(default_factory=dict)
    mean_rank_fraction: Optional[float] = None
    buckets: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=BUCKET_COLUMNS))

    @property
    def mpph(self) -> float:
        return self.successes * 3600.0 / self.elapsed if self.elapsed > 0 else 0.0

    @property
    def sr(self) -> Optional[float]:
        return self.successes / self.attempts if self.attempts else None

    @property
    def eer(self) -> Optional[float]:
        return self.early_exits / self.iterations if self.iterations else None

    @property
    def removed_fraction(self) -> float:
        return self.successes / self.initial_count if self.initial_count else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iterations': self.iterations,
            'attempts': self.attempts,
            'successes': self.successes,
            'early_exits': self.early_exits,
            'elapsed': self.elapsed,
            'mpph': self.mpph,
            'sr': self.sr,
            'eer': self.eer,
            'initial_count': self.initial_count,
            'remaining': self.remaining,
            'removed_fraction': self.removed_fraction,
            'failures': dict(sorted(self.failures.items())),
            'mean_rank_fraction': self.mean_rank_fraction,
        }


# =============================================================================
# AGGREGATION
# =============================================================================

def records_frame(records: Sequence[IterationRecord]) -> pd.DataFrame:
    """One row per record with the columns the aggregations need."""
    rows = []
    for record in records:
        rows.append({
            'iteration': record.iteration,
            'kind': record.kind,
            'end': record.end,
            'is_iteration': record.kind == 'iteration',
            'early_exit': record.early_exit is not None,
            'attempt': record.attempt,
            'success': record.success,
            'status': record.execution['status'] if record.execution else None,
            'rank_fraction': record.rank_fraction,
        })
    return pd.DataFrame(rows, columns=['iteration', 'kind', 'end', 'is_iteration', 'early_exit',
                                       'attempt', 'success', 'status', 'rank_fraction'])


def bucket_metrics(records: Sequence[IterationRecord], elapsed: float, bucket_seconds: float = 300.0) -> pd.DataFrame:
    """
    Metrics per time bucket. A record belongs to the bucket its end time
    falls in; a record ending exactly on a boundary closes the earlier bucket.
    """
    if bucket_seconds <= 0:
        raise InvalidInput(f"bucket length must be positive, got {bucket_seconds}")
    if elapsed <= 0 or not records:
        return pd.DataFrame(columns=BUCKET_COLUMNS)

    df = records_frame(records)
    df['bucket'] = np.maximum(0, np.ceil(df['end'] / bucket_seconds - 1e-9) - 1).astype(int)
    count = max(1, math.ceil(elapsed / bucket_seconds - 1e-9))

    rows = []
    for bucket in range(count):
        start = bucket * bucket_seconds
        end = min(elapsed, start + bucket_seconds)
        part = df[df['bucket'] == bucket]
        iterations = int(part['is_iteration'].sum())
        attempts = int(part['attempt'].sum())
        successes = int(part['success'].sum())
        early = int((part['early_exit'] & part['is_iteration']).sum())
        duration = end - start
        rows.append({
            'bucket': bucket,
            'start': start,
            'end': end,
            'iterations': iterations,
            'attempts': attempts,
            'successes': successes,
            'early_exits': early,
            'mpph': successes * 3600.0 / duration if duration > 0 else 0.0,
            'sr': successes / attempts if attempts else np.nan,
            'eer': early / iterations if iterations else np.nan,
        })
    return pd.DataFrame(rows, columns=BUCKET_COLUMNS)


def compute_metrics(records: Sequence[IterationRecord], elapsed: float, initial_count: int = 0,
                    remaining: int = 0, bucket_seconds: float = 300.0) -> RunMetrics:
    if not records:
        return RunMetrics(0, 0, 0, 0, float(elapsed), initial_count, remaining,
                          buckets=bucket_metrics(records, elapsed, bucket_seconds))
    df = records_frame(records)
    iterations = df[df['is_iteration']]
    ranks = pd.to_numeric(iterations['rank_fraction'], errors='coerce').dropna()
    failures = df.loc[df['attempt'] & ~df['success'], 'status'].value_counts()
    return RunMetrics(
        iterations=int(len(iterations)),
        attempts=int(df['attempt'].sum()),
        successes=int(df['success'].sum()),
        early_exits=int(iterations['early_exit'].sum()),
        elapsed=float(elapsed),
        initial_count=initial_count,
        remaining=remaining,
        failures={str(k): int(v) for k, v in failures.items()},
        mean_rank_fraction=float(ranks.mean()) if len(ranks) else None,
        buckets=bucket_metrics(records, elapsed, bucket_seconds),
    )


def write_metrics_csv(path: Union[str, Path], metrics: RunMetrics) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metrics.buckets.to_csv(path, index=False, float_format='%.6f')


def summary_row(metrics: RunMetrics, **labels: Any) -> Dict[str, Any]:
    """Flat headline figures for tabular reports."""
    row: Dict[str, Any] = dict(labels)
    row.update({k: v for k, v in metrics.to_dict().items() if k != 'failures'})
    return row


def summary_frame(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(rows)
