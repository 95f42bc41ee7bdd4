"""
Run Reports
-----------

Collects the ``summary.json`` files under a directory (a single run or a
whole ablation tree) into one table, as CSV or JSON.
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from src.errors import ParseError

logger = logging.getLogger(__name__)


class ReportFormat(Enum):
    CSV = "csv"
    JSON = "json"


def load_summaries(root: Union[str, Path]) -> List[Dict[str, Any]]:
    """
    Every run summary below ``root``, ordered by path.

    Raises:
        ParseError: If a summary file is not valid JSON.
    """
    root = Path(root)
    summaries = []
    for path in sorted(root.rglob('summary.json')):
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, offset=exc.pos, path=str(path)) from exc
        data['run'] = str(path.parent.relative_to(root)) if path.parent != root else '.'
        summaries.append(data)
    logger.debug("found %d run summaries under %s", len(summaries), root)
    return summaries


def prepare_dataframe(summaries: List[Dict[str, Any]]) -> pd.DataFrame:
    """One row per run with its headline metrics."""
    rows = []
    for summary in summaries:
        metrics = summary.get('metrics', {})
        config = summary.get('config', {})
        rows.append({
            'run': summary.get('run', '.'),
            'seed': summary.get('seed'),
            'memory': config.get('buffer', {}).get('memory'),
            'depth_preset': config.get('depth', {}).get('preset'),
            'iterations': metrics.get('iterations', 0),
            'attempts': metrics.get('attempts', 0),
            'successes': metrics.get('successes', 0),
            'early_exits': metrics.get('early_exits', 0),
            'elapsed': metrics.get('elapsed', 0.0),
            'mpph': metrics.get('mpph', 0.0),
            'sr': metrics.get('sr'),
            'eer': metrics.get('eer'),
            'removed_fraction': metrics.get('removed_fraction', 0.0),
            'mean_rank_fraction': metrics.get('mean_rank_fraction'),
        })
    return pd.DataFrame(rows)


def render_report(frame: pd.DataFrame, fmt: Union[ReportFormat, str] = ReportFormat.CSV) -> str:
    fmt = ReportFormat(fmt) if not isinstance(fmt, ReportFormat) else fmt
    if fmt is ReportFormat.CSV:
        return frame.to_csv(index=False, float_format='%.6f')
    return frame.to_json(orient='records', indent=2) + '\n'


def build_report(root: Union[str, Path], fmt: Union[ReportFormat, str] = ReportFormat.CSV) -> str:
    return render_report(prepare_dataframe(load_summaries(root)), fmt)
