#!/usr/bin/env python3
"""
Reporter Component
Writes analysis results as digest-stamped JSON reports and flat CSV tables
"""

import json
import hashlib
import logging
from typing import Dict, Any, Iterable, List, Optional
from pathlib import Path
from datetime import datetime

import numpy as np
import pandas as pd

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

TABLE_COLUMNS = ['name', 'value', 'ci_low', 'ci_high']
REPORT_VERSION = 1


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def content_digest(content: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON encoding of the report content"""
    canonical = json.dumps(to_jsonable(content), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


class ReportWriter:
    """Builds and saves reports for one run"""

    def __init__(self, run_id: str, report_dir: str = "reports"):
        """
        Initialize reporter

        Args:
            run_id: Unique run identifier
            report_dir: Default directory for report files
        """
        self.run_id = run_id
        self.report_dir = Path(report_dir)

    def build_report(self, kind: str, content: Dict[str, Any]) -> Dict[str, Any]:
        """
        Wrap analysis content with provenance

        Args:
            kind: Report type (criteria, keyrate, normality, filter, sweep)
            content: Analysis results

        Returns:
            Report dictionary; the timestamp is not covered by the digest
        """
        content = to_jsonable(content)
        return {
            'version': REPORT_VERSION,
            'run_id': self.run_id,
            'kind': kind,
            'generated_at': datetime.now().isoformat(),
            'content': content,
            'content_digest': content_digest(content),
        }

    def save_report(self, report: Dict[str, Any], filepath: Optional[str] = None) -> Path:
        """
        Save report to file

        Args:
            report: Report dictionary
            filepath: Optional path to save report
        """
        if filepath is None:
            filepath = self.report_dir / f"{self.run_id}_{report.get('kind', 'report')}.json"
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(report, f, indent=2)
        logger.info(f"Report saved to {path}")
        return path

    @staticmethod
    def load_report(filepath: str) -> Dict[str, Any]:
        with open(filepath) as f:
            return json.load(f)

    @staticmethod
    def verify_report(report: Dict[str, Any]) -> bool:
        return content_digest(report.get('content', {})) == report.get('content_digest')

    def save_table(self, rows: Iterable[Dict[str, Any]], filepath: str) -> Path:
        """
        Save name/value/ci_low/ci_high rows as CSV

        Args:
            rows: Row dictionaries
            filepath: Output CSV path
        """
        frame = pd.DataFrame(list(rows), columns=TABLE_COLUMNS)
        return self.save_frame(frame, filepath)

    def save_frame(self, frame: pd.DataFrame, filepath: str, append: bool = False) -> Path:
        """Write a frame as CSV; with append, add its rows to an existing file without a header"""
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, mode='a' if append else 'w', header=not append)
        if not append:
            logger.info(f"Table saved to {path} ({len(frame)} rows)")
        return path

    def generate_text_summary(self, report: Dict[str, Any]) -> str:
        """
        Generate a human-readable text summary of the report

        Args:
            report: Report dictionary

        Returns:
            Formatted text summary
        """
        lines = [
            f"{report.get('kind', 'report').title()} Report: {self.run_id}",
            f"Generated: {report.get('generated_at', 'N/A')}",
            "=" * 60,
        ]
        for row in flatten_content(report.get('content', {})):
            value = row['value']
            text = f"{value:.6g}" if isinstance(value, float) else str(value)
            if row.get('ci_low') is not None and row.get('ci_high') is not None:
                text += f"  [{row['ci_low']:.6g}, {row['ci_high']:.6g}]"
            lines.append(f"  {row['name']:<32} {text}")
        return "\n".join(lines)


def interval_row(name: str, interval: Dict[str, Any]) -> Dict[str, Any]:
    return {'name': name, 'value': interval.get('value'),
            'ci_low': interval.get('ci_low'), 'ci_high': interval.get('ci_high')}


def flatten_content(content: Dict[str, Any], prefix: str = '') -> List[Dict[str, Any]]:
    """
    Flatten nested report content into table rows

    A dictionary holding 'value' with 'ci_low'/'ci_high' becomes one row;
    other dictionaries are descended with dotted names; lists are skipped.
    """
    rows = []
    for key, value in content.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            if 'value' in value and 'ci_low' in value:
                rows.append(interval_row(name, value))
            else:
                rows.extend(flatten_content(value, prefix=f"{name}."))
        elif isinstance(value, (int, float, bool, str)) or value is None:
            rows.append({'name': name, 'value': value, 'ci_low': None, 'ci_high': None})
    return rows
