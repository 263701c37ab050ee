#!/usr/bin/env python3
"""
Logger Component
Handles logging of experiment runs: configuration, pipeline stages, results and errors
"""

import logging
import json
from typing import Dict, Any, Optional
from pathlib import Path
from datetime import datetime
import sys

# Configure base logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)


class ExperimentLogger:
    """Logger for one experiment run"""

    def __init__(self, run_id: str, log_dir: str = "logs", console: bool = True):
        """
        Initialize experiment logger

        Args:
            run_id: Unique run identifier
            log_dir: Directory to store log files
            console: Also echo INFO messages to stdout
        """
        self.run_id = run_id
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = self.log_dir / f"{run_id}.log"

        self.logger = logging.getLogger(f"experiment.{run_id}")
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        # a re-created logger for the same run must not duplicate handlers
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()

        file_handler = logging.FileHandler(self.log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        ))
        self.logger.addHandler(file_handler)

        if console:
            console_handler = logging.StreamHandler(sys.stdout)
            console_handler.setLevel(logging.INFO)
            console_handler.setFormatter(logging.Formatter('%(levelname)s - %(message)s'))
            self.logger.addHandler(console_handler)

        self.logger.info(f"Initialized logger for run {run_id}")

    def log_run_start(self, config: Dict[str, Any]):
        """
        Log run start

        Args:
            config: Resolved experiment configuration
        """
        self.logger.info("=" * 60)
        self.logger.info(f"Starting run: {self.run_id}")
        self.logger.info(f"Timestamp: {datetime.now().isoformat()}")
        self.logger.debug(f"Configuration: {json.dumps(config, indent=2, default=str)}")
        self.logger.info("=" * 60)

    def log_stage(self, stage: str, details: Optional[Dict[str, Any]] = None):
        message = f"Stage: {stage}"
        if details:
            message += f" - {json.dumps(details, default=str)}"
        self.logger.info(message)

    def log_acceptance(self, gain: float, n_in: int, n_accept: int, p_success: float):
        """Post-selection summary for one gain"""
        self.logger.info(f"g={gain:g}: accepted {n_accept}/{n_in} (p_success={p_success:.3e})")

    def log_results(self, name: str, results: Dict[str, Any]):
        """
        Log a results summary

        Args:
            name: Analysis name
            results: Flat mapping of result names to values
        """
        self.logger.info(f"Results for {name}:")
        for key, value in results.items():
            if isinstance(value, float):
                self.logger.info(f"  {key}: {value:.6g}")
            else:
                self.logger.info(f"  {key}: {value}")

    def log_run_end(self, summary: Dict[str, Any]):
        self.logger.info("=" * 60)
        self.logger.info(f"Run completed: {self.run_id}")
        self.logger.info(f"Timestamp: {datetime.now().isoformat()}")
        self.logger.debug(f"Summary: {json.dumps(summary, indent=2, default=str)}")
        self.logger.info("=" * 60)

    def log_error(self, error_message: str, exception: Optional[Exception] = None):
        """
        Log an error

        Args:
            error_message: Error message
            exception: Optional exception object
        """
        if exception:
            diagnostics = getattr(exception, 'diagnostics', None)
            self.logger.error(f"{error_message}: {exception}", exc_info=True)
            if diagnostics:
                self.logger.debug(f"Diagnostics: {json.dumps(diagnostics, default=str)}")
        else:
            self.logger.error(error_message)

    def close(self):
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()

    def retrieve_logs(self) -> str:
        """
        Retrieve all logs for this run

        Returns:
            Log content as string
        """
        if self.log_file.exists():
            return self.log_file.read_text()
        return ""
