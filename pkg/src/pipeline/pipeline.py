#!/usr/bin/env python3
"""
Pipeline Component
Runs the simulate -> filter -> analyse chain and the gain/loss sweeps behind the CLI
"""

import sys
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Any, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.interface import ExperimentConfig
from criteria.bootstrap import MomentBlocks, bootstrap_criteria
from criteria.criteria import (
    bob_outcome_covariance, cm_from_sums, criteria_from_cm, criteria_from_state, perfect_epr_bound,
    stream_sums,
)
from gaussian.gaussian import GaussianState, apply_loss, from_snu, purity_cm, state_digest, to_snu
from logger.logger import ExperimentLogger
from measurement.measurement import MeasurementRecord, RecordMeta, iter_shards, sample_shots
from monitor.monitor import RunLedger
from nla.nla import (
    FilterSpec, StreamingFilter, analytic_nla, analytic_success_probability, apply_mbnla, choose_cutoff,
    gain_bound,
)
from normality.normality import NormalityAccumulator, purity_consistency
from qkd.qkd import key_rate, key_rate_statistic, keyrate_sweep
from reporter.reporter import ReportWriter, interval_row
from storage.record_file import RecordWriter, iter_record_chunks, read_header, read_meta
from utils.errors import EmptyEnsembleError, GainBoundError, MBNLAError, ParameterError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

RECORD_SUFFIX = '.mbnl'
CHUNK_SHOTS = 1 << 20
WITNESSES = ('e_direct', 'e_reverse', 'duan_i')


class ExperimentPipeline:
    """Executes one resolved experiment configuration"""

    def __init__(self, config: ExperimentConfig, console: bool = True, progress: bool = False):
        """
        Initialize the pipeline

        Args:
            config: Resolved experiment configuration
            console: Echo run log messages to stdout
            progress: Show progress bars
        """
        self.config = config
        self.run_id = config.run_id
        self.out_dir = Path(config.output.directory)
        self.progress = progress
        self.log = ExperimentLogger(self.run_id, config.output.logs_dir, console=console)
        self.reporter = ReportWriter(self.run_id, self.out_dir)
        self.ledger = RunLedger(self.run_id, config.output.ledger_path)
        self._state = None

    @property
    def state(self) -> GaussianState:
        if self._state is None:
            self._state = self.config.build_state()
        return self._state

    def _digest(self) -> bytes:
        return state_digest(self.state)

    def _state_for(self, meta: RecordMeta) -> Optional[GaussianState]:
        """The configured state when the record was sampled from it"""
        if meta.state_digest == self._digest().hex():
            return self.state
        return None

    def _default_path(self, tag: str, suffix: str = RECORD_SUFFIX) -> Path:
        return self.out_dir / f"{self.run_id}_{tag}{suffix}"

    def _chunks(self, record_path: str) -> Iterator[MeasurementRecord]:
        """Record file chunks aligned to whole filter shards"""
        shard = self.config.shard_size
        return iter_record_chunks(record_path, shard * max(1, CHUNK_SHOTS // shard))

    def close(self):
        self.log.close()

    def simulate(self, out_path: Optional[str] = None) -> Dict[str, Any]:
        """
        Sample the configured state and stream the shots to a record file

        Args:
            out_path: Record file; defaults to <out>/<run_id>_raw.mbnl

        Returns:
            Summary with path, shot count, seed and digests
        """
        path = Path(out_path) if out_path else self._default_path('raw')
        config = self.config
        self.log.log_stage('simulate', {'shots': config.shots, 'seed': config.seed,
                                        'state': self.state.describe()})
        shards = iter_shards(self.state, config.shots, config.seed, max_workers=config.workers,
                             shard_size=config.shard_size)
        total = -(-config.shots // config.shard_size)
        with RecordWriter(path, config.seed, self._digest()) as writer:
            for shard in tqdm(shards, total=total, desc='simulate', disable=not self.progress):
                writer.write(shard)
        header = read_header(path)
        summary = {
            'path': str(path),
            'state': self.state.describe(),
            'n_shots': header['n_shots'],
            'seed': config.seed,
            'state_digest': header['state_digest'],
            'payload_digest': header['payload_digest'],
        }
        self.log.log_results('simulate', summary)
        return summary

    def filter(self, record_path: str, gain: Optional[float] = None,
               out_path: Optional[str] = None) -> Dict[str, Any]:
        """
        Post-select a record file and write the filtered record

        Args:
            record_path: Unfiltered record file
            gain: Amplifier gain; defaults to the largest configured gain
            out_path: Output record; defaults to <out>/<run_id>_g<gain>.mbnl

        Returns:
            Acceptance summary
        """
        config = self.config
        gain = float(max(config.filter.gains) if gain is None else gain)
        meta = read_meta(record_path)
        if meta.rescaled:
            raise ParameterError(f"{record_path} has already been post-selected")
        state = self._state_for(meta)
        gains = tuple(config.filter.gains) + (gain,)
        if state is not None:
            alpha_c = self._cutoff(state, gains)
        elif config.filter.k_sd == 0:
            alpha_c = 0.0
        else:
            sums = stream_sums(self._chunks(record_path), meta.n_requested)
            alpha_c = self._cutoff(bob_outcome_covariance(sums[0]), gains)
        spec = FilterSpec(gain, alpha_c)
        self.log.log_stage('filter', {'record': str(record_path), 'gain': gain, 'alpha_c': alpha_c})

        path = Path(out_path) if out_path else self._default_path(f"g{gain:g}")
        digest = bytes.fromhex(meta.state_digest) if meta.state_digest else b''
        stream = StreamingFilter(spec, config.seed, max_workers=config.workers,
                                 shard_size=config.shard_size)
        try:
            with RecordWriter(path, meta.seed, digest, gain) as writer:
                for chunk in self._chunks(record_path):
                    writer.write(stream.filter(chunk))
                stream.finish()
        except MBNLAError as e:
            path.unlink(missing_ok=True)
            self.ledger.record_failure('filter', e, gain=gain, seed=config.seed,
                                       input_path=record_path)
            if isinstance(e, EmptyEnsembleError):
                self.log.log_error('Post-selection produced an empty ensemble', e)
            raise

        p_analytic = analytic_success_probability(state, spec) if state is not None else None
        self.ledger.record_filter(stream, seed=config.seed, input_path=record_path,
                                  output_path=path, p_analytic=p_analytic,
                                  state_digest=meta.state_digest)
        self.log.log_acceptance(gain, stream.n_in, stream.n_accept, stream.p_success)
        return {
            'path': str(path),
            'gain': gain,
            'alpha_c': alpha_c,
            'n_in': stream.n_in,
            'n_accept': stream.n_accept,
            'p_success': stream.p_success,
            'p_analytic': p_analytic,
        }

    def export(self, record_path: str, out_path: Optional[str] = None) -> Path:
        """Write a record file as CSV, one chunk at a time"""
        path = Path(out_path) if out_path else Path(record_path).with_suffix('.csv')
        n_rows = 0
        for index, chunk in enumerate(self._chunks(record_path)):
            frame = pd.DataFrame({
                'alice_quad': np.where(chunk.alice_quad == 0, 'x', 'p'),
                'alice_value': chunk.alice_value,
                'bob_x': chunk.bob_x,
                'bob_p': chunk.bob_p,
            })
            self.reporter.save_frame(frame, path, append=index > 0)
            n_rows += len(frame)
        if n_rows == 0:
            self.reporter.save_frame(pd.DataFrame(columns=['alice_quad', 'alice_value', 'bob_x', 'bob_p']),
                                     path)
        logger.info(f"Exported {n_rows} shots to {path}")
        return path

    def _scan(self, record_path: str,
              accumulator: Optional[NormalityAccumulator] = None) -> Tuple[RecordMeta, MomentBlocks]:
        """One chunked pass over a record file: bootstrap blocks, plus moments when asked"""
        meta = read_meta(record_path)

        def chunks() -> Iterator[MeasurementRecord]:
            for chunk in self._chunks(record_path):
                if accumulator is not None:
                    accumulator.add(chunk)
                yield chunk

        return meta, MomentBlocks.from_chunks(chunks(), meta.n_requested)

    def _expected_state(self, meta: RecordMeta) -> Tuple[Optional[GaussianState], Optional[str]]:
        """Ideally amplified source state matching the record's gain"""
        state = self._state_for(meta)
        if state is None:
            return None, None
        try:
            return analytic_nla(state, meta.gain), None
        except GainBoundError as e:
            return None, str(e)

    @staticmethod
    def _record_summary(record_path: str, meta: RecordMeta) -> Dict[str, Any]:
        return {
            'path': str(record_path),
            'n_shots': meta.n_requested,
            'gain': meta.gain,
            'seed': meta.seed,
            'state_digest': meta.state_digest,
        }

    def _save(self, kind: str, content: Dict[str, Any], rows: List[Dict[str, Any]],
              tag: Optional[str] = None) -> Dict[str, Any]:
        report = self.reporter.build_report(kind, content)
        name = f"{kind}_{tag}" if tag else kind
        json_path = self.reporter.save_report(report, self._default_path(name, '.json'))
        csv_path = self.reporter.save_table(rows, self._default_path(name, '.csv'))
        return {'report': report, 'json': str(json_path), 'csv': str(csv_path)}

    def criteria(self, record_path: str) -> Dict[str, Any]:
        """
        Reid and Duan witnesses with bootstrap intervals for a record file

        Returns:
            Saved report with its JSON and CSV paths
        """
        meta, blocks = self._scan(record_path)
        self.log.log_stage('criteria', {'record': str(record_path), 'n_shots': blocks.n_shots})
        reconstructed = cm_from_sums(blocks.total())
        point = criteria_from_cm(reconstructed.cm, with_purity=True)
        intervals = bootstrap_criteria(blocks, n_boot=self.config.n_boot, seed=self.config.seed,
                                       progress=self.progress)
        statistics = {name: interval.to_dict() for name, interval in intervals.items()}

        content = {
            'config': self.config.to_dict(),
            'record': self._record_summary(record_path, meta),
            'cm': reconstructed.cm,
            'cm_stderr': reconstructed.stderr,
            'statistics': statistics,
            'epr_violated': point.epr_violated,
            'entangled': point.entangled,
        }
        expected, problem = self._expected_state(meta)
        if expected is not None:
            exact = criteria_from_state(expected)
            content['analytic'] = exact.to_dict()
            check = purity_consistency(intervals['purity'].point, intervals['purity'].stderr,
                                       exact.purity)
            content['purity_check'] = {'expected': check.expected, 'z_score': check.z_score,
                                       'consistent': check.consistent}
        elif problem:
            content['analytic_error'] = problem

        self.log.log_results('criteria', point.to_dict())
        return self._save('criteria', content, [interval_row(name, entry)
                                                for name, entry in statistics.items()],
                          tag=self._record_tag(meta))

    def keyrate(self, record_path: str, beta: Optional[float] = None) -> Dict[str, Any]:
        """
        Key rate with a 1-sigma bootstrap interval for a record file

        Returns:
            Saved report with its JSON and CSV paths
        """
        beta = self.config.beta_rec if beta is None else float(beta)
        meta, blocks = self._scan(record_path)
        self.log.log_stage('keyrate', {'record': str(record_path), 'beta_rec': beta})
        report = key_rate(cm_from_sums(blocks.total()).cm, beta, gain=meta.gain)
        interval = bootstrap_criteria(blocks, n_boot=self.config.n_boot, seed=self.config.seed,
                                      sigma=1.0, statistic=key_rate_statistic(beta),
                                      progress=self.progress)['k']
        report.k_low, report.k_high, report.k_stderr = interval.low, interval.high, interval.stderr

        content = {
            'config': self.config.to_dict(),
            'record': self._record_summary(record_path, meta),
            'keyrate': report.to_dict(),
        }
        expected, problem = self._expected_state(meta)
        if expected is not None:
            content['analytic'] = key_rate(to_snu(expected.cm), beta, gain=meta.gain).to_dict()
        elif problem:
            content['analytic_error'] = problem

        rows = [
            {'name': 'i_ab', 'value': report.i_ab, 'ci_low': None, 'ci_high': None},
            {'name': 's_ae', 'value': report.s_ae, 'ci_low': None, 'ci_high': None},
            {'name': 'k', 'value': report.k, 'ci_low': report.k_low, 'ci_high': report.k_high},
        ]
        self.log.log_results('keyrate', {'i_ab': report.i_ab, 's_ae': report.s_ae, 'k': report.k})
        return self._save('keyrate', content, rows, tag=self._record_tag(meta))

    def normality(self, record_path: str) -> Dict[str, Any]:
        """
        Moment diagnostics of every stream of a record file

        Returns:
            Saved report with its JSON and CSV paths
        """
        accumulator = NormalityAccumulator()
        meta, blocks = self._scan(record_path, accumulator)
        self.log.log_stage('normality', {'record': str(record_path), 'n_shots': blocks.n_shots})
        report = accumulator.report()
        content = {
            'config': self.config.to_dict(),
            'record': self._record_summary(record_path, meta),
            'normality': report.to_dict(),
        }
        expected, problem = self._expected_state(meta)
        if expected is not None:
            purity = bootstrap_criteria(
                blocks, n_boot=self.config.n_boot, seed=self.config.seed,
                statistic=lambda sums: {'purity': purity_cm(from_snu(cm_from_sums(sums).cm))},
            )['purity']
            check = purity_consistency(purity.point, purity.stderr, purity_cm(expected.cm))
            content['purity_check'] = {'measured': check.measured, 'stderr': check.stderr,
                                       'expected': check.expected, 'z_score': check.z_score,
                                       'consistent': check.consistent}
        elif problem:
            content['analytic_error'] = problem

        rows = []
        for name, stream in report.streams.items():
            for moment, se in (('skewness', stream.skewness_se), ('excess_kurtosis', stream.kurtosis_se)):
                value = getattr(stream, moment)
                rows.append({'name': f"{name}.{moment}", 'value': value,
                             'ci_low': value - 2.0 * se, 'ci_high': value + 2.0 * se})
            rows.append({'name': f"{name}.jb_statistic", 'value': stream.jb_statistic,
                         'ci_low': None, 'ci_high': None})
        self.log.log_results('normality', {'jb_pass': report.jb_pass, 'n': report.n})
        return self._save('normality', content, rows, tag=self._record_tag(meta))

    @staticmethod
    def _record_tag(meta: RecordMeta) -> str:
        return f"g{meta.gain:g}"

    def analyse(self, record_path: str) -> Dict[str, Dict[str, Any]]:
        """Run every analysis listed in the configuration"""
        runners = {'criteria': self.criteria, 'keyrate': self.keyrate, 'normality': self.normality}
        return {name: runners[name](record_path) for name in self.config.analyses}

    def _cutoff(self, source: Union[GaussianState, np.ndarray], gains: Sequence[float]) -> float:
        """Cut-off sized for the largest gain the source supports"""
        g_max = max(gains)
        try:
            return choose_cutoff(source, self.config.filter.k_sd, g_max)
        except GainBoundError as e:
            g_max = max([g for g in gains if g < e.supremum_gain], default=1.0)
            logger.warning(f"Largest gain exceeds the bound {e.supremum_gain:.4f}; "
                           f"sizing the cut-off for g={g_max:g}")
            return choose_cutoff(source, self.config.filter.k_sd, g_max)

    def _sample(self, state: GaussianState) -> MeasurementRecord:
        config = self.config
        return sample_shots(state, config.shots, config.seed, max_workers=config.workers,
                            memory_budget=config.memory_budget, shard_size=config.shard_size,
                            digest=state_digest(state).hex())

    def _success_point(self, state: GaussianState, record: Optional[MeasurementRecord],
                       g: float, alpha_c: float) -> Dict[str, Any]:
        spec = FilterSpec(g, alpha_c)
        row = {'gain': g, 'alpha_c': alpha_c, 'error': ''}
        try:
            row['analytic_p_success'] = analytic_success_probability(state, spec)
            exact = criteria_from_state(analytic_nla(state, g))
            for name in WITNESSES:
                row[f"analytic_{name}"] = getattr(exact, name)
            row['analytic_purity'] = exact.purity
            if record is None:
                row['p_success'] = row['analytic_p_success']
                for name in WITNESSES:
                    row[name] = row[f"analytic_{name}"]
                return row
            outcome = apply_mbnla(record, spec, self.config.seed, max_workers=self.config.workers,
                                  shard_size=self.config.shard_size)
            row['p_success'] = outcome.p_success
            row['n_accept'] = outcome.n_accept
            intervals = bootstrap_criteria(outcome.record, n_boot=self.config.n_boot,
                                           seed=self.config.seed)
            for name in WITNESSES + ('purity',):
                interval = intervals[name]
                row[name] = interval.point
                row[f"{name}_low"] = interval.low
                row[f"{name}_high"] = interval.high
                row[f"{name}_stderr"] = interval.stderr
        except MBNLAError as e:
            logger.warning(f"Sweep point g={g:g} failed: {e}")
            row['error'] = f"{type(e).__name__}: {e}"
        return row

    def success_table(self, state: Optional[GaussianState] = None) -> pd.DataFrame:
        """Witnesses against success probability, one row per gain"""
        state = self.state if state is None else state
        gains = self.config.filter.gains
        alpha_c = self._cutoff(state, gains)
        record = self._sample(state) if self.config.sweep.mode == 'monte-carlo' else None
        with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
            rows = list(tqdm(executor.map(lambda g: self._success_point(state, record, g, alpha_c), gains),
                             total=len(gains), desc='success', disable=not self.progress))
        return pd.DataFrame(rows)

    def loss_table(self, state: Optional[GaussianState] = None) -> pd.DataFrame:
        """Analytic inseparability after lossy channels, with the perfect-EPR bound"""
        state = self.state if state is None else state
        rows = []
        for T in tqdm(self.config.sweep.transmissivities, desc='loss', disable=not self.progress):
            lossy = apply_loss(state, 'B', T)
            bound = perfect_epr_bound(T)
            for g in self.config.filter.gains:
                row = {'T': T, 'gain': g, 'perfect_epr_bound': bound, 'error': ''}
                try:
                    exact = criteria_from_state(analytic_nla(lossy, g))
                    row.update(duan_i=exact.duan_i, e_direct=exact.e_direct,
                               e_reverse=exact.e_reverse, margin=bound - exact.duan_i,
                               below_bound=bool(exact.duan_i < bound))
                except MBNLAError as e:
                    row['error'] = f"{type(e).__name__}: {e}"
                rows.append(row)
        return pd.DataFrame(rows)

    def keyrate_table(self) -> pd.DataFrame:
        """Key rate against gain for the key-rate channel configuration"""
        config = self.config
        source = config.build_keyrate_state()
        gains = config.sweep.keyrate_gains
        if config.sweep.mode == 'monte-carlo':
            alpha_c = self._cutoff(source, gains)
            reports = keyrate_sweep(self._sample(source), gains, config.beta_rec, 'monte-carlo',
                                    alpha_c=alpha_c, seed=config.seed, n_boot=config.n_boot,
                                    max_workers=config.workers)
        else:
            reports = keyrate_sweep(source, gains, config.beta_rec, 'analytic')
        rows = []
        for report in reports:
            row = report.to_dict()
            row['nu'] = ';'.join(f"{nu:.10g}" for nu in row['nu'])
            row['error'] = row['error'] or ''
            rows.append(row)
        return pd.DataFrame(rows)

    def sweep(self) -> Dict[str, Any]:
        """
        Produce the success-probability, lossy-channel and key-rate tables

        Returns:
            Saved sweep report with table paths
        """
        config = self.config
        self.log.log_stage('sweep', {'mode': config.sweep.mode, 'gains': list(config.filter.gains)})
        tables = {
            'success_table': self.success_table(),
            'loss_table': self.loss_table(),
            'keyrate_table': self.keyrate_table(),
        }
        paths = {}
        for name, frame in tables.items():
            paths[name] = str(self.reporter.save_frame(frame, self._default_path(name, '.csv')))

        loss_frame, keyrate_frame = tables['loss_table'], tables['keyrate_table']
        k = keyrate_frame['k'].to_numpy(dtype=float)
        finite = k[np.isfinite(k)]
        margin = loss_frame.get('margin')
        content = {
            'config': config.to_dict(),
            'tables': paths,
            'gain_bound': gain_bound(self.state),
            'keyrate_gain_bound': gain_bound(config.build_keyrate_state()),
            'points_below_perfect_epr': int((margin > 0).sum()) if margin is not None else 0,
            'best_margin_below_perfect_epr': float(margin.max()) if margin is not None else None,
            'keyrate_sign_changes': int(np.count_nonzero(np.diff(np.sign(finite)))),
            'failed_points': int((loss_frame['error'] != '').sum() + (keyrate_frame['error'] != '').sum()
                                 + (tables['success_table']['error'] != '').sum()),
        }
        report = self.reporter.build_report('sweep', content)
        json_path = self.reporter.save_report(report, self._default_path('sweep', '.json'))
        self.log.log_results('sweep', {key: value for key, value in content.items()
                                        if key not in ('config', 'tables')})
        return {'report': report, 'json': str(json_path), **paths}
