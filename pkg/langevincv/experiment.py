"""
Created on 2026-10-18

Experiment orchestration: targets, replicas, fits, estimates and result files.

@author: wf
"""

import csv
import json
import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from itertools import repeat
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from basemkit.yamlable import lod_storable

from langevincv.bases import BasisKind, ControlBasis, basis_from_spec
from langevincv.config import ExperimentConfig, Preset
from langevincv.cv import CvFit, Method, corrected_series, fit_chain, fit_from_oracle
from langevincv.errors import DataError, DivergenceError, IngestionError
from langevincv.oracle1d import OracleReport, oracle_report, poisson_table, truncation_sweep
from langevincv.potentials import (
    Potential,
    RegressionModel,
    find_mode,
    gaussian_potential,
    load_regression_csv,
    mixture1d_potential,
    regression_potential,
    synthetic_regression_data,
)
from langevincv.samplers import (
    Algorithm,
    ChainOutput,
    KernelSpec,
    acceptance_rate,
    replica_seed,
    run_chain,
    splitmix64,
)
from langevincv.testfunctions import Observable, coordinate, mixture_observable, regression_observables
from langevincv.variance import autocovariance, spectral_variance
from langevincv.version import Version

logger = logging.getLogger(__name__)

# boundary of the oracle used for the one dimensional experiment
MIXTURE_BOUNDARY = 5.0


@lod_storable
class ResultRow:
    """
    replica statistics of one (algorithm, test function, method) combination

    Attributes:
        algorithm: ULA, MALA or RWM
        function: test function id
        method: plain, CV, ZV or with basis suffix such as CV-2
        basis: basis label, empty for plain
        gamma: step size
        replicas: number of replicas
        estimate_mean: mean over replicas of the estimate of pi(f)
        estimate_sd: standard deviation over replicas of the estimate
        gamma_sigma2_mean: mean of gamma times the spectral variance
        gamma_sigma2_sd: standard deviation of gamma times the spectral variance
        sigma2_mean: mean of the raw spectral variance
        sigma2_sd: standard deviation of the raw spectral variance
        vrf: sigma2_mean of plain divided by sigma2_mean of this method
        acceptance: mean acceptance rate
    """

    algorithm: str
    function: str
    method: str
    basis: str
    gamma: float
    replicas: int
    estimate_mean: float
    estimate_sd: float
    gamma_sigma2_mean: float
    gamma_sigma2_sd: float
    sigma2_mean: float
    sigma2_sd: float
    vrf: Optional[float]
    acceptance: float


@dataclass
class ReplicaRecord:
    """
    the result of one method on one replica
    """

    algorithm: str
    replica: int
    seed: int
    accepted: int
    acceptance: float
    function: str
    method: str
    basis: str
    estimate: float
    sigma2: float
    gamma_sigma2: float
    negative_sigma2: bool
    theta: Optional[List[float]] = None


@dataclass
class ReplicaOutcome:
    records: List[ReplicaRecord]
    autocov: Dict[Tuple[str, str], np.ndarray] = field(default_factory=dict)


@dataclass
class ExperimentResult:
    """
    everything an experiment produced
    """

    config: ExperimentConfig
    rows: List[ResultRow]
    records: List[ReplicaRecord]
    oracle: List[OracleReport] = field(default_factory=list)
    autocov: Dict[Tuple[str, str, str], np.ndarray] = field(default_factory=dict)
    poisson: Optional[Tuple[np.ndarray, Dict[float, np.ndarray]]] = None
    files: List[Path] = field(default_factory=list)


def method_label(method: Method, basis: ControlBasis, multiple: bool) -> str:
    """
    CV / ZV for a single basis, CV-1 / ZV-2 style labels when several bases are compared
    """
    if not multiple:
        return method.value
    suffixes = {BasisKind.FIRST_ORDER: "1", BasisKind.SECOND_ORDER: "2"}
    suffix = suffixes.get(basis.kind, basis.label)
    return f"{method.value}-{suffix}"


class Experiment:
    """
    the target, test functions and bases of a configuration
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config.validate()
        self.preset = config.preset_kind
        self.oracles: Dict[str, OracleReport] = {}
        self.potential, self.x0 = self._target()
        self.observables = self._observables()
        self.bases = [basis_from_spec(spec, self.potential.dim) for spec in config.bases]
        self.multiple = len(self.bases) > 1

    def _target(self) -> Tuple[Potential, np.ndarray]:
        config = self.config
        if self.preset.is_regression:
            model = RegressionModel(self.preset.value)
            if config.data:
                data = load_regression_csv(
                    config.data,
                    label_column=config.label_column,
                    intercept=config.intercept,
                    prior_variance=config.prior_variance,
                )
            else:
                data = synthetic_regression_data(
                    config.synthetic_n,
                    config.synthetic_dim,
                    config.synthetic_seed,
                    model=model,
                    prior_variance=config.prior_variance,
                    intercept=config.intercept,
                )
            potential = regression_potential(data, model)
            x0 = find_mode(potential, np.zeros(potential.dim))
            logger.info(f"{potential.label}: posterior mode {np.array2string(x0, precision=4)}")
        elif self.preset == Preset.GAUSSIAN_SANITY:
            potential = gaussian_potential(config.dim)
            x0 = np.zeros(config.dim)
        else:
            potential = mixture1d_potential()
            x0 = np.zeros(1)
        return potential, x0

    def _observables(self) -> List[Observable]:
        if self.preset.is_regression:
            observables = regression_observables(self.potential.dim)
        elif self.preset == Preset.GAUSSIAN_SANITY:
            observables = [coordinate(1, self.potential.dim)]
        else:
            observables = [mixture_observable()]
        return observables

    def kernel(self, algorithm: Algorithm) -> KernelSpec:
        return KernelSpec(algorithm, self.config.gamma_of(algorithm))

    def oracle_fits(self, basis: ControlBasis) -> Dict[Method, CvFit]:
        """
        exact coefficients of the one dimensional target
        """
        if basis.label not in self.oracles:
            self.oracles[basis.label] = oracle_report(self.potential, basis, self.observables[0], a=MIXTURE_BOUNDARY)
        report = self.oracles[basis.label]
        fits = {
            Method.CV: fit_from_oracle(report.theta_star, report.H, report.b, report.pi_f, Method.CV),
            Method.ZV: fit_from_oracle(report.theta_zv, report.H_zv, report.b_zv, report.pi_f, Method.ZV),
        }
        return fits

    def sample(self, algorithm: Algorithm, seed: int) -> ChainOutput:
        chain = run_chain(self.potential, self.kernel(algorithm), self.x0, self.config.burn_in, self.config.samples, seed)
        return chain

    def fits_for(self, chain: ChainOutput, observable: Observable, basis: ControlBasis) -> Dict[Method, CvFit]:
        if self.config.coefficients == "oracle":
            fits = self.oracle_fits(basis)
        else:
            fits = {method: fit_chain(chain, self.potential, basis, observable, method) for method in (Method.CV, Method.ZV)}
        return fits

    def _record(self, chain: ChainOutput, algorithm: Algorithm, function: str, method: str, basis: str, series: np.ndarray, theta=None) -> ReplicaRecord:
        spectral = spectral_variance(series)
        gamma = chain.spec.gamma
        record = ReplicaRecord(
            algorithm=algorithm.value,
            replica=chain.replica,
            seed=chain.seed,
            accepted=chain.accepted,
            acceptance=acceptance_rate(chain),
            function=function,
            method=method,
            basis=basis,
            estimate=math.fsum(series) / series.shape[0],
            sigma2=spectral.sigma2,
            gamma_sigma2=gamma * spectral.sigma2,
            negative_sigma2=spectral.negative,
            theta=None if theta is None else [float(t) for t in theta],
        )
        return record

    def run_replica(self, algorithm: Algorithm, replica: int) -> ReplicaOutcome:
        """
        sample one replica chain and evaluate every test function and method on it
        """
        config = self.config
        try:
            chain = self.sample(algorithm, replica_seed(config.seed, replica))
            chain.replica = replica
            fit_source = chain
            if config.split_fit and config.coefficients == "fitted":
                fit_source = self.sample(algorithm, replica_seed(splitmix64(config.seed), replica))
        except DivergenceError as e:
            raise e.for_replica(replica)
        outcome = self.evaluate_chain(chain, fit_source)
        return outcome

    def evaluate_chain(self, chain: ChainOutput, fit_source: Optional[ChainOutput] = None) -> ReplicaOutcome:
        """
        plain, CV and ZV estimates and spectral variances of every test function on a chain
        """
        if fit_source is None:
            fit_source = chain
        algorithm = chain.spec.algorithm
        lags = min(self.config.autocov_lags, chain.length) - 1
        outcome = ReplicaOutcome(records=[])
        for observable in self.observables:
            plain = np.asarray(observable(chain.samples), dtype=float)
            outcome.records.append(self._record(chain, algorithm, observable.name, Method.PLAIN.value, "", plain))
            if self.preset == Preset.MIXTURE1D:
                outcome.autocov[(observable.name, Method.PLAIN.value)] = autocovariance(plain, lags)
            for basis in self.bases:
                fits = self.fits_for(fit_source, observable, basis)
                for method, cv_fit in fits.items():
                    label = method_label(method, basis, self.multiple)
                    series = corrected_series(chain, self.potential, basis, cv_fit, observable)
                    record = self._record(chain, algorithm, observable.name, label, basis.label, series, cv_fit.theta)
                    outcome.records.append(record)
                    if self.preset == Preset.MIXTURE1D:
                        outcome.autocov[(observable.name, label)] = autocovariance(series, lags)
        return outcome

    def run_algorithm(self, algorithm: Algorithm, executor: Optional[Executor] = None) -> List[ReplicaOutcome]:
        """
        run all replicas of one algorithm, in the worker processes of executor if given
        """
        replicas = range(self.config.replicas)
        logger.info(f"{self.preset.value}: {self.config.replicas} replicas of {self.kernel(algorithm)}")
        if executor is None:
            outcomes = [self.run_replica(algorithm, r) for r in replicas]
        else:
            outcomes = list(executor.map(_run_worker_replica, repeat(algorithm), replicas))
        return outcomes

    def worker_pool(self):
        """
        a process pool for the replicas or a null context for sequential runs

        the kernels step in python loops, so threads would serialize on the GIL
        """
        if self.config.workers == 1 or self.config.replicas == 1:
            return nullcontext()
        pool = ProcessPoolExecutor(max_workers=self.config.workers, initializer=_init_worker, initargs=(self.config,))
        return pool

    def run(self) -> ExperimentResult:
        """
        run the configured experiment without writing files
        """
        if self.preset == Preset.ORACLE_SWEEP:
            return self.run_oracle_sweep()
        if self.preset == Preset.MIXTURE1D and self.config.coefficients == "oracle":
            for basis in self.bases:
                self.oracle_fits(basis)
        records: List[ReplicaRecord] = []
        autocov = {}
        with self.worker_pool() as executor:
            for algorithm in self.config.algorithm_list:
                outcomes = self.run_algorithm(algorithm, executor)
                for outcome in outcomes:
                    records.extend(outcome.records)
                keys = outcomes[0].autocov.keys()
                for function, method in keys:
                    mean = np.mean([outcome.autocov[(function, method)] for outcome in outcomes], axis=0)
                    autocov[(algorithm.value, function, method)] = mean
        rows = aggregate(records, self.config)
        oracle = list(self.oracles.values())
        result = ExperimentResult(self.config, rows, records, oracle=oracle, autocov=autocov)
        return result

    def run_oracle_sweep(self) -> ExperimentResult:
        f = self.observables[0]
        reports = truncation_sweep(self.potential, self.bases[0], f, self.config.boundaries)
        table = poisson_table(self.potential, f, self.config.boundaries)
        result = ExperimentResult(self.config, [], [], oracle=reports, poisson=table)
        return result


# the experiment of a replica worker process, built once by the pool initializer
_worker_experiment: Optional[Experiment] = None


def _init_worker(config: ExperimentConfig):
    global _worker_experiment
    _worker_experiment = Experiment(config)


def _run_worker_replica(algorithm: Algorithm, replica: int) -> ReplicaOutcome:
    return _worker_experiment.run_replica(algorithm, replica)


def _mean_sd(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=float)
    mean = float(np.mean(array))
    sd = float(np.std(array, ddof=1)) if array.shape[0] > 1 else 0.0
    return mean, sd


def aggregate(records: List[ReplicaRecord], config: ExperimentConfig) -> List[ResultRow]:
    """
    one row per (algorithm, function, method) in order of first appearance
    """
    groups: Dict[Tuple[str, str, str], List[ReplicaRecord]] = {}
    for record in records:
        groups.setdefault((record.algorithm, record.function, record.method), []).append(record)
    plain_sigma2 = {}
    rows = []
    for (algorithm, function, method), group in groups.items():
        estimate_mean, estimate_sd = _mean_sd([r.estimate for r in group])
        gs_mean, gs_sd = _mean_sd([r.gamma_sigma2 for r in group])
        s_mean, s_sd = _mean_sd([r.sigma2 for r in group])
        if method == Method.PLAIN.value:
            plain_sigma2[(algorithm, function)] = s_mean
        plain = plain_sigma2.get((algorithm, function))
        vrf = plain / s_mean if plain is not None and plain > 0 and s_mean > 0 else None
        row = ResultRow(
            algorithm=algorithm,
            function=function,
            method=method,
            basis=group[0].basis,
            gamma=config.gamma_of(Algorithm.of_name(algorithm)),
            replicas=len(group),
            estimate_mean=estimate_mean,
            estimate_sd=estimate_sd,
            gamma_sigma2_mean=gs_mean,
            gamma_sigma2_sd=gs_sd,
            sigma2_mean=s_mean,
            sigma2_sd=s_sd,
            vrf=vrf,
            acceptance=float(np.mean([r.acceptance for r in group])),
        )
        rows.append(row)
    return rows


ROW_COLUMNS = [
    "algorithm",
    "function",
    "method",
    "basis",
    "gamma",
    "replicas",
    "estimate_mean",
    "estimate_sd",
    "gamma_sigma2_mean",
    "gamma_sigma2_sd",
    "sigma2_mean",
    "sigma2_sd",
    "vrf",
    "acceptance",
]


def _cell(value) -> str:
    if value is None:
        cell = ""
    elif isinstance(value, float):
        cell = "" if math.isnan(value) else repr(value)
    else:
        cell = str(value)
    return cell


def write_csv(path: Path, header: List[str], rows: List[list]) -> Path:
    """
    comma separated with header row, '.' decimals and '\\n' line endings
    """
    with open(path, "w", encoding="utf-8", newline="") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    logger.info(f"wrote {path}")
    return path


def _jsonable(value):
    if isinstance(value, np.ndarray):
        value = value.tolist()
    elif isinstance(value, np.generic):
        value = value.item()
    elif isinstance(value, dict):
        value = {str(k): _jsonable(v) for k, v in value.items()}
    elif isinstance(value, (list, tuple)):
        value = [_jsonable(v) for v in value]
    elif isinstance(value, float) and not math.isfinite(value):
        value = None
    return value


def write_json(path: Path, document: dict) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as json_file:
        json.dump(_jsonable(document), json_file, indent=2)
        json_file.write("\n")
    logger.info(f"wrote {path}")
    return path


def emit_results(
    rows: List[ResultRow],
    out_dir: str,
    records: Optional[List[ReplicaRecord]] = None,
    config: Optional[ExperimentConfig] = None,
    extras: Optional[dict] = None,
) -> List[Path]:
    """
    write results.csv (one line per row) and results.json (rows, replica detail and config echo)

    Raises:
        DataError: for an empty row list
        OSError: if the directory is not writable
    """
    if not rows:
        raise DataError("no result rows to emit")
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    table = [[getattr(row, column) for column in ROW_COLUMNS] for row in rows]
    files = [write_csv(out_path / "results.csv", ROW_COLUMNS, table)]
    document = {
        "timestamp": datetime.now().isoformat(timespec="seconds"),
        "name": Version.name,
        "version": Version.version,
        "config": config.to_dict() if config is not None else None,
        "rows": [{column: getattr(row, column) for column in ROW_COLUMNS} for row in rows],
        "replicas": [record.__dict__ for record in records or []],
    }
    if extras:
        document.update(extras)
    files.append(write_json(out_path / "results.json", document))
    return files


ORACLE_COLUMNS = ["a", "mass", "pi_f", "sigma2_f", "theta_star_1", "theta_zv_1", "sigma2_cv", "sigma2_zv", "nodes", "converged"]


def emit_oracle(reports: List[OracleReport], out_dir: str, poisson=None) -> List[Path]:
    """
    write oracle.json, the truncation table oracle.csv and optionally poisson_derivative.csv
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    table = [
        [r.a, r.mass, r.pi_f, r.sigma2_f, float(r.theta_star[0]), float(r.theta_zv[0]), r.sigma2_cv, r.sigma2_zv, r.nodes, r.converged]
        for r in reports
    ]
    files = [
        write_json(out_path / "oracle.json", {"reports": [r.as_dict() for r in reports]}),
        write_csv(out_path / "oracle.csv", ORACLE_COLUMNS, table),
    ]
    if poisson is not None:
        x, columns = poisson
        header = ["x"] + [f"a={a:g}" for a in columns]
        lines = [[float(x[i])] + [float(columns[a][i]) for a in columns] for i in range(x.shape[0])]
        files.append(write_csv(out_path / "poisson_derivative.csv", header, lines))
    return files


def emit_autocov(autocov: Dict[Tuple[str, str, str], np.ndarray], out_dir: str) -> Path:
    lines = []
    for (algorithm, function, method), omega in autocov.items():
        lines.extend([[algorithm, function, method, lag, float(value)] for lag, value in enumerate(omega)])
    return write_csv(Path(out_dir) / "autocovariance.csv", ["algorithm", "function", "method", "lag", "omega"], lines)


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """
    run the experiment of the configuration and write its result files to config.output_dir
    """
    experiment = Experiment(config)
    result = experiment.run()
    if not write:
        return result
    out_dir = config.output_dir
    if experiment.preset == Preset.ORACLE_SWEEP:
        result.files = emit_oracle(result.oracle, out_dir, result.poisson)
        document = {
            "timestamp": datetime.now().isoformat(timespec="seconds"),
            "name": Version.name,
            "version": Version.version,
            "config": config.to_dict(),
            "oracle": [report.as_dict() for report in result.oracle],
        }
        result.files.append(write_json(Path(out_dir) / "results.json", document))
    else:
        extras = {"oracle": [report.as_dict() for report in result.oracle]} if result.oracle else None
        result.files = emit_results(result.rows, out_dir, result.records, config, extras)
        if result.oracle:
            result.files.extend(emit_oracle(result.oracle, out_dir))
        if result.autocov:
            result.files.append(emit_autocov(result.autocov, out_dir))
    return result


CHAIN_META = "chain.json"
CHAIN_CSV = "chain.csv"


def save_chain(chain: ChainOutput, out_dir: str, label: str) -> List[Path]:
    """
    write the samples to chain.csv and the provenance to chain.json
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    header = [f"x{i + 1}" for i in range(chain.dim)]
    files = [write_csv(out_path / CHAIN_CSV, header, [[float(v) for v in row] for row in chain.samples])]
    meta = {
        "target": label,
        "algorithm": chain.spec.algorithm.value,
        "gamma": chain.spec.gamma,
        "seed": chain.seed,
        "burn_in": chain.burn_in,
        "length": chain.length,
        "accepted": chain.accepted,
        "acceptance": acceptance_rate(chain),
        "x0": chain.x0,
    }
    files.append(write_json(out_path / CHAIN_META, meta))
    return files


def load_chain(path: str) -> ChainOutput:
    """
    read a chain written by save_chain from its csv file, metadata from chain.json next to it
    """
    csv_path = Path(path)
    if not csv_path.is_file():
        raise IngestionError(f"chain file {csv_path} not found")
    with open(csv_path, encoding="utf-8", newline="") as csv_file:
        reader = csv.reader(csv_file)
        header = next(reader, None)
        if not header:
            raise IngestionError(f"{csv_path} has no header row")
        rows = []
        for row_index, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise IngestionError(f"expected {len(header)} fields but found {len(row)}", row=row_index)
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as e:
                raise IngestionError(f"not a number: {e}", row=row_index)
    if not rows:
        raise IngestionError(f"{csv_path} has no samples")
    samples = np.asarray(rows, dtype=float)
    meta_path = csv_path.parent / CHAIN_META
    meta = {}
    if meta_path.is_file():
        with open(meta_path, encoding="utf-8") as meta_file:
            meta = json.load(meta_file)
    spec = KernelSpec(Algorithm.of_name(meta.get("algorithm", "ULA")), float(meta.get("gamma", 1.0)))
    chain = ChainOutput(
        samples=samples,
        accepted=int(meta.get("accepted", samples.shape[0])),
        seed=int(meta.get("seed", 0)),
        spec=spec,
        burn_in=int(meta.get("burn_in", 0)),
        length=samples.shape[0],
        x0=np.asarray(meta.get("x0", samples[0]), dtype=float),
    )
    return chain
