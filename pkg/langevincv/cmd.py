"""
Command line entry point
"""

import logging
from argparse import ArgumentParser, Namespace
from pathlib import Path

from basemkit.base_cmd import BaseCmd

from langevincv.config import ExperimentConfig, Preset
from langevincv.cv import Method, fit_chain
from langevincv.errors import ConfigError, LangevinCvError
from langevincv.experiment import Experiment, emit_oracle, load_chain, run_experiment, save_chain, write_json
from langevincv.oracle1d import poisson_table, truncation_sweep
from langevincv.version import Version

logger = logging.getLogger(__name__)


class LangevinCvCmd(BaseCmd):
    """Command Line Interface"""

    COMMANDS = ["sample", "fit", "estimate", "oracle1d", "experiment"]

    def getArgParser(self, description: str, version_msg) -> ArgumentParser:
        parser = super().getArgParser(description, version_msg)
        parser.add_argument("command", nargs="?", choices=self.COMMANDS, help="what to run")
        parser.add_argument(
            "preset",
            nargs="?",
            choices=[preset.value for preset in Preset],
            help="experiment preset (default: mixture1d, oracle_sweep for oracle1d)",
        )
        parser.add_argument("--config", dest="config", help="JSON or YAML experiment configuration file")
        parser.add_argument("--seed", type=int, help="base seed (unsigned 64 bit)")
        parser.add_argument("--gamma", type=float, help="step size for all algorithms")
        parser.add_argument("--algorithm", action="append", choices=["ULA", "MALA", "RWM"], help="algorithm to run (repeatable)")
        parser.add_argument("--burn-in", dest="burn_in", type=int, help="burn-in steps N")
        parser.add_argument("--samples", type=int, help="retained samples n")
        parser.add_argument("--replicas", type=int, help="independent chains per algorithm")
        parser.add_argument(
            "--basis",
            action="append",
            help="control basis: first, second or gaussian_kernels(p,lo,hi) (repeatable)",
        )
        parser.add_argument("--data", help="csv file of a binary regression dataset")
        parser.add_argument("--label-column", dest="label_column", help="name of the 0/1 column (default: y)")
        parser.add_argument("--intercept", action="store_true", help="prepend a constant covariate")
        parser.add_argument("--split-fit", dest="split_fit", action="store_true", help="fit on an independent chain")
        parser.add_argument("--coefficients", choices=["oracle", "fitted"], help="coefficient source of mixture1d")
        parser.add_argument("--boundaries", type=float, nargs="+", help="truncation boundaries of the oracle")
        parser.add_argument("--workers", type=int, help="threads for the replicas")
        parser.add_argument("--chain", help="chain.csv to fit or estimate instead of sampling")
        parser.add_argument("--out", dest="output_dir", help="output directory (default: results)")
        return parser

    def configure_logging(self, args: Namespace):
        if args.debug:
            level = logging.DEBUG
        elif getattr(args, "verbose", False):
            level = logging.INFO
        else:
            level = logging.WARNING
        logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
        logging.getLogger().setLevel(level)

    def get_config(self, args: Namespace) -> ExperimentConfig:
        """
        preset defaults, overridden by the config file, overridden by the flags
        """
        if args.config:
            config = ExperimentConfig.of_file(args.config)
            if args.preset and args.preset != config.preset:
                raise ConfigError(f"preset {args.preset} conflicts with {config.preset} of {args.config}")
        else:
            default = Preset.ORACLE_SWEEP.value if args.command == "oracle1d" else Preset.MIXTURE1D.value
            config = ExperimentConfig.of_preset(args.preset or default)
        overrides = {
            "seed": args.seed,
            "burn_in": args.burn_in,
            "samples": args.samples,
            "replicas": args.replicas,
            "bases": args.basis,
            "algorithms": args.algorithm,
            "data": args.data,
            "label_column": args.label_column,
            "coefficients": args.coefficients,
            "boundaries": args.boundaries,
            "workers": args.workers,
            "output_dir": args.output_dir,
        }
        if args.intercept:
            overrides["intercept"] = True
        if args.split_fit:
            overrides["split_fit"] = True
        config.update(overrides)
        if args.gamma is not None:
            config.set_gamma(args.gamma)
        return config.validate()

    def chain_of(self, experiment: Experiment, args: Namespace):
        if args.chain:
            chain = load_chain(args.chain)
        else:
            algorithm = experiment.config.algorithm_list[0]
            chain = experiment.sample(algorithm, experiment.config.seed)
        return chain

    def sample(self, config: ExperimentConfig, args: Namespace):
        experiment = Experiment(config)
        chain = self.chain_of(experiment, args)
        save_chain(chain, config.output_dir, experiment.potential.label)
        print(f"{chain.spec}: {chain.length} samples, {chain.accepted} accepted, written to {config.output_dir}")

    def fit(self, config: ExperimentConfig, args: Namespace):
        experiment = Experiment(config)
        chain = self.chain_of(experiment, args)
        fits = []
        for observable in experiment.observables:
            for basis in experiment.bases:
                for method in (Method.CV, Method.ZV):
                    cv_fit = fit_chain(chain, experiment.potential, basis, observable, method)
                    record = {"function": observable.name, "basis": basis.label}
                    record.update(cv_fit.as_dict())
                    fits.append(record)
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = write_json(out_dir / "fit.json", {"target": experiment.potential.label, "fits": fits})
        print(f"{len(fits)} fits written to {path}")

    def estimate(self, config: ExperimentConfig, args: Namespace):
        experiment = Experiment(config)
        chain = self.chain_of(experiment, args)
        outcome = experiment.evaluate_chain(chain)
        for record in outcome.records:
            print(
                f"{record.function:>16} {record.method:>6} estimate={record.estimate:.6g} "
                f"gamma*sigma2={record.gamma_sigma2:.6g}"
            )
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(out_dir / "estimate.json", {"estimates": [record.__dict__ for record in outcome.records]})

    def oracle1d(self, config: ExperimentConfig):
        experiment = Experiment(config)
        if experiment.potential.dim != 1:
            raise ConfigError(f"oracle1d needs a one dimensional preset, not {config.preset}")
        f = experiment.observables[0]
        reports = truncation_sweep(experiment.potential, experiment.bases[0], f, config.boundaries)
        table = poisson_table(experiment.potential, f, config.boundaries)
        emit_oracle(reports, config.output_dir, table)
        for report in reports:
            print(
                f"a={report.a:g} sigma2={report.sigma2_f:.2f} "
                f"theta*_1={report.theta_star[0]:.2f} theta_zv_1={report.theta_zv[0]:.2f}"
            )

    def experiment(self, config: ExperimentConfig):
        result = run_experiment(config)
        for row in result.rows:
            vrf = "" if row.vrf is None else f" VRF={row.vrf:.2f}"
            print(f"{row.algorithm} {row.function} {row.method}: gamma*sigma2={row.gamma_sigma2_mean:.4g}{vrf}")
        print(f"{len(result.files)} files written to {config.output_dir}")

    def handle_args(self, args: Namespace) -> bool:
        handled = super().handle_args(args)
        if handled:
            return True
        if not args.command:
            return False
        self.configure_logging(args)
        try:
            config = self.get_config(args)
            if args.command == "sample":
                self.sample(config, args)
            elif args.command == "fit":
                self.fit(config, args)
            elif args.command == "estimate":
                self.estimate(config, args)
            elif args.command == "oracle1d":
                self.oracle1d(config)
            else:
                self.experiment(config)
        except LangevinCvError as e:
            logger.error(str(e))
            self.exit_code = e.exit_code
        return True


def main(argv=None):
    """Main entry point."""
    exit_code = LangevinCvCmd.main(Version(), argv)
    return exit_code


if __name__ == "__main__":
    main()
