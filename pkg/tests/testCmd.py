"""
Created on 2026-10-18

@author: wf
"""

import csv
import json
import os
import tempfile

from basemkit.basetest import Basetest

from langevincv.cmd import main


class TestCmd(Basetest):
    """
    test the command line
    """

    def setUp(self, debug=False, profile=True):
        Basetest.setUp(self, debug=debug, profile=profile)
        self.temp_dir = tempfile.TemporaryDirectory()
        self.out_dir = self.temp_dir.name

    def tearDown(self):
        self.temp_dir.cleanup()
        Basetest.tearDown(self)

    def run_cmd(self, argv) -> int:
        """
        run the command line and return its exit code
        """
        try:
            exit_code = main(argv)
        except SystemExit as e:
            exit_code = e.code
        if exit_code is None:
            exit_code = 0
        return exit_code

    def test_oracle1d(self):
        exit_code = self.run_cmd(["oracle1d", "--boundaries", "3", "4", "--out", self.out_dir])
        self.assertEqual(0, exit_code)
        with open(os.path.join(self.out_dir, "oracle.csv"), newline="") as csv_file:
            lines = list(csv.reader(csv_file))
        self.assertEqual(3, len(lines))
        self.assertEqual("a", lines[0][0])

    def test_sample_fit_estimate(self):
        chain_dir = os.path.join(self.out_dir, "chain")
        args = ["gaussian_sanity", "--algorithm", "MALA", "--gamma", "0.5", "--burn-in", "10", "--samples", "400"]
        self.assertEqual(0, self.run_cmd(["sample"] + args + ["--out", chain_dir]))
        chain_csv = os.path.join(chain_dir, "chain.csv")
        self.assertTrue(os.path.isfile(chain_csv))
        self.assertEqual(0, self.run_cmd(["fit", "gaussian_sanity", "--chain", chain_csv, "--out", self.out_dir]))
        with open(os.path.join(self.out_dir, "fit.json")) as json_file:
            fits = json.load(json_file)["fits"]
        self.assertEqual(["CV", "ZV"], [fit["method"] for fit in fits])
        self.assertEqual(400, fits[0]["m"])
        self.assertEqual(0, self.run_cmd(["estimate", "gaussian_sanity", "--chain", chain_csv, "--out", self.out_dir]))
        with open(os.path.join(self.out_dir, "estimate.json")) as json_file:
            estimates = json.load(json_file)["estimates"]
        self.assertEqual(["plain", "CV", "ZV"], [estimate["method"] for estimate in estimates])

    def test_regression_experiment(self):
        argv = ["experiment", "logistic", "--algorithm", "MALA", "--burn-in", "100", "--samples", "200", "--replicas", "1", "--out", self.out_dir]
        self.assertEqual(0, self.run_cmd(argv))

    def test_experiment(self):
        argv = [
            "experiment",
            "gaussian_sanity",
            "--algorithm",
            "ULA",
            "--samples",
            "1000",
            "--replicas",
            "2",
            "--workers",
            "1",
            "--out",
            self.out_dir,
        ]
        self.assertEqual(0, self.run_cmd(argv))
        self.assertTrue(os.path.isfile(os.path.join(self.out_dir, "results.csv")))

    def test_exit_codes(self):
        """
        configuration errors give 2, data errors 3 and divergence 4
        """
        self.assertEqual(2, self.run_cmd(["experiment", "--samples", "2", "--out", self.out_dir]))
        self.assertEqual(2, self.run_cmd(["experiment", "--basis", "third", "--out", self.out_dir]))
        missing = os.path.join(self.out_dir, "missing.csv")
        self.assertEqual(3, self.run_cmd(["experiment", "logistic", "--data", missing, "--out", self.out_dir]))
        argv = ["sample", "gaussian_sanity", "--algorithm", "ULA", "--gamma", "5", "--samples", "2000", "--out", self.out_dir]
        self.assertEqual(4, self.run_cmd(argv))
