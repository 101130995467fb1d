"""Command-line entry point.

Examples
--------
Analyze a CSV file::

    dendi --mode analyze --input data.csv --outcome y --covariates bmi,hba1c \\
          --confounders sex --family binomial --out results/

Reproduce a simulation grid::

    dendi --mode simulate --scenario 6 --n 200,500,800 --sigma 1,1.5,2 \\
          --replications 100 --seed 1 --out sim/
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .config import MODIFIER_POLICIES, DendiConfig
from .engine import run_dendi
from .exceptions import DendiError
from .io import (curve_rows, load_csv, report_document, write_report, write_tsv)
from .simulation import LABELS, SCENARIOS, run_grid

logger = logging.getLogger("dendi")

FAMILIES = ("gaussian", "binomial", "poisson")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "analyze"
    input: str = None
    outcome: str = None
    covariates: list = field(default_factory=list)
    confounders: list = field(default_factory=list)
    family: str = "gaussian"
    grid_size: int = 9
    min_node: int = 10
    se_multiplier: float = 1.0
    candidate_modifiers: str = "all"
    scenario: int = None
    n: list = field(default_factory=lambda: [200, 500, 800])
    sigma: list = field(default_factory=lambda: [1.0, 1.5, 2.0])
    replications: int = 100
    seed: int = 0
    out: str = "."
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    def validate(self) -> "RunConfig":
        if self.mode not in ("analyze", "simulate"):
            raise UsageError("--mode must be 'analyze' or 'simulate'")
        if self.family not in FAMILIES:
            raise UsageError(f"--family must be one of {FAMILIES}")
        if self.candidate_modifiers not in MODIFIER_POLICIES:
            raise UsageError(f"candidate_modifiers must be one of {MODIFIER_POLICIES}")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        if self.mode == "analyze":
            if not self.input or not self.outcome or not self.covariates:
                raise UsageError("analyze needs --input, --outcome and --covariates")
            names = [self.outcome, *self.covariates, *self.confounders]
            if len(set(names)) != len(names):
                raise UsageError("column names must be distinct")
        else:
            if self.scenario not in SCENARIOS:
                raise UsageError(f"--scenario must be one of {SCENARIOS}")
            if self.replications < 1:
                raise UsageError("--replications must be >= 1")
            if not self.n or any(v < 1 for v in self.n):
                raise UsageError("--n needs positive sample sizes")
            if not self.sigma or any(not v > 0 for v in self.sigma):
                raise UsageError("--sigma needs positive values")
        return self

    def dendi_config(self) -> DendiConfig:
        return DendiConfig(grid_size=self.grid_size, min_node=self.min_node,
                           se_multiplier=self.se_multiplier,
                           family=self.family if self.mode == "analyze" else None,
                           candidate_modifiers=self.candidate_modifiers)

    def echo(self) -> dict:
        doc = dataclasses.asdict(self)
        doc.pop("workers")
        return doc


def _split_list(cast):
    def parse(text):
        return [cast(v.strip()) for v in text.split(",") if v.strip()]
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dendi", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="JSON file with defaults for any option below")
    p.add_argument("--mode", choices=("analyze", "simulate"))
    p.add_argument("--input", help="CSV file with a header row (analyze)")
    p.add_argument("--outcome", help="outcome column (analyze)")
    p.add_argument("--covariates", type=_split_list(str), help="comma-separated columns")
    p.add_argument("--confounders", type=_split_list(str), help="comma-separated columns")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--min-node", dest="min_node", type=int)
    p.add_argument("--se-multiplier", dest="se_multiplier", type=float)
    p.add_argument("--candidate-modifiers", dest="candidate_modifiers",
                   choices=MODIFIER_POLICIES)
    p.add_argument("--scenario", type=int, help="simulation scenario 1-6 (simulate)")
    p.add_argument("--n", type=_split_list(int), help="comma-separated sample sizes")
    p.add_argument("--sigma", type=_split_list(float), help="comma-separated error SDs")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_config(argv=None) -> RunConfig:
    return config_from_args(build_parser().parse_args(argv))


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            values.update(json.load(fh))
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for name in known:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return RunConfig(**values).validate()


def cmd_analyze(cfg: RunConfig) -> int:
    start = time.perf_counter()
    data = load_csv(cfg.input, cfg.outcome, cfg.covariates, cfg.confounders, cfg.family)
    dcfg = dataclasses.replace(cfg.dendi_config(), workers=cfg.workers)
    report = run_dendi(data, dcfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tsv(out / "curves.tsv", ("covariate", "x", "eta", "mu"), curve_rows(report))
    summary = report.summary() + "\n"
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    doc = report_document(report, cfg.echo(), time.perf_counter() - start)
    write_report(doc, out / "report.json")
    print(summary, end="")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    start = time.perf_counter()
    result = run_grid(cfg.scenario, cfg.n, cfg.sigma, cfg.replications,
                      cfg.dendi_config(), cfg.seed, cfg.workers)
    table = result.detection
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    cell_names = [f"n={n},sigma={s:g}" for n, s in table.cells]
    write_tsv(out / "detection.tsv", ("target", *cell_names),
              [(t, *table.values[i]) for i, t in enumerate(table.targets)])

    names = [f"x{j + 1}" for j in range(len(result.runs[table.cells[0]][0].labels))]
    label_rows, split_rows = [], []
    for n, s in table.cells:
        cell = (n, s)
        for (j, lab, k), count in result.directional_counts(cell).items():
            label_rows.append((n, s, names[j], lab, "" if k is None else names[k], count,
                               count / table.R))
        for j, name in enumerate(names):
            for lab in LABELS[2:]:
                stats = result.split_summary(cell, j, lab)
                if stats["count"]:
                    split_rows.append((n, s, name, lab, stats["count"], stats["mean"],
                                       stats["sd"], stats["min"], stats["q1"],
                                       stats["median"], stats["q3"], stats["max"]))
    write_tsv(out / "labels.tsv",
              ("n", "sigma", "covariate", "label", "partner", "count", "proportion"),
              label_rows)
    write_tsv(out / "splits.tsv",
              ("n", "sigma", "covariate", "label", "count", "mean", "sd", "min", "q1",
               "median", "q3", "max"), split_rows)
    doc = {
        "config": cfg.echo(),
        "detection": {"targets": list(table.targets),
                      "cells": [list(c) for c in table.cells],
                      "values": table.values.tolist(), "replications": table.R},
        "wall_time_seconds": time.perf_counter() - start,
    }
    write_report(doc, out / "simulation.json")
    for i, t in enumerate(table.targets):
        print(t, " ".join(f"{c}:{v:.2f}" for c, v in zip(cell_names, table.values[i])))
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.INFO)
    try:
        cfg = config_from_args(args)
    except (UsageError, ValueError, TypeError, OSError) as exc:
        print(f"dendi: usage error: {exc}", file=sys.stderr)
        return 2
    try:
        if cfg.mode == "analyze":
            return cmd_analyze(cfg)
        return cmd_simulate(cfg)
    except (DendiError, ValueError, OSError) as exc:
        print(f"dendi: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
