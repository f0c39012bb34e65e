"""Command line entry point: ``weaklab <subcommand> ...``.

Exit codes: 0 when every invariant check passes, 2 on an invariant
violation (details in the manifest), 1 on input or I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, config, experiments, linops, reporting, weakpair
from .exceptions import ConfigError, WeakLabError

log = logging.getLogger("weaklab")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VIOLATION = 2


def versions() -> dict:
    return {
        "weaklab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


class Run:
    """Collects files, checks and metadata for one invocation and writes the manifest."""

    def __init__(self, command, out_dir, cfg=None, seed=None, extra=None):
        self.command = command
        self.out = Path(out_dir)
        self.cfg = cfg
        self.seed = seed
        self.extra = extra or {}
        self.files = []
        self.checks = []
        self.sections = {}
        self.t0 = time.perf_counter()

    def path(self, *parts) -> Path:
        p = self.out.joinpath(*parts)
        self.files.append(p.relative_to(self.out).as_posix())
        return p

    def add_checks(self, section, checks):
        self.checks += [(section, c) for c in checks]

    @property
    def passed(self) -> bool:
        return all(c.passed for _, c in self.checks)

    def manifest(self) -> dict:
        return {
            "command": self.command,
            "config": None if self.cfg is None else self.cfg.to_dict(),
            "arguments": self.extra,
            "seed": self.seed,
            "versions": versions(),
            "knobs": experiments.knobs(self.cfg),
            "sections": self.sections,
            "checks": [{"section": s, **c.as_dict()} for s, c in self.checks],
            "failed_checks": [f"{s}:{c.name}" for s, c in self.checks if not c.passed],
            "passed": self.passed,
            "files": sorted(self.files),
            "timing": {"wall_time_s": time.perf_counter() - self.t0},
        }

    def finish(self) -> int:
        reporting.write_json(self.out / "manifest.json", self.manifest())
        status = EXIT_OK if self.passed else EXIT_VIOLATION
        if status:
            for s, c in self.checks:
                if not c.passed:
                    log.error("invariant violated: %s:%s value=%.3e limit=%.3e", s, c.name, c.value, c.limit)
        log.info("%s: %s, manifest at %s", self.command, "ok" if status == EXIT_OK else "FAILED", self.out / "manifest.json")
        return status


# -- subcommand bodies (write into run.out) ---------------------------------------------------


def do_gamma(run: Run, n, n1=None, write_matrices=True, sub="."):
    out, mats, checks = experiments.gamma_report(n, n1)
    if write_matrices:
        for name, M in mats.items():
            linops.write_matrix(run.path(sub, f"{name}.txt"), M)
    reporting.write_json(run.path(sub, "gamma_report.json"), out)
    run.add_checks("gamma", checks)
    run.sections["gamma"] = {"passed": experiments.all_passed(checks)}


def do_lattice(run: Run, cfg, models, sub="."):
    rows, detail, checks = experiments.lattice_report(cfg, models)
    reporting.write_csv(
        run.path(sub, "lattice_report.csv"),
        experiments.LATTICE_COLUMNS,
        [[r[c] for c in experiments.LATTICE_COLUMNS] for r in rows],
    )
    reporting.write_json(run.path(sub, "lattice_report.json"), detail)
    if cfg.emit_matrices:
        for m in models:
            if m.dim > experiments.EMIT_MAX_DIM:
                log.warning("skipping matrix files for N=%d (dim %d > %d)", m.lattice.N, m.dim, experiments.EMIT_MAX_DIM)
                continue
            for name in ("D", "Gamma1", "D1", "D2"):
                linops.write_matrix(run.path(sub, "matrices", f"N{m.lattice.N}_{name}.txt"), m.dense(name))
    run.add_checks("lattice", checks)
    run.sections["lattice"] = {"passed": experiments.all_passed(checks), "observations": detail["observations"]}


def _write_tables(run, sub, tables):
    for name, t in sorted(tables.items()):
        reporting.write_csv(run.path(sub, f"{name}.csv"), ("param", "value"), t.rows())


def do_weakpair(run: Run, pair, seed, lambda0, grid_count, mu, sub="."):
    summary, tables, checks = experiments.weakpair_report(pair, seed, lambda0, grid_count, mu)
    _write_tables(run, sub, tables)
    reporting.write_json(run.path(sub, "weakpair_summary.json"), summary)
    run.add_checks("weakpair", checks)
    run.sections["weakpair"] = {"passed": experiments.all_passed(checks), "lambda0": summary["lambda0"]}


def do_wick_matrix(run: Run, D, sub="."):
    out, _, checks = experiments.wick_report(D)
    reporting.write_json(run.path(sub, "wick_report.json"), out)
    run.add_checks("wick", checks)
    run.sections["wick"] = {"passed": experiments.all_passed(checks)}


def do_wick_lattice(run: Run, cfg, models, sub="."):
    out, checks = experiments.wick_lattice_report(cfg, models)
    reporting.write_json(run.path(sub, "wick_report.json"), out)
    run.add_checks("wick", checks)
    run.sections["wick"] = {"passed": experiments.all_passed(checks), "observations": out["observations"]}


def lattice_pair(cfg, model=None):
    m = model or next(experiments.build_models(cfg.replace(N_list=[cfg.N_list[0]])))
    return weakpair.OperatorPair(m.dense("D1"), m.dense("D2"), weakpair.ANTICOMMUTATOR)


# -- argument handling ----------------------------------------------------------------------------


def _lambda0(text):
    if text == "auto":
        return "auto"
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive number, got {text!r}") from None
    if not val > 0:
        raise argparse.ArgumentTypeError(f"lambda0 must be positive, got {text!r}")
    return val


def _load_config(path):
    return config.load(path) if path else config.DEMO


def cmd_gamma(args) -> int:
    run = Run("gamma", args.out, seed=None, extra={"n": args.n, "n1": args.n1})
    do_gamma(run, args.n, args.n1)
    return run.finish()


def cmd_lattice_report(args) -> int:
    cfg = _load_config(args.config)
    run = Run("lattice-report", args.out or cfg.output_dir, cfg, cfg.seed)
    do_lattice(run, cfg, list(experiments.build_models(cfg)))
    return run.finish()


def cmd_weakpair_report(args) -> int:
    if (args.S is None) != (args.T is None):
        raise ConfigError("--S and --T must be given together", key="S" if args.S is None else "T")
    cfg = _load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    lambda0 = cfg.lambda0 if args.lambda0 is None else args.lambda0
    grid_count = cfg.grid_count if args.grid_count is None else args.grid_count
    mu = cfg.mu_value if args.mu is None else 1j * args.mu
    if grid_count < 4:
        raise ConfigError("grid_count must be at least 4", key="grid_count")
    if args.S is not None:
        pair = weakpair.OperatorPair(linops.read_matrix(args.S), linops.read_matrix(args.T), args.kind)
        source = {"S": args.S, "T": args.T}
    else:
        pair = lattice_pair(cfg)
        if args.kind != weakpair.ANTICOMMUTATOR:
            pair = pair.with_kind(args.kind)
        source = {"lattice_N": cfg.N_list[0]}
    run = Run("weakpair-report", args.out or cfg.output_dir, cfg if args.S is None else None, seed,
              {"kind": args.kind, "lambda0": lambda0, "grid_count": grid_count, "mu": mu, **source})
    do_weakpair(run, pair, seed, lambda0, grid_count, mu)
    return run.finish()


def cmd_wick_roundtrip(args) -> int:
    sources = [args.input is not None, args.random is not None, args.config is not None]
    if sum(sources) != 1:
        raise ConfigError("give exactly one of --input, --random, --config", key="input")
    if args.config is not None:
        cfg = config.load(args.config)
        run = Run("wick-roundtrip", args.out or cfg.output_dir, cfg, cfg.seed)
        do_wick_lattice(run, cfg, list(experiments.build_models(cfg)))
        return run.finish()
    if args.input is not None:
        D = linops.read_matrix(args.input)
        run = Run("wick-roundtrip", args.out or "weaklab-out", None, None, {"input": args.input})
    else:
        if args.random < 1:
            raise ConfigError("--random needs a positive dimension", key="random")
        rng = np.random.default_rng(args.seed)
        D = linops.random_matrix(args.random, rng)
        run = Run("wick-roundtrip", args.out or "weaklab-out", None, args.seed, {"random": args.random})
    do_wick_matrix(run, D)
    return run.finish()


def cmd_full_suite(args) -> int:
    cfg = _load_config(args.config)
    run = Run("full-suite", args.out or cfg.output_dir, cfg, cfg.seed)
    do_gamma(run, cfg.n, cfg.n1, write_matrices=cfg.emit_matrices, sub="gamma")
    models = list(experiments.build_models(cfg))
    do_lattice(run, cfg, models, sub="lattice")
    do_weakpair(run, lattice_pair(cfg, models[0]), cfg.seed, cfg.lambda0, cfg.grid_count, cfg.mu_value, sub="weakpair")
    do_wick_lattice(run, cfg, models, sub="wick")
    return run.finish()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weaklab", description="Verify weakly (anti)commuting operator constructions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--quiet", action="store_true", help="only print errors")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gamma", help="Clifford generators and their relation residuals")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--n1", type=int, default=None, help="also build the fundamental symmetry for this split")
    g.add_argument("--out", default="weaklab-out")
    g.set_defaults(func=cmd_gamma)

    lr = sub.add_parser("lattice-report", help="torus Dirac decomposition and relative-bound constants")
    lr.add_argument("--config", help="JSON config (default: built-in demo)")
    lr.add_argument("--out")
    lr.set_defaults(func=cmd_lattice_report)

    w = sub.add_parser("weakpair-report", help="convergence tables for a pair of hermitian matrices")
    w.add_argument("--S", help="matrix file for S")
    w.add_argument("--T", help="matrix file for T")
    w.add_argument("--config", help="use the lattice pair at the first N of this config")
    w.add_argument("--kind", choices=weakpair.KINDS, default=weakpair.ANTICOMMUTATOR)
    w.add_argument("--lambda0", type=_lambda0, default=None, help="grid start, a positive number or auto")
    w.add_argument("--grid-count", type=int, default=None, help="number of grid points")
    w.add_argument("--mu", type=float, default=None, help="imaginary part of the fixed spectral parameter")
    w.add_argument("--seed", type=int, default=None)
    w.add_argument("--out")
    w.set_defaults(func=cmd_weakpair_report)

    r = sub.add_parser("wick-roundtrip", help="Wick rotation round trips and module checks")
    r.add_argument("--input", help="matrix file for D")
    r.add_argument("--random", type=int, help="use a seeded random matrix of this size")
    r.add_argument("--config", help="use the lattice operators of this config")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(func=cmd_wick_roundtrip)

    f = sub.add_parser("full-suite", help="every report for one config")
    f.add_argument("--config", help="JSON config (default: built-in demo)")
    f.add_argument("--out")
    f.set_defaults(func=cmd_full_suite)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        where = f" (key: {exc.key})" if exc.key else ""
        log.error("configuration error%s: %s", where, exc)
        return EXIT_INPUT
    except (WeakLabError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
