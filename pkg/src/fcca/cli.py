"""Command-line runner: ``fcca {simulate,fit,sweep,mc,perturb-check}``.

Config files are INI-style and read as flat ``section.key`` entries::

    [model]
    name = toy2            # toy2 | decaying | random
    p = 64
    [run]
    method = tikhonov      # tikhonov | tsvd | truncated_tikhonov | unregularized
    alphas = 1,0.1,0.01
    n = 500
    seed = 0

Exit codes: 0 success, 2 usage, 3 data format, 4 invariant failure, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .cca_core import population_cca
from .errors import FccaError, InvalidArgument, InvariantFailure
from .model_sim import (
    ProcessModel,
    SamplePaths,
    decaying_model,
    population_operators,
    random_model,
    sample_paths,
    toy_model_2,
)

METHODS = ("tikhonov", "tsvd", "truncated_tikhonov", "unregularized")


class ExperimentConfig:
    """Validated view of a flat config plus command-line overrides."""

    def __init__(self, flat: dict[str, str], base_dir: Path, args: argparse.Namespace):
        self.flat = flat
        self.base_dir = base_dir
        self.has_model = any(k.startswith("model.") for k in flat)
        self.has_data = any(k.startswith("data.") for k in flat)
        if self.has_model == self.has_data:
            raise InvalidArgument("config needs exactly one of a [model] or a [data] section")
        self.method = flat.get("run.method", "tikhonov")
        if self.method not in METHODS:
            raise InvalidArgument(f"unknown method {self.method!r}")
        alphas = args.alphas if getattr(args, "alphas", None) else flat.get("run.alphas", "")
        ms = args.ms if getattr(args, "ms", None) else flat.get("run.ms", "")
        self.alphas = dataio.parse_list(alphas, float)
        self.ms = dataio.parse_list(ms, int)
        self.seed = int(args.seed) if args.seed is not None else int(flat.get("run.seed", 0))
        self.n = int(flat.get("run.n", 500))
        self.n_list = dataio.parse_list(flat.get("run.n_list", str(self.n)), int)
        self.replications = int(flat.get("run.replications", 100))
        self.k = int(flat.get("run.k", 1))
        if self.k < 1:
            raise InvalidArgument("run.k counts from 1")
        out = args.out or flat.get("run.out")
        if not out:
            raise InvalidArgument("no output directory: pass --out or set run.out")
        self.out = Path(out)
        threads = args.threads or os.environ.get("FCCA_THREADS") or flat.get("run.threads", 1)
        self.threads = max(1, int(threads))

    def get(self, key: str, default=None):
        return self.flat.get(key, default)

    def params(self) -> list[dict]:
        """Parameter points for the method: alphas, ms, or their product for the hybrid."""
        if self.method == "unregularized":
            return [{}]
        if self.method == "tikhonov":
            grid = [{"alpha": a} for a in self.alphas]
        elif self.method == "tsvd":
            grid = [{"m": m} for m in self.ms]
        else:
            grid = [{"alpha": a, "m": m} for a in self.alphas for m in self.ms]
        if not grid:
            raise InvalidArgument(f"method {self.method} needs a nonempty parameter grid")
        return grid

    def model(self) -> ProcessModel:
        if not self.has_model:
            raise InvalidArgument("this command needs a [model] section")
        name = self.get("model.name", "toy2")
        p = int(self.get("model.p", 64))
        if name == "toy2":
            return toy_model_2(p)
        if name == "decaying":
            return decaying_model(int(self.get("model.j", 20)), p, float(self.get("model.rho", 0.8)), float(self.get("model.decay", 2.0)))
        if name == "random":
            rng = np.random.default_rng(np.random.SeedSequence(int(self.get("model.seed", 0))))
            return random_model(rng, int(self.get("model.j", 3)), p, float(self.get("model.max_rho", 0.95)))
        raise InvalidArgument(f"unknown model {name!r}")

    def paths(self) -> SamplePaths:
        """Data files from [data], or n paths simulated from the model."""
        if self.has_model:
            return sample_paths(self.model(), self.n, self.seed)
        x1 = self.base_dir / self.get("data.x1", "x1.csv")
        x2 = self.base_dir / self.get("data.x2", "x2.csv")
        w1 = w2 = None
        manifest = x1.parent / "manifest.json"
        if manifest.is_file():
            info = json.loads(manifest.read_text())
            w1, w2 = info.get("weights1"), info.get("weights2")
        g1, v1 = dataio.read_paths_csv(x1, w1)
        g2, v2 = dataio.read_paths_csv(x2, w2)
        if v1.shape[0] != v2.shape[0]:
            raise dataio.DataFormatError(f"{x1} has {v1.shape[0]} paths but {x2} has {v2.shape[0]}")
        return SamplePaths(g1, g2, v1, v2)


def _model_echo(m: ProcessModel) -> dict:
    rho = np.linalg.svd(m.correlations(), compute_uv=False)
    return {"name": m.name, "J": m.J, "p1": m.grid1.size, "p2": m.grid2.size, "canonical_correlations": [float(r) for r in rho]}


def cmd_simulate(cfg: ExperimentConfig) -> int:
    m = cfg.model()
    paths = sample_paths(m, cfg.n, cfg.seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    dataio.write_paths_csv(cfg.out / "x1.csv", m.grid1, paths.x1)
    dataio.write_paths_csv(cfg.out / "x2.csv", m.grid2, paths.x2)
    manifest = {
        "model": _model_echo(m),
        "n": cfg.n,
        "seed": cfg.seed,
        "weights1": [float(w) for w in m.grid1.weights],
        "weights2": [float(w) for w in m.grid2.weights],
    }
    dataio.write_json(cfg.out / "manifest.json", manifest)
    return 0


def _fit_one(method: str, param: dict, data, k_max: int | None):
    from .estimation import fit_tikhonov, fit_truncated_tikhonov, fit_tsvd, fit_unregularized

    if method == "tikhonov":
        return fit_tikhonov(data, param["alpha"], k_max)
    if method == "tsvd":
        return fit_tsvd(data, param["m"], k_max)
    if method == "truncated_tikhonov":
        return fit_truncated_tikhonov(data, param["alpha"], param["m"], k_max)
    return fit_unregularized(data, k_max=k_max)


def _weights_json(ws) -> list:
    out = []
    for f in ws:
        out.append(None if f is None else {"rank": f.rank, "coeffs": [float(c) for c in f.coeffs]})
    return out


def cmd_fit(cfg: ExperimentConfig) -> int:
    from .estimation import sample_covariance

    data = sample_covariance(cfg.paths())
    k_max = int(cfg.get("run.k_max")) if cfg.get("run.k_max") else None
    results = []
    for param in cfg.params():
        res = _fit_one(cfg.method, param, data, k_max)
        results.append({
            "parameter": res.parameter,
            "rho": [float(r) for r in res.rho],
            "degenerate": bool(res.degenerate),
            "weights1": _weights_json(res.weights1),
            "weights2": _weights_json(res.weights2),
        })
    cfg.out.mkdir(parents=True, exist_ok=True)
    dataio.write_json(cfg.out / "fit.json", {"method": cfg.method, "n": data.n, "seed": cfg.seed, "results": results})
    return 0


def cmd_sweep(cfg: ExperimentConfig) -> int:
    from .tikhonov import sweep_alpha
    from .tsvd import sweep_m

    C = population_operators(cfg.model())
    ref = population_cca(C)
    cfg.out.mkdir(parents=True, exist_ok=True)
    failures = []
    if cfg.method == "tikhonov":
        alphas = cfg.alphas or [1.0, 0.1, 0.01, 0.001]
        table = sweep_alpha(C, alphas, ref)
        table.to_csv(cfg.out / "sweep_alpha.csv")
        rho = table.column("rho", 1)
        if np.any(np.diff(rho) < -1e-12):
            failures.append("rho_1(alpha) is not increasing as alpha decreases")
    elif cfg.method == "tsvd":
        ms = cfg.ms or list(range(1, C.eig1().rank() + 1))
        table = sweep_m(C, ms, ref)
        table.to_csv(cfg.out / "sweep_m.csv")
        for k in range(1, max(ms) + 1):
            if np.any(np.diff(table.column("rho", k)) < -1e-12):
                failures.append(f"rho_{k}(m) decreases in m")
    else:
        raise InvalidArgument("sweep supports the tikhonov and tsvd methods")
    if failures:
        raise InvariantFailure("; ".join(failures))
    return 0


def cmd_mc(cfg: ExperimentConfig) -> int:
    from .asymptotics import McConfig, mc_study

    param = cfg.params()[0]
    mc = McConfig(
        model=cfg.model(),
        method=cfg.method,
        param=param,
        n_list=cfg.n_list,
        replications=cfg.replications,
        seed=cfg.seed,
        k=cfg.k - 1,
        threads=cfg.threads,
        sigma_draws=int(cfg.get("run.sigma_draws", 4000)),
    )
    report = mc_study(mc)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "mc_report.json").write_text(report.to_json() + "\n")
    return 0


def cmd_perturb_check(args: argparse.Namespace) -> int:
    from .perturbation import property_checks

    seed = int(args.seed) if args.seed is not None else 0
    checks = property_checks(seed)
    rows = [{"name": c.name, "value": float(c.value), "passed": bool(c.passed), "detail": c.detail} for c in checks]
    for r in rows:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']} = {r['value']!r} ({r['detail']})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        dataio.write_json(out / "perturb_check.json", {"seed": seed, "checks": rows})
    if not all(r["passed"] for r in rows):
        raise InvariantFailure("perturbation property check failed")
    return 0


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "sweep": cmd_sweep, "mc": cmd_mc}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcca", description="Regularized functional canonical correlation analysis.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "sweep", "mc", "perturb-check"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "perturb-check", help="INI config file")
        p.add_argument("--out", help="output directory (overrides run.out)")
        p.add_argument("--seed", type=int, help="seed (overrides run.seed)")
        p.add_argument("--alphas", help="comma-separated Tikhonov parameters")
        p.add_argument("--ms", help="comma-separated truncation levels")
        p.add_argument("--threads", type=int, help="worker threads (falls back to FCCA_THREADS)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "perturb-check":
            return cmd_perturb_check(args)
        cfg_path = Path(args.config)
        cfg = ExperimentConfig(dataio.read_config(cfg_path), cfg_path.parent, args)
        return COMMANDS[args.command](cfg)
    except FccaError as exc:
        if exc.exit_code == 2:
            parser.print_usage(sys.stderr)
        print(f"fcca: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fcca: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
