"""Experiment orchestration: TOML config in, machine-readable artifacts out.

Tasks run in the order listed in the config:
  sample        run the tempering sampler, write trace JSONL + summary JSON
  calibrate     bootstrap the level pseudo-weights, write calibration JSON
  verify-finite run the finite-chain campaigns, write a report JSON
  verify-bounds run the inequality suite and counterexample bounds
  sweep         ladder-design and counterexample tables over a (d, D, kappa) grid

Exit status: 0 when every task (and every verification report) passed,
1 on task/report failure, 2 on config errors.  Given a fixed seed the
trace files are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import diagnostics, finitelab, zconst
from .errors import TemperlabError
from .ladder import F_overlap, Ladder, build_ladder, design_report, step_sizes
from .targets import MixtureSpec, diag_quadratic_potential, quadratic_potential
from .tempering import TemperingConfig, default_init, run_chain, stream

KNOWN_TASKS = ("sample", "calibrate", "verify-finite", "verify-bounds", "sweep")


class ConfigError(TemperlabError, ValueError):
    pass


def _need(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return table[key]


@dataclass
class ExperimentConfig:
    """Parsed experiment file; ``raw`` keeps the original tables for echo."""

    spec: MixtureSpec
    ladder: Ladder
    sampler: TemperingConfig
    steps: int
    thin: int
    replicas: int
    tasks: List[str]
    h_mode: str                    # "auto" or "explicit"
    eta: float
    eps: float
    raw: dict = field(repr=False, default_factory=dict)
    task_options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        target = _need(data, "target", "config")
        kind = target.get("potential", "quadratic")
        if "two_mode" in target:
            tm = target["two_mode"]
            D = float(_need(tm, "D", "target.two_mode"))
            d = int(_need(tm, "d", "target.two_mode"))
            weights = np.array([0.5, 0.5])
            modes = np.zeros((2, d))
            modes[0, 0] = D
            modes[1, 0] = -D
        else:
            weights = np.asarray(_need(target, "weights", "target"), dtype=float)
            modes = np.atleast_2d(np.asarray(_need(target, "modes", "target"), dtype=float))
            d = modes.shape[1]
        if kind == "quadratic":
            local = quadratic_potential(d)
        elif kind == "diag_quadratic":
            diag = np.asarray(_need(target, "diag", "target"), dtype=float)
            local = diag_quadratic_potential(diag,
                                             smoothness=target.get("L"),
                                             strong_convexity=target.get("m"))
        else:
            raise ConfigError(f"target.potential: unknown kind {kind!r}")
        try:
            spec = MixtureSpec(weights, modes, local)
        except ValueError as exc:
            raise ConfigError(f"target: {exc}") from exc

        lad_tbl = data.get("ladder", {"auto": True})
        if lad_tbl.get("auto", "betas" not in lad_tbl):
            ladder = build_ladder(local.smoothness, local.strong_convexity,
                                  spec.d, spec.D)
        else:
            betas = np.asarray(_need(lad_tbl, "betas", "ladder"), dtype=float)
            try:
                ladder = Ladder(betas)
            except ValueError as exc:
                raise ConfigError(f"ladder.betas: {exc}") from exc
        if "zeta" in lad_tbl:
            zeta = np.asarray(lad_tbl["zeta"], dtype=float)
            if zeta.shape != ladder.betas.shape:
                raise ConfigError("ladder.zeta: length must match the ladder")
            ladder = ladder.with_zeta(zeta)

        smp = data.get("sampler", {})
        proposal = smp.get("proposal", "rwm")
        eta = float(smp.get("eta", math.e))
        eps = float(smp.get("eps", 1e-2))
        alpha = float(smp.get("alpha", 0.5))
        q_adj = float(smp.get("q_adj", 0.5))
        h_raw = smp.get("h", "auto")
        h_mode = "auto" if h_raw == "auto" else "explicit"
        if h_mode == "auto":
            sizes = step_sizes(spec, ladder, alpha, q_adj, eta, eps)
            h = sizes["rwm_h"] if proposal == "rwm" else sizes["mala_h"]
        else:
            h = float(h_raw)
        try:
            sampler = TemperingConfig(
                proposal_kind=proposal, h=h, alpha=alpha, q_adj=q_adj,
                lazy=bool(smp.get("lazy", True)), seed=int(smp.get("seed", 0)))
        except TemperlabError as exc:
            raise ConfigError(f"sampler: {exc}") from exc

        tasks = list(data.get("tasks", []))
        for t in tasks:
            if t not in KNOWN_TASKS:
                raise ConfigError(f"tasks: unknown task {t!r} (known: {KNOWN_TASKS})")
        task_options = {k: data.get(k.replace("-", "_"), {}) for k in KNOWN_TASKS}
        return cls(spec=spec, ladder=ladder, sampler=sampler,
                   steps=int(smp.get("steps", 100_000)),
                   thin=int(smp.get("thin", 1)),
                   replicas=int(smp.get("replicas", 1)),
                   tasks=tasks, h_mode=h_mode, eta=eta, eps=eps,
                   raw=data, task_options=task_options)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
        return cls.from_dict(data)

    def echo_dict(self) -> dict:
        """Semantically complete settings for the round-trip contract."""
        target = {
            "potential": "quadratic" if np.allclose(self.spec.local.diag, 1.0)
            else "diag_quadratic",
            "weights": self.spec.weights.tolist(),
            "modes": self.spec.modes.tolist(),
        }
        if target["potential"] == "diag_quadratic":
            target["diag"] = self.spec.local.diag.tolist()
            target["L"] = self.spec.local.smoothness
            target["m"] = self.spec.local.strong_convexity
        return {
            "target": target,
            "ladder": {"auto": False, "betas": self.ladder.betas.tolist(),
                       "zeta": self.ladder.zeta.tolist()},
            "sampler": {"proposal": self.sampler.proposal_kind,
                        "h": self.sampler.h, "alpha": self.sampler.alpha,
                        "q_adj": self.sampler.q_adj, "lazy": self.sampler.lazy,
                        "seed": self.sampler.seed, "steps": self.steps,
                        "thin": self.thin, "replicas": self.replicas,
                        "eta": self.eta, "eps": self.eps},
            "tasks": list(self.tasks),
        }


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)!r} to TOML")


def dump_toml(data: dict) -> str:
    """Minimal TOML emitter for the flat table-of-scalars/arrays schema."""
    top = []
    tables = []
    for key, val in data.items():
        if isinstance(val, dict):
            lines = [f"[{key}]"]
            for k, v in val.items():
                lines.append(f"{k} = {_toml_value(v)}")
            tables.append("\n".join(lines))
        else:
            top.append(f"{key} = {_toml_value(val)}")
    return "\n".join(top + [""] + tables) + "\n"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class _Manifest:
    def __init__(self, out_dir: Path, run_id: str):
        self.out_dir = out_dir
        self.run_id = run_id
        self.files: List[dict] = []

    def add(self, path: Path, task: str, wall_time: float) -> None:
        self.files.append({"file": str(path.relative_to(self.out_dir)),
                           "sha256": _sha256(path), "task": task,
                           "wall_time_s": round(wall_time, 3)})

    def write(self) -> Path:
        path = self.out_dir / "manifest.json"
        with open(path, "w") as fh:
            json.dump({"run_id": self.run_id, "files": self.files}, fh, indent=2)
            fh.write("\n")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2)
        fh.write("\n")


def _task_sample(cfg: ExperimentConfig, out: Path, manifest: _Manifest,
                 quiet: bool) -> bool:
    t0 = time.time()

    def one(rep: int):
        rng = stream(cfg.sampler.seed, 10 + rep)
        init = default_init(cfg.spec, cfg.ladder, rng)
        return run_chain(init, cfg.spec, cfg.ladder, cfg.sampler, cfg.steps,
                         thin=cfg.thin, stream_id=rep)

    # replica streams are fixed by (seed, id): concurrent execution cannot
    # change any output byte
    if cfg.replicas > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=min(cfg.replicas, 8)) as pool:
            traces = list(pool.map(one, range(cfg.replicas)))
    else:
        traces = [one(0)]

    summaries = {}
    for rep, trace in enumerate(traces):
        run_id = f"sample-rep{rep}"
        tr_path = out / f"trace_rep{rep}.jsonl"
        trace.to_jsonl(tr_path, thin=cfg.thin)
        manifest.add(tr_path, "sample", time.time() - t0)
        summaries[run_id] = trace.summary(run_id=run_id)
    sm_path = out / "summary.json"
    _write_json(sm_path, summaries)
    manifest.add(sm_path, "sample", time.time() - t0)
    if not quiet:
        print(f"[sample] {cfg.replicas} replica(s), {cfg.steps} steps each")
    return True


def _task_calibrate(cfg: ExperimentConfig, out: Path, manifest: _Manifest,
                    quiet: bool) -> bool:
    opts = cfg.task_options.get("calibrate", {})
    t0 = time.time()
    report = zconst.calibrate_pseudo_weights(
        cfg.spec, cfg.ladder, cfg.sampler,
        per_level_budget=int(opts.get("per_level_budget", 30_000)),
        verify_steps=int(opts.get("verify_steps", 1_000_000)))
    cfg.ladder = cfg.ladder.with_zeta(report.zeta)  # later tasks see the result
    path = out / "calibration.json"
    _write_json(path, report.as_dict())
    manifest.add(path, "calibrate", time.time() - t0)
    if not quiet:
        print(f"[calibrate] occupancy factor {report.occupancy_factor:.2f} "
              f"ok={report.ok}")
    return report.ok


def _task_verify_finite(cfg: ExperimentConfig, out: Path, manifest: _Manifest,
                        quiet: bool) -> bool:
    opts = cfg.task_options.get("verify-finite", {})
    seed = int(opts.get("seed", 2024))
    t0 = time.time()
    decomp = finitelab.run_decomposition_campaign(
        n_chains=int(opts.get("chains", 1000)), seed=seed,
        workers=int(opts.get("workers", 1)))
    comp = finitelab.run_comparison_campaign(
        n_pairs=int(opts.get("pairs", 100)), seed=seed + 1)
    tv = finitelab.run_tv_campaign(
        n_chains=int(opts.get("tv_chains", 100)), seed=seed + 2,
        horizon=int(opts.get("horizon", 1000)))
    payload = {"decomposition": decomp, "comparison": comp, "tv_rate": tv,
               "passed": decomp["passed"] and comp["passed"] and tv["passed"]}
    path = out / "report_verify_finite.json"
    _write_json(path, payload)
    manifest.add(path, "verify-finite", time.time() - t0)
    if not quiet:
        print(f"[verify-finite] decomposition={decomp['passed']} "
              f"comparison={comp['passed']} tv={tv['passed']}")
    return payload["passed"]


def _task_verify_bounds(cfg: ExperimentConfig, out: Path, manifest: _Manifest,
                        quiet: bool) -> bool:
    opts = cfg.task_options.get("verify-bounds", {})
    seed = int(opts.get("seed", 7))
    n_points = int(opts.get("points", 1000))
    t0 = time.time()
    ineq = diagnostics.inequality_suite(cfg.spec, cfg.ladder, n_points,
                                        stream(seed, 0))
    payload = {"inequalities": ineq.as_dict(), "passed": ineq.passed}
    try:
        witness = diagnostics.counterexample_witness(
            cfg.spec, cfg.ladder, h=float(opts.get("h", 0.25)),
            s=float(opts.get("s", 0.0)), n_mc=int(opts.get("n_mc", 10_000)),
            seed=seed)
        payload["counterexample"] = witness.as_dict()
        payload["passed"] = payload["passed"] and witness.passed
    except TemperlabError as exc:
        payload["counterexample"] = {"skipped": str(exc)}
    path = out / "report_verify_bounds.json"
    _write_json(path, payload)
    manifest.add(path, "verify-bounds", time.time() - t0)
    if not quiet:
        print(f"[verify-bounds] passed={payload['passed']}")
    return payload["passed"]


def _sweep_spec(d: int, D: float, kappa: float) -> MixtureSpec:
    a = np.ones(d)
    a[0] = kappa
    local = diag_quadratic_potential(a, smoothness=kappa, strong_convexity=1.0)
    modes = np.zeros((2, d))
    modes[0, 0] = D
    modes[1, 0] = -D
    return MixtureSpec(np.array([0.5, 0.5]), modes, local)


def _task_sweep(cfg: ExperimentConfig, out: Path, manifest: _Manifest,
                quiet: bool) -> bool:
    opts = cfg.task_options.get("sweep", {})
    dims = [int(v) for v in opts.get("dims", [1, 2, 4, 8])]
    disps = [float(v) for v in opts.get("displacements", [1.0, 2.0, 4.0, 8.0])]
    kappas = [float(v) for v in opts.get("kappas", [1.0, 2.0])]
    h = float(opts.get("h", 0.25))
    t0 = time.time()
    design_path = out / "sweep_design.csv"
    counter_path = out / "sweep_counterexample.csv"
    with open(design_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("d", "D", "kappa") + type(design_report(
            _sweep_spec(1, 1.0, 1.0), build_ladder(1, 1, 1, 1.0))).CSV_COLUMNS)
        for d in dims:
            for D in disps:
                for kappa in kappas:
                    spec = _sweep_spec(d, D, kappa)
                    lad = build_ladder(kappa, 1.0, d, D)
                    rep = design_report(spec, lad, eta=cfg.eta, eps=cfg.eps)
                    writer.writerow([d, D, kappa] + rep.csv_row())
    with open(counter_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "D", "beta1", "rho", "statistic", "value"])
        for d in dims:
            for D in disps:
                lad = build_ladder(1.0, 1.0, d, D)
                beta1 = float(lad.betas[0])
                rho = lad.max_ratio() - 1.0
                hs = diagnostics.halfspace_flow_bound(beta1, D, d, h, 0.0)
                sp = diagnostics.spacing_flow_bound(lad, d, 0.0)
                rows = {
                    "F": F_overlap(rho, d),
                    "F_envelope": math.exp(-rho * rho * d / 48.0) if rho <= 0.5 else float("nan"),
                    "halfspace_numerator": hs["numerator"],
                    "halfspace_phi_bound": hs["phi_bound"],
                    "spacing_phi_bound": sp["bound"],
                }
                for stat, val in rows.items():
                    writer.writerow([d, D, beta1, rho, stat, val])
    manifest.add(design_path, "sweep", time.time() - t0)
    manifest.add(counter_path, "sweep", time.time() - t0)
    if not quiet:
        print(f"[sweep] {len(dims) * len(disps) * len(kappas)} design rows")
    return True


_TASK_RUNNERS = {
    "sample": _task_sample,
    "calibrate": _task_calibrate,
    "verify-finite": _task_verify_finite,
    "verify-bounds": _task_verify_bounds,
    "sweep": _task_sweep,
}


def run_experiment(config_path, out_dir, seed: Optional[int] = None,
                   replicas: Optional[int] = None, quiet: bool = False) -> int:
    """Execute the config's task list; returns the process exit status."""
    try:
        cfg = ExperimentConfig.from_toml(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if seed is not None:
        cfg.sampler = TemperingConfig(
            proposal_kind=cfg.sampler.proposal_kind, h=cfg.sampler.h,
            alpha=cfg.sampler.alpha, q_adj=cfg.sampler.q_adj,
            lazy=cfg.sampler.lazy, seed=seed)
        cfg.raw.setdefault("sampler", {})["seed"] = seed
    if replicas is not None:
        cfg.replicas = replicas
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_id = f"temperlab-{cfg.sampler.seed}"
    manifest = _Manifest(out, run_id)

    if not quiet and cfg.h_mode == "auto":
        print(f"[config] auto step size: proposal={cfg.sampler.proposal_kind} "
              f"h={cfg.sampler.h:.6g} (L={cfg.spec.local.smoothness}, "
              f"d={cfg.spec.d}, D={cfg.spec.D}, eta={cfg.eta}, eps={cfg.eps})")

    if cfg.tasks:
        echo_path = out / "config_echo.toml"
        with open(echo_path, "w") as fh:
            fh.write(dump_toml(cfg.echo_dict()))
        manifest.add(echo_path, "config", 0.0)

    ok = True
    failing = []
    for task in cfg.tasks:
        t0 = time.time()
        try:
            passed = _TASK_RUNNERS[task](cfg, out, manifest, quiet)
        except Exception as exc:  # a broken task must not take down the run
            print(f"task {task} failed: {exc}", file=sys.stderr)
            passed = False
        if not passed:
            ok = False
            failing.append(task)
        if not quiet:
            print(f"[{task}] done in {time.time() - t0:.1f}s")
    manifest.write()
    if not ok:
        print(f"failing tasks: {', '.join(failing)}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="temperlab",
                                     description="Run tempering experiments from a TOML config.")
    parser.add_argument("--config", required=True, help="path to the TOML config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the sampler seed")
    parser.add_argument("--replicas", type=int, default=None,
                        help="override the replica count")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)
    return run_experiment(args.config, args.out, seed=args.seed,
                          replicas=args.replicas, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
