"""Command-line front end: ``fracns <subcommand> [--config PATH] ...``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 I/O error (including a missing config file), 5 config file that is not
valid JSON.  A ``manifest.json`` is written to the output directory on every
run, successful or not.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config
from .fieldio import read_field, write_field
from .grid import Field, GridSpec, forward_transform, inverse_transform, make_preset
from .kernels import grad_heat_kernel, heat_kernel_radial, oseen_kernel, verify_decay
from .mild import (
    BlowUpError,
    ForcingSpec,
    SolverConfig,
    Trajectory,
    estimate_CB,
    picard_iterate,
    time_march_oracle,
)
from .operators import (
    RadiusLadder,
    gaussian_blobs,
    leray_project,
    maximal_function,
    riesz_direct_vs_fft,
    riesz_transform,
)
from .theorems import (
    E_script_norm,
    ET_norm,
    check_thm1_exponents,
    l1_time_norm,
    smallness_verdict,
    space_norms,
    thm2_exponents,
    verify_prop_thm1,
    verify_prop_thm2,
)
from .varlp import SpaceDomain, TimeDomain, exponent_from_config, lebesgue_norm, luxemburg_norm, mixed_norm, modular

SUBCOMMANDS = ("norm", "kernel", "operators-check", "solve", "picard", "theorem1", "theorem2", "report")
TRAJ_INDEX = "trajectory.json"


class NumericalFailure(Exception):
    """Raised when a solver reports divergence; maps to exit code 3."""


# --- output helpers -----------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Output directory, emitted-file bookkeeping and the manifest."""

    def __init__(self, out_dir: Path, fmt: str, quiet: bool):
        self.out = out_dir
        self.fmt = fmt
        self.quiet = quiet

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)

    def json(self, name: str, payload) -> Path:
        path = self.out / f"{name}.json"
        _dump_json(path, payload)
        return path

    def table(self, name: str, rows: list[dict]) -> Path:
        """Rows as CSV or JSON depending on ``--format``."""
        rows = _jsonable(rows)
        if self.fmt == "json":
            return self.json(name, rows)
        path = self.out / f"{name}.csv"
        keys = list(dict.fromkeys(k for r in rows for k in r))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        return path

    def trajectory(self, name: str, traj: Trajectory, extra: dict | None = None) -> Path:
        """Snapshots as FNSV files plus an index; the index says ``complete: false`` until all are written."""
        folder = self.out / name
        folder.mkdir(parents=True, exist_ok=True)
        index = {"complete": False, "times": traj.times, "files": []}
        index.update(extra or {})
        _dump_json(folder / TRAJ_INDEX, index)
        for i in range(len(traj.times)):
            path = folder / f"u_{i:05d}.fnsv"
            write_field(path, traj.physical(i))
            index["files"].append({"name": path.name, "t": float(traj.times[i]), "sha256": _sha256(path)})
        index["complete"] = True
        _dump_json(folder / TRAJ_INDEX, index)
        return folder

    def manifest(self, config: ExperimentConfig | None, command: str, started: float, status: dict) -> None:
        files, trajectories = [], {}
        for path in sorted(self.out.rglob("*")):
            if path.is_file() and path.name != "manifest.json":
                rel = path.relative_to(self.out).as_posix()
                files.append({"path": rel, "sha256": _sha256(path), "bytes": path.stat().st_size})
                if path.name == TRAJ_INDEX:
                    try:
                        ok = bool(json.loads(path.read_text())["complete"])
                    except (ValueError, KeyError, OSError):
                        ok = False
                    trajectories[path.parent.relative_to(self.out).as_posix()] = "valid" if ok else "invalid"
        payload = {
            "command": command,
            "config_hash": config.digest() if config is not None else None,
            "versions": {"fracns": __version__, "numpy": np.__version__, "python": platform.python_version()},
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_clock_s": time.perf_counter() - started,
            "status": status,
            "files": files,
            "trajectories": trajectories,
        }
        _dump_json(self.out / "manifest.json", payload)


# --- builders -----------------------------------------------------------


def _grid(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(cfg.grid.d, cfg.grid.N, cfg.grid.L)


def _solver(cfg: ExperimentConfig, T: float | None = None) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(s.alpha, s.T if T is None else T, s.N_t, _grid(cfg), s.dealias, s.tol, s.max_iter, s.nu)


def _initial(cfg: ExperimentConfig) -> Field:
    if cfg.data.input:
        f = read_field(cfg.data.input)
        if f.grid != _grid(cfg):
            raise ValueError("input field grid does not match the config grid")
        return f
    opts = {"k_peak": cfg.data.k_peak} if cfg.data.k_peak is not None else {}
    return make_preset(cfg.data.preset, _grid(cfg), amplitude=cfg.data.amplitude, seed=cfg.data.seed, **opts)


def _forcing(cfg: ExperimentConfig) -> ForcingSpec:
    f = cfg.data.forcing
    opts = {"k_peak": f.k_peak} if f.k_peak is not None else {}
    return ForcingSpec(kind=f.kind, preset=f.preset, amplitude=f.amplitude, seed=f.seed, decay=f.decay, options=opts)


def load_trajectory(folder: Path, grid: GridSpec) -> Trajectory:
    """Read a trajectory directory written by :meth:`Run.trajectory`; incomplete ones are refused."""
    index = json.loads((folder / TRAJ_INDEX).read_text(encoding="utf-8"))
    if not index.get("complete"):
        raise ValueError(f"trajectory {folder} is incomplete")
    coeffs, times = [], []
    for entry in index["files"]:
        f = read_field(folder / entry["name"])
        if f.grid != grid:
            raise ValueError("trajectory grid does not match the config grid")
        coeffs.append(forward_transform(f).coeffs)
        times.append(entry["t"])
    return Trajectory(grid, np.asarray(times), np.stack(coeffs))


# --- subcommands --------------------------------------------------------


def cmd_norm(cfg: ExperimentConfig, run: Run) -> None:
    f = read_field(cfg.run.field_path) if cfg.run.field_path else _initial(cfg)
    dom = SpaceDomain(f.grid)
    p = exponent_from_config(cfg.exponents.space.as_dict(), dom)
    out = {"luxemburg": luxemburg_norm(f, p), "modular_at_1": modular(f, p),
           "p_minus": p.p_minus, "p_plus": p.p_plus, "source": cfg.run.field_path or cfg.data.preset}
    if p.is_constant:
        out["classical"] = lebesgue_norm(f, p.p_minus, dom)
    run.table("norm", [out])
    run.say(f"Luxemburg norm {out['luxemburg']:.12g}")


def cmd_kernel(cfg: ExperimentConfig, run: Run) -> None:
    alpha, r_cfg = cfg.solver.alpha, cfg.run
    rows = []
    for t in r_cfg.times:
        r = np.asarray(r_cfg.radii, dtype=float)
        if r_cfg.kernel == "heat":
            vals = heat_kernel_radial(alpha, t, r, cfg.grid.d)
        elif r_cfg.kernel == "grad_heat":
            vals = grad_heat_kernel(alpha, t, r, cfg.grid.d)
        else:
            pts = np.zeros((r.size, 3))
            pts[:, 0] = r
            vals = np.sqrt(np.sum(oseen_kernel(alpha, t, pts, core_factor=r_cfg.core_factor) ** 2, axis=(1, 2, 3)))
        rows += [{"t": t, "r": float(ri), "value": float(v)} for ri, v in zip(r, np.atleast_1d(vals))]
    run.table("kernel", rows)
    if r_cfg.kernel != "heat":
        base = np.asarray(r_cfg.radii, dtype=float)
        rep = verify_decay(r_cfg.kernel, alpha, r_cfg.times, lambda t: t ** (1 / (2 * alpha)) * base,
                           d=cfg.grid.d if r_cfg.kernel == "grad_heat" else 3, core_factor=r_cfg.core_factor)
        run.json("decay", rep.to_dict())
        run.say(f"decay drift {rep.drift:.3e}")


def cmd_operators(cfg: ExperimentConfig, run: Run) -> None:
    grid = _grid(cfg)
    ladder = RadiusLadder.geometric(grid)
    rows = []
    for i in range(cfg.run.seeds):
        seed = cfg.data.seed + i
        rng = np.random.default_rng(seed)
        F = forward_transform(Field(grid, rng.standard_normal((grid.d,) + grid.shape)))
        P = leray_project(F)
        scale = max(F.max_modulus(), 1e-300)
        idem = np.max(np.abs(leray_project(P).coeffs - P.coeffs)) / scale
        orth = abs(np.vdot(P.coeffs, F.coeffs - P.coeffs)) / np.vdot(F.coeffs, F.coeffs).real
        g = forward_transform(Field(grid, rng.standard_normal((1,) + grid.shape)))
        acc = sum(riesz_transform(riesz_transform(g, j), j).coeffs for j in range(1, grid.d + 1))
        mask = grid.kd_squared > 0  # the mean and pure-Nyquist modes are annihilated
        riesz = np.max(np.abs((acc + g.coeffs)[:, mask])) / max(g.max_modulus(), 1e-300)
        a = Field(grid, np.abs(rng.standard_normal((1,) + grid.shape)))
        b = Field(grid, np.abs(rng.standard_normal((1,) + grid.shape)))
        lhs = maximal_function(a + b, ladder).data
        rhs = maximal_function(a, ladder).data + maximal_function(b, ladder).data
        subl = float(np.max(lhs - rhs))
        pot = riesz_direct_vs_fft(gaussian_blobs(grid, seed), cfg.run.beta)
        rows.append({"seed": seed, "leray_idempotence": float(idem), "leray_orthogonality": float(orth),
                     "riesz_square_sum": float(riesz), "maximal_sublinearity_excess": subl,
                     "potential_direct_vs_fft": float(pot)})
        run.say(f"seed {seed}: potential mismatch {pot:.3e}")
    run.table("operators", rows)


def cmd_solve(cfg: ExperimentConfig, run: Run) -> None:
    sc = _solver(cfg)
    traj = time_march_oracle(sc, _initial(cfg), _forcing(cfg), substeps=cfg.run.substeps)
    run.trajectory("trajectory", traj, {"solver": "exponential-euler", "config": sc.digest()})
    run.json("solve", {"sup_norm": traj.sup_norm(), "divergence_defect": traj.divergence_defect(),
                       "substeps": cfg.run.substeps})


def cmd_picard(cfg: ExperimentConfig, run: Run) -> None:
    sc = _solver(cfg)
    traj, rep = picard_iterate(sc, _initial(cfg), _forcing(cfg))
    run.json("picard_report", rep.to_dict())
    if traj is not None:
        run.trajectory("trajectory", traj, {"solver": "picard", "config": sc.digest(),
                                            "converged": rep.converged})
    run.say(f"picard: {rep.iterations} iterations, converged={rep.converged}")
    if rep.failed:
        raise NumericalFailure(rep.message)


def cmd_theorem1(cfg: ExperimentConfig, run: Run) -> None:
    sc = _solver(cfg)
    spec, q = cfg.exponents.time.as_dict(), cfg.exponents.q
    p = exponent_from_config(spec, TimeDomain(sc.T, sc.n_t))
    ex = check_thm1_exponents(sc.alpha, q, p)
    run.json("theorem1_exponents", ex.to_dict())
    if not ex.admissible:
        raise ValueError("inadmissible exponents: " + "; ".join(ex.violations))
    u0, forcing = _initial(cfg), _forcing(cfg)
    rep = verify_prop_thm1(sc, u0, forcing, spec, q, cfg.run.sweep_T)
    run.table("theorem1_sweep", rep.rows())
    norm = lambda tr: ET_norm(tr, p, q)  # noqa: E731
    c_b = estimate_CB(sc, cfg.run.cb_trials, seed=cfg.data.seed, norm=norm)
    factor = max(sc.T ** (1 / p.p_minus), sc.T ** (1 / p.p_plus))
    pf = forcing.spectral(sc)
    f_l1 = 0.0 if pf is None else l1_time_norm(space_norms(Trajectory(sc.grid, sc.times, pf), q), sc.T)
    f_lp = 0.0 if pf is None else luxemburg_norm(space_norms(Trajectory(sc.grid, sc.times, pf), q), p)
    norms = {"initial": lebesgue_norm(u0, q, SpaceDomain(u0.grid)), "force": f_l1}
    verdict = smallness_verdict(1, norms, c_b / ((1 + sc.T) * factor), rep.constants,
                                p.p_minus, p.p_plus, T=sc.T)
    doc = {"sweep": rep.to_dict(), "c_b": c_b, "norms": norms, "force_Lp_time_Lq": f_lp,
           "verdict": verdict.to_dict(), "force_norm_used": "L1 in time",
           "dimension_note": ex.to_dict()["note"]}
    if cfg.run.trajectory_dir:
        traj = load_trajectory(Path(cfg.run.trajectory_dir), sc.grid)
        pt = exponent_from_config(spec, TimeDomain(float(traj.times[-1]), len(traj.times)))
        doc["trajectory_ET_norm"] = ET_norm(traj, pt, q)
    run.json("theorem1", doc)
    run.say(f"theorem1: verdict={verdict.verdict}, T_max={verdict.T_max:.4g}")


def cmd_theorem2(cfg: ExperimentConfig, run: Run) -> None:
    sc = _solver(cfg)
    dom = SpaceDomain(sc.grid)
    p = exponent_from_config(cfg.exponents.space.as_dict(), dom)
    ex = thm2_exponents(sc.alpha, p)
    u0, forcing = _initial(cfg), _forcing(cfg)
    tensor = forcing.tensor(sc)
    static = np.zeros((sc.grid.d, sc.grid.d) + sc.grid.shape) if tensor is None else tensor[0]
    rep = verify_prop_thm2(sc, u0, static, p, cfg.run.sweep_T)
    run.table("theorem2_sweep", rep.rows())
    c_b = estimate_CB(sc, cfg.run.cb_trials, seed=cfg.data.seed, norm=lambda tr: E_script_norm(tr, p, sc.alpha))
    f_mag = Field(sc.grid, np.sqrt(np.sum(static**2, axis=(0, 1)))[None])
    norms = {"initial": mixed_norm(u0, p, ex.frak), "force": mixed_norm(f_mag, ex.tensor_p, ex.tensor_frak)}
    verdict = smallness_verdict(2, norms, c_b, rep.constants)
    doc = {"sweep": rep.to_dict(), "c_b": c_b, "norms": norms, "verdict": verdict.to_dict()}
    if cfg.run.trajectory_dir:
        doc["trajectory_E_norm"] = E_script_norm(load_trajectory(Path(cfg.run.trajectory_dir), sc.grid), p, sc.alpha)
    run.json("theorem2", doc)
    run.say(f"theorem2: verdict={verdict.verdict}")


def cmd_report(cfg: ExperimentConfig, run: Run) -> None:
    entries = []
    for path in sorted(run.out.glob("*.json")):
        if path.name in ("manifest.json", "report.json"):
            continue
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except ValueError:
            continue
        entry = {"file": path.name}
        if isinstance(data, dict):
            for key in ("verdict", "converged", "drift", "luxemburg", "admissible"):
                if key in data:
                    entry[key] = data[key]
        entries.append(entry)
    run.table("report", entries)
    run.say(f"report: {len(entries)} artefacts summarised")


COMMANDS = {
    "norm": cmd_norm, "kernel": cmd_kernel, "operators-check": cmd_operators, "solve": cmd_solve,
    "picard": cmd_picard, "theorem1": cmd_theorem1, "theorem2": cmd_theorem2, "report": cmd_report,
}


# --- entry point --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracns", description="Fractional Navier-Stokes verification toolkit")
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="JSON experiment config (defaults are used when omitted)")
    ap.add_argument("--out-dir", type=Path, help="output directory (overrides run.out_dir)")
    ap.add_argument("--seed", type=int, help="data seed (overrides data.seed)")
    ap.add_argument("--format", choices=("csv", "json"), help="table format (overrides run.format)")
    ap.add_argument("--quiet", action="store_true")
    return ap


def run(command: str, config: ExperimentConfig, out_dir: Path | None = None, fmt: str | None = None,
        quiet: bool = True) -> int:
    """Execute one subcommand and write its manifest; returns the exit status."""
    if command not in COMMANDS:
        raise ValueError(f"unknown subcommand {command!r}")
    started = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else Path(config.run.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    ctx = Run(out, fmt or config.run.format, quiet)
    status = {"ok": True, "exit_code": 0}
    try:
        COMMANDS[command](config, ctx)
    except (NumericalFailure, BlowUpError, FloatingPointError) as exc:
        status = {"ok": False, "exit_code": 3, "error": f"numerical failure: {exc}"}
    except OSError as exc:
        status = {"ok": False, "exit_code": 4, "error": f"I/O error: {exc}"}
    except ValueError as exc:
        status = {"ok": False, "exit_code": 2, "error": f"invalid input: {exc}"}
    try:
        ctx.manifest(config, command, started, status)
    except OSError as exc:
        print(f"I/O error writing manifest: {exc}", file=sys.stderr)
        return 4
    if not status["ok"]:
        print(status["error"], file=sys.stderr)
    return status["exit_code"]


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    cfg = None
    try:
        cfg = parse_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(["--seed must be an unsigned 64-bit integer"])
            cfg = cfg.model_copy(update={"data": cfg.data.model_copy(update={"seed": args.seed})})
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        out = args.out_dir or Path("fracns_out")
        try:
            out.mkdir(parents=True, exist_ok=True)
            Run(out, "json", True).manifest(None, args.command, started,
                                            {"ok": False, "exit_code": exc.exit_code, "error": exc.violations})
        except OSError:
            pass
        return exc.exit_code

    return run(args.command, cfg, args.out_dir, args.format, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
