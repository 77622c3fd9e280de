"""Command-line experiments: configuration, orchestration and result files.

    helix <command> --config <path> [--out <dir>] [--set key=value ...] [--tol <real>] [--seed <int>]

Commands: greens-check, kernel-check, simulate, rotation-sweep,
straight-filament, sigma-sweep.  Every run writes ``manifest.json`` into the
output directory once it finishes.  Exit codes: 0 all checks pass, 1 a check
failed, 2 configuration error, 3 numerical blowup.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field as dc_field, replace

import numpy as np

from . import __version__
from .biot_savart import (
    KernelParams,
    g_transport,
    k1_leading,
    k2_leading,
    kernel_K1,
    kernel_K2,
)
from .diagnostics import (
    ROTATION_SLOPE,
    fit_rotation,
    mass_outside,
    write_diagnostics_csv,
)
from .errors import ConfigError, InsufficientDataError, IntegrationBlowupError, ValidationError
from .greens import SINGULAR_CONSTANT, GreensParams, green, green_bessel
from .vortex_sim import InitProfile, SimConfig, init_blob, simulate

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3
COMMANDS = ("greens_check", "kernel_check", "simulate", "rotation_sweep", "straight_filament", "sigma_sweep")

DEFAULTS = {
    "epsilon": 0.05,
    "sigma": [1.0, 0.0],
    "t_end": 0.0,
    "dt": None,
    "record_every": 10,
    "snapshot_every": 0,
    "blowup_displacement": 1.0,
    "profile": {"kind": "compact_bump", "core_resolution": 16},
    "kernel": {"quad_panels": 2, "quad_order": 16, "near_threshold": 1.0, "image_count": 8},
    "epsilons": [0.1, 0.05, 0.02, 0.01],
    "sigmas": [0.5, 0.2, 0.1, 0.0],
    "tolerance": None,
    "checks": {"center_factor": 5.0, "concentration_factor": 5.0, "center_gap_factor": 3.0},
    "greens_check": {"n_radii": 20, "n_heights": 10, "rho_min": 0.3, "rho_max": 3.0, "bessel_terms": 96, "image_count": 64},
    "kernel_check": {"distances": [1e-2, 1e-3, 1e-4], "n_pairs": 100},
}

# primary tolerance of each command (overridable with --tol or "tolerance")
DEFAULT_TOL = {
    "greens_check": 1e-8,
    "kernel_check": 1e-8,
    "simulate": 1e-3,
    "rotation_sweep": 0.2,
    "straight_filament": 10.0,
    "sigma_sweep": 10.0,
}


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    config_path: str | None
    out_dir: str
    seed: int = 0
    overrides: tuple = ()
    tol: float | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError("command", f"unknown command {self.command!r}")


@dataclass
class RunSettings:
    """A validated configuration: the raw merged document plus the derived SimConfig."""

    raw: dict
    sim: SimConfig

    @property
    def epsilons(self) -> list:
        return list(self.raw["epsilons"])

    @property
    def sigmas(self) -> list:
        return [tuple(s) if isinstance(s, (list, tuple)) else (float(s), 0.0) for s in self.raw["sigmas"]]


@dataclass
class RunManifest:
    spec: dict
    settings: dict
    version: str
    duration_s: float = 0.0
    exit_code: int = EXIT_PASS
    checks: dict = dc_field(default_factory=dict)
    message: str = ""

    def check(self, name: str, value: float, limit: float, passed: bool | None = None) -> bool:
        ok = bool(value < limit) if passed is None else bool(passed)
        self.checks[name] = {"value": _jsonable(value), "limit": _jsonable(limit), "passed": ok}
        return ok

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=_jsonable)
        return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def _merge(base: dict, update: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ValidationError(name, "unknown configuration key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValidationError(name, "expected an object")
            out[key] = _merge(base[key], value, prefix=name + ".")
        else:
            out[key] = value
    return out


def _parse_override(item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, text = item.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    node: dict = {}
    cursor = node
    parts = key.strip().split(".")
    for part in parts[:-1]:
        cursor[part] = {}
        cursor = cursor[part]
    cursor[parts[-1]] = value
    return node


def _number(raw: dict, name: str, path=None):
    value = raw[name] if path is None else raw[path][name]
    label = name if path is None else f"{path}.{name}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(label, f"expected a number, got {value!r}")
    return value


def _build_sim(raw: dict) -> SimConfig:
    for name in ("epsilon", "t_end", "blowup_displacement"):
        _number(raw, name)
    if raw["dt"] is not None:
        _number(raw, "dt")
    sigma = raw["sigma"]
    if not isinstance(sigma, (list, tuple)) or len(sigma) != 2:
        raise ValidationError("sigma", "expected a pair [s1, s2]")
    k = raw["kernel"]
    for name in k:
        _number(raw, name, "kernel")
    try:
        kernel = KernelParams(
            greens=GreensParams(image_count=int(k["image_count"])),
            quad_panels=int(k["quad_panels"]),
            quad_order=int(k["quad_order"]),
            near_threshold=float(k["near_threshold"]),
        )
    except ValueError as exc:
        raise ValidationError("kernel", str(exc)) from None
    profile = InitProfile(kind=raw["profile"]["kind"], core_resolution=raw["profile"]["core_resolution"])
    return SimConfig(
        epsilon=raw["epsilon"],
        sigma=tuple(sigma),
        t_end=raw["t_end"],
        dt=raw["dt"],
        profile=profile,
        kernel=kernel,
        record_every=raw["record_every"],
        snapshot_every=raw["snapshot_every"],
        blowup_displacement=raw["blowup_displacement"],
    )


def load_settings(path: str | None, overrides=()) -> RunSettings:
    """Read a JSON config, apply ``key=value`` overrides (dotted keys for nested), validate."""
    doc: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc.msg}", exc.lineno, exc.colno) from None
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must hold a JSON object", 1, 1)
    raw = _merge(DEFAULTS, doc)
    for item in overrides:
        raw = _merge(raw, _parse_override(item))
    if not isinstance(raw["epsilons"], list) or not all(isinstance(e, (int, float)) and 0 < e < 0.5 for e in raw["epsilons"]):
        raise ValidationError("epsilons", "expected a list of numbers in (0, 0.5)")
    if not isinstance(raw["sigmas"], list):
        raise ValidationError("sigmas", "expected a list")
    if raw["tolerance"] is not None:
        _number(raw, "tolerance")
    return RunSettings(raw=raw, sim=_build_sim(raw))


def load_config(path: str | None, overrides=()) -> SimConfig:
    return load_settings(path, overrides).sim


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


def run_greens_check(settings: RunSettings, manifest: RunManifest, out_dir: str, tol: float) -> None:
    g = settings.raw["greens_check"]
    params = GreensParams(bessel_terms=int(g["bessel_terms"]), image_count=int(g["image_count"]))
    radii = np.linspace(g["rho_min"], g["rho_max"], int(g["n_radii"]))
    heights = -np.pi + 2 * np.pi * np.arange(int(g["n_heights"])) / int(g["n_heights"])
    rows = []
    for i, rho in enumerate(radii):
        for x3 in heights:
            phi = 0.37 * i
            x = np.array([rho * math.cos(phi), rho * math.sin(phi), x3])
            gb = green_bessel(x, params)
            gi = green(x, params)
            rows.append((x[0], x[1], x[2], gb, gi, abs(gb - gi)))
    write_csv(os.path.join(out_dir, "greens_check.csv"), ("x1", "x2", "x3", "g_bessel", "g_image", "abs_err"), rows)
    manifest.check("max_abs_err", max(r[5] for r in rows), tol)
    r = 1e-5
    limit = green(np.array([r, 0.0, 0.0]), params) - 1.0 / (4 * np.pi * r)
    manifest.check("singular_constant_err", abs(limit - SINGULAR_CONSTANT), 1e-4)


def run_kernel_check(settings: RunSettings, manifest: RunManifest, out_dir: str, tol: float, seed: int) -> None:
    params = settings.sim.kernel
    x = np.array([1.0, 0.0])
    rows1, rows2 = [], []
    for d in settings.raw["kernel_check"]["distances"]:
        y = x + d * np.array([math.cos(0.7), math.sin(0.7)])
        k1, p1 = kernel_K1(x, y, params), k1_leading(x, y)
        k2, p2 = kernel_K2(x, y, params), k2_leading(x, y)
        rows1.append((d, k1, p1, k1 - p1))
        rows2.append((d, k2, p2, k2 - p2))
    write_csv(os.path.join(out_dir, "kernel_check.csv"), ("dist", "k1", "k1_pred", "band"), rows1)
    write_csv(os.path.join(out_dir, "kernel_check_k2.csv"), ("dist", "k2", "k2_pred", "band"), rows2)
    bands1 = [r[3] for r in rows1]
    bands2 = [r[3] for r in rows2]
    manifest.check("k1_band_variation", max(bands1) - min(bands1), 2.0)
    manifest.check("k2_band_variation", max(bands2) - min(bands2), 3.0)

    rng = np.random.default_rng(seed)
    rows = []
    n = int(settings.raw["kernel_check"]["n_pairs"])
    while len(rows) < n:
        p = np.concatenate([rng.uniform(-2, 2, 2), rng.uniform(-np.pi, np.pi, 1)])
        q = np.concatenate([rng.uniform(-2, 2, 2), rng.uniform(-np.pi, np.pi, 1)])
        if not 0.1 <= np.linalg.norm(p - q) <= 3.0:
            continue
        res = g_transport(p, q, params) + g_transport(q, p, params)
        rows.append((*p, *q, res))
    write_csv(os.path.join(out_dir, "g_antisymmetry.csv"), ("x1", "x2", "x3", "y1", "y2", "y3", "residual"), rows)
    manifest.check("g_antisymmetry_max", max(abs(r[6]) for r in rows), tol)


def _simulate_to(out_dir: str, config: SimConfig, backend=None, name: str = "diagnostics.csv"):
    cfg = replace(config, out_dir=out_dir)
    traj = simulate(cfg, backend=backend)
    write_diagnostics_csv(os.path.join(out_dir, name), traj.records)
    return traj


def run_simulate(settings: RunSettings, manifest: RunManifest, out_dir: str, tol: float, backend=None) -> None:
    cfg = settings.sim
    traj = _simulate_to(out_dir, cfg, backend)
    recs = traj.records
    r0 = recs[0]
    manifest.check("mass_drift", max(abs(r.mass - r0.mass) for r in recs), 1e-12)
    manifest.check("M1_rel_drift", max(abs(r.M1 - r0.M1) for r in recs) / abs(r0.M1) if r0.M1 else 0.0, tol)
    manifest.check("E_pair_rel_drift", max(abs(r.E_pair - r0.E_pair) for r in recs) / abs(r0.E_pair), 1e-2)
    manifest.check("identity_D1", max(abs(r.D1 + r.p[0] ** 2 + r.p[1] ** 2 - r.M1) for r in recs), 1e-12)
    manifest.check("identity_D2", max(abs(r.D2 + 2 * (r.p[0] ** 2 + r.p[1] ** 2) - 2 * r.M1) for r in recs), 1e-12)
    if math.hypot(*cfg.sigma) > 0:
        c = settings.raw["checks"]
        log_inv = math.log(1.0 / cfg.epsilon)
        last = recs[-1]
        manifest.check("mass_out_weighted", last.mass_out_sqrt_eps, c["concentration_factor"] / log_inv, passed=last.mass_out_sqrt_eps <= c["concentration_factor"] / log_inv)
        gap = math.hypot(last.p_star[0] - last.p[0], last.p_star[1] - last.p[1])
        manifest.check("center_gap", gap, c["center_gap_factor"] / log_inv, passed=gap <= c["center_gap_factor"] / log_inv)


def run_rotation_sweep(settings: RunSettings, manifest: RunManifest, out_dir: str, tol: float, backend=None):
    eps_list = settings.epsilons
    if len(eps_list) < 3:
        raise InsufficientDataError("rotation sweep needs at least 3 epsilons")
    fields = [init_blob(replace(settings.sim, epsilon=e, sigma=(1.0, 0.0), dt=None)) for e in eps_list]
    fit = fit_rotation(eps_list, fields, settings.sim.kernel, backend)
    rows = [(e, math.log(1 / e), w, ROTATION_SLOPE * math.log(1 / e)) for e, w in zip(eps_list, fit.omegas)]
    write_csv(os.path.join(out_dir, "rotation.csv"), ("epsilon", "log_inv_eps", "omega", "omega_pred"), rows)
    with open(os.path.join(out_dir, "rotation_fit.json"), "w") as fh:
        json.dump({k: _jsonable(v) for k, v in asdict(fit).items()}, fh, indent=2, default=_jsonable)
    manifest.check("slope_rel_err", fit.relative_slope_error, tol)
    manifest.check("max_omega", max(fit.omegas), 0.0)
    return fit


def run_straight_filament(settings: RunSettings, manifest: RunManifest, out_dir: str, tol: float, backend=None) -> None:
    cfg = replace(settings.sim, sigma=(0.0, 0.0))
    traj = _simulate_to(out_dir, cfg, backend)
    eps = cfg.epsilon
    max_p = max(math.hypot(*r.p) for r in traj.records)
    manifest.check("center_max", max_p, settings.raw["checks"]["center_factor"] * eps)
    plain, _ = mass_outside(traj.final, (0.0, 0.0), math.sqrt(eps))
    manifest.check("mass_outside", plain, tol * eps, passed=plain <= tol * eps)


def run_sigma_sweep(settings: RunSettings, manifest: RunManifest, out_dir: str, tol: float, backend=None) -> None:
    sigmas = settings.sigmas
    if not sigmas:
        raise InsufficientDataError("sigma sweep needs at least one sigma")
    eps = settings.sim.epsilon
    rows = []
    for k, sigma in enumerate(sigmas):
        cfg = replace(settings.sim, sigma=sigma)
        traj = _simulate_to(out_dir, cfg, backend, name=f"diagnostics_sigma_{k}.csv")
        scale = eps * eps + sigma[0] ** 2 + sigma[1] ** 2
        radius = scale**0.25
        plain, _ = mass_outside(traj.final, (0.0, 0.0), radius)
        bound = tol * math.sqrt(scale)
        ok = plain <= bound
        rows.append((sigma[0], sigma[1], radius, plain, bound, float(ok)))
        manifest.check(f"sigma_{k}_mass_outside", plain, bound, passed=ok)
    write_csv(os.path.join(out_dir, "sigma_sweep.csv"), ("sigma1", "sigma2", "radius", "mass_out", "bound", "passed"), rows)


# --------------------------------------------------------------------------
# CLI
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helix", description="Helical vortex filament experiments.")
    parser.add_argument("command", choices=[c.replace("_", "-") for c in COMMANDS])
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default=".", help="output directory (created if missing)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration value; dotted keys reach nested sections")
    parser.add_argument("--tol", type=float, default=None, help="primary tolerance of the command")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    return parser


def run(spec: ExperimentSpec, backend: str | None = None) -> int:
    """Execute one experiment; always returns an exit code, writes the manifest when possible."""
    start = time.perf_counter()
    manifest = RunManifest(spec=asdict(spec), settings={}, version=__version__)
    code = EXIT_PASS
    try:
        os.makedirs(spec.out_dir, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        settings = load_settings(spec.config_path, spec.overrides)
        manifest.settings = settings.raw
        tol = spec.tol if spec.tol is not None else settings.raw["tolerance"]
        tol = DEFAULT_TOL[spec.command] if tol is None else float(tol)
        if spec.command == "greens_check":
            run_greens_check(settings, manifest, spec.out_dir, tol)
        elif spec.command == "kernel_check":
            run_kernel_check(settings, manifest, spec.out_dir, tol, spec.seed)
        elif spec.command == "simulate":
            run_simulate(settings, manifest, spec.out_dir, tol, backend)
        elif spec.command == "rotation_sweep":
            run_rotation_sweep(settings, manifest, spec.out_dir, tol, backend)
        elif spec.command == "straight_filament":
            run_straight_filament(settings, manifest, spec.out_dir, tol, backend)
        elif spec.command == "sigma_sweep":
            run_sigma_sweep(settings, manifest, spec.out_dir, tol, backend)
        code = EXIT_PASS if manifest.all_passed else EXIT_FAIL
        failed = [k for k, c in manifest.checks.items() if not c["passed"]]
        manifest.message = "all checks passed" if not failed else "failed: " + ", ".join(failed)
    except (ConfigError, ValidationError, InsufficientDataError) as exc:
        code = EXIT_CONFIG
        manifest.message = f"configuration error: {exc}"
    except IntegrationBlowupError as exc:
        code = EXIT_BLOWUP
        manifest.message = f"blowup at step {exc.step}: {exc}"
    manifest.exit_code = code
    manifest.duration_s = time.perf_counter() - start
    manifest.write(spec.out_dir)
    for name, c in manifest.checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['value']} (limit {c['limit']})")
    print(manifest.message, file=sys.stderr if code else sys.stdout)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExperimentSpec(
        command=args.command.replace("-", "_"),
        config_path=args.config,
        out_dir=args.out,
        seed=args.seed,
        overrides=tuple(args.overrides),
        tol=args.tol,
    )
    return run(spec)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
