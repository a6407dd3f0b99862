"""Command-line pipelines: potential, bounds, spectrum, disk and verify.

Each run reads one TOML config (shipped defaults live in ``configs/``),
applies command-line overrides, writes its tables into the output directory
and exits with status 0 only when every check it performs passes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import bounds as bd
from . import disk_exact as de
from . import spectrum as spc
from .geometry import DomainSpec, InvalidDomain, build_grid, domain_from_dict, geometry_report
from .potential import (
    MagneticField,
    UnsupportedDomain,
    analytic_psi,
    export_contours_csv,
    export_field_csv,
    find_minimizers,
    solve_poisson,
)

OUTPUT_ENV = "PAULI_TORSION_OUT"
SUBCOMMANDS = ("potential", "bounds", "spectrum", "disk", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    domain: DomainSpec
    field: MagneticField
    spacing: float
    h_list: list[float]
    formulations: set[str]
    outputs: Path
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def digest(self):
        """Hash of the computational inputs; where results are written is left out."""
        inputs = {k: v for k, v in self.raw.items() if k != "output"}
        blob = json.dumps(inputs, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def header(self, *provenance):
        return [f"config_sha256 {self.digest}"] + [f"source {p}" for p in provenance]


def _field_from_config(cfg: dict) -> MagneticField:
    if "expr" in cfg:
        expr = str(cfg["expr"])
        namespace = {k: getattr(np, k) for k in ("exp", "sin", "cos", "sqrt", "log", "pi", "tanh", "cosh")}

        def func(x, y):
            return eval(expr, {"__builtins__": {}}, {**namespace, "x": x, "y": y})

        return MagneticField.formula(func)
    return MagneticField.constant(float(cfg.get("B0", 1.0)))


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _apply_override(raw: dict, assignment: str):
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like section.key=value")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} does not name a table field")
    node[parts[-1]] = _parse_value(value.strip())


def load_config(path, overrides=(), args=None) -> RunConfig:
    """Read a TOML config and apply ``section.key=value`` overrides and flags."""
    if path is None:
        raw = {}
    else:
        try:
            raw = tomllib.loads(Path(path).read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for ov in overrides:
        _apply_override(raw, ov)
    if args is not None:
        if getattr(args, "spacing", None) is not None:
            raw.setdefault("grid", {})["spacing"] = args.spacing
        if getattr(args, "h", None):
            raw.setdefault("spectrum", {})["h"] = [float(v) for v in args.h.split(",")]
        if getattr(args, "formulation", None):
            raw.setdefault("spectrum", {})["formulations"] = [args.formulation]
        if getattr(args, "out", None):
            raw.setdefault("output", {})["directory"] = args.out

    try:
        domain = domain_from_dict(raw.get("domain", {"kind": "disk", "R": 1.0}))
    except InvalidDomain as exc:
        raise ConfigError(f"[domain] {exc}") from None
    fcfg = raw.get("field", {})
    if not isinstance(fcfg, dict):
        raise ConfigError("[field] must be a table")
    fld = _field_from_config(fcfg)
    spacing = raw.get("grid", {}).get("spacing", 1 / 64)
    if not isinstance(spacing, (int, float)) or not spacing > 0:
        raise ConfigError(f"[grid] spacing must be a positive number, got {spacing!r}")
    scfg = raw.get("spectrum", {})
    h_list = scfg.get("h", [0.3, 0.2, 0.1])
    if not all(isinstance(h, (int, float)) and h > 0 for h in h_list):
        raise ConfigError(f"[spectrum] h must be a list of positive numbers, got {h_list!r}")
    forms = set(scfg.get("formulations", ["weighted_cr"]))
    bad = forms - {"weighted_cr", "direct_pauli"}
    if bad:
        raise ConfigError(f"[spectrum] formulations: unknown {sorted(bad)}")
    out = os.environ.get(OUTPUT_ENV) or raw.get("output", {}).get("directory", "out")
    if args is not None and getattr(args, "out", None):
        out = args.out
    options = {
        "tol": float(scfg.get("tol", 1e-8)),
        "n_fit": int(scfg.get("n_fit", 5)),
        "convergence_tol": scfg.get("convergence_tol", 0.05),
        "rate_tol": float(scfg.get("rate_tol", 0.15)),
        "contour_levels": raw.get("potential", {}).get("contour_levels"),
        "bounds_h": raw.get("bounds", {}).get("h", [0.1]),
        "disk": raw.get("disk", {}),
    }
    return RunConfig(domain, fld, float(spacing), [float(h) for h in h_list], forms, Path(out), options, raw)


def _prepare_output(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    try:
        with tempfile.NamedTemporaryFile(dir=path):
            pass
    except OSError as exc:
        raise ConfigError(f"output directory {path} is not writable: {exc}") from None
    return path


def _report(ok, label, detail):
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    return ok


# --- subcommands -------------------------------------------------------------------


def run_potential(cfg: RunConfig) -> int:
    grid = build_grid(cfg.domain, cfg.spacing)
    psi = solve_poisson(grid, cfg.field)
    rep = find_minimizers(psi, B=cfg.field)
    out = cfg.outputs
    header = cfg.header("scalar potential, lap psi = B with psi = 0 on the boundary")
    export_field_csv(psi, out / "psi.csv", header)
    levels = cfg.options["contour_levels"]
    if levels is None:
        levels = list(np.linspace(rep.psi_min, 0.0, 12)[1:-1])
    export_contours_csv(psi, levels, out / "psi_contours.csv", header + ["source level lines of psi"])
    mins = [{"point": list(m.point), "value": m.value, "hessian": np.asarray(m.hessian).tolist(),
             "degenerate": m.degenerate} for m in rep.minimizers]
    report = {"config_sha256": cfg.digest, "source": "minima of psi, quadratic fit around each discrete minimum",
              "psi_min": rep.psi_min, "cluster_tolerance": rep.cluster_tolerance,
              "minimizers": mins}
    (out / "minimizers.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"psi_min = {rep.psi_min:.10f} on {grid.n_interior} nodes, {len(mins)} minimizer(s)")
    for m in rep.minimizers:
        print(f"  minimizer at ({m.point[0]:.6f}, {m.point[1]:.6f}) value {m.value:.10f} "
              f"det Hess {m.det_hessian:.6f}{' degenerate' if m.degenerate else ''}")
    ok = True
    if cfg.field.kind == "constant":
        try:
            ref = analytic_psi(cfg.domain, cfg.field.B0).psi_min
        except UnsupportedDomain:
            ref = None
        if ref is not None:
            ok &= _report(abs(rep.psi_min - ref) <= 5e-4, "closed-form psi_min",
                          f"{rep.psi_min:.6f} vs {ref:.6f}")
    return 0 if ok else 1


def run_bounds(cfg: RunConfig) -> int:
    grid = build_grid(cfg.domain, cfg.spacing)
    psi = solve_poisson(grid, cfg.field)
    rep = find_minimizers(psi, B=cfg.field)
    lamD = spc.dirichlet_lambda(grid)
    geom = geometry_report(cfg.domain, grid)
    ledgers = []
    ok = True
    for h in cfg.options["bounds_h"]:
        led = bd.assemble_ledger(float(h), cfg.domain, cfg.field, rep.psi_min, rep, lamD, grid, geom,
                                 psi_tolerance=10 * cfg.spacing**2 * float(np.abs(cfg.field.on_grid(grid)).max()))
        ledgers.append(bd.ledger_to_dict(led))
        for c in led.checks:
            ok &= _report(c.passed, f"h={h} {c.name}", c.detail)
    doc = {"config_sha256": cfg.digest,
           "source": "exponential lower and Laplace upper energy bounds, geometric bounds on psi_min",
           "lambda_dirichlet": lamD,
           "geometry": {"area": geom.area, "diameter": geom.diameter, "width": geom.width,
                        "inradius": geom.inradius, "convex": geom.convex},
           "ledgers": ledgers}
    (cfg.outputs / "bounds.json").write_text(json.dumps(doc, indent=2) + "\n")
    return 0 if ok else 1


def run_spectrum(cfg: RunConfig) -> int:
    grid = build_grid(cfg.domain, cfg.spacing)
    psi = solve_poisson(grid, cfg.field)
    ok = True
    for form in sorted(cfg.formulations):
        if len(cfg.h_list) >= 4:
            ctol = cfg.options["convergence_tol"]
            try:
                result = spc.semiclassical_sweep(cfg.domain, cfg.field, cfg.h_list, form, cfg.spacing,
                                                 cfg.options["n_fit"], cfg.options["tol"], ctol,
                                                 grid=grid, psi=psi)
            except spc.InsufficientRange as exc:
                ok &= _report(False, f"{form} exponential rate", str(exc))
                continue
        else:
            from .potential import vector_potential

            A1, A2 = vector_potential(psi)
            rows = []
            for h in sorted(cfg.h_list, reverse=True):
                op = (spc.assemble_weighted_form(grid, psi, h) if form == "weighted_cr"
                      else spc.assemble_pauli(grid, A1, A2, cfg.field, h))
                r = spc.smallest_eigs(op, 1, cfg.options["tol"])
                rows.append(spc.SweepRow(h, float(r.eigenvalues[0]), float(r.residual_norms[0]), form, True))
            result = spc.SweepResult(rows, None, float(psi.values.min()))
        spc.export_sweep_csv(result, cfg.outputs / f"sweep_{form}.csv",
                             cfg.header("lowest Pauli eigenvalue versus h", f"formulation {form}"))
        for r in result.rows:
            print(f"{form} h={r.h:g}: lambda = {r.lam:.10e}{'' if r.usable else ' (unresolved)'}")
        neg = [r for r in result.rows if r.usable and r.lam < -cfg.options["tol"]]
        ok &= _report(not neg, f"{form} non-negativity", f"{len(neg)} negative eigenvalues")
        if result.fit is not None:
            target = 2 * result.psi_min
            rel = abs(result.fit.intercept / target - 1)
            ok &= _report(rel <= cfg.options["rate_tol"], f"{form} exponential rate",
                          f"fit {result.fit.intercept:.5f} +- {result.fit.stderr:.1e} vs 2 psi_min {target:.5f}")
    return 0 if ok else 1


def run_disk(cfg: RunConfig) -> int:
    d = cfg.options["disk"]
    B = float(d.get("B", 1.0))
    R = float(d.get("R", 1.0))
    hs = [float(h) for h in d.get("h", [0.2, 0.1, 0.05])]
    m_max = int(d.get("m_max", 2))
    k_max = int(d.get("k_max", 1))
    spectra = []
    ok = True
    for h in hs:
        for m in range(m_max + 1):
            s = de.channel_spectrum(de.RadialChannel(m, h, B, R), k_max)
            spectra.append(s)
            lam = s.eigenvalues[0]
            if s.temple_lower is not None:
                ok &= _report(s.temple_lower <= lam <= s.rayleigh_upper, f"h={h} m={m} Temple enclosure",
                              f"{s.temple_lower:.6e} <= {lam:.6e} <= {s.rayleigh_upper:.6e}")
            floor_ok = all(v >= 2 * h * B * k * (1 - 1e-12) for k, v in enumerate(s.eigenvalues))
            ok &= _report(floor_ok, f"h={h} m={m} Landau floor", "lambda_k >= 2hBk")
            ratio = "" if s.ratio is None else f", ratio to asymptotic {s.ratio:.6f}"
            print(f"  h={h} m={m}: lambda_0 = {lam:.10e}{ratio}")
    de.export_channel_csv(spectra, cfg.outputs / "disk_channels.csv",
                          cfg.header("radial channels of the disk, Kummer roots and Temple bounds"))
    return 0 if ok else 1


def run_verify(cfg: RunConfig | None, selected=None) -> int:
    from .acceptance import run_all

    results = run_all(selected)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return 0 if not failed else 1


def default_config_path(name: str) -> Path:
    return Path(str(resources.files("pauli_torsion").joinpath("configs", f"{name}.toml")))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pauli-torsion", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", nargs="?", help="TOML config file or name of a shipped config")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config field (repeatable)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--spacing", type=float, help="grid spacing")
        s.add_argument("--h", help="comma-separated list of h values")
        s.add_argument("--formulation", choices=["weighted_cr", "direct_pauli"])
        if name == "verify":
            s.add_argument("--only", help="comma-separated criterion numbers")
    return p


def _resolve_config(arg):
    if arg is None:
        return None
    path = Path(arg)
    if path.exists():
        return path
    shipped = default_config_path(arg)
    if shipped.exists():
        return shipped
    raise ConfigError(f"config {arg!r} not found")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(_resolve_config(args.config), args.set, args)
        if args.command == "verify":
            selected = {int(v) for v in args.only.split(",")} if args.only else None
            return run_verify(cfg, selected)
        _prepare_output(cfg.outputs)
        runner = {"potential": run_potential, "bounds": run_bounds, "spectrum": run_spectrum,
                  "disk": run_disk}[args.command]
        return runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surface component errors with their module
        mod = type(exc).__module__
        print(f"error in {mod}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
