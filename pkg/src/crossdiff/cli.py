"""Scenario files, batch runs, sweeps and report emission.

Scenario format: ``[section]`` headers followed by ``key = value`` lines;
``#`` starts a comment. Vectors are comma separated, matrices use ``;``
between rows. Sections:

    [grid]        extents, cells, bc, origin
    [model]       m, diffusion, diffusion.<param>, reaction, reaction.<param>, k, ell
    [initial]     kind (constant | trig | bump | eigen | file) and its parameters
    [run]         T_end, safety, threshold, dt_min, dt_max, reaction_fraction,
                  output_interval, diagnostics, accumulate, bmo_sizes, slab_R, max_steps
    [certificate] kind (none | scalar | system | convection), k, kappa, gamma,
                  convection, samples, box, nonnegative, exclude_radius
    [exact]       solution (js), times
    [sweep]       param (section.key or section.key[i]), values
    [output]      dir, seed

Exit codes: 0 reached T_end or certificate-only run, 2 configuration
error, 10 blow-up detected, 11 step-size floor, 12 non-finite value,
13 I/O failure, 14 wall-clock limit.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import certificates, dynamics, exact, functionals
from .errors import ConfigError
from .mesh import BC, FieldSet, build_grid, field_from_text, field_to_text
from .models import DIFFUSION_FAMILIES, REACTION_FAMILIES, build_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 10
EXIT_FLOOR = 11
EXIT_NUMERICAL = 12
EXIT_IO = 13
EXIT_WALL = 14

EXIT_CODES = {
    dynamics.REACHED_T: EXIT_OK,
    dynamics.BLOWUP: EXIT_BLOWUP,
    dynamics.DT_FLOOR: EXIT_FLOOR,
    dynamics.NUMERICAL_FAILURE: EXIT_NUMERICAL,
    dynamics.WALL_LIMIT: EXIT_WALL,
}

INITIAL_KINDS = ("constant", "trig", "bump", "eigen", "file")
CERTIFICATE_KINDS = ("none", "scalar", "system", "convection")

# (parser, default); a default of REQUIRED must be given
REQUIRED = object()


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    out = []
    for x in text.split(","):
        v = float(x)
        if v != int(v):
            raise ValueError(f"{x.strip()} is not an integer")
        out.append(int(v))
    return out


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _opt_float(text: str):
    return None if text.strip().lower() == "none" else float(text)


SCHEMA: dict[str, dict[str, tuple]] = {
    "grid": {"extents": (_floats, REQUIRED), "cells": (_ints, REQUIRED), "bc": (str, "neumann0"), "origin": (_floats, None)},
    "model": {"m": (int, 1), "diffusion": (str, REQUIRED), "reaction": (str, "none"), "k": (_opt_float, None), "ell": (float, 1.0)},
    "initial": {
        "kind": (str, REQUIRED),
        "value": (_floats, [0.0]),
        "amplitude": (_floats, [1.0]),
        "modes": (str, "1"),
        "coefficients": (_floats, None),
        "basis": (str, "sin"),
        "random_modes": (int, 0),
        "offset": (_floats, [0.0]),
        "center": (_floats, None),
        "width": (float, 0.1),
        "path": (str, None),
    },
    "run": {
        "T_end": (float, REQUIRED),
        "safety": (float, 0.5),
        "threshold": (float, 1e6),
        "dt_min": (float, 1e-12),
        "dt_max": (float, 1e-2),
        "reaction_fraction": (_opt_float, 0.05),
        "output_interval": (_opt_float, None),
        "diagnostics": (_names, ["l2"]),
        "accumulate": (_names, []),
        "bmo_sizes": (_floats, None),
        "slab_R": (_opt_float, None),
        "max_steps": (int, 50_000_000),
    },
    "certificate": {
        "kind": (str, "none"),
        "k": (float, None),
        "kappa": (float, None),
        "gamma": (float, 2.0),
        "convection": (_floats, None),
        "samples": (int, 100_000),
        "box": (_opt_float, None),
        "nonnegative": (_bool, False),
        "exclude_radius": (float, 0.0),
        "A_const": (float, 0.0),
    },
    "exact": {"solution": (str, "js"), "times": (_floats, REQUIRED)},
    "sweep": {"param": (str, REQUIRED), "values": (str, REQUIRED)},
    "output": {"dir": (str, "out"), "seed": (int, 0)},
}


@dataclass
class ScenarioConfig:
    sections: dict[str, dict[str, object]]
    raw: dict[str, dict[str, tuple[str, int]]]
    base_dir: Path = Path(".")
    sweep_values: list[str] = field(default_factory=list)
    grid: object = None
    model: object = None

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    @property
    def seed(self) -> int:
        return int(self.get("output", "seed", 0))

    @property
    def out_dir(self) -> Path:
        p = Path(self.get("output", "dir", "out"))
        return p if p.is_absolute() else self.base_dir / p

    def model_config(self) -> dict:
        model = self.sections["model"]
        cfg = {"m": model["m"], "k": model["k"], "ell": model["ell"]}
        cfg["diffusion"] = {"family": model["diffusion"], **model.get("diffusion.", {})}
        cfg["reaction"] = {"family": model["reaction"], **model.get("reaction.", {})}
        return cfg

    def to_text(self) -> str:
        """Every section with defaults materialized, in schema order."""
        lines = []
        for name in SCHEMA:
            if name not in self.sections:
                continue
            lines.append(f"[{name}]")
            sec = self.sections[name]
            for key in SCHEMA[name]:
                val = sec.get(key)
                # unset options stay visible but re-parse to their default
                lines.append(f"# {key} = unset" if val is None else f"{key} = {_render(val)}")
            for prefix in ("diffusion.", "reaction."):
                for key, val in sorted(sec.get(prefix, {}).items()):
                    lines.append(f"{prefix}{key} = {_render(val)}")
            lines.append("")
        return "\n".join(lines)

    def children(self) -> list[ScenarioConfig]:
        """One validated config per sweep value, output under per-child directories."""
        return [self.child(i) for i in range(len(self.sweep_values))]

    def child(self, i: int) -> ScenarioConfig:
        param = self.sections["sweep"]["param"]
        value = self.sweep_values[i]
        raw = {s: dict(v) for s, v in self.raw.items() if s != "sweep"}
        section, key, index = _sweep_target(param, self.raw["sweep"]["param"][1])
        line = self.raw["sweep"]["values"][1]
        if index is None:
            raw.setdefault(section, {})[key] = (value, line)
        else:
            old, old_line = raw.get(section, {}).get(key, (None, line))
            if old is None:
                raise ConfigError(f"sweep target {param} has no base value", line)
            parts = [p.strip() for p in old.split(",")]
            if index >= len(parts):
                raise ConfigError(f"sweep index {index} out of range for {section}.{key}", line)
            parts[index] = value
            raw[section][key] = (",".join(parts), old_line)
        raw.setdefault("output", {})["dir"] = (str(Path(self.get("output", "dir", "out")) / f"child_{i:03d}"), line)
        return _materialize(raw, self.base_dir)


def _render(val) -> str:
    if val is None:
        return "none"
    if isinstance(val, bool):
        return str(val).lower()
    if isinstance(val, (list, tuple)):
        return ",".join(_render(v) for v in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def _sweep_target(param: str, line: int):
    index = None
    if param.endswith("]") and "[" in param:
        param, idx = param[:-1].split("[", 1)
        try:
            index = int(idx)
        except ValueError:
            raise ConfigError(f"bad sweep index in {param!r}", line) from None
    if "." not in param:
        raise ConfigError(f"sweep param must be section.key, got {param!r}", line)
    section, key = param.split(".", 1)
    if section not in SCHEMA or section == "sweep":
        raise ConfigError(f"unknown sweep section {section!r}", line)
    if key not in SCHEMA[section] and not (section == "model" and key.split(".")[0] in ("diffusion", "reaction")):
        raise ConfigError(f"unknown sweep key {key!r} in [{section}]", line)
    return section, key, index


def _split_values(text: str) -> list[str]:
    sep = ";" if ";" in text else ","
    return [v.strip() for v in text.split(sep) if v.strip()]


def _read_raw(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    raw: dict[str, dict[str, tuple[str, int]]] = {}
    section = None
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(f"malformed section header {body!r}", n)
            section = body[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", n)
            if section in raw:
                raise ConfigError(f"duplicate section [{section}]", n)
            raw[section] = {}
            continue
        if "=" not in body:
            raise ConfigError(f"expected key = value, got {body!r}", n)
        if section is None:
            raise ConfigError("key outside any section", n)
        key, value = (s.strip() for s in body.split("=", 1))
        if key in raw[section]:
            raise ConfigError(f"duplicate key {key!r}", n)
        raw[section][key] = (value, n)
    return raw


def _family_params(section_raw, prefix: str, family_cls, header_line: int) -> dict:
    allowed = set(inspect.signature(family_cls.__init__).parameters) - {"self", "m"}
    out = {}
    for key, (value, line) in section_raw.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name not in allowed:
            raise ConfigError(f"unknown parameter {name!r} for {prefix[:-1]} family {family_cls.name!r} (allowed: {', '.join(sorted(allowed))})", line)
        try:
            out[name] = float(value)
        except ValueError:
            out[name] = value
    return out


def _materialize(raw, base_dir: Path) -> ScenarioConfig:
    sections: dict[str, dict[str, object]] = {}
    for name, entries in raw.items():
        schema = SCHEMA[name]
        sec: dict[str, object] = {}
        for key, (value, line) in entries.items():
            if name == "model" and key.split(".")[0] in ("diffusion", "reaction") and "." in key:
                continue
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{name}]", line)
            parser, _ = schema[key]
            try:
                sec[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", line) from None
        for key, (_, default) in schema.items():
            if key not in sec:
                if default is REQUIRED:
                    raise ConfigError(f"missing required key {key!r} in [{name}]")
                sec[key] = list(default) if isinstance(default, list) else default
        sections[name] = sec
    for required in ("grid", "model", "initial"):
        if required not in sections:
            raise ConfigError(f"missing section [{required}]")
    if "run" not in sections and "exact" not in sections and sections.get("certificate", {}).get("kind", "none") == "none":
        raise ConfigError("nothing to do: give [run], [exact] or a [certificate] kind")
    cfg = ScenarioConfig(sections, raw, base_dir)
    _validate(cfg)
    return cfg


def _line(cfg, section, key):
    return cfg.raw.get(section, {}).get(key, (None, None))[1]


def _validate(cfg: ScenarioConfig) -> None:
    g = cfg.sections["grid"]
    try:
        cfg.grid = build_grid(g["extents"], g["cells"], _parse_bcs(g["bc"], len(g["cells"])), g["origin"])
    except ValueError as exc:
        raise ConfigError(str(exc), _line(cfg, "grid", "extents")) from None
    model = cfg.sections["model"]
    for prefix, registry in (("diffusion.", DIFFUSION_FAMILIES), ("reaction.", REACTION_FAMILIES)):
        fam = model[prefix[:-1]]
        if fam not in registry:
            raise ConfigError(f"unknown {prefix[:-1]} family {fam!r}", _line(cfg, "model", prefix[:-1]))
        model[prefix] = _family_params(cfg.raw["model"], prefix, registry[fam], _line(cfg, "model", prefix[:-1]))
    try:
        cfg.model = build_model(cfg.model_config())
    except ValueError as exc:
        bad = next((ln for key, (_, ln) in cfg.raw["model"].items() if key.split(".")[-1] in str(exc)), _line(cfg, "model", "diffusion"))
        raise ConfigError(str(exc).removeprefix(f"line {bad}: "), bad) from None
    init = cfg.sections["initial"]
    if init["kind"] not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial kind {init['kind']!r} (one of {', '.join(INITIAL_KINDS)})", _line(cfg, "initial", "kind"))
    if init["kind"] == "file" and not init["path"]:
        raise ConfigError("initial kind file needs path", _line(cfg, "initial", "kind"))
    if init["kind"] == "eigen" and not any(b.kind.startswith("dirichlet") for pair in cfg.grid.bcs for b in pair):
        raise ConfigError("initial kind eigen needs a Dirichlet boundary", _line(cfg, "initial", "kind"))
    if init["width"] <= 0:
        raise ConfigError("width must be positive", _line(cfg, "initial", "width"))
    run = cfg.sections.get("run")
    if run is not None:
        for key in ("T_end", "safety", "threshold", "dt_min", "dt_max"):
            if not run[key] > 0:
                raise ConfigError(f"{key} must be positive", _line(cfg, "run", key))
        if run["dt_min"] > run["dt_max"]:
            raise ConfigError("dt_min exceeds dt_max", _line(cfg, "run", "dt_min"))
        if run["output_interval"] is not None and not run["output_interval"] > 0:
            raise ConfigError("output_interval must be positive", _line(cfg, "run", "output_interval"))
        for key in ("diagnostics", "accumulate"):
            for name in run[key]:
                if name not in functionals.FUNCTIONALS:
                    raise ConfigError(f"unknown functional {name!r} (one of {', '.join(functionals.FUNCTIONALS)})", _line(cfg, "run", key))
        if "slab" in run["diagnostics"] and cfg.grid.dim != 3:
            raise ConfigError("slab diagnostic needs a 3d grid", _line(cfg, "run", "diagnostics"))
    cert = cfg.sections.get("certificate")
    if cert is not None:
        kind = cert["kind"]
        if kind not in CERTIFICATE_KINDS:
            raise ConfigError(f"unknown certificate kind {kind!r}", _line(cfg, "certificate", "kind"))
        if kind in ("scalar", "convection") and cert["k"] is None:
            raise ConfigError(f"{kind} certificate needs k", _line(cfg, "certificate", "kind"))
        if kind == "system" and cert["kappa"] is None:
            raise ConfigError("system certificate needs kappa", _line(cfg, "certificate", "kind"))
        if kind == "convection" and cert["convection"] is None:
            raise ConfigError("convection certificate needs convection", _line(cfg, "certificate", "kind"))
        if kind != "none" and not cfg.model.reaction.has_potential:
            raise ConfigError("certificate needs a reaction with a potential", _line(cfg, "certificate", "kind"))
        if kind == "scalar" and cfg.model.m != 1:
            raise ConfigError("scalar certificate needs m = 1", _line(cfg, "certificate", "kind"))
        if cert["k"] is not None and not 0 < cert["k"] < math.sqrt(2):
            raise ConfigError("k must lie in (0, sqrt 2)", _line(cfg, "certificate", "k"))
        if cert["kappa"] is not None and not 0 < cert["kappa"] < 0.5:
            raise ConfigError("kappa must lie in (0, 1/2)", _line(cfg, "certificate", "kappa"))
        if kind == "convection" and not cert["gamma"] > 1:
            raise ConfigError("gamma must exceed 1", _line(cfg, "certificate", "gamma"))
    ex = cfg.sections.get("exact")
    if ex is not None and ex["solution"] != "js":
        raise ConfigError(f"unknown exact solution {ex['solution']!r}", _line(cfg, "exact", "solution"))
    if ex is not None and cfg.model.diffusion.name != "js":
        raise ConfigError("exact js needs diffusion = js", _line(cfg, "exact", "solution"))
    sweep = cfg.sections.get("sweep")
    if sweep is not None:
        cfg.sweep_values = _split_values(sweep["values"])
        if not cfg.sweep_values:
            raise ConfigError("sweep values are empty", _line(cfg, "sweep", "values"))
        _sweep_target(sweep["param"], _line(cfg, "sweep", "param"))


def _parse_bcs(text: str, dim: int):
    axes = [a.strip() for a in text.split(",")]
    if len(axes) == 1:
        axes = axes * dim
    if len(axes) != dim:
        raise ValueError(f"bc lists {len(axes)} axes for a {dim}d grid")
    out = []
    for a in axes:
        lo, _, hi = a.partition("|")
        out.append((BC.parse(lo), BC.parse(hi or lo)))
    return out


def parse_scenario(text: str, base_dir: str | Path = ".") -> ScenarioConfig:
    """Parse and validate a scenario document; errors carry the offending line number."""
    return _materialize(_read_raw(text), Path(base_dir))


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text, path.parent)


# ---------------------------------------------------------------- initial data


def _per_component(values, m: int, name: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return np.full(m, float(v[0]))
    if v.size != m:
        raise ConfigError(f"{name} needs 1 or {m} values, got {v.size}")
    return v


def initial_field(cfg: ScenarioConfig) -> FieldSet:
    grid, m = cfg.grid, cfg.model.m
    init = cfg.sections["initial"]
    kind = init["kind"]
    amp = _per_component(init["amplitude"], m, "amplitude")
    if kind == "constant":
        val = _per_component(init["value"], m, "value")
        return FieldSet(grid, np.broadcast_to(val.reshape((m,) + (1,) * grid.dim), (m,) + grid.shape).copy())
    if kind == "file":
        path = Path(init["path"])
        path = path if path.is_absolute() else cfg.base_dir / path
        try:
            W = field_from_text(path.read_text())
        except OSError as exc:
            raise OSError(f"cannot read initial field {path}: {exc.strerror}") from None
        if W.values.shape != (m,) + grid.shape:
            raise ConfigError(f"initial field {path} has shape {W.values.shape}, expected {(m,) + grid.shape}")
        return FieldSet(grid, W.values)
    X = grid.mesh()
    rel = [(X[d] - grid.origin[d]) / grid.extents[d] for d in range(grid.dim)]
    if kind == "eigen":
        phi = functionals.principal_eigenpair(grid, 1.0, "sup").eigenfunction
        return FieldSet(grid, amp.reshape((m,) + (1,) * grid.dim) * phi[None])
    if kind == "bump":
        center = init["center"] if init["center"] is not None else [0.5] * grid.dim
        if len(center) != grid.dim:
            raise ConfigError(f"center needs {grid.dim} values")
        r2 = sum((rel[d] - center[d]) ** 2 for d in range(grid.dim))
        shape = np.exp(-r2 / (2 * init["width"] ** 2))
    else:
        basis = {"sin": np.sin, "cos": np.cos}.get(init["basis"])
        if basis is None:
            raise ConfigError(f"basis must be sin or cos, got {init['basis']!r}")
        if init["random_modes"] > 0:
            n = init["random_modes"]
            modes = [np.unravel_index(i, (n,) * grid.dim) for i in range(n**grid.dim)]
            modes = [tuple(int(j) + 1 for j in mo) for mo in modes]
            coefs = np.random.default_rng(cfg.seed).standard_normal(len(modes)) / np.arange(1, len(modes) + 1)
        else:
            modes = [tuple(_ints(s)) for s in init["modes"].split(";")]
            modes = [mo * grid.dim if len(mo) == 1 else mo for mo in modes]
            if any(len(mo) != grid.dim for mo in modes):
                raise ConfigError(f"each mode needs {grid.dim} integers")
            coefs = np.asarray(init["coefficients"] if init["coefficients"] is not None else [1.0] * len(modes))
            if coefs.size != len(modes):
                raise ConfigError(f"{len(modes)} modes but {coefs.size} coefficients")
        shape = np.zeros(grid.shape)
        for c, mo in zip(coefs, modes):
            term = np.full(grid.shape, float(c))
            for d in range(grid.dim):
                if mo[d] != 0:  # a zero mode is constant along that axis
                    term = term * basis(np.pi * mo[d] * rel[d])
            shape += term
    offset = _per_component(init["offset"], m, "offset")
    vals = amp.reshape((m,) + (1,) * grid.dim) * shape[None] + offset.reshape((m,) + (1,) * grid.dim)
    return FieldSet(grid, vals)


# ---------------------------------------------------------------- running


def run_config(cfg: ScenarioConfig, max_wall: float | None = None) -> dynamics.RunConfig:
    run = cfg.sections["run"]
    params = {}
    if run["bmo_sizes"] is not None:
        params["bmo_sizes"] = run["bmo_sizes"]
    if run["slab_R"] is not None:
        params["slab_R"] = run["slab_R"]
    return dynamics.RunConfig(
        safety=run["safety"],
        dt_min=run["dt_min"],
        dt_max=run["dt_max"],
        threshold=run["threshold"],
        reaction_fraction=run["reaction_fraction"],
        output_interval=run["output_interval"],
        diagnostics=tuple(run["diagnostics"]),
        accumulate=tuple(run["accumulate"]),
        params=params,
        max_steps=run["max_steps"],
        max_wall=max_wall,
    )


def certificate_report(cfg: ScenarioConfig, W0: FieldSet) -> certificates.CertificateReport:
    cert = cfg.sections["certificate"]
    model = cfg.model
    a, jac = certificates.model_maps(model)
    b = model.reaction_field
    B = model.reaction.potential
    kind = cert["kind"]
    common = dict(samples=cert["samples"])
    if kind == "scalar":
        return certificates.scalar_certificate(
            lambda u: a(np.atleast_2d(u)),
            lambda u: b(np.atleast_2d(u)),
            lambda u: B(np.atleast_2d(u)),
            cert["k"],
            W0,
            a_prime=lambda u: jac(np.atleast_2d(u))[0],
            A_const=cert["A_const"],
            **common,
        )
    if kind == "system":
        return certificates.system_certificate(a, b, B, cert["kappa"], W0, jac=jac, box=cert["box"], seed=cfg.seed, nonnegative=cert["nonnegative"], exclude_radius=cert["exclude_radius"], **common)
    diag = lambda U: np.einsum("ii...->i...", jac(U))  # noqa: E731
    return certificates.convection_certificate(a, b, B, cert["convection"], cert["gamma"], cert["k"], W0, a_prime=diag, A_const=cert["A_const"], seed=cfg.seed, **common)


def _residual_csv(cfg: ScenarioConfig) -> tuple[str, dict]:
    times = cfg.sections["exact"]["times"]
    diff = cfg.model.diffusion
    rep = exact.evolution_residual(cfg.model, exact.js_solution(diff.kappa), cfg.grid, times)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "h", "residual_l2"])
    for j, t in enumerate(rep.times):
        w.writerow([repr(t), repr(rep.spacings[0]), repr(float(rep.norms[0, j]))])
    return buf.getvalue(), {"residual": repr(float(rep.norms[0].max())), "h": repr(rep.spacings[0])}


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def run_scenario(cfg: ScenarioConfig, max_wall: float | None = None) -> tuple[int, dict[str, str]]:
    """Run one scenario, writing config.txt, summary.txt and the requested artifacts.

    Returns (exit code, summary values). Configuration problems raise
    ConfigError before anything is written.
    """
    W0 = initial_field(cfg)
    out = cfg.out_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror}") from None
    _write(out / "config.txt", cfg.to_text())
    summary: dict[str, str] = {}
    code = EXIT_OK
    if cfg.sections.get("certificate", {}).get("kind", "none") != "none":
        rep = certificate_report(cfg, W0)
        _write(out / "certificate.txt", rep.to_text())
        summary["verdict"] = rep.verdict
        summary["horizon"] = rep.values()["horizon"]
    if "exact" in cfg.sections:
        text, vals = _residual_csv(cfg)
        _write(out / "residual.csv", text)
        summary.update(vals)
    if "run" in cfg.sections:
        report = dynamics.run(cfg.model, W0, cfg.sections["run"]["T_end"], run_config(cfg, max_wall))
        _write(out / "diagnostics.csv", report.diagnostics.to_csv())
        _write(out / "final_field.txt", field_to_text(report.final))
        summary.update(_run_summary(report))
        code = EXIT_CODES[report.termination]
    summary["exit"] = str(code)
    _write(out / "summary.txt", "".join(f"{k} = {v}\n" for k, v in summary.items()))
    return code, summary


def _run_summary(report: dynamics.RunReport) -> dict[str, str]:
    out = {"termination": report.termination, "time": repr(report.time), "steps": str(report.steps), "max_abs": repr(report.max_value)}
    if report.termination == dynamics.BLOWUP:
        out["t_b"] = repr(report.time)
    if report.termination == dynamics.REACHED_T:
        out["note"] = "no blow-up observed before T_end"
    if report.location is not None:
        out["location"] = ",".join(str(i) for i in report.location)
    for name in ("slab", "bmo", "sup"):
        if name in report.diagnostics.columns:
            col = report.diagnostics.column(name)
            out[f"max_{name}"] = repr(float(np.max(col)))
    for name, val in report.accumulated.items():
        out[f"int_{name}"] = repr(val)
    return out


# ---------------------------------------------------------------- sweeps

SWEEP_COLUMNS = ("value", "exit", "termination", "time", "max_slab", "max_bmo", "max_sup", "residual", "order", "error")


def read_summary(path: Path) -> dict[str, str]:
    out = {}
    for line in path.read_text().splitlines():
        key, _, val = line.partition(" = ")
        out[key] = val
    return out


def aggregate(values: list[str], child_dirs: list[Path], errors: dict[int, str] | None = None) -> list[dict[str, str]]:
    """Fold child summaries (read back from disk) into one row per sweep value."""
    errors = errors or {}
    rows = []
    for i, (value, d) in enumerate(zip(values, child_dirs)):
        row = {c: "-" for c in SWEEP_COLUMNS}
        row["value"] = value
        if i in errors:
            row["error"] = errors[i]
            row["exit"] = errors[i].split(":", 1)[0]
            rows.append(row)
            continue
        s = read_summary(d / "summary.txt")
        row["exit"] = s.get("exit", "-")
        row["termination"] = s.get("termination", s.get("verdict", "-"))
        row["time"] = s.get("t_b", s.get("time", "-"))
        for key in ("max_slab", "max_bmo", "residual"):
            row[key] = s.get(key, "-")
        row["max_sup"] = s.get("max_sup", s.get("max_abs", "-"))
        rows.append(row)
    prev = None
    for i, (row, d) in enumerate(zip(rows, child_dirs)):
        if row["residual"] == "-":
            prev = None
            continue
        h = float(read_summary(d / "summary.txt")["h"])
        if prev is not None:
            r0, h0 = prev
            row["order"] = f"{math.log(r0 / float(row['residual'])) / math.log(h0 / h):.4f}"
        prev = (float(row["residual"]), h)
    return rows


def _child(args):
    cfg, max_wall = args
    try:
        run_scenario(cfg, max_wall)
        return None
    except ConfigError as exc:
        return f"{EXIT_CONFIG}: {exc}"
    except OSError as exc:
        return f"{EXIT_IO}: {exc}"
    except Exception as exc:  # recorded per row, the sweep carries on
        return f"1: {type(exc).__name__}: {exc}"


def sweep(cfg: ScenarioConfig, max_wall: float | None = None, jobs: int = 1) -> list[dict[str, str]]:
    """Run every child of the sweep and write sweep.csv / sweep.txt under the parent output dir."""
    if "sweep" not in cfg.sections:
        raise ConfigError("scenario has no [sweep] section")
    kids, errors = [], {}
    for i, value in enumerate(cfg.sweep_values):
        try:
            kids.append(cfg.child(i))
        except ConfigError as exc:
            kids.append(None)
            errors[i] = f"{EXIT_CONFIG}: {exc}"
    todo = [(i, k) for i, k in enumerate(kids) if k is not None]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_child, [(k, max_wall) for _, k in todo]))
    else:
        results = [_child((k, max_wall)) for _, k in todo]
    for (i, _), err in zip(todo, results):
        if err is not None:
            errors[i] = err
    dirs = [cfg.out_dir / f"child_{i:03d}" for i in range(len(cfg.sweep_values))]
    rows = aggregate(cfg.sweep_values, dirs, errors)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write(cfg.out_dir / "config.txt", cfg.to_text())
    _write(cfg.out_dir / "sweep.csv", sweep_csv(rows))
    _write(cfg.out_dir / "sweep.txt", sweep_table(rows))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def sweep_table(rows) -> str:
    widths = {c: max(len(c), *(len(r[c]) for r in rows)) for c in SWEEP_COLUMNS}
    lines = ["  ".join(c.ljust(widths[c]) for c in SWEEP_COLUMNS)]
    lines += ["  ".join(r[c].ljust(widths[c]) for c in SWEEP_COLUMNS).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- entry point


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(prog="crossdiff", description="Run a cross-diffusion scenario file.")
    p.add_argument("scenario", help="scenario file")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, help="seed (overrides [output] seed)")
    p.add_argument("--max-wall", type=float, help="wall-clock limit per run or sweep child, seconds")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep children")
    args = p.parse_args(argv)
    try:
        cfg = load_scenario(args.scenario)
        if args.out is not None or args.seed is not None:
            out = dict(cfg.sections.get("output", {"dir": "out", "seed": 0}))
            if args.out is not None:
                out["dir"] = str(Path(args.out).resolve())
            if args.seed is not None:
                out["seed"] = args.seed
            raw = {s: dict(v) for s, v in cfg.raw.items()}
            raw["output"] = {k: (_render(v), 0) for k, v in out.items()}
            cfg = _materialize(raw, cfg.base_dir)
        if "sweep" in cfg.sections:
            rows = sweep(cfg, args.max_wall, args.jobs)
            sys.stdout.write(sweep_table(rows))
            return EXIT_OK
        code, summary = run_scenario(cfg, args.max_wall)
        sys.stdout.write("".join(f"{k} = {v}\n" for k, v in summary.items()))
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
