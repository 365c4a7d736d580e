"""Command-line experiment runner.

``topolattice <experiment> --config cfg.json [--out dir] [--workers n] [--seed-override k]``
runs one experiment over the ensemble and sweep described by the config and writes
``results.json`` (deterministic), ``timings.json`` and, for sweeps, ``results.csv``.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import inspect
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import jsonschema
import numpy as np

from . import dynamics, edge, models, observables
from .algebra import SpectralDecomposition, TraceWindow, fermi_projection
from .lattice import ConfigurationError, LatticeSpec, MagneticField, check_flux

SCHEMA_VERSION = 1

EXPERIMENTS = (
    "spectrum", "dos", "chern", "magnetization", "streda", "ccmeasure",
    "pump", "superadiabatic", "edge", "susceptibility", "localization",
)

FAMILIES = {"rice_mele", "avoided_crossing"}

CSV_COLUMNS = {
    "spectrum": "seed, field, n_levels, min, max",
    "dos": "seed, field, total_mass (per-bin histogram in dos_<unit>.csv: lo, hi, mass, ids)",
    "chern": "seed, field, mu, chern, imag, sensitivity",
    "magnetization": "seed, field, mu, beta, ccm, T0 (beta = inf), bloch (clean models)",
    "streda": "seed, field, mu, lhs, rhs, discrepancy",
    "ccmeasure": "seed, field, total_mass (weights in ccm_<unit>.csv: E, Ep, re, im)",
    "pump": "epsilon, kv, pump_chern, dynamic, identity_residual",
    "superadiabatic": "epsilon, N, norm_53, norm_54, norm_cor5",
    "edge": "field, lower, upper, shell, bulk_chern",
    "susceptibility": "seed, field, mu, beta, chi",
    "localization": "seed, field, lo, hi, excluded, softened",
}

_NUM = {"type": "number"}
_BETA = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"enum": ["inf"]}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "model", "lattice"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"enum": list(EXPERIMENTS)},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
        },
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "required": ["extents"],
            "properties": {
                "extents": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1, "maxItems": 3},
                "boundary": {"oneOf": [
                    {"enum": ["open", "periodic"]},
                    {"type": "array", "items": {"enum": ["open", "periodic"]}},
                ]},
            },
        },
        "field": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "components": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
                "sweep": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["values"],
                    "properties": {
                        "component": {"enum": [1, 2, 3]},
                        "values": {"type": "array", "items": _NUM, "minItems": 1},
                    },
                },
            },
        },
        "thermo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mu": {"type": "array", "items": _NUM, "minItems": 1},
                "beta": {"type": "array", "items": _BETA, "minItems": 1},
            },
        },
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_seeds": {"type": "integer", "minimum": 1},
                "base_seed": {"type": "integer", "minimum": 0},
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fd_step": {"type": "number", "exclusiveMinimum": 0},
                "dmu": {"type": "number", "exclusiveMinimum": 0},
                "margin": {"type": "integer", "minimum": 0},
                "bins": {"type": "integer", "minimum": 1},
                "solver_step": {"type": "number", "exclusiveMinimum": 0},
                "nk": {"type": "integer", "minimum": 4},
                "nodes": {"type": "integer", "minimum": 8},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "dynamics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "orders": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "flatness": {"type": ["integer", "null"], "minimum": 0},
                "reverse": {"type": "boolean"},
                "mu": _NUM,
            },
        },
        "edge": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rows": {"type": "integer", "minimum": 2},
                "nk": {"type": "integer", "minimum": 4},
                "depth": {"type": "integer", "minimum": 1},
                "bump_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "localization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"intervals": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}}},
        },
        "output": {"type": "string"},
    },
}


# ------------------------------------------------------------------ validation


def _path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate(config: dict) -> list[str]:
    """All problems in ``config`` as ``"field/path: message"`` strings (empty when valid)."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(config), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        if err.validator == "required":
            key = err.message.split("'")[1]
            base = _path(err)
            errors.append(f"{key if base == '<root>' else base + '/' + key}: required field missing")
        else:
            errors.append(f"{_path(err)}: {err.message}")
    if errors:
        return errors
    name = config["model"]["name"]
    if name not in models.CATALOG:
        return [f"model/name: unknown model {name!r}; known: {sorted(models.CATALOG)}"]
    params = config["model"].get("params", {})
    accepted = inspect.signature(models.CATALOG[name]).parameters
    for key in params:
        if key not in accepted:
            errors.append(f"model/params/{key}: not a parameter of {name}")
    exp = config.get("experiment")
    if exp in ("pump", "superadiabatic") and name not in FAMILIES:
        errors.append(f"model/name: {exp} needs a time-dependent family ({sorted(FAMILIES)})")
    if exp not in (None, "pump", "superadiabatic") and name in FAMILIES:
        errors.append(f"model/name: {name} is a time-dependent family; use pump or superadiabatic")
    if errors or name in FAMILIES:
        return errors
    try:
        lattice = _lattice(config)
        for f in _fields(config):
            if lattice.dimension >= 2:
                check_flux(lattice, f)
    except ConfigurationError as exc:
        errors.append(f"field: {exc}")
    return errors


def catalog() -> dict:
    """Models with their parameters and defaults, and the experiment list."""
    out = {}
    for name, builder in models.CATALOG.items():
        sig = inspect.signature(builder)
        out[name] = {k: (None if p.default is inspect.Parameter.empty else p.default) for k, p in sig.parameters.items()}
    return {"models": out, "experiments": list(EXPERIMENTS)}


# --------------------------------------------------------------- config helpers


def fingerprint(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _model(config: dict, seed: int | None = None):
    name = config["model"]["name"]
    params = dict(config["model"].get("params", {}))
    builder = models.CATALOG[name]
    if seed is not None and "seed" in inspect.signature(builder).parameters:
        params["seed"] = seed
    return builder(**params)


def _lattice(config: dict, internal_dim: int | None = None) -> LatticeSpec:
    lat = config["lattice"]
    if internal_dim is None:
        internal_dim = _model(config).internal_dim
    margin = config.get("numerics", {}).get("margin")
    return LatticeSpec(tuple(lat["extents"]), lat.get("boundary"), internal_dim, margin)


def _fields(config: dict) -> list[MagneticField]:
    spec = config.get("field", {})
    if "components" in spec:
        base = MagneticField(tuple(spec["components"]))
    else:
        base = _model(config).field
    sweep = spec.get("sweep")
    if sweep is None:
        return [base]
    comp = sweep.get("component", 3)
    out = []
    for v in sweep["values"]:
        c = list(base.components)
        c[comp - 1] = v
        out.append(MagneticField(tuple(c)))
    return out


def _betas(config: dict) -> list[float]:
    return [math.inf if b == "inf" else float(b) for b in config.get("thermo", {}).get("beta", ["inf"])]


def _mus(config: dict) -> list[float]:
    return [float(m) for m in config.get("thermo", {}).get("mu", [0.0])]


def _seeds(config: dict) -> list[int]:
    ens = config.get("ensemble", {})
    base = ens.get("base_seed", 0)
    return [base + i for i in range(ens.get("n_seeds", 1))]


def _num(config: dict, key: str, default):
    return config.get("numerics", {}).get(key, default)


# --------------------------------------------------------------------- records


@dataclass
class ResultRecord:
    experiment: str
    params: dict
    results: dict = dc_field(default_factory=dict)
    diagnostics: dict = dc_field(default_factory=dict)
    error: str | None = None
    wall_time: float = 0.0
    artifacts: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": _jsonable(self.params),
            "results": _jsonable(self.results),
            "diagnostics": _jsonable(self.diagnostics),
            "error": self.error,
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return x


# ----------------------------------------------------------------- experiments


def _units(config: dict) -> list[dict]:
    exp = config["experiment"]
    if exp == "pump":
        return [{"eps": e} for e in config.get("dynamics", {}).get("eps", [0.05])]
    if exp == "superadiabatic":
        return [{"order": n} for n in config.get("dynamics", {}).get("orders", [0, 1, 2])]
    fields = list(enumerate(_fields(config)))
    seeds = _seeds(config) if not _model(config).is_clean else [_seeds(config)[0]]
    if exp == "edge":
        return [{"field_index": i, "field": f.components} for i, f in fields]
    if exp in ("chern", "streda", "magnetization", "susceptibility"):
        return [{"seed": s, "field_index": i, "field": f.components, "mu": mu}
                for s, (i, f), mu in itertools.product(seeds, fields, _mus(config))]
    return [{"seed": s, "field_index": i, "field": f.components} for s, (i, f) in itertools.product(seeds, fields)]


def _spectral(config: dict, unit: dict):
    model = _model(config, unit["seed"])
    lattice = _lattice(config, model.internal_dim)
    H = model.hamiltonian(lattice, MagneticField(tuple(unit["field"])))
    return model, lattice, SpectralDecomposition.of(H)


def _window(config: dict, lattice: LatticeSpec) -> TraceWindow:
    return TraceWindow.central(lattice, _num(config, "margin", None))


def _run_spectrum(config, unit, rec, out_dir):
    _, _, S = _spectral(config, unit)
    rec.results = {"energies": S.energies, "n_levels": len(S.energies)}
    rec.diagnostics = {"min": S.energies[0], "max": S.energies[-1]}


def _run_dos(config, unit, rec, out_dir):
    _, lattice, S = _spectral(config, unit)
    h = observables.dos(S, _window(config, lattice), _num(config, "bins", 200))
    rec.results = {"edges": h.edges, "mass": h.mass, "total_mass": h.mass.sum()}
    if out_dir is not None:
        name = f"dos_{rec.params['unit']}.csv"
        h.to_csv(Path(out_dir) / name)
        rec.artifacts["csv"] = name


def _run_chern(config, unit, rec, out_dir):
    _, lattice, S = _spectral(config, unit)
    est = observables.chern_number(fermi_projection(S, unit["mu"]), _window(config, lattice))
    rec.results = {"chern": est.value}
    rec.diagnostics = {"imag": est.imag, "sensitivity": est.sensitivity, "gap": S.gap_at(unit["mu"])}


def _run_magnetization(config, unit, rec, out_dir):
    model, lattice, S = _spectral(config, unit)
    window = _window(config, lattice)
    mu = unit["mu"]
    ccm = observables.current_current_measure(S, window, _num(config, "bins", 200))
    rows = []
    for beta in _betas(config):
        row = {"beta": beta}
        if math.isinf(beta):
            est = observables.magnetization_T0(S, mu, window)
            row.update(T0=est.value, T0_imag=est.imag, T0_sensitivity=est.sensitivity)
        else:
            est = observables.magnetization_ccm(ccm, beta, mu)
            row.update(ccm=est.value, ccm_imag=est.imag)
        if model.is_clean and not any(unit["field"]) and lattice.dimension >= 2:
            bands = observables.bloch_bands(model.kernel, _num(config, "nk", 48))
            row["bloch"] = observables.magnetization_bloch(bands, beta, mu)
        rows.append(row)
    rec.results = {"rows": rows}
    rec.diagnostics = {"ccm_total_mass": ccm.total_mass}


def _run_streda(config, unit, rec, out_dir):
    model, lattice, _ = _spectral(config, unit)
    field = MagneticField(tuple(unit["field"]))
    res = observables.streda_check(model.family(lattice, unit["seed"]), field, unit["mu"],
                                   _num(config, "fd_step", 1e-4), _window(config, lattice))
    S = SpectralDecomposition.of(model.hamiltonian(lattice, field))
    dmu = observables.dmu_magnetization(S, unit["mu"], _num(config, "dmu", 1e-3), _window(config, lattice))
    rec.results = {"lhs": res.lhs, "rhs": res.rhs, "dmu_magnetization": dmu.slope}
    rec.diagnostics = {"discrepancy": res.discrepancy, "commutator": dmu.commutator}


def _run_ccmeasure(config, unit, rec, out_dir):
    _, lattice, S = _spectral(config, unit)
    ccm = observables.current_current_measure(S, _window(config, lattice), _num(config, "bins", 200), exact=False)
    rec.results = {"total_mass": ccm.total_mass, "edges": ccm.edges}
    if out_dir is not None:
        name = f"ccm_{rec.params['unit']}.csv"
        ccm.to_csv(Path(out_dir) / name)
        rec.artifacts["csv"] = name


def _run_susceptibility(config, unit, rec, out_dir):
    model, lattice, _ = _spectral(config, unit)
    field = MagneticField(tuple(unit["field"]))
    rows = []
    for beta in _betas(config):
        if math.isinf(beta):
            raise ValueError("susceptibility needs finite beta")
        chi = observables.susceptibility_fd(model.family(lattice, unit["seed"]), field, beta, unit["mu"],
                                            _num(config, "fd_step", 1e-3), _window(config, lattice))
        rows.append({"beta": beta, "chi": chi})
    rec.results = {"rows": rows}


def _run_localization(config, unit, rec, out_dir):
    _, lattice, S = _spectral(config, unit)
    ccm = observables.current_current_measure(S, _window(config, lattice), _num(config, "bins", 200), exact=False)
    intervals = config.get("localization", {}).get("intervals") or [[S.energies[0], S.energies[-1]]]
    rows = []
    for lo, hi in intervals:
        ex, soft = observables.localization_length(ccm, lo, hi)
        rows.append({"lo": lo, "hi": hi, "excluded": ex, "softened": soft})
    rec.results = {"rows": rows}


def _run_edge(config, unit, rec, out_dir):
    model = _model(config)
    spec = config.get("edge", {})
    rows = spec.get("rows", 24)
    nk = spec.get("nk", 48)
    frac = spec.get("bump_fraction", 0.8)
    mu = _mus(config)[0]
    gap = edge.bulk_gap(model.kernel, mu)
    bump = edge.Bump.in_gap(gap, frac)
    if model.is_clean and not any(unit["field"]):
        half = edge.cylinder_bloch(model.kernel, rows, nk, depth=spec.get("depth"))
    else:
        lattice = LatticeSpec((nk, rows), ("periodic", "open"), model.internal_dim)
        H = model.hamiltonian(lattice, MagneticField(tuple(unit["field"])))
        half = edge.restrict_half_space(H, 1, depth=spec.get("depth"))
    cur = edge.edge_current(half, bump, gap)
    bulk = observables.plaquette_chern(model.kernel, range(int(np.sum(np.linalg.eigvalsh(model.kernel.bloch(np.zeros(2))) < mu))), nk)
    rec.results = {"lower": cur.value, "upper": cur.opposite, "bulk_chern": bulk}
    rec.diagnostics = {"shell": cur.shell, "cancellation": cur.cancellation, "gap": gap, "imag": cur.imag}


def _family_path(config: dict, **overrides) -> dynamics.TimePath:
    family = _model(config)
    dyn = config.get("dynamics", {})
    lattice = LatticeSpec(tuple(config["lattice"]["extents"]), config["lattice"].get("boundary"), family.internal_dim)
    kw = dict(horizon=dyn.get("horizon", 1.0), mu=dyn.get("mu", 0.0), flatness=dyn.get("flatness", 4),
              reverse=dyn.get("reverse", False))
    kw.update(overrides)
    return dynamics.TimePath(family, lattice, **kw)


def _run_pump(config, unit, rec, out_dir):
    path = _family_path(config)
    kv = dynamics.polarization_kv(path)
    dyn = dynamics.polarization_dynamic(path, unit["eps"], c_step=_num(config, "solver_step", 0.05))
    rec.results = {"kv": kv, "dynamic": dyn.value}
    if path.periodic:
        rec.results["pump_chern"] = dynamics.pump_chern(dynamics.loop_projections(path), path.horizon, path.lattice)
    rec.diagnostics = {"identity_residual": dyn.identity_residual, "imag": dyn.imag,
                       "difference": np.abs(dyn.value - kv)}


def _run_superadiabatic(config, unit, rec, out_dir):
    dyn = config.get("dynamics", {})
    path = _family_path(config, flatness=dyn.get("flatness"))
    eps = dyn.get("eps", [0.2, 0.1, 0.05, 0.025])
    nodes = _num(config, "nodes", 96)
    report = dynamics.superadiabatic_verify(path, unit["order"], eps, nodes, c_step=_num(config, "solver_step", 0.01))
    residuals = dynamics.construction_residuals(dynamics.superadiabatic_construct(path, unit["order"], min(eps), nodes))
    rec.results = {"eps": report.eps, "norm_53": report.distance_to_p0, "norm_54": report.eom_residual,
                   "norm_cor5": report.tracking_error, "slopes": report.slopes}
    rec.diagnostics = {"identities": residuals.__dict__}
    if out_dir is not None:
        name = f"superadiabatic_N{unit['order']}.csv"
        report.to_csv(Path(out_dir) / name)
        rec.artifacts["csv"] = name


RUNNERS = {
    "spectrum": _run_spectrum, "dos": _run_dos, "chern": _run_chern,
    "magnetization": _run_magnetization, "streda": _run_streda, "ccmeasure": _run_ccmeasure,
    "pump": _run_pump, "superadiabatic": _run_superadiabatic, "edge": _run_edge,
    "susceptibility": _run_susceptibility, "localization": _run_localization,
}


def _run_unit(config: dict, index: int, unit: dict, out_dir: str | None) -> ResultRecord:
    rec = ResultRecord(config["experiment"], {"unit": index, **unit})
    start = time.perf_counter()
    try:
        RUNNERS[config["experiment"]](config, unit, rec, out_dir)
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_time = time.perf_counter() - start
    return rec


def _summary(records: list[ResultRecord]) -> dict:
    """Per-seed mean and standard error of every scalar result shared across seeds."""
    groups: dict = {}
    for r in records:
        if r.error is not None:
            continue
        key = tuple((k, json.dumps(_jsonable(v))) for k, v in sorted(r.params.items()) if k not in ("seed", "unit"))
        groups.setdefault(key, []).append(r)
    out = []
    for key, recs in groups.items():
        if len(recs) < 2:
            continue
        stats = {}
        for name, v in recs[0].results.items():
            if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool):
                vals = np.array([float(r.results[name]) for r in recs])
                stats[name] = {"mean": vals.mean(), "stderr": vals.std(ddof=1) / np.sqrt(len(vals)), "n": len(vals)}
        out.append({"params": dict((k, json.loads(v)) for k, v in key), "stats": stats,
                    "seeds": [r.params.get("seed") for r in recs]})
    return out


def run(config: dict, out_dir: str | None = None, workers: int | None = None) -> list[ResultRecord]:
    """Run every work unit of ``config``; records come back in deterministic unit order."""
    problems = validate(config)
    if "experiment" not in config:
        problems.append("experiment: required field missing")
    if problems:
        raise ConfigurationError("; ".join(problems))
    units = _units(config)
    workers = workers or os.cpu_count() or 1
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    if workers == 1 or len(units) == 1:
        records = [_run_unit(config, i, u, out_dir) for i, u in enumerate(units)]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(units))) as pool:
            futures = [pool.submit(_run_unit, config, i, u, out_dir) for i, u in enumerate(units)]
            records = [f.result() for f in futures]
    if out_dir is not None:
        write_outputs(config, records, out_dir)
    return records


def _flat_row(rec: ResultRecord) -> dict:
    row = {k: v for k, v in rec.params.items()}
    for k, v in rec.results.items():
        if isinstance(v, (int, float, np.floating, np.integer)):
            row[k] = v
        elif isinstance(v, np.ndarray) and v.size == 1:
            row[k] = v.item()
    row["error"] = rec.error or ""
    return row


def write_outputs(config: dict, records: list[ResultRecord], out_dir: str) -> None:
    out = Path(out_dir)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "fingerprint": fingerprint(config),
        "config": config,
        "records": [r.to_dict() for r in records],
        "summary": _jsonable(_summary(records)),
    }
    (out / "results.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    timings = {"records": [{"unit": r.params["unit"], "wall_time": r.wall_time} for r in records]}
    (out / "timings.json").write_text(json.dumps(timings, indent=1) + "\n")
    if len(records) > 1:
        rows = [_flat_row(r) for r in records]
        cols = list(dict.fromkeys(k for row in rows for k in row))
        lines = [",".join(cols)]
        for row in rows:
            lines.append(",".join(json.dumps(_jsonable(row.get(c, ""))).replace(",", ";") for c in cols))
        (out / "results.csv").write_text("\n".join(lines) + "\n")


# ------------------------------------------------------------------------ main


def _parser() -> argparse.ArgumentParser:
    epilog = "CSV columns per experiment:\n" + "\n".join(f"  {k}: {v}" for k, v in CSV_COLUMNS.items())
    p = argparse.ArgumentParser(prog="topolattice", description=__doc__.splitlines()[0],
                                epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("experiment", choices=list(EXPERIMENTS) + ["validate", "catalog"])
    p.add_argument("--config", help="JSON config path")
    p.add_argument("--out", default=None, help="output directory (default: config 'output' or ./results)")
    p.add_argument("--workers", type=int, default=None, help="parallel work units (default: all cores)")
    p.add_argument("--seed-override", type=int, default=None, help="replace ensemble base_seed")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.experiment == "catalog":
        print(json.dumps(_jsonable(catalog()), indent=1))
        return 0
    if args.config is None:
        print("error: --config is required", file=sys.stderr)
        return 2
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    if not isinstance(config, dict):
        print("<root>: config must be a JSON object", file=sys.stderr)
        return 2
    config = copy.deepcopy(config)
    if args.experiment == "validate":
        problems = validate(config)
        for p in problems:
            print(p)
        print("valid" if not problems else f"{len(problems)} problem(s)")
        return 0 if not problems else 2
    if "experiment" in config and config["experiment"] != args.experiment:
        print(f"experiment: config says {config['experiment']!r} but command is {args.experiment!r}", file=sys.stderr)
        return 2
    config["experiment"] = args.experiment
    if args.seed_override is not None:
        config.setdefault("ensemble", {})["base_seed"] = args.seed_override
    problems = validate(config)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 2
    out_dir = args.out or config.get("output") or "results"
    records = run(config, out_dir, args.workers)
    failed = [r for r in records if r.error is not None]
    for r in records:
        status = "error: " + r.error if r.error else "ok"
        print(f"unit {r.params['unit']}: {status}")
    print(f"wrote {out_dir}/results.json ({len(records)} records, {len(failed)} failed)")
    return 3 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
