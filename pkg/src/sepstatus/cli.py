"""
Configuration-driven experiment runner.

    sepstatus run --config cfg.json --out report.json --format json
    sepstatus sweep --config cfg.json --param phi_rotation --values 0,0.2,0.4 --out sweep.csv

Exit status: 0 on success, 2 on configuration or model validation errors,
3 on numerical degeneracy (Pauli-excluded states, degenerate absorption).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bcl import EigenStructure, build_coupling, check_objectification, measure
from .gemenge import GemengeState
from .grid import (
    GridSpace,
    KernelOperator,
    Region,
    WaveFunction,
    from_pairs,
    localize,
    to_pairs,
)
from .hilbert import DegenerateVectorError, StateVector, normalize
from .identicals import Statistics
from .registration import ABSORBED_CHOICES, DetectorSpec, RegistrationModel, verify_model
from .separability import (
    check_cluster_separability,
    separation_status,
)

EXPERIMENTS = ("separability", "bcl", "registration")
EXIT_OK, EXIT_INVALID, EXIT_DEGENERATE = 0, 2, 3

DEFAULT_TOLERANCES = {
    "discrepancy": 1e-12,
    "agreement": 1e-10,
    "operator": 1e-10,
}

# fields that may be swept even when absent from the config
OPTIONAL_NUMERIC = {"phi_rotation": 0.0}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _require(cfg: dict, key: str, where: str = ""):
    name = f"{where}{key}"
    if not isinstance(cfg, dict) or key not in cfg:
        raise ConfigError(name, "missing")
    return cfg[key]


def _number(value, name: str, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if integer:
        if float(value) != int(value):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _complex(value, name: str) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_number(value[0], name), _number(value[1], name))
    return complex(_number(value, name))


def _indices(value, name: str, n: int) -> list:
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list):
        raise ConfigError(name, f"expected an index list, got {value!r}")
    out = []
    for i in value:
        i = _number(i, name, integer=True)
        if not 0 <= i < n:
            raise ConfigError(name, f"index {i} outside grid of {n} points")
        out.append(i)
    return out


def parse_grid(cfg: dict) -> GridSpace:
    grid = _require(cfg, "grid")
    n = _number(_require(grid, "n", "grid."), "grid.n", integer=True)
    spacing = _number(grid.get("spacing", 1.0), "grid.spacing")
    try:
        return GridSpace(n, spacing)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None


def parse_wavefunction(spec, space: GridSpace, name: str) -> WaveFunction:
    """
    State specifications:

    ``{"basis": i}`` or ``{"basis": [i, j], "coefficients": [c_i, c_j]}``;
    ``{"amplitudes": [[re, im], ...]}``; ``{"gaussian": {"center": c, "width": w}}``.
    Coefficients are numbers or ``[re, im]`` pairs. Results are normalized.
    """
    if not isinstance(spec, dict):
        raise ConfigError(name, f"expected a state object, got {spec!r}")
    amps = np.zeros(space.n, dtype=complex)
    if "basis" in spec:
        idx = _indices(spec["basis"], f"{name}.basis", space.n)
        coeffs = spec.get("coefficients", [1.0] * len(idx))
        if not isinstance(coeffs, list) or len(coeffs) != len(idx):
            raise ConfigError(f"{name}.coefficients", "must match the basis list in length")
        for i, c in zip(idx, coeffs):
            amps[i] += _complex(c, f"{name}.coefficients")
    elif "amplitudes" in spec:
        raw = spec["amplitudes"]
        if not isinstance(raw, list) or len(raw) != space.n:
            raise ConfigError(f"{name}.amplitudes", f"expected {space.n} [re, im] pairs")
        amps = np.array([_complex(a, f"{name}.amplitudes") for a in raw])
    elif "gaussian" in spec:
        g = spec["gaussian"]
        center = _number(_require(g, "center", f"{name}.gaussian."), f"{name}.gaussian.center")
        width = _number(_require(g, "width", f"{name}.gaussian."), f"{name}.gaussian.width")
        if width <= 0:
            raise ConfigError(f"{name}.gaussian.width", "must be positive")
        return WaveFunction.gaussian(space, center, width)
    else:
        raise ConfigError(name, "state needs one of 'basis', 'amplitudes', 'gaussian'")
    try:
        return WaveFunction.from_amplitudes(space, amps)
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def parse_statistics(cfg: dict) -> Statistics:
    try:
        return Statistics.parse(cfg.get("statistics", "bose"))
    except ValueError as exc:
        raise ConfigError("statistics", str(exc)) from None


def parse_observable(cfg: dict, space: GridSpace, region: Region, seed: int) -> KernelOperator:
    spec = cfg.get("observable", {"kind": "random"})
    kind = spec.get("kind", "random") if isinstance(spec, dict) else None
    if kind == "random":
        rng = np.random.default_rng(seed)
        a = KernelOperator.random_hermitian(space, rng, _number(spec.get("scale", 1.0), "observable.scale"))
    elif kind == "identity":
        a = KernelOperator.resolution_of_identity(space)
    elif kind == "projector":
        idx = _indices(_require(spec, "points", "observable."), "observable.points", space.n)
        a = KernelOperator(space, Region(idx).projector(space) / space.spacing)
    elif kind == "matrix":
        try:
            m = from_pairs(_require(spec, "matrix", "observable."))
            a = KernelOperator(space, m)
        except ValueError as exc:
            raise ConfigError("observable.matrix", str(exc)) from None
    else:
        raise ConfigError("observable.kind", f"unknown kind {kind!r}")
    if spec.get("localize", True):
        a = localize(a, region)
    if not a.is_hermitian():
        raise ConfigError("observable", "observable must be Hermitian")
    return a


def _apparatus(cfg: dict, n_outcomes: int):
    spec = cfg.get("apparatus", {})
    dim = _number(spec.get("dim", max(n_outcomes, 2)), "apparatus.dim", integer=True)
    if dim < n_outcomes:
        raise ConfigError("apparatus.dim", f"needs room for {n_outcomes} pointer states")
    ready = _number(spec.get("ready", 0), "apparatus.ready", integer=True)
    pointers = spec.get("pointers", list(range(n_outcomes)))
    pointers = _indices(pointers, "apparatus.pointers", dim)
    if len(pointers) != n_outcomes or len(set(pointers)) != n_outcomes:
        raise ConfigError("apparatus.pointers", f"need {n_outcomes} distinct basis indices")
    if not 0 <= ready < dim:
        raise ConfigError("apparatus.ready", f"index outside apparatus dimension {dim}")
    return (StateVector.basis(dim, ready), [StateVector.basis(dim, p) for p in pointers])


def parse_coupling(cfg: dict, space: GridSpace):
    values = _require(cfg, "eigenvalues")
    if not isinstance(values, list) or len(values) != space.n:
        raise ConfigError("eigenvalues", f"expected one eigenvalue per grid point ({space.n})")
    eig = EigenStructure.from_basis([_number(v, "eigenvalues") for v in values])
    ready, pointers = _apparatus(cfg, eig.n_outcomes)
    posts = None
    if "post_states" in cfg:
        raw = cfg["post_states"]
        if not isinstance(raw, list) or [len(g) if isinstance(g, list) else -1 for g in raw] \
                != list(eig.multiplicities):
            raise ConfigError("post_states", f"expected groups of sizes {list(eig.multiplicities)}")
        posts = [[parse_wavefunction(s, space, f"post_states.{k}.{l}").as_state()
                  for l, s in enumerate(group)] for k, group in enumerate(raw)]
    try:
        return build_coupling(eig, ready, pointers, posts)
    except ValueError as exc:
        raise ConfigError("post_states", str(exc)) from None


def parse_detectors(cfg: dict, space: GridSpace, stats: Statistics) -> list:
    raw = _require(cfg, "detectors")
    if not isinstance(raw, list):
        raise ConfigError("detectors", "expected a list")
    out = []
    for i, det in enumerate(raw):
        where = f"detectors.{i}."
        region = Region(_indices(_require(det, "region", where), f"{where}region", space.n))
        m = _number(det.get("particles", 0), f"{where}particles", integer=True)
        if m < 0:
            raise ConfigError(f"{where}particles", "must be non-negative")
        if "orbitals" in det:
            orbs = det["orbitals"]
            if not isinstance(orbs, list) or len(orbs) != m:
                raise ConfigError(f"{where}orbitals", f"expected {m} orbital states")
            orbitals = [parse_wavefunction(s, space, f"{where}orbitals.{j}").as_state()
                        for j, s in enumerate(orbs)]
        else:
            points = sorted(region.points)
            if m and not points:
                raise ConfigError(f"{where}region", "empty region cannot host particles")
            orbitals = [StateVector.basis(space.n, points[j % len(points)]) for j in range(m)]
        out.append(DetectorSpec.from_orbitals(region, orbitals, stats))
    return out


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _tolerances(cfg: dict) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    for key, value in cfg.get("tolerances", {}).items():
        if key not in tol:
            raise ConfigError(f"tolerances.{key}", "unknown tolerance")
        tol[key] = _number(value, f"tolerances.{key}")
    return tol


def _assertion(name, value, tolerance):
    return {"name": name, "pass": bool(value <= tolerance), "value": float(value),
            "tolerance": tolerance}


def rotated_partner(psi: WaveFunction, phi: WaveFunction, angle: float) -> WaveFunction:
    """``cos(angle) phi + sin(angle) psi``, renormalized."""
    amps = math.cos(angle) * phi.amplitudes + math.sin(angle) * psi.amplitudes
    return WaveFunction.from_amplitudes(phi.space, amps)


def run_separability(cfg: dict) -> tuple:
    space = parse_grid(cfg)
    stats = parse_statistics(cfg)
    tol = _tolerances(cfg)
    seed = _number(cfg.get("seed", 0), "seed", integer=True)
    trials = _number(cfg.get("trials", 10), "trials", integer=True)
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    region = Region(_indices(_require(cfg, "region"), "region", space.n))
    psi = parse_wavefunction(_require(cfg, "psi"), space, "psi")
    phi = parse_wavefunction(_require(cfg, "phi"), space, "phi")
    angle = _number(cfg.get("phi_rotation", 0.0), "phi_rotation")
    if angle:
        phi = rotated_partner(psi, phi, angle)
    a = parse_observable(cfg, space, region, seed)
    others = [parse_wavefunction(s, space, f"others.{i}")
              for i, s in enumerate(cfg.get("others", []))] or [phi]

    report = check_cluster_separability(psi, phi, a, region, stats)
    status = separation_status(psi, others, region, trials, seed, stats, tol["agreement"])
    witness = None
    if status.witness is not None:
        witness = {k: (to_pairs(v) if isinstance(v, np.ndarray) else v)
                   for k, v in status.witness.items()}
    metrics = report.to_dict()
    metrics["separation_status"] = {"region": sorted(status.region.points),
                                    "holds": status.holds, "witness": witness}
    assertions = [_assertion("discrepancy", report.discrepancy, tol["discrepancy"])]
    return metrics, assertions


def run_bcl(cfg: dict) -> tuple:
    space = parse_grid(cfg)
    tol = _tolerances(cfg)
    coupling = parse_coupling(cfg, space)
    phi_in = parse_wavefunction(_require(cfg, "input"), space, "input").as_state()
    outcome = measure(coupling, phi_in)
    obj = check_objectification(outcome)
    claimed = GemengeState.from_pure(outcome.final_state)

    defined = [(k, v) for k, v in enumerate(outcome.collapsed) if v is not None]
    overlaps = np.full((len(outcome.collapsed),) * 2, np.nan + 0j)
    for k, vk in defined:
        for l, vl in defined:
            overlaps[k, l] = vk.inner(vl)
    metrics = {
        "probabilities": list(outcome.probabilities),
        "collapsed_defined": [v is not None for v in outcome.collapsed],
        "collapsed_overlaps": [[None if np.isnan(z.real) else [z.real, z.imag] for z in row]
                               for row in overlaps],
        "apparatus_rho": to_pairs(outcome.apparatus_rho.entries),
        "objectification": obj.to_dict(),
        "gemenge": claimed.to_dict(),
    }
    assertions = [
        _assertion("probability_sum", abs(sum(outcome.probabilities) - 1.0), tol["operator"]),
        _assertion("unitarity", coupling.unitary.unitarity_residual(), tol["operator"]),
        _assertion("reconstruction",
                   float(np.max(np.abs(outcome.reconstruct().amplitudes
                                       - outcome.final_state.amplitudes))), tol["operator"]),
    ]
    return metrics, assertions


def run_registration(cfg: dict) -> tuple:
    space = parse_grid(cfg)
    stats = parse_statistics(cfg)
    coupling = parse_coupling(cfg, space)
    detectors = parse_detectors(cfg, space, stats)
    source = Region(_indices(cfg.get("source_region", []), "source_region", space.n))
    absorbed = cfg.get("absorbed", "collapsed")
    if absorbed not in ABSORBED_CHOICES:
        raise ConfigError("absorbed", f"must be one of {', '.join(ABSORBED_CHOICES)}")
    try:
        model = RegistrationModel(coupling, detectors, stats, space, source, absorbed)
    except ValueError as exc:
        raise ConfigError("detectors", str(exc)) from None
    phi_in = parse_wavefunction(_require(cfg, "input"), space, "input").as_state()
    report = verify_model(model, phi_in)
    metrics = {
        "probabilities": list(report.probabilities),
        "nu_squared": list(report.nus),
        "fired": list(report.state.fired),
        "layouts": [list(x) for x in report.state.layouts],
        "pointer_marginal": to_pairs(report.pointer_marginal),
        "objectification": report.objectification.to_dict(),
        "gemenge": report.state.gemenge.to_dict(),
    }
    return metrics, [dict(c) for c in report.checks]


RUNNERS = {
    "separability": run_separability,
    "bcl": run_bcl,
    "registration": run_registration,
}


def build_report(cfg: dict) -> dict:
    """Run the configured experiment; everything except the timestamp is deterministic."""
    experiment = _require(cfg, "experiment")
    if experiment not in RUNNERS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    metrics, assertions = RUNNERS[experiment](cfg)
    return {
        "config_echo": cfg,
        "library_version": __version__,
        "experiment": experiment,
        "metrics": metrics,
        "assertions": assertions,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    if isinstance(value, (int, str)):
        return str(value)
    return json.dumps(value, sort_keys=True)


def _flatten(prefix: str, value, rows: list) -> None:
    if isinstance(value, dict):
        for key in sorted(value):
            _flatten(f"{prefix}.{key}" if prefix else key, value[key], rows)
    else:
        rows.append((prefix, value))


def report_to_csv(report: dict) -> str:
    """Columns: section, name, value, pass, tolerance."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section", "name", "value", "pass", "tolerance"])
    writer.writerow(["meta", "experiment", report["experiment"], "", ""])
    writer.writerow(["meta", "library_version", report["library_version"], "", ""])
    writer.writerow(["meta", "timestamp", report["timestamp"], "", ""])
    writer.writerow(["meta", "config_echo", fmt(report["config_echo"]), "", ""])
    rows = []
    _flatten("", report["metrics"], rows)
    for name, value in rows:
        writer.writerow(["metric", name, fmt(value), "", ""])
    for a in report["assertions"]:
        writer.writerow(["assertion", a["name"], fmt(a["value"]), fmt(a["pass"]),
                         fmt(float(a["tolerance"]))])
    return buf.getvalue()


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def set_param(cfg: dict, path: str, value) -> dict:
    """Copy of ``cfg`` with the numeric field at dotted ``path`` replaced."""
    cfg = copy.deepcopy(cfg)
    parts = path.split(".")
    node = cfg
    for part in parts[:-1]:
        if isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise ConfigError(path, "unknown parameter")
    leaf = parts[-1]
    if isinstance(node, list) and leaf.isdigit() and int(leaf) < len(node):
        current, key = node[int(leaf)], int(leaf)
    elif isinstance(node, dict) and leaf in node:
        current, key = node[leaf], leaf
    elif isinstance(node, dict) and path in OPTIONAL_NUMERIC and node is cfg:
        current, key = OPTIONAL_NUMERIC[path], leaf
    elif isinstance(node, dict) and leaf == "particles" and "region" in node:
        current, key = 0, leaf
    else:
        raise ConfigError(path, "unknown parameter")
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError(path, "parameter is not numeric")
    if isinstance(current, int) and float(value).is_integer():
        value = int(value)
    node[key] = value
    return cfg


def sweep_row(report: dict, n_outcomes: int) -> dict:
    m = report["metrics"]
    row = {
        "discrepancy": m.get("discrepancy"),
        "off_diagonal_norm": m.get("objectification", {}).get("off_diagonal_norm"),
    }
    probs = m.get("probabilities", [])
    nus = m.get("nu_squared", [])
    for k in range(n_outcomes):
        row[f"p_{k}"] = probs[k] if k < len(probs) else None
        row[f"nu2_{k}"] = nus[k] if k < len(nus) else None
    return row


def sweep(cfg: dict, param: str, values: list, jobs: int = 1) -> str:
    """
    One CSV row per value, in the order given.

    Header: ``param, value, discrepancy, off_diagonal_norm, p_0.., nu2_0..``;
    cells are empty where a metric does not apply.
    """
    if not values:
        raise ConfigError("values", "empty value list")
    configs = [set_param(cfg, param, v) for v in values]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        reports = list(pool.map(build_report, configs))
    n_outcomes = max(len(r["metrics"].get("probabilities", [])) for r in reports)
    header = ["param", "value", "discrepancy", "off_diagonal_norm"]
    header += [f"p_{k}" for k in range(n_outcomes)] + [f"nu2_{k}" for k in range(n_outcomes)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for value, report in zip(values, reports):
        row = sweep_row(report, n_outcomes)
        writer.writerow([param, fmt(float(value))] + [fmt(row[h]) for h in header[2:]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def load_config(path: str) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be an object")
    return cfg


def _parse_values(text: str) -> list:
    items = [t.strip() for t in text.split(",") if t.strip()]
    try:
        return [float(t) for t in items]
    except ValueError:
        raise ConfigError("values", f"not a numeric list: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sepstatus", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment and write a report")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--format", choices=("json", "csv"), default="json")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")

    sweep_p = sub.add_parser("sweep", help="run an experiment over a list of parameter values")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--param", required=True, help="dotted config path, e.g. detectors.0.particles")
    sweep_p.add_argument("--values", required=True, help="comma-separated numbers")
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.command == "run":
            report = build_report(cfg)
            text = report_to_json(report) if args.format == "json" else report_to_csv(report)
        else:
            text = sweep(cfg, args.param, _parse_values(args.values), args.jobs)
        Path(args.out).write_text(text)
    except DegenerateVectorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
