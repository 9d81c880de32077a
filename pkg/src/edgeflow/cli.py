"""Configuration-driven experiment runs with reproducible exports.

Experiments are named pipelines over the other modules: bulk band
structures, gap scaling, Chern numbers, effective 1D spectra, strip edge
diagrams, two-scale comparison, and the acceptance self-test. Each run
writes a manifest first (so an interrupted run leaves a valid partial
record), then data files, then rewrites the manifest with checksums and
timings. CSV/JSON payloads are byte-stable: floats go out with 17
significant digits and elements in a fixed order.
"""
import dataclasses
import hashlib
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import click
import numpy as np
import scipy

from ._svg import spectrum_diagram_svg
from .bulkfb import (band_structure_csv_rows, chern_number_fhs,
                     compute_band_structure, find_quadratic_degeneracy,
                     locate_dirac_points, measure_local_gap)
from .edgestrip import (compare_with_effective, correspondence_order,
                        edge_diagram, edge_diagram_csv_rows)
from .effedge import (dirac_family, essential_spectrum_edges,
                      schrodinger_family, trace_eigenvalue_curves)
from .effparams import (compute_effective_params, edge_project_params,
                        select_degenerate_basis)
from .errors import ConfigError, EdgeflowError
from .lattice import make_rational_edge
from .media import Deformation, DomainWall, MediumSpec

PACKAGE_VERSION = "0.1.0"

_SCHEMA = {
    "experiment": ("name",),
    "medium": ("delta", "tilt_phi", "wall", "wall_steepness"),
    "edge": ("direction",),
    "solver": ("N", "W", "M", "L", "seed", "sign", "bands", "band_hint",
               "k_start", "k_stop", "k_points", "kappa_start", "kappa_stop",
               "kappa_points", "q_points", "max_states", "chern_grid",
               "delta_list"),
    "effective": ("kind", "alpha0", "alpha1", "alpha2", "theta",
                  "a0", "a1", "a2", "b0", "b1", "b2", "c"),
    "output": ("directory", "formats"),
    "validate": ("suite",),
}

_WALLS = ("tanh_scaled", "sign", "multi_even", "multi_odd")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    experiment: str
    medium: MediumSpec
    edge: object
    solver: dict
    effective: dict
    output: dict
    extra: dict
    text: str


@dataclasses.dataclass(frozen=True)
class OutputRecord:
    manifest_path: Path
    files: tuple
    diagnostics: dict


def _get(section, key, cast, default, where):
    raw = section.get(key)
    if raw is None:
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.{key}: {exc}") from exc


def _floats(raw):
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def _ints(raw):
    return tuple(int(tok) for tok in raw.replace(",", " ").split())


def load_config(path, experiment):
    """Parse the [section] key=value config file into a RunConfig.

    A missing path means all defaults. Unknown sections or keys fail with
    the offending field path, as do malformed values.
    """
    import configparser
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = ""
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        text = p.read_text()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config parse failure: {exc}") from exc
    for sec in parser.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"{sec}: unknown section")
        for key in parser[sec]:
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}: unknown key")
    S = {sec: dict(parser[sec]) if parser.has_section(sec) else {}
         for sec in _SCHEMA}

    named = S["experiment"].get("name")
    if named is not None and named != experiment:
        raise ConfigError(
            f"experiment.name: config names {named!r} but the "
            f"{experiment!r} subcommand was invoked")

    phi = _get(S["medium"], "tilt_phi", float, 0.0, "medium")
    delta = _get(S["medium"], "delta", float, 0.1, "medium")
    wall_kind = S["medium"].get("wall", "tanh_scaled")
    if wall_kind not in _WALLS:
        raise ConfigError(f"medium.wall: {wall_kind!r} not one of {_WALLS}")
    steep = _get(S["medium"], "wall_steepness", float, 10.0, "medium")
    try:
        deformation = Deformation.tilt(phi) if phi != 0.0 \
            else Deformation.identity()
        medium = MediumSpec(deformation=deformation,
                            wall=DomainWall(wall_kind, steep),
                            delta=delta, r=2 if phi == 0.0 else 1)
    except (ValueError, EdgeflowError) as exc:
        raise ConfigError(f"medium: {exc}") from exc

    direction = _get(S["edge"], "direction", _ints, (0, 1), "edge")
    if len(direction) != 2:
        raise ConfigError("edge.direction: need two integers")
    try:
        edge = make_rational_edge(*direction)
    except EdgeflowError as exc:
        raise ConfigError(f"edge.direction: {exc}") from exc

    sv = S["solver"]
    solver = {
        "N": _get(sv, "N", int, 12, "solver"),
        "W": _get(sv, "W", lambda r: None if r == "auto" else int(r), 30,
                  "solver"),
        "M": _get(sv, "M", int, 2048, "solver"),
        "L": _get(sv, "L", float, 40.0, "solver"),
        "seed": _get(sv, "seed", int, 0, "solver"),
        "sign": _get(sv, "sign", int, 0, "solver"),
        "bands": _get(sv, "bands", int, 6, "solver"),
        "band_hint": _get(sv, "band_hint", int, 2, "solver"),
        "k_start": _get(sv, "k_start", float, np.pi - 1.2, "solver"),
        "k_stop": _get(sv, "k_stop", float, np.pi + 1.2, "solver"),
        "k_points": _get(sv, "k_points", int, 13, "solver"),
        "kappa_start": _get(sv, "kappa_start", float, -3.0, "solver"),
        "kappa_stop": _get(sv, "kappa_stop", float, 3.0, "solver"),
        "kappa_points": _get(sv, "kappa_points", int, 25, "solver"),
        "q_points": _get(sv, "q_points", int, 33, "solver"),
        "max_states": _get(sv, "max_states", int, 12, "solver"),
        "chern_grid": _get(sv, "chern_grid", int, 12, "solver"),
        "delta_list": _get(sv, "delta_list", _floats, None, "solver"),
    }
    for key in ("N", "M", "k_points", "kappa_points", "q_points",
                "max_states", "chern_grid"):
        if solver[key] is not None and solver[key] <= 0:
            raise ConfigError(f"solver.{key}: must be positive")

    ef = S["effective"]
    effective = {
        "kind": ef.get("kind", "schrodinger"),
        "alpha": (_get(ef, "alpha0", float, 1.0, "effective"),
                  _get(ef, "alpha1", float, 1.0, "effective"),
                  _get(ef, "alpha2", float, 1.0, "effective")),
        "theta": _get(ef, "theta", float, 1.0, "effective"),
        "a": (_get(ef, "a0", float, 0.3, "effective"),
              _get(ef, "a1", float, 1.0, "effective"),
              _get(ef, "a2", float, 1.0, "effective")),
        "b": (_get(ef, "b0", float, 0.0, "effective"),
              _get(ef, "b1", float, 0.0, "effective"),
              _get(ef, "b2", float, 1.0, "effective")),
        "c": _get(ef, "c", float, 0.5, "effective"),
    }
    if effective["kind"] not in ("schrodinger", "dirac_plus", "dirac_minus"):
        raise ConfigError(f"effective.kind: {effective['kind']!r} unknown")

    output = {
        "directory": S["output"].get("directory", "out"),
        "formats": tuple(S["output"].get("formats", "csv json svg")
                         .replace(",", " ").split()),
    }
    for fmt in output["formats"]:
        if fmt not in ("csv", "json", "svg"):
            raise ConfigError(f"output.formats: {fmt!r} not csv|json|svg")
    return RunConfig(experiment, medium, edge, solver, effective, output,
                     {"validate": S["validate"]}, text)


def fmt17(v):
    return f"{float(v):.17g}"


def _dump_json(obj):
    if isinstance(obj, dict):
        body = ",".join(f"{json.dumps(str(k))}:{_dump_json(v)}"
                        for k, v in obj.items())
        return "{" + body + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_dump_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt17(obj)
    return json.dumps(str(obj))


def write_json(path, obj):
    Path(path).write_text(_dump_json(obj) + "\n")


def write_csv(path, header, rows, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            elif isinstance(v, (float, np.floating)):
                cells.append(fmt17(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class _Run:
    """Collects data files and diagnostics under one manifest."""

    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.diagnostics = {}
        self.t0 = time.monotonic()
        self.manifest_path = self.dir / "manifest.json"
        self._write_manifest("running")

    def _write_manifest(self, status):
        write_json(self.manifest_path, {
            "experiment": self.cfg.experiment,
            "status": status,
            "config_sha256": hashlib.sha256(
                self.cfg.text.encode()).hexdigest(),
            "versions": {
                "package": PACKAGE_VERSION,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "files": [{"name": f.name, "sha256": _sha256(f),
                       "bytes": f.stat().st_size} for f in self.files],
            "timings": {"total_seconds": time.monotonic() - self.t0},
            "diagnostics": self.diagnostics,
        })

    def wants(self, fmt):
        return fmt in self.cfg.output["formats"]

    def add(self, path):
        self.files.append(Path(path))

    def csv(self, name, header, rows, comments=()):
        if self.wants("csv"):
            path = self.dir / name
            write_csv(path, header, rows, comments)
            self.add(path)

    def json(self, name, obj):
        if self.wants("json"):
            path = self.dir / name
            write_json(path, obj)
            self.add(path)

    def svg(self, name, text):
        if self.wants("svg"):
            path = self.dir / name
            path.write_text(text)
            self.add(path)

    def finish(self):
        self._write_manifest("complete")
        return OutputRecord(self.manifest_path, tuple(self.files),
                            dict(self.diagnostics))


def _degeneracy(medium, N, band_hint):
    med0 = dataclasses.replace(medium, delta=0.0)
    if medium.r == 2:
        return find_quadratic_degeneracy(med0, band_hint, N)
    return locate_dirac_points(med0, N)


def _exp_bands(cfg, run):
    s = cfg.solver
    corners = [np.array(c) for c in
               ((0.0, 0.0), (np.pi, 0.0), (np.pi, np.pi), (0.0, 0.0))]
    seg = max(s["k_points"], 2)
    kpts = []
    for a, b in zip(corners[:-1], corners[1:]):
        t = np.linspace(0.0, 1.0, seg, endpoint=False)[:, None]
        kpts.append(a + t * (b - a))
    kpts = np.vstack(kpts + [corners[-1][None, :]])
    bs = compute_band_structure(cfg.medium, kpts, s["bands"], s["N"],
                                sign=s["sign"])
    comments = []
    if cfg.medium.delta == 0.0 and cfg.medium.deformation.is_volumetric():
        deg = find_quadratic_degeneracy(cfg.medium, s["band_hint"], s["N"])
        comments.append(
            f"m_point_degeneracy E={fmt17(deg.E_star)} "
            f"k1={fmt17(deg.k_star[0])} k2={fmt17(deg.k_star[1])} "
            f"bands={deg.band_indices[0] + 1},{deg.band_indices[1] + 1}")
        run.diagnostics["m_point_degeneracy"] = {
            "E_star": deg.E_star,
            "k": list(deg.k_star),
            "bands": list(deg.band_indices),
        }
    run.csv("bands.csv", ("k1", "k2", "band", "energy"),
            band_structure_csv_rows(bs), comments)
    arc = np.concatenate([[0.0], np.cumsum(
        np.linalg.norm(np.diff(kpts, axis=0), axis=1))])
    curves = [np.column_stack([arc, bs.energies[:, b]])
              for b in range(bs.energies.shape[1])]
    window = (float(bs.energies.min()) - 1.0, float(bs.energies.max()) + 1.0)
    run.svg("bands.svg", spectrum_diagram_svg(
        arc, [()] * arc.size, curves, window, "path position", "E"))
    run.diagnostics["bands"] = bs.energies.shape[1]
    run.json("bands_diagnostics.json", run.diagnostics)


def _exp_bulk_gap(cfg, run):
    s = cfg.solver
    med = cfg.medium
    deltas = s["delta_list"] or \
        ((0.05, 0.1) if med.r == 2 else (0.005, 0.01))
    deg = _degeneracy(med, s["N"], s["band_hint"])
    rows = []
    ratios = []
    for d in deltas:
        g = measure_local_gap(med, deg, d, s["N"])
        rows.append((float(d), g, g / d ** med.r))
        ratios.append(g / d ** med.r)
    spread = (max(ratios) - min(ratios)) / max(ratios)
    run.csv("bulk_gap.csv", ("delta", "gap", "gap_over_delta_r"), rows)
    run.diagnostics.update({
        "E_star": deg.E_star,
        "r": med.r,
        "ratio_spread": spread,
        "ratios": ratios,
    })
    run.json("bulk_gap.json", run.diagnostics)


def _exp_chern(cfg, run):
    s = cfg.solver
    below = cfg.medium.r and 2
    cp = chern_number_fhs(cfg.medium, cfg.medium.delta, +1, below,
                          s["chern_grid"], s["N"])
    cm = chern_number_fhs(cfg.medium, cfg.medium.delta, -1, below,
                          s["chern_grid"], s["N"])
    run.diagnostics.update({
        "chern_plus": cp, "chern_minus": cm, "difference": cp - cm,
        "bands_below": below, "delta": cfg.medium.delta,
    })
    run.json("chern.json", run.diagnostics)
    run.csv("chern.csv", ("sign", "chern"), [(1, float(cp)), (-1, float(cm))])


def _effective_family(cfg):
    e = cfg.effective
    s = cfg.solver
    wall = cfg.medium.wall
    domain = (-s["L"], s["L"])
    if e["kind"] == "schrodinger":
        return schrodinger_family(e["alpha"], e["theta"], wall,
                                  domain=domain, M=s["M"])
    sign = 1 if e["kind"] == "dirac_plus" else -1
    return dirac_family(e["a"], e["b"], e["c"], wall, sign=sign,
                        domain=domain, M=s["M"])


def _exp_eff_spec(cfg, run):
    s = cfg.solver
    fam = _effective_family(cfg)
    grid = np.linspace(s["kappa_start"], s["kappa_stop"], s["kappa_points"])
    curves, flow = trace_eigenvalue_curves(fam, grid,
                                           max_states=s["max_states"])
    rows = []
    edges = []
    for kap in grid:
        lo, hi = essential_spectrum_edges(fam, kap)
        edges.append((lo, hi))
        rows.append((float(kap), "ess_lower", float(lo)))
        rows.append((float(kap), "ess_upper", float(hi)))
    for ci, c in enumerate(curves):
        for kap, om in c.points:
            rows.append((float(kap), f"eig_{ci}", float(om)))
    run.csv("eff_spec.csv", ("kappa", "label", "value"), rows)
    gap = max(hi - lo for lo, hi in edges)
    y_lo = min(lo for lo, _ in edges) - 0.35 * gap
    y_hi = max(hi for _, hi in edges) + 0.35 * gap
    ess = [((y_lo, lo), (hi, y_hi)) for lo, hi in edges]
    run.svg("eff_spec.svg", spectrum_diagram_svg(
        grid, ess, [c.points for c in curves], (y_lo, y_hi), "kappa",
        "Omega"))
    run.diagnostics.update({
        "kind": cfg.effective["kind"],
        "flow": flow,
        "curves": len(curves),
    })
    run.json("eff_spec.json", run.diagnostics)


def _diagram_svg(diag):
    markers = [(float(k), s.energy, s.label)
               for k, states in zip(diag.k_grid, diag.states)
               for s in states]
    lo = min(b[0] for b in diag.gap_bounds)
    hi = max(b[1] for b in diag.gap_bounds)
    pad = 0.35 * (hi - lo)
    ess = [tuple(map(tuple, iv)) for iv in diag.ess_bands]
    return spectrum_diagram_svg(diag.k_grid, ess,
                                [c.points for c in diag.curves],
                                (lo - pad, hi + pad), "k", "E",
                                markers=markers)


def _exp_edge_diagram(cfg, run):
    s = cfg.solver
    ks = np.linspace(s["k_start"], s["k_stop"], s["k_points"])
    diag = edge_diagram(cfg.medium, cfg.edge, ks, W=s["W"], N=s["N"],
                        q_points=s["q_points"], max_states=s["max_states"])
    run.csv("edge_diagram.csv", ("k", "energy", "class", "curve_id"),
            edge_diagram_csv_rows(diag))
    run.svg("edge_diagram.svg", _diagram_svg(diag))
    labels = [st.label for states in diag.states for st in states]
    run.diagnostics.update({
        "flow": diag.flow,
        "E_reference": diag.E_reference,
        "curves": len(diag.curves),
        "traversing_curves": sum(1 for c in diag.curves
                                 if c.flow_contribution != 0),
        "counts": {l: labels.count(l) for l in ("edge", "bulk", "spurious")},
    })
    run.json("edge_diagram.json", run.diagnostics)


def _exp_compare(cfg, run):
    s = cfg.solver
    med = cfg.medium
    deg = _degeneracy(med, s["N"], s["band_hint"])
    branch = "M" if med.r == 2 else "D+"
    basis = select_degenerate_basis(med, deg, branch, s["N"])
    params = compute_effective_params(med, deg, basis, s["N"])
    a, b, c = edge_project_params(params, cfg.edge)
    wall = med.wall
    domain = (-s["L"], s["L"])
    if med.r == 2:
        fam = schrodinger_family(a, c, wall, domain=domain, M=s["M"])
        k_star_par = float(np.asarray(deg.k_star, float)[1])
        kap_span = min(abs(s["kappa_start"]), abs(s["kappa_stop"]), 2.0)
    else:
        fam = dirac_family(a, b, c, wall, sign=1, domain=domain, M=s["M"])
        k_star_par = float(deg.k_star[0][1])
        kap_span = min(abs(s["kappa_start"]), abs(s["kappa_stop"]), 20.0)
    grid = np.linspace(-kap_span, kap_span, s["kappa_points"])
    curves, _ = trace_eigenvalue_curves(fam, grid,
                                        max_states=s["max_states"])
    deltas = s["delta_list"] or \
        ((0.05, 0.1) if med.r == 2 else (0.005, 0.01))
    reports = []
    for d in deltas:
        med_d = dataclasses.replace(med, delta=float(d))
        ks = k_star_par + d * np.linspace(-kap_span, kap_span,
                                          s["k_points"])
        diag = edge_diagram(med_d, cfg.edge, ks, deg=deg, W=s["W"],
                            N=s["N"], q_points=s["q_points"],
                            max_states=s["max_states"])
        reports.append(compare_with_effective(diag, curves, deg, d))
    run.diagnostics.update({
        "r": med.r,
        "k_star_par": k_star_par,
        "deltas": list(deltas),
        "max_residuals": [r["max_residual"] for r in reports],
        "normalized": [r["normalized"] for r in reports],
    })
    if len(reports) == 2:
        run.diagnostics["order"] = correspondence_order(*reports)
    run.json("compare.json", {"reports": reports, **run.diagnostics})
    rows = [(r["delta"], k, e, res) for r in reports
            for k, e, res in zip(r["kappa"], r["energies"], r["residuals"])]
    run.csv("compare.csv", ("delta", "kappa", "energy", "residual"), rows)


_EXPERIMENTS = {
    "bands": _exp_bands,
    "bulk-gap": _exp_bulk_gap,
    "chern": _exp_chern,
    "eff-spec": _exp_eff_spec,
    "edge-diagram": _exp_edge_diagram,
    "compare": _exp_compare,
}


def run_pipeline(cfg, out_dir=None):
    """Execute one configured experiment; returns the output record."""
    if cfg.experiment not in _EXPERIMENTS:
        raise ConfigError(f"experiment.name: {cfg.experiment!r} unknown")
    np.random.seed(cfg.solver["seed"])
    run = _Run(cfg, out_dir or cfg.output["directory"])
    try:
        _EXPERIMENTS[cfg.experiment](cfg, run)
    except EdgeflowError as exc:
        raise type(exc)(f"[{cfg.experiment}] {exc}") from exc
    return run.finish()


def _run_validate(cfg):
    suite = cfg.extra["validate"].get("suite", "tests/test_acceptance.py")
    if not Path(suite).exists():
        raise ConfigError(f"validate.suite: not found: {suite}")
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", suite])
    return 0 if proc.returncode == 0 else 3


@click.group(help="Spectral toolkit runner: bulk bands, effective edge "
                  "operators, strip diagrams, and validation.")
def main():
    pass


def _register(name):
    help_text = {
        "bands": "Bulk band structure along the corner tour of the zone.",
        "bulk-gap": "Perturbation-opened gap and its delta scaling.",
        "chern": "Chern numbers of both signed media.",
        "eff-spec": "Spectrum diagram of an effective 1D edge family.",
        "edge-diagram": "Strip edge-state diagram with spectral flow.",
        "compare": "Two-scale residuals: strip against effective curves.",
        "validate": "Run the acceptance suite (exit 3 on failure).",
    }[name]

    @main.command(name=name, help=help_text)
    @click.option("--config", "config_path", default=None,
                  type=click.Path(), help="INI-style run configuration.")
    @click.option("--out", "out_dir", default=None,
                  help="Output directory (overrides [output] directory).")
    @click.option("--threads", default=None, type=int,
                  help="BLAS/OpenMP thread cap (best effort).")
    @click.option("--format", "formats", default=None,
                  help="Output formats, e.g. 'csv svg'.")
    def _cmd(config_path, out_dir, threads, formats, _name=name):
        sys.exit(run_experiment(_name, config_path, out_dir, threads,
                                formats))


for _name in (*_EXPERIMENTS, "validate"):
    _register(_name)


def run_experiment(name, config_path=None, out_dir=None, threads=None,
                   formats=None):
    """Front door used by the subcommands; returns the process exit code."""
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    try:
        cfg = load_config(config_path, name)
        if formats:
            fmts = tuple(formats.replace(",", " ").split())
            for f in fmts:
                if f not in ("csv", "json", "svg"):
                    raise ConfigError(f"--format: {f!r} not csv|json|svg")
            cfg = dataclasses.replace(
                cfg, output={**cfg.output, "formats": fmts})
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    try:
        if name == "validate":
            return _run_validate(cfg)
        record = run_pipeline(cfg, out_dir)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except EdgeflowError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    click.echo(f"{name}: wrote {len(record.files)} files to "
               f"{record.manifest_path.parent}")
    return 0


if __name__ == "__main__":
    main()
