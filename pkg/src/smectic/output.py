"""Energy-series CSV and legacy VTK snapshot writers, plus run sinks."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .diagnostics import CSV_FIELDS
from .timestepping import Sink

_INT_FIELDS = {"step", "picard_iters"}


def _fmt(x) -> str:
    # 17 significant digits round-trip any double exactly.
    return "%.17g" % x


def _csv_line(report) -> str:
    row = report.as_row()
    return ",".join(str(int(row[k])) if k in _INT_FIELDS else _fmt(row[k]) for k in CSV_FIELDS)


def write_energy_csv(reports, path) -> None:
    """One header line and one row per report, LF line endings."""
    lines = [",".join(CSV_FIELDS)] + [_csv_line(r) for r in reports]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_energy_csv(path) -> list[dict]:
    """Rows of a file written by ``write_energy_csv`` as typed dicts."""
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if tuple(header) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for line in fh:
            vals = line.rstrip("\n").split(",")
            rows.append({k: int(v) if k in _INT_FIELDS else float(v) for k, v in zip(header, vals)})
    return rows


def write_vtk_snapshot(state, mesh, path, title: str | None = None) -> None:
    """Legacy ASCII VTK unstructured grid with vertex values of every field.

    Velocity is the P2 field sampled at mesh vertices (the first
    ``n_vertices`` dofs of each component); z components are 0.
    """
    nv = mesh.n_vertices
    n_u = len(state.u) // 2
    if len(state.phi) != nv or len(state.p) != nv or n_u < nv:
        raise ValueError("state does not match the mesh")
    ux, uy = state.u[:nv], state.u[n_u:n_u + nv]
    title = title or f"smectic step {state.step} t={_fmt(state.t)}"
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    out += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    nt = mesh.n_triangles
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {nt}")
    out += ["5"] * nt
    out.append(f"POINT_DATA {nv}")
    for name, vals in (("phi", state.phi), ("psi", state.psi), ("pressure", state.p)):
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [_fmt(v) for v in vals]
    out.append("VECTORS velocity double")
    out += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in zip(ux, uy)]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


class CsvSink(Sink):
    """Streams per-step reports (not the step-0 state) to a CSV file."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = None
        self.n_rows = 0

    def start(self, disc, state, report):
        self._fh = open(self.path, "w", newline="\n")
        self._fh.write(",".join(CSV_FIELDS) + "\n")

    def report(self, report):
        self._fh.write(_csv_line(report) + "\n")
        self.n_rows += 1

    def finish(self, disc, state):
        self.close()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class VtkSink(Sink):
    """Writes ``snapshot_<step>.vtk`` files into a directory."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.paths: list[Path] = []

    def snapshot(self, disc, state):
        path = self.out_dir / f"snapshot_{state.step:06d}.vtk"
        write_vtk_snapshot(state, disc.mesh, path)
        self.paths.append(path)


class SummarySink(Sink):
    """Tracks the numbers printed at the end of a run."""

    def __init__(self):
        self.first = self.last = None
        self.peak = None
        self.n_steps = 0

    def start(self, disc, state, report):
        self.first = self.last = self.peak = report

    def report(self, report):
        self.last = report
        self.n_steps += 1
        if report.e_kin > self.peak.e_kin:
            self.peak = report

    def lines(self) -> list[str]:
        r = self.last
        return [
            f"steps: {self.n_steps}",
            f"final time: {_fmt(r.t)}",
            f"final energies: e_kin={r.e_kin:.10e} e_ela={r.e_ela:.10e} "
            f"e_pen={r.e_pen:.10e} e_tot={r.e_tot:.10e}",
            f"initial total energy: {self.first.e_tot:.10e}",
            f"peak kinetic energy: {self.peak.e_kin:.10e} at t={_fmt(self.peak.t)}",
        ]


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
