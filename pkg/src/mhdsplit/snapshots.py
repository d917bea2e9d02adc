"""Field snapshot binary format and trajectory export/import.

Snapshot layout (little endian): uint32 n, float64 box_length,
uint32 component count, 16-byte ASCII representation tag, then
``ncomp * n**3`` float64 physical values in row-major order.

A trajectory export is a directory of snapshots plus ``manifest.json``
holding the grid, parameters, per-window nodes, certificates, estimated
constants, and a sha256 checksum per snapshot file.  All files are
written atomically (temp file, then rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from . import caloric as ca
from . import fixedpoint as fp
from . import scheme as sc
from . import spectral as sp
from .errors import GridMismatch
from .spectral import Grid, ScalarField, VectorField

__all__ = [
    "write_field",
    "read_field",
    "export_trajectory",
    "import_trajectory",
    "atomic_write_text",
]

_HEADER = struct.Struct("<Id I 16s")
_TAG = b"phys-f64-rowmaj "


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_write_bytes(path: Path, blob: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def write_field(path: str | Path, field: ScalarField | VectorField) -> str:
    """Serialize a field; returns the sha256 hex digest of the file."""
    path = Path(path)
    ncomp = 3 if isinstance(field, VectorField) else 1
    phys = field.physical().astype("<f8")
    if ncomp == 1:
        phys = phys[None]
    blob = _HEADER.pack(field.grid.n, field.grid.box_length, ncomp, _TAG) + phys.tobytes(order="C")
    _atomic_write_bytes(path, blob)
    return hashlib.sha256(blob).hexdigest()


def read_field(path: str | Path, grid: Grid | None = None) -> ScalarField | VectorField:
    blob = Path(path).read_bytes()
    n, box_length, ncomp, tag = _HEADER.unpack_from(blob)
    if tag != _TAG:
        raise ValueError(f"unknown representation tag {tag!r}")
    g = Grid(int(n), float(box_length))
    if grid is not None and not g.compatible(grid):
        raise GridMismatch(f"snapshot grid ({n}, {box_length}) differs from expected")
    vals = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    vals = vals.reshape((ncomp,) + (g.n,) * 3)
    if ncomp == 1:
        return sp.scalar_from_physical(g, vals[0])
    if ncomp == 3:
        return sp.vector_from_physical(g, vals)
    raise ValueError(f"unsupported component count {ncomp}")


def _params_dict(p: sc.SchemeParams) -> dict:
    return {
        "epsilon": p.epsilon,
        "horizon": p.horizon,
        "dt": p.dt,
        "picard_tol": p.picard_tol,
        "max_picard_iters": p.max_picard_iters,
        "window_policy": p.window_policy,
        "window_length": p.window_length,
        "mollifier_kind": p.mollifier_kind,
        "dealias": p.dealias,
    }


def _cert_dict(c: fp.FixedPointCertificate) -> dict:
    return {
        "x1": c.x1,
        "x2": c.x2,
        "gamma": c.gamma,
        "iterations": c.iterations,
        "final_residual": c.final_residual,
        "residuals": list(c.residuals),
    }


def export_trajectory(traj: sc.Trajectory, out_dir: str | Path) -> Path:
    """Write all window states and initial data with a manifest; returns its path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "grid": {"n": traj.grid.n, "box_length": traj.grid.box_length},
        "params": _params_dict(traj.params),
        "windows": [],
    }
    for wi, w in enumerate(traj.windows):
        wdir = out / f"window{wi:02d}"
        wdir.mkdir(exist_ok=True)
        files = {}
        files["v0.fld"] = write_field(wdir / "v0.fld", w.caloric.v0)
        files["h0.fld"] = write_field(wdir / "h0.fld", w.caloric.h0)
        for m in range(len(w.times)):
            files[f"v2_{m:04d}.fld"] = write_field(wdir / f"v2_{m:04d}.fld", w.states[m].v2)
            files[f"H2_{m:04d}.fld"] = write_field(wdir / f"H2_{m:04d}.fld", w.states[m].H2)
        manifest["windows"].append(
            {
                "dir": wdir.name,
                "times": [float(t) for t in w.times],
                "certificate": _cert_dict(w.certificate),
                "constants": {
                    "c1": w.constants.c1,
                    "c2": w.constants.c2,
                    "r_norm": w.constants.r_norm,
                    "epsilon": w.constants.epsilon,
                    "calibration_digest": w.constants.calibration_digest,
                },
                "checksums": files,
            }
        )
    manifest_path = out / "manifest.json"
    atomic_write_text(manifest_path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest_path


def import_trajectory(out_dir: str | Path) -> sc.Trajectory:
    """Rebuild a trajectory from an export; caloric parts are recomputed exactly."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    grid = Grid(manifest["grid"]["n"], manifest["grid"]["box_length"])
    params = sc.SchemeParams(**manifest["params"])
    windows = []
    for wm in manifest["windows"]:
        wdir = out / wm["dir"]
        times = np.array(wm["times"])
        v0 = read_field(wdir / "v0.fld", grid)
        h0 = read_field(wdir / "h0.fld", grid)
        v0 = sp.leray_project(v0)
        h0 = sp.leray_project(h0)
        cal = ca.caloric_pair(v0, h0, times)
        states = []
        for m in range(len(times)):
            v2 = sp.leray_project(read_field(wdir / f"v2_{m:04d}.fld", grid))
            H2 = sp.leray_project(read_field(wdir / f"H2_{m:04d}.fld", grid))
            states.append(sc.MhdState(v2=v2, H2=H2, t=float(times[m])))
        cert = fp.FixedPointCertificate(
            x1=wm["certificate"]["x1"],
            x2=wm["certificate"]["x2"],
            gamma=wm["certificate"]["gamma"],
            iterations=wm["certificate"]["iterations"],
            final_residual=wm["certificate"]["final_residual"],
            residuals=tuple(wm["certificate"]["residuals"]),
        )
        constants = sc.ContractionConstants(
            c1=wm["constants"]["c1"],
            c2=wm["constants"]["c2"],
            r_norm=wm["constants"]["r_norm"],
            c1_coef=0.0,
            c2_coef=0.0,
            epsilon=wm["constants"]["epsilon"],
            horizon=float(times[-1] - times[0]),
            calibration_digest=wm["constants"]["calibration_digest"],
        )
        windows.append(
            sc.Window(caloric=cal, states=tuple(states), certificate=cert,
                      constants=constants, params=params)
        )
    return sc.Trajectory(grid=grid, params=params, windows=tuple(windows))
