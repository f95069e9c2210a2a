"""PLY clouds, trajectory CSVs, scan directories and JSON helpers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geom import WORLD, PointCloud, Pose, Trajectory, as_points

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


class FormatError(ValueError):
    """A file could not be parsed; the message names the file."""


def write_ply(path, cloud) -> None:
    """ASCII PLY with float x, y, z. Values keep full double precision."""
    pts = as_points(cloud)
    header = (
        "ply\nformat ascii 1.0\n"
        f"element vertex {len(pts)}\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n"
    )
    with open(path, "w", newline="\n") as f:
        f.write(header)
        if len(pts):
            np.savetxt(f, pts, fmt="%.17g")


def read_ply(path, frame=WORLD) -> PointCloud:
    """Read the x, y, z vertex properties; any other property is dropped."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            if f.readline().strip() != b"ply":
                raise FormatError("missing 'ply' magic")
            fmt = None
            n = None
            props = []
            in_vertex = False
            while True:
                line = f.readline()
                if not line:
                    raise FormatError("unterminated header")
                tok = line.decode("ascii", "replace").split()
                if not tok or tok[0] in ("comment", "obj_info"):
                    continue
                if tok[0] == "end_header":
                    break
                if tok[0] == "format":
                    fmt = tok[1]
                elif tok[0] == "element":
                    in_vertex = tok[1] == "vertex"
                    if in_vertex:
                        n = int(tok[2])
                elif tok[0] == "property" and in_vertex:
                    if tok[1] == "list":
                        raise FormatError("list properties on vertices are not supported")
                    if tok[1] not in _PLY_TYPES:
                        raise FormatError(f"unknown property type {tok[1]!r}")
                    props.append((tok[2], _PLY_TYPES[tok[1]]))
            if n is None:
                raise FormatError("no vertex element")
            names = [p[0] for p in props]
            if not {"x", "y", "z"} <= set(names):
                raise FormatError("vertex element lacks x/y/z")
            cols = [names.index(c) for c in "xyz"]
            if fmt == "ascii":
                body = f.read().decode("ascii")
                rows = [r for r in body.splitlines() if r.strip()][:n]
                if len(rows) < n:
                    raise FormatError(f"expected {n} vertices, found {len(rows)}")
                if n == 0:
                    data = np.empty((0, 3))
                else:
                    data = np.array([r.split() for r in rows], dtype=np.float64)[:, cols]
            elif fmt in ("binary_little_endian", "binary_big_endian"):
                order = "<" if fmt == "binary_little_endian" else ">"
                dtype = np.dtype([(name, order + t) for name, t in props])
                raw = np.frombuffer(f.read(dtype.itemsize * n), dtype=dtype, count=n)
                data = np.stack([raw[c].astype(np.float64) for c in "xyz"], axis=1)
            else:
                raise FormatError(f"unsupported format {fmt!r}")
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None
    except (ValueError, IndexError) as e:
        raise FormatError(f"{path}: {e}") from None
    if not np.isfinite(data).all():
        raise FormatError(f"{path}: non-finite vertex coordinates")
    return PointCloud(data, frame)


def write_trajectory(path, traj: Trajectory) -> None:
    with open(path, "w", newline="\n") as f:
        for t, p in zip(traj.timestamps, traj.poses):
            vals = [t, *p.translation, *p.rotation]
            f.write(",".join(f"{v:.17g}" for v in vals) + "\n")


def read_trajectory(path) -> Trajectory:
    """CSV lines ``t,x,y,z,qw,qx,qy,qz``; a non-numeric first line is a header."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"trajectory file not found: {path}")
    ts, poses = [], []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            vals = [float(v) for v in parts]
        except ValueError:
            if lineno == 1:
                continue
            raise FormatError(f"{path}:{lineno}: non-numeric field") from None
        if len(vals) != 8:
            raise FormatError(f"{path}:{lineno}: expected 8 fields, got {len(vals)}")
        ts.append(vals[0])
        poses.append(Pose(vals[1:4], vals[4:8]))
    try:
        return Trajectory(ts, poses)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None


def scan_name(t: float) -> str:
    return f"{t:.6f}.ply"


def load_scan_dir(directory):
    """Time-sorted ``[(timestamp, cloud)]`` from ``{timestamp}.ply`` files."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"scan directory not found: {directory}")
    entries = []
    for p in directory.glob("*.ply"):
        try:
            t = float(p.stem)
        except ValueError:
            raise FormatError(f"{p}: file name is not a timestamp") from None
        entries.append((t, p))
    entries.sort(key=lambda e: e[0])
    return [(t, read_ply(p, frame="sensor")) for t, p in entries]


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)
