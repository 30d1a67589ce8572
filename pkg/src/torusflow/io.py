"""On-disk formats.

HeightField binary layout (all little-endian)::

    magic    4s   b"TFHF"
    version  u32  1
    kind     u32  catalogue code (Lamella2D=1, Lamella3D=2, Disc2D=3, Cylinder3D=4)
    dims     u32  parameter dimension (1 or 2)
    comps    u32  number of boundary components
    n0, n1   u32  nodes per parameter axis (n1 = 0 when dims == 1)
    ref_hash u64  ReferenceSurface.ref_id
    data     f64  comps * n0 [* n1] values, C order

A trajectory is a directory holding ``meta.json`` (reference spec, flow kind,
times), one ``snap_NNNNN.tfh`` file per snapshot and an optional
``steps.ndjson`` sidecar of step reports.
"""

import csv
import json
from pathlib import Path
import struct

import numpy as np

from .errors import GridMismatch
from .geometry import HeightField
from .linear import Trajectory
from .reference import Kind, ReferenceSpec

MAGIC = b"TFHF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIIQ")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def dumps(obj):
    """Canonical JSON: sorted keys, compact separators, repr floats."""
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def write_ndjson(path, objects, mode="w"):
    with open(path, mode, encoding="utf-8", newline="\n") as fh:
        for o in objects:
            fh.write(dumps(o.to_dict() if hasattr(o, "to_dict") else o))
            fh.write("\n")


def read_ndjson(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# --------------------------------------------------------------------------
# height fields
# --------------------------------------------------------------------------

def write_heightfield(path, ref, u):
    vals = ref.check_field(u)
    n = ref.grid.n
    header = _HEADER.pack(MAGIC, VERSION, ref.kind_code, ref.grid.dims, ref.grid.components,
                          n[0], n[1] if len(n) > 1 else 0, ref.ref_id)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(vals, dtype="<f8").tobytes())


def read_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, kind, dims, comps, n0, n1, ref_hash = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    return {"kind": kind, "dims": dims, "components": comps,
            "n": (n0,) if dims == 1 else (n0, n1), "ref_hash": ref_hash}


def read_heightfield(path, ref=None):
    """HeightField from disk; with ``ref`` the reference hash and shape are checked."""
    hdr = read_header(path)
    shape = (hdr["components"],) + hdr["n"]
    data = np.fromfile(path, dtype="<f8", offset=_HEADER.size)
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: payload has {data.size} values, header implies {np.prod(shape)}")
    if ref is not None:
        if hdr["ref_hash"] != ref.ref_id or shape != ref.grid.shape:
            raise GridMismatch(f"{path}: written for a different reference/grid")
    return HeightField(hdr["ref_hash"], data.reshape(shape).astype(float))


def write_csv(path, ref, u):
    vals = ref.check_field(u)
    mesh = ref.grid.mesh()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component"] + [f"s{a}" for a in range(ref.grid.dims)] + ["u"])
        for idx in np.ndindex(vals.shape):
            w.writerow([idx[0]] + [repr(float(m[idx])) for m in mesh] + [repr(float(vals[idx]))])


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

def spec_to_dict(spec):
    return {"kind": spec.kind.value, "radius": spec.radius, "slab_width": spec.slab_width, "n": spec.n}


def spec_from_dict(d):
    return ReferenceSpec(Kind(d["kind"]), float(d.get("radius", 0.25)),
                         float(d.get("slab_width", 0.5)), int(d.get("n", 128)))


def write_trajectory(directory, ref, traj):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for i, u in enumerate(traj.fields):
        name = f"snap_{i:05d}.tfh"
        write_heightfield(d / name, ref, u)
        files.append(name)
    meta = {"reference": spec_to_dict(ref.spec), "ref_id": ref.ref_id, "flow_kind": traj.flow_kind,
            "times": [float(t) for t in traj.times], "snapshots": files}
    (d / "meta.json").write_text(dumps(meta) + "\n")
    if traj.reports:
        write_ndjson(d / "steps.ndjson", traj.reports)
    return d


def read_trajectory(directory):
    """(ReferenceSurface, Trajectory) from a trajectory directory."""
    from .reference import make_reference

    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    ref = make_reference(spec_from_dict(meta["reference"]))
    fields = [read_heightfield(d / f, ref).values for f in meta["snapshots"]]
    steps = read_ndjson(d / "steps.ndjson") if (d / "steps.ndjson").exists() else []
    return ref, Trajectory(ref.ref_id, meta["times"], fields, meta["flow_kind"], steps)
