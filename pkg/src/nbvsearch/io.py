"""Mesh and table file formats: OBJ, face-tag CSV, PLY with vertex quality."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .mesh import TriangleMesh


def write_obj(path, mesh: TriangleMesh) -> None:
    """ASCII Wavefront OBJ (vertices and 1-based triangle faces only)."""
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path, tags_path=None) -> TriangleMesh:
    """Read vertices and faces from an OBJ; polygons are fan-triangulated.

    Texture/normal references (``f 1/2/3 ...``) and negative indices are
    accepted. If ``tags_path`` is given, face tags are read from it.
    """
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for p in parts[1:]:
                    i = int(p.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for j in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[j], idx[j + 1]))
    tags = None
    if tags_path is not None:
        tags = read_tags(tags_path, len(faces))
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 3), tags)


def write_tags(path, mesh: TriangleMesh) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["face_id", "tag"])
        tags = mesh.face_tags if mesh.face_tags is not None else [""] * mesh.n_faces
        for i, t in enumerate(tags):
            w.writerow([i, t])


def read_tags(path, n_faces: int) -> np.ndarray:
    """``face_id,tag`` rows (header optional); unlisted faces get an empty tag."""
    tags = np.full(n_faces, "", dtype=object)
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip() == "face_id":
                continue
            fid = int(row[0])
            if not 0 <= fid < n_faces:
                raise ValueError(f"{path}: face id {fid} out of range")
            tags[fid] = row[1].strip() if len(row) > 1 else ""
    return tags


def write_ply(path, mesh: TriangleMesh, quality: Optional[np.ndarray] = None) -> None:
    """ASCII PLY; ``quality`` becomes a per-vertex float property."""
    has_q = quality is not None
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if has_q:
        header.append("property float quality")
    header += [f"element face {mesh.n_faces}", "property list uchar int vertex_indices", "end_header"]
    body = []
    q = np.asarray(quality).tolist() if has_q else None
    for i, (x, y, z) in enumerate(mesh.vertices.tolist()):
        body.append(f"{x!r} {y!r} {z!r} {q[i]!r}" if has_q else f"{x!r} {y!r} {z!r}")
    body += [f"3 {a} {b} {c}" for a, b, c in mesh.faces.tolist()]
    Path(path).write_text("\n".join(header + body) + "\n")


def read_ply(path) -> Tuple[TriangleMesh, Optional[np.ndarray]]:
    """Read an ASCII PLY written by :func:`write_ply`; returns ``(mesh, quality)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "ply":
        raise ValueError(f"{path}: not a PLY file")
    n_v = n_f = 0
    props = []
    current = None
    i = 1
    while lines[i] != "end_header":
        parts = lines[i].split()
        if parts[0] == "format" and parts[1] != "ascii":
            raise ValueError(f"{path}: only ASCII PLY is supported")
        if parts[0] == "element":
            current = parts[1]
            if current == "vertex":
                n_v = int(parts[2])
            elif current == "face":
                n_f = int(parts[2])
        elif parts[0] == "property" and current == "vertex":
            props.append(parts[-1])
        i += 1
    i += 1
    data = np.array([[float(t) for t in ln.split()] for ln in lines[i:i + n_v]]).reshape(n_v, len(props))
    faces = np.array([[int(t) for t in ln.split()[1:4]] for ln in lines[i + n_v:i + n_v + n_f]],
                     dtype=np.int64).reshape(-1, 3)
    xyz = data[:, [props.index("x"), props.index("y"), props.index("z")]]
    quality = data[:, props.index("quality")] if "quality" in props else None
    return TriangleMesh(xyz, faces), quality


def write_counts_csv(path, counts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "count"])
        for i, c in enumerate(np.asarray(counts).tolist()):
            w.writerow([i, int(c)])


def read_counts_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    counts = np.zeros(len(rows), dtype=np.int64)
    for r in rows:
        counts[int(r["vertex_id"])] = int(r["count"])
    return counts
