"""Readers and writers for every on-disk artifact.

CSV numbers are rendered with Python's shortest round-trip representation,
so write/read cycles reproduce float64 values bit for bit. Images travel
as 16-bit big-endian P5 PGM (value = round(intensity * 65535)) or as CSV;
sinograms as CSV plus a JSON sidecar with the scan geometry; experiment
configurations as schema-validated JSON documents.
"""

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .sets import set_from_dict, set_to_dict
from .tomo import Geometry, Sinogram


class FormatError(ValueError):
    """Malformed file; the message names the file and offending location."""


def _fmt(x):
    return repr(float(x))


def write_csv_matrix(path, a):
    """Dense matrix (or a vector, written as one column) to CSV."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected 1-D or 2-D data, got shape {a.shape}")
    with open(path, "w") as fh:
        for row in a:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv_matrix(path):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise FormatError(f"{path}: line {lineno}: expected {width} fields, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def write_csv_vector(path, v):
    write_csv_matrix(path, np.asarray(v, dtype=np.float64).reshape(-1, 1))


def read_csv_vector(path):
    a = read_csv_matrix(path)
    if 1 not in a.shape:
        raise FormatError(f"{path}: expected a single row or column, got shape {a.shape}")
    return a.reshape(-1)


def write_sparse_csv(path, A):
    """Triplet CSV with a two-line header: 'rows,cols' then 'nnz'."""
    i, j, v = A.triplets()
    with open(path, "w") as fh:
        fh.write(f"{A.rows},{A.cols}\n{A.nnz}\n")
        for ii, jj, vv in zip(i, j, v):
            fh.write(f"{ii},{jj},{_fmt(vv)}\n")


def read_sparse_csv(path):
    from .linalg import SparseMatrix

    with open(path) as fh:
        lines = fh.read().splitlines()
    try:
        rows, cols = (int(f) for f in lines[0].split(","))
        nnz = int(lines[1])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: bad header (want 'rows,cols' / 'nnz'): {exc}") from None
    i = np.empty(nnz, dtype=np.int64)
    j = np.empty(nnz, dtype=np.int64)
    v = np.empty(nnz, dtype=np.float64)
    body = [ln for ln in lines[2:] if ln.strip()]
    if len(body) != nnz:
        raise FormatError(f"{path}: header says {nnz} entries, found {len(body)}")
    for k, line in enumerate(body):
        try:
            fi, fj, fv = line.split(",")
            i[k], j[k], v[k] = int(fi), int(fj), float(fv)
        except ValueError as exc:
            raise FormatError(f"{path}: line {k + 3}: {exc}") from None
    return SparseMatrix.from_triplets(rows, cols, i, j, v)


def looks_like_triplet_csv(path):
    """Sniff the two-line triplet header (two ints, then one int)."""
    with open(path) as fh:
        first = fh.readline().strip().split(",")
        second = fh.readline().strip().split(",")
    try:
        return len(first) == 2 and len(second) == 1 and all(
            float(f).is_integer() for f in first + second) and "." not in "".join(first + second)
    except ValueError:
        return False


def read_matrix_auto(path):
    """Sparse matrix from either triplet CSV or dense CSV."""
    from .linalg import SparseMatrix

    if looks_like_triplet_csv(path):
        return read_sparse_csv(path)
    return SparseMatrix.from_dense(read_csv_matrix(path))


def write_pgm(path, img):
    """16-bit binary P5 with big-endian samples; intensities in [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    data = np.round(img * 65535.0).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path):
    """P2 (ascii) or P5 (binary, 8- or 16-bit big-endian) to [0, 1] floats."""
    raw = Path(path).read_bytes()
    magic = raw[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"{path}: offset 0: not a P2/P5 PGM file")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: offset {pos}: truncated header")
        fields.append(raw[start:pos])
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise FormatError(f"{path}: malformed header fields {fields}") from None
    if maxval <= 0 or maxval > 65535:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    if magic == b"P2":
        try:
            samples = np.array(raw[pos:].split(), dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}: bad ascii sample: {exc}") from None
    else:
        pos += 1  # single whitespace after maxval
        dtype = ">u2" if maxval > 255 else np.uint8
        samples = np.frombuffer(raw, dtype=dtype, offset=pos).astype(np.float64)
    if samples.size != width * height:
        raise FormatError(f"{path}: expected {width * height} samples, got {samples.size}")
    return samples.reshape(height, width) / float(maxval)


def write_sinogram(path, sino):
    """CSV of values plus a '<path>.json' sidecar holding the geometry."""
    write_csv_matrix(path, sino.values)
    Path(str(path) + ".json").write_text(
        json.dumps({"geometry": sino.geometry.to_dict()}, indent=2) + "\n")


def read_sinogram(path):
    values = read_csv_matrix(path)
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise FormatError(f"{sidecar}: missing geometry sidecar")
    meta = json.loads(sidecar.read_text())
    geom = Geometry(**meta["geometry"])
    return Sinogram(geom, values)


def write_trace_csv(path, trace):
    """Per-cycle scalars: iter, residual_max, displacement."""
    with open(path, "w") as fh:
        fh.write("iter,residual_max,displacement\n")
        for q, (r, d) in enumerate(zip(trace.residuals, trace.displacements), 1):
            fh.write(f"{q},{_fmt(r)},{_fmt(d)}\n")


def write_bracket_csv(path, history):
    with open(path, "w") as fh:
        fh.write("step,eps_lo,eps_hi\n")
        for k, (lo, hi) in enumerate(history):
            fh.write(f"{k},{_fmt(lo)},{_fmt(hi)}\n")


def write_report_json(path, report):
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def read_sets_json(path):
    """A set collection: either a bare list or {"sets": [...]}."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    items = doc["sets"] if isinstance(doc, dict) and "sets" in doc else doc
    if not isinstance(items, list) or not items:
        raise FormatError(f"{path}: expected a non-empty list of set descriptions")
    try:
        return [set_from_dict(d) for d in items]
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_sets_json(path, sets):
    doc = {"sets": [set_to_dict(s) for s in sets]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


_METHOD_SCHEMAS = {
    "art": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "iterations": {"type": "integer", "minimum": 1},
            "relax": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
        },
    },
    "sart": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "iterations": {"type": "integer", "minimum": 1},
            "relax": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
        },
    },
    "fbp": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "window": {"enum": [None, "cosine", "hann"]},
        },
    },
    "dilated": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "adaptive": {"type": "boolean"},
            "epsilon_noise": {"type": "number", "minimum": 0},
            "max_shift": {"type": "integer", "minimum": 0},
            "iterations": {"type": "integer", "minimum": 1},
            "relax": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
            "init": {"enum": ["zeros", "sart", "fbp"]},
            "init_iterations": {"type": "integer", "minimum": 1},
            "bracket_tol": {"type": "number", "exclusiveMinimum": 0},
        },
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["geometry", "seed", "paths"],
    "properties": {
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "angles"],
            "properties": {
                "n": {"type": "integer", "minimum": 16},
                "angles": {"type": "integer", "minimum": 1},
                "bins": {"type": "integer", "minimum": 1},
            },
        },
        "corruption": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gaussian_sigma": {"type": "number", "minimum": 0},
                "uniform_amplitude": {"type": "number", "minimum": 0},
                "max_shift": {"type": "integer", "minimum": 0},
            },
        },
        "methods": {
            "type": "object",
            "additionalProperties": False,
            "properties": _METHOD_SCHEMAS,
        },
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "residual_tol": {"type": "number", "exclusiveMinimum": 0},
                "step_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "paths": {
            "type": "object",
            "additionalProperties": False,
            "required": ["workdir"],
            "properties": {"workdir": {"type": "string"}},
        },
    },
}


def validate_config(doc, source="config"):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise FormatError(f"{source}: {e.json_path}: {e.message}")
    return doc


def read_config(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return validate_config(doc, source=str(path))


def write_config(path, doc):
    validate_config(doc, source=str(path))
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
