"""On-disk formats: NPBF field files, CSV tables and JSON run manifests.

NPBF layout (all little-endian)::

    b"NPBF"                 magic
    u32                     format version
    u32                     d
    d x u32                 n per axis
    f64                     box length
    u32                     component count
    f64[components * n^d]   payload, components concatenated, x1 slowest
"""

import csv
import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from ..errors import FieldFormatError
from ..fields import Grid, ScalarField, VectorField

MAGIC = b"NPBF"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


def encode_field(field):
    """Serialise a ScalarField or VectorField to NPBF bytes."""
    g = field.grid
    if isinstance(field, ScalarField):
        data = field.values[None]
    else:
        data = field.components
    head = MAGIC + struct.pack("<II", FORMAT_VERSION, g.d)
    head += struct.pack(f"<{g.d}I", *g.shape)
    head += struct.pack("<dI", g.box_length, data.shape[0])
    return head + np.ascontiguousarray(data, dtype="<f8").tobytes()


def decode_field(buf):
    """Parse NPBF bytes; one component gives a ScalarField, d components a VectorField."""
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise FieldFormatError("not an NPBF file (bad magic)")
    version, d = struct.unpack_from("<II", buf, 4)
    if version != FORMAT_VERSION:
        raise FieldFormatError(f"unsupported NPBF version {version}")
    if d not in (1, 2, 3):
        raise FieldFormatError(f"bad dimension {d} in header")
    off = 12
    try:
        ns = struct.unpack_from(f"<{d}I", buf, off)
        off += 4 * d
        L, comps = struct.unpack_from("<dI", buf, off)
    except struct.error:
        raise FieldFormatError("truncated NPBF header") from None
    off += 12
    if len(set(ns)) != 1:
        raise FieldFormatError(f"anisotropic grids are not supported: {ns}")
    grid = Grid(d, ns[0], L)
    want = comps * grid.size * 8
    if len(buf) - off != want:
        raise FieldFormatError(f"payload has {len(buf) - off} bytes, expected {want}")
    data = np.frombuffer(buf, dtype="<f8", offset=off).astype(float)
    data = data.reshape((comps,) + grid.shape)
    if comps == 1:
        return ScalarField(grid, data[0])
    if comps == d:
        return VectorField(grid, data)
    raise FieldFormatError(f"component count {comps} is neither 1 nor d={d}")


def write_field(path, field):
    Path(path).write_bytes(encode_field(field))


def read_field(path):
    return decode_field(Path(path).read_bytes())


def fmt(x):
    """Shortest round-trip decimal text for a number (empty for None)."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, header, rows):
    """RFC 4180 CSV (CRLF line ends); numbers in shortest round-trip form."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in r])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def inventory(out_dir, names):
    out_dir = Path(out_dir)
    return {name: sha256_file(out_dir / name) for name in sorted(names)}


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_manifest(out_dir, manifest):
    path = Path(out_dir) / MANIFEST_NAME
    text = json.dumps(manifest, indent=2, sort_keys=True, default=_plain)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return json.loads(path.read_text(encoding="utf-8"))
