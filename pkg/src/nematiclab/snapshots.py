"""Binary snapshot container and CSV emission.

Snapshot layout ("DOQS1"): 5-byte magic, little-endian int32 header
(d, n per axis, lmax, nphi), float64 t and eps, then site-major float64
values.  Director snapshots reuse the container with a field-kind tag byte
right after the magic; kinetic density snapshots carry no tag byte.
"""

import csv
import struct

import numpy as np

MAGIC = b"DOQS1"
KIND_DIRECTOR = 1

__all__ = [
    "write_density", "read_density", "write_director", "read_director",
    "write_csv", "format_float",
]


class SnapshotFormatError(ValueError):
    """File does not parse as a DOQS1 container."""


def write_density(path, field, d, n, lmax, nphi):
    """Serialize a kinetic density snapshot (sites x sphere nodes)."""
    values = np.ascontiguousarray(
        np.reshape(field.values, (-1, field.values.shape[-1])), dtype="<f8")
    if values.shape[0] != n ** d:
        raise ValueError("site count does not match the torus header")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4i", d, n, lmax, nphi))
        fh.write(struct.pack("<2d", field.t, field.eps))
        fh.write(values.tobytes())


def read_density(path):
    """Return (values (nsites, nnodes), t, eps, header dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != MAGIC:
        raise SnapshotFormatError("bad magic")
    d, n, lmax, nphi = struct.unpack_from("<4i", raw, 5)
    t, eps = struct.unpack_from("<2d", raw, 21)
    nnodes = (lmax + 1) * nphi
    values = np.frombuffer(raw, dtype="<f8", offset=37).reshape(n ** d, nnodes)
    return values.copy(), t, eps, dict(d=d, n=n, lmax=lmax, nphi=nphi)


def write_director(path, n_field, t, d, n):
    """Serialize a director snapshot (sites x 3) with the field-kind tag."""
    values = np.ascontiguousarray(
        np.reshape(n_field, (-1, 3)), dtype="<f8")
    if values.shape[0] != n ** d:
        raise ValueError("site count does not match the torus header")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", KIND_DIRECTOR))
        fh.write(struct.pack("<4i", d, n, 0, 3))
        fh.write(struct.pack("<2d", t, 0.0))
        fh.write(values.tobytes())


def read_director(path):
    """Return (values (nsites, 3), t, header dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != MAGIC:
        raise SnapshotFormatError("bad magic")
    (kind,) = struct.unpack_from("<B", raw, 5)
    if kind != KIND_DIRECTOR:
        raise SnapshotFormatError(f"unexpected field kind {kind}")
    d, n, _, _ = struct.unpack_from("<4i", raw, 6)
    t, _ = struct.unpack_from("<2d", raw, 22)
    values = np.frombuffer(raw, dtype="<f8", offset=38).reshape(n ** d, 3)
    return values.copy(), t, dict(d=d, n=n)


def format_float(x):
    """17 significant digits; round-trips every float64 exactly."""
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    """RFC-4180 CSV with CRLF line endings; floats at full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating))
                             else v for v in row])
