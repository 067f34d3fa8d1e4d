"""File formats: single-column CSV signals, PGM images and TVT1 tensors.

TVT1 layout (little endian): the 4 magic bytes ``b"TVT1"``, a ``u32`` number
of axes, one ``u32`` per axis, then the ``float64`` data in row-major order.
"""
from __future__ import annotations

import re
import struct
import warnings
from pathlib import Path

import numpy as np

__all__ = [
    "FormatError",
    "read_csv",
    "write_csv",
    "read_matrix_csv",
    "read_pgm",
    "write_pgm",
    "read_tvt",
    "write_tvt",
    "read_array",
    "write_array",
]

TVT_MAGIC = b"TVT1"


class FormatError(ValueError):
    """A file could not be read or does not follow its format."""


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _loadtxt(path):
    try:
        with warnings.catch_warnings():
            # an empty file is reported below as a FormatError
            warnings.simplefilter("ignore", UserWarning)
            return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2, comments="#")
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot parse {path}: {exc}") from exc


def read_csv(path):
    """Read a single-column CSV (one number per line) into a 1D array."""
    data = _loadtxt(path)
    if data.shape[1] != 1:
        raise FormatError(f"{path}: expected one column, found {data.shape[1]}")
    out = data[:, 0]
    if out.size == 0 or not np.all(np.isfinite(out)):
        raise FormatError(f"{path}: empty or non-finite values")
    return out


def read_matrix_csv(path):
    """Read a comma separated numeric matrix, one row per line."""
    data = _loadtxt(path)
    if data.size == 0 or not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: empty or non-finite values")
    return data


def write_csv(path, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    try:
        np.savetxt(path, x, fmt="%.17g", delimiter=",")
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc


# header tokens are separated by whitespace and may be interleaved with comments
_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def _pgm_header(raw):
    pos = 0
    toks = []
    for _ in range(4):
        m = _PGM_TOKEN.match(raw, pos)
        if m is None:
            raise FormatError("truncated PGM header")
        toks.append(m.group(1))
        pos = m.end()
    return toks, pos


def read_pgm(path, normalize=True):
    """Read a P2 or P5 PGM image.

    Returns a 2D float array divided by ``maxval`` (values in ``[0, 1]``)
    unless ``normalize`` is False.  ``maxval`` up to 65535 is accepted;
    16-bit P5 samples are big endian.
    """
    raw = _read_bytes(path)
    toks, pos = _pgm_header(raw)
    magic = toks[0]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"{path}: not a PGM file (magic {magic!r})")
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if w < 1 or h < 1 or not 0 < maxval <= 65535:
        raise FormatError(f"{path}: bad PGM dimensions or maxval")
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        pos += 1
        dt = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = w * h * dt.itemsize
        if len(raw) - pos < need:
            raise FormatError(f"{path}: truncated raster")
        img = np.frombuffer(raw, dtype=dt, count=w * h, offset=pos).astype(np.float64)
    else:
        try:
            vals = re.sub(rb"#[^\n]*", b"", raw[pos:]).split()
            img = np.array([int(v) for v in vals[: w * h]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}: bad P2 raster") from exc
        if img.size != w * h:
            raise FormatError(f"{path}: truncated raster")
    if np.any(img > maxval):
        raise FormatError(f"{path}: sample exceeds maxval")
    img = img.reshape(h, w)
    return img / maxval if normalize else img


def write_pgm(path, img, maxval=255, binary=True):
    """Write a 2D array with values in ``[0, 1]`` as PGM, rounding to ``maxval`` levels.

    Values outside ``[0, 1]`` are clipped.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise FormatError("PGM images must be 2D")
    if not 0 < maxval <= 65535:
        raise FormatError("maxval must lie in 1..65535")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    h, w = img.shape
    head = f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n".encode()
    if binary:
        body = q.astype(">u2" if maxval > 255 else "u1").tobytes()
    else:
        body = ("\n".join(" ".join(str(v) for v in row) for row in q) + "\n").encode()
    try:
        Path(path).write_bytes(head + body)
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc


def read_tvt(path):
    raw = _read_bytes(path)
    if raw[:4] != TVT_MAGIC:
        raise FormatError(f"{path}: bad magic, expected TVT1")
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header")
    (ndim,) = struct.unpack_from("<I", raw, 4)
    off = 8 + 4 * ndim
    if ndim < 1 or len(raw) < off:
        raise FormatError(f"{path}: bad axis count")
    dims = struct.unpack_from(f"<{ndim}I", raw, 8)
    if any(d < 1 for d in dims):
        raise FormatError(f"{path}: empty axis")
    count = int(np.prod(dims))
    if len(raw) - off != 8 * count:
        raise FormatError(f"{path}: expected {count} values, found {(len(raw) - off) / 8:g}")
    return np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(dims).astype(np.float64)


def write_tvt(path, X):
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim < 1:
        raise FormatError("tensor needs at least one axis")
    head = TVT_MAGIC + struct.pack(f"<I{X.ndim}I", X.ndim, *X.shape)
    try:
        Path(path).write_bytes(head + X.tobytes())
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc


def read_array(path):
    """Dispatch on the extension: ``.pgm``, ``.tvt``, otherwise CSV."""
    ext = Path(path).suffix.lower()
    if ext == ".pgm":
        return read_pgm(path)
    if ext == ".tvt":
        return read_tvt(path)
    return read_csv(path)


def write_array(path, X):
    ext = Path(path).suffix.lower()
    if ext == ".pgm":
        write_pgm(path, X)
    elif ext == ".tvt":
        write_tvt(path, X)
    else:
        write_csv(path, X)
