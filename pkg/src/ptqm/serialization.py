"""Deterministic JSON/CSV encoding and frame persistence.

Floats are written with 17 significant digits so every double survives a
round trip; complex numbers are ``[re, im]`` pairs and matrices are lists of
rows of such pairs. Keys are sorted, so equal inputs give equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import FrameInconsistent, IoError
from .linalg import Tolerances
from .metric import CPTFrame, verify_frame

__all__ = [
    "FRAME_SCHEMA",
    "format_float",
    "dumps",
    "encode_complex",
    "decode_complex",
    "encode_cmatrix",
    "decode_cmatrix",
    "csv_text",
    "write_text",
    "save_frame",
    "load_frame",
    "frame_to_dict",
    "frame_from_dict",
]

FRAME_SCHEMA = "ptqm-frame/1"


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    if x == 0:
        # keep the sign of zero but not a spurious exponent
        return "-0.0" if math.copysign(1.0, x) < 0 else "0.0"
    text = format(x, ".17g")
    if "." not in text and "e" not in text and "inf" not in text:
        text += ".0"
    return text


def _encode(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, (complex, np.complexfloating)):
        _encode(encode_complex(obj), indent, level, out)
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for i, (k, v) in enumerate(items):
            if not isinstance(k, str):
                raise TypeError(f"JSON keys must be strings, got {k!r}")
            out.append(pad + json.dumps(k) + ": ")
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        # short rows of scalars stay on one line to keep matrices readable
        if all(isinstance(v, (int, float, bool, np.number, np.bool_)) for v in seq) and len(seq) <= 8:
            parts = []
            for v in seq:
                sub: list = []
                _encode(v, indent, level + 1, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(seq):
            out.append(pad)
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i + 1 < len(seq) else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list = []
    _encode(obj, indent, 0, out)
    out.append("\n")
    return "".join(out)


def encode_complex(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def decode_complex(v, where: str = "value") -> complex:
    if isinstance(v, bool):
        raise ValueError(f"{where}: expected a number or [re, im], got {v!r}")
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    if isinstance(v, str):
        return complex(float(v), 0.0)
    if (isinstance(v, (list, tuple)) and len(v) == 2
            and all(isinstance(p, (int, float, str)) and not isinstance(p, bool) for p in v)):
        return complex(float(v[0]), float(v[1]))
    raise ValueError(f"{where}: expected [re, im], got {v!r}")


def encode_cmatrix(a) -> list:
    a = np.asarray(a, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_cmatrix(rows, where: str = "matrix", shape=None) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValueError(f"{where}: expected a non-empty list of rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{where}: rows have unequal length")
    out = np.empty((len(rows), width), dtype=np.complex128)
    for i, row in enumerate(rows):
        for j, z in enumerate(row):
            out[i, j] = decode_complex(z, f"{where}[{i}][{j}]")
    if shape is not None and out.shape != tuple(shape):
        raise ValueError(f"{where}: shape {out.shape}, expected {tuple(shape)}")
    return out


def _decode_cvector(values, where: str) -> np.ndarray:
    if not isinstance(values, list):
        raise ValueError(f"{where}: expected a list")
    return np.array([decode_complex(z, f"{where}[{k}]") for k, z in enumerate(values)],
                    dtype=np.complex128)


def csv_text(header, rows) -> str:
    """CSV with ``\\n`` line endings; floats use the same 17-digit format as JSON."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([
            format_float(v).strip('"') if isinstance(v, (float, np.floating)) else v
            for v in row
        ])
    return buf.getvalue()


def write_text(path, text: str):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


_MATRICES = ("hamiltonian", "par", "c", "eta", "eta_inv", "projector", "right", "left")


def frame_to_dict(frame: CPTFrame) -> dict:
    d = {name: encode_cmatrix(getattr(frame, name)) for name in _MATRICES}
    d.update(
        schema=FRAME_SCHEMA,
        signs=[int(s) for s in frame.signs],
        values=[encode_complex(z) for z in frame.values],
        weight=float(frame.weight),
        order_convention=frame.order_convention,
        lattice=bool(frame.lattice),
        tolerances={k: getattr(frame.tol, k) for k in ("res", "alg", "real", "disc")},
    )
    return d


def frame_from_dict(d: dict) -> CPTFrame:
    """Rebuild a frame and re-verify it; any defect surfaces as :class:`FrameInconsistent`."""
    try:
        if d.get("schema") != FRAME_SCHEMA:
            raise ValueError(f"unknown frame schema {d.get('schema')!r}")
        mats = {name: decode_cmatrix(d[name], name) for name in _MATRICES}
        signs = np.array(d["signs"])
        if signs.ndim != 1 or not np.issubdtype(signs.dtype, np.integer):
            raise ValueError("signs must be a list of integers")
        frame = CPTFrame(
            **mats,
            signs=signs,
            values=_decode_cvector(d["values"], "values"),
            weight=float(d["weight"]),
            order_convention=str(d["order_convention"]),
            lattice=bool(d["lattice"]),
            tol=Tolerances(**d["tolerances"]),
        )
        if frame.order_convention not in ("PC", "CP"):
            raise ValueError(f"unknown order convention {frame.order_convention!r}")
    except FrameInconsistent:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FrameInconsistent(f"malformed frame file: {exc}") from exc
    residuals = verify_frame(frame)
    object.__setattr__(frame, "residuals", residuals)
    return frame


def save_frame(frame: CPTFrame, path):
    write_text(path, dumps(frame_to_dict(frame)))


def load_frame(path) -> CPTFrame:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FrameInconsistent(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(d, dict):
        raise FrameInconsistent(f"{path}: expected a JSON object")
    return frame_from_dict(d)
