"""Flat ``key = value`` configuration files.

Values are numbers (``2.5``, ``1e-4``, ``1+2j``), inline arrays with ``,``
between entries and ``;`` between rows (``[-1, 0.5; 0, -2]``), Matrix Market
file references ``@path`` (relative to the config file), or one of the
built-in generators ``twisted:D``, ``zero:D``, ``fig1:A``, ``fig1:B``.
``#`` starts a comment.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .matrices import fig1_pair, twisted_toeplitz
from .mmio import read_matrix_market


@dataclass(frozen=True)
class Entry:
    value: object
    line: int
    column: int
    text: str


def _parse_number(tok: str, line: int, col: int):
    t = tok.strip()
    try:
        return float(t)
    except ValueError:
        pass
    try:
        v = complex(t.replace(" ", ""))
    except ValueError:
        raise InputError(f"cannot parse number {t!r}", line=line, column=col) from None
    return v.real if v.imag == 0 else v


def _parse_array(text: str, line: int, col: int) -> np.ndarray:
    inner = text[1:-1]
    rows = []
    offset = col + 1
    for raw_row in inner.split(";"):
        row = []
        pos = offset
        for tok in raw_row.split(","):
            lead = len(tok) - len(tok.lstrip())
            if not tok.strip():
                raise InputError("empty array entry", line=line, column=pos + lead)
            row.append(_parse_number(tok, line, pos + lead))
            pos += len(tok) + 1
        rows.append(row)
        offset += len(raw_row) + 1
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InputError("ragged array rows", line=line, column=col)
    arr = np.array(rows)
    return arr.ravel() if arr.shape[0] == 1 else arr


def builtin_matrix(spec: str):
    """Resolve ``twisted:D``, ``zero:D``, ``fig1:A``/``fig1:B``; ``None`` when not a builtin."""
    name, _, arg = spec.partition(":")
    if name == "twisted":
        return twisted_toeplitz(int(arg))
    if name == "zero":
        return np.zeros((int(arg), int(arg)))
    if name == "fig1":
        A, B = fig1_pair()
        if arg.upper() == "A":
            return A
        if arg.upper() == "B":
            return B
        raise ValueError(arg)
    return None


def parse_value(text: str, line: int, col: int, base_dir: str = "."):
    text = text.strip()
    if not text:
        raise InputError("missing value", line=line, column=col)
    if text.startswith("["):
        if not text.endswith("]"):
            raise InputError("unterminated array", line=line, column=col + len(text))
        return _parse_array(text, line, col)
    if text.startswith("@"):
        path = os.path.join(base_dir, text[1:].strip())
        M = read_matrix_market(path)
        if sp.issparse(M):
            return M
        return M.ravel() if M.ndim == 2 and M.shape[1] == 1 else M
    if ":" in text and text.split(":", 1)[0].isalpha():
        try:
            M = builtin_matrix(text)
        except ValueError:
            raise InputError(f"bad generator argument in {text!r}", line=line, column=col) from None
        if M is None:
            raise InputError(f"unknown generator {text!r}", line=line, column=col)
        return M
    return _parse_number(text, line, col)


def parse_config(text: str, base_dir: str = ".") -> dict:
    """Parse config text into ``{key: Entry}``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            raise InputError("expected 'key = value'", line=lineno, column=len(line) - len(line.lstrip()) + 1)
        key, _, val = line.partition("=")
        kcol = len(key) - len(key.lstrip()) + 1
        key = key.strip()
        if not key.replace("_", "").isalnum():
            raise InputError(f"invalid key {key!r}", line=lineno, column=kcol)
        if key in out:
            raise InputError(f"duplicate key {key!r}", line=lineno, column=kcol)
        vcol = len(line) - len(val) + (len(val) - len(val.lstrip())) + 1
        out[key] = Entry(parse_value(val, lineno, vcol, base_dir), lineno, vcol, val.strip())
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def require(cfg: dict, allowed: dict, required: tuple) -> dict:
    """Check keys against ``allowed`` (name -> description) and return plain values."""
    for k, e in cfg.items():
        if k not in allowed:
            raise InputError(f"unknown key {k!r}; expected one of {sorted(allowed)}", line=e.line, column=1)
    for k in required:
        if k not in cfg:
            raise InputError(f"missing required key {k!r}")
    return {k: e.value for k, e in cfg.items()}


def snapshot(values: dict) -> dict:
    """JSON-friendly copy of parsed values."""

    def conv(v):
        if sp.issparse(v):
            v = v.toarray()
        if isinstance(v, np.ndarray):
            if np.iscomplexobj(v) and np.any(v.imag):
                return {"real": v.real.tolist(), "imag": v.imag.tolist()}
            return np.real(v).tolist()
        if isinstance(v, complex):
            return [v.real, v.imag]
        return v

    return {k: conv(v) for k, v in sorted(values.items())}
