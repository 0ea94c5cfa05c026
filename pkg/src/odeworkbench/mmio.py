"""Matrix Market reader/writer.

Written in-house rather than using ``scipy.io.mmread``/``mmwrite`` for two
reasons: parse errors must carry line and column, and written entries use
``repr`` of each float so that a write/read round trip is bit-exact.
"""

from __future__ import annotations

import io
import os
from typing import Union

import numpy as np
import scipy.sparse as sp

from .errors import InputError

FIELDS = ("real", "complex", "integer", "pattern")
SYMMETRIES = ("general", "symmetric", "skew-symmetric", "hermitian")


def _tokens(line: str):
    """Yield ``(token, column)`` pairs, columns 1-based."""
    col = 0
    n = len(line)
    while col < n:
        while col < n and line[col] in " \t\r\n":
            col += 1
        if col >= n:
            break
        start = col
        while col < n and line[col] not in " \t\r\n":
            col += 1
        yield line[start:col], start + 1


def _num(tok: str, lineno: int, col: int, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise InputError(f"cannot parse {tok!r} as {kind.__name__}", line=lineno, column=col) from None


def read_matrix_market(source: Union[str, os.PathLike, io.TextIOBase]):
    """Parse Matrix Market text; coordinate gives CSR, array gives an ndarray.

    ``source`` is a path or an open text stream.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source, encoding="ascii") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {source}: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise InputError(f"{source} is not ASCII text") from exc
    lines = text.splitlines()
    if not lines:
        raise InputError("empty Matrix Market file", line=1, column=1)
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise InputError("bad header, expected '%%MatrixMarket matrix <format> <field> <symmetry>'", line=1, column=1)
    fmt, field, sym = (h.lower() for h in head[2:])
    if fmt not in ("coordinate", "array"):
        raise InputError(f"unknown format {fmt!r}", line=1, column=lines[0].lower().find(fmt) + 1)
    if field not in FIELDS:
        raise InputError(f"unknown field {field!r}", line=1, column=lines[0].lower().find(field) + 1)
    if sym not in SYMMETRIES:
        raise InputError(f"unknown symmetry {sym!r}", line=1, column=lines[0].lower().find(sym) + 1)
    if fmt == "array" and field == "pattern":
        raise InputError("array format cannot use the pattern field", line=1, column=1)

    body = [(i + 1, ln) for i, ln in enumerate(lines[1:], start=1) if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise InputError("missing size line", line=len(lines), column=1)
    lineno, size_line = body[0]
    size = [(_num(t, lineno, c, int), c) for t, c in _tokens(size_line)]
    want = 3 if fmt == "coordinate" else 2
    if len(size) != want:
        raise InputError(f"size line needs {want} integers", line=lineno, column=1)
    nrows, ncols = size[0][0], size[1][0]
    if nrows < 0 or ncols < 0:
        raise InputError("negative dimension", line=lineno, column=1)
    per = {"real": 1, "integer": 1, "complex": 2, "pattern": 0}[field]
    dtype = complex if field == "complex" else float

    def value(toks, lineno):
        if field == "pattern":
            return 1.0
        if field == "complex":
            return complex(_num(toks[0][0], lineno, toks[0][1]), _num(toks[1][0], lineno, toks[1][1]))
        kind = int if field == "integer" else float
        return kind(_num(toks[0][0], lineno, toks[0][1], kind))

    entries = body[1:]
    if fmt == "coordinate":
        nnz = size[2][0]
        if len(entries) != nnz:
            where = entries[nnz][0] if len(entries) > nnz else len(lines)
            raise InputError(f"expected {nnz} entries, found {len(entries)}", line=where, column=1)
        rows, cols, vals = [], [], []
        for lineno, ln in entries:
            toks = list(_tokens(ln))
            if len(toks) != 2 + per:
                raise InputError(f"expected {2 + per} fields, found {len(toks)}", line=lineno, column=1)
            i = _num(toks[0][0], lineno, toks[0][1], int)
            j = _num(toks[1][0], lineno, toks[1][1], int)
            if not (1 <= i <= nrows):
                raise InputError(f"row index {i} out of range", line=lineno, column=toks[0][1])
            if not (1 <= j <= ncols):
                raise InputError(f"column index {j} out of range", line=lineno, column=toks[1][1])
            v = value(toks[2:], lineno)
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
            if sym != "general" and i != j:
                rows.append(j - 1)
                cols.append(i - 1)
                vals.append(_mirror(v, sym))
        return sp.csr_matrix((np.array(vals, dtype=dtype), (rows, cols)), shape=(nrows, ncols))

    # array format: column-major; symmetric variants store the lower triangle only
    if sym == "general":
        positions = [(i, j) for j in range(ncols) for i in range(nrows)]
    else:
        if nrows != ncols:
            raise InputError("symmetric array must be square", line=lineno, column=1)
        lo = 0 if sym != "skew-symmetric" else 1
        positions = [(i, j) for j in range(ncols) for i in range(j + lo, nrows)]
    if len(entries) != len(positions):
        where = entries[len(positions)][0] if len(entries) > len(positions) else len(lines)
        raise InputError(f"expected {len(positions)} entries, found {len(entries)}", line=where, column=1)
    out = np.zeros((nrows, ncols), dtype=dtype)
    for (lineno, ln), (i, j) in zip(entries, positions):
        toks = list(_tokens(ln))
        if len(toks) != per:
            raise InputError(f"expected {per} fields, found {len(toks)}", line=lineno, column=1)
        v = value(toks, lineno)
        out[i, j] = v
        if sym != "general" and i != j:
            out[j, i] = _mirror(v, sym)
    return out


def _mirror(v, sym):
    if sym == "symmetric":
        return v
    if sym == "skew-symmetric":
        return -v
    return np.conj(v)


def _fmt(x: float) -> str:
    return repr(float(x))


def format_matrix_market(M, comment: str = "") -> str:
    """Matrix Market text; sparse input uses coordinate format, dense uses array."""
    is_sparse = sp.issparse(M)
    if not is_sparse:
        M = np.asarray(M)
        if M.ndim == 1:
            M = M.reshape(-1, 1)
        if M.ndim != 2:
            raise InputError("only 1-D or 2-D arrays can be written")
    cplx = np.iscomplexobj(M.data if is_sparse else M)
    if cplx and not is_sparse and np.all(M.imag == 0):
        cplx = False
    if cplx and is_sparse and np.all(M.data.imag == 0):
        cplx = False
    field = "complex" if cplx else "real"
    buf = io.StringIO()
    buf.write(f"%%MatrixMarket matrix {'coordinate' if is_sparse else 'array'} {field} general\n")
    for c in comment.splitlines():
        buf.write(f"% {c}\n")

    def val(v):
        if cplx:
            return f"{_fmt(v.real)} {_fmt(v.imag)}"
        return _fmt(v.real if np.iscomplexobj(v) else v)

    if is_sparse:
        C = sp.coo_matrix(M)
        order = np.lexsort((C.row, C.col))
        buf.write(f"{C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for t in order:
            buf.write(f"{C.row[t] + 1} {C.col[t] + 1} {val(C.data[t])}\n")
    else:
        buf.write(f"{M.shape[0]} {M.shape[1]}\n")
        for v in M.flatten(order="F"):
            buf.write(val(v) + "\n")
    return buf.getvalue()


def write_matrix_market(path: Union[str, os.PathLike], M, comment: str = "") -> str:
    """Write ``M`` to ``path`` and return the path."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_matrix_market(M, comment))
    return os.fspath(path)
