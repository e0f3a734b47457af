"""Matrix Market reader/writer for symmetric sparse matrices and patterns.

Values are written with 17 significant digits so that a write/read cycle
reproduces every double bit-for-bit.
"""
from __future__ import annotations

import os

import numpy as np

from .spmat import SparsityPattern, SymSparseMatrix


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _open(path_or_file, mode):
    if hasattr(path_or_file, "read") or hasattr(path_or_file, "write"):
        return path_or_file, False
    return open(os.fspath(path_or_file), mode, encoding="ascii", newline="\n"), True


def _read_header(lines):
    header = next(lines).strip()
    parts = header.split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
        raise ValueError(f"not a Matrix Market header: {header!r}")
    _, obj, fmt, field, symmetry = (p.lower() for p in parts)
    if obj != "matrix":
        raise ValueError(f"unsupported object {obj!r}")
    for line in lines:
        s = line.strip()
        if s and not s.startswith("%"):
            return fmt, field, symmetry, s
    raise ValueError("missing size line")


def read_coordinate(path_or_file):
    """Return ``(shape, rows, cols, values_or_None, symmetry)`` with 0-based indices."""
    f, owned = _open(path_or_file, "r")
    try:
        lines = iter(f)
        fmt, field, symmetry, size = _read_header(lines)
        if fmt != "coordinate":
            raise ValueError("expected coordinate format")
        nr, nc, nnz = (int(t) for t in size.split())
        body = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("%")]
    finally:
        if owned:
            f.close()
    if len(body) != nnz:
        raise ValueError(f"expected {nnz} entries, found {len(body)}")
    if nnz == 0:
        return (nr, nc), np.zeros(0, np.int64), np.zeros(0, np.int64), None, symmetry
    toks = [ln.split() for ln in body]
    rows = np.array([int(t[0]) for t in toks], dtype=np.int64) - 1
    cols = np.array([int(t[1]) for t in toks], dtype=np.int64) - 1
    vals = None
    if field != "pattern":
        if field == "complex":
            raise ValueError("complex matrices are not supported")
        vals = np.array([float(t[2]) for t in toks])
    return (nr, nc), rows, cols, vals, symmetry


def read_pattern(path_or_file) -> SparsityPattern:
    """Off-diagonal support of any square coordinate file (values ignored)."""
    (nr, nc), rows, cols, vals, _ = read_coordinate(path_or_file)
    if nr != nc:
        raise ValueError("pattern must be square")
    if vals is not None:
        keep = vals != 0
        rows, cols = rows[keep], cols[keep]
    return SparsityPattern.from_edges(nr, np.column_stack([rows, cols]))


def read_matrix(path_or_file) -> SymSparseMatrix:
    """Read a real symmetric coordinate file; missing diagonal entries are 0."""
    (nr, nc), rows, cols, vals, symmetry = read_coordinate(path_or_file)
    if nr != nc:
        raise ValueError("matrix must be square")
    if vals is None:
        raise ValueError("pattern file has no values; use read_pattern")
    diag = np.zeros(nr)
    on = rows == cols
    diag[rows[on]] = vals[on]
    entries = {}
    for i, j, v in zip(rows[~on], cols[~on], vals[~on]):
        key = (min(i, j), max(i, j))
        if symmetry == "general" and key in entries and entries[key] != v:
            raise ValueError(f"general file is not symmetric at {key}")
        entries[key] = v
    return SymSparseMatrix.from_entries(nr, diag, [(i, j, v) for (i, j), v in entries.items()])


def write_matrix(path_or_file, m: SymSparseMatrix, comment: str | None = None) -> None:
    """Write lower-triangle coordinates, diagonal first within each column."""
    lines = ["%%MatrixMarket matrix coordinate real symmetric"]
    if comment:
        lines.extend("%" + c for c in comment.splitlines())
    # column-major over the lower triangle: (row=j, col=i) for i < j
    entries = [(i, i, m.diag[i]) for i in range(m.d)]
    entries += [(int(j), int(i), v) for (i, j), v in zip(m.pattern.edges, m.offdiag)]
    entries.sort(key=lambda t: (t[1], t[0]))
    lines.append(f"{m.d} {m.d} {len(entries)}")
    lines.extend(f"{r + 1} {c + 1} {_fmt(v)}" for r, c, v in entries)
    _write_lines(path_or_file, lines)


def write_pattern(path_or_file, e: SparsityPattern, comment: str | None = None) -> None:
    lines = ["%%MatrixMarket matrix coordinate pattern symmetric"]
    if comment:
        lines.extend("%" + c for c in comment.splitlines())
    lines.append(f"{e.d} {e.d} {e.n_edges}")
    order = np.lexsort((e.edges[:, 1], e.edges[:, 0]))
    lines.extend(f"{int(j) + 1} {int(i) + 1}" for i, j in e.edges[order])
    _write_lines(path_or_file, lines)


def write_lower(path_or_file, d: int, rows, cols, vals) -> None:
    """General coordinate file holding strictly-lower entries (unit diagonal omitted)."""
    lines = ["%%MatrixMarket matrix coordinate real general", f"{d} {d} {len(vals)}"]
    lines.extend(f"{r + 1} {c + 1} {_fmt(v)}" for r, c, v in zip(rows, cols, vals))
    _write_lines(path_or_file, lines)


def write_array(path_or_file, values) -> None:
    values = np.asarray(values, dtype=float).ravel()
    lines = ["%%MatrixMarket matrix array real general", f"{len(values)} 1"]
    lines.extend(_fmt(v) for v in values)
    _write_lines(path_or_file, lines)


def read_array(path_or_file) -> np.ndarray:
    f, owned = _open(path_or_file, "r")
    try:
        lines = iter(f)
        fmt, _, _, size = _read_header(lines)
        if fmt != "array":
            raise ValueError("expected array format")
        nr, nc = (int(t) for t in size.split())
        vals = [float(ln) for ln in lines if ln.strip() and not ln.lstrip().startswith("%")]
    finally:
        if owned:
            f.close()
    return np.array(vals).reshape(nc, nr).T.ravel() if nc > 1 else np.array(vals)


def _write_lines(path_or_file, lines) -> None:
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
        return
    with open(os.fspath(path_or_file), "w", encoding="ascii", newline="\n") as f:
        f.write(text)
