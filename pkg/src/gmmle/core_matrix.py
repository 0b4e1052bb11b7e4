"""Sparse non-negative integer count matrices with feature/cell identifiers.

A count matrix is treated throughout the package as the adjacency matrix of
a bipartite multigraph: rows are feature nodes, columns are cell nodes, and
an entry is the number of parallel edges joining the pair.  Entries are
stored as 64-bit integers (dataset-level totals can exceed 2**32) and zeros
are implicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class MatrixFormatError(ValueError):
    """Malformed matrix file; message carries the offending line number."""


def _check_unique(ids, kind: str):
    if len(set(ids)) != len(ids):
        raise ValueError(f"{kind} ids are not unique")


class CountMatrix:
    """Immutable sparse matrix of strictly positive integer counts.

    Both compressed orientations are exposed (`csr`, `csc`) because row
    operations (feature filters) and column operations (cell filters,
    per-cell scaling) are both hot paths.  Instances must not be mutated
    after construction; all pipeline operations return new objects.
    """

    def __init__(self, matrix: sp.spmatrix, feature_ids, cell_ids, validate: bool = True):
        csr = sp.csr_matrix(matrix, dtype=np.int64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        n_features, n_cells = csr.shape
        feature_ids = tuple(str(i) for i in feature_ids)
        cell_ids = tuple(str(i) for i in cell_ids)
        if validate:
            if len(feature_ids) != n_features:
                raise ValueError(
                    f"{len(feature_ids)} feature ids for {n_features} rows"
                )
            if len(cell_ids) != n_cells:
                raise ValueError(f"{len(cell_ids)} cell ids for {n_cells} columns")
            _check_unique(feature_ids, "feature")
            _check_unique(cell_ids, "cell")
            if csr.nnz and csr.data.min() <= 0:
                raise ValueError("counts must be strictly positive integers")
        self._csr = csr
        self._csc = None
        self.feature_ids = feature_ids
        self.cell_ids = cell_ids

    @property
    def n_features(self) -> int:
        return self._csr.shape[0]

    @property
    def n_cells(self) -> int:
        return self._csr.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    def csr(self) -> sp.csr_matrix:
        return self._csr

    def csc(self) -> sp.csc_matrix:
        if self._csc is None:
            self._csc = self._csr.tocsc()
        return self._csc

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def entry_set(self) -> set[tuple[int, int, int]]:
        coo = self._csr.tocoo()
        return {
            (int(i), int(j), int(v))
            for i, j, v in zip(coo.row, coo.col, coo.data)
        }

    @classmethod
    def from_entries(
        cls,
        n_features: int,
        n_cells: int,
        rows,
        cols,
        counts,
        feature_ids=None,
        cell_ids=None,
    ) -> "CountMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_features:
                raise ValueError("feature index out of range")
            if cols.min() < 0 or cols.max() >= n_cells:
                raise ValueError("cell index out of range")
            keys = rows * np.int64(n_cells) + cols
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate (feature, cell) coordinate")
        matrix = sp.csr_matrix(
            (counts, (rows, cols)), shape=(n_features, n_cells), dtype=np.int64
        )
        if feature_ids is None:
            feature_ids = [f"f{i}" for i in range(n_features)]
        if cell_ids is None:
            cell_ids = [f"c{j}" for j in range(n_cells)]
        return cls(matrix, feature_ids, cell_ids)

    @classmethod
    def from_dense(cls, array, feature_ids=None, cell_ids=None) -> "CountMatrix":
        arr = np.asarray(array)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        rows, cols = np.nonzero(arr)
        return cls.from_entries(
            arr.shape[0], arr.shape[1], rows, cols, arr[rows, cols],
            feature_ids=feature_ids, cell_ids=cell_ids,
        )


@dataclass(frozen=True)
class DegreeVectors:
    """Row/column degree sums of the bipartite adjacency."""

    row_degrees: np.ndarray
    col_degrees: np.ndarray
    total: int


def degrees(counts: CountMatrix) -> DegreeVectors:
    """Exact integer row sums, column sums and grand total."""
    csr = counts.csr()
    row = np.asarray(csr.sum(axis=1)).ravel().astype(np.int64)
    col = np.asarray(csr.sum(axis=0)).ravel().astype(np.int64)
    total = int(csr.data.sum(dtype=np.int64)) if csr.nnz else 0
    return DegreeVectors(row, col, total)


def submatrix(counts: CountMatrix, feature_mask, cell_mask) -> CountMatrix:
    """Restriction to the selected features and cells; entries unchanged."""
    feature_mask = np.asarray(feature_mask, dtype=bool)
    cell_mask = np.asarray(cell_mask, dtype=bool)
    if feature_mask.shape != (counts.n_features,):
        raise ValueError("feature mask has wrong length")
    if cell_mask.shape != (counts.n_cells,):
        raise ValueError("cell mask has wrong length")
    if not feature_mask.any():
        raise ValueError("empty result: no features selected")
    if not cell_mask.any():
        raise ValueError("empty result: no cells selected")
    sliced = counts.csr()[feature_mask][:, cell_mask]
    fids = [fid for fid, keep in zip(counts.feature_ids, feature_mask) if keep]
    cids = [cid for cid, keep in zip(counts.cell_ids, cell_mask) if keep]
    return CountMatrix(sliced, fids, cids)


def _sidecar_paths(path: Path) -> tuple[Path, Path]:
    stem = path.with_suffix("")
    return (
        stem.parent / (stem.name + ".features.txt"),
        stem.parent / (stem.name + ".cells.txt"),
    )


def _read_id_file(path: Path, expected: int, kind: str) -> list[str]:
    ids = [line.rstrip("\n") for line in path.read_text().splitlines()]
    ids = [i for i in ids if i != ""]
    if len(ids) != expected:
        raise MatrixFormatError(
            f"{path}: {len(ids)} {kind} ids for a matrix with {expected} {kind}s"
        )
    return ids


def read_matrix_market(path) -> CountMatrix:
    """Read a MatrixMarket coordinate file of integer counts.

    Real-valued files are accepted only when every entry is integral to
    within 1e-9 (some public datasets serialize integers as reals).
    Companion ``<stem>.features.txt`` / ``<stem>.cells.txt`` id files are
    used when present; synthetic ``f0..`` / ``c0..`` ids otherwise.
    """
    path = Path(path)
    with path.open() as handle:
        header = handle.readline()
        if not header.startswith("%%MatrixMarket"):
            raise MatrixFormatError(f"{path} line 1: missing MatrixMarket header")
        fields = header.strip().split()
        if (
            len(fields) != 5
            or fields[1] != "matrix"
            or fields[2] != "coordinate"
            or fields[3] not in ("integer", "real")
            or fields[4] != "general"
        ):
            raise MatrixFormatError(
                f"{path} line 1: unsupported header {header.strip()!r}; expected "
                "'%%MatrixMarket matrix coordinate <integer|real> general'"
            )
        line_no = 1
        size_line = None
        for line in handle:
            line_no += 1
            if line.startswith("%") or not line.strip():
                continue
            size_line = line
            break
        if size_line is None:
            raise MatrixFormatError(f"{path}: missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise MatrixFormatError(f"{path} line {line_no}: bad size line")
        try:
            n_features, n_cells, nnz = (int(p) for p in parts)
        except ValueError:
            raise MatrixFormatError(f"{path} line {line_no}: bad size line") from None
        if n_features <= 0 or n_cells <= 0:
            raise MatrixFormatError(f"{path} line {line_no}: zero dimensions")

        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.int64)
        entry_lines = np.empty(nnz, dtype=np.int64)
        k = 0
        for line in handle:
            line_no += 1
            if line.startswith("%") or not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise MatrixFormatError(
                    f"{path} line {line_no}: expected 'row col value'"
                )
            if k >= nnz:
                raise MatrixFormatError(
                    f"{path} line {line_no}: more entries than declared ({nnz})"
                )
            try:
                i = int(parts[0])
                j = int(parts[1])
            except ValueError:
                raise MatrixFormatError(
                    f"{path} line {line_no}: non-integer index"
                ) from None
            try:
                raw = float(parts[2])
            except ValueError:
                raise MatrixFormatError(
                    f"{path} line {line_no}: unreadable value {parts[2]!r}"
                ) from None
            value = round(raw)
            if abs(raw - value) > 1e-9:
                raise MatrixFormatError(
                    f"{path} line {line_no}: non-integral value {parts[2]}"
                )
            if value < 0:
                raise MatrixFormatError(
                    f"{path} line {line_no}: negative count {parts[2]}"
                )
            if not (1 <= i <= n_features) or not (1 <= j <= n_cells):
                raise MatrixFormatError(
                    f"{path} line {line_no}: index ({i}, {j}) outside "
                    f"{n_features}x{n_cells}"
                )
            rows[k], cols[k], vals[k] = i - 1, j - 1, value
            entry_lines[k] = line_no
            k += 1
        if k != nnz:
            raise MatrixFormatError(
                f"{path}: declared {nnz} entries but found {k}"
            )

    keys = rows * np.int64(n_cells) + cols
    uniq, first = np.unique(keys, return_index=True)
    if uniq.size != keys.size:
        seen = np.ones(keys.size, dtype=bool)
        seen[first] = False
        dup = int(np.argmax(seen))
        raise MatrixFormatError(
            f"{path} line {entry_lines[dup]}: duplicate coordinate "
            f"({rows[dup] + 1}, {cols[dup] + 1})"
        )

    keep = vals > 0
    feature_path, cell_path = _sidecar_paths(path)
    feature_ids = (
        _read_id_file(feature_path, n_features, "feature")
        if feature_path.exists()
        else [f"f{i}" for i in range(n_features)]
    )
    cell_ids = (
        _read_id_file(cell_path, n_cells, "cell")
        if cell_path.exists()
        else [f"c{j}" for j in range(n_cells)]
    )
    matrix = sp.csr_matrix(
        (vals[keep], (rows[keep], cols[keep])),
        shape=(n_features, n_cells),
        dtype=np.int64,
    )
    return CountMatrix(matrix, feature_ids, cell_ids)


def matrix_market_text(counts: CountMatrix) -> str:
    """MatrixMarket coordinate integer serialization, row-major order."""
    coo = counts.csr().tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [
        "%%MatrixMarket matrix coordinate integer general",
        f"{counts.n_features} {counts.n_cells} {counts.nnz}",
    ]
    for idx in order:
        lines.append(f"{coo.row[idx] + 1} {coo.col[idx] + 1} {coo.data[idx]}")
    return "\n".join(lines) + "\n"


def write_matrix_market(counts: CountMatrix, path, write_ids: bool = True) -> None:
    """Write MatrixMarket coordinate integer format plus id sidecar files."""
    path = Path(path)
    path.write_text(matrix_market_text(counts))
    if write_ids:
        feature_path, cell_path = _sidecar_paths(path)
        feature_path.write_text("\n".join(counts.feature_ids) + "\n")
        cell_path.write_text("\n".join(counts.cell_ids) + "\n")


def read_dense_tsv(path) -> CountMatrix:
    """Read a dense TSV: first row cell ids, first column feature ids.

    A corner label in the header row is tolerated.  Only non-zero body
    entries are stored.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    lines = [line for line in lines if line.strip() != ""]
    if len(lines) < 2:
        raise MatrixFormatError(f"{path}: zero dimensions (header or body missing)")
    header = lines[0].split("\t")
    body = [line.split("\t") for line in lines[1:]]
    width = len(body[0])
    if width < 2:
        raise MatrixFormatError(f"{path}: zero dimensions (no data columns)")
    n_cells = width - 1
    if len(header) == n_cells + 1:
        cell_ids = header[1:]
    elif len(header) == n_cells:
        cell_ids = header
    else:
        raise MatrixFormatError(
            f"{path} line 1: header has {len(header)} fields for {n_cells} data columns"
        )

    feature_ids = []
    rows, cols, vals = [], [], []
    for offset, parts in enumerate(body):
        line_no = offset + 2
        if len(parts) != width:
            raise MatrixFormatError(
                f"{path} line {line_no}: ragged row ({len(parts)} fields, expected {width})"
            )
        feature_ids.append(parts[0])
        for j, token in enumerate(parts[1:]):
            try:
                value = int(token)
            except ValueError:
                raise MatrixFormatError(
                    f"{path} line {line_no}: non-integer token {token!r}"
                ) from None
            if value < 0:
                raise MatrixFormatError(
                    f"{path} line {line_no}: negative count {token}"
                )
            if value:
                rows.append(offset)
                cols.append(j)
                vals.append(value)
    return CountMatrix.from_entries(
        len(feature_ids), n_cells, rows, cols, vals,
        feature_ids=feature_ids, cell_ids=cell_ids,
    )
