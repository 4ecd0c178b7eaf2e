"""Compressed sparse row storage for binary design matrices.

The design matrix of a bag-of-words regression is binary and very sparse,
so only the pattern is stored: `row_offsets`/`col_indices` in CSR layout.
A logical entry is `scales[j]` for a stored `(i, j)` and 0 elsewhere; with
the default all-ones scales every stored value is exactly 1.  Per-column
scale factors let augmented block designs carry scaled copies of the same
pattern without materializing new data.

Matrices are immutable after construction and safe to share across
threads.  The solver-facing kernels (`transpose_dot`, `dot`, column
adjacency) are the only arithmetic provided.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import StructuralError


class SparseBinaryDesign:
    """CSR pattern matrix with optional per-column scale factors.

    Parameters
    ----------
    n_rows, n_cols : int
        Matrix shape.
    row_offsets : array of int, length n_rows + 1
        Non-decreasing offsets into `col_indices`; `row_offsets[0] == 0`.
    col_indices : array of int
        Column ids, strictly increasing within each row.
    scales : array of float, length n_cols, optional
        Per-column entry values.  None means all ones.
    """

    __slots__ = ("n_rows", "n_cols", "row_offsets", "col_indices", "scales",
                 "_csc_cache")

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, scales=None):
        row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        col_indices = np.ascontiguousarray(col_indices, dtype=np.int64)
        if row_offsets.shape != (n_rows + 1,):
            raise StructuralError(
                f"row_offsets must have length n_rows+1={n_rows + 1}, "
                f"got {row_offsets.shape[0]}")
        if row_offsets[0] != 0 or row_offsets[-1] != col_indices.shape[0]:
            raise StructuralError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(row_offsets) < 0):
            raise StructuralError("row_offsets must be non-decreasing")
        if col_indices.size:
            if col_indices.min() < 0 or col_indices.max() >= n_cols:
                raise StructuralError("column id out of range")
            # strictly increasing within each row <=> no duplicates and sorted
            interior = np.ones(col_indices.size, dtype=bool)
            starts = row_offsets[:-1]
            interior[starts[starts < col_indices.size]] = False
            if np.any(np.diff(col_indices)[interior[1:]] <= 0):
                raise StructuralError(
                    "col_indices must be strictly increasing within each row")
        if scales is not None:
            scales = np.ascontiguousarray(scales, dtype=np.float64)
            if scales.shape != (n_cols,):
                raise StructuralError(
                    f"scales must have length n_cols={n_cols}")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = row_offsets
        self.col_indices = col_indices
        self.scales = scales
        self._csc_cache = None

    # -- construction --------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int]], n_cols: int,
                  scales=None) -> "SparseBinaryDesign":
        """Build from an iterable of per-row column-id collections.

        Each row's ids are sorted and de-duplicated here, so unordered sets
        are fine.  Ids must lie in [0, n_cols).
        """
        offsets = [0]
        cols: list[np.ndarray] = []
        for row in rows:
            ids = np.unique(np.fromiter(row, dtype=np.int64, count=-1)
                            if not isinstance(row, np.ndarray)
                            else row.astype(np.int64))
            if ids.size and (ids[0] < 0 or ids[-1] >= n_cols):
                raise StructuralError(
                    f"column id out of range [0, {n_cols}) in row {len(offsets) - 1}")
            cols.append(ids)
            offsets.append(offsets[-1] + ids.size)
        col_indices = (np.concatenate(cols) if cols
                       else np.empty(0, dtype=np.int64))
        return cls(len(offsets) - 1, n_cols,
                   np.asarray(offsets, dtype=np.int64), col_indices, scales)

    def row(self, i: int) -> np.ndarray:
        """Column ids stored in row i."""
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    @property
    def nnz(self) -> int:
        return int(self.col_indices.shape[0])

    def with_scales(self, scales) -> "SparseBinaryDesign":
        """Same pattern, different per-column scale factors (no data copy)."""
        return SparseBinaryDesign(self.n_rows, self.n_cols,
                                  self.row_offsets, self.col_indices, scales)

    # -- kernels ---------------------------------------------------------

    def transpose_dot(self, v) -> np.ndarray:
        """X^T v: out[j] = scales[j] * sum of v over rows storing column j."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_rows,):
            raise StructuralError(
                f"vector length {v.shape} does not match n_rows={self.n_rows}")
        expanded = np.repeat(v, np.diff(self.row_offsets))
        out = np.bincount(self.col_indices, weights=expanded,
                          minlength=self.n_cols)
        if self.scales is not None:
            out *= self.scales
        return out

    def dot(self, beta) -> np.ndarray:
        """X beta: out[i] = sum over stored j in row i of scales[j]*beta[j]."""
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (self.n_cols,):
            raise StructuralError(
                f"vector length {beta.shape} does not match n_cols={self.n_cols}")
        vals = beta[self.col_indices]
        if self.scales is not None:
            vals = vals * self.scales[self.col_indices]
        out = np.zeros(self.n_rows)
        np.add.at(out, np.repeat(np.arange(self.n_rows),
                                 np.diff(self.row_offsets)), vals)
        return out

    def column_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """Column-major pattern view: (col_offsets, row_indices).

        `row_indices[col_offsets[j]:col_offsets[j+1]]` are the rows storing
        column j.  Built once and cached; the matrix is immutable so the
        benign rebuild race under concurrency is harmless.
        """
        if self._csc_cache is None:
            order = np.argsort(self.col_indices, kind="stable")
            rows = np.repeat(np.arange(self.n_rows, dtype=np.int64),
                             np.diff(self.row_offsets))[order]
            counts = np.bincount(self.col_indices, minlength=self.n_cols)
            col_offsets = np.zeros(self.n_cols + 1, dtype=np.int64)
            np.cumsum(counts, out=col_offsets[1:])
            self._csc_cache = (col_offsets, rows)
        return self._csc_cache

    def column_counts(self) -> np.ndarray:
        """Number of stored entries per column."""
        return np.bincount(self.col_indices, minlength=self.n_cols)

    def column_sq_norms(self) -> np.ndarray:
        """Per-column sum of squared entries: count[j] * scales[j]^2."""
        norms = self.column_counts().astype(np.float64)
        if self.scales is not None:
            norms *= self.scales ** 2
        return norms

    # -- slicing ---------------------------------------------------------

    def column_slice(self, keep: Sequence[int]) -> tuple["SparseBinaryDesign", dict[int, int]]:
        """Restrict to `keep` columns, renumbered in keep-order.

        Returns the sliced matrix and the old-id -> new-id mapping.
        """
        keep = np.asarray(list(keep), dtype=np.int64)
        if keep.size and (keep.min() < 0 or keep.max() >= self.n_cols):
            raise StructuralError("keep contains a column id out of range")
        if np.unique(keep).size != keep.size:
            raise StructuralError("keep contains duplicate column ids")
        remap = np.full(self.n_cols, -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        new_cols = remap[self.col_indices]
        mask = new_cols >= 0
        row_ids = np.repeat(np.arange(self.n_rows, dtype=np.int64),
                            np.diff(self.row_offsets))[mask]
        kept_cols = new_cols[mask]
        new_offsets = np.zeros(self.n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(row_ids, minlength=self.n_rows),
                  out=new_offsets[1:])
        # keep-order renumbering may reorder ids within a row; restore the
        # strictly-increasing invariant row by row
        order = np.lexsort((kept_cols, row_ids))
        kept_cols = kept_cols[order]
        scales = None if self.scales is None else self.scales[keep]
        sliced = SparseBinaryDesign(self.n_rows, keep.size, new_offsets,
                                    kept_cols, scales)
        mapping = {int(old): int(new) for new, old in enumerate(keep)}
        return sliced, mapping

    def row_select(self, rows) -> "SparseBinaryDesign":
        """New matrix made of the given rows, in order, repeats allowed."""
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= self.n_rows):
            raise StructuralError("row id out of range")
        lengths = np.diff(self.row_offsets)[rows]
        new_offsets = np.zeros(rows.size + 1, dtype=np.int64)
        np.cumsum(lengths, out=new_offsets[1:])
        new_cols = np.empty(int(new_offsets[-1]), dtype=np.int64)
        for out_i, src in enumerate(rows):
            start, end = self.row_offsets[src], self.row_offsets[src + 1]
            new_cols[new_offsets[out_i]:new_offsets[out_i + 1]] = \
                self.col_indices[start:end]
        return SparseBinaryDesign(rows.size, self.n_cols, new_offsets,
                                  new_cols, self.scales)

    def to_dense(self) -> np.ndarray:
        """Dense float array; intended for tests and tiny instances."""
        out = np.zeros((self.n_rows, self.n_cols))
        for i in range(self.n_rows):
            cols = self.row(i)
            out[i, cols] = 1.0 if self.scales is None else self.scales[cols]
        return out

    # -- plain-text serialization -----------------------------------------

    def to_text(self) -> str:
        """Plain-text sparse format: `n_rows n_cols` then one id line per row."""
        lines = [f"{self.n_rows} {self.n_cols}"]
        for i in range(self.n_rows):
            lines.append(" ".join(str(c) for c in self.row(i)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SparseBinaryDesign":
        lines = text.split("\n")
        header = lines[0].split()
        if len(header) != 2:
            raise StructuralError("first line must be 'n_rows n_cols'")
        n_rows, n_cols = int(header[0]), int(header[1])
        if len(lines) < n_rows + 1:
            raise StructuralError(
                f"expected {n_rows} row lines, found {len(lines) - 1}")
        rows = []
        for i in range(1, n_rows + 1):
            parts = lines[i].split()
            rows.append(np.asarray([int(p) for p in parts], dtype=np.int64))
        return cls.from_rows(rows, n_cols)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "SparseBinaryDesign":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def __repr__(self):
        scaled = "" if self.scales is None else ", scaled"
        return (f"SparseBinaryDesign({self.n_rows}x{self.n_cols}, "
                f"nnz={self.nnz}{scaled})")
