"""Grouped regression datasets: CSV ingestion, validation, design matrices.

A dataset is an ordered collection of groups, each holding a response vector
``y_j`` and a design matrix ``X_j`` with a shared column count ``p``.  Group
order is the order of first appearance in the source file and is preserved
everywhere (stacking, summaries, exports).  Groups may have different sizes;
balanced designs are just the special case ``n_j = n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Invalid dataset contents or malformed input file."""


@dataclass(frozen=True)
class Group:
    group_id: str
    y: np.ndarray  # (n_j,)
    X: np.ndarray  # (n_j, p)


@dataclass(frozen=True)
class StackedView:
    """Group-major stacking of a dataset: y (N,), X (N, p).

    ``offsets[j]`` is the first row of group j; rows ``offsets[j]:offsets[j+1]``
    belong to group j, and ``offsets[m] == N``.
    """

    y: np.ndarray
    X: np.ndarray
    offsets: np.ndarray  # (m + 1,) int
    group_ids: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def group_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def row_groups(self) -> np.ndarray:
        """Group index (0-based) of every stacked row."""
        return np.repeat(np.arange(len(self.group_ids)), self.group_sizes())


@dataclass(frozen=True)
class GroupedDataset:
    """Validated grouped data; immutable and safely shareable across chains."""

    groups: tuple[Group, ...]
    covariate_names: tuple[str, ...] = ()
    _validated: bool = field(default=True, repr=False)

    def __post_init__(self):
        if len(self.groups) == 0:
            raise DataError("dataset needs at least one group")
        ps = {g.X.shape[1] for g in self.groups}
        if len(ps) != 1:
            raise DataError(f"groups disagree on covariate count: {sorted(ps)}")
        seen = set()
        for g in self.groups:
            if g.group_id in seen:
                raise DataError(f"duplicate group id {g.group_id!r}")
            seen.add(g.group_id)
            if g.y.shape[0] != g.X.shape[0]:
                raise DataError(f"group {g.group_id!r}: y and X row counts differ")
            if not (np.all(np.isfinite(g.y)) and np.all(np.isfinite(g.X))):
                raise DataError(f"group {g.group_id!r} contains non-finite entries")
        if not self._validated:
            return  # prior-only mode: empty groups allowed, no rank requirement
        for g in self.groups:
            if g.y.shape[0] == 0:
                raise DataError(f"empty group {g.group_id!r}")
        stacked_x = np.vstack([g.X for g in self.groups])
        if stacked_x.shape[0] <= stacked_x.shape[1]:
            raise DataError(
                f"need more rows than covariates, got N={stacked_x.shape[0]}, p={stacked_x.shape[1]}"
            )
        if np.linalg.matrix_rank(stacked_x) < stacked_x.shape[1]:
            raise DataError("stacked design matrix is rank-deficient")

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return self.groups[0].X.shape[1]

    @property
    def n_total(self) -> int:
        return sum(g.y.shape[0] for g in self.groups)

    @property
    def group_ids(self) -> tuple[str, ...]:
        return tuple(g.group_id for g in self.groups)

    def group_sizes(self) -> np.ndarray:
        return np.array([g.y.shape[0] for g in self.groups])


def prior_only_dataset(m: int, p: int) -> GroupedDataset:
    """All-empty dataset used solely by prior-reproduction tests (N = 0)."""
    groups = tuple(
        Group(f"g{j + 1}", np.empty(0), np.empty((0, p))) for j in range(m)
    )
    return GroupedDataset(groups, tuple(f"x{c}" for c in range(p)), _validated=False)


def stack(ds: GroupedDataset) -> StackedView:
    """Group-major stacked view; row order matches group order exactly."""
    sizes = ds.group_sizes()
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    y = (
        np.concatenate([g.y for g in ds.groups])
        if ds.n_total
        else np.empty(0)
    )
    X = np.vstack([g.X for g in ds.groups]) if ds.n_total else np.empty((0, ds.p))
    return StackedView(y=y, X=X, offsets=offsets, group_ids=ds.group_ids)


def unstack(view: StackedView) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Recover the per-group (id, y_j, X_j) triples from a stacked view."""
    out = []
    for j, gid in enumerate(view.group_ids):
        lo, hi = view.offsets[j], view.offsets[j + 1]
        out.append((gid, view.y[lo:hi], view.X[lo:hi]))
    return out


def load_csv(
    path,
    response_col: str,
    covariate_cols,
    group_col: str,
    add_intercept: bool = True,
) -> GroupedDataset:
    """Read a grouped dataset from a headed CSV file.

    Groups are emitted in order of first appearance.  With ``add_intercept``
    (the default), a leading column of ones is prepended to the covariates.
    """
    import csv

    covariate_cols = list(covariate_cols)
    rows_by_group: dict[str, list[tuple[float, list[float]]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in [response_col, group_col, *covariate_cols]:
            if col not in header:
                raise DataError(f"missing column {col!r} (file has {header})")
        for lineno, row in enumerate(reader, start=2):
            try:
                y_val = float(row[response_col])
                x_vals = [float(row[c]) for c in covariate_cols]
            except (TypeError, ValueError) as exc:
                raise DataError(f"unparsable number at line {lineno}: {exc}") from exc
            rows_by_group.setdefault(row[group_col], []).append((y_val, x_vals))

    groups = []
    for gid, rows in rows_by_group.items():
        if not rows:
            raise DataError(f"empty group {gid!r}")
        y = np.array([r[0] for r in rows])
        X = np.array([r[1] for r in rows]).reshape(len(rows), len(covariate_cols))
        if add_intercept:
            X = np.hstack([np.ones((X.shape[0], 1)), X])
        groups.append(Group(gid, y, X))
    names = ["intercept", *covariate_cols] if add_intercept else covariate_cols
    return GroupedDataset(tuple(groups), tuple(names))


def write_csv(ds: GroupedDataset, path, response_col="y", group_col="group"):
    """Write a dataset back to CSV with round-trip-safe float formatting.

    The intercept column (all ones, named "intercept") is dropped on output so
    that ``load_csv(write_csv(ds))`` with ``add_intercept=True`` is the
    identity.  Floats are written with ``repr``, which Python guarantees to
    round-trip exactly.
    """
    import csv

    names = list(ds.covariate_names)
    has_intercept = bool(names) and names[0] == "intercept"
    out_cols = names[1:] if has_intercept else names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([group_col, *out_cols, response_col])
        for g in ds.groups:
            X = g.X[:, 1:] if has_intercept else g.X
            for i in range(g.y.shape[0]):
                writer.writerow([g.group_id, *[repr(float(v)) for v in X[i]], repr(float(g.y[i]))])
