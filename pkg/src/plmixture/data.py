"""Containers and summaries for partially ranked (top-``m``) preference data.

Items are indexed ``1..K``.  Each observation unit reports an ordering of its
``n_s`` most preferred items, most preferred first, with ``1 <= n_s <= K - 1``.
A length of ``K - 1`` is a full ordering: once all but one item are placed,
the last position is forced.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DatasetError",
    "PartialOrdering",
    "RankingDataset",
    "LengthStratum",
    "SummaryStats",
    "parse_dataset",
    "as_ranking_dataset",
    "serialize_dataset",
    "top1_frequencies",
    "paired_comparison_matrix",
    "conditional_summaries",
    "average_ranks",
    "summaries_to_json",
]


class DatasetError(ValueError):
    """Raised for malformed ranking data or ranking data files."""


@dataclass(frozen=True)
class PartialOrdering:
    """A top-``n`` ordering: distinct 1-based item indices, best first.

    Parameters
    ----------
    items : tuple of int
        Ranked items in order of preference.  Must be non-empty and free of
        duplicates; upper-range validation against the item count happens in
        `RankingDataset`.
    """

    items: tuple[int, ...]

    def __post_init__(self):
        items = tuple(int(i) for i in self.items)
        object.__setattr__(self, "items", items)
        if not items:
            raise DatasetError("an ordering must rank at least one item")
        if min(items) < 1:
            raise DatasetError(f"item indices are 1-based, got {items}")
        if len(set(items)) != len(items):
            raise DatasetError(f"duplicate item in ordering {items}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]


def _coerce_ordering(obj) -> PartialOrdering:
    if isinstance(obj, PartialOrdering):
        return obj
    return PartialOrdering(tuple(obj))


class RankingDataset:
    """Immutable collection of partial orderings over a common item set.

    Parameters
    ----------
    n_items : int
        Number of items ``K`` (at least 2).
    orderings : iterable
        One `PartialOrdering` (or plain sequence of 1-based indices) per
        observation unit.  Full orderings are stored truncated at ``K - 1``
        positions; sequences listing all ``K`` items are accepted and
        truncated on ingestion.
    item_labels : sequence of str, optional
        Display names for the items, length ``n_items``.

    Attributes
    ----------
    n_items : int
    orderings : tuple of PartialOrdering
    item_labels : tuple of str or None
    """

    def __init__(
        self,
        n_items: int,
        orderings: Iterable,
        item_labels: Sequence[str] | None = None,
    ):
        n_items = int(n_items)
        if n_items < 2:
            raise DatasetError(f"need at least 2 items, got n_items={n_items}")
        coerced = []
        for s, obj in enumerate(orderings):
            try:
                o = _coerce_ordering(obj)
            except DatasetError as exc:
                raise DatasetError(f"unit {s + 1}: {exc}") from None
            if len(o) == n_items:
                # the full listing carries no extra information: drop the
                # forced last position
                o = PartialOrdering(o.items[:-1])
            if len(o) > n_items - 1:
                raise DatasetError(
                    f"unit {s + 1}: ordering of length {len(o)} exceeds "
                    f"n_items={n_items}"
                )
            if max(o.items) > n_items:
                raise DatasetError(
                    f"unit {s + 1}: item {max(o.items)} out of range for "
                    f"n_items={n_items}"
                )
            coerced.append(o)
        if not coerced:
            raise DatasetError("dataset contains no orderings")
        self.n_items = n_items
        self.orderings = tuple(coerced)
        if item_labels is not None:
            item_labels = tuple(str(x) for x in item_labels)
            if len(item_labels) != n_items:
                raise DatasetError(
                    f"got {len(item_labels)} item labels for {n_items} items"
                )
        self.item_labels = item_labels

    @property
    def n_units(self) -> int:
        return len(self.orderings)

    def __len__(self) -> int:
        return len(self.orderings)

    def __iter__(self):
        return iter(self.orderings)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RankingDataset):
            return NotImplemented
        return (
            self.n_items == other.n_items
            and self.orderings == other.orderings
            and self.item_labels == other.item_labels
        )

    def __repr__(self) -> str:
        return (
            f"RankingDataset(n_items={self.n_items}, "
            f"n_units={self.n_units})"
        )

    # Cached dense views used by the likelihood and sampling engines.

    @cached_property
    def lengths(self) -> np.ndarray:
        """Number of ranked positions per unit, shape ``(n_units,)``."""
        out = np.array([len(o) for o in self.orderings], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def max_length(self) -> int:
        return int(self.lengths.max())

    @cached_property
    def ranked_matrix(self) -> np.ndarray:
        """0-based ranked items padded with 0, shape ``(n_units, max_length)``.

        Entry ``[s, t]`` is the item chosen at stage ``t`` by unit ``s``
        (0-based); positions at or beyond ``lengths[s]`` are padding and only
        meaningful under `rank_mask`.
        """
        out = np.zeros((self.n_units, self.max_length), dtype=np.int64)
        for s, o in enumerate(self.orderings):
            out[s, : len(o)] = np.asarray(o.items) - 1
        out.setflags(write=False)
        return out

    @cached_property
    def rank_mask(self) -> np.ndarray:
        """Boolean mask of real (non-padding) stages, same shape as
        `ranked_matrix`."""
        out = np.arange(self.max_length)[None, :] < self.lengths[:, None]
        out.setflags(write=False)
        return out

    @cached_property
    def ranked_flags(self) -> np.ndarray:
        """Indicator of item being ranked by unit, shape ``(n_units, n_items)``
        float."""
        out = np.zeros((self.n_units, self.n_items))
        rows = np.repeat(np.arange(self.n_units), self.lengths)
        out[rows, self.ranked_matrix[self.rank_mask]] = 1.0
        out.setflags(write=False)
        return out

    @cached_property
    def rank_positions(self) -> np.ndarray:
        """1-based rank given to each item, shape ``(n_units, n_items)``.

        Unranked items share the sentinel ``n_items + 1`` (strictly below any
        assigned rank, equal among themselves).
        """
        out = np.full((self.n_units, self.n_items), self.n_items + 1, dtype=np.int64)
        rows = np.repeat(np.arange(self.n_units), self.lengths)
        cols = self.ranked_matrix[self.rank_mask]
        stages = (self.rank_mask.cumsum(axis=1))[self.rank_mask]
        out[rows, cols] = stages
        out.setflags(write=False)
        return out

    @cached_property
    def summary(self) -> "SummaryStats":
        """Observed first-place counts, pairwise wins, and length strata."""
        by_length = {}
        for m in sorted(set(self.lengths.tolist())):
            sel = self.lengths == m
            by_length[int(m)] = LengthStratum(
                length=int(m),
                n_units=int(sel.sum()),
                top1=_top1_counts(self, sel),
                pairs=_pair_counts(self, sel),
            )
        return SummaryStats(
            top1=_top1_counts(self),
            pairs=_pair_counts(self),
            by_length=by_length,
        )


def _top1_counts(ds: RankingDataset, sel=None) -> np.ndarray:
    first = ds.ranked_matrix[:, 0]
    if sel is not None:
        first = first[sel]
    out = np.bincount(first, minlength=ds.n_items).astype(float)
    out.setflags(write=False)
    return out


def _pair_counts(ds: RankingDataset, sel=None) -> np.ndarray:
    pos = ds.rank_positions
    if sel is not None:
        pos = pos[sel]
    # item i beats item j when i is ranked ahead of j or i is ranked and j
    # is not; both cases are position[i] < position[j] under the sentinel
    wins = pos[:, :, None] < pos[:, None, :]
    out = wins.sum(axis=0).astype(float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LengthStratum:
    """Summary counts restricted to units ranking exactly ``length`` items."""

    length: int
    n_units: int
    top1: np.ndarray
    pairs: np.ndarray

    @property
    def pair_totals(self) -> np.ndarray:
        """Comparisons resolved either way within the stratum."""
        return self.pairs + self.pairs.T


@dataclass(frozen=True)
class SummaryStats:
    """Observed summary statistics of a ranking dataset.

    Attributes
    ----------
    top1 : ndarray, shape (n_items,)
        Times each item was ranked first.
    pairs : ndarray, shape (n_items, n_items)
        ``pairs[i, j]`` counts units preferring item ``i + 1`` to ``j + 1``
        (either by ranking it ahead, or by ranking it while ``j + 1`` is
        unranked).
    by_length : dict of int to LengthStratum
        The same counts within each observed ordering length.
    """

    top1: np.ndarray
    pairs: np.ndarray
    by_length: dict[int, LengthStratum]

    @property
    def pair_totals(self) -> np.ndarray:
        """Comparisons resolved either way: ``pairs + pairs.T``."""
        return self.pairs + self.pairs.T


def top1_frequencies(ds: RankingDataset) -> np.ndarray:
    """Count how often each item is ranked first.

    Returns
    -------
    ndarray of float, shape ``(n_items,)``, summing to ``n_units``.
    """
    return ds.summary.top1


def paired_comparison_matrix(ds: RankingDataset) -> np.ndarray:
    """Count pairwise wins between items.

    Entry ``[i, j]`` is the number of units expressing a preference for item
    ``i + 1`` over item ``j + 1``.  A unit contributes to the pair only when
    at least one of the two items is ranked; two unranked items are left
    uncompared.

    Returns
    -------
    ndarray of float, shape ``(n_items, n_items)`` with zero diagonal.
    """
    return ds.summary.pairs


def conditional_summaries(ds: RankingDataset) -> dict[int, LengthStratum]:
    """Summary counts stratified by number of ranked positions."""
    return ds.summary.by_length


def average_ranks(ds: RankingDataset) -> np.ndarray:
    """Mean rank of each item with midrank imputation for unranked items.

    A unit ranking ``n_s`` items leaves ``K - n_s`` items tied across ranks
    ``n_s + 1 .. K``; each receives the midrank ``(n_s + 1 + K) / 2``.

    Returns
    -------
    ndarray of float, shape ``(n_items,)``.
    """
    pos = ds.rank_positions.astype(float)
    mid = (ds.lengths + 1 + ds.n_items) / 2.0
    ranks = np.where(ds.ranked_flags > 0, pos, mid[:, None])
    return ranks.mean(axis=0)


def parse_dataset(
    text: str,
    n_items: int | None = None,
    item_labels: Sequence[str] | None = None,
) -> RankingDataset:
    """Parse ranking data from CSV text.

    One unit per line: comma-separated 1-based item indices, most preferred
    first.  Blank lines are skipped.  Lines starting with ``#`` are comments,
    except that a comment of the form ``# K=<int>`` declares the item count.

    Parameters
    ----------
    text : str
        File contents.
    n_items : int, optional
        Item count.  Required unless the text declares ``# K=<int>``; if
        both are present they must agree.
    item_labels : sequence of str, optional
        Passed through to the dataset.

    Returns
    -------
    RankingDataset

    Raises
    ------
    DatasetError
        On unparseable rows, duplicate or out-of-range items, missing item
        count, or a header conflicting with `n_items`.
    """
    header_k = None
    rows: list[tuple[int, tuple[int, ...]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.upper().startswith("K") and "=" in body:
                key, _, value = body.partition("=")
                if key.strip().upper() == "K":
                    try:
                        k = int(value.strip())
                    except ValueError:
                        raise DatasetError(
                            f"line {lineno}: bad item count header {line!r}"
                        ) from None
                    if header_k is not None and header_k != k:
                        raise DatasetError(
                            f"line {lineno}: conflicting item count headers "
                            f"({header_k} then {k})"
                        )
                    header_k = k
            continue
        items = []
        for tok in line.split(","):
            tok = tok.strip()
            if not tok:
                raise DatasetError(f"line {lineno}: empty field in {raw!r}")
            try:
                items.append(int(tok))
            except ValueError:
                raise DatasetError(
                    f"line {lineno}: non-integer entry {tok!r}"
                ) from None
        rows.append((lineno, tuple(items)))

    if n_items is None:
        k = header_k
    elif header_k is not None and header_k != int(n_items):
        raise DatasetError(
            f"item count {n_items} conflicts with header K={header_k}"
        )
    else:
        k = int(n_items)
    if k is None:
        raise DatasetError(
            "item count not given: pass n_items or add a '# K=<int>' header"
        )
    if not rows:
        raise DatasetError("no orderings found")

    orderings = []
    for lineno, items in rows:
        try:
            orderings.append(PartialOrdering(items))
        except DatasetError as exc:
            raise DatasetError(f"line {lineno}: {exc}") from None
    try:
        return RankingDataset(k, orderings, item_labels=item_labels)
    except DatasetError as exc:
        # recover the offending line number for range/length errors
        msg = str(exc)
        if msg.startswith("unit "):
            unit = int(msg.split(":", 1)[0][5:])
            lineno = rows[unit - 1][0]
            raise DatasetError(f"line {lineno}: {msg.split(': ', 1)[1]}") from None
        raise


def as_ranking_dataset(X, n_items: int | None = None) -> RankingDataset:
    """Coerce estimator input to a `RankingDataset`.

    Parameters
    ----------
    X : RankingDataset, or iterable of int sequences
        Sequences hold 1-based items, most preferred first; entries below 1
        are treated as padding and dropped, so rectangular zero-padded
        arrays are accepted.
    n_items : int, optional
        Item count.  Defaults to the dataset's own count, or the largest
        item seen for plain sequences.

    Returns
    -------
    RankingDataset
    """
    if isinstance(X, RankingDataset):
        if n_items is not None and n_items != X.n_items:
            raise DatasetError(
                f"dataset has {X.n_items} items but n_items={n_items} given"
            )
        return X
    rows = []
    for row in X:
        if isinstance(row, PartialOrdering):
            rows.append(row.items)
        else:
            items = [int(v) for v in np.asarray(row).reshape(-1)]
            rows.append(tuple(v for v in items if v >= 1))
    if n_items is None:
        if not rows or not any(rows):
            raise DatasetError("cannot infer the item count from empty input")
        n_items = max(max(r) for r in rows if r)
        n_items = max(n_items, 2)
    return RankingDataset(n_items, rows)


def serialize_dataset(ds: RankingDataset) -> str:
    """Render a dataset in the CSV format accepted by `parse_dataset`."""
    lines = [f"# K={ds.n_items}"]
    for o in ds.orderings:
        lines.append(",".join(str(i) for i in o.items))
    return "\n".join(lines) + "\n"


def summaries_to_json(ds: RankingDataset, indent: int | None = 2) -> str:
    """Serialize observed summaries as a JSON document.

    The object has keys ``top1`` (array), ``pairs`` (nested array), and
    ``by_length`` (object keyed by ordering length with per-stratum counts).
    """
    s = ds.summary
    doc = {
        "n_items": ds.n_items,
        "n_units": ds.n_units,
        "top1": s.top1.tolist(),
        "pairs": s.pairs.tolist(),
        "by_length": {
            str(m): {
                "n_units": st.n_units,
                "top1": st.top1.tolist(),
                "pairs": st.pairs.tolist(),
            }
            for m, st in s.by_length.items()
        },
    }
    return json.dumps(doc, indent=indent)
