"""Module containing storage for observed 1-bit entries.

Observations are kept in compressed column order: three parallel arrays
with row index, column index and label of each observed entry, sorted by
column and then by row. Indices are 0-based in memory, the CSV interface
uses 1-based indices.
"""

__all__ = ['ObservationSet', 'SplitPair', 'ObservationError',
           'TripletFormatError', 'from_triplets', 'split', 'split_indices',
           'read_triplets', 'write_triplets']

import csv
import logging
import math
from typing import Iterable, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse

_log = logging.getLogger(__name__)


class ObservationError(ValueError):
    """Class for exceptions raised for inconsistent observation data.
    """
    pass


class TripletFormatError(ObservationError):
    """Class for exceptions raised for malformed triplet files.
    """
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class ObservationSet:
    """Immutable set of observed entries with +1/-1 labels.

    Client code usually creates instances with `from_triplets` or
    `ObservationSet.from_arrays`, both validate and sort the data.

    Parameters
    ----------
    m : `int`
        Number of rows.
    n : `int`
        Number of columns.
    rows : `numpy.ndarray`
        Row indices, already sorted in column-major order and unique.
    cols : `numpy.ndarray`
        Column indices.
    labels : `numpy.ndarray`
        Labels, +1 or -1.

    Attributes
    ----------
    m : `int`
    n : `int`
    rows : `numpy.ndarray` [ `int` ]
    cols : `numpy.ndarray` [ `int` ]
    labels : `numpy.ndarray` [ `int` ]
    """

    def __init__(self, m: int, n: int, rows: np.ndarray, cols: np.ndarray,
                 labels: np.ndarray):
        self.m = int(m)
        self.n = int(n)
        self.rows = _frozen(np.ascontiguousarray(rows, dtype=np.int64))
        self.cols = _frozen(np.ascontiguousarray(cols, dtype=np.int64))
        self.labels = _frozen(np.ascontiguousarray(labels, dtype=np.int8))
        self._col_ptr: Optional[np.ndarray] = None

    @classmethod
    def from_arrays(cls, m: int, n: int, rows, cols, labels) -> 'ObservationSet':
        """Make observation set from parallel arrays.

        Parameters
        ----------
        m, n : `int`
            Matrix dimensions, positive.
        rows, cols : array-like
            0-based indices of observed entries.
        labels : array-like
            Labels of observed entries, +1 or -1.

        Returns
        -------
        obs : `ObservationSet`
            Deduplicated and column-sorted set.

        Raises
        ------
        ObservationError
            Raised for indices out of range, labels other than +1/-1, or
            for the same entry observed with different labels.
        """
        if m <= 0 or n <= 0:
            raise ObservationError("Matrix dimensions must be positive: "
                                   "{0}x{1}".format(m, n))
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        labels = np.asarray(labels).ravel()
        if not (rows.shape == cols.shape == labels.shape):
            raise ObservationError("Index and label arrays differ in length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= m:
                raise ObservationError("Row index out of range [0, {0})".format(m))
            if cols.min() < 0 or cols.max() >= n:
                raise ObservationError("Column index out of range [0, {0})".format(n))
        if not np.all((labels == 1) | (labels == -1)):
            raise ObservationError("Labels must be +1 or -1")
        labels = labels.astype(np.int8)

        order = np.lexsort((rows, cols))
        rows, cols, labels = rows[order], cols[order], labels[order]
        if rows.size > 1:
            same = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if same.any():
                if np.any(labels[1:][same] != labels[:-1][same]):
                    k = int(np.flatnonzero(same & (labels[1:] != labels[:-1]))[0])
                    raise ObservationError(
                        "Conflicting labels for entry ({0}, {1})".format(rows[k], cols[k]))
                _log.debug("dropping %d duplicate observations", int(same.sum()))
                keep = np.concatenate(([True], ~same))
                rows, cols, labels = rows[keep], cols[keep], labels[keep]
        return cls(m, n, rows, cols, labels)

    @property
    def size(self) -> int:
        """Number of observed entries, |Omega| (`int`)."""
        return int(self.rows.size)

    @property
    def shape(self) -> Tuple[int, int]:
        """Matrix dimensions (`tuple`)."""
        return (self.m, self.n)

    @property
    def density(self) -> float:
        """Fraction of observed entries, |Omega|/(mn) (`float`)."""
        return self.size / (self.m * self.n)

    @property
    def col_ptr(self) -> np.ndarray:
        """Compressed column pointers, entries of column ``j`` are stored at
        positions ``col_ptr[j]:col_ptr[j+1]`` (`numpy.ndarray`).
        """
        if self._col_ptr is None:
            counts = np.bincount(self.cols, minlength=self.n)
            ptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(counts, out=ptr[1:])
            self._col_ptr = _frozen(ptr)
        return self._col_ptr

    def storage_cost(self) -> int:
        """Number of stored numbers, two indices and a label per entry."""
        return 3 * self.size

    def to_triplets(self) -> List[Tuple[int, int, int]]:
        """Return list of (i, j, y) tuples in column-major order."""
        return list(self)

    def to_csc(self) -> sparse.csc_matrix:
        """Return labels as scipy compressed column matrix."""
        return sparse.csc_matrix((self.labels.astype(np.float64), self.rows, self.col_ptr),
                                 shape=self.shape)

    def subset(self, index: np.ndarray) -> 'ObservationSet':
        """Make new set from selected positions of this set.

        Parameters
        ----------
        index : `numpy.ndarray`
            Positions of the stored entries, sorted.
        """
        index = np.asarray(index, dtype=np.int64)
        return ObservationSet(self.m, self.n, self.rows[index], self.cols[index],
                              self.labels[index])

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[Tuple[int, int, int]]:
        for i, j, y in zip(self.rows.tolist(), self.cols.tolist(), self.labels.tolist()):
            yield (i, j, y)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ObservationSet):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None  # type: ignore

    def __repr__(self) -> str:
        return "ObservationSet(m={0}, n={1}, size={2})".format(self.m, self.n, self.size)


class SplitPair(NamedTuple):
    """Partition of an observation set into two disjoint halves.

    Attributes
    ----------
    train : `ObservationSet`
    validation : `ObservationSet`
    train_index : `numpy.ndarray`
        Positions of training entries in the original set.
    validation_index : `numpy.ndarray`
        Positions of validation entries in the original set.
    """
    train: ObservationSet
    validation: ObservationSet
    train_index: np.ndarray
    validation_index: np.ndarray


def from_triplets(m: int, n: int, triplets: Iterable[Tuple[int, int, int]]) -> ObservationSet:
    """Make observation set from (i, j, y) tuples with 0-based indices.

    See `ObservationSet.from_arrays` for validation rules.
    """
    data = np.array(list(triplets), dtype=np.int64).reshape(-1, 3)
    return ObservationSet.from_arrays(m, n, data[:, 0], data[:, 1], data[:, 2])


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def split_indices(size: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Partition positions ``0..size-1`` uniformly at random.

    Parameters
    ----------
    size : `int`
        Number of entries.
    fraction : `float`
        Fraction of entries going into the second (validation) part,
        strictly between 0 and 1.
    seed : `int`
        Seed for random generator.

    Returns
    -------
    train : `numpy.ndarray`
        Sorted positions of the first part.
    validation : `numpy.ndarray`
        Sorted positions of the second part, ``round(fraction * size)``
        elements.

    Notes
    -----
    The validation part always has ``round_half_up(fraction * size)``
    elements. For ``fraction <= 0.5`` it is taken from the head of a random
    permutation, otherwise from its tail, so splits with fractions ``f`` and
    ``1 - f`` and the same seed are mirror images of each other unless
    ``f * size`` ends in exactly one half.
    """
    if not 0 < fraction < 1:
        raise ObservationError("Split fraction must be in (0, 1), got {0}".format(fraction))
    if size < 2:
        raise ObservationError("Need at least two observations to split")
    perm = np.random.default_rng(seed).permutation(size)
    k = _round_half_up(size * fraction)
    if fraction <= 0.5:
        validation, train = perm[:k], perm[k:]
    else:
        train, validation = perm[:size - k], perm[size - k:]
    return np.sort(train), np.sort(validation)


def split(obs: ObservationSet, fraction: float, seed: int) -> SplitPair:
    """Randomly split observations into training and validation sets.

    Parameters
    ----------
    obs : `ObservationSet`
        Observations to split, at least two entries.
    fraction : `float`
        Fraction of entries in the validation set.
    seed : `int`
        Seed for random generator, split is deterministic given seed.

    Returns
    -------
    pair : `SplitPair`
        Training and validation sets.
    """
    train_index, validation_index = split_indices(obs.size, fraction, seed)
    return SplitPair(train=obs.subset(train_index),
                     validation=obs.subset(validation_index),
                     train_index=train_index,
                     validation_index=validation_index)


def read_triplets(path: str, m: Optional[int] = None, n: Optional[int] = None,
                  with_ratings: bool = False):
    """Read observations from a triplet CSV file.

    File has a header line ``i,j,y`` (optionally followed by ``,rating``)
    and one observation per line with 1-based indices.

    Parameters
    ----------
    path : `str`
        File name.
    m, n : `int`, optional
        Matrix dimensions, if ``None`` then largest index in a file is used.
    with_ratings : `bool`, optional
        If ``True`` then return also the ``rating`` column.

    Returns
    -------
    obs : `ObservationSet`
        Observations.
    ratings : `numpy.ndarray`
        Only if ``with_ratings`` is True, ratings aligned with ``obs``
        entries, NaN where file has no rating.

    Raises
    ------
    TripletFormatError
        Raised for malformed lines or labels other than 1/-1.
    """
    rows: List[int] = []
    cols: List[int] = []
    labels: List[int] = []
    ratings: List[float] = []
    with open(path, newline='') as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ['i', 'j', 'y']:
            raise TripletFormatError("{0}: missing 'i,j,y' header".format(path))
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            try:
                i, j, y = int(fields[0]), int(fields[1]), int(fields[2])
                rating = float(fields[3]) if with_ratings and len(fields) > 3 and fields[3] else math.nan
            except (ValueError, IndexError):
                raise TripletFormatError("Invalid syntax at line {0}: `{1}'".format(
                    lineno, ",".join(fields)))
            if y not in (1, -1):
                raise TripletFormatError("Invalid label at line {0}: {1}".format(lineno, y))
            if i < 1 or j < 1:
                raise TripletFormatError("Indices are 1-based, line {0}".format(lineno))
            rows.append(i - 1)
            cols.append(j - 1)
            labels.append(y)
            if with_ratings:
                ratings.append(rating)

    row_arr = np.array(rows, dtype=np.int64)
    col_arr = np.array(cols, dtype=np.int64)
    if m is None:
        m = int(row_arr.max()) + 1 if row_arr.size else 1
    if n is None:
        n = int(col_arr.max()) + 1 if col_arr.size else 1
    if not with_ratings:
        return ObservationSet.from_arrays(m, n, row_arr, col_arr, labels)

    # keep ratings aligned, use the same stable sort as from_arrays
    order = np.lexsort((row_arr, col_arr))
    obs = ObservationSet.from_arrays(m, n, row_arr[order], col_arr[order],
                                     np.array(labels)[order])
    rating_arr = np.array(ratings, dtype=np.float64)[order]
    if obs.size != rating_arr.size:
        raise TripletFormatError("{0}: duplicate entries are not allowed "
                                 "together with ratings".format(path))
    return obs, rating_arr


def write_triplets(obs: ObservationSet, path: str, ratings: Optional[np.ndarray] = None) -> None:
    """Write observations to a triplet CSV file with 1-based indices.

    Parameters
    ----------
    obs : `ObservationSet`
        Observations to write.
    path : `str`
        File name.
    ratings : `numpy.ndarray`, optional
        Original ratings aligned with ``obs`` entries, written as a fourth
        column.
    """
    with open(path, "w", newline='') as file:
        writer = csv.writer(file, lineterminator="\n")
        if ratings is None:
            writer.writerow(["i", "j", "y"])
            for i, j, y in obs:
                writer.writerow([i + 1, j + 1, y])
        else:
            writer.writerow(["i", "j", "y", "rating"])
            for (i, j, y), rating in zip(obs, ratings.tolist()):
                writer.writerow([i + 1, j + 1, y, repr(rating)])
