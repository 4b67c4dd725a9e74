"""Module for real ratings data.

Ratings files are delimited text with one ``user, item, rating[,
timestamp]`` record per line (MovieLens uses ``::`` as delimiter).
Ratings are converted to 1-bit observations by comparing them with the
global average rating: ratings strictly above the average become +1, all
others -1.
"""

__all__ = ['RatingsFormatError', 'RatingsTable', 'Binarized', 'RatingsFit', 'read_ratings',
           'binarize', 'holdout_split', 'fit_ratings']

import dataclasses
import logging
import math
import time
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .linkfun import LinkModel
from .metrics import sign_accuracy
from .obsdata import ObservationSet, SplitPair, split
from .solver import SolverConfig, solve

_log = logging.getLogger(__name__)


class RatingsFormatError(Exception):
    """Class for exceptions raised for malformed ratings files.
    """
    pass


@dataclasses.dataclass
class RatingsTable:
    """Ratings with external ids mapped to dense 0-based indices.

    Attributes
    ----------
    users : `numpy.ndarray`
        Dense user index of each rating.
    items : `numpy.ndarray`
        Dense item index of each rating.
    ratings : `numpy.ndarray`
        Rating values.
    timestamps : `numpy.ndarray` or ``None``
        Timestamps, if present in the file.
    user_ids : `numpy.ndarray`
        External user id for each dense index, sorted.
    item_ids : `numpy.ndarray`
        External item id for each dense index, sorted.
    """
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: Optional[np.ndarray]
    user_ids: np.ndarray
    item_ids: np.ndarray

    @property
    def size(self) -> int:
        return self.ratings.size

    @property
    def num_users(self) -> int:
        return self.user_ids.size

    @property
    def num_items(self) -> int:
        return self.item_ids.size

    def user_index(self) -> Dict[int, int]:
        """Mapping from external user id to dense index."""
        return {int(uid): k for k, uid in enumerate(self.user_ids)}

    def item_index(self) -> Dict[int, int]:
        """Mapping from external item id to dense index."""
        return {int(iid): k for k, iid in enumerate(self.item_ids)}


class Binarized(NamedTuple):
    """Result of ratings binarization.

    Attributes
    ----------
    obs : `~mmgn4py.obsdata.ObservationSet`
        1-bit observations, users are rows and items are columns.
    average : `float`
        Global average rating.
    ratings : `numpy.ndarray`
        Original rating of each entry of ``obs``.
    per_rating_index : `dict` [ `float`, `numpy.ndarray` ]
        Positions of ``obs`` entries for each original rating value.
    """
    obs: ObservationSet
    average: float
    ratings: np.ndarray
    per_rating_index: Dict[float, np.ndarray]


class RatingsFit(NamedTuple):
    """Result of the ratings workflow, averaged over replicates.

    Attributes
    ----------
    best_ranks : `list` [ `int` ]
        Rank with best held-out accuracy in each replicate.
    overall : `float`
        Mean held-out sign accuracy at best rank.
    by_rating : `dict` [ `float`, `float` ]
        Mean held-out accuracy for each original rating.
    per_rank_accuracy : `list` [ `dict` [ `int`, `float` ] ]
        Held-out accuracy of every candidate rank, for each replicate.
    runtime_seconds : `float`
        Mean solver runtime of the best-rank fits.
    """
    best_ranks: List[int]
    overall: float
    by_rating: Dict[float, float]
    per_rank_accuracy: List[Dict[int, float]]
    runtime_seconds: float


def read_ratings(path: str, delimiter: str = "::",
                 scale: Optional[Tuple[float, float]] = (1., 5.)) -> RatingsTable:
    """Read delimited ratings file.

    Parameters
    ----------
    path : `str`
        File name.
    delimiter : `str`, optional
        Field delimiter.
    scale : `tuple` [ `float`, `float` ], optional
        Declared rating scale; ratings outside of it are kept with a
        warning. ``None`` disables the check.

    Returns
    -------
    table : `RatingsTable`
        Parsed ratings; for repeated (user, item) pairs the last rating is
        kept.

    Raises
    ------
    RatingsFormatError
        Raised for malformed lines or if file has no ratings.
    """
    records: Dict[Tuple[int, int], Tuple[float, Optional[int]]] = {}
    has_timestamps = True
    with open(path) as file:
        for lineno, line in enumerate(file, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(delimiter)
            if len(fields) not in (3, 4):
                raise RatingsFormatError("Expected 3 or 4 fields at line {0}: `{1}'".format(
                    lineno, line))
            try:
                user, item, rating = int(fields[0]), int(fields[1]), float(fields[2])
                stamp = int(fields[3]) if len(fields) == 4 else None
            except ValueError:
                raise RatingsFormatError("Invalid syntax at line {0}: `{1}'".format(lineno, line))
            if user < 1 or item < 1:
                raise RatingsFormatError("Ids must be positive at line {0}".format(lineno))
            if not math.isfinite(rating):
                raise RatingsFormatError("Non-finite rating at line {0}".format(lineno))
            if scale is not None and not scale[0] <= rating <= scale[1]:
                _log.warning("rating %g outside of scale %s at line %d", rating, scale, lineno)
            if stamp is None:
                has_timestamps = False
            key = (user, item)
            if key in records:
                _log.warning("duplicate rating for user %d item %d at line %d, keeping last",
                             user, item, lineno)
                # re-insert so that position follows the last occurrence
                del records[key]
            records[key] = (rating, stamp)

    if not records:
        raise RatingsFormatError("{0}: file has no ratings".format(path))

    keys = np.array(list(records.keys()), dtype=np.int64)
    values = list(records.values())
    user_ids, users = np.unique(keys[:, 0], return_inverse=True)
    item_ids, items = np.unique(keys[:, 1], return_inverse=True)
    ratings = np.array([val[0] for val in values], dtype=np.float64)
    timestamps = None
    if has_timestamps:
        timestamps = np.array([val[1] for val in values], dtype=np.int64)
    _log.info("read %d ratings of %d users and %d items from %s", ratings.size,
              user_ids.size, item_ids.size, path)
    return RatingsTable(users=users.astype(np.int64), items=items.astype(np.int64),
                        ratings=ratings, timestamps=timestamps,
                        user_ids=user_ids, item_ids=item_ids)


def binarize(table: RatingsTable) -> Binarized:
    """Convert ratings to 1-bit observations.

    Parameters
    ----------
    table : `RatingsTable`
        Ratings, non-empty.

    Returns
    -------
    result : `Binarized`
        Observations with +1 for ratings strictly above the global
        average and -1 otherwise.
    """
    if table.size == 0:
        raise ValueError("Ratings table is empty")
    average = math.fsum(table.ratings) / table.size
    # same ordering as ObservationSet so that ratings stay aligned
    order = np.lexsort((table.users, table.items))
    ratings = table.ratings[order]
    labels = np.where(ratings > average, 1, -1)
    obs = ObservationSet.from_arrays(table.num_users, table.num_items,
                                     table.users[order], table.items[order], labels)
    per_rating = {float(value): np.flatnonzero(ratings == value) for value in np.unique(ratings)}
    _log.info("binarized %d ratings, average %.6f, %.2f%% positive", obs.size, average,
              100. * np.count_nonzero(labels > 0) / obs.size)
    return Binarized(obs=obs, average=average, ratings=ratings, per_rating_index=per_rating)


def holdout_split(obs: ObservationSet, test_fraction: float, seed: int) -> SplitPair:
    """Split observations into training and test sets.

    The ``validation`` member of the returned pair is the test set with
    ``round(test_fraction * |Omega|)`` entries.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("Test fraction must be in (0, 1), got {0}".format(test_fraction))
    return split(obs, test_fraction, seed)


def fit_ratings(data: Binarized, model: Optional[LinkModel] = None,
                ranks: Sequence[int] = tuple(range(1, 11)), test_fraction: float = 0.05,
                seed: int = 0, config: Optional[SolverConfig] = None,
                replicates: int = 1) -> RatingsFit:
    """Run the held-out sign prediction workflow.

    For each replicate observations are split into training and test sets,
    a model of every candidate rank is fitted on the training set, and the
    rank with the best test sign accuracy is reported.

    Parameters
    ----------
    data : `Binarized`
        Binarized ratings.
    model : `~mmgn4py.linkfun.LinkModel`, optional
        Link model, logistic with ``sigma=1`` by default.
    ranks : `list` [ `int` ], optional
        Candidate ranks.
    test_fraction : `float`, optional
        Fraction of ratings held out.
    seed : `int`, optional
        Seed of the first replicate split, replicate ``k`` uses ``seed + k``.
    config : `~mmgn4py.solver.SolverConfig`, optional
        Solver settings, rank in it is ignored.
    replicates : `int`, optional
        Number of random splits.

    Returns
    -------
    fit : `RatingsFit`
        Accuracies averaged over replicates.
    """
    if model is None:
        model = LinkModel.logistic(1.0)
    if config is None:
        config = SolverConfig(rank=1)
    ranks = sorted(set(int(r) for r in ranks))
    if not ranks:
        raise ValueError("Candidate rank list is empty")
    if replicates < 1:
        raise ValueError("Number of replicates must be positive")

    best_ranks: List[int] = []
    overall: List[float] = []
    by_rating: Dict[float, List[float]] = {}
    per_rank_all: List[Dict[int, float]] = []
    runtimes: List[float] = []
    for replicate in range(replicates):
        pair = holdout_split(data.obs, test_fraction, seed + replicate)
        test_ratings = data.ratings[pair.validation_index]
        per_rank: Dict[int, float] = {}
        best = None
        for rank in ranks:
            start = time.perf_counter()
            report = solve(pair.train, model, dataclasses.replace(config, rank=rank))
            elapsed = time.perf_counter() - start
            acc = sign_accuracy(report.factors, pair.validation, test_ratings)
            per_rank[rank] = acc.overall
            _log.info("replicate %d rank %d: test accuracy %.4f", replicate, rank, acc.overall)
            # strict comparison keeps the smaller rank on ties
            if best is None or acc.overall > best[1].overall:
                best = (rank, acc, elapsed)
        assert best is not None
        best_ranks.append(best[0])
        overall.append(best[1].overall)
        runtimes.append(best[2])
        for value, accuracy in (best[1].by_rating or {}).items():
            by_rating.setdefault(value, []).append(accuracy)
        per_rank_all.append(per_rank)

    return RatingsFit(best_ranks=best_ranks,
                      overall=math.fsum(overall) / len(overall),
                      by_rating={value: math.fsum(acc) / len(acc)
                                 for value, acc in sorted(by_rating.items())},
                      per_rank_accuracy=per_rank_all,
                      runtime_seconds=math.fsum(runtimes) / len(runtimes))
