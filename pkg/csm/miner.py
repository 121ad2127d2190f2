"""
    Level-wise frequent itemset mining and support ratios between D2 and D1
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Tuple, Union

import numpy as np
import pandas as pd

import csm.constants as constants
from csm.codes import EventCode
from csm.errors import UndefinedConfidenceError, ValidationError

logger = logging.getLogger("miner")


@dataclass(frozen=True, order=True)
class Itemset(object):
    """
        A non-empty set of codes held in canonical (sorted) order
    """
    codes: Tuple[EventCode, ...]

    def __post_init__(self):
        codes = tuple(sorted(set(self.codes)))
        if not codes:
            raise ValidationError("An itemset needs at least one code")
        object.__setattr__(self, "codes", codes)

    @classmethod
    def of(cls, *codes):
        return cls(tuple(code if isinstance(code, EventCode) else EventCode.parse(code)
                         for code in codes))

    @classmethod
    def parse(cls, text):
        return cls(tuple(EventCode.parse(part) for part in text.split(constants.ITEMSET_SEPARATOR)))

    def __str__(self):
        return constants.ITEMSET_SEPARATOR.join(str(code) for code in self.codes)

    def __len__(self):
        return len(self.codes)

    def __iter__(self):
        return iter(self.codes)

    def union(self, other):
        return Itemset(self.codes + other.codes)

    def contained_in(self, transaction):
        return all(code in transaction for code in self.codes)


@dataclass(frozen=True)
class MinerConfig(object):
    """
        Minimum support (strict) and itemset size cap
    """
    min_support: Union[Fraction, str, float] = constants.MIN_SUPPORT
    max_itemset_size: int = constants.MAX_ITEMSET_SIZE

    def __post_init__(self):
        # Decimal text keeps 0.3 exactly 3/10 rather than its binary neighbour
        omega = self.min_support
        if not isinstance(omega, Fraction):
            try:
                omega = Fraction(str(omega))
            except ValueError:
                raise ValidationError("min_support '{}' is not a number".format(self.min_support))
        if not 0 < omega <= 1:
            raise ValidationError("min_support must lie in (0, 1], got {}".format(self.min_support))
        if self.max_itemset_size < 1:
            raise ValidationError("max_itemset_size must be at least 1, got {}"
                                  .format(self.max_itemset_size))
        object.__setattr__(self, "min_support", omega)

    def is_frequent(self, count, m):
        """
            count/m > omega, compared on integers
        """
        return count * self.min_support.denominator > self.min_support.numerator * m


@dataclass(frozen=True)
class FrequentItemset(object):
    itemset: Itemset
    count: int
    m: int

    @property
    def support(self):
        return self.count / self.m


def suppratio(supp_d2, supp_d1):
    """
        Ratio of the two supports; +inf when the itemset never occurs in D1
    """
    if supp_d1 == 0:
        return math.inf
    return supp_d2 / supp_d1


@dataclass(frozen=True)
class CandidateItemset(object):
    """
        A D2-frequent itemset with its supports in both databases
    """
    itemset: Itemset
    count_d2: int
    m2: int
    count_d1: int
    m1: int

    @property
    def supp_d2(self):
        return self.count_d2 / self.m2

    @property
    def supp_d1(self):
        return self.count_d1 / self.m1 if self.m1 else 0.0

    @property
    def supp_ratio(self):
        if self.count_d1 == 0:
            return math.inf
        return (self.count_d2 * self.m1) / (self.count_d1 * self.m2)


def support_count(itemset, database):
    return sum(1 for transaction in database if itemset.contained_in(transaction))


def support(itemset, database):
    """
        Fraction of transactions containing every code of the itemset
    """
    if database.m == 0:
        raise ValueError("Support is undefined on an empty database")
    return support_count(itemset, database) / database.m


def confidence(antecedent, consequent, database):
    """
        supp(X u Y) / supp(X)
    """
    supp_x = support(antecedent, database)
    if supp_x == 0:
        raise UndefinedConfidenceError("Antecedent '{}' never occurs, confidence is undefined"
                                       .format(antecedent))
    return support(antecedent.union(consequent), database) / supp_x


class BitsetIndex(object):
    """
        Transactions as rows of packed item bitsets
    """

    def __init__(self, rows, n_items):
        dense = np.zeros((len(rows), max(n_items, 1)), dtype=bool)
        for t, ids in enumerate(rows):
            dense[t, ids] = True
        self.bits = np.packbits(dense, axis=1)

    def count(self, candidates):
        counts = np.zeros(len(candidates), dtype=np.int64)
        for c, ids in enumerate(candidates):
            # packbits is big-endian within each byte
            hit = np.ones(self.bits.shape[0], dtype=bool)
            for i in ids:
                hit &= (self.bits[:, i >> 3] & (0x80 >> (i & 7))) != 0
            counts[c] = np.count_nonzero(hit)
        return counts


class TidListIndex(object):
    """
        Sorted transaction-id arrays per item, for large item universes
    """

    def __init__(self, rows, n_items):
        tids = [[] for _ in range(n_items)]
        for t, ids in enumerate(rows):
            for i in ids:
                tids[i].append(t)
        self.tids = [np.array(t, dtype=np.int64) for t in tids]

    def count(self, candidates):
        counts = np.zeros(len(candidates), dtype=np.int64)
        for c, ids in enumerate(candidates):
            common = self.tids[ids[0]]
            for i in ids[1:]:
                common = np.intersect1d(common, self.tids[i], assume_unique=True)
            counts[c] = len(common)
        return counts


def _make_index(rows, n_items):
    if n_items <= constants.BITSET_MAX_ITEMS:
        return BitsetIndex(rows, n_items)
    return TidListIndex(rows, n_items)


def _next_candidates(frequent):
    """
        Joins frequent k-itemsets sharing a (k-1)-prefix and keeps only
        candidates whose every k-subset is frequent
    """
    known = set(frequent)
    candidates = []
    for a, b in combinations(frequent, 2):
        if a[:-1] != b[:-1]:
            continue
        candidate = a + (b[-1],) if a[-1] < b[-1] else b + (a[-1],)
        if all(subset in known for subset in combinations(candidate, len(candidate) - 1)):
            candidates.append(candidate)
    return sorted(candidates)


def mine_frequent(database, config, executor=None, workers=1):
    """
        All itemsets up to max_itemset_size with support strictly above min_support.
        Counting is split over `workers` contiguous transaction chunks and merged.
    """
    if database.m == 0:
        raise ValueError("Cannot mine an empty database")
    items = database.items()
    item_ids = {code: i for i, code in enumerate(items)}
    rows = [np.array(sorted(item_ids[code] for code in t), dtype=np.int64) for t in database]

    workers = max(1, min(workers, database.m))
    bounds = np.linspace(0, database.m, workers + 1).astype(int)
    indexes = [_make_index(rows[lo:hi], len(items)) for lo, hi in zip(bounds[:-1], bounds[1:])]
    logger.info("Mining %d transactions over %d items in %d chunk(s) with %s",
                database.m, len(items), len(indexes), type(indexes[0]).__name__)

    def count(candidates):
        if executor is not None and len(indexes) > 1:
            parts = list(executor.map(lambda index: index.count(candidates), indexes))
        else:
            parts = [index.count(candidates) for index in indexes]
        return np.sum(parts, axis=0)

    result = []
    candidates = [(i,) for i in range(len(items))]
    size = 1
    while candidates and size <= config.max_itemset_size:
        counts = count(candidates)
        frequent = [(candidate, int(n)) for candidate, n in zip(candidates, counts)
                    if config.is_frequent(int(n), database.m)]
        logger.info("Level %d: %d candidates, %d frequent", size, len(candidates), len(frequent))
        result.extend(FrequentItemset(Itemset(tuple(items[i] for i in candidate)), n, database.m)
                      for candidate, n in frequent)
        candidates = _next_candidates([candidate for candidate, _ in frequent])
        size += 1
    return result


def support_ratio(itemset, d1, d2):
    """
        Supports of the itemset in D2 and D1 and their ratio
    """
    count_d2 = support_count(itemset, d2)
    if count_d2 == 0:
        raise ValueError("Itemset '{}' does not occur in D2".format(itemset))
    return CandidateItemset(itemset, count_d2, d2.m, support_count(itemset, d1), d1.m)


def filter_candidates(candidates):
    """
        Keeps candidates with a support ratio above 1, in input order
    """
    return [candidate for candidate in candidates if candidate.supp_ratio > 1]


def _candidate_order(candidate):
    return (-candidate.supp_ratio, candidate.itemset)


def write_candidates(candidates, path, delimiter=","):
    """
        Writes the candidate table sorted by ratio (descending) then itemset
    """
    frame = pd.DataFrame(
        [(str(c.itemset),
          constants.SUPPORT_FORMAT.format(c.supp_d2),
          constants.SUPPORT_FORMAT.format(c.supp_d1),
          constants.SUPPORT_FORMAT.format(c.supp_ratio))
         for c in sorted(candidates, key=_candidate_order)],
        columns=list(constants.CANDIDATE_COLUMNS))
    frame.to_csv(path, sep=delimiter, index=False, encoding="utf-8", lineterminator="\n")
    logger.info("Wrote %d candidates to '%s'", len(frame), path)
