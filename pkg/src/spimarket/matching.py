"""Max-weight offline matching of item and buyer trajectories.

Items are matchable to a buyer iff the buyer arrives inside the item's
presence window [arrival, perish], endpoints included. The global
max-weight matching decomposes exactly across stretches separated by
instants with no item present, because no edge can cross an empty
instant. Each stretch is solved as a dense rectangular assignment
problem; pairs without a real edge get weight zero, which cannot change
the optimum since all values are nonnegative.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import InstanceError


@dataclass(frozen=True)
class MatchingResult:
    """Matched pairs (parallel index arrays into the input trajectories)."""

    total_value: float
    item_indices: np.ndarray
    buyer_indices: np.ndarray
    pair_values: np.ndarray
    n_components: int


def presence_components(item_start, item_end):
    """Merge presence windows into maximal covered intervals.

    Returns (component_of_item, starts, ends) where component_of_item[k]
    is the index of the merged interval containing item k, and the
    merged intervals are sorted by start. Touching windows share a
    component since a buyer at the shared instant has edges to both.
    """
    item_start = np.asarray(item_start, dtype=float)
    item_end = np.asarray(item_end, dtype=float)
    k = item_start.shape[0]
    comp = np.empty(k, dtype=np.int64)
    if k == 0:
        return comp, np.empty(0), np.empty(0)
    if np.any(item_end < item_start):
        raise InstanceError("item presence windows must have end >= start")
    order = np.argsort(item_start, kind="stable")
    starts = []
    ends = []
    cur = -1
    cur_end = -np.inf
    for idx in order:
        s = item_start[idx]
        e = item_end[idx]
        if cur >= 0 and s <= cur_end:
            comp[idx] = cur
            if e > cur_end:
                cur_end = e
                ends[cur] = e
        else:
            cur += 1
            comp[idx] = cur
            starts.append(s)
            ends.append(e)
            cur_end = e
    return comp, np.asarray(starts), np.asarray(ends)


def max_weight_offline_match(item_good, item_start, item_end,
                             buyer_type, buyer_time, values):
    """Best hindsight matching of items to buyers for given trajectories.

    values is the (n_goods, n_buyer_types) value matrix; all entries
    must be nonnegative. Buyers arriving at an instant with no item
    present stay unmatched. Returns a MatchingResult whose pairs all
    have real edges.
    """
    item_good = np.asarray(item_good, dtype=np.int64)
    buyer_type = np.asarray(buyer_type, dtype=np.int64)
    item_start = np.asarray(item_start, dtype=float)
    item_end = np.asarray(item_end, dtype=float)
    buyer_time = np.asarray(buyer_time, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise InstanceError("values must be a 2-d matrix")
    if np.any(values < 0):
        raise InstanceError("matching requires nonnegative values")
    if item_good.shape != item_start.shape or item_start.shape != item_end.shape:
        raise InstanceError("item arrays must have matching shapes")
    if buyer_type.shape != buyer_time.shape:
        raise InstanceError("buyer arrays must have matching shapes")

    comp, starts, ends = presence_components(item_start, item_end)
    n_components = starts.shape[0]
    empty = MatchingResult(0.0, np.empty(0, np.int64), np.empty(0, np.int64),
                           np.empty(0), n_components)
    if n_components == 0 or buyer_time.shape[0] == 0:
        return empty

    pos = np.searchsorted(starts, buyer_time, side="right") - 1
    inside = (pos >= 0) & (buyer_time <= ends[np.clip(pos, 0, None)])
    buyer_comp = np.where(inside, pos, -1)

    matched_items = []
    matched_buyers = []
    pair_values = []
    total = 0.0
    for c in range(n_components):
        items_c = np.flatnonzero(comp == c)
        buyers_c = np.flatnonzero(buyer_comp == c)
        if items_c.size == 0 or buyers_c.size == 0:
            continue
        t_b = buyer_time[buyers_c]
        edge = ((item_start[items_c][:, None] <= t_b[None, :])
                & (t_b[None, :] <= item_end[items_c][:, None]))
        weights = np.where(
            edge, values[np.ix_(item_good[items_c], buyer_type[buyers_c])], 0.0)
        rows, cols = linear_sum_assignment(weights, maximize=True)
        real = edge[rows, cols]
        rows = rows[real]
        cols = cols[real]
        w = weights[rows, cols]
        total += float(w.sum())
        matched_items.append(items_c[rows])
        matched_buyers.append(buyers_c[cols])
        pair_values.append(w)
    if not matched_items:
        return empty
    return MatchingResult(
        total,
        np.concatenate(matched_items),
        np.concatenate(matched_buyers),
        np.concatenate(pair_values),
        n_components,
    )
