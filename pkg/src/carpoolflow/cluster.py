"""Door-to-door match enumeration via complete-linkage hierarchical clustering.

Each journey is summarized by a 4-vector of planar meters (origin east,
origin north, destination east, destination north) about a reference point.
Agglomerative clustering with complete linkage groups journeys whose origins
AND destinations are close; cutting the dendrogram at a meter-scale height
yields the door-to-door neighborhoods, and the largest cluster is the
door-to-door match set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .geo import GeoPoint, Trace, project_local

DEFAULT_CUT_HEIGHT_M = 6000.0


@dataclass(frozen=True)
class OdVector:
    """Origin/destination of one journey in planar meters about a reference."""

    origin_x: float
    origin_y: float
    dest_x: float
    dest_y: float

    def __post_init__(self) -> None:
        for value in (self.origin_x, self.origin_y, self.dest_x, self.dest_y):
            if not math.isfinite(value):
                raise ValueError(f"OD coordinates must be finite, got {value}")

    def as_array(self) -> np.ndarray:
        return np.array([self.origin_x, self.origin_y, self.dest_x, self.dest_y], dtype=float)


@dataclass(frozen=True)
class Merge:
    """One agglomeration step: clusters ``a`` and ``b`` joined at ``height``."""

    a: int
    b: int
    height: float


@dataclass(frozen=True)
class Dendrogram:
    """Merge history over leaves 0..n-1; merge k creates cluster id n + k."""

    n_leaves: int
    merges: Tuple[Merge, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "merges", tuple(self.merges))
        if self.n_leaves < 1:
            raise ValueError("a dendrogram needs at least one leaf")
        if len(self.merges) != self.n_leaves - 1:
            raise ValueError(
                f"{self.n_leaves} leaves need {self.n_leaves - 1} merges, got {len(self.merges)}"
            )
        heights = [m.height for m in self.merges]
        for earlier, later in zip(heights, heights[1:]):
            if later < earlier:
                raise ValueError("merge heights must be non-decreasing")

    def heights(self) -> List[float]:
        return [m.height for m in self.merges]


@dataclass(frozen=True)
class ClusterLabels:
    """A partition of trace ids into clusters labeled 1..k by decreasing size."""

    labels: Dict[str, int]

    def cardinalities(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for label in self.labels.values():
            out[label] = out.get(label, 0) + 1
        return out

    def members(self, label: int) -> Set[str]:
        return {trace_id for trace_id, lab in self.labels.items() if lab == label}


def od_vector(trace: Trace, reference: GeoPoint) -> OdVector:
    """Project a trace's first and last samples to planar meters about ``reference``."""
    return od_vector_from_points(trace.samples[0].position, trace.samples[-1].position, reference)


def od_vector_from_points(origin: GeoPoint, destination: GeoPoint, reference: GeoPoint) -> OdVector:
    """OD 4-vector for journey endpoints already reduced to two points."""
    ox, oy = project_local(origin, reference)
    dx, dy = project_local(destination, reference)
    return OdVector(origin_x=ox, origin_y=oy, dest_x=dx, dest_y=dy)


def validate_od_vectors(X) -> np.ndarray:
    """Coerce input to a finite (n, 4) float array; raise ValueError otherwise."""
    if isinstance(X, Sequence) and len(X) > 0 and isinstance(X[0], OdVector):
        X = [v.as_array() for v in X]
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected an (n, 4) array of OD vectors, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("need at least one OD vector")
    if not np.isfinite(arr).all():
        raise ValueError("OD vectors must be finite")
    return arr


def complete_linkage(vectors: Sequence[OdVector]) -> Dendrogram:
    """Agglomerative clustering with complete (maximum) linkage.

    At every step the two clusters with the smallest maximum pairwise
    Euclidean distance merge; exact ties are broken by the smallest
    (a, b) cluster-id pair, so results are reproducible across runs and
    platforms. O(n^2) memory, fine for the hundreds of journeys a line
    accumulates per week.
    """
    X = validate_od_vectors(list(vectors))
    n = X.shape[0]
    if n == 1:
        return Dendrogram(n_leaves=1, merges=())

    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)

    ids = list(range(n))
    merges: List[Merge] = []
    for step in range(n - 1):
        height = float(dist.min())
        tie_rows, tie_cols = np.nonzero(dist == height)
        best: Optional[Tuple[int, int]] = None
        best_pos: Tuple[int, int] = (0, 0)
        for i, j in zip(tie_rows.tolist(), tie_cols.tolist()):
            if i >= j:
                continue
            pair = (min(ids[i], ids[j]), max(ids[i], ids[j]))
            if best is None or pair < best:
                best = pair
                best_pos = (i, j)
        assert best is not None
        i, j = best_pos
        merges.append(Merge(a=best[0], b=best[1], height=height))

        # complete linkage: distance to the merged cluster is the max of the parts
        merged_row = np.maximum(dist[i], dist[j])
        dist[i, :] = merged_row
        dist[:, i] = merged_row
        dist[i, i] = np.inf
        dist = np.delete(np.delete(dist, j, axis=0), j, axis=1)
        ids[i] = n + step
        del ids[j]
    return Dendrogram(n_leaves=n, merges=tuple(merges))


def cut(
    dendrogram: Dendrogram, height: float, ids: Optional[Sequence[str]] = None
) -> ClusterLabels:
    """Clusters obtained by discarding merges above ``height``.

    Components are labeled 1..k by decreasing size (ties by smallest leaf
    index). ``ids`` names the leaves; stringified indices by default.
    """
    if height < 0:
        raise ValueError(f"cut height must be non-negative, got {height}")
    n = dendrogram.n_leaves
    if ids is None:
        ids = [str(i) for i in range(n)]
    ids = list(ids)
    if len(ids) != n:
        raise ValueError(f"expected {n} leaf ids, got {len(ids)}")
    if len(set(ids)) != n:
        raise ValueError("leaf ids must be unique")

    members: Dict[int, List[int]] = {i: [i] for i in range(n)}
    for k, merge in enumerate(dendrogram.merges):
        if merge.height > height:
            break  # heights are non-decreasing; everything after is above the cut
        members[n + k] = members.pop(merge.a) + members.pop(merge.b)

    components = sorted(members.values(), key=lambda leaves: (-len(leaves), min(leaves)))
    labels: Dict[str, int] = {}
    for label, leaves in enumerate(components, start=1):
        for leaf in leaves:
            labels[ids[leaf]] = label
    return ClusterLabels(labels=labels)


def door_to_door_matches(labels: ClusterLabels) -> Set[str]:
    """Members of the largest cluster; ties go to the cluster holding the
    lexicographically smallest trace id."""
    if not labels.labels:
        raise ValueError("no clusters to choose from")
    by_label: Dict[int, List[str]] = {}
    for trace_id, label in labels.labels.items():
        by_label.setdefault(label, []).append(trace_id)
    best = min(by_label.values(), key=lambda ids: (-len(ids), min(ids)))
    return set(best)


class CompleteLinkageClusterer(BaseEstimator, ClusterMixin):
    """Scikit-learn style estimator over :func:`complete_linkage` + :func:`cut`.

    Parameters
    ----------
    cut_height_m : float, default 6000
        Dendrogram cut height in meters.

    Attributes
    ----------
    dendrogram_ : Dendrogram
    labels_ : ndarray of shape (n,)
        Zero-based cluster labels ordered by decreasing cluster size.
    n_clusters_ : int
    """

    def __init__(self, cut_height_m: float = DEFAULT_CUT_HEIGHT_M):
        self.cut_height_m = cut_height_m

    def fit(self, X, y=None) -> "CompleteLinkageClusterer":
        if self.cut_height_m < 0:
            raise ValueError(f"cut height must be non-negative, got {self.cut_height_m}")
        arr = validate_od_vectors(X)
        vectors = [OdVector(*row) for row in arr]
        self.dendrogram_ = complete_linkage(vectors)
        labels = cut(self.dendrogram_, self.cut_height_m)
        self.labels_ = np.array(
            [labels.labels[str(i)] - 1 for i in range(arr.shape[0])], dtype=int
        )
        self.n_clusters_ = len(set(self.labels_.tolist()))
        return self
