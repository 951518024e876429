"""Brute-force reference implementations used only to check the real ones.

Each oracle recomputes its answer from first principles with none of the
package's incremental machinery: path enumeration by subset permutation,
linkage by recomputing every pairwise maximum at every step, simplification
by testing every (sample, meeting point) pair.
"""

from __future__ import annotations

import math
from itertools import permutations
from typing import Dict, List, Optional, Sequence, Set, Tuple

from carpoolflow.geo import GeoPoint, Trace, planar_distance
from carpoolflow.network import CarpoolLine, CarpoolNetwork
from carpoolflow.simplify import TimeWindow


def enumerate_variants_brute(
    node_ids: Sequence[str],
    edges: Set[Tuple[str, str]],
    line: Sequence[str],
) -> Set[Tuple[str, ...]]:
    """All simple start-to-end paths containing the line nodes in order,
    found by trying every permutation of every node subset."""
    start, end = line[0], line[-1]
    others = [n for n in node_ids if n not in (start, end)]
    found: Set[Tuple[str, ...]] = set()
    for size in range(len(others) + 1):
        for chosen in permutations(others, size):
            path = (start, *chosen, end)
            if all((a, b) in edges for a, b in zip(path, path[1:])):
                if _is_subsequence(line, path):
                    found.add(path)
    return found


def _is_subsequence(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    k = 0
    for item in haystack:
        if k < len(needle) and item == needle[k]:
            k += 1
    return k == len(needle)


def complete_linkage_brute(points: Sequence[Sequence[float]]) -> List[Tuple[int, int, float]]:
    """Complete linkage by recomputing every inter-cluster maximum from the
    leaf sets at every step. Returns (a, b, height) merge records with the
    same id convention and tie-break as the production code."""
    n = len(points)

    def dist(i: int, j: int) -> float:
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(points[i], points[j])))

    clusters: Dict[int, Set[int]] = {i: {i} for i in range(n)}
    merges: List[Tuple[int, int, float]] = []
    next_id = n
    while len(clusters) > 1:
        best_pair: Optional[Tuple[int, int]] = None
        best_height = math.inf
        for a in sorted(clusters):
            for b in sorted(clusters):
                if a >= b:
                    continue
                height = max(dist(i, j) for i in clusters[a] for j in clusters[b])
                if height < best_height or (
                    height == best_height and best_pair is not None and (a, b) < best_pair
                ):
                    best_height = height
                    best_pair = (a, b)
        a, b = best_pair
        merges.append((a, b, best_height))
        clusters[next_id] = clusters.pop(a) | clusters.pop(b)
        next_id += 1
    return merges


def simplify_brute(
    trace: Trace,
    line: CarpoolLine,
    network: CarpoolNetwork,
    radius_m: float,
    window: Optional[TimeWindow],
) -> Optional[Tuple[Tuple[str, ...], List[int]]]:
    """Match a trace against a line by testing every (sample, meeting point)
    pair with the scalar distance. Returns (variant, sample indices of the
    passes) for the winning variant, or None."""
    edges = set(network.edges)
    node_ids = [p.id for p in network.points]
    variants = enumerate_variants_brute(node_ids, edges, line.node_ids)

    candidates = []
    for variant in sorted(variants):
        indices: List[int] = []
        ok = True
        for node_id in variant:
            point = network.node(node_id).location
            best_idx, best_dist = None, math.inf
            for idx, s in enumerate(trace.samples):
                d = planar_distance(s.position, point)
                if d < best_dist:
                    best_idx, best_dist = idx, d
            if best_dist > radius_m:
                ok = False
                break
            stamp = trace.samples[best_idx].timestamp
            if window is not None and not window.contains(stamp):
                ok = False
                break
            if indices and stamp <= trace.samples[indices[-1]].timestamp:
                ok = False
                break
            indices.append(best_idx)
        if ok:
            candidates.append((variant, indices))
    if not candidates:
        return None

    def preference(candidate):
        variant, indices = candidate
        return (-len(variant), trace.samples[indices[-1]].timestamp, variant)

    return min(candidates, key=preference)


def rmse_brute(observations, predictions_by_bin: Dict[int, float]) -> Dict[int, float]:
    """observations: list of (bin index or None, wait). Plain per-bin recomputation."""
    grouped: Dict[int, List[float]] = {}
    for bin_index, wait in observations:
        if bin_index is None or bin_index not in predictions_by_bin:
            continue
        grouped.setdefault(bin_index, []).append(wait)
    out = {}
    for bin_index, waits in grouped.items():
        p = predictions_by_bin[bin_index]
        out[bin_index] = math.sqrt(sum((w - p) ** 2 for w in waits) / len(waits))
    return out
