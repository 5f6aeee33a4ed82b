"""Sensor placement by greedy selection of non-adjacent, dissimilar nodes."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, ShapeError, SizeError
from .feedersim import FeederModel, normal_streams

MAX_BRUTE_FORCE_NODES = 20


def subspace_angle(v_i, v_j, adjacent: bool = True) -> float:
    """Angle between two voltage sequences; zero for non-adjacent pairs."""
    v_i = np.asarray(v_i, dtype=np.float64).ravel()
    v_j = np.asarray(v_j, dtype=np.float64).ravel()
    if v_i.shape != v_j.shape:
        raise ShapeError(f"sequences differ in length: {v_i.shape} vs {v_j.shape}")
    ni, nj = np.linalg.norm(v_i), np.linalg.norm(v_j)
    if ni == 0 or nj == 0:
        raise DegeneracyError("subspace angle of a zero vector is undefined")
    if not adjacent:
        return 0.0
    return float(np.arccos(np.clip(v_i @ v_j / (ni * nj), -1.0, 1.0)))


@dataclass(frozen=True)
class DissimilarityMatrix:
    nodes: tuple
    delta: np.ndarray
    edges: frozenset  # of (i, j) node-id pairs with i < j

    def __post_init__(self):
        m = len(self.nodes)
        d = np.asarray(self.delta, dtype=np.float64)
        if d.shape != (m, m):
            raise ShapeError(f"delta must be {m}x{m}, got {d.shape}")
        object.__setattr__(self, "delta", d)

    def neighbors(self, node) -> list:
        return sorted([b for a, b in self.edges if a == node] + [a for a, b in self.edges if b == node])

    def node_scores(self) -> np.ndarray:
        """Delta_i: sum of dissimilarities to each node's neighbours."""
        return self.delta.sum(axis=1)

    def total(self, selected) -> float:
        index = {n: k for k, n in enumerate(self.nodes)}
        return float(sum(self.delta[index[n]].sum() for n in selected))

    def is_independent(self, selected) -> bool:
        chosen = set(selected)
        return not any(a in chosen and b in chosen for a, b in self.edges)


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


def dissimilarity_matrix(nodes, edges, signals: dict) -> DissimilarityMatrix:
    """delta[i, j] = subspace_angle(signals[i], signals[j]) on edges, 0 elsewhere."""
    nodes = tuple(sorted(nodes))
    edges = frozenset(_edge_key(a, b) for a, b in edges)
    index = {n: k for k, n in enumerate(nodes)}
    delta = np.zeros((len(nodes), len(nodes)))
    for a, b in edges:
        d = subspace_angle(signals[a], signals[b], adjacent=True)
        delta[index[a], index[b]] = delta[index[b], index[a]] = d
    return DissimilarityMatrix(nodes, delta, edges)


def node_signatures(feeder: FeederModel, fs: float, T: int, n_windows: int = 8) -> dict:
    """Average of consecutive normal-operation voltage windows per node.

    Windows start one cycle apart so they share phase and the average
    keeps the waveform instead of cancelling it.
    """
    per_cycle = fs / feeder.frequency
    hop = int(round(per_cycle * max(1, round(T / per_cycle))))
    streams = normal_streams(feeder, fs, hop * (n_windows - 1) + T)
    return {
        n: np.mean([streams.voltage[n][k * hop : k * hop + T] for k in range(n_windows)], axis=0)
        for n in feeder.nodes
    }


def feeder_dissimilarity(feeder: FeederModel, fs: float, T: int, n_windows: int = 8) -> DissimilarityMatrix:
    return dissimilarity_matrix(feeder.nodes, feeder.edges(), node_signatures(feeder, fs, T, n_windows))


@dataclass(frozen=True)
class PlacementResult:
    selected: tuple
    order: tuple
    total_dissimilarity: float
    gains: tuple = ()  # Delta value of each pick at the time it was made

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "order": list(self.order),
            "total_dissimilarity": self.total_dissimilarity,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def greedy_place(D: DissimilarityMatrix, K: int) -> PlacementResult:
    """Pick the node with the largest remaining Delta, zero it and its neighbours, repeat."""
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    scores = D.node_scores().copy()
    index = {n: k for k, n in enumerate(D.nodes)}
    order, gains = [], []
    while len(order) < K and scores.size and scores.max() > 0:
        k = int(np.argmax(scores))  # first maximum, i.e. lowest node id
        node = D.nodes[k]
        order.append(node)
        gains.append(float(scores[k]))
        scores[k] = 0.0
        for j in D.neighbors(node):
            scores[index[j]] = 0.0
    return PlacementResult(tuple(sorted(order)), tuple(order), D.total(order), tuple(gains))


def brute_force_place(D: DissimilarityMatrix, K: int) -> PlacementResult:
    """Best independent set of at most K nodes by exhaustive search."""
    if len(D.nodes) > MAX_BRUTE_FORCE_NODES:
        raise SizeError(f"brute force is limited to {MAX_BRUTE_FORCE_NODES} nodes, got {len(D.nodes)}")
    best, best_total = (), 0.0
    for size in range(1, min(K, len(D.nodes)) + 1):
        for combo in itertools.combinations(D.nodes, size):
            if not D.is_independent(combo):
                continue
            total = D.total(combo)
            if total > best_total + 1e-12:
                best, best_total = combo, total
    return PlacementResult(tuple(best), tuple(best), float(best_total))
