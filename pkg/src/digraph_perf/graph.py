"""Weighted digraphs, their Laplacians and the standard graph families.

Node indices are 0-based inside the package. The JSON format and the
``WeightedDigraph.from_json`` / ``to_json`` helpers use 1-based indices.
An edge ``(i, j, b)`` means node ``i`` measures node ``j`` with weight ``b``,
so it contributes ``b`` to ``L[i, i]`` and ``-b`` to ``L[i, j]``.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    BadOmega,
    BadSize,
    InvalidGraph,
    NotWeightBalanced,
    OutputAssumptionViolated,
    ShapeMismatch,
)

ROW_SUM_TOL = 1e-12
BALANCE_TOL = 1e-10


@dataclass(frozen=True)
class WeightedDigraph:
    """Node count plus positively weighted directed edges (0-based)."""

    n: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidGraph(f"node count must be a positive integer, got {self.n!r}")
        seen = set()
        clean = []
        for e in self.edges:
            if len(e) != 3:
                raise InvalidGraph(f"edge {e!r} is not a triple (i, j, w)")
            i, j, w = int(e[0]), int(e[1]), float(e[2])
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidGraph(f"edge ({i}, {j}) has an index outside 0..{self.n - 1}")
            if i == j:
                raise InvalidGraph(f"self-loop at node {i}")
            if not np.isfinite(w) or w <= 0.0:
                raise InvalidGraph(f"edge ({i}, {j}) has non-positive weight {w}")
            if (i, j) in seen:
                raise InvalidGraph(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            clean.append((i, j, w))
        object.__setattr__(self, "edges", tuple(clean))

    @classmethod
    def from_json(cls, data: dict | str | Path) -> "WeightedDigraph":
        """Build from ``{"n": int, "edges": [[i, j, w], ...]}`` with 1-based indices.

        ``data`` may be an already parsed mapping, a JSON string or a path.
        """
        if isinstance(data, Path) or (isinstance(data, str) and not data.lstrip().startswith("{")):
            data = json.loads(Path(data).read_text())
        elif isinstance(data, str):
            data = json.loads(data)
        try:
            n = int(data["n"])
            edges = [(int(i) - 1, int(j) - 1, float(w)) for i, j, w in data.get("edges", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidGraph(f"malformed graph JSON: {exc}") from exc
        return cls(n, tuple(edges))

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [[i + 1, j + 1, w] for i, j, w in self.edges]}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_laplacian(g: WeightedDigraph) -> np.ndarray:
    """Weighted Laplacian with ``L_ii = sum_j b_ij`` and ``L_ij = -b_ij``."""
    L = np.zeros((g.n, g.n))
    for i, j, w in g.edges:
        L[i, j] -= w
        L[i, i] += w
    return _frozen(L)


def digraph_from_laplacian(L: np.ndarray) -> WeightedDigraph:
    """Inverse of :func:`build_laplacian` for a valid Laplacian."""
    L = np.asarray(L, dtype=float)
    check_laplacian(L)
    n = L.shape[0]
    edges = [(i, j, -L[i, j]) for i in range(n) for j in range(n) if i != j and L[i, j] < 0]
    return WeightedDigraph(n, tuple(edges))


def check_laplacian(L: np.ndarray, tol: float = ROW_SUM_TOL) -> None:
    """Raise :class:`InvalidGraph` unless ``L`` is a square Laplacian."""
    L = np.asarray(L)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise InvalidGraph(f"Laplacian must be square, got shape {L.shape}")
    if np.iscomplexobj(L) or not np.all(np.isfinite(L)):
        raise InvalidGraph("Laplacian must be real and finite")
    scale = max(1.0, float(np.max(np.abs(L)))) if L.size else 1.0
    if np.max(np.abs(L.sum(axis=1)), initial=0.0) > tol * scale:
        raise InvalidGraph("Laplacian rows do not sum to zero")
    off = L - np.diag(np.diag(L))
    if np.any(off > 0):
        raise InvalidGraph("Laplacian has positive off-diagonal entries")


def cyclic_laplacian(n: int, d: float = 1.0, omega: int = 1) -> np.ndarray:
    """Circulant Laplacian where each node measures its ``omega`` successors.

    Every node has out-degree ``d`` split evenly over the ``omega`` neighbours.
    """
    if n < 2:
        raise BadSize(f"cyclic graph needs n >= 2, got {n}")
    if not (1 <= omega <= n - 1):
        raise BadOmega(f"omega must lie in 1..{n - 1}, got {omega}")
    if d <= 0:
        raise InvalidGraph(f"out-degree must be positive, got {d}")
    row = np.zeros(n)
    row[0] = 1.0
    row[1:omega + 1] = -1.0 / omega
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return _frozen(d * row[idx])


def complete_laplacian(n: int) -> np.ndarray:
    """Complete graph with uniform weights ``1/(n-1)`` (total out-degree ``n``)."""
    return cyclic_laplacian(n, 1.0, n - 1)


def imploding_star_laplacian(n: int) -> np.ndarray:
    """All nodes measure the hub (last node); weights ``n/(n-1)``."""
    if n < 2:
        raise BadSize(f"star graph needs n >= 2, got {n}")
    L = np.zeros((n, n))
    L[: n - 1, : n - 1] = np.eye(n - 1)
    L[: n - 1, n - 1] = -1.0
    return _frozen(L * (n / (n - 1)))


def directed_path_laplacian(n: int) -> np.ndarray:
    """Node 0 is a leader; node ``i`` measures node ``i-1`` with unit weight.

    The eigenvalue 1 forms a single Jordan block of size ``n-1``.
    """
    if n < 2:
        raise BadSize(f"path graph needs n >= 2, got {n}")
    L = np.eye(n) - np.eye(n, k=-1)
    L[0, 0] = 0.0
    return _frozen(L)


def hermitian_part(L: np.ndarray) -> np.ndarray:
    """``(L + L^T)/2`` of a weight-balanced Laplacian."""
    L = np.asarray(L, dtype=float)
    check_laplacian(L)
    scale = max(1.0, float(np.max(np.abs(L))))
    if np.max(np.abs(L.sum(axis=0))) > BALANCE_TOL * scale:
        raise NotWeightBalanced("column sums are nonzero; the Hermitian part is not a Laplacian")
    return _frozen(0.5 * (L + L.T))


def deviation_from_average_output(n: int) -> np.ndarray:
    """``C = I - 11^T/n``, the deviation-from-average output."""
    if n < 2:
        raise BadSize(f"need n >= 2, got {n}")
    return _frozen(np.eye(n) - np.full((n, n), 1.0 / n))


def has_globally_reachable_node(g: WeightedDigraph | np.ndarray) -> bool:
    """True iff some node can be reached along directed edges from every node.

    Accepts either a :class:`WeightedDigraph` or a Laplacian matrix.
    """
    if isinstance(g, WeightedDigraph):
        n = g.n
        edges: Iterable[tuple[int, int]] = ((i, j) for i, j, _ in g.edges)
    else:
        L = np.asarray(g)
        n = L.shape[0]
        ii, jj = np.nonzero(L < 0)
        edges = ((int(i), int(j)) for i, j in zip(ii, jj) if i != j)
    # predecessors[j] = nodes i with an edge i -> j
    predecessors: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        predecessors[j].append(i)
    for root in range(n):
        seen = [False] * n
        seen[root] = True
        queue = deque([root])
        count = 1
        while queue:
            v = queue.popleft()
            for u in predecessors[v]:
                if not seen[u]:
                    seen[u] = True
                    count += 1
                    queue.append(u)
        if count == n:
            return True
    return False


def is_normal(L: np.ndarray, tol: float = 1e-10) -> bool:
    """True iff ``||L L^T - L^T L||_F <= tol ||L||_F^2``."""
    L = np.asarray(L)
    Lh = L.conj().T
    comm = np.linalg.norm(L @ Lh - Lh @ L)
    return bool(comm <= tol * np.linalg.norm(L) ** 2)


# --- family shorthand ----------------------------------------------------------

FAMILIES = ("cycle", "star", "path", "complete")


def parse_family(text: str) -> tuple[str, tuple]:
    """Parse ``"cycle:n,d,omega"``, ``"star:n"``, ``"path:n"`` or ``"complete:n"``.

    Returns the family name and its parameters, ``(n, d, omega)`` for a cycle
    and ``(n,)`` otherwise.
    """
    name, sep, rest = text.partition(":")
    name = name.strip().lower()
    if not sep or name not in FAMILIES:
        raise InvalidGraph(f"unknown graph family {text!r}")
    parts = [p.strip() for p in rest.split(",") if p.strip()]
    try:
        if name == "cycle":
            if len(parts) == 1:
                parts += ["1", "1"]
            elif len(parts) == 2:
                parts.append("1")
            if len(parts) != 3:
                raise ValueError("expected n,d,omega")
            return name, (int(parts[0]), float(parts[1]), int(parts[2]))
        if len(parts) != 1:
            raise ValueError("expected a single node count")
        return name, (int(parts[0]),)
    except ValueError as exc:
        raise InvalidGraph(f"bad family parameters in {text!r}: {exc}") from exc


def family_laplacian(text: str) -> np.ndarray:
    """Laplacian for a family shorthand string."""
    name, params = parse_family(text)
    if name == "cycle":
        return cyclic_laplacian(*params)
    if name == "star":
        return imploding_star_laplacian(*params)
    if name == "path":
        return directed_path_laplacian(*params)
    return complete_laplacian(*params)


def check_output_matrix(C: np.ndarray, n: int | None = None) -> np.ndarray:
    """Validate an output matrix and return it as a 2-D array.

    Raises :class:`~digraph_perf.errors.OutputAssumptionViolated` unless
    ``C @ 1 == 0`` to ``1e-12`` (scaled by the largest entry when it exceeds 1).
    """
    C = np.atleast_2d(np.asarray(C))
    if C.ndim != 2:
        raise ShapeMismatch(f"output matrix must be 2-D, got shape {C.shape}")
    if n is not None and C.shape[1] != n:
        raise ShapeMismatch(f"output matrix has {C.shape[1]} columns, expected {n}")
    if not np.all(np.isfinite(C)):
        raise ShapeMismatch("output matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(C)))) if C.size else 1.0
    if C.size and np.max(np.abs(C.sum(axis=1))) > ROW_SUM_TOL * scale:
        raise OutputAssumptionViolated("output matrix does not annihilate the consensus direction (C @ 1 != 0)")
    return C
