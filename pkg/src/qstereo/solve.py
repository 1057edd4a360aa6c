"""Solver backends behind one result contract, plus QUBO -> Ising conversion.

Three backends:

* ``solve_exhaustive`` - guarded ground-truth enumeration (n <= 24).
* ``solve_sa`` - Metropolis single-bit-flip simulated annealing with a
  geometric inverse-temperature schedule, 500 reads by default, fully
  deterministic for a fixed seed.
* ``solve_chain_dp`` - exact MAP for path-structured MRFs by forward
  dynamic programming.  It works in label space, where the one-hot
  constraints are implicit, which is exactly why it can be exact; it is
  the reference optimum the sampling solvers are measured against.

Energies in ``SolveResult`` are raw ``x^T Q x`` values; callers add the
instance offset when they want MRF-equivalent numbers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import CapacityError, StructureError
from .mrf import MarkovRandomField, energy
from .onehot import QuboInstance

EXHAUSTIVE_CAP = 24


@dataclass
class SolveResult:
    best_x: np.ndarray
    best_energy: float
    samples: list[float]
    elapsed: float

    def to_json_dict(self, include_timing: bool = False) -> dict:
        """JSON-ready record; timing is opt-in so identical seeds give
        byte-identical serializations."""
        value = 0
        for i, b in enumerate(self.best_x):
            if b:
                value |= 1 << i
        return {
            "n": int(self.best_x.shape[0]),
            "best_x_hex": format(value, "x"),
            "best_energy": self.best_energy,
            "energies": list(self.samples),
            "elapsed_ms": self.elapsed * 1e3 if include_timing else None,
        }


def bitstring_from_hex(hex_str: str, n: int) -> np.ndarray:
    value = int(hex_str, 16)
    return np.array([(value >> i) & 1 for i in range(n)], dtype=np.uint8)


def _lex_bit_matrix(lo: int, hi: int, n: int) -> np.ndarray:
    """Rows are bitstrings for counter values [lo, hi); variable 0 is the
    counter's most significant bit, so row order equals lexicographic
    order of the bitstrings."""
    ks = np.arange(lo, hi, dtype=np.int64)
    cols = [((ks >> (n - 1 - i)) & 1).astype(np.float64) for i in range(n)]
    return np.stack(cols, axis=1)


def solve_exhaustive(q: QuboInstance) -> SolveResult:
    """Global minimum by enumeration; ties break to the lexicographically
    smallest bitstring."""
    if q.n > EXHAUSTIVE_CAP:
        raise CapacityError(
            f"{q.n} variables exceed the exhaustive cap of {EXHAUSTIVE_CAP}"
        )
    start = time.perf_counter()
    if q.n == 0:
        return SolveResult(np.zeros(0, np.uint8), 0.0, [0.0], time.perf_counter() - start)

    u = q.to_dense()
    best_e = np.inf
    best_k = 0
    total = 1 << q.n
    chunk = 1 << 16
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        x = _lex_bit_matrix(lo, hi, q.n)
        e = np.einsum("ij,jk,ik->i", x, u, x, optimize=True)
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e = float(e[k])
            best_k = lo + k

    best_x = np.array(
        [(best_k >> (q.n - 1 - i)) & 1 for i in range(q.n)], dtype=np.uint8
    )
    best_e = q.value(best_x)  # re-evaluate exactly, without matmul reassociation
    return SolveResult(best_x, best_e, [best_e], time.perf_counter() - start)


# --- simulated annealing -----------------------------------------------------


def _csr_adjacency(q: QuboInstance):
    """Symmetric adjacency of the couplers in CSR form."""
    neighbors: list[list[tuple[int, float]]] = [[] for _ in range(q.n)]
    for (i, j), w in q.entries.items():
        if i != j:
            neighbors[i].append((j, w))
            neighbors[j].append((i, w))
    indptr = np.zeros(q.n + 1, dtype=np.int64)
    for i, nb in enumerate(neighbors):
        nb.sort()
        indptr[i + 1] = indptr[i] + len(nb)
    indices = np.zeros(indptr[-1], dtype=np.int64)
    weights = np.zeros(indptr[-1], dtype=np.float64)
    pos = 0
    for nb in neighbors:
        for j, w in nb:
            indices[pos] = j
            weights[pos] = w
            pos += 1
    return indptr, indices, weights


def default_beta_range(q: QuboInstance) -> tuple[float, float]:
    """Schedule endpoints from single-flip energy bounds.

    The hottest temperature accepts the worst flip with probability 1/2,
    the coldest accepts the mildest nonzero flip with probability 1/100.
    Mirrors what common annealing samplers do when asked for defaults.
    """
    diag = q.diagonal()
    bound = np.abs(diag)
    for (i, j), w in q.entries.items():
        if i != j:
            bound[i] += abs(w)
            bound[j] += abs(w)
    nonzero = bound[bound > 0]
    if nonzero.size == 0:
        return 0.1, 1.0
    return float(np.log(2.0) / nonzero.max()), float(np.log(100.0) / nonzero.min())


@njit(cache=True, parallel=True)
def _sa_reads(diag, indptr, indices, weights, betas, reads, seed):  # pragma: no cover
    n = diag.shape[0]
    sweeps = betas.shape[0]
    energies = np.empty(reads, dtype=np.float64)
    states = np.zeros((reads, n), dtype=np.uint8)

    for r in prange(reads):
        # stream depends only on (seed, read index), never on scheduling
        np.random.seed((seed ^ (2654435761 * (r + 1))) % 2147483647)
        x = np.zeros(n, dtype=np.uint8)
        field = np.zeros(n, dtype=np.float64)
        for i in range(n):
            x[i] = 1 if np.random.random() < 0.5 else 0
        for i in range(n):
            f = diag[i]
            for k in range(indptr[i], indptr[i + 1]):
                f += weights[k] * x[indices[k]]
            field[i] = f

        for s in range(sweeps):
            beta = betas[s]
            for i in range(n):
                delta = field[i] if x[i] == 0 else -field[i]
                if delta <= 0.0 or np.random.random() < np.exp(-beta * delta):
                    if x[i] == 0:
                        x[i] = 1
                        for k in range(indptr[i], indptr[i + 1]):
                            field[indices[k]] += weights[k]
                    else:
                        x[i] = 0
                        for k in range(indptr[i], indptr[i + 1]):
                            field[indices[k]] -= weights[k]

        e = 0.0
        for i in range(n):
            if x[i] == 1:
                e += diag[i]
                for k in range(indptr[i], indptr[i + 1]):
                    j = indices[k]
                    if j > i and x[j] == 1:
                        e += weights[k]
        energies[r] = e
        states[r] = x
    return states, energies


def solve_sa(
    q: QuboInstance,
    reads: int = 500,
    sweeps: int = 1000,
    beta_range: tuple[float, float] | None = None,
    seed: int = 0,
) -> SolveResult:
    """Metropolis single-bit-flip annealing.

    Each read starts from a random state and sweeps all variables
    ``sweeps`` times under a geometric beta schedule; the lowest-energy
    read wins (first such read on ties).  Reads run in parallel, but each
    read's random stream is derived from (seed, read index) alone, so
    results are bit-for-bit reproducible regardless of thread schedule.
    """
    if reads < 1 or sweeps < 1:
        raise ValueError("reads and sweeps must be positive")
    if beta_range is None:
        beta_range = default_beta_range(q)
    beta_start, beta_end = float(beta_range[0]), float(beta_range[1])
    if not (0.0 < beta_start <= beta_end):
        raise ValueError(f"invalid beta range ({beta_start}, {beta_end})")

    start = time.perf_counter()
    if q.n == 0:
        return SolveResult(
            np.zeros(0, np.uint8), 0.0, [0.0] * reads, time.perf_counter() - start
        )
    betas = np.geomspace(beta_start, beta_end, sweeps)
    indptr, indices, weights = _csr_adjacency(q)
    states, energies = _sa_reads(
        q.diagonal(), indptr, indices, weights, betas, reads, int(seed) & 0x7FFFFFFF
    )
    best_read = int(np.argmin(energies))  # first minimal read on ties
    samples = [float(e) for e in energies]
    return SolveResult(
        states[best_read].copy(),
        float(energies[best_read]),
        samples,
        time.perf_counter() - start,
    )


# --- exact chain dynamic programming -----------------------------------------


def _path_order(mrf: MarkovRandomField) -> list[list[int]]:
    """Split the vertex set into simple paths, each listed endpoint to
    endpoint starting from its smallest-index endpoint.  Raises
    ``StructureError`` on degree > 2 or cycles."""
    adj: list[list[int]] = [[] for _ in range(mrf.num_vertices)]
    for p, q in mrf.edges:
        adj[p].append(q)
        adj[q].append(p)
    for v, nb in enumerate(adj):
        if len(nb) > 2:
            raise StructureError(f"vertex {v} has degree {len(nb)} > 2")

    visited = [False] * mrf.num_vertices
    paths = []
    for v in range(mrf.num_vertices):
        if visited[v] or len(adj[v]) == 2:
            continue
        path = [v]
        visited[v] = True
        prev, cur = v, v
        while True:
            nxt = [u for u in adj[cur] if u != prev and not visited[u]]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            visited[cur] = True
            path.append(cur)
        paths.append(path)
    if not all(visited):
        raise StructureError("edge set contains a cycle")
    return paths


def solve_chain_dp(mrf: MarkovRandomField) -> tuple[np.ndarray, float]:
    """Exact MAP for an MRF whose edges form disjoint simple paths.

    Forward pass over each path accumulates the best cost of every label
    of the current vertex; backtracking resolves ties toward the lowest
    label index at each step.
    """
    edge_matrix = {}
    for e, (p, q) in enumerate(mrf.edges):
        edge_matrix[(p, q)] = mrf.pairwise[e]

    lab = np.zeros(mrf.num_vertices, dtype=np.int64)
    for path in _path_order(mrf):
        cost = mrf.unary[path[0]].copy()
        back = []
        for a, b in zip(path, path[1:]):
            if (a, b) in edge_matrix:
                m = edge_matrix[(a, b)]
            else:
                m = edge_matrix[(b, a)].T
            through = cost[:, None] + m
            back.append(np.argmin(through, axis=0))  # first min = lowest label
            cost = mrf.unary[b] + np.min(through, axis=0)
        best = int(np.argmin(cost))
        lab[path[-1]] = best
        for i in range(len(back) - 1, -1, -1):
            best = int(back[i][best])
            lab[path[i]] = best
    return lab, energy(mrf, lab)


# --- Ising form ---------------------------------------------------------------


@dataclass(frozen=True)
class IsingModel:
    """Spin form over s in {-1, 1}: H(s) = sum h_i s_i + sum J_ij s_i s_j
    + offset, equal to the source QUBO's value at x = (s + 1) / 2."""

    h: np.ndarray
    J: dict[tuple[int, int], float]
    offset: float

    def value(self, s) -> float:
        s = np.asarray(s, dtype=np.float64)
        total = float(self.h @ s) + self.offset
        for (i, j), w in self.J.items():
            total += w * s[i] * s[j]
        return total


def qubo_to_ising(q: QuboInstance) -> IsingModel:
    """Substitute x = (s + 1) / 2 into x^T Q x.

    With the stored symmetrized coupler sums ``w_ij = Q_ij + Q_ji`` this
    gives ``h_i = Q_ii / 2 + sum_j w_ij / 4``, ``J_ij = w_ij / 4`` and
    ``offset = sum_i Q_ii / 2 + sum_{i<j} w_ij / 4``.
    """
    h = q.diagonal() / 2.0
    J = {}
    offset = float(np.sum(q.diagonal()) / 2.0)
    for (i, j), w in q.entries.items():
        if i == j:
            continue
        J[(i, j)] = w / 4.0
        h[i] += w / 4.0
        h[j] += w / 4.0
        offset += w / 4.0
    return IsingModel(h=h, J=J, offset=offset)
