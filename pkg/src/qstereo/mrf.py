"""Discrete Markov random fields with unary and pairwise costs.

A field is an undirected graph over vertices ``0..V-1``.  Vertex ``v``
has a finite label set ``{0, ..., label_counts[v]-1}`` and a cost vector
``unary[v]``; each edge ``(p, q)`` carries a dense cost matrix of shape
``(label_counts[p], label_counts[q])``.  The energy of a labelling is

    E(l) = sum_v unary[v][l_v] + sum_{(p,q)} pairwise[p,q][l_p, l_q],

and MAP inference asks for the labelling of minimal energy.  This module
holds the data model, an exact (guarded) exhaustive oracle, a seeded
random-instance generator, and a plain-text serialization.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CapacityError, ParseError

# Exhaustive MAP is refused above this many joint assignments.
STATE_SPACE_CAP = 10**7

Labelling = np.ndarray  # int array, one label index per vertex


class MarkovRandomField:
    """Immutable MRF instance.

    Edges are stored undirected with ``p < q``; each edge appears once
    and its matrix rows index labels of ``p``, columns labels of ``q``.
    Arrays are copied and frozen at construction, so instances may be
    shared freely between threads.
    """

    def __init__(self, label_counts, unary, edges, pairwise):
        self.label_counts = tuple(int(c) for c in label_counts)
        if any(c < 1 for c in self.label_counts):
            raise ValueError("every vertex needs at least one label")
        v = len(self.label_counts)

        if len(unary) != v:
            raise ValueError(f"expected {v} unary vectors, got {len(unary)}")
        self.unary = tuple(
            np.ascontiguousarray(u, dtype=np.float64) for u in unary
        )
        for i, u in enumerate(self.unary):
            if u.shape != (self.label_counts[i],):
                raise ValueError(
                    f"unary vector of vertex {i} has shape {u.shape}, "
                    f"expected ({self.label_counts[i]},)"
                )

        if len(edges) != len(pairwise):
            raise ValueError("edge list and pairwise list differ in length")
        canon = []
        mats = []
        seen = set()
        for (p, q), mat in zip(edges, pairwise):
            p, q = int(p), int(q)
            if p == q:
                raise ValueError(f"self-loop at vertex {p}")
            if not (0 <= p < v and 0 <= q < v):
                raise ValueError(f"edge ({p}, {q}) references unknown vertex")
            m = np.ascontiguousarray(mat, dtype=np.float64)
            if p > q:
                p, q = q, p
                m = np.ascontiguousarray(m.T)
            if (p, q) in seen:
                raise ValueError(f"duplicate edge ({p}, {q})")
            seen.add((p, q))
            if m.shape != (self.label_counts[p], self.label_counts[q]):
                raise ValueError(
                    f"pairwise matrix of edge ({p}, {q}) has shape {m.shape}, "
                    f"expected ({self.label_counts[p]}, {self.label_counts[q]})"
                )
            canon.append((p, q))
            mats.append(m)
        self.edges = tuple(canon)
        self.pairwise = tuple(mats)

        for u in self.unary:
            u.flags.writeable = False
        for m in self.pairwise:
            m.flags.writeable = False

    @property
    def num_vertices(self) -> int:
        return len(self.label_counts)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_vertices, dtype=np.int64)
        for p, q in self.edges:
            deg[p] += 1
            deg[q] += 1
        return deg

    def max_abs_potential(self) -> float:
        vals = [float(np.max(np.abs(u))) for u in self.unary]
        vals += [float(np.max(np.abs(m))) for m in self.pairwise]
        return max(vals) if vals else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarkovRandomField):
            return NotImplemented
        return (
            self.label_counts == other.label_counts
            and self.edges == other.edges
            and all(np.array_equal(a, b) for a, b in zip(self.unary, other.unary))
            and all(np.array_equal(a, b) for a, b in zip(self.pairwise, other.pairwise))
        )

    def __repr__(self) -> str:
        return (
            f"MarkovRandomField(V={self.num_vertices}, E={self.num_edges}, "
            f"labels={self.label_counts})"
        )


def validate_labelling(mrf: MarkovRandomField, lab) -> np.ndarray:
    lab = np.asarray(lab, dtype=np.int64)
    if lab.shape != (mrf.num_vertices,):
        raise ValueError(
            f"labelling has shape {lab.shape}, expected ({mrf.num_vertices},)"
        )
    for v, l in enumerate(lab):
        if not 0 <= l < mrf.label_counts[v]:
            raise ValueError(f"label {l} out of range for vertex {v}")
    return lab


def energy(mrf: MarkovRandomField, lab) -> float:
    """Energy of a labelling.

    Summation order is fixed: unary terms in vertex order, then pairwise
    terms in edge-list order, accumulated left to right.
    """
    lab = validate_labelling(mrf, lab)
    total = 0.0
    for v in range(mrf.num_vertices):
        total += mrf.unary[v][lab[v]]
    for e, (p, q) in enumerate(mrf.edges):
        total += mrf.pairwise[e][lab[p], lab[q]]
    return float(total)


def _state_space_size(mrf: MarkovRandomField) -> int:
    total = 1
    for c in mrf.label_counts:
        total *= c
    return total


def brute_force_map(mrf: MarkovRandomField) -> tuple[np.ndarray, float]:
    """Exhaustive MAP oracle.

    Enumerates every labelling (vertex 0 most significant) and returns
    the first one attaining the minimum, i.e. ties break toward the
    lexicographically smallest assignment.  Guarded by
    ``STATE_SPACE_CAP``.
    """
    total = _state_space_size(mrf)
    if total > STATE_SPACE_CAP:
        raise CapacityError(
            f"state space {total} exceeds exhaustive cap {STATE_SPACE_CAP}"
        )

    counts = mrf.label_counts
    nv = mrf.num_vertices
    strides = np.ones(nv, dtype=np.int64)
    for v in range(nv - 2, -1, -1):
        strides[v] = strides[v + 1] * counts[v + 1]

    best_energy = math.inf
    best_index = -1
    chunk = 1 << 15
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        ks = np.arange(lo, hi, dtype=np.int64)
        labels = [(ks // strides[v]) % counts[v] for v in range(nv)]
        e = np.zeros(hi - lo, dtype=np.float64)
        for v in range(nv):
            e += mrf.unary[v][labels[v]]
        for ei, (p, q) in enumerate(mrf.edges):
            e += mrf.pairwise[ei][labels[p], labels[q]]
        k = int(np.argmin(e))
        if e[k] < best_energy:
            best_energy = float(e[k])
            best_index = lo + k

    lab = np.array(
        [(best_index // strides[v]) % counts[v] for v in range(nv)],
        dtype=np.int64,
    )
    return lab, energy(mrf, lab)


def random_mrf(
    seed: int,
    v: int,
    labels: int,
    edge_prob: float,
    cost_range: tuple[float, float] = (-1.0, 1.0),
) -> MarkovRandomField:
    """Seeded random instance with uniform costs in ``cost_range``.

    Both signs are allowed so the negative-cost paths of downstream
    encoders get exercised.  Identical arguments produce identical
    instances.
    """
    if v < 1:
        raise ValueError("need at least one vertex")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    lo, hi = cost_range
    if not lo <= hi:
        raise ValueError("empty cost range")

    rng = np.random.default_rng(seed)
    unary = [rng.uniform(lo, hi, size=labels) for _ in range(v)]
    edges = []
    pairwise = []
    for p in range(v):
        for q in range(p + 1, v):
            if rng.random() < edge_prob:
                edges.append((p, q))
                pairwise.append(rng.uniform(lo, hi, size=(labels, labels)))
    return MarkovRandomField([labels] * v, unary, edges, pairwise)


# --- text serialization ----------------------------------------------------
#
# Header line `mrf V E`, then V lines `vertex <id> <label_count> <costs...>`,
# then E blocks `edge <p> <q>` followed by the pairwise matrix row by row.
# Whitespace separated, `#` starts a comment.


def write_mrf(mrf: MarkovRandomField, path) -> None:
    lines = [f"mrf {mrf.num_vertices} {mrf.num_edges}"]
    for v in range(mrf.num_vertices):
        costs = " ".join(repr(float(x)) for x in mrf.unary[v])
        lines.append(f"vertex {v} {mrf.label_counts[v]} {costs}")
    for e, (p, q) in enumerate(mrf.edges):
        lines.append(f"edge {p} {q}")
        for row in mrf.pairwise[e]:
            lines.append(" ".join(repr(float(x)) for x in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class _TokenStream:
    def __init__(self, text: str):
        self.tokens = []
        for line in text.splitlines():
            body = line.split("#", 1)[0]
            self.tokens.extend(body.split())
        self.pos = 0

    def next(self, what: str) -> str:
        if self.pos >= len(self.tokens):
            raise ParseError(f"unexpected end of file while reading {what}")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected integer for {what}, got {tok!r}") from None

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected number for {what}, got {tok!r}") from None


def read_mrf(path) -> MarkovRandomField:
    with open(path, "r", encoding="utf-8") as fh:
        ts = _TokenStream(fh.read())
    if ts.next("header") != "mrf":
        raise ParseError("missing 'mrf' header")
    nv = ts.next_int("vertex count")
    ne = ts.next_int("edge count")

    counts = [0] * nv
    unary = [None] * nv
    for _ in range(nv):
        if ts.next("vertex keyword") != "vertex":
            raise ParseError("expected 'vertex' record")
        vid = ts.next_int("vertex id")
        if not 0 <= vid < nv or unary[vid] is not None:
            raise ParseError(f"bad or repeated vertex id {vid}")
        k = ts.next_int("label count")
        counts[vid] = k
        unary[vid] = np.array(
            [ts.next_float("unary cost") for _ in range(k)], dtype=np.float64
        )

    edges = []
    pairwise = []
    for _ in range(ne):
        if ts.next("edge keyword") != "edge":
            raise ParseError("expected 'edge' record")
        p = ts.next_int("edge endpoint")
        q = ts.next_int("edge endpoint")
        if not (0 <= p < nv and 0 <= q < nv):
            raise ParseError(f"edge ({p}, {q}) references unknown vertex")
        mat = np.array(
            [
                [ts.next_float("pairwise cost") for _ in range(counts[q])]
                for _ in range(counts[p])
            ],
            dtype=np.float64,
        )
        edges.append((p, q))
        pairwise.append(mat)

    if ts.pos != len(ts.tokens):
        raise ParseError("trailing tokens after MRF definition")
    return MarkovRandomField(counts, unary, edges, pairwise)
