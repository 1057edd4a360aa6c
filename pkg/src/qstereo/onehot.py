"""One-hot QUBO encoding of MRF MAP inference.

Each (vertex, label) pair becomes one binary variable.  The MRF costs
are copied into the QUBO matrix and rectifier weights are added so that
the *unconstrained* minimizer of ``x^T Q x`` sets exactly one bit per
vertex.  The rectifiers are granular: instead of one per-vertex penalty
constant, every same-vertex label pair gets the smallest weight that
still guarantees feasibility of the optimum, which keeps the energy
landscape flatter for sampling solvers.

For a vertex ``p`` with incident edges ``(p, q)``:

    gamma(r, q)  = max_s pairwise[p,q][r, s]
    chi(p)       = max(0, min_r (unary[p][r] + sum_q max(0, gamma(r, q))) + eps)
    zeta(r)      = sum_q sum_s min(0, pairwise[p,q][r, s])
    theta(r, s)  = min(0, unary[p][r] + zeta(r) - eps,
                          unary[p][s] + zeta(s) - eps)

and the rectifier weights are ``lambda_diag(r) = chi(p)`` on the
diagonal and ``lambda_off(r, s) = (chi(p) - theta(r, s)) / 2`` on
same-vertex pairs.  ``chi`` bounds the energy increase of switching a
label on; ``theta`` bounds the energy decrease, so their combination
makes "no label" and "two labels" both strictly worse than "one label"
by at least ``eps``.

With rectifier strength ``t`` (1 = proven hard constraints), the matrix is

    Q[l, l]  = unary[v][l] - t * lambda_diag(l)
    Q[r, s]  = Q[s, r] = t * lambda_off(r, s)        same vertex, r != s
    Q[r, s]  = Q[s, r] = pairwise[p,q][r, s] / 2     across each edge

and for every one-hot feasible ``x``,
``x^T Q x + offset == energy(mrf, decode(x))`` with
``offset = t * sum_v chi(v)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UndefinedStatisticError
from .mrf import MarkovRandomField


class QuboInstance:
    """Sparse symmetric QUBO stored in upper-triangular form.

    ``entries`` maps ``(i, j)`` with ``i <= j`` to a weight; an
    off-diagonal weight is the *sum* of the two symmetric halves, so

        value(x) = sum_i entries[i,i] x_i + sum_{i<j} entries[i,j] x_i x_j.

    Encoders store every coupling their scheme declares, including
    zero-valued ones, so the sparsity pattern is the problem graph.
    ``var_meta[i]`` gives the (vertex, label) pair of variable ``i`` for
    decoders; it is ``None`` for QUBOs that did not come from the
    one-hot encoding.  ``offset`` is the constant to add when reporting
    MRF-equivalent energies.
    """

    def __init__(self, n, entries, var_meta=None, offset=0.0):
        self.n = int(n)
        if self.n < 0:
            raise ValueError("negative variable count")
        self.entries: dict[tuple[int, int], float] = {}
        for (i, j), w in entries.items():
            i, j = int(i), int(j)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"entry ({i}, {j}) out of range")
            if i > j:
                i, j = j, i
            if (i, j) in self.entries:
                raise ValueError(f"duplicate entry ({i}, {j})")
            self.entries[(i, j)] = float(w)
        if var_meta is not None:
            var_meta = tuple((int(v), int(l)) for v, l in var_meta)
            if len(var_meta) != self.n:
                raise ValueError("var_meta length must equal variable count")
        self.var_meta = var_meta
        self.offset = float(offset)

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.float64)
        for (i, j), w in self.entries.items():
            if i == j:
                d[i] = w
        return d

    def couplers(self) -> dict[tuple[int, int], float]:
        return {(i, j): w for (i, j), w in self.entries.items() if i != j}

    def to_dense(self) -> np.ndarray:
        """Upper-triangular matrix U with x^T U x == value(x)."""
        u = np.zeros((self.n, self.n), dtype=np.float64)
        for (i, j), w in self.entries.items():
            u[i, j] = w
        return u

    def value(self, x) -> float:
        """x^T Q x for a 0/1 vector (offset not included)."""
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"bitstring has shape {x.shape}, expected ({self.n},)")
        total = 0.0
        for (i, j), w in self.entries.items():
            if x[i] and x[j]:
                total += w
        return float(total)

    def __repr__(self) -> str:
        return f"QuboInstance(n={self.n}, entries={len(self.entries)})"


@dataclass(frozen=True)
class RectifierTable:
    """Per-vertex rectifier quantities (see module docstring).

    ``gamma[v]`` has shape ``(L_v, deg_v)`` with columns in the order of
    ``incident[v]``; ``zeta[v]`` has shape ``(L_v,)``; ``theta[v]`` and
    ``lambda_off[v]`` are ``(L_v, L_v)`` symmetric; ``lambda_diag[v]``
    is ``(L_v,)`` and constant at ``chi[v]``.
    """

    gamma: tuple[np.ndarray, ...]
    chi: np.ndarray
    zeta: tuple[np.ndarray, ...]
    theta: tuple[np.ndarray, ...]
    lambda_diag: tuple[np.ndarray, ...]
    lambda_off: tuple[np.ndarray, ...]
    incident: tuple[tuple[int, ...], ...]
    epsilon: float


def _incidence(mrf: MarkovRandomField):
    """Per vertex: tuple of (edge index, axis) where axis 0 means the
    vertex indexes matrix rows."""
    inc = [[] for _ in range(mrf.num_vertices)]
    for e, (p, q) in enumerate(mrf.edges):
        inc[p].append((e, 0))
        inc[q].append((e, 1))
    return [tuple(x) for x in inc]


def compute_rectifiers(mrf: MarkovRandomField, epsilon: float) -> RectifierTable:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    inc = _incidence(mrf)

    gamma = []
    chi = np.zeros(mrf.num_vertices, dtype=np.float64)
    zeta = []
    theta = []
    lam_diag = []
    lam_off = []
    for v in range(mrf.num_vertices):
        k = mrf.label_counts[v]
        g = np.zeros((k, len(inc[v])), dtype=np.float64)
        z = np.zeros(k, dtype=np.float64)
        for col, (e, axis) in enumerate(inc[v]):
            mat = mrf.pairwise[e] if axis == 0 else mrf.pairwise[e].T
            g[:, col] = mat.max(axis=1)
            z += np.minimum(0.0, mat).sum(axis=1)
        worst_gain = mrf.unary[v] + np.maximum(0.0, g).sum(axis=1)
        chi[v] = max(0.0, float(worst_gain.min()) + epsilon)

        drop = mrf.unary[v] + z - epsilon
        th = np.minimum(0.0, np.minimum(drop[:, None], drop[None, :]))
        gamma.append(g)
        zeta.append(z)
        theta.append(th)
        lam_diag.append(np.full(k, chi[v]))
        lam_off.append((chi[v] - th) / 2.0)

    return RectifierTable(
        gamma=tuple(gamma),
        chi=chi,
        zeta=tuple(zeta),
        theta=tuple(theta),
        lambda_diag=tuple(lam_diag),
        lambda_off=tuple(lam_off),
        incident=tuple(inc),
        epsilon=float(epsilon),
    )


def default_epsilon(mrf: MarkovRandomField) -> float:
    """Strict-margin constant: relative to the instance's cost scale so
    it stays representable next to the real coefficients."""
    return 1e-6 * max(1.0, mrf.max_abs_potential())


def variable_index_base(mrf: MarkovRandomField) -> np.ndarray:
    base = np.zeros(mrf.num_vertices + 1, dtype=np.int64)
    np.cumsum(mrf.label_counts, out=base[1:])
    return base


def encode_one_hot(
    mrf: MarkovRandomField,
    epsilon: float | None = None,
    t: float = 1.0,
) -> QuboInstance:
    """Encode MAP inference as a QUBO over one-hot label variables.

    ``t`` scales the rectifier weights; ``t = 1`` gives the proven
    hard-constraint setting, smaller values trade feasibility guarantees
    for a flatter landscape.  With ``t = 0`` no same-vertex couplings
    are emitted at all.  Every declared coupling of the scheme is stored
    even when its weight is zero, so graph statistics see the full
    problem graph.
    """
    if epsilon is None:
        epsilon = default_epsilon(mrf)
    if t < 0:
        raise ValueError("rectifier strength t must be non-negative")
    rect = compute_rectifiers(mrf, epsilon)
    base = variable_index_base(mrf)

    entries: dict[tuple[int, int], float] = {}
    var_meta = []
    for v in range(mrf.num_vertices):
        for l in range(mrf.label_counts[v]):
            var_meta.append((v, l))
            i = int(base[v] + l)
            entries[(i, i)] = float(mrf.unary[v][l] - t * rect.lambda_diag[v][l])
        if t > 0:
            for r in range(mrf.label_counts[v]):
                for s in range(r + 1, mrf.label_counts[v]):
                    i, j = int(base[v] + r), int(base[v] + s)
                    entries[(i, j)] = float(2.0 * t * rect.lambda_off[v][r, s])
    for e, (p, q) in enumerate(mrf.edges):
        mat = mrf.pairwise[e]
        for r in range(mrf.label_counts[p]):
            for s in range(mrf.label_counts[q]):
                i, j = int(base[p] + r), int(base[q] + s)
                if i > j:
                    i, j = j, i
                entries[(i, j)] = float(mat[r, s])

    offset = float(t * rect.chi.sum())
    return QuboInstance(int(base[-1]), entries, var_meta=var_meta, offset=offset)


def decode(q: QuboInstance, x) -> tuple[np.ndarray, np.ndarray]:
    """Decode a sampled bitstring into a labelling, repairing violations.

    Per vertex: exactly one set bit selects that label; several set bits
    select the lowest label index among them; no set bit falls back to
    label 0.  Returns ``(labelling, feasible)`` where ``feasible[v]`` is
    True only for exact one-hot vertices.
    """
    if q.var_meta is None:
        raise ValueError("QUBO has no (vertex, label) metadata to decode with")
    x = np.asarray(x)
    if x.shape != (q.n,):
        raise ValueError(f"bitstring has shape {x.shape}, expected ({q.n},)")

    nv = max(v for v, _ in q.var_meta) + 1 if q.n else 0
    labels = np.zeros(nv, dtype=np.int64)
    counts = np.zeros(nv, dtype=np.int64)
    chosen = np.full(nv, -1, dtype=np.int64)
    for i, (v, l) in enumerate(q.var_meta):
        if x[i]:
            counts[v] += 1
            if chosen[v] < 0 or l < chosen[v]:
                chosen[v] = l
    feasible = counts == 1
    labels[chosen >= 0] = chosen[chosen >= 0]
    return labels, feasible


def verify_feasible_optimum(mrf: MarkovRandomField, q: QuboInstance, x) -> bool:
    """True iff ``x`` sets exactly one label bit for every vertex."""
    _, feasible = decode(q, x)
    return bool(feasible.all()) and len(feasible) == mrf.num_vertices


def feasible_bitstring(q: QuboInstance, lab) -> np.ndarray:
    """One-hot bitstring for a labelling (inverse of a feasible decode)."""
    if q.var_meta is None:
        raise ValueError("QUBO has no (vertex, label) metadata")
    lab = np.asarray(lab, dtype=np.int64)
    x = np.zeros(q.n, dtype=np.uint8)
    for i, (v, l) in enumerate(q.var_meta):
        if lab[v] == l:
            x[i] = 1
    return x


def chain_strength(q: QuboInstance) -> float:
    """Coupling magnitude for binding hardware qubit chains.

    ``C = 1.414 * R * sqrt(D)`` with ``R`` the population standard
    deviation of the stored off-diagonal coefficients and ``D`` the
    average degree of the problem graph (isolated variables excluded).
    """
    off = np.array([w for (i, j), w in q.entries.items() if i != j])
    if off.size == 0:
        raise UndefinedStatisticError("no off-diagonal entries")
    nodes = set()
    for i, j in q.entries:
        nodes.add(i)
        nodes.add(j)
    degree = 2.0 * off.size / len(nodes)
    return float(1.414 * off.std() * np.sqrt(degree))


# --- file format -------------------------------------------------------------
#
# Sparse QUBO interchange text: comment lines start with 'c' (or '#'), one
# header `p qubo 0 <maxnode> <ndiag> <noffdiag>`, then the stored diagonal
# entries `<i> <i> <w>` and couplers `<i> <j> <w>` with i < j.  A JSON
# sidecar `<path>.meta.json` carries the offset and variable metadata.


def write_qubo_file(q: QuboInstance, path, comment: str | None = None) -> None:
    diag = [(i, w) for (i, j), w in q.entries.items() if i == j]
    coup = [((i, j), w) for (i, j), w in q.entries.items() if i != j]
    diag.sort()
    coup.sort()
    lines = []
    if comment:
        lines.append(f"c {comment}")
    lines.append(f"p qubo 0 {q.n} {len(diag)} {len(coup)}")
    for i, w in diag:
        lines.append(f"{i} {i} {w!r}")
    for (i, j), w in coup:
        lines.append(f"{i} {j} {w!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    meta = {
        "n": q.n,
        "offset": q.offset,
        "var_meta": [list(p) for p in q.var_meta] if q.var_meta is not None else None,
    }
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def read_qubo_file(path) -> QuboInstance:
    rows = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            body = line.strip()
            if not body or body.startswith("c") or body.startswith("#"):
                continue
            if body.startswith("p"):
                if header is not None:
                    raise ParseError("repeated problem header")
                header = body.split()
                continue
            rows.append(body.split())
    if header is None:
        raise ParseError("missing 'p qubo' header")
    if len(header) != 6 or header[1] != "qubo":
        raise ParseError(f"bad problem header: {' '.join(header)}")
    try:
        n, ndiag, noff = int(header[3]), int(header[4]), int(header[5])
    except ValueError:
        raise ParseError(f"bad problem header: {' '.join(header)}") from None

    entries: dict[tuple[int, int], float] = {}
    seen_diag = seen_off = 0
    for row in rows:
        if len(row) != 3:
            raise ParseError(f"bad entry line: {' '.join(row)}")
        try:
            i, j, w = int(row[0]), int(row[1]), float(row[2])
        except ValueError:
            raise ParseError(f"bad entry line: {' '.join(row)}") from None
        if i > j:
            raise ParseError(f"coupler ({i}, {j}) not in i <= j form")
        if (i, j) in entries:
            raise ParseError(f"duplicate entry ({i}, {j})")
        entries[(i, j)] = w
        if i == j:
            seen_diag += 1
        else:
            seen_off += 1
    if seen_diag != ndiag or seen_off != noff:
        raise ParseError(
            f"header declares {ndiag}+{noff} entries, file has {seen_diag}+{seen_off}"
        )

    offset = 0.0
    var_meta = None
    try:
        with open(str(path) + ".meta.json", "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        offset = float(meta.get("offset", 0.0))
        if meta.get("var_meta") is not None:
            var_meta = [tuple(p) for p in meta["var_meta"]]
    except FileNotFoundError:
        pass
    return QuboInstance(n, entries, var_meta=var_meta, offset=offset)
