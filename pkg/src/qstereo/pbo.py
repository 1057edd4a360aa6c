"""Binary (log) label encoding into pseudo-Boolean polynomials.

The alternative to one-hot: vertex ``v`` gets ``ceil(log2 L_v)`` bits
whose unsigned value (most significant bit first) selects the label.
Label spaces are padded to the next power of two by duplicating the
last label, so every code decodes.  No rectifiers are needed, but the
energy becomes a multilinear polynomial of degree up to the total bit
count of an edge's endpoints, which must then be reduced to quadratic
form with auxiliary variables before a QUBO solver can touch it.

Per edge the encoded function is

    f(l_p, l_q) = unary[p][l_p]/deg(p) + pairwise[p,q][l_p, l_q]
                  + unary[q][l_q]/deg(q),

so that summing f over all edges reproduces the MRF energy.  The
coefficient of the monomial selected by bit patterns ``(sp, sq)`` is the
inclusion-exclusion sum over sub-patterns

    a[sp, sq] = sum_{sp' <= sp, sq' <= sq}
                (-1)^(popcount(sp sq) - popcount(sp' sq')) f(sp', sq').

Degree-0 vertices would divide by zero above; their unary cost is added
as a standalone per-vertex polynomial instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mrf import MarkovRandomField
from .onehot import QuboInstance

COEFFICIENT_DROP_TOL = 1e-12


@dataclass
class PseudoBooleanPolynomial:
    """Multilinear polynomial over binary variables.

    ``terms`` maps sorted variable-index tuples to coefficients; the
    empty tuple keys the constant.  Variables ``>= original_n`` are
    auxiliaries introduced by quadratization.
    """

    n: int
    terms: dict[tuple[int, ...], float] = field(default_factory=dict)
    original_n: int = 0

    def add_term(self, variables, coefficient: float) -> None:
        key = tuple(sorted(int(v) for v in variables))
        if len(set(key)) != len(key):
            raise ValueError(f"repeated variable in term {key}")
        if key and key[-1] >= self.n:
            raise ValueError(f"variable {key[-1]} out of range")
        self.terms[key] = self.terms.get(key, 0.0) + float(coefficient)

    def drop_small_terms(self, tol: float = COEFFICIENT_DROP_TOL) -> None:
        self.terms = {k: c for k, c in self.terms.items() if abs(c) > tol}

    def degree(self) -> int:
        return max((len(k) for k in self.terms), default=0)

    def evaluate(self, x) -> float:
        x = np.asarray(x)
        total = 0.0
        for key, coef in sorted(self.terms.items()):
            if all(x[v] for v in key):
                total += coef
        return float(total)


def bits_per_vertex(mrf: MarkovRandomField) -> list[int]:
    return [int(np.ceil(np.log2(c))) if c > 1 else 0 for c in mrf.label_counts]


def _bit_base(bits: list[int]) -> list[int]:
    base = [0]
    for b in bits:
        base.append(base[-1] + b)
    return base


def _code_vars(code: int, nbits: int, first_var: int) -> tuple[int, ...]:
    """Variables of the monomial selected by a bit pattern (MSB first)."""
    return tuple(
        first_var + i for i in range(nbits) if (code >> (nbits - 1 - i)) & 1
    )


def _subsets(mask: int):
    """All submasks of ``mask``, including 0 and mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def _mobius_accumulate(poly, grid, nbits_p, nbits_q, first_p, first_q):
    """Add the polynomial representing ``grid[sp, sq]`` over the bits of
    two vertices (``nbits_q`` may be 0 for a single-vertex function)."""
    popcount = [bin(c).count("1") for c in range(1 << max(nbits_p, nbits_q, 1))]
    for sp in range(1 << nbits_p):
        for sq in range(1 << nbits_q):
            k = popcount[sp] + popcount[sq]
            coef = 0.0
            for sp2 in _subsets(sp):
                for sq2 in _subsets(sq):
                    sign = 1.0 if (k - popcount[sp2] - popcount[sq2]) % 2 == 0 else -1.0
                    coef += sign * grid[sp2, sq2]
            variables = _code_vars(sp, nbits_p, first_p) + _code_vars(
                sq, nbits_q, first_q
            )
            poly.add_term(variables, coef)


def encode_binary(mrf: MarkovRandomField) -> PseudoBooleanPolynomial:
    """Encode MAP inference as a high-order pseudo-Boolean polynomial.

    Evaluating the result at any bit assignment equals the MRF energy of
    the decoded labelling (padding codes map to the last label).
    """
    bits = bits_per_vertex(mrf)
    base = _bit_base(bits)
    deg = mrf.degrees()
    poly = PseudoBooleanPolynomial(n=base[-1], original_n=base[-1])

    def label_of(v: int, code: int) -> int:
        return min(code, mrf.label_counts[v] - 1)

    for e, (p, q) in enumerate(mrf.edges):
        bp, bq = bits[p], bits[q]
        grid = np.empty((1 << bp, 1 << bq), dtype=np.float64)
        for sp in range(1 << bp):
            for sq in range(1 << bq):
                grid[sp, sq] = (
                    mrf.unary[p][label_of(p, sp)] / deg[p]
                    + mrf.pairwise[e][label_of(p, sp), label_of(q, sq)]
                    + mrf.unary[q][label_of(q, sq)] / deg[q]
                )
        _mobius_accumulate(poly, grid, bp, bq, base[p], base[q])

    for v in range(mrf.num_vertices):
        if deg[v] == 0:
            bv = bits[v]
            grid = np.empty((1 << bv, 1), dtype=np.float64)
            for sv in range(1 << bv):
                grid[sv, 0] = mrf.unary[v][label_of(v, sv)]
            _mobius_accumulate(poly, grid, bv, 0, base[v], 0)

    poly.drop_small_terms()
    return poly


def decode_binary(mrf: MarkovRandomField, x) -> np.ndarray:
    """Read each vertex's bit group (MSB first) as an unsigned label code;
    padding codes collapse to the last real label.  Auxiliary bits past
    the original count are ignored."""
    bits = bits_per_vertex(mrf)
    base = _bit_base(bits)
    x = np.asarray(x)
    if x.shape[0] < base[-1]:
        raise ValueError(
            f"bitstring has {x.shape[0]} bits, encoding needs {base[-1]}"
        )
    lab = np.zeros(mrf.num_vertices, dtype=np.int64)
    for v in range(mrf.num_vertices):
        code = 0
        for i in range(bits[v]):
            code = (code << 1) | int(x[base[v] + i])
        lab[v] = min(code, mrf.label_counts[v] - 1)
    return lab


def quadratize(poly: PseudoBooleanPolynomial) -> PseudoBooleanPolynomial:
    """Reduce every term of degree > 2 to quadratic form.

    A negative term ``a * x_1 ... x_k`` becomes ``a * w * (S1 - (k-1))``
    with one auxiliary ``w`` and ``S1 = sum x_i``.  A positive term is
    replaced by ``a * (sum_i w_i (c_ik (-S1 + 2i) - 1) + S2)`` over
    ``floor((k-1)/2)`` auxiliaries, where ``S2 = S1 (S1 - 1) / 2`` and
    ``c_ik`` is 1 for the last auxiliary of odd ``k`` and 2 otherwise.
    Minimizing over the auxiliaries recovers the original term's value
    for every assignment of the original variables.
    """
    high = sorted(k for k in poly.terms if len(k) > 2)
    out = PseudoBooleanPolynomial(
        n=poly.n, terms=dict(poly.terms), original_n=poly.original_n
    )
    if not high:
        return out

    next_aux = poly.n
    for key in high:
        a = out.terms.pop(key)
        k = len(key)
        if a < 0:
            w = next_aux
            next_aux += 1
            out.n = next_aux
            out.add_term((w,), -a * (k - 1))
            for v in key:
                out.add_term((v, w), a)
        else:
            n_aux = (k - 1) // 2
            for i in range(1, n_aux + 1):
                w = next_aux
                next_aux += 1
                out.n = next_aux
                c = 1.0 if (k % 2 == 1 and i == n_aux) else 2.0
                out.add_term((w,), a * (2.0 * i * c - 1.0))
                for v in key:
                    out.add_term((v, w), -a * c)
            for vi in range(k):
                for vj in range(vi + 1, k):
                    out.add_term((key[vi], key[vj]), a)
    out.terms = {k: c for k, c in out.terms.items() if c != 0.0}
    return out


def pbo_to_qubo(poly: PseudoBooleanPolynomial) -> QuboInstance:
    """Degree <= 2 polynomial to a QUBO; the constant becomes the offset."""
    if poly.degree() > 2:
        raise ValueError(f"polynomial has degree {poly.degree()}, expected <= 2")
    entries: dict[tuple[int, int], float] = {}
    offset = 0.0
    for key, coef in poly.terms.items():
        if coef == 0.0:
            continue
        if len(key) == 0:
            offset += coef
        elif len(key) == 1:
            entries[(key[0], key[0])] = entries.get((key[0], key[0]), 0.0) + coef
        else:
            entries[key] = entries.get(key, 0.0) + coef
    return QuboInstance(poly.n, entries, var_meta=None, offset=offset)


def dump_polynomial(poly: PseudoBooleanPolynomial) -> str:
    """Debug listing, one `coefficient : i,j,k` line per term."""
    lines = []
    for key, coef in sorted(poly.terms.items()):
        lines.append(f"{coef!r} : {','.join(str(v) for v in key)}")
    return "\n".join(lines) + ("\n" if lines else "")
