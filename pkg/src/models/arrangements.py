"""
Arrangement Model - hyperplane arrangements, the double covers branched along
them, the Cynk-Hulek subset scan and the projective automorphism group.
"""
import hashlib
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations
from math import gcd, isqrt
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import Matrix, Rational

from config.config import config
from src.utils.errors import DataError, DomainError, MissingDataError
from src.models.ffcore import FieldCtx

Form = Tuple[int, ...]
Perm = Tuple[int, ...]


def _normalize_form(coeffs: Sequence[int]) -> Tuple[Form, int]:
    """Return (primitive form with first nonzero entry positive, scalar s) with coeffs = s * form."""
    content = 0
    for c in coeffs:
        content = gcd(content, int(c))
    if content == 0:
        raise DataError("zero linear form in arrangement")
    lead = next(c for c in coeffs if c != 0)
    scale = content if lead > 0 else -content
    return tuple(int(c) // scale for c in coeffs), scale


class Arrangement:
    """
    A finite set of hyperplanes in P^dim, stored as normalized integer forms.

    Args:
        forms: integer coefficient vectors of length dim + 1
        dim: ambient projective dimension (inferred from the forms if omitted)
    """

    def __init__(self, forms: Sequence[Sequence[int]], dim: Optional[int] = None):
        if not forms:
            raise DataError("an arrangement needs at least one form")
        width = len(forms[0])
        if dim is None:
            dim = width - 1
        if any(len(f) != dim + 1 for f in forms):
            raise DataError(f"every form must have {dim + 1} coefficients")

        normalized = []
        unit = Fraction(1)
        for f in forms:
            form, scale = _normalize_form(f)
            normalized.append(form)
            unit *= scale

        seen = {}
        for i, form in enumerate(normalized):
            if form in seen:
                raise DataError(f"forms {seen[form]} and {i} are proportional")
            seen[form] = i

        self.dim = dim
        self.forms: List[Form] = normalized
        # product of the input forms = unit * product of the normalized forms
        self.unit = unit

    def __len__(self):
        return len(self.forms)

    def __repr__(self):
        return f"Arrangement(dim={self.dim}, forms={len(self.forms)})"

    def forms_mod(self, ctx: FieldCtx) -> np.ndarray:
        return np.array(self.forms, dtype=np.int64) % ctx.p


class DoubleCoverSpec:
    """
    The double cover t^2 = twist * prod(forms) over the arrangement's ambient space.

    weights lists the weight of t followed by the weights of the x coordinates;
    by default t has weight #forms/2 and every x_i weight 1.
    """

    def __init__(self, arrangement: Arrangement, twist=1, weights: Optional[Sequence[int]] = None,
                 name: str = "cover"):
        twist = Fraction(twist)
        if twist == 0:
            raise DomainError(f"{name}: twist constant must be nonzero")
        if weights is None and len(arrangement) % 2 == 0:
            weights = [len(arrangement) // 2] + [1] * (arrangement.dim + 1)
        if weights is not None:
            weights = [int(w) for w in weights]
            if len(weights) != arrangement.dim + 2:
                raise DataError(f"{name}: expected {arrangement.dim + 2} weights, got {len(weights)}")
            if any(w != 1 for w in weights[1:]) or 2 * weights[0] != len(arrangement):
                raise DataError(f"{name}: weights {weights} do not make t^2 = c*prod(forms) homogeneous")
        self.arrangement = arrangement
        self.twist = twist
        self.weights = weights
        self.name = name

    def __repr__(self):
        return f"DoubleCoverSpec({self.name!r}, dim={self.dim}, forms={len(self.arrangement)}, twist={self.twist})"

    @property
    def dim(self) -> int:
        return self.arrangement.dim

    @property
    def forms(self) -> List[Form]:
        return self.arrangement.forms

    @property
    def branch_constant(self) -> Fraction:
        """Constant c with t^2 = c * prod(normalized forms)."""
        return self.twist * self.arrangement.unit

    @property
    def even_degree(self) -> bool:
        return len(self.arrangement) % 2 == 0

    @property
    def fingerprint(self) -> str:
        """sha256 over dimension, sorted forms, branch constant and weights; the name is not part of it."""
        doc = {
            'dim': self.dim,
            'forms': sorted(list(f) for f in self.forms),
            'constant': str(self.branch_constant),
            'weights': self.weights,
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode('utf-8')).hexdigest()

    def constant_mod(self, ctx: FieldCtx) -> int:
        c = ctx.reduce(self.branch_constant)
        if c == 0:
            raise DomainError(f"{self.name}: twist vanishes modulo p={ctx.p}")
        return c

    def with_twist(self, factor) -> 'DoubleCoverSpec':
        """Same arrangement, twist multiplied by factor."""
        return DoubleCoverSpec(self.arrangement, self.twist * Fraction(factor), self.weights, self.name)


# --- loading -----------------------------------------------------------------

def _coefficient(value, lam: Optional[int], where: str):
    """An integer, or a polynomial in lambda written as [c0, c1, ...]."""
    if isinstance(value, bool):
        raise DataError(f"{where}: booleans are not coefficients")
    if isinstance(value, int):
        return value
    if isinstance(value, list) and all(isinstance(c, int) and not isinstance(c, bool) for c in value):
        if lam is None:
            raise DataError(f"{where}: template coefficient needs a value for lambda")
        return sum(c * lam ** k for k, c in enumerate(value))
    raise DataError(f"{where}: malformed coefficient {value!r}")


def is_template(doc: Dict) -> bool:
    """True when the twist or a coefficient is a polynomial in lambda."""
    twist = doc.get('twist', {})
    values = [twist.get('num'), twist.get('den')] + [c for row in doc.get('forms', []) for c in row]
    return any(isinstance(v, list) for v in values)


def load_arrangement(text: str, lam: Optional[int] = None) -> DoubleCoverSpec:
    """
    Parse an arrangement document.

    Args:
        text: JSON document {"name", "dim", "weights"?, "twist": {"num", "den"}, "forms"}
        lam: value substituted for lambda in template coefficients

    Returns:
        validated DoubleCoverSpec
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataError(f"arrangement document is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise DataError("arrangement document must be a JSON object")

    name = doc.get('name', 'cover')
    for key in ('dim', 'twist', 'forms'):
        if key not in doc:
            raise DataError(f"{name}: missing field {key!r}")
    dim = doc['dim']
    if not isinstance(dim, int) or dim < 0:
        raise DataError(f"{name}: dim must be a nonnegative integer")
    twist = doc['twist']
    if not isinstance(twist, dict) or 'num' not in twist:
        raise DataError(f"{name}: twist must be {{'num': ..., 'den': ...}}")
    num = _coefficient(twist['num'], lam, f"{name}.twist.num")
    den = _coefficient(twist.get('den', 1), lam, f"{name}.twist.den")
    if den == 0:
        raise DomainError(f"{name}: twist denominator vanishes")
    if num == 0:
        raise DomainError(f"{name}: twist vanishes for lambda={lam}")

    forms = doc['forms']
    if not isinstance(forms, list) or not all(isinstance(row, list) for row in forms):
        raise DataError(f"{name}: forms must be a list of coefficient lists")
    rows = [[_coefficient(c, lam, f"{name}.forms[{i}]") for c in row] for i, row in enumerate(forms)]
    if any(len(row) != dim + 1 for row in rows):
        raise DataError(f"{name}: every form needs dim + 1 = {dim + 1} coefficients")

    weights = doc.get('weights')
    if weights is None and len(rows) % 2 == 1:
        raise DataError(f"{name}: odd number of forms ({len(rows)}) without explicit weights")

    return DoubleCoverSpec(Arrangement(rows, dim), Fraction(num, den), weights, name)


def dump_arrangement(spec: DoubleCoverSpec) -> str:
    """Serialize a spec in normalized form; load_arrangement(dump_arrangement(s)) describes the same cover."""
    c = spec.branch_constant
    doc = {
        'name': spec.name,
        'dim': spec.dim,
        'twist': {'num': c.numerator, 'den': c.denominator},
        'forms': [list(f) for f in spec.forms],
    }
    if spec.weights is not None:
        doc['weights'] = spec.weights
    return json.dumps(doc)


def data_path(key_or_path: str, data_dir: Optional[str] = None) -> str:
    """Resolve a bundled data key (see Config.DATA_FILES) or a file path."""
    data_dir = data_dir or config.DATA_DIR
    if key_or_path in config.DATA_FILES:
        return os.path.join(data_dir, config.DATA_FILES[key_or_path])
    if not os.path.isabs(key_or_path) and not os.path.exists(key_or_path):
        return os.path.join(data_dir, key_or_path)
    return key_or_path


def load_arrangement_file(key_or_path: str, lam: Optional[int] = None,
                          data_dir: Optional[str] = None) -> DoubleCoverSpec:
    path = data_path(key_or_path, data_dir)
    if not os.path.exists(path):
        raise MissingDataError(f"arrangement file not found: {path}")
    with open(path, encoding='utf-8') as fh:
        return load_arrangement(fh.read(), lam=lam)


# --- Cynk-Hulek criterion ----------------------------------------------------

@dataclass
class SubsetReport:
    """One flat of the arrangement and its Cynk-Hulek verdict."""
    subset: Tuple[int, ...]
    rank: int
    intersection_dim: int
    near_pencil: bool
    ch_ok: bool
    point: Optional[Tuple[int, ...]] = None


def _reduce_against(basis, vector):
    """Reduce vector by an echelon basis of (pivot, row) pairs; None if it lies in the span."""
    v = [Fraction(x) for x in vector]
    for pivot, row in basis:
        if v[pivot] != 0:
            f = v[pivot]
            v = [a - f * b for a, b in zip(v, row)]
    pivot = next((i for i, x in enumerate(v) if x != 0), None)
    if pivot is None:
        return None
    lead = v[pivot]
    return pivot, [x / lead for x in v]


def subset_ranks(forms: Sequence[Form]) -> List[int]:
    """Exact rational rank of every subset of forms, indexed by bitmask."""
    m = len(forms)
    ranks = [0] * (1 << m)
    bases = [()] * (1 << m)
    for mask in range(1, 1 << m):
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        extra = _reduce_against(bases[rest], forms[i])
        if extra is None:
            bases[mask] = bases[rest]
            ranks[mask] = ranks[rest]
        else:
            bases[mask] = bases[rest] + (extra,)
            ranks[mask] = ranks[rest] + 1
    return ranks


def _intersection_point(forms: Sequence[Form]) -> Tuple[int, ...]:
    kernel = Matrix([list(f) for f in forms]).nullspace()[0]
    den = 1
    for x in kernel:
        den = den * Rational(x).q // gcd(den, Rational(x).q)
    ints = [int(x * den) for x in kernel]
    content = 0
    for x in ints:
        content = gcd(content, x)
    ints = [x // content for x in ints]
    last = next(x for x in reversed(ints) if x != 0)
    if last < 0:
        ints = [-x for x in ints]
    return tuple(ints)


def cynk_hulek_report(spec: DoubleCoverSpec) -> List[SubsetReport]:
    """
    Scan every flat of the arrangement (closed subsets with nonempty intersection).

    A subset S is reported when adding any further form drops the intersection.
    ch_ok holds if the intersection is a near-pencil or floor(#S/2) = codim - 1.

    Args:
        spec: double cover over P^n, n <= CH_MAX_DIM, at most CH_MAX_FORMS forms

    Returns:
        list of SubsetReport ordered by bitmask
    """
    forms = spec.forms
    n, m = spec.dim, len(forms)
    if m > config.CH_MAX_FORMS or n > config.CH_MAX_DIM:
        raise DomainError(f"{spec.name}: subset scan limited to {config.CH_MAX_FORMS} forms in P^{config.CH_MAX_DIM}")

    ranks = subset_ranks(forms)
    reports = []
    for mask in range(1, 1 << m):
        r = ranks[mask]
        if r == n + 1:
            continue
        if any(not mask >> i & 1 and ranks[mask | 1 << i] == r for i in range(m)):
            continue
        members = tuple(i for i in range(m) if mask >> i & 1)
        near_pencil = len(members) <= 2 or any(ranks[mask & ~(1 << i)] < r for i in members)
        ch_ok = near_pencil or len(members) // 2 == r - 1
        point = _intersection_point([forms[i] for i in members]) if r == n else None
        reports.append(SubsetReport(members, r, n - r, near_pencil, ch_ok, point))
    return reports


def ch_failures(reports: List[SubsetReport]) -> List[SubsetReport]:
    """Flats violating the Cynk-Hulek condition."""
    return [r for r in reports if not r.ch_ok]


# --- projective automorphisms ------------------------------------------------

def _inverse_mod(m: List[List[int]], q: int) -> Optional[List[List[int]]]:
    """Gauss-Jordan inverse of a square matrix modulo a prime q; None if singular."""
    k = len(m)
    aug = [[x % q for x in row] + [int(i == j) for j in range(k)] for i, row in enumerate(m)]
    for c in range(k):
        pivot = next((i for i in range(c, k) if aug[i][c]), None)
        if pivot is None:
            return None
        aug[c], aug[pivot] = aug[pivot], aug[c]
        inv = pow(aug[c][c], q - 2, q)
        aug[c] = [x * inv % q for x in aug[c]]
        for i in range(k):
            if i != c and aug[i][c]:
                f = aug[i][c]
                aug[i] = [(a - f * b) % q for a, b in zip(aug[i], aug[c])]
    return [row[k:] for row in aug]


def _matvec(m, v, q):
    return [sum(a * b for a, b in zip(row, v)) % q for row in m]


def _normalize_mod(v, q) -> Tuple[int, ...]:
    lead = next(x for x in v if x % q)
    inv = pow(lead, q - 2, q)
    return tuple(x * inv % q for x in v)


def _frame_matrix_mod(points, q):
    """A with A e_i ~ points[i] (i <= n) and A (1,...,1) = points[n+1]; None if not a frame."""
    k = len(points) - 1
    cols = [[points[j][i] for j in range(k)] for i in range(k)]
    inv = _inverse_mod(cols, q)
    if inv is None:
        return None
    lam = _matvec(inv, points[k], q)
    if any(x == 0 for x in lam):
        return None
    return [[cols[i][j] * lam[j] % q for j in range(k)] for i in range(k)]


def _frame_matrix_exact(points) -> Matrix:
    k = len(points) - 1
    cols = Matrix([[points[j][i] for j in range(k)] for i in range(k)])
    lam = cols.LUsolve(Matrix(points[k]))
    return cols * Matrix.diag(*lam)


def _normalize_exact(m: Matrix) -> Matrix:
    lead = next(x for x in m if x != 0)
    return m / lead


def matrix_entries(m: Matrix) -> List[List]:
    """Row-major entries, as ints where integral and as strings otherwise."""
    return [[int(x) if x.is_integer else str(x) for x in m.row(i)] for i in range(m.rows)]


@dataclass
class AutomorphismGroup:
    """
    Projective automorphisms of an arrangement.

    elements holds normalized matrices M (first nonzero entry 1) acting on x;
    perms[k][i] = j means f_i(M x) is a multiple of f_j(x); scalars[k] is the
    factor by which prod(forms) pulls back under elements[k].
    """
    name: str
    elements: List[Matrix]
    perms: List[Perm]
    scalars: List[Rational]
    forms: List[Form] = field(default_factory=list)
    generators: List[int] = field(default_factory=list)

    @property
    def pgl_order(self) -> int:
        return len(self.elements)

    @property
    def cover_order(self) -> int:
        """Automorphisms of the double cover: each lifting element contributes itself and its deck composite."""
        return 2 * sum(1 for s in self.scalars if is_rational_square(s))

    @property
    def identity(self) -> Perm:
        return tuple(range(len(self.perms[0])))

    def index_of(self, perm: Perm) -> int:
        return self.perms.index(tuple(perm))

    def compose(self, a: Perm, b: Perm) -> Perm:
        """Permutation of M_a M_b."""
        return tuple(b[a[i]] for i in range(len(a)))

    def inverse(self, a: Perm) -> Perm:
        inv = [0] * len(a)
        for i, j in enumerate(a):
            inv[j] = i
        return tuple(inv)

    def is_closed(self) -> bool:
        table = set(self.perms)
        return all(self.compose(a, b) in table for a in self.perms for b in self.perms) and \
            all(self.inverse(a) in table for a in self.perms)

    def center(self) -> List[Perm]:
        return [z for z in self.perms if all(self.compose(z, g) == self.compose(g, z) for g in self.perms)]

    def quotient_exponent(self) -> int:
        """Exponent of G/Z."""
        center = set(self.center())
        exponent = 1
        for g in self.perms:
            power, k = g, 1
            while power not in center:
                power = self.compose(power, g)
                k += 1
            exponent = exponent * k // gcd(exponent, k)
        return exponent

    def quotient_is_abelian(self) -> bool:
        center = set(self.center())
        return all(
            self.compose(self.compose(g, h), self.inverse(self.compose(h, g))) in center
            for g in self.perms for h in self.perms
        )

    def orbits(self) -> List[List[int]]:
        """Orbits of the group on form indices, sorted."""
        seen, orbits = set(), []
        for i in range(len(self.identity)):
            if i in seen:
                continue
            orbit = sorted({g[i] for g in self.perms})
            seen.update(orbit)
            orbits.append(orbit)
        return orbits

    def is_conjugate(self, a: Perm, b: Perm) -> bool:
        return any(self.compose(self.compose(self.inverse(k), a), k) == tuple(b) for k in self.perms)

    def permutation_of(self, matrix) -> Perm:
        """Permutation induced on the forms by an integer matrix; DomainError if it is not an automorphism."""
        perm, _ = action_on_forms(self.forms, Matrix(matrix))
        if perm is None:
            raise DomainError(f"{self.name}: matrix does not permute the arrangement")
        return perm

    def summary(self) -> Dict:
        center = self.center()
        return {
            'name': self.name,
            'pgl_order': self.pgl_order,
            'cover_order': self.cover_order,
            'center_order': len(center),
            'quotient_order': self.pgl_order // len(center),
            'quotient_exponent': self.quotient_exponent(),
            'quotient_abelian': self.quotient_is_abelian(),
            'orbits': self.orbits(),
            'generators': [matrix_entries(self.elements[g]) for g in self.generators],
        }


def is_rational_square(x) -> bool:
    x = Rational(x)
    if x < 0:
        return False
    p, q = int(x.p), int(x.q)
    return isqrt(p) ** 2 == p and isqrt(q) ** 2 == q


def action_on_forms(forms: Sequence[Form], m: Matrix):
    """(perm, pullback scalar of prod forms) for x -> M x, or (None, None)."""
    index = {f: i for i, f in enumerate(forms)}
    perm, scalar = [], Rational(1)
    for f in forms:
        pulled = Matrix([list(f)]) * m
        lead = next((x for x in pulled if x != 0), None)
        if lead is None:
            return None, None
        den = 1
        for x in pulled:
            den = den * int(Rational(x).q) // gcd(den, int(Rational(x).q))
        ints = [int(x * den) for x in pulled]
        normalized, s = _normalize_form(ints)
        if normalized not in index:
            return None, None
        perm.append(index[normalized])
        scalar *= Rational(s, den)
    return tuple(perm), scalar


def _generators(group: AutomorphismGroup) -> List[int]:
    identity = group.identity
    span = {identity}
    gens = []
    for k, g in enumerate(group.perms):
        if g in span:
            continue
        gens.append(k)
        frontier = list(span)
        span = set(span)
        while frontier:
            nxt = []
            for a in frontier:
                for j in gens:
                    b = group.compose(a, group.perms[j])
                    if b not in span:
                        span.add(b)
                        nxt.append(b)
            frontier = nxt
    return gens


def automorphism_group(spec: DoubleCoverSpec) -> AutomorphismGroup:
    """
    All projective-linear maps permuting the arrangement, by frame mapping.

    A reference frame F is chosen among the forms (viewed as dual points).
    Every other ordered frame W of forms determines a unique map carrying F to
    W; it is an automorphism exactly when the coordinates of all forms in
    frame W agree, as a set, with their coordinates in frame F. Candidates are
    filtered modulo a large prime and then confirmed in exact arithmetic.
    """
    q = config.AUT_SEARCH_MODULUS
    forms = spec.forms
    n = spec.dim
    k = n + 2

    reference = None
    for combo in combinations(range(len(forms)), k):
        a_ref = _frame_matrix_mod([forms[i] for i in combo], q)
        if a_ref is not None:
            reference = combo
            break
    if reference is None:
        raise DomainError(f"{spec.name}: no projective frame among the forms")

    a_ref_inv = _inverse_mod(a_ref, q)
    ref_coords = [_normalize_mod(_matvec(a_ref_inv, f, q), q) for f in forms]

    # frame change permuting the standard frame e_0, ..., e_n, (1, ..., 1)
    standard = [tuple(int(i == j) for j in range(n + 1)) for i in range(n + 1)] + [tuple([1] * (n + 1))]
    keys: Dict[frozenset, List[Perm]] = {}
    for sigma in permutations(range(k)):
        b_sigma = _frame_matrix_mod([standard[s] for s in sigma], q)
        key = frozenset(_normalize_mod(_matvec(b_sigma, y, q), q) for y in ref_coords)
        keys.setdefault(key, []).append(sigma)

    a_ref_exact_inv = _frame_matrix_exact([forms[i] for i in reference]).inv()
    found: Dict[Tuple, Tuple[Matrix, Perm, Rational]] = {}
    for combo in combinations(range(len(forms)), k):
        a_u = _frame_matrix_mod([forms[i] for i in combo], q)
        if a_u is None:
            continue
        a_u_inv = _inverse_mod(a_u, q)
        key = frozenset(_normalize_mod(_matvec(a_u_inv, f, q), q) for f in forms)
        for sigma in keys.get(key, []):
            frame = [forms[combo[s]] for s in sigma]
            n_exact = _frame_matrix_exact(frame) * a_ref_exact_inv
            m = _normalize_exact(n_exact.T)
            perm, scalar = action_on_forms(forms, m)
            if perm is None:
                continue
            found.setdefault(tuple(m), (m, perm, scalar))

    entries = sorted(found.values(), key=lambda e: e[1])
    identity = tuple(range(len(forms)))
    entries.sort(key=lambda e: e[1] != identity)
    group = AutomorphismGroup(
        name=spec.name,
        elements=[e[0] for e in entries],
        perms=[e[1] for e in entries],
        scalars=[e[2] for e in entries],
        forms=list(forms),
    )
    group.generators = _generators(group)
    return group
