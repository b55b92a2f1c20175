"""Search for magnetic candidates on genus-zero groups.

The candidates live in the space of weakly holomorphic forms whose poles sit
at the cusps and in the orbit of one point tau0, taken modulo Bol images.
Each Fourier index n contributes the congruence ``D * a_n / n^d in Z``; the
integer solutions form a lattice that shrinks as constraints are added, and
the directions that survive every doubling of the constraint count are the
candidates.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import sympy
from sympy import Matrix, Poly, Rational, Symbol, sympify
from sympy.core.intfunc import igcdex
from sympy.polys.domains import ZZ
from sympy.polys.matrices import DomainMatrix

from .catalog import Catalog, default_catalog, load_catalog
from .config import Config, default_config
from .groups import CongruenceSubgroup
from .magnetic import MagneticityReport, check_depth
from .qseries import FourierExpansion, bol_image
from .scalars import DomainError, QuadScalar

logger = logging.getLogger(__name__)

X = Symbol("x")


@dataclass(frozen=True)
class _GroupSetup:
    reference: str
    reference_weight: int
    hauptmodul: str
    at_infinity: str  # "zero" or "pole": behaviour of the hauptmodul at the cusp i*infinity


_SETUPS = {
    "Gamma(2)": _GroupSetup("rho", 2, "lambda", "zero"),
    "Gamma1(6)": _GroupSetup("aleph1", 1, "xi", "pole"),
}


@dataclass
class SearchProblem:
    group: CongruenceSubgroup
    weight: int
    pole: Poly
    depth: int
    denominator_bound: Optional[int] = None
    constraints: Optional[int] = None
    n_max: Optional[int] = None

    def __post_init__(self) -> None:
        if isinstance(self.group, str):
            self.group = CongruenceSubgroup.parse(self.group)
        tag = self.group.tag
        data = self.group.cusp_data()
        if data.genus != 0:
            raise DomainError(f"{tag} has genus {data.genus}; the search needs genus 0")
        if self.group.has_elliptic_points:
            raise DomainError(f"{tag} has elliptic points")
        if tag not in _SETUPS:
            raise DomainError(f"no reference form and hauptmodul known for {tag}")
        if self.weight <= 2:
            raise DomainError("weight must exceed 2")
        if self.depth < 1 or self.depth >= self.weight:
            raise DomainError(f"depth must lie in 1..{self.weight - 1}")
        if isinstance(self.pole, str):
            self.pole = parse_pole(self.pole, _SETUPS[tag].hauptmodul)
        if self.pole.degree() < 1:
            raise DomainError("pole polynomial must be non-constant")

    @property
    def setup(self) -> _GroupSetup:
        return _SETUPS[self.group.tag]

    @property
    def grid(self) -> int:
        return self.group.width

    def describe(self) -> str:
        return (f"{self.group.tag}, k={self.weight}, d={self.depth}, "
                f"poles at {self.setup.hauptmodul} with {self.pole.as_expr()} = 0")

    def to_json(self) -> dict:
        return {
            "group": self.group.tag,
            "weight": self.weight,
            "pole": str(self.pole.as_expr()),
            "depth": self.depth,
            "denominator_bound": self.denominator_bound,
            "constraints": self.constraints,
            "n_max": self.n_max,
        }


def parse_pole(text: str, hauptmodul: str) -> Poly:
    """``"lambda=-1"`` or a polynomial in x such as ``"x**2 - 6*x + 1"``."""

    text = text.strip()
    if "=" in text:
        name, _, value = text.partition("=")
        if name.strip() not in (hauptmodul, "x"):
            raise DomainError(f"pole must be given in terms of {hauptmodul}, got {name.strip()!r}")
        try:
            root = Rational(value.strip())
        except (TypeError, ValueError, sympy.SympifyError) as exc:
            raise DomainError(f"pole value {value!r} is not rational") from exc
        return Poly(X - root, X, domain="QQ")
    try:
        poly = Poly(sympify(text.replace(hauptmodul, "x"), locals={"x": X}), X, domain="QQ")
    except (sympy.SympifyError, sympy.PolynomialError) as exc:
        raise DomainError(f"cannot read pole polynomial {text!r}") from exc
    return poly


@dataclass
class Generator:
    kind: str
    expr: str
    weight: int

    def to_json(self) -> dict:
        return {"kind": self.kind, "expr": self.expr}


@dataclass
class CandidateSolution:
    coefficients: List[Fraction]
    expr: str
    report: MagneticityReport
    catalog_match: Optional[str] = None
    match_factor: Optional[Fraction] = None

    def catalog_block(self, name: str, problem: SearchProblem) -> dict:
        """A block that ``catalog.yaml`` accepts as an entry."""

        return {
            "name": name,
            "group": problem.group.tag,
            "weight": problem.weight,
            "level": problem.group.level,
            "grid": problem.grid,
            "depth": problem.depth,
            "expr": self.expr,
            "hauptmodul": problem.setup.hauptmodul,
            "denominator": str((problem.pole.as_expr() ** (problem.weight - 1))),
        }

    def to_json(self) -> dict:
        return {
            "coefficients": [str(c) for c in self.coefficients],
            "expr": self.expr,
            "magneticity": self.report.to_json(),
            "catalog_match": self.catalog_match,
            "match_factor": None if self.match_factor is None else str(self.match_factor),
        }


# ---------------------------------------------------------------------------
# Basis
# ---------------------------------------------------------------------------


def _render_poly(poly: Poly, name: str) -> str:
    terms = []
    for (e,), c in poly.terms():
        c = Fraction(int(c.p), int(c.q))
        if e == 0:
            terms.append(str(c))
        elif e == 1:
            terms.append(name if c == 1 else f"(mul {c} {name})")
        else:
            terms.append(f"(pow {name} {e})" if c == 1 else f"(mul {c} (pow {name} {e}))")
    return terms[0] if len(terms) == 1 else "(add " + " ".join(terms) + ")"


def _monomial(name: str, a: int) -> Optional[str]:
    if a == 0:
        return None
    return name if a == 1 else f"(pow {name} {a})"


def _product(*factors: Optional[str]) -> str:
    kept = [f for f in factors if f]
    return kept[0] if len(kept) == 1 else "(mul " + " ".join(kept) + ")"


def _reference(problem: SearchProblem, weight: int) -> str:
    setup = problem.setup
    power = Fraction(weight, setup.reference_weight)
    if power.denominator != 1:
        # odd weight on Gamma(2): theta3^2 has weight 1
        return f"(pow theta3 {2 * weight})"
    return f"(pow {setup.reference} {power.numerator})"


def _numerator_ceiling(problem: SearchProblem) -> int:
    # cap on the hauptmodul power so the reference stays holomorphic at its bad cusp
    k = problem.weight
    return k // 2 if problem.setup.at_infinity == "zero" else k


def generator_basis(problem: SearchProblem) -> List[Generator]:
    """Generators with poles in the orbit of tau0 (order <= k-1) or at the cusp at infinity.

    On Gamma(2) the reference form is rho^(k/2) = theta3^(2k) and the
    hauptmodul lambda vanishes at infinity; on Gamma1(6) the reference is
    aleph1^k and xi has a simple pole there.
    """

    k = problem.weight
    setup = problem.setup
    h = setup.hauptmodul
    ref = _reference(problem, k)
    cusp_order = problem.group.dim_cusp_forms(k)
    denominator = f"(pow {_render_poly(problem.pole, h)} {-(k - 1)})"
    generators: List[Generator] = []
    top = problem.pole.degree() * (k - 1) + _numerator_ceiling(problem)
    for a in range(top + 1):
        generators.append(Generator("tau0", _product(ref, _monomial(h, a), denominator), k))
    for j in range(1, cusp_order + 1):
        if setup.at_infinity == "zero":
            extra = _monomial(h, -j)
        else:
            extra = _monomial(h, _numerator_ceiling(problem) + j)
        generators.append(Generator("cusp", _product(ref, extra), k))
    logger.info("%s: %d generators (%d at tau0, cusp order <= %d)",
                problem.describe(), len(generators), top + 1, cusp_order)
    return generators


def bol_generators(problem: SearchProblem) -> List[str]:
    """Weight 2-k forms whose Bol images have poles only at infinity, within the cusp bound."""

    k = problem.weight
    setup = problem.setup
    h = setup.hauptmodul
    bound = problem.group.dim_cusp_forms(k)
    ref = _reference(problem, 2 - k) if k % 2 == 0 or setup.reference_weight == 1 else None
    if ref is None:
        return []
    sources = []
    if setup.at_infinity == "zero":
        # rho^(1-k/2) lambda^a is holomorphic at the cusp lambda = infinity for a <= 1 - k/2
        for a in range(-bound, 1 - k // 2 + 1):
            sources.append(_product(ref, _monomial(h, a)))
    else:
        # aleph1^(2-k) already has a pole of order k-2 at infinity
        for a in range(0, bound - (k - 2) + 1):
            sources.append(_product(ref, _monomial(h, a)))
    return sources


# ---------------------------------------------------------------------------
# Expansions
# ---------------------------------------------------------------------------


def _expand_job(job) -> dict:
    path, text, order, grid = job
    catalog = load_catalog(path)
    return catalog.expand_expr(text, order, grid=grid).to_json()


def expand_generators(texts: Sequence[str], order: int, grid: int, catalog: Catalog,
                      workers: int = 1) -> List[FourierExpansion]:
    if workers <= 1 or len(texts) < 2:
        return [catalog.expand_expr(t, order, grid=grid) for t in texts]
    jobs = [(catalog.path, t, order, grid) for t in texts]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        payloads = list(executor.map(_expand_job, jobs))
    return [FourierExpansion.from_json(p) for p in payloads]


def _rational(value) -> Fraction:
    if isinstance(value, QuadScalar):
        if value.b:
            raise DomainError("generator expansions must have rational coefficients")
        return value.a
    return Fraction(value)


# ---------------------------------------------------------------------------
# Congruences
# ---------------------------------------------------------------------------


@dataclass
class CongruenceSystem:
    """Integer lattice of coefficient vectors meeting every imposed congruence.

    Coefficient vectors in the generator basis are ``kernel @ y`` with ``y``
    ranging over the lattice spanned by the rows of ``lattice``.
    """

    kernel: List[List[Fraction]]
    lattice: List[List[int]]
    indices: List[int] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.lattice)


def _constant_kernel(expansions: Sequence[FourierExpansion]) -> List[List[Fraction]]:
    row = Matrix([[Rational(str(_rational(f.coefficient(0)))) for f in expansions]])
    if all(v == 0 for v in row):
        m = len(expansions)
        return [[Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    columns = []
    for vector in row.nullspace():
        scale = math.lcm(*[int(v.q) for v in vector])
        columns.append([Fraction(int(v * scale)) for v in vector])
    # rows of the transpose: kernel[i][j] is coordinate i of kernel vector j
    return [list(r) for r in zip(*columns)] if columns else []


def _row(expansions: Sequence[FourierExpansion], kernel: List[List[Fraction]], n: int, d: int,
         D: int) -> List[Fraction]:
    values = [_rational(f.coefficient(n)) for f in expansions]
    width = len(kernel[0]) if kernel else 0
    # a_n / n^d is taken with the integer index n on the expansion grid
    scale = Fraction(D) / Fraction(n) ** d
    return [scale * sum(values[i] * kernel[i][j] for i in range(len(values))) for j in range(width)]


def _impose(lattice: List[List[int]], row: Sequence[Fraction]) -> List[List[int]]:
    """Sublattice of vectors y with row . y integral."""

    modulus = 1
    for c in row:
        modulus = modulus * c.denominator // math.gcd(modulus, c.denominator)
    if modulus == 1:
        return lattice
    weights = [int(c * modulus) for c in row]
    basis = [list(b) for b in lattice]
    values = [sum(w * x for w, x in zip(weights, b)) % modulus for b in basis]
    pivot = next((i for i, v in enumerate(values) if v), None)
    if pivot is None:
        return basis
    basis[0], basis[pivot] = basis[pivot], basis[0]
    values[0], values[pivot] = values[pivot], values[0]
    for j in range(1, len(basis)):
        if values[j] == 0:
            continue
        s, t, g = igcdex(values[0], values[j])
        u0, uj = values[0] // g, values[j] // g
        first = [s * x + t * y for x, y in zip(basis[0], basis[j])]
        other = [uj * x - u0 * y for x, y in zip(basis[0], basis[j])]
        basis[0], basis[j] = first, other
        values[0], values[j] = g, 0
    factor = modulus // math.gcd(values[0], modulus)
    basis[0] = [factor * x for x in basis[0]]
    return basis


def _reduce(lattice: List[List[int]]) -> List[List[int]]:
    if not lattice:
        return lattice
    size = len(lattice[0])
    matrix = DomainMatrix([[ZZ(x) for x in row] for row in lattice], (len(lattice), size), ZZ)
    reduced = matrix.lll()
    rows = [[int(x) for x in row] for row in reduced.to_list()]
    return sorted(rows, key=lambda r: sum(x * x for x in r))


def _indices(expansions: Sequence[FourierExpansion], upto: int) -> List[int]:
    lowest = min((f.lead for f in expansions if f.lead is not None), default=0)
    return [n for n in range(min(lowest, 0), upto + 1) if n != 0]


def assemble_congruences(expansions: Sequence[FourierExpansion], problem: SearchProblem,
                         count: int, D: int) -> CongruenceSystem:
    """Lattice for ``D * a_n / n^d in Z`` over every index ``n <= count``."""

    kernel = _constant_kernel(expansions)
    width = len(kernel[0]) if kernel else 0
    lattice = [[int(i == j) for j in range(width)] for i in range(width)]
    indices = _indices(expansions, count)
    for position, n in enumerate(indices):
        lattice = _impose(lattice, _row(expansions, kernel, n, problem.depth, D))
        if position % 16 == 15 and max((abs(x) for r in lattice for x in r), default=0).bit_length() > 256:
            lattice = _reduce(lattice)
    return CongruenceSystem(kernel, _reduce(lattice), indices)


def _satisfies(expansions, kernel, y: Sequence[int], indices: Sequence[int], d: int, D: int) -> bool:
    for n in indices:
        row = _row(expansions, kernel, n, d, D)
        if sum(c * v for c, v in zip(row, y)).denominator != 1:
            return False
    return True


def _span_rank(vectors: Sequence[Sequence]) -> int:
    if not vectors:
        return 0
    return Matrix([[Rational(str(x)) for x in v] for v in vectors]).rank()


def _same_span(a: Sequence[Sequence], b: Sequence[Sequence]) -> bool:
    ra, rb = _span_rank(a), _span_rank(b)
    return ra == rb and _span_rank(list(a) + list(b)) == ra


def _survivors(system: CongruenceSystem, expansions, problem: SearchProblem, D: int, upto: int) -> List[List[int]]:
    check = _indices(expansions, upto)
    return [y for y in system.lattice
            if _satisfies(expansions, system.kernel, y, check, problem.depth, D)]


def _coefficients(kernel: List[List[Fraction]], y: Sequence[int]) -> List[Fraction]:
    return [sum((kernel[i][j] * y[j] for j in range(len(y))), Fraction(0)) for i in range(len(kernel))]


# ---------------------------------------------------------------------------
# Solve
# ---------------------------------------------------------------------------


def _combine(generators: Sequence[Generator], coefficients: Sequence[Fraction]) -> str:
    terms = []
    for g, c in zip(generators, coefficients):
        if c == 0:
            continue
        terms.append(g.expr if c == 1 else f"(mul {c} {g.expr})")
    if not terms:
        return "0"
    return terms[0] if len(terms) == 1 else "(add " + " ".join(terms) + ")"


def _linear_combination(expansions: Sequence[FourierExpansion], coefficients: Sequence[Fraction]) -> FourierExpansion:
    result = FourierExpansion.zero(expansions[0].grid, min(f.trunc for f in expansions))
    for f, c in zip(expansions, coefficients):
        if c:
            result = result + f.scale(c)
    return result


def _coordinates(target: FourierExpansion, expansions: Sequence[FourierExpansion]) -> Optional[List[Fraction]]:
    """Exact coordinates of ``target`` in the span of ``expansions``, from their common coefficients."""

    lowest = min(min((f.lead for f in expansions if f.lead is not None), default=0), target.lead or 0)
    top = min(min(f.trunc for f in expansions), target.trunc)
    rows = list(range(lowest, min(top, lowest + 4 * len(expansions) + 64)))
    A = Matrix([[Rational(str(_rational(f.coefficient(n)))) for f in expansions] for n in rows])
    b = Matrix([Rational(str(_rational(target.coefficient(n)))) for n in rows])
    try:
        solution, params = A.gauss_jordan_solve(b)
    except ValueError:
        return None
    solution = solution.subs({p: 0 for p in params})
    coordinates = [Fraction(int(v.p), int(v.q)) for v in solution]
    if not _linear_combination(expansions, coordinates).agrees_with(target.truncate(top)):
        return None
    return coordinates


def _catalog_match(candidate: FourierExpansion, bol_images: Sequence[FourierExpansion], problem: SearchProblem,
                   catalog: Catalog) -> Tuple[Optional[str], Optional[Fraction]]:
    """A catalog entry equal to factor * candidate modulo Bol images."""

    for entry in catalog.entries():
        if entry.group != problem.group or entry.weight != problem.weight:
            continue
        other = catalog.expansion(entry, min(60, max(1, candidate.trunc // problem.grid - 1)))
        if candidate.grid % other.grid:
            continue
        other = other.regrid(candidate.grid)
        factor = _proportional(candidate, other)
        if factor is not None:
            return entry.name, factor
        if not bol_images:
            continue
        coordinates = _coordinates(other, [candidate] + list(bol_images))
        if coordinates is not None and coordinates[0]:
            return entry.name, 1 / coordinates[0]
    return None, None


def _proportional(f: FourierExpansion, g: FourierExpansion) -> Optional[Fraction]:
    if f.grid != g.grid or f.lead is None or g.lead is None or f.lead != g.lead:
        return None
    try:
        factor = _rational(f.coefficient(f.lead)) / _rational(g.coefficient(g.lead))
    except DomainError:
        return None
    top = min(f.trunc, g.trunc)
    for n in range(f.lead, top):
        if _rational(f.coefficient(n)) != factor * _rational(g.coefficient(n)):
            return None
    return factor


def solve_and_verify(system: CongruenceSystem, survivors: Sequence[Sequence[int]],
                     generators: Sequence[Generator], expansions: Sequence[FourierExpansion],
                     bol_coordinates: Sequence[Sequence[Fraction]], problem: SearchProblem,
                     catalog: Catalog, n_max: int) -> List[CandidateSolution]:
    """Survivor directions modulo Bol images, each re-checked by the depth test."""

    solutions: List[CandidateSolution] = []
    spanned: List[List[Fraction]] = [list(v) for v in bol_coordinates]
    bol_images = [_linear_combination(expansions, v) for v in bol_coordinates]
    base_rank = _span_rank(spanned)
    for y in survivors:
        coefficients = _coefficients(system.kernel, y)
        if not any(coefficients):
            continue
        trial = spanned + [coefficients]
        rank = _span_rank(trial)
        if rank == base_rank:
            logger.debug("survivor %s lies in the span of Bol images", y)
            continue
        combination = _linear_combination(expansions, coefficients)
        report = check_depth(combination, problem.depth, n_max)
        if not report.consistent:
            logger.info("survivor %s refuted at n_max = %d: %s", y, n_max, report.witness)
            continue
        spanned, base_rank = trial, rank
        match, factor = _catalog_match(combination, bol_images, problem, catalog)
        solutions.append(CandidateSolution(coefficients, _combine(generators, coefficients), report, match, factor))
    return solutions


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


@dataclass
class SearchResult:
    problem: SearchProblem
    generators: List[Generator]
    solutions: List[CandidateSolution]
    constraint_counts: List[int]
    stable: bool
    denominator_bound: int

    def to_json(self) -> dict:
        return {
            "problem": self.problem.to_json(),
            "generators": [g.to_json() for g in self.generators],
            "constraint_counts": self.constraint_counts,
            "stable": self.stable,
            "denominator_bound": self.denominator_bound,
            "solutions": [s.to_json() for s in self.solutions],
        }


def search(problem: SearchProblem, catalog: Optional[Catalog] = None,
           config: Optional[Config] = None) -> SearchResult:
    catalog = catalog or default_catalog()
    config = config or default_config()
    settings = config.search
    D = problem.denominator_bound or settings.smooth_number
    n_max = problem.n_max or settings.verify_nmax
    generators = generator_basis(problem)
    k = problem.weight
    if k % 2 and problem.group.contains_minus_identity:
        logger.info("%s contains -1: no forms of odd weight %d", problem.group.tag, k)
        return SearchResult(problem, generators, [], [], True, D)

    count = problem.constraints or settings.initial_constraints
    top = max(count, settings.max_constraints)
    order = math.ceil(max(2 * top, n_max) / problem.grid) + 1
    logger.info("expanding %d generators to order %d", len(generators), order)
    expansions = expand_generators([g.expr for g in generators], order, problem.grid, catalog,
                                   config.compute.workers)
    bol_coordinates = []
    bol_texts = bol_generators(problem)
    for image in expand_generators(bol_texts, order, problem.grid, catalog, config.compute.workers):
        coordinates = _coordinates(bol_image(image, k), expansions)
        if coordinates is None:
            logger.debug("a Bol image falls outside the generator span")
            continue
        bol_coordinates.append(coordinates)

    previous: Optional[List[List[Fraction]]] = None
    streak = 0
    counts: List[int] = []
    survivors: List[List[int]] = []
    system: Optional[CongruenceSystem] = None
    stable = False
    while True:
        system = assemble_congruences(expansions, problem, count, D)
        survivors = _survivors(system, expansions, problem, D, 2 * count)
        directions = [_coefficients(system.kernel, y) for y in survivors]
        counts.append(count)
        logger.info("%d constraints: lattice rank %d, %d surviving directions", count, system.rank, len(survivors))
        streak = streak + 1 if previous is not None and _same_span(previous, directions) else 0
        if streak >= settings.stabilizations:
            stable = True
            break
        previous = directions
        if 2 * count > top:
            break
        count *= 2
    if not stable:
        logger.warning("%s: solution space did not stabilize by %d constraints", problem.describe(), count)
    solutions = solve_and_verify(system, survivors, generators, expansions, bol_coordinates,
                                 problem, catalog, n_max)
    return SearchResult(problem, generators, solutions, counts, stable, D)

