"""Named modular objects and the expression trees that define them.

The catalog file (``catalog.yaml``) holds one block per object.  Each block
carries a prefix expression over eta quotients, Eisenstein series and theta
constants; :class:`Catalog` parses it and emits exact
:class:`~magmod.qseries.FourierExpansion` objects to any order.
"""
from __future__ import annotations

import hashlib
import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import mpmath
import yaml
from sympy import divisor_sigma, divisors

from .config import PACKAGED_CATALOG, CatalogError, ComputeConfig
from .groups import CongruenceSubgroup
from .qseries import FourierExpansion
from .scalars import DomainError, ResourceError

logger = logging.getLogger(__name__)

LEAVES = ("eta", "E2", "E4", "E6", "theta2", "theta3", "theta4")
NODES = ("add", "sub", "mul", "inv", "pow", "rescale", "diff", "hecke")
_LEAF_WEIGHTS = {
    "eta": Fraction(1, 2),
    "E2": Fraction(2),
    "E4": Fraction(4),
    "E6": Fraction(6),
    "theta2": Fraction(1, 2),
    "theta3": Fraction(1, 2),
    "theta4": Fraction(1, 2),
}
_TOKEN = re.compile(r"\(|\)|[^\s()]+")


@dataclass(frozen=True)
class FormExpr:
    """One node of an expression tree.

    ``op`` is a leaf name, a node name, ``"const"``, ``"q"`` or ``"ref"``.
    Leaves keep their argument multiplier in ``args[0]``.
    """

    op: str
    args: Tuple = ()

    def refs(self) -> Tuple[str, ...]:
        if self.op == "ref":
            return (self.args[0],)
        if self.op == "hecke":
            return (self.args[0],)
        found: List[str] = []
        for arg in self.args:
            if isinstance(arg, FormExpr):
                found.extend(arg.refs())
        return tuple(found)

    def __str__(self) -> str:
        if self.op == "const":
            return str(self.args[0])
        if self.op == "ref":
            return self.args[0]
        return "(" + " ".join([self.op] + [str(a) for a in self.args]) + ")"


def parse_expr(text: str) -> FormExpr:
    """Parse the prefix notation of the catalog file."""

    tokens = _TOKEN.findall(text.replace("−", "-"))
    if not tokens:
        raise CatalogError("empty expression")
    position = 0

    def atom(token: str) -> FormExpr:
        try:
            return FormExpr("const", (Fraction(token),))
        except ValueError:
            pass
        if token in LEAVES:
            return FormExpr(token, (1,))
        if token in NODES or token in ("q", "ref", "const"):
            raise CatalogError(f"{token!r} needs arguments")
        if not re.match(r"^[A-Za-z_][\w]*$", token):
            raise CatalogError(f"bad token {token!r}")
        return FormExpr("ref", (token,))

    def node() -> FormExpr:
        nonlocal position
        if position >= len(tokens):
            raise CatalogError("unexpected end of expression")
        token = tokens[position]
        position += 1
        if token == ")":
            raise CatalogError("unexpected ')'")
        if token != "(":
            return atom(token)
        if position >= len(tokens):
            raise CatalogError("unexpected end of expression")
        head = tokens[position]
        position += 1
        raw: List[Union[str, FormExpr]] = []
        while True:
            if position >= len(tokens):
                raise CatalogError(f"unbalanced parentheses in ({head} ...")
            if tokens[position] == ")":
                position += 1
                break
            if tokens[position] == "(":
                raw.append(node())
            else:
                raw.append(tokens[position])
                position += 1
        return _build(head, raw)

    expr = node()
    if position != len(tokens):
        raise CatalogError(f"trailing tokens after expression: {tokens[position:]}")
    return expr


def _integer(token, head: str) -> int:
    try:
        value = Fraction(str(token))
    except ValueError as exc:
        raise CatalogError(f"({head} ...) expects an integer, got {token!r}") from exc
    if value.denominator != 1:
        raise CatalogError(f"({head} ...) expects an integer, got {token!r}")
    return value.numerator


def _operand(token) -> FormExpr:
    if isinstance(token, FormExpr):
        return token
    try:
        return FormExpr("const", (Fraction(token),))
    except ValueError:
        pass
    if token in LEAVES:
        return FormExpr(token, (1,))
    return FormExpr("ref", (token,))


def _build(head: str, raw: List) -> FormExpr:
    if head in LEAVES:
        if len(raw) != 1:
            raise CatalogError(f"({head} m) takes one multiplier")
        m = _integer(raw[0], head)
        if m < 1:
            raise CatalogError(f"({head} m) needs m >= 1")
        return FormExpr(head, (m,))
    if head == "q":
        if len(raw) != 1:
            raise CatalogError("(q e) takes one exponent")
        return FormExpr("q", (Fraction(str(raw[0])),))
    if head == "ref":
        if len(raw) != 1 or isinstance(raw[0], FormExpr):
            raise CatalogError("(ref name) takes one name")
        return FormExpr("ref", (raw[0],))
    if head in ("add", "mul"):
        if not raw:
            raise CatalogError(f"({head}) needs operands")
        return FormExpr(head, tuple(_operand(t) for t in raw))
    if head == "sub":
        if len(raw) != 2:
            raise CatalogError("(sub a b) takes two operands")
        return FormExpr("sub", (_operand(raw[0]), _operand(raw[1])))
    if head in ("inv", "diff"):
        if len(raw) != 1:
            raise CatalogError(f"({head} a) takes one operand")
        return FormExpr(head, (_operand(raw[0]),))
    if head in ("pow", "rescale"):
        if len(raw) != 2:
            raise CatalogError(f"({head} a n) takes an operand and an integer")
        n = _integer(raw[1], head)
        if head == "rescale" and n < 1:
            raise CatalogError("(rescale a m) needs m >= 1")
        return FormExpr(head, (_operand(raw[0]), n))
    if head == "hecke":
        if len(raw) != 2 or isinstance(raw[0], FormExpr):
            raise CatalogError("(hecke name n) takes a catalog name and an integer")
        return FormExpr("hecke", (raw[0], _integer(raw[1], head)))
    raise CatalogError(f"unknown expression head {head!r}")


# ---------------------------------------------------------------------------
# Entries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoleSpec:
    """An orbit of poles given by the integer form a*tau^2 + b*tau + c."""

    form: Tuple[int, int, int]
    order: int

    @property
    def discriminant(self) -> int:
        a, b, c = self.form
        return b * b - 4 * a * c

    def point(self):
        a, b, c = self.form
        return (-b + mpmath.sqrt(mpmath.mpf(self.discriminant))) / (2 * a)

    def describe(self) -> str:
        a, b, c = self.form
        return f"{a}*tau^2 + {b}*tau + {c} = 0"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    expr: FormExpr
    group: CongruenceSubgroup
    weight: int
    level: int
    grid: int = 1
    depth: Optional[int] = None
    poles: Tuple[PoleSpec, ...] = ()
    hauptmodul: Optional[str] = None
    denominator: Optional[str] = None
    description: str = ""
    definition: bool = False

    def summary(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "group": self.group.tag,
            "weight": self.weight,
            "level": self.level,
            "grid": self.grid,
            "depth": self.depth,
            "expr": str(self.expr),
            "poles": [{"form": list(p.form), "order": p.order} for p in self.poles],
        }


def _parse_entry(block: Dict, definition: bool) -> CatalogEntry:
    if not isinstance(block, dict):
        raise CatalogError(f"catalog block must be a mapping, got {block!r}")
    missing = [key for key in ("name", "group", "weight", "level", "expr") if key not in block]
    if missing:
        raise CatalogError(f"catalog block {block.get('name', '?')!r} lacks {', '.join(missing)}")
    name = str(block["name"])
    try:
        group = CongruenceSubgroup.parse(str(block["group"]))
    except DomainError as exc:
        raise CatalogError(f"{name}: {exc}") from exc
    poles = []
    for spec in block.get("poles") or []:
        try:
            form = tuple(int(x) for x in spec["form"])
            order = int(spec["order"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"{name}: malformed pole entry {spec!r}") from exc
        if len(form) != 3 or form[1] ** 2 - 4 * form[0] * form[2] >= 0 or form[0] <= 0:
            raise CatalogError(f"{name}: pole form {form} does not describe a point of the upper half-plane")
        poles.append(PoleSpec(form, order))
    try:
        expr = parse_expr(str(block["expr"]))
    except CatalogError as exc:
        raise CatalogError(f"{name}: {exc}") from exc
    depth = block.get("depth")
    return CatalogEntry(
        name=name,
        expr=expr,
        group=group,
        weight=int(block["weight"]),
        level=int(block["level"]),
        grid=int(block.get("grid", 1)),
        depth=None if depth is None else int(depth),
        poles=tuple(poles),
        hauptmodul=block.get("hauptmodul"),
        denominator=block.get("denominator"),
        description=str(block.get("description", "")),
        definition=definition,
    )


# ---------------------------------------------------------------------------
# Leaf expansions
# ---------------------------------------------------------------------------


def _eta_leaf(m: int, trunc24: int) -> FourierExpansion:
    """eta(m tau) on grid 24, indices below ``trunc24``; pentagonal numbers."""

    coeffs: Dict[int, int] = {}
    k = 0
    while True:
        emitted = False
        for kk in ((k, -k) if k else (0,)):
            index = m * (1 + 12 * kk * (3 * kk - 1))
            if index < trunc24:
                coeffs[index] = -1 if kk % 2 else 1
                emitted = True
        if not emitted and k > 0:
            break
        k += 1
    return FourierExpansion(24, coeffs, trunc24)


def _eisenstein_leaf(k: int, m: int, trunc: int) -> FourierExpansion:
    factor = {2: -24, 4: 240, 6: -504}[k]
    coeffs: Dict[int, int] = {0: 1}
    n = 1
    while m * n < trunc:
        coeffs[m * n] = factor * int(divisor_sigma(n, k - 1))
        n += 1
    return FourierExpansion(1, coeffs, trunc)


def _theta_leaf(kind: str, m: int, trunc8: int) -> FourierExpansion:
    coeffs: Dict[int, int] = {}
    if kind == "theta2":
        n = 0
        while m * (2 * n + 1) ** 2 < trunc8:
            coeffs[m * (2 * n + 1) ** 2] = 2
            n += 1
    else:
        coeffs[0] = 1
        n = 1
        while 4 * m * n * n < trunc8:
            sign = -1 if (kind == "theta4" and n % 2) else 1
            coeffs[4 * m * n * n] = 2 * sign
            n += 1
    return FourierExpansion(8, coeffs, trunc8)


def eta_expansion(m: int, order: Union[int, Fraction]) -> FourierExpansion:
    """eta(m tau) with every exponent up to ``order`` known."""

    if m < 1 or order <= 0:
        raise DomainError("eta_expansion needs m >= 1 and a positive order")
    trunc = math.floor(Fraction(order) * 24) + 1
    return _eta_leaf(m, trunc).normalized()


def eisenstein_phi0(order: int) -> FourierExpansion:
    """1 + 24 sum m q^m / (1 + q^m), summed as a Lambert series."""

    if order <= 0:
        raise DomainError("order must be positive")
    coeffs: Dict[int, int] = {0: 1}
    for n in range(1, order + 1):
        coeffs[n] = 24 * sum(m * (-1) ** (n // m - 1) for m in divisors(n))
    return FourierExpansion(1, coeffs, order + 1)


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------


class Catalog:
    """Read-only collection of catalog entries with an expansion builder."""

    def __init__(
        self,
        entries: List[CatalogEntry],
        path: Optional[Path] = None,
        compute: Optional[ComputeConfig] = None,
        store=None,
    ) -> None:
        self._entries: Dict[str, CatalogEntry] = {}
        for entry in entries:
            if entry.name in self._entries:
                raise CatalogError(f"duplicate catalog name {entry.name!r}")
            self._entries[entry.name] = entry
        self.path = path
        self.compute = compute or ComputeConfig()
        self.store = store
        self._memo: Dict[Tuple[FormExpr, Fraction], FourierExpansion] = {}
        self._check_references()

    def _check_references(self) -> None:
        for entry in self._entries.values():
            for name in entry.expr.refs():
                if name not in self._entries:
                    raise CatalogError(f"{entry.name}: unknown reference {name!r}")
        # cycles
        state: Dict[str, int] = {}

        def visit(name: str) -> None:
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                raise CatalogError(f"reference cycle through {name!r}")
            state[name] = 1
            for ref in self._entries[name].expr.refs():
                visit(ref)
            state[name] = 2

        for name in self._entries:
            visit(name)

    # lookup --------------------------------------------------------------
    def get(self, name: str) -> CatalogEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise DomainError(f"unknown catalog name {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def entries(self, include_definitions: bool = False) -> List[CatalogEntry]:
        return [e for e in self._entries.values() if include_definitions or not e.definition]

    def resolved_text(self, name: str) -> str:
        """Expression text with every reference spelled out."""

        def render(expr: FormExpr) -> str:
            if expr.op == "ref":
                return "{" + render(self.get(expr.args[0]).expr) + "}"
            if expr.op == "hecke":
                return f"(hecke {{{render(self.get(expr.args[0]).expr)}}} {expr.args[1]})"
            if expr.op == "const":
                return str(expr.args[0])
            parts = [render(a) if isinstance(a, FormExpr) else str(a) for a in expr.args]
            return "(" + " ".join([expr.op] + parts) + ")"

        return render(self.get(name).expr)

    def digest(self, name: str) -> str:
        return hashlib.sha256(self.resolved_text(name).encode("utf-8")).hexdigest()

    def weight_of(self, expr: FormExpr) -> Fraction:
        op = expr.op
        if op in _LEAF_WEIGHTS:
            return _LEAF_WEIGHTS[op]
        if op in ("const", "q"):
            return Fraction(0)
        if op == "ref":
            return Fraction(self.get(expr.args[0]).weight)
        if op == "hecke":
            return Fraction(self.get(expr.args[0]).weight)
        if op == "add":
            weights = {self.weight_of(a) for a in expr.args if a.op != "const"}
            return max(weights) if weights else Fraction(0)
        if op == "sub":
            return max(self.weight_of(expr.args[0]), self.weight_of(expr.args[1]))
        if op == "mul":
            return sum((self.weight_of(a) for a in expr.args), Fraction(0))
        if op == "inv":
            return -self.weight_of(expr.args[0])
        if op == "pow":
            return self.weight_of(expr.args[0]) * expr.args[1]
        if op == "rescale":
            return self.weight_of(expr.args[0])
        if op == "diff":
            return self.weight_of(expr.args[0]) + 2
        raise CatalogError(f"unknown node {op!r}")

    # expansions ------------------------------------------------------------
    def expansion(self, name: Union[str, CatalogEntry], order: int) -> FourierExpansion:
        """Exact expansion of an entry with every exponent up to ``order`` known."""

        entry = self.get(name) if isinstance(name, str) else name
        if order > self.compute.max_order:
            raise ResourceError(
                f"order {order} exceeds compute.max_order = {self.compute.max_order}"
            )
        if order < 0:
            raise DomainError("order must be non-negative")
        digest = self.digest(entry.name) if self.store is not None else None
        if digest is not None:
            cached = self.store.load_expansion(entry.name, digest, order)
            if cached is not None:
                logger.info("expansion cache hit for %s to order %d", entry.name, order)
                return cached.truncate(order * entry.grid + 1)
            logger.info("expansion cache miss for %s to order %d", entry.name, order)
        result = self.expand_expr(entry.expr, order, grid=entry.grid, label=entry.name)
        if digest is not None:
            self.store.save_expansion(entry.name, digest, order, result)
        return result

    def expand_expr(
        self,
        expr: Union[str, FormExpr],
        order: int,
        grid: int = 1,
        label: str = "<expr>",
    ) -> FourierExpansion:
        """Expansion of an expression tree on ``grid``, exponents up to ``order``."""

        if isinstance(expr, str):
            expr = parse_expr(expr)
        target = order * grid + 1
        pad = Fraction(2)
        while True:
            bound = Fraction(order) + pad
            if bound > 2 * self.compute.max_order + 8:
                raise ResourceError(f"{label}: padding needed to reach order {order} exceeds the compute budget")
            result = self._expand(expr, bound).normalized()
            if grid % result.grid:
                raise CatalogError(f"{label}: expansion lives on grid {result.grid}, not a divisor of {grid}")
            result = result.regrid(grid)
            if result.trunc >= target:
                return result.truncate(target)
            logger.debug("%s: padding %s too small for order %d, doubling", label, pad, order)
            pad *= 2

    def _expand(self, expr: FormExpr, bound: Fraction) -> FourierExpansion:
        key = (expr, bound)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        result = self._expand_node(expr, bound).normalized()
        self._memo[key] = result
        return result

    def _expand_node(self, expr: FormExpr, bound: Fraction) -> FourierExpansion:
        op, args = expr.op, expr.args
        if op == "eta":
            return _eta_leaf(args[0], math.ceil(bound * 24))
        if op in ("E2", "E4", "E6"):
            return _eisenstein_leaf(int(op[1]), args[0], math.ceil(bound))
        if op in ("theta2", "theta3", "theta4"):
            return _theta_leaf(op, args[0], math.ceil(bound * 8))
        if op == "const":
            return FourierExpansion.constant(args[0], 1, math.ceil(bound))
        if op == "q":
            e = Fraction(args[0])
            return FourierExpansion.monomial(e.numerator, e.denominator, math.ceil(bound * e.denominator))
        if op == "ref":
            return self._expand(self.get(args[0]).expr, bound)
        if op == "add":
            result = self._expand(args[0], bound)
            for arg in args[1:]:
                result = result + self._expand(arg, bound)
            return result
        if op == "sub":
            return self._expand(args[0], bound) - self._expand(args[1], bound)
        if op == "mul":
            result = self._expand(args[0], bound)
            for arg in args[1:]:
                result = result * self._expand(arg, bound)
            return result
        if op == "inv":
            return self._expand(args[0], bound).invert()
        if op == "pow":
            return self._expand(args[0], bound) ** args[1]
        if op == "rescale":
            return self._expand(args[0], bound / args[1]).rescale(args[1])
        if op == "diff":
            return self._expand(args[0], bound).differentiate()
        if op == "hecke":
            # imported here: operators depends on the catalog
            from .operators import hecke

            source = self.get(args[0])
            n = args[1]
            inner = self._expand(source.expr, bound * n + 1)
            if inner.grid != 1:
                raise CatalogError(f"(hecke {source.name} {n}) needs an expansion on grid 1")
            return hecke(inner, n, source.weight, source.level)
        raise CatalogError(f"unknown node {op!r}")


def load_catalog(
    path: Optional[Path] = None,
    compute: Optional[ComputeConfig] = None,
    store=None,
) -> Catalog:
    """Parse a catalog file; the packaged catalog when ``path`` is None."""

    resolved = Path(path) if path is not None else PACKAGED_CATALOG
    if not resolved.exists():
        raise CatalogError(f"catalog file {resolved} does not exist")
    with resolved.open("r", encoding="utf-8") as handle:
        try:
            data = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise CatalogError(f"catalog file {resolved} is malformed: {exc}") from exc
    if not isinstance(data, dict):
        raise CatalogError(f"catalog file {resolved} must be a mapping")
    entries = [_parse_entry(b, True) for b in data.get("definitions") or []]
    entries += [_parse_entry(b, False) for b in data.get("entries") or []]
    logger.debug("loaded %d catalog objects from %s", len(entries), resolved)
    return Catalog(entries, resolved, compute, store)


_DEFAULT: Optional[Catalog] = None


def default_catalog() -> Catalog:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_catalog()
    return _DEFAULT


def list_catalog(catalog: Optional[Catalog] = None) -> List[CatalogEntry]:
    """All named entries (helper definitions excluded)."""

    return (catalog or default_catalog()).entries()
