"""Encoded PDE candidates.

A genome ``[k],{[g1, g2, ...], ...}`` stands for

    d^k u / dt^k = sum_j  zeta_j * prod_{g in module_j} d^g u / dx^g

Gene ``g`` is a spatial derivative order (0 is u itself); a module is the
product of its genes' factors; modules are summed.  Canonical genomes keep
genes sorted inside each module and modules deduplicated and sorted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StructuralError


@dataclass(frozen=True)
class Genome:
    lhs: int
    rhs: tuple

    def __post_init__(self):
        rhs = tuple(tuple(int(g) for g in m) for m in self.rhs)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "lhs", int(self.lhs))
        if self.lhs < 1:
            raise StructuralError("lhs must be a temporal order >= 1")
        if not rhs or any(not m for m in rhs):
            raise StructuralError("rhs must be a non-empty set of non-empty modules")
        if any(g < 0 for m in rhs for g in m):
            raise StructuralError("genes must be non-negative")

    @classmethod
    def make(cls, lhs, rhs):
        """Build and canonicalize."""
        return canonicalize(cls(lhs, rhs))

    @property
    def length(self) -> int:
        """Total number of rhs genes (the parsimony penalty counts these)."""
        return sum(len(m) for m in self.rhs)

    @property
    def n_modules(self) -> int:
        return len(self.rhs)

    @property
    def max_gene(self) -> int:
        return max(max(m) for m in self.rhs)

    def is_canonical(self) -> bool:
        return canonicalize(self) == self

    def __str__(self):
        return to_text(self)


def canonicalize(g: Genome) -> Genome:
    modules = sorted({tuple(sorted(m)) for m in g.rhs})
    return Genome(g.lhs, tuple(modules))


def to_text(g: Genome) -> str:
    """Bracket notation, e.g. ``[1],{[0,1],[3]}``."""
    mods = ",".join("[" + ",".join(str(x) for x in m) + "]" for m in g.rhs)
    return f"[{g.lhs}],{{{mods}}}"


_TEXT_RE = re.compile(r"^\s*\[\s*(\d+)\s*\]\s*,\s*\{(.*)\}\s*$")


def from_text(text: str) -> Genome:
    match = _TEXT_RE.match(text)
    if not match:
        raise StructuralError(f"not a genome: {text!r}")
    modules = re.findall(r"\[([^\[\]]*)\]", match.group(2))
    rhs = []
    for body in modules:
        genes = [s for s in body.replace(" ", "").split(",") if s]
        if not genes:
            raise StructuralError(f"empty module in {text!r}")
        rhs.append(tuple(int(s) for s in genes))
    return Genome(int(match.group(1)), tuple(rhs))


@dataclass
class GenePool:
    """Basic genes available for the first generation, plus mutation bounds."""

    lhs_options: tuple = (1, 2)
    rhs_options: tuple = (0, 1, 2, 3)
    max_spatial_order: int = 3
    max_temporal_order: int = 2
    max_initial_modules: int = 3
    max_initial_genes: int = 3

    def __post_init__(self):
        self.lhs_options = tuple(int(v) for v in self.lhs_options)
        self.rhs_options = tuple(int(v) for v in self.rhs_options)

    def validate(self):
        if not self.lhs_options or not self.rhs_options:
            raise ConfigurationError("gene options must be non-empty")
        if min(self.lhs_options) < 1 or max(self.lhs_options) > self.max_temporal_order:
            raise ConfigurationError("lhs options must lie in [1, max temporal order]")
        if min(self.rhs_options) < 0 or max(self.rhs_options) > self.max_spatial_order:
            raise ConfigurationError("rhs options must lie in [0, max spatial order]")
        if self.max_initial_modules < 1 or self.max_initial_genes < 1:
            raise ConfigurationError("initial genome bounds must be >= 1")

    def random_module(self, rng) -> tuple:
        n = int(rng.integers(1, self.max_initial_genes + 1))
        return tuple(sorted(int(v) for v in rng.choice(self.rhs_options, size=n)))


def random_genome(pool: GenePool, rng) -> Genome:
    """Sample a canonical genome from the basic genes of ``pool``."""
    lhs = int(rng.choice(pool.lhs_options))
    n_modules = int(rng.integers(1, pool.max_initial_modules + 1))
    return Genome.make(lhs, [pool.random_module(rng) for _ in range(n_modules)])


def _factor_name(order: int) -> str:
    return "u" if order == 0 else "u_" + "x" * order


def module_name(module) -> str:
    """``(0, 0, 2)`` -> ``u^2*u_xx``."""
    parts = []
    for order in sorted(set(module)):
        power = module.count(order)
        name = _factor_name(order)
        parts.append(name if power == 1 else f"{name}^{power}")
    return "*".join(parts)


def lhs_name(order: int) -> str:
    return "u_" + "t" * order


def format_coefficient(value: float, significant: int = 4, min_decimals: int = 3) -> str:
    """Magnitude with ``significant`` digits, padded to ``min_decimals`` places."""
    text = f"{abs(value):.{significant}g}"
    if "e" in text:
        return text
    decimals = len(text.split(".")[1]) if "." in text else 0
    if decimals < min_decimals:
        text = f"{abs(value):.{min_decimals}f}"
    return text


def render(g: Genome, coeffs, significant: int = 4, min_decimals: int = 3) -> str:
    """Human-readable equation, e.g. ``u_t = -0.993*u*u_x - 0.00248*u_xxx``."""
    coeffs = list(np.atleast_1d(np.asarray(coeffs, dtype=float)))
    if len(coeffs) != g.n_modules:
        raise StructuralError(
            f"{len(coeffs)} coefficients for {g.n_modules} modules"
        )
    pieces = []
    for i, (module, c) in enumerate(zip(g.rhs, coeffs)):
        mag = format_coefficient(c, significant, min_decimals)
        neg = c < 0 or (c == 0 and np.signbit(c))
        if i == 0:
            pieces.append(f"{'-' if neg else ''}{mag}*{module_name(module)}")
        else:
            pieces.append(f"{'-' if neg else '+'} {mag}*{module_name(module)}")
    return f"{lhs_name(g.lhs)} = " + " ".join(pieces)


_FACTOR_RE = re.compile(r"^u(?:_(x+))?(?:\^(\d+))?$")
_TERM_RE = re.compile(r"([+-]?)\s*([0-9.eE+-]+?)\*([u_x^*0-9]+)")


def parse_rendered(text: str):
    """Inverse of :func:`render`: returns ``(canonical genome, coefficients)``.

    Coefficients come back in the canonical module order.
    """
    try:
        left, right = text.split("=", 1)
    except ValueError:
        raise StructuralError(f"not an equation: {text!r}") from None
    left = left.strip()
    if not re.fullmatch(r"u_t+", left):
        raise StructuralError(f"bad left-hand side {left!r}")
    lhs = len(left) - 2
    right = right.strip()
    if not right.startswith(("-", "+")):
        right = "+ " + right
    tokens = re.findall(r"([+-])\s*([^\s]+)", right)
    if not tokens:
        raise StructuralError(f"no terms in {text!r}")
    terms = {}
    for sign, body in tokens:
        coef_text, _, term = body.partition("*")
        if not term:
            raise StructuralError(f"bad term {body!r}")
        module = []
        for factor in term.split("*"):
            m = _FACTOR_RE.match(factor)
            if not m:
                raise StructuralError(f"bad factor {factor!r}")
            order = len(m.group(1) or "")
            module.extend([order] * int(m.group(2) or 1))
        value = float(coef_text) * (-1 if sign == "-" else 1)
        terms[tuple(sorted(module))] = value
    genome = Genome.make(lhs, list(terms))
    return genome, np.array([terms[m] for m in genome.rhs])
