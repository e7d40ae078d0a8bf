"""Parser for arithmetic-function specifications such as ``mu*sym:3`` or ``abs:mu*lambda``.

Grammar::

    expr   := factor ("*" factor)*
    factor := "abs:" expr | atom
    atom   := "mu" | "one" | "lambda" | "tau_m:" INT | "tau_z:" COMPLEX
            | "sym:" INT | "pow:" INT

``abs:`` applies to everything on its right.  ``symR`` is accepted for
``sym:R`` and ``tau_z`` takes ``<re>+<im>i`` or a plain real number.
Atoms ``lambda``, ``sym`` and ``pow`` refer to the eigenvalue table supplied
at evaluation time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import UsageError
from .forms import satake_angles, sym_power_table
from .multfun import (
    MultiplicativeTable,
    eigenvalue_power_rule,
    materialize,
    moebius_rule,
    pointwise_combine,
    table_function,
    tau_m_rule,
    tau_z_rule,
)

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX = re.compile(rf"^([+-]?{_NUM})(?:([+-](?:{_NUM})?)i)?$")


@dataclass(frozen=True)
class Atom:
    name: str
    arg: object = None

    def canonical(self) -> str:
        if self.arg is None:
            return self.name
        if self.name == "tau_z":
            z = self.arg
            return f"tau_z:{z.real!r}{z.imag:+}i"
        return f"{self.name}:{self.arg}"


@dataclass(frozen=True)
class Abs:
    inner: "Product"

    def canonical(self) -> str:
        return "abs:" + self.inner.canonical()


@dataclass(frozen=True)
class Product:
    factors: tuple

    def canonical(self) -> str:
        return "*".join(f.canonical() for f in self.factors)

    @property
    def needs_form(self) -> bool:
        return any(_needs_form(f) for f in self.factors)


def _needs_form(node) -> bool:
    if isinstance(node, Atom):
        return node.name in ("lambda", "sym", "pow")
    return node.inner.needs_form


def _positive_int(text: str, what: str) -> int:
    if not text.isdigit() or int(text) < 1:
        raise UsageError(f"{what} needs a positive integer, got {text!r}")
    return int(text)


def _parse_complex(text: str) -> complex:
    m = _COMPLEX.match(text.replace(" ", ""))
    if not m:
        raise UsageError(f"cannot parse complex number {text!r}")
    re_part = float(m.group(1))
    im = m.group(2)
    if im is None:
        return complex(re_part, 0.0)
    im_part = float(im + "1") if im in "+-" else float(im)
    return complex(re_part, im_part)


def _parse_atom(tok: str) -> Atom:
    if tok in ("mu", "one", "lambda"):
        return Atom(tok)
    name, sep, arg = tok.partition(":")
    if not sep and re.fullmatch(r"sym\d+", tok):
        name, arg = "sym", tok[3:]
    elif not sep:
        raise UsageError(f"unknown atom {tok!r}")
    if name == "tau_m":
        return Atom("tau_m", _positive_int(arg, "tau_m"))
    if name == "sym":
        return Atom("sym", _positive_int(arg, "sym"))
    if name == "pow":
        return Atom("pow", _positive_int(arg, "pow"))
    if name == "tau_z":
        return Atom("tau_z", _parse_complex(arg))
    raise UsageError(f"unknown atom {tok!r}")


def parse(text: str) -> Product:
    """Parse a specification into its tree (whitespace is ignored); see :func:`canonical`."""
    text = re.sub(r"\s+", "", text)
    if not text:
        raise UsageError("empty function specification")
    factors = []
    rest = text
    while rest:
        if rest.startswith("abs:"):
            factors.append(Abs(parse(rest[4:])))
            break
        tok, sep, rest = rest.partition("*")
        if not tok:
            raise UsageError(f"empty factor in {text!r}")
        factors.append(_parse_atom(tok))
        if sep and not rest:
            raise UsageError(f"trailing '*' in {text!r}")
    return Product(tuple(factors))


def canonical(text: str) -> str:
    return parse(text).canonical()


def _build(node, N: int, lam, cache: dict) -> MultiplicativeTable:
    if isinstance(node, Product):
        tables = [_build(f, N, lam, cache) for f in node.factors]
        out = tables[0]
        for t in tables[1:]:
            out = pointwise_combine(out, t)
        return out
    if isinstance(node, Abs):
        return pointwise_combine(_build(node.inner, N, lam, cache), op="abs")
    if node.name == "mu":
        return materialize(moebius_rule(), N)
    if node.name == "one":
        return materialize(tau_m_rule(1), N)
    if node.name == "tau_m":
        return materialize(tau_m_rule(node.arg), N)
    if node.name == "tau_z":
        return materialize(tau_z_rule(node.arg), N)
    if lam is None:
        raise UsageError(f"{node.canonical()} needs an eigenvalue table")
    lam.require(N)
    if node.name == "lambda":
        return table_function(lam.truncated(N))
    if node.name == "pow":
        return materialize(eigenvalue_power_rule(node.arg, lam), N)
    if "angles" not in cache:
        cache["angles"] = satake_angles(lam)
    return table_function(sym_power_table(cache["angles"], node.arg, N), f"sym:{node.arg}")


def evaluate(spec: str | Product, N: int, lam=None) -> MultiplicativeTable:
    """Materialize the function on ``1..N``; ``lam`` supplies ``lambda``, ``sym`` and ``pow``."""
    tree = parse(spec) if isinstance(spec, str) else spec
    table = _build(tree, int(N), lam, {})
    return MultiplicativeTable(table.limit, table.values, tree.canonical(), table.provenance, table.overflow)
