import logging
from typing import Any, Mapping, Optional, Sequence
from dataclasses import dataclass

import numpy as np

from polypade.types import Evaluator
from polypade.series.polyseries import (
    BoxLike,
    FourierTable,
    TruncatedPoly,
    eval_poly,
    enumerate_box,
    taylor_from_evaluator,
)

logger = logging.getLogger(__name__)

BUILTINS = ("half_sum", "monomial", "blaschke_tensor", "cayley_of_poly")


def parse_complex(value: Any) -> complex:
    """Accept a number, a string like "0.5-1j", or {"re": .., "im": ..}."""
    if isinstance(value, Mapping):
        unknown = set(value) - {"re", "im"}
        if unknown:
            raise ValueError(f"Unknown complex fields {sorted(unknown)}")
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    if isinstance(value, (int, float, complex)):
        return complex(value)
    raise ValueError(f"Cannot read {value!r} as a complex number")


def complex_json(value: complex) -> dict[str, float]:
    value = complex(value)
    return {"re": value.real, "im": value.imag}


@dataclass(frozen=True, eq=False)
class Symbol:
    """A named function on the polydisk; `poly` is set when it is a polynomial."""

    name: str
    d: int
    evaluator: Evaluator
    poly: Optional[TruncatedPoly] = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(points))

    def table(self, box: BoxLike, radius: float = 0.5) -> FourierTable:
        """Taylor coefficients on a box, exact for polynomial symbols."""
        box = enumerate_box(box)
        if self.poly is not None:
            return FourierTable.from_poly(self.poly.restrict(box))
        return taylor_from_evaluator(self.evaluator, box, radius)


def half_sum(d: int) -> Symbol:
    """(z_1 + ... + z_d) / d."""
    poly = TruncatedPoly.from_mapping({tuple(int(k == j) for k in range(d)): 1 / d for j in range(d)}, (1,) * d)
    return Symbol("half_sum", d, poly, poly)


def monomial(alpha: Sequence[int], scale: complex = 1.0) -> Symbol:
    alpha = tuple(int(a) for a in alpha)
    poly = TruncatedPoly.monomial(alpha, alpha, scale)
    return Symbol("monomial", len(alpha), poly, poly)


def blaschke_tensor(zeros: Sequence[Sequence[complex]]) -> Symbol:
    """prod_j prod_a (z_j - a)/(1 - conj(a) z_j), one list of zeros per variable."""
    axes = [np.asarray(z, dtype=complex) for z in zeros]
    for z in axes:
        if z.size and np.max(np.abs(z)) >= 1:
            raise ValueError("Blaschke zeros must lie inside the unit disk")

    def evaluate(points: np.ndarray) -> np.ndarray:
        out = np.ones(points.shape[0], dtype=complex)
        for j, z in enumerate(axes):
            x = points[:, j][:, None]
            out *= np.prod((x - z) / (1 - np.conj(z) * x), axis=1)
        return out

    return Symbol("blaschke_tensor", len(axes), evaluate)


def cayley_of_poly(p: TruncatedPoly) -> Symbol:
    """(p - 1)/(p + 1), a Schur function whenever Re p >= 0 on the polydisk."""

    def evaluate(points: np.ndarray) -> np.ndarray:
        v = eval_poly(p, points)
        return (v - 1) / (v + 1)

    return Symbol("cayley_of_poly", p.d, evaluate)


def resolve_symbol(function: Mapping[str, Any], d: int) -> Symbol:
    """
    Build a symbol from its JSON description.

    :param function: {"kind": "poly", "coeffs": [...]} or {"kind": "builtin", "name": .., "params": {..}}
    :param d: number of variables the caller expects
    :raises ValueError: on an unknown kind or name, or a dimension mismatch
    """
    kind = function.get("kind")
    allowed = {"poly": {"kind", "coeffs"}, "builtin": {"kind", "name", "params"}}
    if kind in allowed and set(function) - allowed[kind]:
        raise ValueError(f"Unknown fields {sorted(set(function) - allowed[kind])} in function")
    if kind == "poly":
        poly = TruncatedPoly.from_json(function["coeffs"])
        symbol = Symbol("poly", poly.d, poly, poly)
    elif kind == "builtin":
        name = function.get("name")
        params = dict(function.get("params", {}))
        if name == "half_sum":
            symbol = half_sum(int(params.pop("d", d)))
        elif name == "monomial":
            symbol = monomial(params.pop("alpha"), parse_complex(params.pop("scale", 1.0)))
        elif name == "blaschke_tensor":
            zeros = [[parse_complex(a) for a in axis] for axis in params.pop("zeros")]
            symbol = blaschke_tensor(zeros)
        elif name == "cayley_of_poly":
            symbol = cayley_of_poly(TruncatedPoly.from_json(params.pop("coeffs")))
        else:
            raise ValueError(f"Unknown builtin {name!r}, expected one of {BUILTINS}")
        if params:
            raise ValueError(f"Unknown parameters {sorted(params)} for builtin {name}")
    else:
        raise ValueError(f"Unknown function kind {kind!r}")
    if symbol.d != d:
        raise ValueError(f"Symbol {symbol.name} has {symbol.d} variables, expected {d}")
    logger.debug(f"Resolved symbol {symbol.name} in {d} variables")
    return symbol
