"""
Symmetric quadrature rules on the reference triangle.

Points are barycentric coordinates, which are also the values of the three
P1 hat functions at those points. Weights sum to 1 and are multiplied by the
element area when integrating.
"""

from dataclasses import dataclass
from itertools import permutations
from typing import Dict

import numpy as np

from src.exceptions import ConfigurationError


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray      # (q, 3) barycentric coordinates
    weights: np.ndarray     # (q,)
    order: int

    @property
    def size(self) -> int:
        return len(self.weights)


def _orbit3(a: float) -> list:
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit6(a: float, b: float, c: float) -> list:
    return sorted(set(permutations((a, b, c))))


def _build() -> Dict[int, QuadratureRule]:
    rules = {}
    third = 1.0 / 3.0
    rules[1] = QuadratureRule(np.array([[third, third, third]]), np.array([1.0]), 1)

    p2 = [(1 / 6, 1 / 6, 2 / 3), (1 / 6, 2 / 3, 1 / 6), (2 / 3, 1 / 6, 1 / 6)]
    rules[2] = QuadratureRule(np.array(p2), np.full(3, third), 2)

    p4 = _orbit3(0.445948490915965) + _orbit3(0.091576213509771)
    w4 = [0.223381589678011] * 3 + [0.109951743655322] * 3
    rules[4] = QuadratureRule(np.array(p4), np.array(w4), 4)

    p7 = ([(third, third, third)]
          + _orbit3(0.260345966079040)
          + _orbit3(0.065130102902216)
          + _orbit6(0.048690315425316, 0.312865496004874, 0.638444188569810))
    w7 = ([-0.149570044467682]
          + [0.175615257433208] * 3
          + [0.053347235608838] * 3
          + [0.077113760890257] * 6)
    rules[7] = QuadratureRule(np.array(p7), np.array(w7), 7)
    return rules


_RULES = _build()


def get_rule(order: int) -> QuadratureRule:
    """Rule exact for polynomials of total degree <= order (orders 1, 2, 4, 7)"""
    if order not in _RULES:
        raise ConfigurationError(f"no quadrature rule of order {order}; use one of {sorted(_RULES)}")
    return _RULES[order]
