"""Exact closed forms for the uniform prior with quadratic cost c(q) = q²/2.

This instance is fully tractable and serves as ground truth for the
numeric solver. With bias b < 1/3 the optimal N-item menu has, counting
i = 1..N from the bottom,

    w_i = 1 - (1 + 2(N - i)) b        posterior types (w_N = 1 - b)
    q_i = 1 - (1 + 4(N - i)) b        qualities       (q_N = 1 - b)
    Pr(w = w_i) = 2b                  equal trading masses

and the optimal item count is N_b = floor((1/b - 1)/4) + 1. Items whose
closed-form quality lands at zero (threshold biases) are dropped.
"""

from __future__ import annotations

import math

from .costs import PowerCost
from .distributions import Prior, monotone_pool
from .errors import OutOfRegime
from .menus import REGIME_INTERMEDIARY, Menu, MenuOutcome
from .solver import transfers_from

SINGLE_ITEM_THRESHOLD = 1.0 / 3.0  # above: seller-disclosure menu survives

_UNIFORM = Prior.uniform()
_QUADRATIC = PowerCost(2.0)
_DROP_TOL = 1e-12


def uq_item_count(bias: float) -> int:
    """floor((1/b - 1)/4) + 1 for 0 < b < 1/3."""
    if bias <= 0.0:
        raise OutOfRegime("bias must be positive")
    if bias >= SINGLE_ITEM_THRESHOLD:
        raise OutOfRegime("bias at or above 1/3: single-item seller-disclosure "
                          "regime applies")
    return int(math.floor(0.25 * (1.0 / bias - 1.0))) + 1


def uq_unrestricted_menu(bias: float) -> MenuOutcome:
    """The optimal finite-item menu in closed form, packaged exactly like a
    solver outcome (types, masses, cutoffs, transfers, payoffs)."""
    n = uq_item_count(bias)
    types = [1.0 - (1.0 + 2.0 * (n - i)) * bias for i in range(1, n + 1)]
    qualities = [1.0 - (1.0 + 4.0 * (n - i)) * bias for i in range(1, n + 1)]
    if qualities[0] <= _DROP_TOL:  # threshold bias: bottom item degenerates
        n -= 1
        types, qualities = types[1:], qualities[1:]
    transfers = transfers_from(types, qualities)
    menu = Menu.from_pairs(zip(qualities, transfers))
    cutoffs = tuple(w - bias for w in types)
    posterior = monotone_pool(_UNIFORM, cutoffs)
    excluded = 0.5 * cutoffs[0]
    masses = (cutoffs[0],) + (2.0 * bias,) * n
    profit = sum(2.0 * bias * (t - 0.5 * q * q)
                 for t, q in zip(transfers, qualities))
    rent = sum(2.0 * bias * (w * q - t)
               for w, q, t in zip(types, qualities, transfers))
    ipay = sum(2.0 * bias * ((w + bias) * q - t)
               for w, q, t in zip(types, qualities, transfers))
    return MenuOutcome(bias, REGIME_INTERMEDIARY, menu, posterior,
                       (excluded,) + tuple(types), masses, cutoffs,
                       profit, rent, ipay)


def _menu(breakpoints, qualities) -> Menu:
    keep = [(w, q) for w, q in zip(breakpoints, qualities) if q > _DROP_TOL]
    ws = [w for w, _ in keep]
    qs = [q for _, q in keep]
    return Menu.from_pairs(zip(qs, transfers_from(ws, qs)))


def uq_restricted_menu(bias: float, cap: int) -> Menu:
    """Closed-form optimal menu with at most ``cap`` in {1, 2, 3} items.

    Branch boundaries follow the half-open conventions of the piecewise
    laws: e.g. a two-item menu applies for 1/9 <= b < 1/5; at the left
    endpoints the lowest item's quality is zero and the item is dropped.
    """
    if bias <= 0.0:
        raise OutOfRegime("bias must be positive")
    if cap not in (1, 2, 3):
        raise ValueError("closed forms cover caps 1, 2 and 3 only")
    if bias >= 1.0 / 3.0 or cap == 1:
        if bias >= 1.0 / 3.0:
            return _menu([2.0 / 3.0], [2.0 / 3.0])
        if bias >= 0.2:
            return _menu([1.0 - bias], [1.0 - bias])
        w = 2.0 * (1.0 + bias) / 3.0
        return _menu([w], [w])
    if cap == 2 or bias >= 1.0 / 9.0:
        if bias >= 0.2:
            return uq_restricted_menu(bias, 1)
        if bias >= 1.0 / 9.0:
            return _menu([1.0 - 3.0 * bias, 1.0 - bias],
                         [1.0 - 5.0 * bias, 1.0 - bias])
        if cap == 2:
            s = (1.0 + bias) / 5.0
            return _menu([3.0 * s, 4.0 * s], [2.0 * s, 4.0 * s])
    if bias >= 1.0 / 13.0:
        return _menu([1.0 - 5.0 * bias, 1.0 - 3.0 * bias, 1.0 - bias],
                     [1.0 - 9.0 * bias, 1.0 - 5.0 * bias, 1.0 - bias])
    s = (1.0 + bias) / 7.0
    return _menu([4.0 * s, 5.0 * s, 6.0 * s], [2.0 * s, 4.0 * s, 6.0 * s])
