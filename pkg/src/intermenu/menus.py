"""Menus of quality/transfer pairs and solved market outcomes."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

from .distributions import PosteriorDistribution

_EPS = 1e-12
CHOICE_TIE_TOL = 1e-12  # breakpoint ties resolved toward the higher item


@dataclass(frozen=True)
class MenuItem:
    quality: float
    transfer: float


@dataclass(frozen=True)
class Menu:
    """An ordered list of items (q_i, t_i), with an implicit (0, 0) option.

    Qualities and transfers must be strictly increasing and positive, and
    the implied marginal-price breakpoints

        w_1 = t_1/q_1,   w_i = (t_i - t_{i-1}) / (q_i - q_{i-1})

    strictly increasing within (0, 1]; otherwise some item is redundant
    (never chosen by any buyer type) and the menu is rejected.
    """

    items: tuple[MenuItem, ...]
    breakpoints: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("menu needs at least one item")
        q_prev, t_prev = 0.0, 0.0
        breaks = []
        for it in items:
            if it.quality <= q_prev + _EPS:
                raise ValueError("qualities must be strictly increasing and positive")
            if it.transfer <= t_prev + _EPS:
                raise ValueError("transfers must be strictly increasing and positive")
            breaks.append((it.transfer - t_prev) / (it.quality - q_prev))
            q_prev, t_prev = it.quality, it.transfer
        for a, b in zip(breaks, breaks[1:]):
            if b <= a + _EPS:
                raise ValueError("breakpoints must be strictly increasing "
                                 "(a menu item is redundant)")
        if breaks[0] <= 0.0 or breaks[-1] > 1.0 + 1e-9:
            raise ValueError("breakpoints must lie in (0, 1]")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "breakpoints", tuple(breaks))

    @classmethod
    def from_pairs(cls, pairs) -> "Menu":
        return cls(tuple(MenuItem(float(q), float(t)) for q, t in pairs))

    @property
    def n_items(self) -> int:
        return len(self.items)

    def qualities(self) -> tuple[float, ...]:
        return tuple(it.quality for it in self.items)

    def transfers(self) -> tuple[float, ...]:
        return tuple(it.transfer for it in self.items)

    def choice(self, w: float) -> int:
        """Index of the buyer-optimal item at posterior mean w (0 = outside
        option), with indifference broken toward the higher quality (within
        a float-noise tolerance around each breakpoint)."""
        return bisect_right(self.breakpoints, w + CHOICE_TIE_TOL)

    def to_dicts(self):
        return [{"q": it.quality, "t": it.transfer} for it in self.items]


REGIME_MUSSA_ROSEN = "mussa_rosen_limit"
REGIME_INTERMEDIARY = "intermediary_constrained"
REGIME_DIRECT = "bhm"  # seller-designed disclosure benchmark (wire label)


@dataclass(frozen=True)
class MenuOutcome:
    """A solved menu together with the posterior it induces.

    ``types`` lists the posterior atoms bottom-up; when the lowest entry is
    excluded (chooses the outside option), ``types`` has one more entry than
    the menu and ``masses`` aligns with it. Cutoffs are the pooling interval
    boundaries of the posterior, bottom-up.
    """

    bias: float
    regime: str
    menu: Menu
    posterior: PosteriorDistribution
    types: tuple[float, ...]
    masses: tuple[float, ...]
    cutoffs: tuple[float, ...]
    profit: float
    consumer_rent: float
    intermediary_payoff: float

    def __post_init__(self):
        if len(self.types) != len(self.masses):
            raise ValueError("types and masses must align")
        if len(self.types) not in (self.menu.n_items, self.menu.n_items + 1):
            raise ValueError("need one type per item, plus at most one excluded")
        if any(b <= a for a, b in zip(self.types, self.types[1:])):
            raise ValueError("types must be strictly increasing")
        if abs(sum(self.masses) - 1.0) > 1e-9:
            raise ValueError("masses must sum to one")

    @property
    def has_exclusion(self) -> bool:
        return len(self.types) == self.menu.n_items + 1

    @property
    def excluded_type(self) -> float | None:
        return self.types[0] if self.has_exclusion else None

    @property
    def trading_types(self) -> tuple[float, ...]:
        return self.types[1:] if self.has_exclusion else self.types

    @property
    def trading_masses(self) -> tuple[float, ...]:
        return self.masses[1:] if self.has_exclusion else self.masses

    @property
    def n_items(self) -> int:
        return self.menu.n_items

    def to_dict(self) -> dict:
        return {
            "b": self.bias,
            "regime": self.regime,
            "items": self.menu.to_dicts(),
            "types": list(self.types),
            "masses": list(self.masses),
            "cutoffs": list(self.cutoffs),
            "profit": self.profit,
            "consumer_rent": self.consumer_rent,
            "intermediary_payoff": self.intermediary_payoff,
        }


@dataclass(frozen=True)
class DirectSingleItem:
    """Solution of the seller-designed-disclosure benchmark with one item.

    The seller pools values below ``cutoff`` and above it, sells quality
    ``quality`` at ``price`` to the upper pool whose mean is
    ``posterior_type``, and the menu survives an intermediary of bias b
    exactly when b >= ``bias_threshold`` = posterior_type - cutoff.
    """

    cutoff: float
    posterior_type: float
    quality: float
    price: float
    bias_threshold: float
    profit: float
