"""Value distributions on [0, 1]: priors and posterior (signal) distributions.

The buyer's value is drawn from a prior on [0, 1] with strictly positive
density and a nondecreasing hazard rate (Myerson regularity); non-regular
priors are rejected at construction. Posterior distributions arising from
information disclosure are mean-preserving contractions (MPC) of the prior,
represented segment by segment: an interval is either fully disclosed,
pooled into one atom at its conditional mean, or bi-pooled into two atoms.

Feasibility of a posterior G is the classic integral criterion

    gap(t) = integral_0^t (F0 - G)(x) dx >= 0 for all t, with gap(1) = 0,

which this module evaluates exactly from the segment structure (no
sampling error at segment knots).

All objects are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInterval, RegularityError

MASS_TOL = 1e-12
_HAZARD_TAIL_FLOOR = 1e-9  # stop the hazard check where 1 - F0 falls below this
_REGULARITY_GRID = 1000


@dataclass(frozen=True)
class HazardRateReport:
    """Outcome of the increasing-hazard-rate check on a grid."""

    increasing: bool
    first_violation: float | None
    grid_points: int
    truncated_at: float  # last grid point actually checked (tail guard)


@dataclass(frozen=True)
class MpcReport:
    """Feasibility report for a candidate posterior distribution.

    ``worst_gap`` is the most negative value of the integral criterion over
    the checked points (0 when the criterion never dips), ``terminal_gap``
    is its value at 1 (mean preservation), and ``mass_error`` is |G(1) - 1|.
    """

    feasible: bool
    worst_gap: float
    worst_location: float
    terminal_gap: float
    mass_error: float
    points_checked: int


class Prior(ABC):
    """A value distribution on [0, 1] with positive density.

    Construction validates positivity of the density, the CDF endpoint
    conditions and Myerson regularity (nondecreasing hazard rate on a
    1000-point grid); failures raise :class:`RegularityError`.
    """

    def __init__(self):
        self._validate()
        object.__setattr__(self, "_mean", float(self.first_moment(0.0, 1.0)))

    # -- family primitives -------------------------------------------------

    @abstractmethod
    def cdf(self, x):
        """F0(x); accepts scalars or numpy arrays."""

    @abstractmethod
    def pdf(self, x):
        """f0(x); accepts scalars or numpy arrays."""

    @abstractmethod
    def first_moment(self, a: float, b: float) -> float:
        """integral_a^b x f0(x) dx, exact per family."""

    @abstractmethod
    def integrated_cdf(self, x: float) -> float:
        """integral_0^x F0(t) dt, exact per family."""

    # -- derived quantities -------------------------------------------------

    @property
    def mean(self) -> float:
        return self._mean

    def mass(self, a: float, b: float) -> float:
        return float(self.cdf(b)) - float(self.cdf(a))

    def conditional_mean(self, a: float, b: float) -> float:
        """E(v | a <= v <= b) under the prior.

        Raises :class:`DegenerateInterval` when the interval carries less
        than ``MASS_TOL`` probability.
        """
        if not a < b:
            raise DegenerateInterval(f"empty interval [{a}, {b}]")
        m = self.mass(a, b)
        if m < MASS_TOL:
            raise DegenerateInterval(
                f"interval [{a:.6g}, {b:.6g}] carries mass {m:.3g}")
        return self.first_moment(a, b) / m

    def hazard(self, x):
        return self.pdf(x) / (1.0 - self.cdf(x))

    def check_hazard_rate(self, grid_n: int = _REGULARITY_GRID) -> HazardRateReport:
        """Check that f0/(1-F0) is nondecreasing on a ``grid_n``-point grid.

        Points where 1 - F0 < 1e-9 are skipped (0/0 noise near the top of
        the support); the report records where the check stopped.
        """
        if grid_n < 2:
            raise ValueError("grid_n must be at least 2")
        grid = np.linspace(0.0, 1.0, grid_n)
        tail = 1.0 - np.asarray(self.cdf(grid), dtype=float)
        keep = tail >= _HAZARD_TAIL_FLOOR
        grid = grid[keep]
        hz = np.asarray(self.pdf(grid), dtype=float) / tail[keep]
        diffs = np.diff(hz)
        bad = np.nonzero(diffs < -1e-10 * np.maximum(1.0, np.abs(hz[:-1])))[0]
        if bad.size:
            return HazardRateReport(False, float(grid[bad[0] + 1]),
                                    grid_n, float(grid[-1]))
        return HazardRateReport(True, None, grid_n, float(grid[-1]))

    def decreasing_density_is_concave(self, grid_n: int = _REGULARITY_GRID) -> bool:
        """True when the density never decreases convexly: wherever f0' < 0,
        f0'' <= 0. Any increasing or concave density qualifies. This is the
        shape condition under which the seller-information benchmark is a
        single-item menu."""
        grid = np.linspace(0.0, 1.0, grid_n)
        f = np.asarray(self.pdf(grid), dtype=float)
        h = grid[1] - grid[0]
        d1 = np.diff(f) / h
        d2 = np.diff(f, 2) / h**2
        decreasing = d1[:-1] < -1e-9
        return bool(np.all(d2[decreasing] <= 1e-6))

    # -- validation ---------------------------------------------------------

    def _validate(self):
        if abs(float(self.cdf(0.0))) > 1e-9 or abs(float(self.cdf(1.0)) - 1.0) > 1e-9:
            raise RegularityError("CDF must satisfy F0(0)=0 and F0(1)=1")
        interior = np.linspace(0.0, 1.0, _REGULARITY_GRID)[1:-1]
        dens = np.asarray(self.pdf(interior), dtype=float)
        if np.any(dens <= 0.0):
            theta = float(interior[np.argmin(dens)])
            raise RegularityError(f"density not strictly positive at {theta:.4f}")
        cdf = np.asarray(self.cdf(np.linspace(0.0, 1.0, _REGULARITY_GRID)), dtype=float)
        if np.any(np.diff(cdf) < -1e-12):
            raise RegularityError("CDF must be nondecreasing")
        report = self.check_hazard_rate()
        if not report.increasing:
            raise RegularityError(
                f"hazard rate decreases at {report.first_violation:.4f}; "
                "only Myerson-regular priors are supported")

    # -- factories ----------------------------------------------------------

    @staticmethod
    def uniform() -> "UniformPrior":
        return UniformPrior()

    @staticmethod
    def power(k: float) -> "PowerPrior":
        return PowerPrior(k)

    @staticmethod
    def from_table(thetas, densities) -> "TabulatedPrior":
        return TabulatedPrior(thetas, densities)

    @staticmethod
    def from_csv(path) -> "TabulatedPrior":
        """Load a tabulated prior from a two-column ``theta,density`` CSV.

        The theta column must be strictly increasing and cover [0, 1]. The
        density is renormalized to integrate to one; the factor applied is
        reported on the returned prior's ``renormalization`` attribute.
        """
        thetas, densities = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for row in reader:
                if not row or row[0].strip().lower() in ("theta", ""):
                    continue
                thetas.append(float(row[0]))
                densities.append(float(row[1]))
        return TabulatedPrior(thetas, densities)


class UniformPrior(Prior):
    """The standard uniform distribution on [0, 1]."""

    def cdf(self, x):
        return np.clip(x, 0.0, 1.0)

    def pdf(self, x):
        return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0

    def first_moment(self, a, b):
        return 0.5 * (b * b - a * a)

    def integrated_cdf(self, x):
        return 0.5 * x * x

    def conditional_mean(self, a, b):
        if not a < b:
            raise DegenerateInterval(f"empty interval [{a}, {b}]")
        if b - a < MASS_TOL:
            raise DegenerateInterval(
                f"interval [{a:.6g}, {b:.6g}] carries mass {b - a:.3g}")
        return 0.5 * (a + b)

    def __repr__(self):
        return "UniformPrior()"


class PowerPrior(Prior):
    """Prior with CDF F0(v) = v**k on [0, 1], k > 0.

    Exponents below one produce a decreasing hazard near zero and are
    rejected by the regularity check.
    """

    def __init__(self, k: float):
        if not k > 0:
            raise RegularityError("power exponent must be positive")
        self.k = float(k)
        super().__init__()

    def cdf(self, x):
        return np.clip(x, 0.0, 1.0) ** self.k

    def pdf(self, x):
        return self.k * np.asarray(x, dtype=float) ** (self.k - 1.0)

    def first_moment(self, a, b):
        k = self.k
        return k / (k + 1.0) * (b ** (k + 1.0) - a ** (k + 1.0))

    def integrated_cdf(self, x):
        return x ** (self.k + 1.0) / (self.k + 1.0)

    def conditional_mean(self, a, b):
        if not a < b:
            raise DegenerateInterval(f"empty interval [{a}, {b}]")
        k = self.k
        m = b**k - a**k
        if m < MASS_TOL:
            raise DegenerateInterval(
                f"interval [{a:.6g}, {b:.6g}] carries mass {m:.3g}")
        return k / (k + 1.0) * (b ** (k + 1.0) - a ** (k + 1.0)) / m

    def __repr__(self):
        return f"PowerPrior(k={self.k})"


class TabulatedPrior(Prior):
    """Prior given by density samples at strictly increasing knots on [0, 1].

    The density is linearly interpolated between samples and renormalized to
    integrate to one, so the CDF is an exact piecewise quadratic and partial
    first moments are exact piecewise cubics: conditional means carry no
    quadrature error.
    """

    def __init__(self, thetas, densities):
        t = np.asarray(thetas, dtype=float)
        f = np.asarray(densities, dtype=float)
        if t.ndim != 1 or t.size < 2 or t.shape != f.shape:
            raise RegularityError("need matching 1-d theta and density samples")
        if abs(t[0]) > 1e-12 or abs(t[-1] - 1.0) > 1e-12:
            raise RegularityError("theta samples must cover [0, 1] exactly")
        if np.any(np.diff(t) <= 0):
            raise RegularityError("theta samples must be strictly increasing")
        if np.any(f < 0) or np.any(f[1:-1] <= 0):
            raise RegularityError("density must be strictly positive on (0, 1)")
        total = float(np.trapezoid(f, t))
        if total <= 0:
            raise RegularityError("density integrates to zero")
        self.renormalization = 1.0 / total
        self._t = t
        self._f = f * self.renormalization
        self._slope = np.diff(self._f) / np.diff(t)
        # prefix sums: CDF, first moment and integrated CDF at the knots
        cdf = np.zeros_like(t)
        m1 = np.zeros_like(t)
        kk = np.zeros_like(t)
        for i in range(t.size - 1):
            u = t[i + 1] - t[i]
            fi, s, ti = self._f[i], self._slope[i], t[i]
            cdf[i + 1] = cdf[i] + fi * u + 0.5 * s * u * u
            m1[i + 1] = m1[i] + ti * fi * u + 0.5 * (fi + s * ti) * u * u + s * u**3 / 3.0
            kk[i + 1] = kk[i] + cdf[i] * u + 0.5 * fi * u * u + s * u**3 / 6.0
        cdf /= cdf[-1]  # absorb float residue so F0(1) = 1 exactly
        self._cdf_knots = cdf
        self._m1_knots = m1
        self._k_knots = kk
        super().__init__()

    def _piece(self, x):
        return np.clip(np.searchsorted(self._t, x, side="right") - 1, 0, self._t.size - 2)

    def cdf(self, x):
        x = np.clip(x, 0.0, 1.0)
        i = self._piece(x)
        u = x - self._t[i]
        return self._cdf_knots[i] + self._f[i] * u + 0.5 * self._slope[i] * u * u

    def pdf(self, x):
        x = np.clip(x, 0.0, 1.0)
        i = self._piece(x)
        return self._f[i] + self._slope[i] * (x - self._t[i])

    def _m1_upto(self, x):
        i = int(self._piece(x))
        u = x - self._t[i]
        fi, s, ti = self._f[i], self._slope[i], self._t[i]
        return self._m1_knots[i] + ti * fi * u + 0.5 * (fi + s * ti) * u * u + s * u**3 / 3.0

    def first_moment(self, a, b):
        return self._m1_upto(b) - self._m1_upto(a)

    def integrated_cdf(self, x):
        i = int(self._piece(x))
        u = x - self._t[i]
        fi, s = self._f[i], self._slope[i]
        return self._k_knots[i] + self._cdf_knots[i] * u + 0.5 * fi * u * u + s * u**3 / 6.0

    def __repr__(self):
        return f"TabulatedPrior({self._t.size} knots)"


# ---------------------------------------------------------------------------
# Posterior distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscloseSegment:
    lo: float
    hi: float


@dataclass(frozen=True)
class PoolSegment:
    lo: float
    hi: float
    atom: float
    mass: float


@dataclass(frozen=True)
class BiPoolSegment:
    lo: float
    hi: float
    atom_lo: float
    mass_lo: float
    atom_hi: float
    mass_hi: float


Segment = DiscloseSegment | PoolSegment | BiPoolSegment


@dataclass(frozen=True)
class PosteriorDistribution:
    """A candidate signal distribution, as tagged segments partitioning [0,1].

    Construction checks only the partition structure; semantic validity
    (atoms at conditional means, mean preservation) is the business of
    :func:`is_mpc`, so that infeasible candidates remain representable and
    can be reported on.
    """

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("posterior needs at least one segment")
        if abs(segs[0].lo) > 1e-9 or abs(segs[-1].hi - 1.0) > 1e-9:
            raise ValueError("segments must cover [0, 1]")
        for left, right in zip(segs, segs[1:]):
            if abs(left.hi - right.lo) > 1e-9:
                raise ValueError(
                    f"segments must be contiguous, got gap at {left.hi:.6g}")
        for s in segs:
            if s.hi <= s.lo:
                raise ValueError(f"empty segment [{s.lo}, {s.hi}]")
            if isinstance(s, PoolSegment):
                if not (s.lo - 1e-9 <= s.atom <= s.hi + 1e-9) or s.mass < 0:
                    raise ValueError("pool atom outside its interval")
            elif isinstance(s, BiPoolSegment):
                if s.mass_lo < 0 or s.mass_hi < 0 or s.atom_lo > s.atom_hi:
                    raise ValueError("bi-pool atoms disordered")
        object.__setattr__(self, "segments", segs)

    def atoms(self) -> list[tuple[float, float]]:
        """All (location, mass) point masses, in increasing location order."""
        out = []
        for s in self.segments:
            if isinstance(s, PoolSegment):
                out.append((s.atom, s.mass))
            elif isinstance(s, BiPoolSegment):
                out.append((s.atom_lo, s.mass_lo))
                out.append((s.atom_hi, s.mass_hi))
        return out

    def knots(self) -> list[float]:
        ks = [self.segments[0].lo]
        ks.extend(s.hi for s in self.segments)
        return ks

    def total_mass(self, prior: Prior) -> float:
        total = 0.0
        for s in self.segments:
            if isinstance(s, DiscloseSegment):
                total += prior.mass(s.lo, s.hi)
            elif isinstance(s, PoolSegment):
                total += s.mass
            else:
                total += s.mass_lo + s.mass_hi
        return total

    @staticmethod
    def disclose_all() -> "PosteriorDistribution":
        return PosteriorDistribution((DiscloseSegment(0.0, 1.0),))


def monotone_pool(prior: Prior, cutoffs) -> PosteriorDistribution:
    """Pool the prior on consecutive intervals delimited by ``cutoffs``.

    Each interval is replaced by an atom at its conditional mean carrying
    its prior mass; an empty cutoff list pools everything at the prior mean.
    """
    cuts = [float(c) for c in cutoffs]
    if any(not 0.0 < c < 1.0 for c in cuts):
        raise DegenerateInterval("cutoffs must lie strictly inside (0, 1)")
    edges = [0.0] + cuts + [1.0]
    if any(b - a < 1e-12 for a, b in zip(edges, edges[1:])):
        raise DegenerateInterval("coincident cutoffs")
    segments = []
    for a, b in zip(edges, edges[1:]):
        segments.append(PoolSegment(a, b, prior.conditional_mean(a, b),
                                    prior.mass(a, b)))
    return PosteriorDistribution(tuple(segments))


def conditional_mean(prior: Prior, a: float, b: float) -> float:
    return prior.conditional_mean(a, b)


def check_hazard_rate(prior: Prior, grid_n: int = _REGULARITY_GRID) -> HazardRateReport:
    return prior.check_hazard_rate(grid_n)


def integral_gap(posterior: PosteriorDistribution, prior: Prior, theta: float) -> float:
    """Exact value of integral_0^theta (F0 - G)(x) dx from the segments.

    G is reconstructed as the running mass of atoms plus the prior's own
    increments inside disclosure segments, so the evaluation carries no
    sampling error anywhere, in particular at segment knots.
    """
    theta = float(theta)
    if theta <= 0.0:
        return 0.0
    theta = min(theta, 1.0)
    acc = prior.integrated_cdf(theta)
    for s in posterior.segments:
        if isinstance(s, PoolSegment):
            if theta > s.atom:
                acc -= s.mass * (theta - s.atom)
        elif isinstance(s, BiPoolSegment):
            if theta > s.atom_lo:
                acc -= s.mass_lo * (theta - s.atom_lo)
            if theta > s.atom_hi:
                acc -= s.mass_hi * (theta - s.atom_hi)
        else:
            if theta <= s.lo:
                continue
            hi = min(theta, s.hi)
            inner = (prior.integrated_cdf(hi) - prior.integrated_cdf(s.lo)
                     - float(prior.cdf(s.lo)) * (hi - s.lo))
            acc -= inner
            if theta > s.hi:
                acc -= prior.mass(s.lo, s.hi) * (theta - s.hi)
    return acc


def is_mpc(posterior: PosteriorDistribution, prior: Prior,
           tol: float = 1e-9, grid_n: int = 1000) -> MpcReport:
    """Check the mean-preserving-contraction criterion for a candidate.

    Evaluates the integral gap at every segment knot, every atom, and a
    ``grid_n``-point grid; reports the worst violation location.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    points = sorted(set(posterior.knots())
                    | {loc for loc, _ in posterior.atoms()}
                    | set(np.linspace(0.0, 1.0, grid_n)))
    worst_gap, worst_loc = 0.0, 0.0
    for p in points:
        g = integral_gap(posterior, prior, p)
        if g < worst_gap:
            worst_gap, worst_loc = g, p
    terminal = integral_gap(posterior, prior, 1.0)
    mass_error = abs(posterior.total_mass(prior) - 1.0)
    feasible = worst_gap >= -tol and abs(terminal) <= tol and mass_error <= tol
    return MpcReport(feasible, worst_gap, worst_loc, terminal,
                     mass_error, len(points))
