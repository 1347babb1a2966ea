"""Intermediary-side machinery: indirect utility, dual price certificates,
and an independent linear-program oracle for the obedience constraint.

Given a posted menu, the intermediary plays a linear persuasion game: he
picks a mean-preserving contraction G of the prior to maximise
integral u(w) dG(w), where u(w) = (w + b) q(w) - t(w) is his indirect
utility from inducing posterior mean w. Two independent routes certify
that a candidate G is intermediary-optimal:

* a *dual price function*: a convex p >= u that touches u on the support
  of G and integrates equally under G and the prior. Existence of such a
  p proves optimality of G. For monotone-pooling candidates p must be
  affine on every pooled interval and pinned to u at every atom, which
  leaves a one-parameter affine family; feasibility reduces to interval
  intersection and is decided exactly.

* an *obedient-recommendation LP*: discretise the prior into equal-width
  cells with exact masses and conditional means, and choose how much of
  each cell to attach to each recommended item subject to the posterior
  mean per item lying in that item's purchase region. With finitely many
  items the indirect utility is affine inside each purchase region, so
  this LP is exact up to the cell-mean discretisation.

The two routes never share code paths: the certificate is built from the
closed-form geometry, the LP from a generic solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .costs import CostFunction
from .distributions import (BiPoolSegment, DiscloseSegment, PoolSegment,
                            PosteriorDistribution, Prior)
from .errors import CertificateFailed, LpInfeasible
from .menus import Menu

MAJORIZE_TOL = 1e-9
SUPPORT_TOL = 1e-9
INTEGRAL_TOL = 1e-8
VERIFY_GRID = 10001


def buyer_choice(menu: Menu, w: float) -> int:
    """Buyer-optimal item index at posterior mean w (0 = outside option);
    indifference is broken toward the higher quality."""
    return menu.choice(w)


def indirect_utility(menu: Menu, bias: float, w: float) -> float:
    """The intermediary's payoff (w + bias) q - t at the buyer's choice."""
    a = menu.choice(w)
    if a == 0:
        return 0.0
    item = menu.items[a - 1]
    return (w + bias) * item.quality - item.transfer


def indirect_utility_grid(menu: Menu, bias: float, ws: np.ndarray) -> np.ndarray:
    """Vectorized indirect utility, upper semicontinuous at breakpoints."""
    from .menus import CHOICE_TIE_TOL
    breaks = np.asarray(menu.breakpoints)
    q = np.concatenate(([0.0], menu.qualities()))
    t = np.concatenate(([0.0], menu.transfers()))
    idx = np.searchsorted(breaks, ws + CHOICE_TIE_TOL, side="right")
    return (ws + bias) * q[idx] - t[idx]


def intermediary_value(menu: Menu, bias: float, prior: Prior,
                       posterior: PosteriorDistribution) -> float:
    """Exact integral of the indirect utility under a posterior: atoms are
    summed directly, disclosure segments are split at the menu breakpoints
    and integrated with exact prior masses and first moments."""
    total = 0.0
    for seg in posterior.segments:
        if isinstance(seg, PoolSegment):
            total += seg.mass * indirect_utility(menu, bias, seg.atom)
        elif isinstance(seg, BiPoolSegment):
            total += seg.mass_lo * indirect_utility(menu, bias, seg.atom_lo)
            total += seg.mass_hi * indirect_utility(menu, bias, seg.atom_hi)
        else:
            edges = [seg.lo] + [b for b in menu.breakpoints
                                if seg.lo < b < seg.hi] + [seg.hi]
            for a, b in zip(edges, edges[1:]):
                action = menu.choice(0.5 * (a + b))
                if action == 0:
                    continue
                item = menu.items[action - 1]
                m = prior.mass(a, b)
                total += item.quality * (prior.first_moment(a, b) + bias * m)
                total -= item.transfer * m
    return total


# ---------------------------------------------------------------------------
# Dual price certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualPriceCertificate:
    """A convex piecewise-affine price function, stored as knot values."""

    knots: tuple[float, ...]
    values: tuple[float, ...]

    def value(self, x):
        return np.interp(x, self.knots, self.values)

    def slopes(self) -> np.ndarray:
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        return np.diff(v) / np.diff(k)

    def to_dict(self) -> dict:
        return {"knots": list(self.knots), "values": list(self.values)}


@dataclass(frozen=True)
class CertificateReport:
    """Numeric verification of the four price-function conditions."""

    majorize_violation: float   # max of u - p over the grid (<= tol when ok)
    convexity_violation: float  # max slope decrease across pieces
    support_violation: float    # max |p - u| over posterior atoms
    integral_mismatch: float    # |int p dG - int p dF0|
    grid_points: int

    @property
    def ok(self) -> bool:
        return (self.majorize_violation <= MAJORIZE_TOL
                and self.convexity_violation <= 1e-9
                and self.support_violation <= SUPPORT_TOL
                and self.integral_mismatch <= INTEGRAL_TOL)


def _price_integral_under_prior(prior: Prior, cert: DualPriceCertificate) -> float:
    total = 0.0
    for a, b, va, vb in zip(cert.knots, cert.knots[1:],
                            cert.values, cert.values[1:]):
        if b <= a:
            continue
        slope = (vb - va) / (b - a)
        m = prior.mass(a, b)
        total += va * m + slope * (prior.first_moment(a, b) - a * m)
    return total


def _price_integral_under_posterior(menu: Menu, prior: Prior,
                                    posterior: PosteriorDistribution,
                                    cert: DualPriceCertificate) -> float:
    total = 0.0
    for seg in posterior.segments:
        if isinstance(seg, PoolSegment):
            total += seg.mass * float(cert.value(seg.atom))
        elif isinstance(seg, BiPoolSegment):
            total += seg.mass_lo * float(cert.value(seg.atom_lo))
            total += seg.mass_hi * float(cert.value(seg.atom_hi))
        else:
            sub = DualPriceCertificate(
                tuple([seg.lo] + [k for k in cert.knots if seg.lo < k < seg.hi]
                      + [seg.hi]),
                tuple(float(cert.value(x))
                      for x in [seg.lo] + [k for k in cert.knots
                                           if seg.lo < k < seg.hi] + [seg.hi]))
            total += _price_integral_under_prior(prior, sub)
    return total


def verify_certificate(menu: Menu, bias: float, prior: Prior,
                       posterior: PosteriorDistribution,
                       cert: DualPriceCertificate,
                       n_grid: int = VERIFY_GRID) -> CertificateReport:
    """Check the candidate price function against all four conditions on a
    dense grid augmented with every knot, atom and breakpoint."""
    atoms = posterior.atoms()
    grid = np.union1d(np.linspace(0.0, 1.0, n_grid),
                      np.concatenate([np.asarray(cert.knots),
                                      np.asarray([a for a, _ in atoms]),
                                      np.asarray(menu.breakpoints)]))
    p = np.asarray(cert.value(grid))
    u = indirect_utility_grid(menu, bias, grid)
    majorize = float(np.max(u - p))
    sl = cert.slopes()
    convexity = float(np.max(-np.diff(sl))) if sl.size > 1 else 0.0
    support = max(abs(float(cert.value(a)) - indirect_utility(menu, bias, a))
                  for a, _ in atoms) if atoms else 0.0
    mismatch = abs(_price_integral_under_posterior(menu, prior, posterior, cert)
                   - _price_integral_under_prior(prior, cert))
    return CertificateReport(majorize, convexity, support, mismatch, grid.size)


def build_certificate(menu: Menu, bias: float, prior: Prior,
                      posterior: PosteriorDistribution) -> DualPriceCertificate:
    """Construct a dual price function for a monotone-pooling candidate, or
    raise :class:`CertificateFailed` when none exists.

    Any valid price function must be affine on every pooled interval
    (otherwise the equal-integrals condition fails by Jensen) and equal to
    the indirect utility at every atom. Continuity then determines all
    slopes from the slope on the first interval, so feasibility is the
    intersection of affine inequality constraints in that one parameter:
    convexity across pieces and majorization at the piecewise-affine kinks
    of the indirect utility. The search is exact; failure names the
    binding condition and its location.
    """
    segs = posterior.segments
    if not all(isinstance(s, PoolSegment) for s in segs):
        raise ValueError("certificate construction requires a monotone-pooling "
                         "posterior (pool segments only)")
    edges = [segs[0].lo] + [s.hi for s in segs]
    atoms = [s.atom for s in segs]
    u_at = [indirect_utility(menu, bias, a) for a in atoms]
    n = len(segs)

    # слope of piece j is affine in the free first slope: beta_j = A[j] + B[j]*s0
    A = [0.0] * n
    B = [0.0] * n
    B[0] = 1.0
    pc_a = [0.0] * (n + 1)  # p at edges, affine coefficients
    pc_b = [0.0] * (n + 1)
    pc_a[0], pc_b[0] = u_at[0] + A[0] * (edges[0] - atoms[0]), B[0] * (edges[0] - atoms[0])
    for j in range(n):
        dx = edges[j + 1] - atoms[j]
        pc_a[j + 1] = u_at[j] + A[j] * dx
        pc_b[j + 1] = B[j] * dx
        if j + 1 < n:
            denom = edges[j + 1] - atoms[j + 1]  # negative: atom is interior
            A[j + 1] = (pc_a[j + 1] - u_at[j + 1]) / denom
            B[j + 1] = pc_b[j + 1] / denom

    lo, lo_why = -np.inf, None
    hi, hi_why = np.inf, None

    def add(const: float, coef: float, rhs: float, why: tuple[str, float]):
        nonlocal lo, hi, lo_why, hi_why
        if abs(coef) < 1e-14:
            if const < rhs - 1e-12:
                raise CertificateFailed(*why, detail=f"slack {const - rhs:.3g}")
            return
        bound = (rhs - const) / coef
        if coef > 0:
            if bound > lo:
                lo, lo_why = bound, why
        else:
            if bound < hi:
                hi, hi_why = bound, why

    for j in range(n - 1):
        # (ii) convexity: beta_{j+1} >= beta_j
        add(A[j + 1] - A[j], B[j + 1] - B[j], -1e-11,
            ("(ii) convexity", edges[j + 1]))
    for j in range(n):
        pts = [edges[j], edges[j + 1]]
        pts += [w for w in menu.breakpoints if edges[j] < w < edges[j + 1]]
        for x in pts:
            # (i) majorization at every kink of the indirect utility
            const = u_at[j] + A[j] * (x - atoms[j])
            coef = B[j] * (x - atoms[j])
            add(const, coef, indirect_utility(menu, bias, x) - MAJORIZE_TOL,
                ("(i) majorization", x))

    if lo > hi + 1e-12:
        why = lo_why if (lo_why and lo_why[0].startswith("(i)")) else hi_why or lo_why
        other = hi_why if why is lo_why else lo_why
        raise CertificateFailed(
            why[0], why[1],
            detail=f"infeasible slope window [{lo:.6g}, {hi:.6g}]"
                   + (f"; clashes with {other[0]} at w={other[1]:.6g}" if other else ""))

    first_action = menu.choice(atoms[0])
    canonical = 0.0 if first_action == 0 else menu.items[first_action - 1].quality
    s0 = min(max(canonical, lo if np.isfinite(lo) else canonical),
             hi if np.isfinite(hi) else canonical)
    values = tuple(pc_a[j] + pc_b[j] * s0 for j in range(n + 1))
    cert = DualPriceCertificate(tuple(edges), values)

    report = verify_certificate(menu, bias, prior, posterior, cert)
    if not report.ok:
        raise CertificateFailed("post-verification", None,
                                detail=f"report={report}")
    return cert


# ---------------------------------------------------------------------------
# Obedient-recommendation LP oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleBestResponse:
    """Best-response value and structure found by the recommendation LP."""

    value: float
    posterior: PosteriorDistribution
    action_masses: tuple[float, ...]
    action_means: tuple[float | None, ...]
    grid_m: int


@dataclass(frozen=True)
class ObedienceReport:
    """Comparison of a candidate posterior against the LP best response.

    ``gap`` = oracle value - candidate value. The oracle maximises over a
    cell discretisation, so the gap of a truly optimal candidate is zero up
    to a tolerance of the order of the cell width; strongly positive gaps
    certify disobedience.
    """

    candidate_value: float
    oracle_value: float
    oracle_distribution: PosteriorDistribution
    gap: float
    tol: float
    grid_m: int

    @property
    def obedient(self) -> bool:
        return self.gap <= self.tol

    def to_dict(self) -> dict:
        return {
            "candidate_value": self.candidate_value,
            "oracle_value": self.oracle_value,
            "gap": self.gap,
            "tol": self.tol,
            "grid_m": self.grid_m,
            "obedient": self.obedient,
        }


def _cell_grid(prior: Prior, grid_m: int):
    edges = np.linspace(0.0, 1.0, grid_m + 1)
    cdf = np.asarray(prior.cdf(edges), dtype=float)
    masses = np.diff(cdf)
    means = np.empty(grid_m)
    for i in range(grid_m):
        if masses[i] > 1e-15:
            means[i] = prior.first_moment(edges[i], edges[i + 1]) / masses[i]
        else:
            means[i] = 0.5 * (edges[i] + edges[i + 1])
    return edges, masses, means


def _mass_quantile(prior: Prior, lo: float, hi: float, target: float) -> float:
    """x in [lo, hi] with prior mass(lo, x) = target, by bisection."""
    a, b = lo, hi
    for _ in range(60):
        mid = 0.5 * (a + b)
        if prior.mass(lo, mid) < target:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _snap_posterior(prior: Prior, edges: np.ndarray, masses: np.ndarray,
                    x: np.ndarray) -> PosteriorDistribution:
    """Turn an LP allocation into a valid monotone-pooling posterior.

    Cells fully attached to one recommendation keep their interval; split
    cells are divided at mass-preserving quantiles, lower action to the
    left. Adjacent intervals with the same recommendation merge, and each
    merged interval pools at its exact prior conditional mean, so the
    result is a genuine mean-preserving contraction by construction.
    """
    pieces: list[tuple[float, float, int]] = []
    n_actions = x.shape[1]
    for i in range(x.shape[0]):
        cell_mass = masses[i]
        if cell_mass <= 1e-15:
            pieces.append((edges[i], edges[i + 1], pieces[-1][2] if pieces else 0))
            continue
        alloc = np.maximum(x[i], 0.0)
        keep = alloc >= 1e-10 * cell_mass
        if not np.any(keep):
            keep[int(np.argmax(alloc))] = True
        actions = [a for a in range(n_actions) if keep[a]]
        if len(actions) == 1:
            pieces.append((edges[i], edges[i + 1], actions[0]))
            continue
        weights = alloc[keep]
        weights = weights * (cell_mass / weights.sum())
        lo = edges[i]
        for a, wgt in zip(actions[:-1], weights[:-1]):
            split = _mass_quantile(prior, lo, edges[i + 1], wgt)
            pieces.append((lo, split, a))
            lo = split
        pieces.append((lo, edges[i + 1], actions[-1]))
    merged: list[tuple[float, float, int]] = []
    for lo, hi, a in pieces:
        if merged and merged[-1][2] == a:
            merged[-1] = (merged[-1][0], hi, a)
        else:
            merged.append((lo, hi, a))
    segments = []
    for lo, hi, _ in merged:
        if hi - lo < 1e-13:
            continue
        segments.append(PoolSegment(lo, hi, prior.conditional_mean(lo, hi),
                                    prior.mass(lo, hi)))
    # absorb any dropped slivers into the partition bookkeeping
    fixed = []
    cursor = 0.0
    for seg in segments:
        fixed.append(PoolSegment(cursor, seg.hi, seg.atom, seg.mass))
        cursor = seg.hi
    last = fixed[-1]
    fixed[-1] = PoolSegment(last.lo, 1.0, last.atom, last.mass)
    return PosteriorDistribution(tuple(fixed))


def oracle_best_response(menu: Menu, bias: float, prior: Prior,
                         grid_m: int = 201) -> OracleBestResponse:
    """Solve the obedient-recommendation LP on a ``grid_m``-cell grid.

    Variables x[cell, a] >= 0 allocate cell mass to recommended item a
    (0 = outside option); each recommendation's posterior mean must lie in
    that item's purchase region. The LP value converges to the exact
    persuasion optimum at the cell-width rate; the induced posterior is
    returned in snapped monotone-pooling form.
    """
    if grid_m < 51:
        raise ValueError("grid_m must be at least 51")
    edges, masses, means = _cell_grid(prior, grid_m)
    n_actions = menu.n_items + 1
    lows = np.concatenate(([0.0], np.asarray(menu.breakpoints)))
    highs = np.concatenate((np.asarray(menu.breakpoints), [1.0]))
    q = np.concatenate(([0.0], menu.qualities()))
    t = np.concatenate(([0.0], menu.transfers()))

    n_var = grid_m * n_actions

    def vid(cell, action):
        return cell * n_actions + action

    payoff = ((means[:, None] + bias) * q[None, :] - t[None, :]).ravel()

    rows, cols, vals = [], [], []
    for i in range(grid_m):
        for a in range(n_actions):
            rows.append(i)
            cols.append(vid(i, a))
            vals.append(1.0)
    a_eq = sparse.csr_matrix((vals, (rows, cols)), shape=(grid_m, n_var))
    b_eq = masses

    rows, cols, vals = [], [], []
    b_ub = []
    r = 0
    for a in range(n_actions):
        for i in range(grid_m):
            rows.append(r)
            cols.append(vid(i, a))
            vals.append(-(means[i] - lows[a]))
        b_ub.append(0.0)
        r += 1
        for i in range(grid_m):
            rows.append(r)
            cols.append(vid(i, a))
            vals.append(means[i] - highs[a])
        b_ub.append(0.0)
        r += 1
    a_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(r, n_var))

    res = linprog(-payoff, A_ub=a_ub, b_ub=np.asarray(b_ub),
                  A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise LpInfeasible(f"LP solver failed: {res.message}")

    x = res.x.reshape(grid_m, n_actions)
    action_masses = x.sum(axis=0)
    action_means = []
    for a in range(n_actions):
        if action_masses[a] > 1e-12:
            action_means.append(float((x[:, a] * means).sum() / action_masses[a]))
        else:
            action_means.append(None)
    posterior = _snap_posterior(prior, edges, masses, x)
    return OracleBestResponse(float(-res.fun), posterior,
                              tuple(float(m) for m in action_masses),
                              tuple(action_means), grid_m)


def default_obedience_tol(grid_m: int) -> float:
    """5e-3 at the default 201-cell grid, scaling with the cell width."""
    return 1.005 / grid_m


def check_obedience(menu: Menu, bias: float, prior: Prior,
                    posterior: PosteriorDistribution,
                    tol: float | None = None,
                    grid_m: int = 201) -> ObedienceReport:
    """Compare a candidate posterior's exact intermediary payoff against the
    LP best response; the candidate is obedient when the gap is within
    tolerance (replacing a value by its cell mean perturbs payoffs at first
    order in the cell width, hence the default scaling)."""
    if tol is None:
        tol = default_obedience_tol(grid_m)
    candidate = intermediary_value(menu, bias, prior, posterior)
    oracle = oracle_best_response(menu, bias, prior, grid_m)
    gap = oracle.value - candidate
    return ObedienceReport(candidate, oracle.value, oracle.posterior,
                           gap, tol, grid_m)
