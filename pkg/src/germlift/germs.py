"""Point-indexed families of distributions and their scaling reports.

A germ assigns to every point a distribution meant as a local
description of one global object.  Its quality is measured two ways:
how fast single-point pairings shrink with the probe scale
(homogeneity), and how fast pairings of differences between nearby
points shrink (coherence).  Both are suprema over probe balls; this
module estimates them from below on a deterministic grid of centers,
offsets, scales and probe shapes, and fits the scaling exponents by
log-log regression.  The weak variants probe the scaling part with
moment-annihilated shapes and add a unit-scale part over plain shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._fit import SlopeFit, fit_loglog
from .distributions import Distribution, HarmonicSum, combine
from .testfn import probe_family, scale_center

_N_CENTERS = 17
_N_SCALES = 12
_DROP_COARSE = 4
_DROP_FINE = 1


def canonical_order(homogeneity: float, alpha: float) -> int:
    """Smallest probe smoothness order that sees both exponents.

    Pairings against an order-r ball control r derivatives' worth of
    blowup, so the order must exceed both -homogeneity and -alpha;
    nonnegative exponents need none.
    """
    worst = max(-float(homogeneity), -float(alpha))
    return max(0, int(np.floor(worst)) + 1)


class Germ:
    """An assignment x -> Distribution with declared scaling exponents.

    ``homogeneity`` bounds single-point pairings, the pair
    ``(alpha, gamma)`` bounds difference pairings; both declarations
    are estimates to be checked by the reports, not trusted facts.
    Slices are cached per center since assignments may build them
    lazily from expensive ingredients.
    """

    def __init__(self, assignment, homogeneity: float, alpha: float,
                 gamma: float, order: int | None = None, label: str = ""):
        if alpha > gamma or homogeneity > gamma:
            raise ValueError(
                "coherence exponent must dominate both the local exponent "
                "and the homogeneity")
        self._assignment = assignment
        self.homogeneity = float(homogeneity)
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.order = (canonical_order(homogeneity, alpha)
                      if order is None else int(order))
        self.label = label
        self._slices: dict[float, Distribution] = {}

    def at(self, x: float) -> Distribution:
        x = float(x)
        if x not in self._slices:
            self._slices[x] = self._assignment(x)
        return self._slices[x]

    def minus_distribution(self, g: Distribution) -> "Germ":
        """The germ of local errors x -> F_x - g, same declarations."""
        return Germ(lambda x: combine([1.0, -1.0], [self.at(x), g]),
                    self.homogeneity, self.alpha, self.gamma,
                    order=self.order, label=self.label + "-recentered")


@dataclass(frozen=True)
class SampleRow:
    x: float
    y: float
    lam: float
    family: str
    value: float        # pairing magnitude divided by the claimed weight
    raw: float          # pairing magnitude itself


@dataclass(frozen=True)
class SeminormReport:
    """Sampled lower estimate of one scaling seminorm plus fitted slopes.

    ``estimate`` is exactly the maximum of ``value`` over ``rows``.
    ``slope`` is the primary fitted exponent: the homogeneity exponent,
    or the full coherence exponent read off equal offset and scale.
    ``alpha_slope`` is filled by coherence reports only, from the
    regime where the probe scale sits far below the offset.
    """

    kind: str
    exponents: tuple[float, ...]
    estimate: float
    slope: float
    r_squared: float
    alpha_slope: float | None
    rows: tuple[SampleRow, ...] = field(repr=False)

    @property
    def n_samples(self) -> int:
        return len(self.rows)

    def csv_rows(self):
        return [(r.x, r.y, r.lam, r.family, r.value) for r in self.rows]

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "exponents": list(self.exponents),
            "estimate": self.estimate,
            "slope": self.slope,
            "alpha_slope": self.alpha_slope,
            "r_squared": self.r_squared,
            "n_samples": self.n_samples,
        }


def _centers(region, n: int = _N_CENTERS) -> np.ndarray:
    # cell midpoints: non-dyadic rationals, so lacunary fixtures keep
    # their sine components alive at every sampled center
    lo, hi = float(region[0]), float(region[1])
    edges = np.linspace(lo, hi, n + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def _scales(lam_bar: float) -> np.ndarray:
    # a larger cap adds coarse rungs but never moves the fine end, so
    # slope fits at different caps share their deepest octaves
    extra = max(0, int(round(np.log2(float(lam_bar)))))
    n = _N_SCALES + extra
    return float(lam_bar) * 2.0 ** -np.arange(n, dtype=float)


def _drop_coarse(lams: np.ndarray) -> int:
    # the fixture series are not self-similar near unit scale, so the
    # guard cuts at an absolute scale; counting rungs from the cap
    # would shift the fit window whenever the cap moves
    cutoff = min(float(lams[0]), 1.0) * 2.0 ** -_DROP_COARSE
    return int(np.sum(lams > cutoff * (1.0 + 1e-9)))


def _sup_per_scale(rows, lams):
    sups = np.zeros_like(lams)
    for r in rows:
        j = int(np.argmin(np.abs(lams - r.lam)))
        sups[j] = max(sups[j], r.raw)
    return sups


def _family_or_default(family, order: int, annihilate: int = -1):
    if family is not None:
        return tuple(family)
    return probe_family(order, annihilate=annihilate)


def homogeneity_report(germ: Germ, exponent: float, region=(-1.0, 1.0),
                       lam_bar: float = 1.0, order: int | None = None,
                       family=None) -> SeminormReport:
    """Estimate sup |F_x(probe at scale lam)| / lam^exponent.

    The slope is fitted on per-scale suprema of the raw pairings, so a
    germ passes as exponent-homogeneous when slope >= exponent - 0.1
    regardless of the constant in front.
    """
    order = germ.order if order is None else int(order)
    fam = _family_or_default(family, order)
    lams = _scales(lam_bar)
    rows = []
    for x in _centers(region):
        fx = germ.at(x)
        for i, phi in enumerate(fam):
            for lam in lams:
                raw = abs(fx.pair(scale_center(phi, x, lam)))
                rows.append(SampleRow(x, x, lam, f"b{i}", raw * lam ** -exponent, raw))
    fit = fit_loglog(lams, _sup_per_scale(rows, lams),
                     drop_coarse=_drop_coarse(lams), drop_fine=_DROP_FINE)
    est = max((r.value for r in rows), default=0.0)
    return SeminormReport(kind="homogeneity", exponents=(float(exponent),),
                          estimate=est, slope=fit.slope,
                          r_squared=fit.r_squared, alpha_slope=None,
                          rows=tuple(rows))


def _coherence_samples(germ: Germ, region, lam_bar, fam, tag: str):
    lo, hi = float(region[0]), float(region[1])
    lams = _scales(lam_bar)
    # offsets live on the same ladder as the scales so the diagonal
    # (offset equal to scale) reaches every depth the slope fit keeps
    offsets = np.concatenate([lams[1:], -lams[1:]])
    rows = []
    for x in _centers(region):
        fx = germ.at(x)
        for i, phi in enumerate(fam):
            for lam in lams:
                probe = scale_center(phi, x, lam)
                base = fx.pair(probe)
                for h in offsets:
                    y = x + h
                    if not lo <= y <= hi:
                        continue
                    raw = abs(germ.at(y).pair(probe) - base)
                    rows.append((x, y, lam, f"{tag}{i}", raw))
    return lams, rows


def _coherence_fits(raw_rows, lams) -> tuple[SlopeFit, float]:
    # full exponent from the diagonal (offset equal to scale), local
    # exponent from a two-variable fit where the scale sits well below
    # the offset
    diag_sups = np.zeros_like(lams)
    deep = []
    kept = lams[_drop_coarse(lams):len(lams) - _DROP_FINE]
    for x, y, lam, _fid, raw in raw_rows:
        h = abs(y - x)
        if abs(h - lam) < 1e-12 * lam:
            j = int(np.argmin(np.abs(lams - lam)))
            diag_sups[j] = max(diag_sups[j], raw)
        if raw > 1e-14 and lam <= 0.25 * h and np.any(np.isclose(kept, lam)):
            deep.append((np.log2(lam), np.log2(h + lam), np.log2(raw)))
    gamma_fit = fit_loglog(lams, diag_sups,
                           drop_coarse=_drop_coarse(lams),
                           drop_fine=_DROP_FINE)
    if len(deep) < 4:
        return gamma_fit, float("nan")
    arr = np.asarray(deep)
    design = np.column_stack([arr[:, 0], arr[:, 1], np.ones(len(arr))])
    coef, *_ = np.linalg.lstsq(design, arr[:, 2], rcond=None)
    return gamma_fit, float(coef[0])


def coherence_report(germ: Germ, alpha: float, gamma: float,
                     region=(-1.0, 1.0), lam_bar: float = 1.0,
                     order: int | None = None, family=None) -> SeminormReport:
    """Estimate the difference seminorm at the declared exponent pair.

    Each sample weighs |(F_y - F_x)(probe at x, scale lam)| against
    lam^alpha (|y-x| + lam)^(gamma-alpha); the grid covers offsets
    equal to the scale and offsets far above it, the two regimes the
    fit separates.
    """
    order = germ.order if order is None else int(order)
    fam = _family_or_default(family, order)
    lams, raw_rows = _coherence_samples(germ, region, lam_bar, fam, "b")
    rows = tuple(
        SampleRow(x, y, lam, fid,
                  raw * lam ** -alpha * (abs(y - x) + lam) ** (alpha - gamma),
                  raw)
        for x, y, lam, fid, raw in raw_rows)
    gamma_fit, alpha_slope = _coherence_fits(raw_rows, lams)
    est = max((r.value for r in rows), default=0.0)
    return SeminormReport(kind="coherence",
                          exponents=(float(alpha), float(gamma)),
                          estimate=est, slope=gamma_fit.slope,
                          r_squared=gamma_fit.r_squared,
                          alpha_slope=alpha_slope, rows=rows)


def weak_reports(germ: Germ, homogeneity: float, alpha: float, gamma: float,
                 region=(-1.0, 1.0), lam_bar: float = 1.0,
                 order: int | None = None) -> tuple[SeminormReport,
                                                    SeminormReport]:
    """Weak homogeneity and weak coherence reports, in that order.

    The scaling parts run over moment-annihilated probes (through the
    floor of the target exponent, when it is nonnegative) and keep the
    usual slope fit; the unit-scale parts run over plain probes and
    only feed the estimate.  For negative exponents no annihilation is
    required and the scaling parts coincide with the strong ones.
    """
    order = germ.order if order is None else int(order)

    def annihilated(exponent):
        if exponent < 0.0:
            return probe_family(order)
        return probe_family(order, annihilate=int(np.floor(exponent)))

    plain = probe_family(order)

    hom = homogeneity_report(germ, homogeneity, region, lam_bar, order,
                             family=annihilated(homogeneity))
    unit_rows = []
    for x in _centers(region):
        fx = germ.at(x)
        for i, psi in enumerate(plain):
            raw = abs(fx.pair(scale_center(psi, x, 1.0)))
            unit_rows.append(SampleRow(x, x, 1.0, f"u{i}", raw, raw))
    hom_rows = hom.rows + tuple(unit_rows)
    weak_hom = SeminormReport(
        kind="weak_homogeneity", exponents=(float(homogeneity),),
        estimate=max((r.value for r in hom_rows), default=0.0),
        slope=hom.slope, r_squared=hom.r_squared, alpha_slope=None,
        rows=hom_rows)

    coh = coherence_report(germ, alpha, gamma, region, lam_bar, order,
                           family=annihilated(gamma))
    unit_diff_rows = []
    for x in _centers(region):
        fx = germ.at(x)
        for i, psi in enumerate(plain):
            probe = scale_center(psi, x, 1.0)
            base = fx.pair(probe)
            for h in (0.5, -0.5, 0.125, -0.125):
                y = x + h
                if not region[0] <= y <= region[1]:
                    continue
                raw = abs(germ.at(y).pair(probe) - base)
                unit_diff_rows.append(SampleRow(x, y, 1.0, f"u{i}", raw, raw))
    coh_rows = coh.rows + tuple(unit_diff_rows)
    weak_coh = SeminormReport(
        kind="weak_coherence", exponents=(float(alpha), float(gamma)),
        estimate=max((r.value for r in coh_rows), default=0.0),
        slope=coh.slope, r_squared=coh.r_squared,
        alpha_slope=coh.alpha_slope, rows=coh_rows)
    return weak_hom, weak_coh


# ---------------------------------------------------------------------------
# fixtures


def _point_values(f):
    if isinstance(f, Distribution) and hasattr(f, "evaluate"):
        return lambda x: float(f.evaluate(np.array([x]))[0])
    if callable(f):
        return lambda x: float(f(x))
    raise ValueError("need a callable or an evaluable distribution")


def make_fixture(kind: str, **params) -> Germ:
    """Construct the standard germ fixtures.

    constant(g, regularity): every slice is g.
    taylor(f, hoelder, jet=0): slice at x is the degree-jet Taylor
        polynomial of f, which for jet 0 is the constant f(x).
    young(f, hoelder, g, regularity): slice at x is f(x) times g.
    model(coeffs, basis, gamma, ...): slice at x sums coefficient
        values at x against basis germ slices at x.
    """
    if kind == "constant":
        g = params["g"]
        reg = float(params.get("regularity", 0.0))
        gamma = float(params.get("gamma", max(reg, 0.0) + 2.0))
        return Germ(lambda x: g, homogeneity=reg, alpha=min(reg, gamma),
                    gamma=gamma, order=params.get("order"),
                    label="constant")
    if kind == "taylor":
        f = params["f"]
        hoelder = float(params["hoelder"])
        jet = int(params.get("jet", 0))
        values = _point_values(f)
        if jet == 0:
            def assignment(x):
                return HarmonicSum.constant(values(x))
        else:
            from .distributions import pointwise_derivative

            def assignment(x):
                parts = [HarmonicSum.constant(values(x))]
                coeffs = [1.0]
                for k in range(1, jet + 1):
                    d = pointwise_derivative(f, x, k, delta=2.0 ** -10)
                    parts.append(HarmonicSum.monomial_jet(x, k))
                    coeffs.append(d.value)
                return combine(coeffs, parts)
        return Germ(assignment, homogeneity=0.0, alpha=0.0, gamma=hoelder,
                    order=params.get("order"), label="taylor")
    if kind == "young":
        f, g = params["f"], params["g"]
        hoelder = float(params["hoelder"])
        reg = float(params["regularity"])
        values = _point_values(f)
        return Germ(lambda x: combine([values(x)], [g]),
                    homogeneity=reg, alpha=reg, gamma=reg + hoelder,
                    order=params.get("order"), label="young")
    if kind == "model":
        basis = list(params["basis"])
        coeff_fns = [_point_values(c) for c in params["coeffs"]]
        gamma = float(params["gamma"])
        hom = float(params.get("homogeneity",
                               min(g.homogeneity for g in basis)))
        alpha = float(params.get("alpha", hom))

        def assignment(x):
            return combine([fn(x) for fn in coeff_fns],
                           [g.at(x) for g in basis])

        return Germ(assignment, homogeneity=hom, alpha=alpha, gamma=gamma,
                    order=params.get("order"), label="model")
    raise ValueError(f"unknown germ fixture kind: {kind!r}")
