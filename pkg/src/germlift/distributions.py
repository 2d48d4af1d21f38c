"""Distributions on the line and the pairings everything else runs on.

Two families of distributions cover all fixtures in the package.

``HarmonicSum`` is a finite sum of terms p(y) cos(omega y + theta)
with polynomial envelopes.  Pairing such a term against a recentered,
rescaled test function has a closed form through the oscillatory
transforms of the base function, so these pairings are exact up to
leaf quadrature no matter how fine the probe scale is.  Lacunary
cosine series (partial Weierstrass sums), their weak derivatives,
polynomials and constants all live here.

``GridFunction`` is a sampled smooth function with local cubic
interpolation, for payloads with no usable structure.

Weak derivatives move the derivative onto the probe.  Pointwise
derivatives are recovered from pairings with a shrinking mollifier
along a geometric scale schedule, with the limit taken by geometric
tail extrapolation; the increments of that telescoping sequence are
exposed because their decay rate is a quantity of interest in its own
right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fit import SlopeFit, fit_loglog
from ._quad import adaptive_rule
from .errors import NonConvergentError
from .sampling import center_grid, dyadic_scales
from .testfn import (ScaledTestFunction, TestFunction, scale_center,
                     vanishing_moment_mollifier)

# ---------------------------------------------------------------------------
# base type


class Distribution:
    """Something that pairs linearly with scaled test functions."""

    #: the test-function differentiability order the pairing consumes
    declared_order: int = 0
    #: interval outside which the distribution vanishes, or None
    support_hint: tuple[float, float] | None = None

    def pair(self, probe: ScaledTestFunction) -> float:
        raise NotImplementedError

    def pair_smooth(self, fn, lo: float, hi: float, scale: float = 1.0,
                    frequency: float = 0.0) -> float:
        """Pair against a generic smooth function given as a callable."""
        raise NotImplementedError

    def evaluate(self, y):
        """Pointwise values, for distributions that are functions."""
        raise NotImplementedError

    def __mul__(self, c: float) -> "Distribution":
        return combine([float(c)], [self])

    __rmul__ = __mul__

    def __add__(self, other: "Distribution") -> "Distribution":
        return combine([1.0, 1.0], [self, other])

    def __sub__(self, other: "Distribution") -> "Distribution":
        return combine([1.0, -1.0], [self, other])


def pair(dist: Distribution, probe: ScaledTestFunction) -> float:
    """Module-level pairing entry point."""
    return dist.pair(probe)


# ---------------------------------------------------------------------------
# harmonic sums


@dataclass(frozen=True)
class HTerm:
    """poly(y) * cos(omega y + theta), omega >= 0."""

    poly: tuple[float, ...]
    omega: float = 0.0
    theta: float = 0.0


def _poly_derivs(coeffs: tuple[float, ...]):
    """All derivatives of a polynomial, as coefficient tuples."""
    out = [np.asarray(coeffs, dtype=float)]
    while len(out[-1]) > 1:
        p = out[-1]
        out.append(p[1:] * np.arange(1, len(p)))
    return out


class HarmonicSum(Distribution):
    """Finite sum of polynomial-enveloped cosines."""

    def __init__(self, terms, declared_order: int = 0):
        self.terms = [t for t in terms if any(c != 0.0 for c in t.poly)]
        self.declared_order = declared_order

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def constant(c: float) -> "HarmonicSum":
        return HarmonicSum([HTerm((float(c),))])

    @staticmethod
    def polynomial(coeffs) -> "HarmonicSum":
        return HarmonicSum([HTerm(tuple(float(c) for c in coeffs))])

    @staticmethod
    def monomial_jet(center: float, k: int) -> "HarmonicSum":
        """(y - center)^k / k! as a distribution."""
        shifted = np.poly1d([1.0, -float(center)]) ** k
        coeffs = shifted.coeffs[::-1] / _fact(k)
        return HarmonicSum.polynomial(coeffs)

    # -- evaluation ------------------------------------------------------------

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for t in self.terms:
            out += np.polynomial.polynomial.polyval(y, t.poly) \
                * np.cos(t.omega * y + t.theta)
        return out

    # -- pairings ---------------------------------------------------------------

    def pair(self, probe: ScaledTestFunction) -> float:
        x, lam, base = probe.center, probe.scale, probe.base
        total = 0.0
        for t in self.terms:
            phase = np.exp(1j * (t.omega * x + t.theta))
            s = lam * t.omega
            for m, dp in enumerate(_poly_derivs(t.poly)):
                env = np.polynomial.polynomial.polyval(x, dp) / _fact(m)
                if env == 0.0:
                    continue
                total += env * lam ** m * (phase * base.osc_transform(m, s)).real
        return total

    def pair_smooth(self, fn, lo, hi, scale=1.0, frequency=0.0):
        total = 0.0
        for t in self.terms:
            ns, ws = adaptive_rule(lo, hi, frequency=t.omega + frequency,
                                   max_panel=scale / 4.0)
            vals = np.polynomial.polynomial.polyval(ns, t.poly) \
                * np.cos(t.omega * ns + t.theta)
            total += float(np.dot(ws, vals * fn(ns)))
        return total

    # -- calculus ---------------------------------------------------------------

    def derivative(self) -> "HarmonicSum":
        """Exact derivative, term by term."""
        out = []
        for t in self.terms:
            dp = _poly_derivs(t.poly)
            if len(dp) > 1:
                out.append(HTerm(tuple(dp[1]), t.omega, t.theta))
            if t.omega != 0.0:
                # d/dy cos = omega * cos(... + pi/2)
                out.append(HTerm(tuple(t.omega * np.asarray(t.poly)),
                                 t.omega, t.theta + 0.5 * np.pi))
        return HarmonicSum(out, self.declared_order)

    def mollified(self, mollifier: TestFunction, lam: float) -> "HarmonicSum":
        """The function y -> self paired with the mollifier at (y, lam).

        Smoothing a cosine keeps its frequency and shifts amplitude and
        phase by the mollifier transform; polynomial envelopes pick up
        jet corrections.  The result is again a harmonic sum.
        """
        out = []
        for t in self.terms:
            for m, dp in enumerate(_poly_derivs(t.poly)):
                tr = mollifier.osc_transform(m, lam * t.omega)
                amp = abs(tr) * lam ** m / _fact(m)
                if amp == 0.0:
                    continue
                out.append(HTerm(tuple(amp * np.asarray(dp)),
                                 t.omega, t.theta + np.angle(tr)))
        return HarmonicSum(out, self.declared_order)

    def product(self, other: "HarmonicSum") -> "HarmonicSum":
        out = []
        for a in self.terms:
            for b in other.terms:
                poly = tuple(np.convolve(a.poly, b.poly))
                for omega, theta in (
                        (a.omega - b.omega, a.theta - b.theta),
                        (a.omega + b.omega, a.theta + b.theta)):
                    if omega < 0.0:
                        omega, theta = -omega, -theta
                    out.append(HTerm(tuple(0.5 * np.asarray(poly)), omega, theta))
        return HarmonicSum(out, max(self.declared_order, other.declared_order))

    def scaled(self, c: float) -> "HarmonicSum":
        return HarmonicSum(
            [HTerm(tuple(c * np.asarray(t.poly)), t.omega, t.theta)
             for t in self.terms], self.declared_order)

    def plus(self, other: "HarmonicSum") -> "HarmonicSum":
        return HarmonicSum(list(self.terms) + list(other.terms),
                           max(self.declared_order, other.declared_order))


def _fact(k: int) -> float:
    out = 1.0
    for i in range(2, k + 1):
        out *= i
    return out


def weierstrass(a: float, b: float, tol: float = 1e-8,
                max_terms: int = 48) -> HarmonicSum:
    """Partial sum of  sum_j a^j cos(b^j pi y).

    The number of terms is chosen so the dropped pointwise tail
    a^(J+1)/(1-a) sits below ``tol``; at the probe scales the package
    works at, the pairing contribution of the dropped terms is far
    smaller still because the transforms of smooth test functions
    decay superpolynomially.
    """
    if not (0.0 < a < 1.0):
        raise ValueError("amplitude ratio must be in (0, 1)")
    if b * a < 1.0:
        raise ValueError("need a*b >= 1 for a genuinely rough sum")
    J = int(np.ceil(np.log(tol * (1.0 - a)) / np.log(a)))
    J = min(max(J, 8), max_terms)
    return HarmonicSum([HTerm((a ** j,), b ** j * np.pi, 0.0)
                        for j in range(J + 1)])


# ---------------------------------------------------------------------------
# sampled smooth functions


class GridFunction(Distribution):
    """A smooth function known by samples, paired by quadrature.

    Cubic local interpolation on a uniform grid; the default window and
    resolution are generous for every fixture in the package.
    """

    def __init__(self, fn=None, samples=None, lo: float = -4.0, hi: float = 4.0,
                 n: int = 1 << 14, scale_hint: float = 1.0):
        from scipy.interpolate import CubicSpline
        self.lo, self.hi = float(lo), float(hi)
        self.grid = np.linspace(self.lo, self.hi, int(n))
        if samples is None:
            samples = np.asarray(fn(self.grid), dtype=float)
        self.samples = samples
        self._spline = CubicSpline(self.grid, self.samples)
        self.scale_hint = float(scale_hint)
        self.support_hint = (self.lo, self.hi)

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        inside = (y >= self.lo) & (y <= self.hi)
        out[inside] = self._spline(y[inside])
        return out

    def pair(self, probe: ScaledTestFunction) -> float:
        lo, hi = probe.support_interval
        lo, hi = max(lo, self.lo), min(hi, self.hi)
        if hi <= lo:
            return 0.0
        h = probe.scale * probe.base._node.hint
        ns, ws = adaptive_rule(lo, hi, max_panel=min(h, self.scale_hint) / 4.0)
        return float(np.dot(ws, self.evaluate(ns) * probe.values(ns)))

    def pair_smooth(self, fn, lo, hi, scale=1.0, frequency=0.0):
        lo, hi = max(lo, self.lo), min(hi, self.hi)
        if hi <= lo:
            return 0.0
        ns, ws = adaptive_rule(lo, hi, frequency=frequency,
                               max_panel=min(scale, self.scale_hint) / 4.0)
        return float(np.dot(ws, self.evaluate(ns) * fn(ns)))


# ---------------------------------------------------------------------------
# combinations and weak derivatives


class DistSum(Distribution):
    """Linear combination of distributions."""

    def __init__(self, parts):
        self.parts = [(float(c), d) for c, d in parts]
        self.declared_order = max((d.declared_order for _, d in self.parts),
                                  default=0)

    def pair(self, probe):
        return sum(c * d.pair(probe) for c, d in self.parts)

    def pair_smooth(self, fn, lo, hi, scale=1.0, frequency=0.0):
        return sum(c * d.pair_smooth(fn, lo, hi, scale, frequency)
                   for c, d in self.parts)

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for c, d in self.parts:
            out += c * d.evaluate(y)
        return out


def combine(coeffs, dists) -> Distribution:
    """c1 f1 + c2 f2 + ..., merging harmonic sums when possible."""
    if all(isinstance(d, HarmonicSum) for d in dists):
        terms = []
        order = 0
        for c, d in zip(coeffs, dists):
            terms.extend(d.scaled(float(c)).terms)
            order = max(order, d.declared_order)
        return HarmonicSum(terms, order)
    return DistSum(list(zip(coeffs, dists)))


class WeakDerivative(Distribution):
    """d^k f in the weak sense: the derivative lands on the probe."""

    def __init__(self, base: Distribution, k: int = 1):
        if isinstance(base, WeakDerivative):
            base, k = base.base, base.k + k
        self.base, self.k = base, int(k)
        self.declared_order = base.declared_order + self.k
        self.support_hint = base.support_hint

    def pair(self, probe: ScaledTestFunction) -> float:
        shifted = probe.with_derivative_base(self.k)
        return (-1.0) ** self.k * probe.scale ** (-self.k) \
            * self.base.pair(shifted)


def weak_derivative(f: Distribution, k: int = 1) -> Distribution:
    """The k-th weak derivative of f."""
    if k == 0:
        return f
    if isinstance(f, HarmonicSum):
        out = f
        for _ in range(k):
            out = out.derivative()
        return out
    return WeakDerivative(f, k)


# ---------------------------------------------------------------------------
# pointwise derivatives by scale telescoping


@dataclass
class PointwiseDerivative:
    """A derivative value recovered as a limit across shrinking scales.

    ``increments`` holds the telescoping differences between
    consecutive scales; their geometric decay rate, measured against
    the scale step, is ``increment_rate``.
    """

    value: float
    point: float
    order: int
    values_by_scale: np.ndarray
    increments: np.ndarray
    increment_rate: float
    converged: bool


def pointwise_derivative(f: Distribution, x: float, k: int, delta: float,
                         lam0: float = 0.5, depth: int = 10,
                         mollifier: TestFunction | None = None,
                         strict: bool = True) -> PointwiseDerivative:
    """Evaluate d^k f at x from mollified pairings at shrinking scales.

    At each scale the candidate value is (-1/lam)^k f((d^k eta) at
    (x, lam)); consecutive candidates differ by a term of size
    lam^(delta - k), so for delta > k the sequence is Cauchy and the
    limit is taken with a geometric tail correction.  ``delta`` is the
    regularity the caller asserts; the mollifier needs vanishing
    moments through floor(delta), which is what the default provides.
    """
    if k >= delta:
        raise ValueError("derivative order must sit below the regularity")
    eta = mollifier if mollifier is not None else vanishing_moment_mollifier(delta)
    lams = lam0 * 2.0 ** (-np.arange(depth + 1, dtype=float))
    vals = np.empty(depth + 1)
    for i, lam in enumerate(lams):
        probe = scale_center(eta.deriv(k), x, lam)
        vals[i] = (-1.0) ** k * lam ** (-k) * f.pair(probe)
    incs = np.diff(vals)
    scale_ref = max(np.max(np.abs(vals)), 1.0)
    fit = fit_loglog(lams[1:], np.abs(incs), drop_coarse=1, drop_fine=1,
                     floor=1e-13 * scale_ref)
    rate = fit.slope if not fit.degenerate else np.inf

    tail = np.abs(incs[-3:])
    settled = np.all(tail < 1e-10 * scale_ref)
    shrinking = (not fit.degenerate and fit.slope > 0.05) or settled
    value = vals[-1]
    if shrinking and not settled and len(incs) >= 2 and abs(incs[-2]) > 0:
        # geometric tail: v_inf = v_N + d_(N-1) * q / (1 - q)
        q = incs[-1] / incs[-2]
        if 0.0 < abs(q) < 0.95:
            value = vals[-1] + incs[-1] * q / (1.0 - q)
    if not shrinking and strict:
        raise NonConvergentError(
            f"pairing increments do not decay (fitted rate {rate:.3f}) "
            f"for derivative order {k} at {x}")
    return PointwiseDerivative(float(value), float(x), int(k), vals, incs,
                               float(rate), bool(shrinking))


@dataclass
class TaylorPolynomialValue:
    """A jet at a point: coefficients are derivative values, and the
    polynomial is sum_k coeff[k] (y - center)^k / k!."""

    center: float
    delta: float
    coeffs: np.ndarray

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for k, c in enumerate(self.coeffs):
            out += c * (y - self.center) ** k / _fact(k)
        return out

    def as_distribution(self) -> HarmonicSum:
        parts = [HarmonicSum.monomial_jet(self.center, k).scaled(c)
                 for k, c in enumerate(self.coeffs)]
        out = HarmonicSum([])
        for p in parts:
            out = out.plus(p)
        return out

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


def taylor_polynomial(f: Distribution, x: float, delta: float,
                      **kwargs) -> TaylorPolynomialValue:
    """The jet of f at x up to (strictly below) order delta.

    For delta <= 0 the jet is empty and the zero polynomial is
    returned.
    """
    if delta <= 0.0:
        return TaylorPolynomialValue(float(x), float(delta), np.zeros(0))
    top = int(np.ceil(delta)) - 1 if delta != int(delta) else int(delta) - 1
    coeffs = np.array([
        pointwise_derivative(f, x, k, delta, **kwargs).value
        for k in range(top + 1)])
    return TaylorPolynomialValue(float(x), float(delta), coeffs)


# ---------------------------------------------------------------------------
# regularity estimation


@dataclass
class SeminormEstimate:
    """A sampled two-term regularity estimate.

    ``samples`` rows are (x, lam, family index, |pairing|).  The
    estimate is a supremum over the sample set, hence a bound from
    below; the slope is fitted on the per-scale suprema.
    """

    gamma: float
    estimate: float
    slope: float
    fit: SlopeFit
    r_used: int
    zeroth_term: float
    samples: np.ndarray

    @property
    def is_zero(self) -> bool:
        return self.estimate <= 1e-13


def hz_norm_estimate(f: Distribution, gamma: float,
                     region: tuple[float, float] = (-1.0, 1.0),
                     n_centers: int = 101, n_scales: int = 12,
                     family=None) -> SeminormEstimate:
    """Sampled Hoelder-Zygmund style seminorm of a single distribution.

    Negative gamma: pairings against a C^r family at all scales, with
    r = floor(-gamma) + 1.  Nonnegative gamma: a scale-one term over a
    plain C^0 family plus a scaling term over a family with vanishing
    moments through floor(gamma).

    The slope fit drops the four coarsest scales: truncated lacunary
    fixtures are not self-similar near scale one, and the sampled sup
    needs a dense center grid before the fit stabilizes, so the
    defaults lean on fine scales and many centers.  Centers only enter
    pairings through phase factors, so they are cheap.
    """
    from .testfn import probe_family  # local import to keep module load light

    xs = center_grid(region[0], region[1], n_centers)
    lams = dyadic_scales(n_scales)
    rows = []
    zeroth = 0.0
    if gamma < 0.0:
        r = int(np.floor(-gamma)) + 1
        fam = family if family is not None else probe_family(r)
    else:
        r = 0
        fam = family if family is not None else probe_family(
            0, annihilate=int(np.floor(gamma)))
        plain = probe_family(0)
        zeroth = max(abs(f.pair(scale_center(phi, x, 1.0)))
                     for phi in plain for x in xs)
    for i, phi in enumerate(fam):
        for x in xs:
            for lam in lams:
                v = abs(f.pair(scale_center(phi, x, lam)))
                rows.append((x, lam, i, v))
    samples = np.array(rows)
    sups = np.array([np.max(samples[samples[:, 1] == lam, 3]) for lam in lams])
    fit = fit_loglog(lams, sups, drop_coarse=4)
    estimate = float(np.max(samples[:, 3] / samples[:, 1] ** gamma)) + zeroth
    return SeminormEstimate(float(gamma), estimate, fit.slope, fit, r,
                            float(zeroth), samples)
