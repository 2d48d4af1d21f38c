"""Smooth compactly supported test functions with exact derivatives.

Every test function in the package is an expression tree whose leaves
are polynomial multiples of the standard bump

    b(z) = exp(-1 / (1 - z^2))   on (-1, 1),   0 elsewhere,

combined by affine argument maps, differentiation and linear
combination.  Differentiating a leaf stays inside the leaf class
(the prefactor picks up powers of 1/(1-z^2)), so derivatives of any
order are evaluated in closed form rather than by finite differences.

The module also hosts the constructions on test functions that the
rest of the package leans on: recentering and rescaling, moment
annihilation, mollifiers with prescribed vanishing moments, the
coarse-to-fine decomposition of a test function across dyadic scales,
and the exact remainder of recentering a scaled test function by a
Taylor jet.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from ._quad import adaptive_rule, panel_rule

_NORM_GRID = 1 << 14
#: past this frequency, transforms are only quadratured when the
#: integration-by-parts ceiling says they are above rounding
_OSC_EXACT_MAX = 2.0e4
_OSC_PARTS_MAX = 8

# ---------------------------------------------------------------------------
# expression tree


class _Node:
    """One node of a test-function expression tree.

    Moments and oscillatory transforms are reduced algebraically
    through the tree (integration by parts across derivative nodes,
    binomial change of variables across affine nodes) so that actual
    quadrature only happens on smooth leaves.  That keeps identities
    like the vanishing of mollifier jet moments exact to rounding even
    at high derivative orders.
    """

    #: support interval (closed hull); the function vanishes outside
    lo: float
    hi: float
    #: finest feature length scale, used to size quadrature panels
    hint: float
    #: continuous derivatives available (inf for analytic leaves); the
    #: next derivative is still bounded piecewise, which is what the
    #: integration-by-parts ceiling on oscillatory transforms needs
    smoothness: float = np.inf

    def vals(self, z: np.ndarray, k: int) -> np.ndarray:
        raise NotImplementedError

    def moment(self, j: int) -> float:
        raise NotImplementedError

    def osc(self, m: int, s: float) -> complex:
        raise NotImplementedError

    def _grid_sup(self, k: int) -> float:
        cache = getattr(self, "_gsups", None)
        if cache is None:
            cache = self._gsups = {}
        if k not in cache:
            grid = np.linspace(self.lo, self.hi, _NORM_GRID + 1)
            cache[k] = float(np.max(np.abs(self.vals(grid, k))))
        return cache[k]

    def osc_ceiling(self, m: int, s: float) -> float:
        """Integration-by-parts ceiling on |osc(m, s)| from this node's
        own derivative sups; quadrature leaves consult it before paying
        for a frequency-resolving rule that the true value cannot repay.
        """
        if s == 0.0:
            return np.inf
        k = int(min(self.smoothness + 1, _OSC_PARTS_MAX))
        if k < 1:
            return np.inf
        length = self.hi - self.lo
        if length <= 0.0:
            return 0.0
        rad = max(abs(self.lo), abs(self.hi), 1e-300)
        total = 0.0
        for q in range(min(k, m) + 1):
            falling = _factorial(m) / _factorial(m - q)
            total += (_binom(k, q) * falling * rad ** (m - q)
                      * self._grid_sup(k - q))
        return length * total / abs(s) ** k


class _BumpPoly(_Node):
    """p(z) * (1-z^2)^(-m) * exp(-1/(1-z^2)) on (-1, 1)."""

    def __init__(self, poly: Polynomial, m: int = 0):
        self._chain = {0: (poly, m)}
        self.lo, self.hi = -1.0, 1.0
        self.hint = 1.0
        self._mom: dict[int, float] = {}
        self._osc: dict[tuple[int, float], complex] = {}

    def moment(self, j):
        if j not in self._mom:
            ns, ws = adaptive_rule(self.lo, self.hi, max_panel=0.25)
            self._mom[j] = float(np.dot(ws, ns ** j * self.vals(ns, 0)))
        return self._mom[j]

    def osc(self, m, s):
        key = (m, float(s))
        if key not in self._osc:
            if abs(s) > _OSC_EXACT_MAX and self.osc_ceiling(m, s) < 1e-18:
                self._osc[key] = 0.0j
            else:
                ns, ws = adaptive_rule(self.lo, self.hi, frequency=abs(s),
                                       max_panel=0.25)
                f = ns ** m * self.vals(ns, 0) if m else self.vals(ns, 0)
                self._osc[key] = complex(np.dot(ws * f, np.exp(1j * s * ns)))
        return self._osc[key]

    def _prefactor(self, k: int):
        if k not in self._chain:
            p, m = self._prefactor(k - 1)
            one_minus = Polynomial([1.0, 0.0, -1.0])
            z = Polynomial([0.0, 1.0])
            q = p.deriv() * one_minus ** 2 + (2.0 * m) * z * p * one_minus - 2.0 * z * p
            self._chain[k] = (q, m + 2)
        return self._chain[k]

    def vals(self, z, k):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        inside = np.abs(z) < 1.0
        if np.any(inside):
            zi = z[inside]
            p, m = self._prefactor(k)
            t = 1.0 / ((1.0 - zi) * (1.0 + zi))
            out[inside] = p(zi) * np.exp(m * np.log(t) - t)
        return out


class _Affine(_Node):
    """base(a z + s) for a > 0."""

    def __init__(self, base: _Node, a: float, s: float):
        if a <= 0:
            raise ValueError("argument scale must be positive")
        self.base, self.a, self.s = base, float(a), float(s)
        self.lo = (base.lo - self.s) / self.a
        self.hi = (base.hi - self.s) / self.a
        self.hint = base.hint / self.a
        self.smoothness = base.smoothness

    def vals(self, z, k):
        z = np.asarray(z, dtype=float)
        return self.a ** k * self.base.vals(self.a * z + self.s, k)

    def moment(self, j):
        # int z^j f(az+s) dz  =  a^(-1-j) sum_q C(j,q)(-s)^(j-q) int u^q f du
        total = 0.0
        for q in range(j + 1):
            total += _binom(j, q) * (-self.s) ** (j - q) * self.base.moment(q)
        return self.a ** (-1 - j) * total

    def osc(self, m, s):
        total = 0.0j
        for q in range(m + 1):
            total += _binom(m, q) * (-self.s) ** (m - q) * self.base.osc(q, s / self.a)
        return self.a ** (-1 - m) * np.exp(-1j * s * self.s / self.a) * total


class _Deriv(_Node):
    def __init__(self, base: _Node, order: int):
        self.base, self.order = base, int(order)
        self.lo, self.hi = base.lo, base.hi
        self.hint = base.hint / (1.0 + 0.5 * self.order)
        self.smoothness = base.smoothness - self.order

    def vals(self, z, k):
        return self.base.vals(z, k + self.order)

    def moment(self, j):
        # integrate by parts k times; boundary terms vanish
        k = self.order
        if j < k:
            return 0.0
        return (-1.0) ** k * (_factorial(j) / _factorial(j - k)) * self.base.moment(j - k)

    def osc(self, m, s):
        # the (is)^k factors amplify any error in the base transforms,
        # so vanishing is decided on this node's own ceiling first
        if abs(s) > _OSC_EXACT_MAX and self.osc_ceiling(m, s) < 1e-18:
            return 0.0j
        k = self.order
        total = 0.0j
        for q in range(min(k, m) + 1):
            total += (_binom(k, q) * _factorial(m) / _factorial(m - q)
                      * (1j * s) ** (k - q) * self.base.osc(m - q, s))
        return (-1.0) ** k * total


#: below this phase across a piece, endpoint cancellation in the exact
#: exponential-integral formula costs digits and a small rule wins
_OSC_PHASE_MIN = 8.0


def _exp_poly_integral(coeffs, sigma, a, b):
    """int_a^b q(z) exp(i sigma z) dz for a polynomial envelope q.

    Integration by parts terminates on polynomials, trading one
    derivative of q for each power of (i sigma); the result is an exact
    endpoint formula whose accuracy improves with frequency, exactly
    where quadrature gives out.
    """
    poly = np.polynomial.polynomial
    if sigma == 0.0:
        anti = poly.polyint(coeffs)
        return complex(poly.polyval(b, anti) - poly.polyval(a, anti))
    if abs(sigma) * (b - a) < _OSC_PHASE_MIN:
        ns, ws = adaptive_rule(a, b, frequency=abs(sigma),
                               max_panel=(b - a) / 2.0)
        return complex(np.dot(ws * poly.polyval(ns, coeffs),
                              np.exp(1j * sigma * ns)))
    total = 0.0j
    for z, sign in ((b, 1.0), (a, -1.0)):
        acc = 0.0j
        dq = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        k = 0
        while dq.size:
            acc += (-1.0) ** k * poly.polyval(z, dq) * (1j * sigma) ** -(k + 1)
            dq = poly.polyder(dq) if dq.size > 1 else np.empty(0)
            k += 1
        total += sign * np.exp(1j * sigma * z) * acc
    return total


class _PieceTrig(_Node):
    """Piecewise sums of p(z) cos(omega z + theta) on breakpoint intervals.

    Pieces are (a, b, terms) with terms a list of (coeffs, omega, theta);
    omega = 0 gives a pure polynomial piece.  Values differentiate in
    closed form term by term; moments and oscillatory transforms
    integrate piece by piece so that quadrature panels never straddle a
    breakpoint, where only finitely many derivatives match.
    """

    def __init__(self, pieces, smoothness: int = 2):
        self.pieces = [(float(a), float(b), [(np.asarray(c, dtype=float),
                                              float(w), float(t))
                                             for c, w, t in terms])
                       for a, b, terms in pieces]
        self.lo = min(a for a, _, _ in self.pieces)
        self.hi = max(b for _, b, _ in self.pieces)
        self.hint = min(b - a for a, b, _ in self.pieces)
        self.smoothness = float(smoothness)
        self._mom: dict[int, float] = {}
        self._osc: dict[tuple[int, float], complex] = {}

    @staticmethod
    def _term_vals(z, coeffs, omega, theta, k):
        # k-th derivative of p(z) cos(omega z + theta)
        out = np.zeros_like(z)
        p = coeffs
        for q in range(k + 1):
            if len(p) == 0:
                break
            out += (_binom(k, q) * omega ** (k - q)
                    * np.polynomial.polynomial.polyval(z, p)
                    * np.cos(omega * z + theta + 0.5 * np.pi * (k - q)))
            p = p[1:] * np.arange(1, len(p))
        return out

    def vals(self, z, k):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for i, (a, b, terms) in enumerate(self.pieces):
            last = i == len(self.pieces) - 1
            mask = (z >= a) & ((z <= b) if last else (z < b))
            if not np.any(mask):
                continue
            zi = z[mask]
            acc = np.zeros_like(zi)
            for coeffs, omega, theta in terms:
                acc += self._term_vals(zi, coeffs, omega, theta, k)
            out[mask] = acc
        return out

    def _piece_integral(self, a, b, terms, m, s):
        # split each cosine into exponentials; every component is then a
        # polynomial against one exponential and integrates in closed
        # form, so arbitrarily high frequencies cost nothing and carry
        # no quadrature error
        q0 = np.zeros(m + 1)
        q0[m] = 1.0
        total = 0.0j
        for coeffs, omega, theta in terms:
            q = np.polynomial.polynomial.polymul(q0, coeffs)
            plus = np.exp(1j * theta) * _exp_poly_integral(q, s + omega, a, b)
            minus = np.exp(-1j * theta) * _exp_poly_integral(q, s - omega,
                                                             a, b)
            total += 0.5 * (plus + minus)
        return total

    def moment(self, j):
        if j not in self._mom:
            self._mom[j] = sum(
                self._piece_integral(a, b, terms, j, 0.0).real
                for a, b, terms in self.pieces)
        return self._mom[j]

    def osc(self, m, s):
        key = (m, float(s))
        if key not in self._osc:
            self._osc[key] = sum(
                (self._piece_integral(a, b, terms, m, s)
                 for a, b, terms in self.pieces), 0.0j)
        return self._osc[key]


class _Sum(_Node):
    def __init__(self, terms):
        self.terms = [(float(c), n) for c, n in terms if c != 0.0]
        if self.terms:
            self.lo = min(n.lo for _, n in self.terms)
            self.hi = max(n.hi for _, n in self.terms)
            self.hint = min(n.hint for _, n in self.terms)
            self.smoothness = min(n.smoothness for _, n in self.terms)
        else:
            self.lo = self.hi = 0.0
            self.hint = 1.0

    def vals(self, z, k):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for c, n in self.terms:
            out += c * n.vals(z, k)
        return out

    def moment(self, j):
        return sum(c * n.moment(j) for c, n in self.terms)

    def osc(self, m, s):
        return sum((c * n.osc(m, s) for c, n in self.terms), 0.0j)


# ---------------------------------------------------------------------------
# public wrapper


class TestFunction:
    """A smooth function supported in a compact interval of the line.

    Wraps an expression tree and adds the numerics every caller needs:
    exact derivatives of any order, sup norms up to a requested order,
    moments, and cached oscillatory transforms  int z^m f(z) e^{isz} dz
    that the distribution pairings are built on.
    """

    __test__ = False  # despite the name, not a pytest case

    def __init__(self, node: _Node):
        self._node = node
        self._moments: dict[int, float] = {}
        self._sups: dict[int, float] = {}
        self._osc: dict[tuple[int, float], complex] = {}
        self._derivs: dict[int, TestFunction] = {}

    # -- evaluation ---------------------------------------------------------

    def values(self, z, k: int = 0) -> np.ndarray:
        return self._node.vals(np.asarray(z, dtype=float), k)

    def __call__(self, z):
        return self.values(z, 0)

    @property
    def support(self) -> tuple[float, float]:
        return self._node.lo, self._node.hi

    @property
    def support_radius(self) -> float:
        return max(abs(self._node.lo), abs(self._node.hi))

    def deriv(self, k: int = 1) -> "TestFunction":
        if k == 0:
            return self
        if k not in self._derivs:
            base = self._node.base if isinstance(self._node, _Deriv) else None
            if base is not None:
                self._derivs[k] = TestFunction(_Deriv(base, self._node.order + k))
            else:
                self._derivs[k] = TestFunction(_Deriv(self._node, k))
        return self._derivs[k]

    # -- algebra ------------------------------------------------------------

    def __mul__(self, c: float) -> "TestFunction":
        return TestFunction(_Sum([(float(c), self._node)]))

    __rmul__ = __mul__

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(_Sum([(1.0, self._node), (1.0, other._node)]))

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(_Sum([(1.0, self._node), (-1.0, other._node)]))

    def rescale_argument(self, a: float, shift: float = 0.0) -> "TestFunction":
        """The function z -> self(a z + shift)."""
        return TestFunction(_Affine(self._node, a, shift))

    @staticmethod
    def combine(coeffs, fns) -> "TestFunction":
        return TestFunction(_Sum([(c, f._node) for c, f in zip(coeffs, fns)]))

    # -- integrals ----------------------------------------------------------

    def _rule(self, frequency: float = 0.0):
        lo, hi = self.support
        return adaptive_rule(lo, hi, frequency=frequency,
                             max_panel=self._node.hint / 4.0)

    def moment(self, j: int) -> float:
        """int z^j self(z) dz."""
        if j not in self._moments:
            self._moments[j] = float(self._node.moment(j))
        return self._moments[j]

    def moment_vector(self, jmax: int) -> np.ndarray:
        return np.array([self.moment(j) for j in range(jmax + 1)])

    def normalized_moment(self, k: int) -> float:
        """int z^k / k! self(z) dz, the coefficient the jet calculus uses."""
        return self.moment(k) / _factorial(k)

    def osc_bound(self, m: int, s: float) -> float:
        """Rigorous ceiling on |osc_transform(m, s)| from integration by parts.

        With sigma continuous derivatives and a bounded next one,
        integrating by parts sigma+1 times gives

            |int z^m f e^{isz} dz|  <=  |s|^-k (hi-lo) sup |d^k (z^m f)|

        for k = sigma + 1, and the product-rule expansion bounds the sup
        through the cached derivative sups of f itself.
        """
        if s == 0.0:
            return np.inf
        lo, hi = self.support
        if hi <= lo:
            return 0.0
        rad = max(self.support_radius, 1e-300)
        k = int(min(self._node.smoothness + 1, _OSC_PARTS_MAX))
        if k < 1:
            return np.inf
        total = 0.0
        for q in range(min(k, m) + 1):
            falling = _factorial(m) / _factorial(m - q)
            total += (_binom(k, q) * falling * rad ** (m - q)
                      * self.sup_deriv(k - q))
        return (hi - lo) * total / abs(s) ** k

    def osc_transform(self, m: int, s: float) -> complex:
        """int z^m self(z) exp(i s z) dz, cached per (m, s).

        Above a frequency threshold the transform is only computed when
        the integration-by-parts ceiling says it is resolvable; once the
        ceiling drops below rounding the transform is an exact zero for
        every pairing downstream, and the (otherwise enormous) oscillatory
        quadrature is skipped.
        """
        key = (m, float(s))
        if key not in self._osc:
            if abs(s) > _OSC_EXACT_MAX and self.osc_bound(m, s) < 1e-16:
                self._osc[key] = 0.0j
            else:
                self._osc[key] = complex(self._node.osc(m, s))
        return self._osc[key]

    # -- norms ---------------------------------------------------------------

    def sup_deriv(self, k: int) -> float:
        """sup |d^k self| on a dense grid over the support."""
        if k not in self._sups:
            lo, hi = self.support
            if hi <= lo:
                self._sups[k] = 0.0
            else:
                grid = np.linspace(lo, hi, _NORM_GRID + 1)
                self._sups[k] = float(np.max(np.abs(self.values(grid, k))))
        return self._sups[k]

    def cr_norms(self, r: int) -> np.ndarray:
        return np.array([self.sup_deriv(k) for k in range(r + 1)])

    def cr_norm(self, r: int) -> float:
        return float(np.max(self.cr_norms(r)))


def _factorial(k: int) -> float:
    out = 1.0
    for i in range(2, k + 1):
        out *= i
    return out


def _binom(n: int, k: int) -> float:
    return _factorial(n) / (_factorial(k) * _factorial(n - k))


@dataclass(frozen=True)
class ScaledTestFunction:
    """lam^-1 base((y - center)/lam), the probe at a point and a scale."""

    base: TestFunction
    center: float
    scale: float

    def values(self, y, k: int = 0) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        lam = self.scale
        return lam ** (-1 - k) * self.base.values((y - self.center) / lam, k)

    def __call__(self, y):
        return self.values(y, 0)

    @property
    def support_interval(self) -> tuple[float, float]:
        lo, hi = self.base.support
        return self.center + self.scale * lo, self.center + self.scale * hi

    def mass(self) -> float:
        # invariant under recentering and rescaling
        return self.base.moment(0)

    def with_derivative_base(self, k: int) -> "ScaledTestFunction":
        """The probe built on d^k(base), scaled the same way."""
        return ScaledTestFunction(self.base.deriv(k), self.center, self.scale)


# ---------------------------------------------------------------------------
# constructions


def bump_raw() -> TestFunction:
    """The unnormalized profile exp(-1/(1-z^2)) on (-1, 1)."""
    return TestFunction(_BumpPoly(Polynomial([1.0])))


def poly_bump(coeffs) -> TestFunction:
    """p(z) exp(-1/(1-z^2)) for a polynomial p given by coefficients."""
    return TestFunction(_BumpPoly(Polynomial(np.asarray(coeffs, dtype=float))))


def make_bump(r: int) -> TestFunction:
    """The standard bump normalized to unit norm in C^r.

    After normalization max_{k<=r} sup |d^k phi| is 1 and the integral
    stays positive.
    """
    if r < 0:
        raise ValueError("derivative order must be nonnegative")
    raw = bump_raw()
    return raw * (1.0 / raw.cr_norm(r))


def scale_center(phi: TestFunction, x: float, lam: float) -> ScaledTestFunction:
    """Recenter phi at x and shrink it to scale lam, preserving mass."""
    if lam <= 0:
        raise ValueError("scale must be positive")
    return ScaledTestFunction(phi, float(x), float(lam))


def vanishing_moment_mollifier(delta: float, flavor: int = 0) -> TestFunction:
    """A mollifier with unit mass and vanishing moments 1..floor(delta).

    Built as (polynomial) * (weight bump): the coefficients solve the
    small Hankel system of moment constraints.  ``flavor`` switches the
    weight profile, giving a genuinely different mollifier with the
    same moment properties (useful for checking that downstream limits
    do not depend on the choice).
    """
    depth = int(np.floor(delta)) if delta == delta else 0
    if delta <= 0:
        raise ValueError("moment depth must be positive")
    if depth > 6:
        raise ValueError("moment depth capped at 6; the Hankel system "
                         "conditioning degrades beyond that")
    if flavor == 0:
        weight = bump_raw()
    elif flavor == 1:
        # flatter weight, same support
        weight = poly_bump([1.0, 0.0, -1.0])  # (1 - z^2) b(z)
    else:
        raise ValueError("flavor must be 0 or 1")
    n = depth + 1
    gram = np.empty((n, n))
    for l in range(n):
        for j in range(n):
            gram[l, j] = weight.moment(l + j)
    cond = np.linalg.cond(gram)
    if cond > 1e9:
        raise ValueError(f"moment system too ill conditioned: {cond:.2e}")
    rhs = np.zeros(n)
    rhs[0] = 1.0
    coeffs = np.linalg.solve(gram, rhs)
    if flavor == 1:
        poly = Polynomial(coeffs) * Polynomial([1.0, 0.0, -1.0])
        return TestFunction(_BumpPoly(poly))
    return poly_bump(coeffs)


def annihilate_moments(phi: TestFunction, c: int,
                       reference: TestFunction | None = None) -> TestFunction:
    """Subtract a jet of mollifier derivatives so moments 0..c vanish.

    With eta a unit-mass mollifier whose moments 1..c vanish,

        psi = phi - sum_{k=0}^{c} (-1)^k (int z^k/k! phi) d^k eta

    has all moments up to order c equal to zero.  c = -1 returns phi
    unchanged.
    """
    if c < 0:
        return phi
    eta = reference if reference is not None else vanishing_moment_mollifier(max(c, 0.5))
    coeffs = [1.0]
    fns = [phi]
    for k in range(c + 1):
        w = (-1.0) ** k * phi.normalized_moment(k)
        if w != 0.0:
            coeffs.append(-w)
            fns.append(eta.deriv(k))
    return TestFunction.combine(coeffs, fns)


@dataclass
class LargeScaleDecomposition:
    """A test function split into one coarse mollifier jet plus
    moment-free pieces at dyadic scales 1, 2, 4, ..., 2^M."""

    psi: TestFunction
    depth: int                       # M
    moment_order: int                # c
    coarse: TestFunction             # lives at scale 2^M
    pieces: list[TestFunction] = field(default_factory=list)  # scale 2^n

    def reconstruct_values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = scale_center(self.coarse, 0.0, 2.0 ** self.depth).values(z)
        for n, piece in enumerate(self.pieces):
            out = out + scale_center(piece, 0.0, 2.0 ** n).values(z)
        return out

    def residual(self, z) -> np.ndarray:
        return self.psi.values(np.asarray(z, dtype=float)) - self.reconstruct_values(z)


def large_scale_decompose(psi: TestFunction, M: int, c: int,
                          reference: TestFunction | None = None) -> LargeScaleDecomposition:
    """Write psi as a scale-2^M mollifier jet plus moment-free pieces.

    The coarse part carries the moments of psi at scale 2^M; each piece
    at scale 2^n has vanishing moments through order c, which is what
    lets a dyadic pairing sum against psi start from a bounded scale.
    """
    if M < 0:
        raise ValueError("depth must be nonnegative")
    eta = reference if reference is not None else vanishing_moment_mollifier(max(c, 0.5))
    # two-scale difference of the mollifier; all moments through c vanish
    phi = 2.0 * eta.rescale_argument(2.0) - eta
    jets = [(-1.0) ** k * psi.normalized_moment(k) for k in range(c + 1)]

    coarse = TestFunction.combine(
        [w * 2.0 ** (-M * k) for k, w in enumerate(jets)],
        [eta.deriv(k) for k in range(c + 1)])
    check0 = annihilate_moments(psi, c, reference=eta)
    pieces = [check0]
    for n in range(1, M + 1):
        pieces.append(TestFunction.combine(
            [w * 2.0 ** (-n * k) for k, w in enumerate(jets)],
            [phi.deriv(k) for k in range(c + 1)]))
    return LargeScaleDecomposition(psi, M, c, coarse, pieces)


@dataclass
class TaylorRecenterRemainder:
    """Exact remainder of recentering a scaled test function by a jet.

    The identity packaged here:  for |y - x| <= 2^-n,

        phi at (x, 2^-n)  minus  its degree-c jet recentered at y
            = prefactor * (remainder at (y, 2^-n+1))

    with prefactor = (2^n (x - y))^(c+1) and the remainder a smooth
    function supported in the unit ball.
    """

    base: TestFunction
    x: float
    y: float
    level: int
    order: int
    remainder: TestFunction
    prefactor: float

    def lhs_values(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lam = 2.0 ** (-self.level)
        out = scale_center(self.base, self.x, lam).values(u)
        s = 2.0 ** self.level * (self.x - self.y)
        for k in range(self.order + 1):
            coef = (-s) ** k / _factorial(k)
            out = out - coef * scale_center(self.base.deriv(k), self.y, lam).values(u)
        return out

    def rhs_values(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lam2 = 2.0 ** (-self.level + 1)
        return self.prefactor * scale_center(self.remainder, self.y, lam2).values(u)

    def residual(self, u) -> np.ndarray:
        return self.lhs_values(u) - self.rhs_values(u)


def taylor_recenter_remainder(phi: TestFunction, x: float, y: float,
                              n: int, c: int) -> TaylorRecenterRemainder:
    """Build the exact recentering remainder for phi at level n, order c.

    Requires |y - x| <= 2^-n.  The remainder function is assembled in
    closed form; when the two centers coincide it is identically zero.
    """
    s = 2.0 ** n * (x - y)
    if abs(s) > 1.0 + 1e-12:
        raise ValueError("centers too far apart for the level")
    if s == 0.0:
        zero = TestFunction(_Sum([]))
        return TaylorRecenterRemainder(phi, x, y, n, c, zero, 0.0)
    # 2 (s)^-(c+1) [ phi(2u - s) - sum_k (-s)^k/k! (d^k phi)(2u) ]
    coeffs = [2.0 * s ** (-(c + 1))]
    fns = [phi.rescale_argument(2.0, -s)]
    for k in range(c + 1):
        coeffs.append(-2.0 * s ** (-(c + 1)) * (-s) ** k / _factorial(k))
        fns.append(phi.deriv(k).rescale_argument(2.0))
    remainder = TestFunction.combine(coeffs, fns)
    return TaylorRecenterRemainder(phi, x, y, n, c, remainder, s ** (c + 1))


# ---------------------------------------------------------------------------
# probe families


def ramp_shape(delta: float = 0.12, modulation=None) -> TestFunction:
    """An even C^2 profile whose derivative sups grow slowly with order.

    The negative slope rises linearly from the center, rounds off over
    a window of width delta, and decays back to zero along a raised
    cosine, with the rise slope and the fall curvature balanced.  That
    keeps the ratio of consecutive derivative sups near 2 instead of
    the much larger ratios a bump profile has, which is what makes
    seminorm estimates over families of different smoothness order
    comparable.  ``modulation`` multiplies the profile by a polynomial,
    for asymmetric and sign-changing variants.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError("rounding window must sit in (0, 0.5)")
    w = (2.0 + 0.5 * np.pi * delta) / (2.0 + np.pi)
    v = 1.0 - w
    slope = 1.0 / (w - 0.5 * delta)
    t1 = w - delta
    f_w = 0.5 * v
    f_t1 = f_w + delta - slope * delta ** 2 / 6.0

    omega = np.pi / v
    amp = v / (2.0 * np.pi)
    # fall pieces: (1/2)(1 -+ z) -+ amp sin(omega(z -+ w))
    right = [((0.5, -0.5), 0.0, 0.0),
             ((-amp,), omega, -omega * w - 0.5 * np.pi)]
    left = [((0.5, 0.5), 0.0, 0.0),
            ((amp,), omega, omega * w - 0.5 * np.pi)]
    # cap pieces: f_w + (w -+ z) - slope/(6 delta) (w -+ z)^3, expanded in z
    cap = np.polynomial.polynomial
    wmz = (w, -1.0)
    wpz = (w, 1.0)
    right_cap = cap.polyadd((f_w,), cap.polysub(
        wmz, cap.polymul(cap.polymul(wmz, wmz), wmz) * (slope / (6 * delta))))
    left_cap = cap.polyadd((f_w,), cap.polysub(
        wpz, cap.polymul(cap.polymul(wpz, wpz), wpz) * (slope / (6 * delta))))
    # center: f_t1 + slope (t1^2 - z^2)/2
    center = (f_t1 + 0.5 * slope * t1 ** 2, 0.0, -0.5 * slope)

    pieces = [(-1.0, -w, left),
              (-w, -t1, [(left_cap, 0.0, 0.0)]),
              (-t1, t1, [(center, 0.0, 0.0)]),
              (t1, w, [(right_cap, 0.0, 0.0)]),
              (w, 1.0, right)]
    if modulation is not None:
        q = np.asarray(modulation, dtype=float)
        pieces = [(a, b, [(np.polynomial.polynomial.polymul(c, q), om, th)
                          for c, om, th in terms])
                  for a, b, terms in pieces]
    return TestFunction(_PieceTrig(pieces))


# Each entry is a list of (weight, window, center, width) components;
# the mother is the weighted sum of ramp shapes composed with the inner
# rescale z -> (z - center)/width.  Widths stay near one because every
# inner rescale multiplies the derivative sup ratios by 1/width.
_FAMILY_RECIPES = (
    ((1.0, 0.06, 0.0, 1.0),),
    ((1.0, 0.10, 0.0, 1.0),),
    ((1.0, 0.14, 0.0, 1.0),),
    ((1.0, 0.20, 0.0, 1.0),),
    ((1.0, 0.06, 0.05, 0.95),),
    ((1.0, 0.10, -0.05, 0.95),),
    ((1.0, 0.06, 0.0, 1.0), (0.8, 0.20, 0.0, 1.0)),
    ((1.0, 0.06, 0.05, 0.95), (0.7, 0.10, -0.04, 0.96)),
)

_family_cache: dict[tuple[int, int], tuple[TestFunction, ...]] = {}


def _mother_shape(recipe) -> TestFunction:
    parts, weights = [], []
    for weight, window, center, width in recipe:
        phi = ramp_shape(window)
        if center != 0.0 or width != 1.0:
            phi = phi.rescale_argument(1.0 / width, -center / width)
        parts.append(phi)
        weights.append(weight)
    if len(parts) == 1:
        return parts[0]
    return TestFunction.combine(weights, parts)


def probe_family(r: int, annihilate: int = -1) -> tuple[TestFunction, ...]:
    """Eight probe shapes normalized into the order-r unit ball.

    Each shape is supported in the unit interval and scaled so its
    C^r norm is one.  ``annihilate`` >= 0 first projects out moments
    through that order, then renormalizes.  Shapes vary in rounding
    window, off-center placement and skew, while every mother keeps
    consecutive derivative sup ratios under three through second order
    so that estimates taken over the order-r and order-(r+1) families
    stay comparable.
    """
    if r < 0:
        raise ValueError("smoothness order must be nonnegative")
    key = (int(r), int(annihilate))
    if key not in _family_cache:
        fam = []
        for recipe in _FAMILY_RECIPES:
            phi = _mother_shape(recipe)
            if annihilate >= 0:
                phi = annihilate_moments(phi, annihilate)
            fam.append(phi * (1.0 / phi.cr_norm(r)))
        _family_cache[key] = tuple(fam)
    return _family_cache[key]
