"""Singular radial kernels, dyadic level slicing, and rough integration.

A kernel here is a radial profile with an integrable singularity at the
origin, cut off smoothly at a finite range.  Everything rests on slicing
it into dyadic levels whose supports shrink geometrically: the levels
are individually smooth, they telescope back to the kernel exactly away
from the origin, their derivative and moment bounds can be audited by
direct sampling, and smoothing a probe with one level turns the pairing
with a rough distribution into a rapidly converging series over levels.

The power-profile levels are all dilates of a single slice, so their
moments and oscillatory transforms collapse onto one shared cache; the
borderline logarithmic profile needs a reweighted partition (a plain
dyadic window would pick up a factor that grows with the level index)
and its levels carry an inner tail that the quadrature follows shell
by shell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._quad import adaptive_rule, graded_rule, panel_rule
from .distributions import (Distribution, DistSum, GridFunction,
                            HarmonicSum, combine)
from .errors import DivergenceSuspectedError
from .testfn import ScaledTestFunction, TestFunction, bump_raw, scale_center

#: hard ceiling on the number of levels any series pairing will visit
LEVEL_CAP = 64


# ---------------------------------------------------------------------------
# smooth step and cutoff


class _SmoothStep:
    """Fall from 1 to 0 across [-1, 1] along the standard bump's integral.

    The value comes from a dense cumulative table (spline-interpolated
    between nodes, exact plateaus outside), while every derivative is
    the bump itself up to a factor, hence exact.
    """

    def __init__(self):
        from scipy.interpolate import CubicSpline
        self._bump = bump_raw()
        self._mass = self._bump.moment(0)
        xs = np.linspace(-1.0, 1.0, 4097)
        gains = np.empty(xs.size - 1)
        for i, (a, b) in enumerate(zip(xs[:-1], xs[1:])):
            ns, ws = panel_rule(a, b, 1, 16)
            gains[i] = float(np.dot(ws, self._bump(ns)))
        tail = np.concatenate([np.cumsum(gains[::-1])[::-1], [0.0]])
        self._spline = CubicSpline(xs, tail / self._mass)

    def value(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        out[u <= -1.0] = 1.0
        mid = (u > -1.0) & (u < 1.0)
        if np.any(mid):
            out[mid] = self._spline(u[mid])
        return out

    def deriv(self, u, j):
        if j == 0:
            return self.value(u)
        return -self._bump.values(u, j - 1) / self._mass


_STEP: _SmoothStep | None = None


def _smooth_step() -> _SmoothStep:
    global _STEP
    if _STEP is None:
        _STEP = _SmoothStep()
    return _STEP


class _CutoffNode:
    """Even cutoff equal to 1 on [-rho/2, rho/2], vanishing beyond rho."""

    def __init__(self, rho: float):
        self.rho = float(rho)
        self.lo, self.hi = -self.rho, self.rho
        self.hint = self.rho / 8.0
        self.smoothness = np.inf
        self._mom: dict[int, float] = {}
        self._osc: dict[tuple[int, float], complex] = {}

    def vals(self, z, k):
        z = np.asarray(z, dtype=float)
        step = _smooth_step()
        u = 4.0 * np.abs(z) / self.rho - 3.0
        if k == 0:
            return step.value(u)
        return (4.0 / self.rho) ** k * step.deriv(u, k) * np.sign(z) ** k

    def _rule(self, frequency=0.0):
        return adaptive_rule(self.lo, self.hi, frequency=frequency,
                             max_panel=self.rho / 16.0)

    def moment(self, j):
        if j not in self._mom:
            ns, ws = self._rule()
            self._mom[j] = float(np.dot(ws, ns ** j * self.vals(ns, 0)))
        return self._mom[j]

    def osc(self, m, s):
        key = (m, float(s))
        if key not in self._osc:
            ns, ws = self._rule(frequency=abs(s))
            f = ns ** m * self.vals(ns, 0)
            self._osc[key] = complex(np.dot(ws * f, np.exp(1j * s * ns)))
        return self._osc[key]


def smooth_cutoff(rho: float) -> TestFunction:
    """The smooth range window: 1 inside half the range, 0 outside it."""
    if rho <= 0:
        raise ValueError("range must be positive")
    return TestFunction(_CutoffNode(rho))


# ---------------------------------------------------------------------------
# slice profiles


def _power_deriv(z, j, power):
    """j-th derivative of |z|^power away from the origin."""
    coeff = 1.0
    for q in range(j):
        coeff *= power - q
    return coeff * np.abs(z) ** (power - j) * np.sign(z) ** j


def _log_deriv(z, j):
    """j-th derivative of log(1 + 1/|z|) away from the origin."""
    if j == 0:
        return np.log1p(1.0 / np.abs(z))
    a = np.abs(z)
    body = (a + 1.0) ** (-j) - a ** (-j)
    return (-1.0) ** (j - 1) * _factorial(j - 1) * body * np.sign(z) ** j


def _window_deriv(cut: _CutoffNode, z, i):
    """i-th derivative of the annular window cut(z) - cut(2z)."""
    return cut.vals(z, i) - 2.0 ** i * cut.vals(2.0 * z, i)


def _log_shells(outer: float, frequency: float = 0.0, depth: int = 44,
                fine_scale: float | None = None):
    """Per-shell quadrature rules marching dyadically into the origin."""
    for _ in range(depth):
        inner = 0.5 * outer
        panel = (outer - inner) / 4.0
        if fine_scale is not None:
            panel = min(panel, max(0.5 * fine_scale, (outer - inner) / 256.0))
        left = adaptive_rule(-outer, -inner, frequency=frequency,
                             max_panel=panel)
        right = adaptive_rule(inner, outer, frequency=frequency,
                              max_panel=panel)
        yield (np.concatenate([left[0], right[0]]),
               np.concatenate([left[1], right[1]]))
        outer = inner


class _PowerSliceNode:
    """|z|^(beta-1) times the annular window, the base dyadic slice.

    Supported on the annulus [rho/4, rho] (both signs); every level of
    the power kernel is a dilate of this one profile, so the moment and
    transform caches here serve the whole decomposition.
    """

    def __init__(self, beta: float, rho: float):
        self.beta, self.rho = float(beta), float(rho)
        self.lo, self.hi = -self.rho, self.rho
        self.hint = self.rho / 16.0
        self.smoothness = np.inf
        self._cut = _CutoffNode(rho)
        self._mom: dict[int, float] = {}
        self._osc: dict[tuple[int, float], complex] = {}

    def vals(self, z, k):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        mask = np.abs(z) > 0.25 * self.rho
        if np.any(mask):
            zi = z[mask]
            acc = np.zeros_like(zi)
            for j in range(k + 1):
                acc += (_binom(k, j) * _power_deriv(zi, j, self.beta - 1.0)
                        * _window_deriv(self._cut, zi, k - j))
            out[mask] = acc
        return out

    def _rule(self, frequency=0.0):
        inner, outer = 0.25 * self.rho, self.rho
        left = adaptive_rule(-outer, -inner, frequency=frequency,
                             max_panel=(outer - inner) / 8.0)
        right = adaptive_rule(inner, outer, frequency=frequency,
                              max_panel=(outer - inner) / 8.0)
        return (np.concatenate([left[0], right[0]]),
                np.concatenate([left[1], right[1]]))

    def moment(self, j):
        if j not in self._mom:
            ns, ws = self._rule()
            self._mom[j] = float(np.dot(ws, ns ** j * self.vals(ns, 0)))
        return self._mom[j]

    def osc(self, m, s):
        key = (m, float(s))
        if key not in self._osc:
            ns, ws = self._rule(frequency=abs(s))
            f = ns ** m * self.vals(ns, 0)
            self._osc[key] = complex(np.dot(ws * f, np.exp(1j * s * ns)))
        return self._osc[key]


class _LogSliceNode:
    """One level of the borderline profile log(1 + 1/|z|).

    A plain annular window would leave the level sups growing linearly
    in the level index, so the partition is reweighted: level n carries
    every deeper window m >= n with weight 1/(m+1).  The support then
    reaches all the way into the origin, and integrals follow the
    dyadic shells inward until their contribution is below rounding.
    """

    def __init__(self, n: int, rho: float):
        self.n, self.rho = int(n), float(rho)
        self.lo, self.hi = -rho * 2.0 ** -n, rho * 2.0 ** -n
        self.hint = (rho * 2.0 ** -n) / 16.0
        self.smoothness = np.inf
        self._cut = _CutoffNode(rho)
        self._mom: dict[int, float] = {}
        self._osc: dict[tuple[int, float], complex] = {}

    def _window_sum(self, z, top_order):
        """Derivatives 0..top of sum_m (m+1)^-1 window(2^m z)."""
        a = np.abs(z)
        out = [np.zeros_like(z) for _ in range(top_order + 1)]
        pos = a[a > 0.0]
        floor = max(float(pos.min()), 1e-280) if pos.size else self.rho
        m_hi = min(self.n + 80, int(np.ceil(np.log2(self.rho / floor))) + 1)
        for m in range(self.n, m_hi + 1):
            scale = 2.0 ** m
            mask = (a > 0.25 * self.rho / scale) & (a < self.rho / scale)
            if not np.any(mask):
                continue
            zi = z[mask]
            for i in range(top_order + 1):
                out[i][mask] += (scale ** i / (m + 1.0)
                                 * _window_deriv(self._cut, scale * zi, i))
        return out

    def vals(self, z, k):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        mask = (np.abs(z) > 0.0) & (np.abs(z) < self.rho * 2.0 ** -self.n)
        if not np.any(mask):
            return out
        zi = z[mask]
        wins = self._window_sum(zi, k)
        acc = np.zeros_like(zi)
        for j in range(k + 1):
            acc += _binom(k, j) * _log_deriv(zi, j) * wins[k - j]
        out[mask] = acc
        return out

    def moment(self, j):
        if j not in self._mom:
            total, quiet = 0.0, 0
            for ns, ws in _log_shells(self.hi):
                part = float(np.dot(ws, ns ** j * self.vals(ns, 0)))
                total += part
                if abs(part) < 1e-17 * (abs(total) + 1e-30):
                    quiet += 1
                    if quiet >= 3:
                        break
                else:
                    quiet = 0
            self._mom[j] = total
        return self._mom[j]

    def osc(self, m, s):
        key = (m, float(s))
        if key not in self._osc:
            total, quiet = 0.0j, 0
            for ns, ws in _log_shells(self.hi, frequency=abs(s)):
                f = ns ** m * self.vals(ns, 0)
                part = complex(np.dot(ws * f, np.exp(1j * s * ns)))
                total += part
                if abs(part) < 1e-17 * (abs(total) + 1e-30):
                    quiet += 1
                    if quiet >= 3:
                        break
                else:
                    quiet = 0
            self._osc[key] = total
        return self._osc[key]


# ---------------------------------------------------------------------------
# kernels and levels


@dataclass(frozen=True)
class KernelLevel:
    """One dyadic slice of a singular kernel, as a smooth profile.

    ``fn`` is the profile z -> level(z); the two-slot view is
    level(x - y).  ``outer`` bounds the support radius; ``inner`` is the
    inner radius of the support annulus (zero for the reweighted
    borderline slices, whose tail reaches into the origin).
    """

    n: int
    beta: float
    rho: float
    kernel_m: int
    kernel_r: int
    log_variant: bool
    fn: TestFunction
    inner: float
    outer: float

    def values(self, z, k: int = 0):
        return self.fn.values(z, k)

    def two_slot(self, x, y, k: int = 0, l: int = 0):
        """partial_x^k partial_y^l of level(x - y)."""
        z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return (-1.0) ** l * self.fn.values(z, k + l)


def _level_rule(level: KernelLevel, frequency: float = 0.0,
                refine: int = 8, fine_scale: float | None = None):
    """Quadrature nodes and weights covering one level's support.

    ``refine`` splits the support into at least that many panels; the
    default resolves the level values, while integrals of high
    derivatives (whose sups are large near the window transitions)
    need a denser rule.  ``fine_scale`` shrinks the panels further so
    the rule also resolves a factor of that width riding on the level,
    as when a probe much finer than the level is smoothed against it;
    a floor on the panel size keeps the node count bounded.
    """
    if level.log_variant:
        parts = list(_log_shells(level.outer, frequency=frequency,
                                 fine_scale=fine_scale))
        return (np.concatenate([p[0] for p in parts]),
                np.concatenate([p[1] for p in parts]))
    inner, outer = level.inner, level.outer
    panel = (outer - inner) / refine
    if fine_scale is not None:
        panel = min(panel, max(0.5 * fine_scale, (outer - inner) / 8192.0))
    left = adaptive_rule(-outer, -inner, frequency=frequency,
                         max_panel=panel)
    right = adaptive_rule(inner, outer, frequency=frequency,
                          max_panel=panel)
    return (np.concatenate([left[0], right[0]]),
            np.concatenate([left[1], right[1]]))


class SingularKernel:
    """Radial kernel |z|^(beta-1) (or log(1+1/|z|)) under a smooth cutoff.

    ``m`` and ``r`` are the derivative orders the kernel promises in its
    first and second slot.  The dyadic levels are built lazily and
    cached; for the power profile they are all dilates of one slice and
    share its transform cache through the dilation algebra.  The kernel
    is translation invariant, so recentered moment integrals with more
    derivatives than powers vanish, and level images of polynomials are
    again polynomials of the same degree.
    """

    def __init__(self, beta: float, rho: float = 1.0, *, m: int | None = None,
                 r: int = 4, log_variant: bool = False):
        if beta <= 0.0:
            raise ValueError("regularity gain beta must be positive")
        if log_variant and beta != 1.0:
            raise ValueError("the borderline log profile requires beta = 1")
        if not log_variant and beta > 1.0:
            raise ValueError("power profile needs beta <= 1 on the line")
        if rho <= 0.0:
            raise ValueError("range must be positive")
        if m is None:
            # the log tail has finite size but no integrable first-slot
            # derivatives near the origin, so it promises none
            m = 0 if log_variant else 4
        if m < 0 or r < 0:
            raise ValueError("slot orders must be nonnegative")
        self.beta, self.rho = float(beta), float(rho)
        self.m, self.r = int(m), int(r)
        self.log_variant = bool(log_variant)
        self._cutoff = smooth_cutoff(self.rho)
        self._slice = (None if log_variant
                       else TestFunction(_PowerSliceNode(beta, rho)))
        self._levels: dict[int, KernelLevel] = {}

    # -- pointwise map ------------------------------------------------------

    def radial(self, z):
        """Profile values K(z); infinite at the origin."""
        z = np.asarray(z, dtype=float)
        guarded = np.where(z == 0.0, 1.0, np.abs(z))
        if self.log_variant:
            body = np.log1p(1.0 / guarded)
        else:
            body = guarded ** (self.beta - 1.0)
        body = np.where(z == 0.0, np.inf, body)
        return body * self._cutoff(z)

    def __call__(self, x, y):
        return self.radial(np.asarray(x, dtype=float)
                           - np.asarray(y, dtype=float))

    # -- levels ---------------------------------------------------------

    def level(self, n: int) -> KernelLevel:
        if n < 0:
            raise ValueError("level index must be nonnegative")
        if n not in self._levels:
            if self.log_variant:
                fn = TestFunction(_LogSliceNode(n, self.rho))
                inner = 0.0
            else:
                fn = (self._slice.rescale_argument(2.0 ** n)
                      * 2.0 ** (-n * (self.beta - 1.0)))
                inner = self.rho * 2.0 ** (-n - 2)
            self._levels[n] = KernelLevel(
                n=n, beta=self.beta, rho=self.rho, kernel_m=self.m,
                kernel_r=self.r, log_variant=self.log_variant, fn=fn,
                inner=inner, outer=self.rho * 2.0 ** -n)
        return self._levels[n]


def fractional_kernel(beta: float, rho: float = 1.0,
                      log_variant: bool = False, *, m: int | None = None,
                      r: int = 4) -> SingularKernel:
    """Radial singular kernel with smoothing gain beta and range rho."""
    return SingularKernel(beta, rho, m=m, r=r, log_variant=log_variant)


def radial_moment(kernel: SingularKernel, p: int = 0) -> float:
    """int z^p K(z) dz by a dyadically graded rule across the origin.

    A uniform rule loses digits against the integrable singularity, so
    the panels shrink geometrically toward it from both sides.
    """
    ns, ws = graded_rule(0.0, kernel.rho, "left")
    right = float(np.dot(ws, ns ** p * kernel.radial(ns)))
    return right * (1.0 + (-1.0) ** p)


# ---------------------------------------------------------------------------
# decomposition and bounds report


@dataclass(frozen=True)
class DyadicDecomposition:
    """The kernel's levels 0..N_max plus the window profile slicing them."""

    kernel: SingularKernel
    levels: tuple[KernelLevel, ...]
    window: TestFunction
    N_max: int

    def partial_sum(self, z, N: int | None = None):
        """Sum of level values through N (all levels by default)."""
        N = self.N_max if N is None else int(N)
        z = np.asarray(z, dtype=float)
        total = np.zeros_like(z)
        for lv in self.levels[:N + 1]:
            total += lv.values(z)
        return total


def dyadic_decompose(kernel: SingularKernel,
                     N_max: int = 14) -> DyadicDecomposition:
    """Slice the kernel into levels with geometrically shrinking support.

    Partial sums through N reproduce the kernel exactly at distances
    beyond rho 2^-(N+1) from the origin; what is missing is a copy of
    the kernel windowed at the next finer scale.
    """
    if N_max < 4:
        raise ValueError("need at least levels 0..4 to be meaningful")
    levels = tuple(kernel.level(n) for n in range(N_max + 1))
    window = kernel._cutoff - kernel._cutoff.rescale_argument(2.0)
    return DyadicDecomposition(kernel=kernel, levels=levels,
                               window=window, N_max=int(N_max))


@dataclass(frozen=True)
class DerivBoundRow:
    n: int
    k: int
    l: int
    ratio: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class MomentBoundRow:
    n: int
    k: int
    l: int
    raw: float
    ratio: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class PolyPreservationRow:
    n: int
    k: int
    residual: float
    passed: bool


#: slack multiple on the coarse-level constant before a ratio row fails
_BOUND_SLACK = 4.0


@dataclass(frozen=True)
class KernelBoundsReport:
    """Sampled audit of the level bounds a singular kernel promises.

    Derivative rows compare the sampled sup of each level derivative
    against the expected growth 2^((1-beta+k+l)n); moment rows do the
    same for the recentered moment integrals against decay 2^(-beta n),
    except that rows with more derivatives than powers must vanish
    outright for a translation-invariant kernel (to working precision
    at the level's derivative scale).  Polynomial rows record how far
    each level image of y^k is from an exact degree-k polynomial.  A
    ratio row passes while it stays within a fixed slack of the
    constant seen at the coarsest level; sups are sampled on
    shell-resolved grids of bounded depth, which is the range the
    level integrals actually weight.
    """

    beta: float
    rho: float
    log_variant: bool
    deriv_rows: tuple[DerivBoundRow, ...]
    moment_rows: tuple[MomentBoundRow, ...]
    poly_rows: tuple[PolyPreservationRow, ...]

    def deriv_ratios(self, k: int, l: int) -> np.ndarray:
        return np.array([row.ratio for row in self.deriv_rows
                         if row.k == k and row.l == l])

    def moment_raws(self, k: int, l: int) -> np.ndarray:
        return np.array([row.raw for row in self.moment_rows
                         if row.k == k and row.l == l])

    def all_pass(self) -> bool:
        rows = (*self.deriv_rows, *self.moment_rows, *self.poly_rows)
        return all(row.passed for row in rows)

    def csv_rows(self):
        """(n, k, l, ratio, bound, pass) for the derivative-bound table."""
        return [(r.n, r.k, r.l, r.ratio, r.bound, r.passed)
                for r in self.deriv_rows]

    def summary(self) -> dict:
        return {
            "beta": self.beta,
            "rho": self.rho,
            "log_variant": self.log_variant,
            "all_pass": self.all_pass(),
            "derivative_bounds": [vars(r) for r in self.deriv_rows],
            "moment_bounds": [vars(r) for r in self.moment_rows],
            "polynomial_preservation": [vars(r) for r in self.poly_rows],
        }


def _level_sample_grid(level: KernelLevel, per_region: int = 769):
    """Sample points covering the level support, shells resolved."""
    if level.inner > 0.0:
        right = np.linspace(level.inner, level.outer, per_region)
        return np.concatenate([-right[::-1], right])
    chunks = []
    outer = level.outer
    for _ in range(16):
        inner = 0.5 * outer
        chunks.append(np.linspace(inner, outer, 161))
        outer = inner
    right = np.concatenate(chunks)
    return np.concatenate([-right[::-1], right])


def kernel_bounds_report(decomp: DyadicDecomposition,
                         region: tuple[float, float] = (-1.0, 1.0)
                         ) -> KernelBoundsReport:
    """Audit the derivative, moment, and polynomial bounds per level.

    Sups are sampled over each level's support, so the compact region
    only determines where the polynomial-preservation images are read.
    """
    kernel = decomp.kernel
    beta = kernel.beta
    deriv_rows, moment_rows, poly_rows = [], [], []
    xs = np.linspace(region[0], region[1], 33)

    refs_d: dict[tuple[int, int], float] = {}
    refs_m: dict[tuple[int, int], float] = {}
    for level in decomp.levels:
        grid = _level_sample_grid(level)
        ns, ws = _level_rule(level, refine=64)
        for k in range(kernel.m + 1):
            for l in range(kernel.r + 1):
                sup = float(np.max(np.abs(level.values(grid, k + l))))
                ratio = sup / 2.0 ** ((1.0 - beta + k + l) * level.n)
                ref = refs_d.setdefault((k, l), max(ratio, 1e-300))
                bound = _BOUND_SLACK * ref
                deriv_rows.append(DerivBoundRow(
                    n=level.n, k=k, l=l, ratio=ratio, bound=bound,
                    passed=bool(ratio <= bound)))
        for k in range(kernel.m + 1):
            vals = level.values(ns, k)
            for l in range(kernel.r + 1):
                raw = float((-1.0) ** (l + k) * np.dot(ws, ns ** l * vals))
                ratio = abs(raw) / 2.0 ** (-beta * level.n)
                if l < k or (l + k) % 2 == 1:
                    # zero by translation invariance (more derivatives
                    # than powers) or by evenness of the profile; the
                    # check is relative to the integrand's absolute
                    # mass, which is the precision a quadrature can
                    # speak to
                    mass = float(np.dot(ws, np.abs(ns ** l * vals)))
                    tol = max(1e-10, 1e-14 * mass)
                    moment_rows.append(MomentBoundRow(
                        n=level.n, k=k, l=l, raw=raw, ratio=ratio,
                        bound=tol, passed=bool(abs(raw) <= tol)))
                else:
                    ref = refs_m.setdefault((k, l), max(ratio, 1e-300))
                    bound = _BOUND_SLACK * ref
                    moment_rows.append(MomentBoundRow(
                        n=level.n, k=k, l=l, raw=raw, ratio=ratio,
                        bound=bound, passed=bool(ratio <= bound)))
        base = level.values(ns, 0) * ws
        for k in range(min(kernel.r, 3) + 1):
            images = np.empty_like(xs)
            for i, x in enumerate(xs):
                images[i] = float(np.dot(base, (x - ns) ** k))
            fit = np.polynomial.polynomial.polyfit(xs, images, k)
            resid = float(np.max(np.abs(
                images - np.polynomial.polynomial.polyval(xs, fit))))
            scale = max(1.0, float(np.max(np.abs(images))))
            poly_rows.append(PolyPreservationRow(
                n=level.n, k=k, residual=resid,
                passed=bool(resid <= 1e-8 * scale)))

    return KernelBoundsReport(
        beta=beta, rho=kernel.rho, log_variant=kernel.log_variant,
        deriv_rows=tuple(deriv_rows), moment_rows=tuple(moment_rows),
        poly_rows=tuple(poly_rows))


# ---------------------------------------------------------------------------
# adjoint smoothing


def _smoothed_probe_values(level: KernelLevel, psi, ys, chunk: int = 2048):
    """Values of int psi(x) level(x - y) dx on an array of y."""
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    fine = psi.scale if psi.scale < level.outer else None
    ns, ws = _level_rule(level, fine_scale=fine)
    body = level.values(ns, 0) * ws
    chunk = max(8, min(chunk, (1 << 21) // max(1, ns.size)))
    out = np.empty_like(ys)
    for start in range(0, ys.size, chunk):
        block = ys[start:start + chunk]
        args = block[:, None] + ns[None, :]
        vals = psi.values(args.ravel()).reshape(args.shape)
        out[start:start + chunk] = vals @ body
    return out


def adjoint_apply(level: KernelLevel, psi: ScaledTestFunction,
                  grid_n: int = 1 << 13) -> GridFunction:
    """Smooth a probe with one level: y -> int psi(x) level(x - y) dx.

    The result is supported in the probe's support fattened by the
    level's reach, and comes back as a grid-backed function there.
    """
    s_lo, s_hi = psi.support_interval
    lo = s_lo - level.outer
    hi = s_hi + level.outer
    pad = 0.02 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, grid_n)
    vals = _smoothed_probe_values(level, psi, grid)
    out = GridFunction(samples=vals, lo=lo - pad, hi=hi + pad, n=grid_n,
                       scale_hint=min(psi.scale, level.outer))
    out.support_hint = (lo, hi)
    return out


# ---------------------------------------------------------------------------
# probe factorization across a level


class _AdjointShapeNode:
    """The level smoothing of a recentered probe, as a unit-size shape.

    shape(w) = front * int phi(z) level(lam z - mu w) dz, evaluated on a
    fixed kernel-side rule through the substitution u = lam z - mu w,
    which leaves the level values untouched and pushes all w-dependence
    into translated evaluations of phi.
    """

    def __init__(self, level: KernelLevel, phi: TestFunction, lam: float,
                 mu: float, front: float):
        self.level, self.phi = level, phi
        self.lam, self.mu, self.front = float(lam), float(mu), float(front)
        radius = (self.lam * phi.support_radius + level.outer) / self.mu
        self.lo, self.hi = -radius, radius
        # smoothing a probe with the slice leaves features no finer
        # than the wider of the probe scale and the slice's own scale
        slice_feat = (level.outer - level.inner) / 8.0
        self.hint = max(self.lam, slice_feat) / (4.0 * self.mu)
        self.smoothness = np.inf
        fine = self.lam if self.lam < level.outer else None
        self._ns, ws = _level_rule(level, fine_scale=fine)
        self._body = self.level.values(self._ns, 0) * ws / self.lam
        self._chunk = max(8, (1 << 21) // max(1, self._ns.size))
        self._mom: dict[int, float] = {}
        self._osc: dict[tuple[int, float], complex] = {}

    def vals(self, w, k):
        w = np.asarray(w, dtype=float)
        flat = np.atleast_1d(w).ravel().astype(float)
        out = np.empty_like(flat)
        gain = self.front * (self.mu / self.lam) ** k
        for start in range(0, flat.size, self._chunk):
            block = flat[start:start + self._chunk]
            args = (self._ns[None, :] + self.mu * block[:, None]) / self.lam
            phi_vals = self.phi.values(args.ravel(), k).reshape(args.shape)
            out[start:start + self._chunk] = gain * (phi_vals @ self._body)
        return out.reshape(np.shape(w))

    def _rule(self, frequency=0.0):
        panel = min((self.hi - self.lo) / 16.0,
                    self.level.outer / (16.0 * self.mu))
        return adaptive_rule(self.lo, self.hi, frequency=frequency,
                             max_panel=panel)

    def moment(self, j):
        if j not in self._mom:
            ns, ws = self._rule()
            self._mom[j] = float(np.dot(ws, ns ** j * self.vals(ns, 0)))
        return self._mom[j]

    def osc(self, m, s):
        key = (m, float(s))
        if key not in self._osc:
            ns, ws = self._rule(frequency=abs(s))
            f = ns ** m * self.vals(ns, 0)
            self._osc[key] = complex(np.dot(ws * f, np.exp(1j * s * ns)))
        return self._osc[key]


@dataclass(frozen=True)
class Factorization:
    """A level smoothing of a probe, split into size and shape.

    The smoothed probe equals ``prefactor`` times the mass-normalized
    rescaling of ``shape`` to ``scale`` at ``center``; the prefactor
    carries all the level and probe-scale decay while the shape stays
    uniformly bounded with unit-order support.
    """

    regime: str
    prefactor: float
    shape: TestFunction
    center: float
    scale: float
    residual: float
    shape_bound: float
    vanishing_depth: int

    def as_probe(self) -> ScaledTestFunction:
        return scale_center(self.shape, self.center, self.scale)

    def reconstruct(self, ys):
        return self.prefactor * self.as_probe().values(ys)


def _factor_shape(level: KernelLevel, phi: TestFunction, lam: float,
                  wide: bool, m_eff: int):
    beta, n = level.beta, level.n
    if wide:
        mu = 2.0 * lam
        front = 2.0 ** (beta * n) * mu
        prefactor = 2.0 ** (-beta * n)
    else:
        mu = 2.0 * level.outer
        size = (2.0 ** n * lam) ** m_eff
        front = 2.0 ** (beta * n) * mu / size
        prefactor = 2.0 ** (-beta * n) * size
    node = _AdjointShapeNode(level, phi, lam, mu, front)
    return TestFunction(node), mu, prefactor


def eta_zeta_factorize(level: KernelLevel, phi: TestFunction, x: float,
                       lam: float, c: int = -1, *,
                       regime: str | None = None) -> Factorization:
    """Split the level smoothing of a probe into prefactor and shape.

    Two regimes, split at probe scale equal to the level's reach: for a
    wide probe the output lives at twice the probe scale and the level
    contributes pure decay; for a narrow probe it lives at twice the
    level's reach and the probe's annihilated moments convert into
    powers of the scale gap, capped by the kernel's first-slot order.
    The identity is verified pointwise on a sample grid before
    returning.

    ``c`` is the probe's moment annihilation depth (-1 when the probe
    annihilates nothing); the shape inherits exactly that annihilation,
    whichever regime applies, because the level preserves polynomials.
    """
    if lam <= 0.0:
        raise ValueError("probe scale must be positive")
    for j in range(0, c + 1):
        if abs(phi.moment(j)) > 1e-8 * max(1.0, phi.cr_norm(0)):
            raise ValueError(
                f"probe moment {j} is not annihilated, so depth c={c} "
                "overstates the probe class")
    if regime is None:
        wide = lam >= level.outer
    elif regime in ("wide_probe", "narrow_probe"):
        wide = regime == "wide_probe"
    else:
        raise ValueError("regime must be 'wide_probe' or 'narrow_probe'")

    m_eff = min(c + 1, level.kernel_m)
    shape, mu, prefactor = _factor_shape(level, phi, lam, wide, m_eff)

    reach = lam * phi.support_radius + level.outer
    ys = x + np.linspace(-1.0, 1.0, 129) * reach
    direct = _smoothed_probe_values(level, scale_center(phi, x, lam), ys)
    recon = prefactor * scale_center(shape, x, mu).values(ys)
    residual = float(np.max(np.abs(direct - recon)))
    if residual > 1e-8 * max(1.0, float(np.max(np.abs(direct)))):
        raise ArithmeticError(
            "level smoothing does not match its factorized form; "
            f"residual {residual:.3e}")

    sup_grid = np.linspace(shape.support[0], shape.support[1], 2049)
    shape_bound = max(float(np.max(np.abs(shape.values(sup_grid, k))))
                      for k in range(3))
    return Factorization(
        regime="wide_probe" if wide else "narrow_probe",
        prefactor=prefactor, shape=shape, center=float(x), scale=mu,
        residual=residual, shape_bound=shape_bound,
        vanishing_depth=int(c))


# ---------------------------------------------------------------------------
# singular integration against distributions


class KernelImage(Distribution):
    """The singular integral of a distribution, paired level by level.

    Pairing against a probe sums the source's pairings with the level
    smoothings of that probe.  Once the levels are finer than the probe
    the terms decay geometrically at the kernel's rate, so the series
    is truncated when the projected tail drops below a fraction of the
    running sum; terms that keep growing past that point instead raise
    ``DivergenceSuspectedError``.

    Harmonic-sum sources take a closed-form route: smoothing by a level
    is again a harmonic sum, cached per level, so that sweeps over many
    probes cost one transform table.  Other sources are paired through
    the factorized shapes of the probe across each level.
    """

    def __init__(self, kernel: SingularKernel, source: Distribution,
                 tail_fraction: float = 1e-8, max_level: int = LEVEL_CAP):
        self.kernel, self.source = kernel, source
        self.tail_fraction = float(tail_fraction)
        self.max_level = int(max_level)
        self.declared_order = getattr(source, "declared_order", 0)
        hint = getattr(source, "support_hint", None)
        self.support_hint = (None if hint is None
                             else (hint[0] - kernel.rho,
                                   hint[1] + kernel.rho))
        self._images: dict[int, HarmonicSum] = {}
        self._shapes: dict = {}

    # -- per-level machinery ----------------------------------------------

    def _level_image(self, n: int) -> HarmonicSum:
        if n not in self._images:
            level = self.kernel.level(n)
            self._images[n] = self.source.mollified(level.fn, 1.0)
        return self._images[n]

    def _level_term(self, n: int, probe: ScaledTestFunction) -> float:
        if isinstance(self.source, HarmonicSum):
            return self._level_image(n).pair(probe)
        level = self.kernel.level(n)
        lam = float(probe.scale)
        key = (n, lam, probe.base)
        if key not in self._shapes:
            self._shapes[key] = _factor_shape(level, probe.base, lam,
                                              lam >= level.outer, 0)
        shape, mu, prefactor = self._shapes[key]
        inner = ScaledTestFunction(shape, probe.center, mu)
        return prefactor * self.source.pair(inner)

    def level_terms(self, probe: ScaledTestFunction,
                    depth: int) -> np.ndarray:
        """The first ``depth`` series terms for one probe, for audits."""
        return np.array([self._level_term(n, probe) for n in range(depth)])

    # -- distribution interface ---------------------------------------------

    def pair(self, probe: ScaledTestFunction) -> float:
        switch = max(0, int(np.ceil(np.log2(
            self.kernel.rho / float(probe.scale)))))
        decay = 2.0 ** -self.kernel.beta
        total, history, peak_coarse = 0.0, [], 0.0
        converged = False
        for n in range(self.max_level + 1):
            t = self._level_term(n, probe)
            total += t
            history.append(abs(t))
            if n <= switch + 3:
                # levels still coarser than the probe; their size sets
                # the scale any later term is measured against
                peak_coarse = max(peak_coarse, abs(t))
                continue
            tail = max(history[-2:]) * decay / (1.0 - decay)
            if tail <= self.tail_fraction * max(abs(total), 1e-300):
                converged = True
                break
            if n >= switch + 8 and (n - switch) % 4 == 0:
                # a rounding-noise floor can drift upward as deeper
                # levels are assembled, so growth alone is no verdict;
                # spanning twelve decades over the coarse levels is
                recent = max(history[-4:])
                if (recent > 4.0 * max(history[-8:-4])
                        and recent > 1e12 * max(peak_coarse, 1e-300)):
                    raise DivergenceSuspectedError(
                        "series terms keep growing past the probe scale "
                        f"(level {n}); the source looks rougher than its "
                        "declared order")
        if not converged and len(history) >= 12:
            recent = max(history[-4:])
            if (recent > 3.0 * max(history[-8:-4])
                    and recent > 100.0 * max(peak_coarse, 1e-300)):
                raise DivergenceSuspectedError(
                    "series terms were still growing when the level cap "
                    f"was reached ({self.max_level}); the source looks "
                    "rougher than its declared order")
        return total


def integrate_distribution(kernel: SingularKernel, source: Distribution, *,
                           tail_fraction: float = 1e-8,
                           max_level: int = LEVEL_CAP) -> Distribution:
    """The kernel image of a distribution, as a lazily paired distribution.

    The source must not consume more probe derivatives than the
    kernel's second-slot order provides.  Linear combinations are
    integrated part by part, so harmonic-sum parts keep their
    closed-form route.
    """
    if isinstance(source, DistSum):
        coeffs = [c for c, _ in source.parts]
        parts = [integrate_distribution(kernel, d,
                                        tail_fraction=tail_fraction,
                                        max_level=max_level)
                 for _, d in source.parts]
        return combine(coeffs, parts)
    if getattr(source, "declared_order", 0) > kernel.r:
        raise ValueError(
            "source consumes more derivatives than the kernel's second "
            f"slot offers (needs {source.declared_order}, kernel has "
            f"{kernel.r})")
    return KernelImage(kernel, source, tail_fraction, max_level)


def _factorial(k: int) -> float:
    out = 1.0
    for i in range(2, k + 1):
        out *= i
    return out


def _binom(n: int, k: int) -> float:
    return _factorial(n) / (_factorial(k) * _factorial(n - k))
