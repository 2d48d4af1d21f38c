"""Log-log slope fitting used by the exponent reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int

    @property
    def degenerate(self) -> bool:
        return self.n_points < 2 or not np.isfinite(self.slope)


def fit_loglog(scales, values, drop_coarse: int = 2, drop_fine: int = 1,
               floor: float = 1e-14) -> SlopeFit:
    """Least-squares slope of log2(value) against log2(scale).

    The coarsest ``drop_coarse`` and finest ``drop_fine`` scales are
    excluded: the coarse end sees boundary effects of the sampling
    region and the fine end sees quadrature noise first.  Values at or
    below ``floor`` are treated as exact zeros and dropped; a fit with
    fewer than two surviving points is reported as degenerate rather
    than invented.
    """
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(scales)[::-1]  # coarse -> fine
    scales, values = scales[order], values[order]
    lo = drop_coarse
    hi = len(scales) - drop_fine
    scales, values = scales[lo:hi], values[lo:hi]
    keep = values > floor
    scales, values = scales[keep], values[keep]
    if len(scales) < 2:
        return SlopeFit(float("nan"), float("nan"), float("nan"), len(scales))
    res = stats.linregress(np.log2(scales), np.log2(values))
    return SlopeFit(float(res.slope), float(res.intercept),
                    float(res.rvalue ** 2), len(scales))
