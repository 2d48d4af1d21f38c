"""Sample grids for seminorm reports.

Center grids deliberately avoid dyadic rationals: the lacunary
fixtures concentrate their spectrum on frequencies 2^j pi, and probes
centered at k/2^m sit exactly on the zeros of every high-frequency
sine component, so an equispaced dyadic grid underestimates suprema
by scale-dependent factors.  An odd prime number of half-offset cells
keeps all phases 2^j pi x bounded away from multiples of pi.
"""

import numpy as np


def center_grid(lo: float, hi: float, n: int = 17) -> np.ndarray:
    """n cell midpoints of [lo, hi]; spacing (hi-lo)/n, never dyadic."""
    edges = np.linspace(lo, hi, n + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def dyadic_scales(n: int = 9, coarsest: float = 1.0) -> np.ndarray:
    """Scales coarsest * 2^-j for j = 0..n-1, coarse to fine."""
    return coarsest * 2.0 ** -np.arange(n, dtype=float)


def dyadic_offsets(n: int = 8, coarsest: float = 0.5) -> np.ndarray:
    """Signed center separations +-coarsest*2^-j, j = 0..n-1."""
    mags = coarsest * 2.0 ** -np.arange(n, dtype=float)
    return np.concatenate([mags, -mags])
