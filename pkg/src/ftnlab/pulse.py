"""Raised-cosine pulse evaluation and ISI tap extraction.

The transmit pulse is a unit-energy root-raised-cosine, so the cascade of
transmit filter and matched filter is the raised-cosine pulse.  Sampling
that autocorrelation at the accelerated spacing ``tau*T`` (``tau <= 1``)
yields the intersymbol-interference tap sequence used everywhere else in
this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PulseConfig", "IsiTaps", "rc_value", "isi_taps"]

# Half-width of the window around |t| = 1/(2*beta) inside which the
# removable singularity of the raised cosine is replaced by its limit.
_SINGULARITY_WINDOW = 1e-8


@dataclass(frozen=True)
class PulseConfig:
    """Parameters of the raised-cosine autocorrelation pulse.

    Attributes
    ----------
    beta:
        Roll-off factor in [0, 1].
    T:
        Symbol period.  All quantities in this package depend only on
        t/T, so the default of 1 is never worth changing.
    tap_threshold:
        Taps with magnitude below this value are truncated.
    max_half_span:
        Hard cap on the one-sided tap count L - 1.
    """

    beta: float = 0.3
    T: float = 1.0
    tap_threshold: float = 1e-4
    max_half_span: int = 40

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.T <= 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.tap_threshold < 0:
            raise ValueError(f"tap_threshold must be >= 0, got {self.tap_threshold}")
        if self.max_half_span < 0:
            raise ValueError(f"max_half_span must be >= 0, got {self.max_half_span}")


@dataclass(frozen=True)
class IsiTaps:
    """Sampled autocorrelation sequence g[k] at spacing tau*T.

    ``g`` holds the full symmetric sequence indexed -(L-1)..(L-1), so
    ``g[L-1]`` is the center tap g[0] = 1.
    """

    g: np.ndarray
    tau: float
    L: int
    beta: float

    @property
    def one_sided(self) -> np.ndarray:
        """Taps g[0..L-1] (non-negative lags)."""
        return self.g[self.L - 1 :]

    def value(self, k: int) -> float:
        """Tap at signed lag ``k``; zero outside the stored support."""
        if abs(k) >= self.L:
            return 0.0
        return float(self.g[self.L - 1 + k])


def rc_value(t, beta: float):
    """Evaluate the raised-cosine pulse sinc(t)*cos(pi*beta*t)/(1-(2*beta*t)^2).

    Time is in units of the symbol period.  The removable singularity at
    |t| = 1/(2*beta) is evaluated by its limit (pi/4)*sinc(1/(2*beta)).
    Accepts scalars or arrays; this is a total function (no poles, no NaNs).

    Parameters
    ----------
    t : array_like
        Evaluation times in units of T.
    beta : float
        Roll-off factor in [0, 1].
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    t_arr = np.asarray(t, dtype=float)
    if beta == 0.0:
        out = np.sinc(t_arr)
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    t_sing = 1.0 / (2.0 * beta)
    near = np.abs(np.abs(t_arr) - t_sing) < _SINGULARITY_WINDOW
    denom = 1.0 - (2.0 * beta * t_arr) ** 2
    # Avoid 0/0 inside the guarded window; the masked lanes are replaced below.
    safe_denom = np.where(near, 1.0, denom)
    values = np.sinc(t_arr) * np.cos(np.pi * beta * t_arr) / safe_denom
    limit = (np.pi / 4.0) * np.sinc(t_sing)
    out = np.where(near, limit, values)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def isi_taps(config: PulseConfig, tau: float) -> IsiTaps:
    """Sample the raised cosine at multiples of tau*T and truncate.

    The one-sided length L is the smallest index beyond which every tap
    magnitude up to ``max_half_span`` falls below ``tap_threshold``;
    equivalently 1 + the largest lag whose tap survives the threshold.

    Raises
    ------
    ValueError
        If ``tau`` is outside (0, 1].
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    lags = np.arange(config.max_half_span + 1)
    vals = rc_value(lags * tau, config.beta)
    vals = np.atleast_1d(np.asarray(vals, dtype=float))
    keep = np.nonzero(np.abs(vals) >= config.tap_threshold)[0]
    L = int(keep.max()) + 1 if keep.size else 1
    one_sided = vals[:L].copy()
    full = np.concatenate([one_sided[:0:-1], one_sided])
    return IsiTaps(g=full, tau=float(tau), L=L, beta=config.beta)
