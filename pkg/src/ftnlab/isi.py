"""Spectral factorization of the ISI taps and block matrix construction.

The symmetric tap sequence g has the nonnegative spectrum of a pulse
autocorrelation, so it factors as g = v * reverse(v) with v causal and
minimum phase.  Detection runs on the whitened block model y = G a + n
with white noise, where G is either the banded lower-triangular
convolution matrix built from v or the symmetric Toeplitz Gram matrix
built from g.

Two factorization routes are provided.  Root grouping on the polynomial
of g is exact for moderate tap counts.  For the long, nearly singular
sequences that arise when the folded pulse spectrum has zero bands
(tau < 1/(1+beta)), Newton iteration on the log spectrum is used
instead; root extraction at polynomial degrees in the thousands is not
numerically meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .pulse import IsiTaps, PulseConfig, isi_taps

__all__ = [
    "FactorizationError",
    "WhitenedTaps",
    "IsiMatrix",
    "spectral_factorize",
    "build_isi_matrix",
    "whiten_model",
    "minimum_phase_winding",
]

# Roots this close to the unit circle are treated as on-circle and split
# evenly between the minimum-phase factor and its mirror.
_CIRCLE_TOL = 1e-6
# Sampled spectra dipping below -_SPECTRUM_TOL indicate severe truncation.
_SPECTRUM_TOL = 1e-9
# Largest tap count handled by polynomial root extraction.
_ROOTS_MAX_L = 96


class FactorizationError(RuntimeError):
    """Raised when the tap sequence cannot be spectrally factorized."""


@dataclass(frozen=True)
class WhitenedTaps:
    """Causal minimum-phase factor v with v[n] * v[-n] = g.

    ``residual`` is the max-norm reconstruction error of the convolution
    of v with its reversal against g.
    """

    v: np.ndarray
    residual: float

    @property
    def L(self) -> int:
        return len(self.v)


@dataclass(frozen=True)
class IsiMatrix:
    """N x N Toeplitz ISI matrix with the sqrt(tau*Es) amplitude absorbed.

    ``domain`` is "convolution" (banded lower-triangular from v) or
    "gram" (symmetric positive semidefinite from g).  ``L`` records the
    tap bandwidth of the source sequence.
    """

    entries: np.ndarray
    domain: str
    amp: float
    N: int
    L: int

    def column(self, k: int) -> np.ndarray:
        return self.entries[:, k]


def _sampled_spectrum(one_sided: np.ndarray, n_freq: int = 4096) -> np.ndarray:
    """Real spectrum g[0] + 2*sum_k g[k] cos(k*w) on a dense [0, pi] grid."""
    w = np.linspace(0.0, np.pi, n_freq)
    lags = np.arange(1, len(one_sided))
    return one_sided[0] + 2.0 * (one_sided[1:] @ np.cos(np.outer(lags, w)))


def _residual(v: np.ndarray, g_full: np.ndarray) -> float:
    recon = np.convolve(v, v[::-1])
    return float(np.max(np.abs(recon - g_full)))


def _factorize_roots(taps: IsiTaps) -> WhitenedTaps:
    """Exact factorization by grouping the reciprocal root pairs of g."""
    L = taps.L
    roots = np.roots(np.asarray(taps.g, dtype=float))
    dist = np.abs(np.abs(roots) - 1.0)
    on_circle = roots[dist <= _CIRCLE_TOL]
    inside = roots[(dist > _CIRCLE_TOL) & (np.abs(roots) < 1.0)]

    if len(on_circle) % 2 != 0:
        raise FactorizationError(
            f"odd number of near-circle roots ({len(on_circle)}); "
            f"spectrum is too close to singular for L={L}"
        )
    # Split pairs share an angle; sorting by (angle, |r|) makes each pair
    # adjacent and picks the inner root of every pair.
    order = np.lexsort((np.abs(on_circle), np.angle(on_circle)))
    half_circle = on_circle[order][0::2]

    selected = np.concatenate([inside, half_circle])
    if len(selected) != L - 1:
        raise FactorizationError(
            f"selected {len(selected)} roots for a factor of length {L}; "
            f"root classification failed, increase the tap span"
        )

    coeffs = np.poly(selected)
    imag_leak = np.max(np.abs(coeffs.imag)) / max(np.max(np.abs(coeffs.real)), 1e-300)
    if imag_leak > 1e-6:
        raise FactorizationError(
            f"minimum-phase factor has non-real coefficients "
            f"(relative imaginary part {imag_leak:.3e})"
        )
    v = np.real(coeffs)
    v *= np.sqrt(taps.one_sided[0]) / np.linalg.norm(v)
    return WhitenedTaps(v=v, residual=_residual(v, taps.g))


def _factorize_spectral(taps: IsiTaps, floor: float = 1e-7,
                        max_iter: int = 500, tol: float = 1e-13) -> WhitenedTaps:
    """Newton (Wilson) iteration A <- A*(1 + P+[S/|A|^2 - 1]) on the spectrum.

    P+ projects onto the causal part with the zero lag halved, which keeps
    the iterate an outer (minimum-phase) function.  The spectrum is floored
    at a small positive level so the iteration is defined across the zero
    bands of severely packed pulses; the floor also keeps the factor's
    zeros far enough inside the circle that truncating it to L taps cannot
    push any of them outside.  Its contribution to the reconstruction
    residual stays below the truncation ripple of g itself.
    """
    L = taps.L
    g1 = np.asarray(taps.one_sided, dtype=float)
    n_fft = max(1 << 17, int(2 ** np.ceil(np.log2(16 * L))))
    buf = np.zeros(n_fft)
    buf[0] = g1[0]
    buf[1:L] = g1[1:]
    buf[n_fft - L + 1:] = g1[1:][::-1]
    S = np.maximum(np.real(np.fft.fft(buf)), floor)

    def causal_half(x_freq):
        x = np.real(np.fft.ifft(x_freq))
        c = np.zeros(n_fft)
        c[0] = x[0] / 2.0
        c[1:n_fft // 2] = x[1:n_fft // 2]
        return np.fft.fft(c)

    A = np.exp(causal_half(np.log(S)))
    smax = S.max()
    for _ in range(max_iter):
        ratio = S / np.real(A * np.conj(A))
        A = A * (1.0 + causal_half(ratio - 1.0))
        if np.max(np.abs(np.real(A * np.conj(A)) - S)) < tol * smax:
            break
    v = np.real(np.fft.ifft(A))[:L].copy()
    v *= np.sqrt(g1[0]) / np.linalg.norm(v)
    if v[0] < 0:
        v = -v
    return WhitenedTaps(v=v, residual=_residual(v, taps.g))


def spectral_factorize(taps: IsiTaps, *, spectrum_tol: float = _SPECTRUM_TOL,
                       method: str = "auto") -> WhitenedTaps:
    """Factor the symmetric tap sequence into its minimum-phase root.

    The result is scaled so that sum(v^2) equals g[0] and v[0] > 0.
    ``method`` is "roots", "spectral", or "auto" (roots up to L=96,
    spectral beyond).

    Raises
    ------
    FactorizationError
        If the sampled spectrum of g is negative beyond ``spectrum_tol``,
        which signals that the truncation length L must grow, or if root
        bookkeeping cannot produce a length-L causal factor.
    """
    g_one = np.asarray(taps.one_sided, dtype=float)
    if taps.L == 1:
        return WhitenedTaps(v=np.array([np.sqrt(g_one[0])]), residual=0.0)

    smin = float(_sampled_spectrum(g_one).min())
    if smin < -spectrum_tol:
        raise FactorizationError(
            f"sampled spectrum is negative (min {smin:.3e}); the tap "
            f"truncation L={taps.L} is too severe, increase max_half_span "
            f"or lower tap_threshold"
        )
    if method == "auto":
        method = "roots" if taps.L <= _ROOTS_MAX_L else "spectral"
    if method == "roots":
        return _factorize_roots(taps)
    if method == "spectral":
        return _factorize_spectral(taps)
    raise ValueError(f"unknown factorization method {method!r}")


def minimum_phase_winding(v: np.ndarray, n_fft: int = 1 << 20) -> int:
    """Number of zeros of V(z) = sum v[n] z^-n outside the unit circle.

    Computed as minus the winding number of V(e^{jw}) around the origin,
    which is an exact integer as long as |V| stays bounded away from zero
    on the circle.  Zero means minimum phase.
    """
    v = np.asarray(v, dtype=float)
    spectrum = np.fft.fft(v, n_fft)
    phase = np.unwrap(np.angle(spectrum))
    return -int(np.round((phase[-1] + (phase[-1] - phase[-2]) - phase[0]) / (2 * np.pi)))


def build_isi_matrix(source, N: int, tau: float, Es: float, domain: str) -> IsiMatrix:
    """Build the N x N block ISI matrix in the requested domain.

    Convolution domain needs ``WhitenedTaps`` (entry (i,j) = amp*v[i-j]);
    gram domain needs ``IsiTaps`` (entry (i,j) = amp^2*g[|i-j|]), with
    amp = sqrt(tau*Es).  Matrices are plain finite-N truncations; there is
    no cyclic extension.
    """
    if N < 1:
        raise ValueError(f"block length N must be >= 1, got {N}")
    amp = float(np.sqrt(tau * Es))
    idx = np.arange(N)
    lag = idx[:, None] - idx[None, :]
    if domain == "convolution":
        if not isinstance(source, WhitenedTaps):
            raise TypeError("convolution domain requires WhitenedTaps")
        v = source.v
        L = len(v)
        entries = np.zeros((N, N))
        mask = (lag >= 0) & (lag < L)
        entries[mask] = amp * v[lag[mask]]
    elif domain == "gram":
        if not isinstance(source, IsiTaps):
            raise TypeError("gram domain requires IsiTaps")
        g_one = source.one_sided
        L = source.L
        entries = np.zeros((N, N))
        mask = np.abs(lag) < L
        entries[mask] = amp * amp * g_one[np.abs(lag[mask])]
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return IsiMatrix(entries=entries, domain=domain, amp=amp, N=N, L=L)


@lru_cache(maxsize=64)
def _whiten_cached(beta: float, tau: float, tap_threshold: float,
                   max_half_span: int, residual_target: float,
                   span_cap: int) -> tuple[IsiTaps, WhitenedTaps]:
    threshold = tap_threshold
    span = max_half_span
    last_note = ""
    while True:
        config = PulseConfig(beta=beta, tap_threshold=threshold, max_half_span=span)
        taps = isi_taps(config, tau)
        smin = float(_sampled_spectrum(taps.one_sided).min())
        # The reconstruction error cannot beat the spectral negativity of
        # the truncated sequence, so skip spans that are hopeless.
        if smin >= -20.0 * residual_target:
            try:
                whitened = spectral_factorize(taps, spectrum_tol=max(1e-4, _SPECTRUM_TOL))
                if whitened.residual > residual_target:
                    last_note = (f"residual {whitened.residual:.3e} above target "
                                 f"at span {span}")
                elif whitened.L > _ROOTS_MAX_L and minimum_phase_winding(whitened.v):
                    # Truncating the spectral factor can push a zero pair
                    # marginally outside the circle; a longer factor fixes it.
                    last_note = f"truncated factor not minimum phase at span {span}"
                else:
                    return taps, whitened
            except FactorizationError as exc:
                last_note = str(exc)
        else:
            last_note = f"spectrum min {smin:.3e} at span {span}"
        if span >= span_cap:
            raise FactorizationError(
                f"could not reach residual target {residual_target:.1e} for "
                f"beta={beta}, tau={tau} within span cap {span_cap}: {last_note}"
            )
        span = min(2 * span, span_cap)
        threshold = max(threshold / 100.0, 1e-15)


def whiten_model(beta: float, tau: float, *, residual_target: float = 1e-6,
                 config: PulseConfig | None = None,
                 span_cap: int = 1280) -> tuple[IsiTaps, WhitenedTaps]:
    """Taps plus minimum-phase factor meeting a reconstruction target.

    Starting from ``config`` (default ``PulseConfig()``), the tap span is
    grown and the threshold lowered until the factorization residual meets
    ``residual_target``.  Time-packing values below 1/(1+beta) fold the
    pulse spectrum with genuine zero bands, so those are the cases that
    need the growth.  Results are cached per parameter set.
    """
    if config is None:
        config = PulseConfig(beta=beta)
    return _whiten_cached(beta, tau, config.tap_threshold, config.max_half_span,
                          residual_target, span_cap)
