"""Block detectors: PDA, confidence-freezing PDA, successive baseline, MLSE.

The probabilistic data association detector treats the interfering
symbols of the current one as a Gaussian vector whose mean and covariance
are matched to the running posteriors.  Each sweep visits every active
symbol once, highest ordering metric D_k first, and recomputes the metric
after every posterior update.

The working covariance W = sum_j var[a_j] g_j g_j^T + sigma2*I is shared
by all per-symbol quantities: excluding symbol k is a rank-one downdate,
so solves against C_k = W - var_k g_k g_k^T reduce to solves against W.
The engine keeps W^-1 under rank-one corrections as posteriors move and
rebuilds it from scratch at every sweep boundary to pin down drift.  All
detectors are batched over blocks; the single-block entry points wrap a
batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .isi import IsiMatrix

__all__ = [
    "LLR_CLAMP",
    "MLSE_MAX_N",
    "PdaState",
    "DetectionResult",
    "init_pda_state",
    "pda_posterior_update",
    "pda_detect",
    "modified_pda_detect",
    "pda_detect_batch",
    "successive_baseline",
    "successive_baseline_batch",
    "mlse_bruteforce",
    "mlse_bruteforce_batch",
]

# Posterior log-likelihood ratios are saturated at this magnitude before
# exponentiation; probabilities are already exactly 0/1 in float64 there.
LLR_CLAMP = 500.0
# Exhaustive search enumerates 2^N sequences; default block-length cap.
MLSE_MAX_N = 16

_TINY = 1e-300


def _hard_decisions(posteriors: np.ndarray) -> np.ndarray:
    """Map posteriors to +-1, deciding +1 on the P = 1/2 tie."""
    return np.where(posteriors >= 0.5, 1.0, -1.0)


@dataclass
class DetectionResult:
    """Hard decisions plus the soft information that produced them."""

    hard: np.ndarray
    posteriors: np.ndarray
    llr: np.ndarray
    update_count: int
    sweeps: int
    first_sweep_order: np.ndarray


@dataclass
class PdaState:
    """Reference (single-block) PDA state, assembled from scratch on demand.

    ``cov`` always holds the full working covariance for the current
    posteriors; ``D`` holds the ordering metric of the symbols still in
    the per-sweep working set ``U``.  ``C_conf`` collects symbols frozen
    by the confidence region of the modified algorithm.
    """

    p_a: np.ndarray
    F: set = field(default_factory=set)
    U: set = field(default_factory=set)
    C_conf: set = field(default_factory=set)
    D: np.ndarray | None = None
    cov: np.ndarray | None = None
    update_count: int = 0


def _assemble_cov(p_a: np.ndarray, entries: np.ndarray, sigma2: float) -> np.ndarray:
    variances = 4.0 * p_a * (1.0 - p_a)
    return (entries * variances) @ entries.T + sigma2 * np.eye(len(p_a))


def init_pda_state(G: IsiMatrix, sigma2: float) -> PdaState:
    """Uniform-prior state: P_a(k) = 1/2 everywhere, metrics from scratch."""
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    N = G.N
    p_a = np.full(N, 0.5)
    state = PdaState(p_a=p_a, F=set(range(N)), U=set(range(N)))
    state.cov = _assemble_cov(p_a, G.entries, sigma2)
    state.D = _metrics_from_scratch(state, G.entries)
    return state


def _metrics_from_scratch(state: PdaState, entries: np.ndarray) -> np.ndarray:
    variances = 4.0 * state.p_a * (1.0 - state.p_a)
    D = np.empty(len(state.p_a))
    for k in range(len(state.p_a)):
        g_k = entries[:, k]
        C_k = state.cov - variances[k] * np.outer(g_k, g_k)
        D[k] = g_k @ cho_solve(cho_factor(C_k), g_k)
    return D


def pda_posterior_update(state: PdaState, k: int, y: np.ndarray,
                         G: IsiMatrix, sigma2: float) -> float:
    """One posterior update of symbol k against the current state.

    mu_k is the interference mean G_k p_{a,k} built from the other
    symbols' mean estimates 2P_a(j)-1; C_k is their covariance plus the
    noise floor.  The new posterior is the symmetric binary Bayes value
    1/(1 + exp(-LLR)) with LLR = 2 (y - mu_k)^T C_k^-1 g_k, saturated at
    +-LLR_CLAMP.  Everything is assembled from scratch, which makes this
    the reference route for the incremental batch engine.
    """
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if k not in state.U:
        raise ValueError(f"symbol {k} is not in the working set")
    entries = G.entries
    means = 2.0 * state.p_a - 1.0
    variances = 4.0 * state.p_a * (1.0 - state.p_a)
    g_k = entries[:, k]
    mu_k = entries @ means - means[k] * g_k
    C_k = _assemble_cov(state.p_a, entries, sigma2) - variances[k] * np.outer(g_k, g_k)
    llr = 2.0 * (y - mu_k) @ cho_solve(cho_factor(C_k), g_k)
    llr = float(np.clip(llr, -LLR_CLAMP, LLR_CLAMP))
    state.p_a[k] = expit(llr)
    state.update_count += 1
    state.cov = _assemble_cov(state.p_a, entries, sigma2)
    state.D = _metrics_from_scratch(state, entries)
    return float(state.p_a[k]), llr


def pda_detect_batch(Y: np.ndarray, G: IsiMatrix, sigma2: float, sweeps: int = 8,
                     epsilon: float | None = None) -> DetectionResult:
    """Batched PDA over the rows of Y; see ``pda_detect`` for semantics.

    With ``epsilon`` set, symbols whose posterior lies within epsilon of
    0 or 1 before a sweep are snapped to that value, removed from the
    active set, and kept at zero variance from then on.
    """
    if sweeps < 1:
        raise ValueError(f"sweep count must be >= 1, got {sweeps}")
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if epsilon is not None and not 0.0 <= epsilon < 0.5:
        raise ValueError(f"epsilon must be in [0, 1/2), got {epsilon}")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if not np.all(np.isfinite(Y)):
        raise ValueError("observations must be finite")
    B, N = Y.shape
    entries = G.entries
    if N != G.N:
        raise ValueError(f"observation length {N} does not match G.N={G.N}")

    P = np.full((B, N), 0.5)
    llr = np.zeros((B, N))
    active = np.ones((B, N), dtype=bool)
    update_count = np.zeros(B, dtype=np.int64)
    first_order = np.full((B, N), -1, dtype=np.int32)
    rows = np.arange(B)
    noise_eye = sigma2 * np.eye(N)

    for sweep in range(sweeps):
        if epsilon is not None and epsilon > 0.0:
            near_one = (np.abs(P - 1.0) < epsilon) & active
            near_zero = (np.abs(P) < epsilon) & active
            P = np.where(near_one, 1.0, P)
            P = np.where(near_zero, 0.0, P)
            llr = np.where(near_one, LLR_CLAMP, llr)
            llr = np.where(near_zero, -LLR_CLAMP, llr)
            active &= ~(near_one | near_zero)

        m = 2.0 * P - 1.0
        v = 4.0 * P * (1.0 - P)
        # Sweep-boundary rebuild of the working covariance inverse and the
        # quadratics q_k = g_k^T W^-1 g_k; the inner loop maintains both
        # under rank-one corrections.
        scaled = entries[None, :, :] * np.sqrt(v)[:, None, :]
        W = scaled @ scaled.transpose(0, 2, 1) + noise_eye
        Winv = np.linalg.inv(W)
        q = np.einsum("bik,ik->bk", Winv @ entries, entries)
        r0 = Y - m @ entries.T

        steps = int(active.sum(axis=1).max()) if active.any() else 0
        U = active.copy()
        for _ in range(steps):
            D = np.where(U, q / np.maximum(1.0 - v * q, _TINY), -np.inf)
            k = np.argmax(D, axis=1)
            act = U[rows, k]
            g_k = entries[:, k].T
            z = np.einsum("bij,bj->bi", Winv, g_k)
            q_k = q[rows, k]
            v_k = v[rows, k]
            m_k = m[rows, k]
            denom = np.maximum(1.0 - v_k * q_k, _TINY)
            r_k = r0 + m_k[:, None] * g_k
            raw = 2.0 * np.einsum("bi,bi->b", r_k, z) / denom
            new_llr = np.clip(raw, -LLR_CLAMP, LLR_CLAMP)
            P_new = np.where(act, expit(new_llr), P[rows, k])

            delta_m = (2.0 * P_new - 1.0) - m_k
            delta_v = 4.0 * P_new * (1.0 - P_new) - v_k
            coef = delta_v / np.maximum(1.0 + delta_v * q_k, _TINY)
            Winv -= coef[:, None, None] * z[:, :, None] * z[:, None, :]
            t = z @ entries
            q -= coef[:, None] * t * t
            r0 -= delta_m[:, None] * g_k

            P[rows, k] = P_new
            m[rows, k] += delta_m
            v[rows, k] += delta_v
            llr[rows, k] = np.where(act, new_llr, llr[rows, k])
            if sweep == 0:
                first_order[act, update_count[act]] = k[act]
            U[rows, k] = False
            update_count += act

    return DetectionResult(
        hard=_hard_decisions(P),
        posteriors=P,
        llr=llr,
        update_count=int(update_count.sum()),
        sweeps=sweeps,
        first_sweep_order=first_order,
    )


def pda_detect(y: np.ndarray, G: IsiMatrix, sigma2: float,
               sweeps: int = 8) -> DetectionResult:
    """PDA detection of one block.

    Posteriors start at 1/2; each of the ``sweeps`` passes updates every
    symbol exactly once in dynamically recomputed argmax-D order (ties to
    the lowest index); hard decisions are the signs of 2 P_a - 1 with the
    exact tie decided as +1.
    """
    result = pda_detect_batch(np.asarray(y, dtype=float)[None, :], G, sigma2,
                              sweeps=sweeps)
    return DetectionResult(
        hard=result.hard[0],
        posteriors=result.posteriors[0],
        llr=result.llr[0],
        update_count=result.update_count,
        sweeps=result.sweeps,
        first_sweep_order=result.first_sweep_order[0],
    )


def modified_pda_detect(y: np.ndarray, G: IsiMatrix, sigma2: float,
                        sweeps: int = 8, epsilon: float = 0.4) -> DetectionResult:
    """PDA with confidence-region freezing of one block.

    Before each sweep, active symbols with |P_a(k) - d| < epsilon for
    d in {0, 1} are snapped to d and never updated again; they keep zero
    variance and a hard mean inside later covariances and interference
    means, so the update count records the savings.
    """
    if not 0.0 <= epsilon < 0.5:
        raise ValueError(f"epsilon must be in [0, 1/2), got {epsilon}")
    result = pda_detect_batch(np.asarray(y, dtype=float)[None, :], G, sigma2,
                              sweeps=sweeps, epsilon=epsilon)
    return DetectionResult(
        hard=result.hard[0],
        posteriors=result.posteriors[0],
        llr=result.llr[0],
        update_count=result.update_count,
        sweeps=result.sweeps,
        first_sweep_order=result.first_sweep_order[0],
    )


def successive_baseline_batch(Y: np.ndarray, G: IsiMatrix) -> np.ndarray:
    """Batched successive symbol-by-symbol detection; rows are blocks."""
    if G.domain != "convolution":
        raise ValueError("successive detection needs a convolution-domain matrix")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    B, N = Y.shape
    entries = G.entries
    hard = np.empty((B, N))
    for k in range(N):
        cancelled = Y[:, k] - hard[:, :k] @ entries[k, :k]
        hard[:, k] = np.where(cancelled >= 0.0, 1.0, -1.0)
    return hard


def successive_baseline(y: np.ndarray, G: IsiMatrix) -> np.ndarray:
    """Sign detection after cancelling the causal interference.

    a_hat[k] = sgn(y[k] - sum_{j<k} G[k,j] a_hat[j]); in the whitened
    model the causal history is the only interference, so a noise-free
    block is always reconstructed.
    """
    return successive_baseline_batch(np.asarray(y, dtype=float)[None, :], G)[0]


def _mlse_table(entries: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All candidate sequences (lexicographic, -1 before +1) and their images."""
    N = entries.shape[1]
    codes = np.arange(2 ** N, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(N - 1, -1, -1)[None, :]) & 1
    candidates = 2.0 * bits - 1.0
    images = candidates @ entries.T
    quad = np.einsum("ci,ci->c", images, images)
    return candidates, images, quad


def mlse_bruteforce_batch(Y: np.ndarray, G: IsiMatrix, sigma2: float | None = None,
                          max_n: int = MLSE_MAX_N) -> np.ndarray:
    """Exhaustive minimization of ||y - G a||^2 over a in {+-1}^N, batched."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    B, N = Y.shape
    if N > max_n:
        raise ValueError(f"N={N} exceeds the exhaustive-search cap {max_n}")
    candidates, images, quad = _mlse_table(G.entries)
    hard = np.empty((B, N))
    chunk = max(1, (1 << 22) // len(candidates))
    for start in range(0, B, chunk):
        block = Y[start:start + chunk]
        # ||y - Ga||^2 = ||y||^2 - 2 (Ga)^T y + ||Ga||^2; ||y||^2 is common.
        scores = quad[:, None] - 2.0 * images @ block.T
        best = np.argmin(scores, axis=0)
        hard[start:start + chunk] = candidates[best]
    return hard


def mlse_bruteforce(y: np.ndarray, G: IsiMatrix, sigma2: float | None = None,
                    max_n: int = MLSE_MAX_N) -> np.ndarray:
    """Exact maximum-likelihood block decision by enumeration.

    Equivalent to minimizing the quadratic form a^T (G^T G) a - 2 (G^T y)^T a;
    the noise level does not move the minimizer and is accepted only for
    interface symmetry with the soft detectors.  Ties break toward the
    lexicographically smallest sequence (-1 sorting before +1).
    """
    return mlse_bruteforce_batch(np.asarray(y, dtype=float)[None, :], G,
                                 sigma2, max_n=max_n)[0]
