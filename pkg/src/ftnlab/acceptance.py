"""Validation criteria for the whole lab, runnable via the CLI or pytest.

Each criterion returns a ``CriterionResult`` with one pass/fail verdict
and a printable summary.  Reference margin tables for the beta = 0.3
operating region are frozen here as the validation targets; Monte Carlo
criteria run on fixed seeds, so verdicts are reproducible bit for bit.

Known honest failures (kept red deliberately, see the repository README):
the linear-margin reference row is reproduced only by taps sampled one
tau grid step tighter, and one Gaussian reference cell plus one low-SNR
dominance point are not reproducible from the stated constructions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import erfc

from .detect import mlse_bruteforce_batch, pda_detect, pda_detect_batch
from .isi import IsiMatrix, build_isi_matrix, minimum_phase_winding, whiten_model
from .separability import margin_report
from .sim import ChannelConfig, _block_rng, _point_key, ber_sweep, simulate_block

__all__ = ["CriterionResult", "CRITERIA", "run_criteria"]

BETA = 0.3

# Reference operating-region tables used as validation targets
# (delta_max, delta_ave) per tau and (gauss_max, gauss_ave) per (snr, tau).
REF_LINEAR = {0.6: (0.97, 0.11), 0.7: (0.97, 0.20),
              0.8: (0.97, 0.38), 0.9: (0.97, 0.53)}
REF_GAUSSIAN = {
    0: {0.6: (0.00, 0.00), 0.7: (1.16, 0.49), 0.8: (1.08, 0.58), 0.9: (1.02, 0.73)},
    2: {0.6: (2.01, 0.68), 0.7: (1.84, 0.82), 0.8: (1.71, 0.96), 0.9: (1.62, 1.21)},
    4: {0.6: (3.19, 1.12), 0.7: (2.92, 1.35), 0.8: (2.71, 1.57), 0.9: (2.56, 2.00)},
    6: {0.6: (5.06, 1.73), 0.7: (4.62, 2.16), 0.8: (4.29, 2.55), 0.9: (4.06, 3.30)},
    8: {0.6: (8.02, 2.71), 0.7: (7.32, 3.45), 0.8: (6.80, 4.13), 0.9: (6.43, 5.42)},
}
TAU_GRID = (0.6, 0.7, 0.8, 0.9)
SNR_GRID = (0, 2, 4, 6, 8)

LINEAR_TOL = 0.05
GAUSSIAN_TOL = 0.10


@dataclass
class CriterionResult:
    criterion: str
    passed: bool
    details: str
    metrics: dict = field(default_factory=dict)


def _margin_reports():
    return {rep.tau: rep
            for rep in margin_report(BETA, TAU_GRID, SNR_GRID, N=100)}


def criterion_linear_margin_table() -> CriterionResult:
    reports = _margin_reports()
    failures = []
    values = {}
    for tau in TAU_GRID:
        dmax, dave = reports[tau].table_linear()
        values[tau] = (round(dmax, 3), round(dave, 3))
        ref_max, ref_ave = REF_LINEAR[tau]
        if abs(dmax - ref_max) > LINEAR_TOL:
            failures.append(f"tau={tau} max {dmax:.3f} vs {ref_max}")
        if abs(dave - ref_ave) > LINEAR_TOL:
            failures.append(f"tau={tau} ave {dave:.3f} vs {ref_ave}")
    aves = [reports[tau].table_linear()[1] for tau in TAU_GRID]
    monotone = all(b > a for a, b in zip(aves, aves[1:]))
    if not monotone:
        failures.append("delta_ave not strictly increasing in tau")
    detail = (f"computed {values}; monotone={monotone}"
              + (f"; out of tolerance: {failures}" if failures else ""))
    return CriterionResult("linear_margin_table", not failures, detail,
                           {"values": values, "monotone": monotone})


def criterion_gaussian_margin_table() -> CriterionResult:
    reports = _margin_reports()
    failures = []
    grid = {}
    for i, snr in enumerate(SNR_GRID):
        for tau in TAU_GRID:
            gmax, gave = reports[tau].table_gaussian(i)
            grid[(snr, tau)] = (round(gmax, 3), round(gave, 3))
            ref_max, ref_ave = REF_GAUSSIAN[snr][tau]
            if abs(gmax - ref_max) > GAUSSIAN_TOL or abs(gave - ref_ave) > GAUSSIAN_TOL:
                failures.append(
                    f"(snr={snr},tau={tau}) ({gmax:.2f},{gave:.2f}) "
                    f"vs ({ref_max},{ref_ave})")
    monotone = True
    for tau in TAU_GRID:
        for agg in (0, 1):
            seq = [grid[(snr, tau)][agg] for snr in SNR_GRID]
            if not all(b > a for a, b in zip(seq, seq[1:])):
                monotone = False
                failures.append(f"tau={tau} aggregate {agg} not SNR-monotone")
    matched = 2 * len(SNR_GRID) * len(TAU_GRID) - len(
        [f for f in failures if f.startswith("(")])
    detail = (f"{matched}/{2 * len(SNR_GRID) * len(TAU_GRID)} entries within "
              f"{GAUSSIAN_TOL}; SNR-monotone={monotone}"
              + (f"; failures: {failures}" if failures else ""))
    return CriterionResult("gaussian_margin_table", not failures, detail,
                           {"grid": {str(k): v for k, v in grid.items()},
                            "monotone": monotone})


def criterion_gaussian_dominance() -> CriterionResult:
    reports = _margin_reports()
    violations = []
    for i, snr in enumerate(SNR_GRID):
        for tau in TAU_GRID:
            if REF_GAUSSIAN[snr][tau] == (0.00, 0.00):
                continue
            dmax, dave = reports[tau].table_linear()
            gmax, gave = reports[tau].table_gaussian(i)
            if gmax < dmax:
                violations.append(f"(snr={snr},tau={tau}) max {gmax:.3f}<{dmax:.3f}")
            if gave < dave:
                violations.append(f"(snr={snr},tau={tau}) ave {gave:.3f}<{dave:.3f}")
    detail = ("dominance holds at every nonzero reference point" if not violations
              else f"violations: {violations}")
    return CriterionResult("gaussian_dominance", not violations, detail,
                           {"violations": violations})


def _q_function(x: np.ndarray) -> np.ndarray:
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def criterion_nyquist_ber() -> CriterionResult:
    ebn0_grid = [0.0, 2.0, 4.0, 6.0, 8.0]
    N = 16
    blocks = int(np.ceil(1_000_000 / N))
    points = ber_sweep(BETA, 1.0, N, ebn0_grid,
                       ["pda", "modified_pda", "successive"],
                       seed=20240, min_errors=10 ** 12, max_blocks=blocks)
    failures = []
    worst = 0.0
    for p in points:
        ratio = 10 ** (p.ebn0_db / 10.0)
        expected = float(_q_function(np.sqrt(2.0 * ratio)))
        se = np.sqrt(expected * (1.0 - expected) / p.bits)
        dev = abs(p.ber - expected) / se
        worst = max(worst, dev)
        if dev > 3.0 or p.bits < 1_000_000:
            failures.append(f"{p.detector}@{p.ebn0_db:.0f}dB dev={dev:.2f}se "
                            f"bits={p.bits}")
    detail = f"worst deviation {worst:.2f} binomial SE over {len(points)} points"
    if failures:
        detail += f"; failures: {failures}"
    return CriterionResult("nyquist_analytic_ber", not failures, detail,
                           {"worst_se": worst})


def _horizontal_shift_db(snrs, ber_from, ber_to) -> float:
    """Largest rightward displacement of curve ``from`` relative to ``to``.

    For each point of ``from``, finds the Eb/N0 at which ``to`` already
    reaches the same BER by log-linear interpolation (clamped to the grid
    ends) and returns the maximum of (own Eb/N0 minus that equivalent),
    i.e. how much extra SNR the ``from`` curve needs at worst.
    """
    snrs = np.asarray(snrs, dtype=float)
    log_to = np.log10(np.maximum(ber_to, 1e-300))
    shifts = []
    for snr, ber in zip(snrs, ber_from):
        equivalent = np.interp(-np.log10(max(ber, 1e-300)), -log_to, snrs)
        shifts.append(snr - equivalent)
    return float(np.max(shifts))


def criterion_mlse_oracle() -> CriterionResult:
    N = 12
    agreement_blocks = 4000
    failures = []
    metrics = {}
    for tau in (0.7, 0.8):
        _, whitened = whiten_model(BETA, tau)
        G = build_isi_matrix(whitened, N, tau, 1.0, "convolution")
        config = ChannelConfig(ebn0_db=8.0, tau=tau, beta=BETA, N=N, seed=11)
        A = np.empty((agreement_blocks, N))
        Y = np.empty((agreement_blocks, N))
        key = _point_key(8.0)
        for i in range(agreement_blocks):
            A[i], Y[i] = simulate_block(config, G, _block_rng(11, key, i))
        hard_pda = pda_detect_batch(Y, G, config.sigma2, sweeps=8).hard
        hard_mlse = mlse_bruteforce_batch(Y, G)
        agreement = float(np.mean(np.all(hard_pda == hard_mlse, axis=1)))
        metrics[f"agreement_tau{tau}"] = agreement
        if agreement < 0.99:
            failures.append(f"tau={tau} agreement {agreement:.4f} < 0.99")

        snr_grid = [4.0, 5.0, 6.0, 7.0, 8.0]
        # BERs at tau=0.7 are high enough to afford a tight error floor; the
        # shift there is near the 0.5 dB line and should not be noise-decided.
        floor = 1500 if tau == 0.7 else 400
        points = ber_sweep(BETA, tau, N, snr_grid, ["pda", "mlse", "successive"],
                           seed=5, min_errors=floor, max_blocks=100_000)
        by = {}
        for p in points:
            by.setdefault(p.detector, {})[p.ebn0_db] = p
        pda_ber = np.array([by["pda"][s].ber for s in snr_grid])
        mlse_ber = np.array([by["mlse"][s].ber for s in snr_grid])
        succ_err = [by["successive"][s].bit_errors for s in snr_grid]
        pda_err = [by["pda"][s].bit_errors for s in snr_grid]
        shift = _horizontal_shift_db(snr_grid, pda_ber, mlse_ber)
        metrics[f"shift_db_tau{tau}"] = shift
        if shift > 0.5:
            failures.append(f"tau={tau} PDA is {shift:.2f}dB right of MLSE")
        ordering = all(pe <= se for pe, se in zip(pda_err, succ_err))
        metrics[f"pda_le_successive_tau{tau}"] = ordering
        if not ordering:
            failures.append(f"tau={tau} PDA not uniformly at or below baseline")
        if tau == 0.7:
            ratio = by["successive"][8.0].ber / max(by["pda"][8.0].ber, 1e-300)
            metrics["collapse_ratio"] = ratio
            if ratio < 5.0:
                failures.append(f"baseline/PDA ratio {ratio:.1f} < 5 at 8dB")
    detail = "; ".join(f"{k}={v if not isinstance(v, float) else round(v, 4)}"
                       for k, v in metrics.items())
    if failures:
        detail += f"; failures: {failures}"
    return CriterionResult("mlse_oracle_equivalence", not failures, detail, metrics)


def criterion_confidence_freeze() -> CriterionResult:
    points = ber_sweep(BETA, 0.8, 64, [6.0, 8.0], ["pda", "modified_pda"],
                       seed=9, min_errors=400, max_blocks=60_000, epsilon=0.4)
    by = {}
    for p in points:
        by.setdefault(p.ebn0_db, {})[p.detector] = p
    failures = []
    metrics = {}
    for snr, pair in sorted(by.items()):
        plain, frozen = pair["pda"], pair["modified_pda"]
        savings = 1.0 - frozen.update_count_mean / plain.update_count_mean
        ratio = frozen.ber / plain.ber if plain.ber else float("inf")
        metrics[f"savings_{snr:.0f}dB"] = round(savings, 4)
        metrics[f"ber_ratio_{snr:.0f}dB"] = round(ratio, 3)
        if savings < 0.20:
            failures.append(f"@{snr}dB savings {savings:.1%} < 20%")
        if ratio > 2.0:
            failures.append(f"@{snr}dB BER ratio {ratio:.2f} > 2")
    detail = "; ".join(f"{k}={v}" for k, v in metrics.items())
    if failures:
        detail += f"; failures: {failures}"
    return CriterionResult("confidence_freeze_savings", not failures, detail, metrics)


def criterion_factorization_quality() -> CriterionResult:
    failures = []
    metrics = {}
    for tau in (0.6, 0.7, 0.8, 0.9, 1.0):
        taps, whitened = whiten_model(BETA, tau)
        metrics[f"residual_tau{tau}"] = whitened.residual
        if whitened.residual >= 1e-6:
            failures.append(f"tau={tau} residual {whitened.residual:.2e}")
        if whitened.L <= 128:
            roots = np.roots(whitened.v) if whitened.L > 1 else np.array([0.0])
            max_root = float(np.max(np.abs(roots))) if roots.size else 0.0
            metrics[f"max_root_tau{tau}"] = max_root
            if max_root > 1.0 + 1e-8:
                failures.append(f"tau={tau} max root {max_root:.10f}")
        else:
            # Root extraction is meaningless at polynomial degrees in the
            # thousands; the winding number of the transfer function counts
            # zeros outside the circle exactly.
            outside = minimum_phase_winding(whitened.v)
            metrics[f"zeros_outside_tau{tau}"] = outside
            if outside != 0:
                failures.append(f"tau={tau} has {outside} zeros outside the circle")
    detail = "; ".join(
        f"{k}={v:.2e}" if "residual" in k else f"{k}={v}"
        for k, v in metrics.items())
    if failures:
        detail += f"; failures: {failures}"
    return CriterionResult("factorization_quality", not failures, detail, metrics)


def _exact_binary_posterior(y, mu, C, g) -> float:
    """Posterior of a +-1 symbol by direct two-hypothesis normalization.

    Evaluates the two Gaussian densities N(y; mu + g, C) and N(y; mu - g, C)
    through their quadratic forms and normalizes, avoiding the logistic
    shortcut entirely.
    """
    factor = cho_factor(C)
    d_plus = y - mu - g
    d_minus = y - mu + g
    e_plus = -0.5 * d_plus @ cho_solve(factor, d_plus)
    e_minus = -0.5 * d_minus @ cho_solve(factor, d_minus)
    top = max(e_plus, e_minus)
    w_plus = np.exp(e_plus - top)
    w_minus = np.exp(e_minus - top)
    return float(w_plus / (w_plus + w_minus))


def criterion_posterior_exactness() -> CriterionResult:
    rng = np.random.default_rng(314159)
    worst = 0.0
    trials = 1000
    for _ in range(trials):
        entries = rng.standard_normal((2, 2))
        G = IsiMatrix(entries=entries, domain="convolution", amp=1.0, N=2, L=2)
        sigma2 = float(rng.uniform(0.05, 2.0))
        prior = float(rng.uniform(0.0, 1.0))
        k = int(rng.integers(0, 2))
        j = 1 - k
        y = rng.standard_normal(2) * 2.0

        from .detect import PdaState, pda_posterior_update

        state = PdaState(p_a=np.array([0.5, 0.5]), F={0, 1}, U={0, 1})
        state.p_a[j] = prior
        posterior, _ = pda_posterior_update(state, k, y, G, sigma2)

        g_j = entries[:, j]
        g_k = entries[:, k]
        mu = (2.0 * prior - 1.0) * g_j
        var_j = 4.0 * prior * (1.0 - prior)
        C = var_j * np.outer(g_j, g_j) + sigma2 * np.eye(2)
        exact = _exact_binary_posterior(y, mu, C, g_k)
        worst = max(worst, abs(posterior - exact))
    passed = worst < 1e-10
    detail = f"worst |posterior - enumeration| = {worst:.2e} over {trials} instances"
    return CriterionResult("posterior_exactness", passed, detail,
                           {"worst_abs_error": worst})


def criterion_runtime_scaling() -> CriterionResult:
    sizes = [32, 64, 128, 256]
    _, whitened = whiten_model(BETA, 0.8)
    timings = []
    for N in sizes:
        G = build_isi_matrix(whitened, N, 0.8, 1.0, "convolution")
        rng = np.random.default_rng(N)
        a = 2.0 * rng.integers(0, 2, N) - 1.0
        y = G.entries @ a + 0.3 * rng.standard_normal(N)
        reps = []
        for _ in range(3):
            start = time.perf_counter()
            pda_detect(y, G, 0.25, sweeps=8)
            reps.append(time.perf_counter() - start)
        timings.append(float(np.median(reps)))
    slope = float(np.polyfit(np.log(sizes), np.log(timings), 1)[0])
    passed = slope <= 4.5
    detail = ("log-log runtime slope "
              f"{slope:.2f} over N={sizes} (times {['%.3fs' % t for t in timings]})")
    return CriterionResult("runtime_scaling", passed, detail, {"slope": slope})


CRITERIA = {
    "1": criterion_linear_margin_table,
    "2": criterion_gaussian_margin_table,
    "3": criterion_gaussian_dominance,
    "4": criterion_nyquist_ber,
    "5": criterion_mlse_oracle,
    "6": criterion_confidence_freeze,
    "7": criterion_factorization_quality,
    "8": criterion_posterior_exactness,
    "9": criterion_runtime_scaling,
}


def run_criteria(only=None):
    """Yield CriterionResult for the selected criteria (all by default).

    ``only`` accepts criterion numbers ("1".."9") or names.
    """
    by_name = {
        "linear_margin_table": "1",
        "gaussian_margin_table": "2",
        "gaussian_dominance": "3",
        "nyquist_analytic_ber": "4",
        "mlse_oracle_equivalence": "5",
        "confidence_freeze_savings": "6",
        "factorization_quality": "7",
        "posterior_exactness": "8",
        "runtime_scaling": "9",
    }
    if only:
        keys = []
        for item in only:
            item = str(item).strip()
            if item in CRITERIA:
                keys.append(item)
            elif item in by_name:
                keys.append(by_name[item])
            else:
                raise ValueError(f"unknown criterion {item!r}")
    else:
        keys = list(CRITERIA)
    for key in keys:
        yield CRITERIA[key]()
