"""BPSK source, whitened AWGN channel, and the Monte Carlo BER harness.

Blocks are independent trials driven by per-block random substreams
derived from (seed, Eb/N0 point, block index), so runs are reproducible
bit for bit and different detectors can be compared on identical noise
realizations.  Accumulators merge associatively, which keeps results
independent of worker scheduling.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .detect import (
    mlse_bruteforce_batch,
    pda_detect_batch,
    successive_baseline_batch,
)
from .isi import IsiMatrix, build_isi_matrix, whiten_model

__all__ = [
    "DETECTORS",
    "ChannelConfig",
    "BerPoint",
    "ebn0_to_sigma2",
    "simulate_block",
    "ber_sweep",
    "spectral_efficiency",
]

DETECTORS = ("pda", "modified_pda", "successive", "mlse")

# Blocks are generated and detected in chunks; the stop rule is evaluated
# at chunk boundaries, so the chunk size is a fixed function of the block
# length and belongs to the reproducibility contract.
def _chunk_blocks(N: int) -> int:
    return int(min(8192, max(128, (1 << 22) // (N * N))))


@dataclass(frozen=True)
class ChannelConfig:
    """Operating point of one Monte Carlo stream."""

    ebn0_db: float
    tau: float
    beta: float
    N: int
    seed: int = 0
    Es: float = 1.0
    eb_policy: str = "tau_es"

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError(f"block length N must be >= 1, got {self.N}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.Es <= 0:
            raise ValueError(f"Es must be positive, got {self.Es}")
        if self.eb_policy not in ("tau_es", "es"):
            raise ValueError(f"unknown eb_policy {self.eb_policy!r}")

    @property
    def sigma2(self) -> float:
        return ebn0_to_sigma2(self.ebn0_db, self.tau, self.Es, policy=self.eb_policy)


@dataclass
class BerPoint:
    """Accumulated error statistics of one (detector, Eb/N0) point."""

    detector: str
    ebn0_db: float
    bit_errors: int = 0
    bits: int = 0
    blocks: int = 0
    update_count_total: int = 0
    wall_time: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def ci95(self) -> float:
        """Half-width of the normal-approximation 95% binomial interval."""
        if not self.bits:
            return 0.0
        p = self.ber
        return 1.96 * np.sqrt(p * (1.0 - p) / self.bits)

    @property
    def update_count_mean(self) -> float:
        return self.update_count_total / self.blocks if self.blocks else 0.0

    def merge(self, other: "BerPoint") -> None:
        self.bit_errors += other.bit_errors
        self.bits += other.bits
        self.blocks += other.blocks
        self.update_count_total += other.update_count_total
        self.wall_time += other.wall_time


def ebn0_to_sigma2(ebn0_db: float, tau: float, Es: float = 1.0, *,
                   policy: str = "tau_es") -> float:
    """Noise variance per whitened sample for a target Eb/N0.

    Under the default power-preserving convention the energy per bit is
    Eb = tau*Es (one bit per symbol at amplitude sqrt(tau*Es)); the
    alternative ``policy="es"`` uses Eb = Es.  The whitened noise variance
    is then sigma2 = N0/2 with N0 = Eb / 10^(ebn0_db/10).
    """
    if Es <= 0:
        raise ValueError(f"Es must be positive, got {Es}")
    if policy == "tau_es":
        eb = tau * Es
    elif policy == "es":
        eb = Es
    else:
        raise ValueError(f"unknown Eb policy {policy!r}")
    n0 = eb / 10.0 ** (ebn0_db / 10.0)
    return n0 / 2.0


def _block_rng(seed: int, point_key: int, block_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, point_key, block_index)))


def _point_key(ebn0_db: float) -> int:
    # Millidecibel offset keeps the entropy word nonnegative.
    return int(round(ebn0_db * 1000)) + (1 << 20)


def simulate_block(config: ChannelConfig, G: IsiMatrix,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw one uniform +-1 block and its noisy whitened observation."""
    if G.domain != "convolution" or G.N != config.N:
        raise ValueError("simulation needs a convolution-domain matrix of matching N")
    a = 2.0 * rng.integers(0, 2, size=config.N) - 1.0
    noise = rng.standard_normal(config.N) * np.sqrt(config.sigma2)
    return a, G.entries @ a + noise


def _simulate_chunk(config: ChannelConfig, G: IsiMatrix,
                    start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    key = _point_key(config.ebn0_db)
    A = np.empty((count, config.N))
    Y = np.empty((count, config.N))
    for i in range(count):
        rng = _block_rng(config.seed, key, start + i)
        A[i], Y[i] = simulate_block(config, G, rng)
    return A, Y


def _detect_chunk(name: str, Y: np.ndarray, G: IsiMatrix, sigma2: float, *,
                  sweeps: int, epsilon: float,
                  mlse_max_n: int) -> tuple[np.ndarray, np.ndarray | None, int]:
    """Hard decisions, per-block LLRs (soft detectors only), update total."""
    B, N = Y.shape
    if name == "pda":
        res = pda_detect_batch(Y, G, sigma2, sweeps=sweeps)
        return res.hard, res.llr, res.update_count
    if name == "modified_pda":
        res = pda_detect_batch(Y, G, sigma2, sweeps=sweeps, epsilon=epsilon)
        return res.hard, res.llr, res.update_count
    if name == "successive":
        return successive_baseline_batch(Y, G), None, B * N
    if name == "mlse":
        return mlse_bruteforce_batch(Y, G, sigma2, max_n=mlse_max_n), None, 0
    raise ValueError(f"unknown detector {name!r}")


def _run_chunk(args):
    (config, G, start, count, detectors, sweeps, epsilon, mlse_max_n,
     llr_sink) = args
    A, Y = _simulate_chunk(config, G, start, count)
    sigma2 = config.sigma2
    out = {}
    llr_rows = [] if llr_sink else None
    for name in detectors:
        t0 = time.perf_counter()
        hard, llr, updates = _detect_chunk(name, Y, G, sigma2, sweeps=sweeps,
                                           epsilon=epsilon, mlse_max_n=mlse_max_n)
        elapsed = time.perf_counter() - t0
        errors = int(np.sum(hard != A))
        out[name] = (errors, count * config.N, count, updates, elapsed)
        if llr_rows is not None and llr is not None:
            for i in range(count):
                llr_rows.append((name, config.ebn0_db, start + i, llr[i]))
    return start, out, llr_rows


def ber_sweep(beta: float, tau: float, N: int, ebn0_db_list, detectors, *,
              seed: int = 0, Es: float = 1.0, eb_policy: str = "tau_es",
              min_errors: int = 200, max_blocks: int = 50_000,
              sweeps: int = 8, epsilon: float = 0.4, mlse_max_n: int = 16,
              matrix: IsiMatrix | None = None, workers: int = 1,
              llr_collector=None) -> list[BerPoint]:
    """Monte Carlo BER sweep over an Eb/N0 grid, paired across detectors.

    Every detector sees the same blocks (same seed-derived substreams).
    Each point accumulates until every detector has at least
    ``min_errors`` bit errors or ``max_blocks`` blocks were simulated,
    evaluated at fixed chunk boundaries so results do not depend on the
    worker count.  Returns one ``BerPoint`` per (detector, Eb/N0) pair.

    ``llr_collector``, if given, is called with rows
    (detector, ebn0_db, block_index, llr_vector) for the soft detectors.
    """
    if isinstance(detectors, str):
        detectors = [detectors]
    for name in detectors:
        if name not in DETECTORS:
            raise ValueError(f"unknown detector {name!r}")
    if sweeps < 1:
        raise ValueError(f"sweep count must be >= 1, got {sweeps}")
    if not 0.0 <= epsilon < 0.5:
        raise ValueError(f"epsilon must be in [0, 1/2), got {epsilon}")

    if matrix is None:
        _, whitened = whiten_model(beta, tau)
        matrix = build_isi_matrix(whitened, N, tau, Es, "convolution")

    points: list[BerPoint] = []
    for ebn0 in ebn0_db_list:
        config = ChannelConfig(ebn0_db=float(ebn0), tau=tau, beta=beta, N=N,
                               seed=seed, Es=Es, eb_policy=eb_policy)
        acc = {name: BerPoint(detector=name, ebn0_db=float(ebn0))
               for name in detectors}
        chunk_size = _chunk_blocks(N)
        blocks_done = 0
        pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            while blocks_done < max_blocks:
                wave = []
                lanes = workers if pool else 1
                for _ in range(lanes):
                    if blocks_done >= max_blocks:
                        break
                    count = min(chunk_size, max_blocks - blocks_done)
                    wave.append((config, matrix, blocks_done, count, tuple(detectors),
                                 sweeps, epsilon, mlse_max_n,
                                 llr_collector is not None))
                    blocks_done += count
                results = pool.map(_run_chunk, wave) if pool else map(_run_chunk, wave)
                done = False
                for _, out, llr_rows in sorted(results, key=lambda r: r[0]):
                    if done:
                        break
                    for name in detectors:
                        errors, bits, count, updates, elapsed = out[name]
                        acc[name].merge(BerPoint(
                            detector=name, ebn0_db=float(ebn0),
                            bit_errors=errors, bits=bits, blocks=count,
                            update_count_total=updates, wall_time=elapsed))
                    if llr_collector is not None and llr_rows:
                        for row in llr_rows:
                            llr_collector(*row)
                    # Deterministic stop: the first chunk boundary at which
                    # every detector reached the error floor.
                    if all(acc[name].bit_errors >= min_errors for name in detectors):
                        done = True
                if done:
                    break
        finally:
            if pool:
                pool.shutdown()
        points.extend(acc[name] for name in detectors)
    return points


def spectral_efficiency(beta: float, tau: float, constellation_size: int = 2) -> float:
    """Bits per second per hertz: log2(M) / ((1 + beta) * tau)."""
    if constellation_size < 2:
        raise ValueError(f"constellation size must be >= 2, got {constellation_size}")
    return float(np.log2(constellation_size) / ((1.0 + beta) * tau))
