"""Seeded Monte Carlo estimation of outage and DPSK BER.

Trials are partitioned into fixed 32768-trial batches; batch i draws from
a Philox stream keyed by (seed, i), so estimates are bit-identical for any
worker count. Per batch the draw order is: user RF SNRs, first-hop FSO,
then (FSO, RF) per later hop. Reduction is exact integer counting for
outage and ordered compensated summation for BER.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channels import sample_snr
from .system import SystemConfig

__all__ = ["McEstimate", "simulate_pout", "simulate_ber",
           "simulate_e2e_samples", "BATCH"]

BATCH = 32768

COMBINERS = ("matched", "exact")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    trials: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError("mean must be a probability")
        if not self.stderr >= 0.0:
            raise ValueError("stderr must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be positive")


def _with_sweep_snr(cfg: SystemConfig, avg_snr_db):
    lin = 10.0 ** (float(avg_snr_db) / 10.0)
    return replace(cfg, mean_snr_fso=lin, mean_snr_rf=lin)


def _check_args(trials, combiner, threads):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if combiner not in COMBINERS:
        raise ValueError(f"combiner must be one of {COMBINERS}")
    if threads < 1:
        raise ValueError("threads must be >= 1")


def _batch_sizes(trials):
    full, rem = divmod(trials, BATCH)
    return [BATCH] * full + ([rem] if rem else [])


def _batch_e2e(cfg: SystemConfig, seed, index, n, combiner):
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence((seed, index)))
    )
    g1 = sample_snr("rayleigh", cfg.mean_snr_rf, rng,
                    size=(cfg.n_users, n)).max(axis=0)
    g2 = sample_snr(cfg.fso_turbulence, cfg.mean_snr_fso, rng, size=n)
    if cfg.csi_mode == "Unknown":
        e2e = g1 * g2 / (cfg.gain_c + g2)
    elif combiner == "exact":
        e2e = g1 * g2 / (g1 + g2 + 1.0)
    else:
        e2e = np.minimum(g1, g2)
    for _ in range(cfg.n_relays - 1):
        fso = sample_snr(cfg.fso_turbulence, cfg.mean_snr_fso, rng, size=n)
        rf = sample_snr("rayleigh", cfg.mean_snr_rf, rng, size=n)
        e2e = np.minimum(e2e, np.maximum(fso, rf))
    return e2e


def _run_batches(cfg, seed, sizes, combiner, threads, batch_stat):
    def job(args):
        i, n = args
        return batch_stat(_batch_e2e(cfg, seed, i, n, combiner))

    tasks = list(enumerate(sizes))
    if threads == 1:
        return [job(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, tasks))


def simulate_pout(cfg: SystemConfig, avg_snr_db, trials, seed, *,
                  threads=1, combiner="matched"):
    """Outage probability estimate: fraction of trials with e2e SNR below
    cfg.gamma_th, at equal FSO/RF mean SNR set by avg_snr_db."""
    _check_args(trials, combiner, threads)
    run_cfg = _with_sweep_snr(cfg, avg_snr_db)
    gth = run_cfg.gamma_th
    counts = _run_batches(run_cfg, seed, _batch_sizes(trials), combiner,
                          threads, lambda e2e: int(np.count_nonzero(e2e < gth)))
    mean = sum(counts) / trials
    stderr = math.sqrt(mean * (1.0 - mean) / trials)
    return McEstimate(mean=mean, stderr=stderr, trials=trials, seed=seed)


def simulate_ber(cfg: SystemConfig, avg_snr_db, trials, seed, *,
                 threads=1, combiner="matched"):
    """DPSK BER estimate via the conditional error rate e^{-gamma}/2
    averaged over end-to-end SNR draws."""
    _check_args(trials, combiner, threads)
    run_cfg = _with_sweep_snr(cfg, avg_snr_db)

    def stat(e2e):
        x = 0.5 * np.exp(-e2e)
        return float(np.sum(x)), float(np.sum(x * x))

    parts = _run_batches(run_cfg, seed, _batch_sizes(trials), combiner,
                         threads, stat)
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    mean = total / trials
    if trials > 1:
        var = max(0.0, (total_sq - trials * mean * mean) / (trials - 1))
        stderr = math.sqrt(var / trials)
    else:
        stderr = 0.0
    return McEstimate(mean=mean, stderr=stderr, trials=trials, seed=seed)


def simulate_e2e_samples(cfg: SystemConfig, avg_snr_db, trials, seed,
                         combiner="matched"):
    """The raw end-to-end SNR draws behind the estimators, in trial order."""
    _check_args(trials, combiner, 1)
    run_cfg = _with_sweep_snr(cfg, avg_snr_db)
    parts = [
        _batch_e2e(run_cfg, seed, i, n, combiner)
        for i, n in enumerate(_batch_sizes(trials))
    ]
    return np.concatenate(parts)
