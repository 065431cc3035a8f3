"""Cardinality estimation from a decrypted raw non-zero-bin count.

The raw count mixes three effects: hash collisions inside the bin
vector, the Binomial(n_noise_total, 1/2) privacy noise, and the union
cardinality itself. The point estimate subtracts the expected noise and
inverts the expected-occupancy curve; the interval comes from the exact
acceptance-region construction in the inference module.
"""

from __future__ import annotations

from dataclasses import replace

from ..inference import Estimate, psc_exact_ci
from .protocol import NoiseBinParams, PSCRoundResult

__all__ = ["psc_estimate", "estimate_from_round"]


def psc_estimate(raw_count: int, b: int,
                 noise: NoiseBinParams = NoiseBinParams(0),
                 n_cps: int = 3) -> Estimate:
    """Estimate with 95% interval for the union cardinality behind one
    raw count.

    noise is the per-CP bin count actually configured for the round;
    the subtracted mean uses the total over all n_cps parties.
    """
    raw_count = int(raw_count)
    if raw_count < 0:
        raise ValueError(f"raw count must be >= 0, got {raw_count}")
    if n_cps < 1:
        raise ValueError("need at least one noise-adding party")
    total = noise.n_noise * n_cps
    if raw_count > b + total:
        raise ValueError(
            f"raw count {raw_count} exceeds b + total noise bins {b + total}")
    est = psc_exact_ci(raw_count, b, total)
    return replace(est, method="psc_estimate")


def estimate_from_round(result: PSCRoundResult) -> Estimate:
    """Same estimate, reading b and the recorded noise total off a
    finished round."""
    raw = int(result.raw_count)
    if raw > result.b + result.n_noise_total:
        raise ValueError(
            f"raw count {raw} exceeds b + total noise bins "
            f"{result.b + result.n_noise_total}")
    est = psc_exact_ci(raw, result.b, result.n_noise_total)
    return replace(est, method="psc_estimate")
