"""Residency-weighted package power arithmetic.

Average power is the residency-weighted sum of per-state power tiers.  The
agile-state saving replaces idle-tier watts with agile-tier watts for the
fraction of time the package can actually reach the agile state, and the
agile tier itself composes from the deep-state floor plus what must stay
awake: core supplies in retention, IO links in shallow idle, and the PLLs
kept running.
"""

from __future__ import annotations

from dataclasses import dataclass

from pkgcsim.domain import PkgcsimError, PowerProfile

RESIDENCY_SUM_TOL = 1e-9


class InvalidResidency(PkgcsimError):
    """Residency fractions out of range or not summing to one."""


class DegenerateBaseline(PkgcsimError):
    """Baseline power is zero, so relative savings are undefined."""


@dataclass(frozen=True)
class ResidencyVector:
    """Fractions of wall time per package condition.

    ``r_pc0`` and ``r_pc0_idle`` describe the baseline system (active vs
    all-cores-idle) and must sum to one.  ``r_pc1a`` is the fraction the
    agile-enabled system spends in the agile state; it can never exceed the
    baseline idle fraction, and the headline assumption sets them equal.
    ``r_pc6`` is carried for deep-state reporting.
    """

    r_pc0: float
    r_pc0_idle: float
    r_pc1a: float = 0.0
    r_pc6: float = 0.0


def _check_fractions(res: ResidencyVector) -> None:
    for name in ("r_pc0", "r_pc0_idle", "r_pc1a", "r_pc6"):
        value = getattr(res, name)
        if not (-RESIDENCY_SUM_TOL <= value <= 1 + RESIDENCY_SUM_TOL):
            raise InvalidResidency(f"{name}={value!r} outside [0, 1]")
    total = res.r_pc0 + res.r_pc0_idle
    if abs(total - 1.0) > RESIDENCY_SUM_TOL:
        raise InvalidResidency(f"r_pc0 + r_pc0_idle = {total!r}, expected 1")


def baseline_power(
    res: ResidencyVector,
    prof: PowerProfile,
    p_pc0_at_load: float | None = None,
) -> float:
    """Average watts of the baseline system at the given residencies.

    ``p_pc0_at_load`` is the active power at the operating point being
    modeled; it defaults to the profile's PC0 ceiling.
    """
    _check_fractions(res)
    p_active = prof.p_pc0_max if p_pc0_at_load is None else p_pc0_at_load
    p_idle = prof.p_pc0_idle_soc + prof.p_pc0_idle_dram
    return res.r_pc0 * p_active + res.r_pc0_idle * p_idle


def pc1a_savings(
    res: ResidencyVector,
    prof: PowerProfile,
    p_pc0_at_load: float | None = None,
) -> float:
    """Fractional power saving from spending ``r_pc1a`` of time in the agile state.

    The saving is r_pc1a * (idle tier - agile tier) / baseline.  r_pc1a may
    not exceed r_pc0_idle: the package cannot be in the agile state more
    than the baseline is idle.
    """
    _check_fractions(res)
    if res.r_pc1a > res.r_pc0_idle + RESIDENCY_SUM_TOL:
        raise InvalidResidency(
            f"r_pc1a={res.r_pc1a!r} exceeds r_pc0_idle={res.r_pc0_idle!r}"
        )
    base = baseline_power(res, prof, p_pc0_at_load)
    if base == 0.0:
        raise DegenerateBaseline("baseline power is zero")
    p_idle = prof.p_pc0_idle_soc + prof.p_pc0_idle_dram
    p_agile = prof.p_pc1a_soc + prof.p_pc1a_dram
    return res.r_pc1a * (p_idle - p_agile) / base


def compose_pc1a_power(prof: PowerProfile) -> tuple[float, float]:
    """Compose the agile-state (SoC, DRAM) watts from the profile's components.

    SoC: deep floor plus core supplies in retention, IO links in shallow
    idle, and the PLLs kept awake.  DRAM: deep floor plus the CKE-off delta
    over self-refresh.
    """
    soc = (
        prof.p_pc6_soc
        + prof.p_cores_diff
        + prof.p_ios_diff
        + pll_power(prof.n_plls_awake, prof.p_pll_each)
    )
    dram = prof.p_pc6_dram + prof.p_dram_diff
    return soc, dram


def pll_power(n_plls: int, p_each: float) -> float:
    """Watts of ``n_plls`` PLLs at ``p_each`` watts apiece."""
    return n_plls * p_each
