"""Core domain types: idle-state enums, calibrated profiles, validation.

All times are unsigned nanoseconds held in Python ints; cycle math that
produces fractional nanoseconds rounds up so budgets stay conservative.
Profile field names are part of the JSON wire format and must not change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any


class PkgcsimError(Exception):
    """Base class for every error this package raises on purpose."""


class MalformedProfile(PkgcsimError):
    """Profile document has unknown fields or non-numeric values."""


class CoreCState(Enum):
    """Per-core idle states, shallowest to deepest.

    CC1E is kept for trace compatibility; anything at CC1 depth or below
    counts as idle for the package-level gate, so CC1E and CC6 both satisfy
    a CC1 gate.
    """

    CC0 = "CC0"
    CC1 = "CC1"
    CC1E = "CC1E"
    CC6 = "CC6"

    @property
    def depth(self) -> int:
        return _CORE_DEPTH[self]

    def is_idle_at_least(self, gate: "CoreCState") -> bool:
        """True when this state is at least as deep as ``gate``."""
        return self.depth >= gate.depth


_CORE_DEPTH = {
    CoreCState.CC0: 0,
    CoreCState.CC1: 1,
    CoreCState.CC1E: 2,
    CoreCState.CC6: 3,
}


class IoLState(Enum):
    """IO link power states ordered by decreasing link power.

    L0 is fully active, L0p is a reduced-width active state, L0s is the
    fast-entry electrical idle, L1 is the deep idle, and NDA (no dynamic
    activity) is treated as at least as deep as L1.
    """

    L0 = "L0"
    L0P = "L0p"
    L0S = "L0s"
    L1 = "L1"
    NDA = "NDA"

    @property
    def depth(self) -> int:
        return _IO_DEPTH[self]

    @property
    def satisfies_in_l0s(self) -> bool:
        """True when the link counts as 'in L0s or deeper' for the package gate."""
        return self.depth >= _IO_DEPTH[IoLState.L0S]


_IO_DEPTH = {
    IoLState.L0: 0,
    IoLState.L0P: 1,
    IoLState.L0S: 2,
    IoLState.L1: 3,
    IoLState.NDA: 4,
}


class DramPowerMode(Enum):
    """DRAM interface power modes.

    CKE_OFF is the fast clock-enable-off mode used by the agile package
    state; SELF_REFRESH is only reachable through the deep (PC6) flow.
    """

    ACTIVE = "Active"
    CKE_OFF = "CkeOff"
    SELF_REFRESH = "SelfRefresh"


class PackageState(Enum):
    """Package-level states tracked for residency accounting.

    PC0_IDLE is PC0 with every core in CC1 and no package savings; ACC1 and
    PC1A only occur when the agile package feature is enabled; PC2 is the
    transient of the deep flow on the way to and from PC6.
    """

    PC0 = "PC0"
    PC0_IDLE = "PC0_idle"
    PC2 = "PC2"
    PC6 = "PC6"
    ACC1 = "ACC1"
    PC1A = "PC1A"


@dataclass(frozen=True)
class PowerProfile:
    """Calibrated package power tiers and composition deltas, in watts.

    Defaults reproduce the published SKX-class server measurements: the
    PC0 ceiling, the all-cores-CC1 idle tier, the PC6 floor, the component
    deltas between them, and the agile-state (PC1A) tier those deltas
    compose to.
    """

    p_pc0_max: float = 92.0
    p_pc0_idle_soc: float = 44.0
    p_pc0_idle_dram: float = 5.5
    p_pc6_soc: float = 11.9
    p_pc6_dram: float = 0.51
    p_cores_diff: float = 12.1
    p_ios_diff: float = 3.5
    p_dram_diff: float = 1.1
    p_pll_each: float = 0.007
    n_plls_awake: int = 8
    p_pc1a_soc: float = 27.5
    p_pc1a_dram: float = 1.6

    def to_json_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "PowerProfile":
        return cls(**_checked_fields(cls, data))


@dataclass(frozen=True)
class LatencyProfile:
    """Latency constants for the agile package transition.

    The PMU executes one command per pair of clock cycles; the voltage
    regulator slews the mesh/LLC retention rail at a fixed mV/ns rate; the
    DRAM clock-enable and IO electrical-idle exits are fixed costs.  IO
    links arm electrical idle after sitting idle for ``l0s_entry_fraction``
    of their exit latency.
    """

    pmu_clock_hz: int = 500_000_000
    l0s_exit_ns: int = 64
    l0s_entry_fraction: float = 0.25
    cke_entry_ns: int = 10
    cke_exit_ns: int = 24
    fivr_slew_mv_per_ns: float = 2.0
    v_nominal_mv: int = 800
    v_retention_mv: int = 500
    clock_gate_cycles: int = 2
    signal_assert_cycles: int = 2

    def cycles_to_ns(self, cycles: int) -> int:
        """Convert PMU cycles to ns, rounding up."""
        return -(-cycles * 1_000_000_000 // self.pmu_clock_hz)

    @property
    def clock_gate_ns(self) -> int:
        return self.cycles_to_ns(self.clock_gate_cycles)

    @property
    def signal_assert_ns(self) -> int:
        return self.cycles_to_ns(self.signal_assert_cycles)

    @property
    def l0s_entry_threshold_ns(self) -> int:
        """Idle time after which an allowed link enters electrical idle."""
        return math.ceil(self.l0s_entry_fraction * self.l0s_exit_ns)

    def ramp_ns(self, mv_delta: float) -> int:
        """Time to slew the retention rail across ``mv_delta`` millivolts."""
        if mv_delta <= 0:
            return 0
        return math.ceil(mv_delta / self.fivr_slew_mv_per_ns)

    @property
    def full_ramp_ns(self) -> int:
        return self.ramp_ns(self.v_nominal_mv - self.v_retention_mv)

    def to_json_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "LatencyProfile":
        return cls(**_checked_fields(cls, data))


def _checked_fields(cls: type, data: dict[str, Any]) -> dict[str, Any]:
    """Validate JSON field names for a profile class; missing keys keep defaults."""
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise MalformedProfile(
            f"{cls.__name__}: unknown field(s) {', '.join(unknown)}"
        )
    for key, value in data.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MalformedProfile(f"{cls.__name__}.{key}: expected a number")
    return dict(data)


# Consistency slack between the composed PC1A tier and the stored tier.
# Published tier tables round to 0.1 W, so stored values may differ from the
# exact composition by up to that much.
PC1A_CONSISTENCY_TOL_W = 0.1


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of profile validation; violations are data, not exceptions."""

    ok: bool
    violations: tuple[str, ...] = ()


def validate_profile(profile: PowerProfile | LatencyProfile) -> ValidationResult:
    """Check a profile's invariants and name each violated one.

    Power profiles must be non-negative, keep the tier ordering
    p_pc6_soc <= p_pc1a_soc <= p_pc0_idle_soc <= p_pc0_max, and store PC1A
    tiers consistent with their composition from the PC6 floor plus the
    component deltas (within the rounding slack).  Latency profiles must be
    positive where a zero makes no sense and keep v_nominal_mv >=
    v_retention_mv.
    """
    if isinstance(profile, PowerProfile):
        return _validate_power(profile)
    if isinstance(profile, LatencyProfile):
        return _validate_latency(profile)
    raise TypeError(f"not a profile: {type(profile).__name__}")


def _validate_power(p: PowerProfile) -> ValidationResult:
    violations = []
    numeric = [
        p.p_pc0_max, p.p_pc0_idle_soc, p.p_pc0_idle_dram, p.p_pc6_soc,
        p.p_pc6_dram, p.p_cores_diff, p.p_ios_diff, p.p_dram_diff,
        p.p_pll_each, p.n_plls_awake, p.p_pc1a_soc, p.p_pc1a_dram,
    ]
    if any(v < 0 for v in numeric):
        violations.append("non_negative")
    if not (p.p_pc6_soc <= p.p_pc1a_soc <= p.p_pc0_idle_soc <= p.p_pc0_max):
        violations.append("ordering")
    soc = p.p_pc6_soc + p.p_cores_diff + p.p_ios_diff + p.n_plls_awake * p.p_pll_each
    dram = p.p_pc6_dram + p.p_dram_diff
    if (abs(soc - p.p_pc1a_soc) > PC1A_CONSISTENCY_TOL_W
            or abs(dram - p.p_pc1a_dram) > PC1A_CONSISTENCY_TOL_W):
        violations.append("pc1a_consistency")
    return ValidationResult(ok=not violations, violations=tuple(violations))


def _validate_latency(p: LatencyProfile) -> ValidationResult:
    violations = []
    positive = [
        p.pmu_clock_hz, p.l0s_exit_ns, p.l0s_entry_fraction, p.cke_entry_ns,
        p.cke_exit_ns, p.fivr_slew_mv_per_ns, p.clock_gate_cycles,
        p.signal_assert_cycles,
    ]
    if any(v <= 0 for v in positive) or p.v_nominal_mv < 0 or p.v_retention_mv < 0:
        violations.append("positive_fields")
    if p.v_nominal_mv < p.v_retention_mv:
        violations.append("voltage_order")
    return ValidationResult(ok=not violations, violations=tuple(violations))


@dataclass(frozen=True)
class ProfileDoc:
    """A combined profile document as shipped in default-skx.json."""

    power: PowerProfile = field(default_factory=PowerProfile)
    latency: LatencyProfile = field(default_factory=LatencyProfile)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "power_profile": self.power.to_json_dict(),
            "latency_profile": self.latency.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "ProfileDoc":
        known = {"power_profile", "latency_profile"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise MalformedProfile(f"unknown top-level field(s) {', '.join(unknown)}")
        power = PowerProfile.from_json_dict(data.get("power_profile", {}))
        latency = LatencyProfile.from_json_dict(data.get("latency_profile", {}))
        return cls(power=power, latency=latency)
