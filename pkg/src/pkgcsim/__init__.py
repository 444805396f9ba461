"""Simulator and trace analyzer for agile package C-state power management.

The package models a server SoC whose power-management unit can take the
whole package into a sub-microsecond idle state (PC1A) whenever every core
sits in its shallow C-state and every IO link is electrically idle.  It
provides:

- domain types for core/package/IO/DRAM idle states and calibrated
  power/latency profiles (``pkgcsim.domain``),
- the package power-management FSM and its transition-latency budget
  (``pkgcsim.fsm``),
- residency-weighted power and savings arithmetic (``pkgcsim.power_model``),
- C-state trace parsing and all-idle interval analytics (``pkgcsim.trace``),
- a discrete-event workload simulator (``pkgcsim.sim``),
- an HTTP service exposing all of the above (``pkgcsim.service``) and a thin
  CLI client (``pkgcsim.cli``).
"""

from pkgcsim.domain import PkgcsimError

__version__ = "0.1.0"

__all__ = ["PkgcsimError", "__version__"]
