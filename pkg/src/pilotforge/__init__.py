"""Joint pilot sequence and analog combiner design for multi-cell massive MIMO.

The package is organized around six modules:

* ``matlin``: complex linear-algebra primitives with tested contracts.
* ``channel``: correlation profiles, geometry and channel sampling.
* ``estimator``: interference-limited reception and MMSE estimation.
* ``combiner``: per-cell analog combiner design (fully digital, MaGiQ,
  greedy dictionary search).
* ``pilots``: eigen pilots, greedy sum-of-ratio-traces pilots, baselines.
* ``harness``: Monte-Carlo scenarios, presets, CSV emission and selftest.
"""

from .channel import (
    ChannelRealization,
    FullySeparable,
    Geometry,
    MuMimo,
    NetworkConfig,
    PartiallySeparable,
    make_hex_geometry,
    make_mu_mimo_profile,
    make_random_fully_separable,
    sample_channels,
)
from .estimator import CombinerSet, EstimationReport, PilotSet
from .harness import ResultRow, Scenario, emit_csv, list_presets, preset, run_scenario, selftest

__version__ = "0.1.0"

__all__ = [
    "ChannelRealization",
    "CombinerSet",
    "EstimationReport",
    "FullySeparable",
    "Geometry",
    "MuMimo",
    "NetworkConfig",
    "PartiallySeparable",
    "PilotSet",
    "ResultRow",
    "Scenario",
    "emit_csv",
    "list_presets",
    "make_hex_geometry",
    "make_mu_mimo_profile",
    "make_random_fully_separable",
    "preset",
    "run_scenario",
    "sample_channels",
    "selftest",
    "__version__",
]
