"""BB84 sifting and key rates under finite detector dead time.

A discrete-time Monte Carlo simulator and closed-form calculator for
polarization- and phase-encoded BB84 receivers whose single-photon detectors
have a non-paralyzable dead time.  The package covers:

* the free-running four-detector bench with chain-based sifting, and how a
  fixed-state resend attack makes its detection efficiency basis-dependent;
* the dead-time-safe sifting schemes (all-detectors-active filtering, global
  detector deactivation, and the two-detector four-state receiver) with their
  stationary availability and sifted-rate formulas;
* the asymptotic decoy-state secure-key-rate chain for a weak coherent
  source, with the dead-time availability correction.

Start with :func:`deadtime_qkd.harness.run_trial` or the ``deadtime-qkd``
command-line tool; the ``demos/`` directory of the repository walks through
each capability.
"""

__version__ = "1.0.0"

from .analytic import (AvailabilityResult, DecoyParams, DecoyRates,
                       availability_fixed_v, binary_entropy, decoy_rate_limit,
                       decoy_rates, p00_basis1, p00_basis2, p00_basis2_from_eta,
                       pa_4state, pa_deactivate, rate_4state, rate_deactivate)
from .core import (AnalyticValidityError, Basis, ParameterError, PulseState,
                   RandomStream, SystemParams, VACUUM, derive_params)
from .harness import (ALGORITHMS, SweepSpec, TrialConfig, TrialResult,
                      TrialStats, emit_results, run_sweep, run_trial,
                      sweep_rows, theory_columns)
from .optics import ActiveBench, DetectionRecord, Detector, PassiveBench
from .parties import (AliceRecord, EveLog, EveStrategy, FixedStateResend,
                      InterceptResend, Passive, alice_emit, channel_transmit,
                      eve_apply)
from .reference import run_reference_trial
from .sifting import (RogersChains, SiftedBits, TrialTrace, rogers_chains,
                      sift_4state, sift_all_active, sift_deactivate,
                      sift_naive, sift_rogers)

__all__ = [
    "ALGORITHMS",
    "ActiveBench",
    "AliceRecord",
    "AnalyticValidityError",
    "AvailabilityResult",
    "Basis",
    "DecoyParams",
    "DecoyRates",
    "DetectionRecord",
    "Detector",
    "EveLog",
    "EveStrategy",
    "FixedStateResend",
    "InterceptResend",
    "ParameterError",
    "Passive",
    "PassiveBench",
    "PulseState",
    "RandomStream",
    "RogersChains",
    "SiftedBits",
    "SweepSpec",
    "SystemParams",
    "TrialConfig",
    "TrialResult",
    "TrialStats",
    "TrialTrace",
    "VACUUM",
    "alice_emit",
    "availability_fixed_v",
    "binary_entropy",
    "channel_transmit",
    "decoy_rate_limit",
    "decoy_rates",
    "derive_params",
    "emit_results",
    "eve_apply",
    "p00_basis1",
    "p00_basis2",
    "p00_basis2_from_eta",
    "pa_4state",
    "pa_deactivate",
    "rate_4state",
    "rate_deactivate",
    "rogers_chains",
    "run_reference_trial",
    "run_sweep",
    "run_trial",
    "sift_4state",
    "sift_all_active",
    "sift_deactivate",
    "sift_naive",
    "sift_rogers",
    "sweep_rows",
    "theory_columns",
]
