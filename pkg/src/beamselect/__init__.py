"""Node-selection sidelobe control for collaborative beamforming.

Seedable simulation and analysis toolkit for random wireless sensor arrays
that beamform toward one base station while holding their interference at
other stations under a threshold, by testing random node groups against the
threshold and keeping the ones that pass.  Closed-form predictions for the
approval probability, the trial count, and the interference distribution ship
alongside the Monte Carlo harness that checks them.
"""

from ._kernels import BACKEND as kernel_backend
from .analysis import (AnalyticalPrediction, approval_probability,
                       expected_trials, inr_ccdf, predict, trial_count_pmf,
                       truncated_variance)
from .beampattern import (ActiveCluster, BeampatternSample, average_beampattern,
                          average_total_inr, default_angle_grid,
                          expected_average_pattern, sample_beampattern,
                          synchronize, total_received_inr)
from .channel import ChannelMoments, LognormalParams, draw_shadowing, moments
from .core import (NetworkRealization, NodeDistribution, RngStreams, Scenario,
                   derive_stream, sample_network)
from .montecarlo import (EstimateRow, SweepSpec, empirical_ccdf,
                         iid_trial_verdicts, sweep_average_inr,
                         sweep_expected_trials, write_sweep_csv)
from .selection import (SelectionOutcome, multi_cluster_scenarios,
                        run_multi_cluster, run_selection,
                        sample_cluster_networks, verify_outcome)

__version__ = "0.1.0"

__all__ = [
    "ActiveCluster", "AnalyticalPrediction", "BeampatternSample",
    "ChannelMoments", "EstimateRow", "LognormalParams", "NetworkRealization",
    "NodeDistribution", "RngStreams", "Scenario", "SelectionOutcome",
    "SweepSpec", "approval_probability", "average_beampattern",
    "average_total_inr", "default_angle_grid", "derive_stream",
    "draw_shadowing", "empirical_ccdf", "expected_average_pattern",
    "expected_trials", "iid_trial_verdicts", "inr_ccdf", "kernel_backend",
    "moments", "multi_cluster_scenarios", "predict", "run_multi_cluster",
    "run_selection", "sample_beampattern", "sample_cluster_networks",
    "sample_network", "sweep_average_inr", "sweep_expected_trials",
    "synchronize", "total_received_inr", "trial_count_pmf",
    "truncated_variance", "verify_outcome", "write_sweep_csv",
]
