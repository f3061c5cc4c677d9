"""Molecular source localization from peak channel-impulse-response counts."""
from .channel import (ChannelParams, Measurement, MeasurementSet, PeakModel, alpha, cir,
                      expected_peak_count, peak_pick, peak_time, sample_peak_measurement,
                      sample_peak_measurements, sample_time_series)
from .crb import crb, fisher_information, hessian, log_likelihood, score
from .estimators import (GdOptions, Trajectory, build_system, gd_cost, gd_gradient,
                         gradient_descent, triangulate)
from .geometry import AnchorSet, barycentric_coordinates, distance, in_open_convex_hull
from .harness import ScenarioConfig, export_results, run_convergence, run_mse_sweep, snr

__version__ = "0.1.0"
