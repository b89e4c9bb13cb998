"""ergomax: extremes and hit statistics of chaotic map orbits.

A numerical laboratory for maximum processes of distance observables along
orbits of simple chaotic systems, their almost-sure growth laws and eventual
bands, shrinking-target (Borel-Cantelli style) hit statistics, empirical
measure diagnostics (local dimension, annulus regularity, correlation
decay), and the iid reference theory the dynamical results generalise.
"""

from __future__ import annotations

from . import asymptotics, dynamics, measure, observables, targets
from .asymptotics import (BandOccupancy, DichotomyThresholds, DichotomyVerdict,
                          GrowthRatio, SequenceClassification, SequenceSpec,
                          TailModel, band_occupancy, classify_sequence,
                          dichotomy_detector, exponential_tail, gaussian_tail,
                          growth_ratio, iid_max_series, log_minus_loglog,
                          log_plus_loglog, pareto_tail, plain_log, pure_power)
from .dynamics import (KnownFacts, MapSystem, doubling, henon, intermittent,
                       lozi, orbit, orbit_array, orbit_chunks, periodic_points,
                       pick_target, step, tent)
from .errors import (BandInverted, ConfigInvalid, ErgomaxError,
                     InsufficientMass, InsufficientRange, IoError,
                     NonFiniteState, OutOfRange, ParameterError,
                     ReplayMismatch, StreamTooShort, ZeroMass)
from .measure import (AnnulusFit, DecayEstimate, DimensionFit,
                      EmpiricalMeasure, annulus_regularity, ball_mass,
                      correlation_decay, local_dimension)
from .observables import (MaxAccumulator, MaxSeries, Observable, TypeThresholds,
                          capped_power, default_checkpoints, evaluate,
                          level_radius, max_process, neg_log_dist, power_dist,
                          sqrt_abs_log_dist, type_thresholds)
from .targets import (AnalyticLebesgue1D, EmpiricalQuantile, HitStats,
                      RateParams, SbcFit, ShortReturnResult, TargetSchedule,
                      calibration_from_orbit, hit_stats, radius_for_measure,
                      sbc_error_fit, short_return_stat)

__version__ = "0.1.0"
