#ifndef CDM_CALIBRATION_HPP_
#define CDM_CALIBRATION_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cdm/qt_ewma.hpp"
#include "cdm/quanttree.hpp"
#include "cdm/threshold_table.hpp"

namespace cdm {

struct CalibrationOptions {
  std::size_t train_size = 256;
  std::size_t bins = kDefaultBins;
  double lambda = kDefaultLambda;
  double arl0 = 375.0;
  // Beyond t_max the threshold stays constant. Survivors of a long run are
  // enriched in histograms that fit their stream well, so the tail alarm rate
  // drifts below 1/arl0; 1500 keeps that tail to under 2% of the runs at the
  // default target while 10^5 streams still leave ~1800 survivors.
  std::size_t t_max = 1500;
  std::size_t replicates = 100'000;
  std::uint64_t seed = 0;
  std::size_t survivor_floor = 1000;
};

/// Fresh QT-EWMA detector (no thresholds) on a QuantTree built from
/// `train_size` uniform(0, 1) scalars drawn from `rng`. The statistic's null
/// distribution depends only on bin-index sequences, so this 1-D surrogate
/// stands in for any data distribution.
QtEwmaDetector make_surrogate_detector(std::size_t train_size, std::size_t bins, double lambda,
                                       Rng& rng);

/// Null trajectory T_1..T_horizon: a surrogate detector fed `horizon` fresh
/// uniform samples, all drawn from Rng(seed).
std::vector<double> simulate_stationary_trajectory(std::size_t train_size, std::size_t bins,
                                                   double lambda, std::size_t horizon,
                                                   std::uint64_t seed);

/// Thresholds with constant conditional false-alarm probability 1/arl0,
/// estimated by peeling: R null trajectories advance in lockstep, h_t is the
/// nearest-rank (1 - alpha) quantile of T_t among the trajectories that have
/// not alarmed yet, and the ones above h_t are dropped. Replicate i uses
/// derive_seed(seed, i), so the table does not depend on the thread count.
///
/// Throws ConfigError on invalid options (replicates < 10^4,
/// t_max < 5 / lambda, arl0 < 2) and CalibrationError when fewer than
/// survivor_floor trajectories remain before t_max.
ThresholdTable calibrate_thresholds(const CalibrationOptions& options);

/// Per-step alarm counts of fresh null trajectories monitored with `table`.
struct ExceedanceReplay {
  std::vector<std::size_t> survivors;    // trajectories without alarm before t
  std::vector<std::size_t> exceedances;  // of those, alarms at t
};

ExceedanceReplay replay_exceedance(const ThresholdTable& table, std::size_t replicates,
                                   std::size_t steps, std::uint64_t seed);

struct EcddCalibrationOptions {
  double p0 = 0.1;
  double r = 0.2;
  double arl0 = 375.0;
  std::size_t replicates = 2000;
  std::uint64_t seed = 0;
  /// Runs are censored at horizon_factor * arl0.
  double horizon_factor = 20.0;
  double tolerance = 0.02;
  std::size_t max_iterations = 100;
};

/// Mean run length of ECDD with limit L on Bernoulli(p0) error streams.
/// Replicate i uses derive_seed(seed, i); censored runs count as the horizon.
double simulate_ecdd_run_length(double p0, double r, double limit, std::size_t replicates,
                                std::size_t horizon, std::uint64_t seed);

/// Control limit L whose simulated mean run length on Bernoulli(p0) error
/// streams is within `tolerance` (relative) of arl0. Bisection with common
/// random numbers, so the simulated run length is monotone in L. Throws
/// CalibrationError when no such L is found within max_iterations.
double calibrate_ecdd_limit(const EcddCalibrationOptions& options);

}  // namespace cdm

#endif  // CDM_CALIBRATION_HPP_
