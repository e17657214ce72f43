#pragma once

// Geometric multipath channel generator. Uplink and downlink matrices of one
// user share the same L paths (gains, angles, delays); the two bands differ
// only through their carrier and subcarrier frequencies, which decorrelates
// the per-subcarrier phases across the duplex gap while keeping the path
// geometry identical.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "csifb/grid.hpp"
#include "csifb/rng.hpp"

namespace csifb {

inline constexpr double kSpeedOfLight = 299792458.0;

// snr_db sentinel for a noiseless link.
inline constexpr double kNoiselessSnrDb = std::numeric_limits<double>::infinity();

struct ScenarioConfig {
  int n_x = 8;               // antennas per UPA row
  int n_y = 8;               // antennas per UPA column
  int n_c = 160;             // OFDM subcarriers
  double f_ul = 2.5e9;       // uplink center frequency [Hz]
  double f_dl = 2.62e9;      // downlink center frequency [Hz]
  double bandwidth = 8e6;    // channel bandwidth [Hz]
  int n_paths = 58;          // multipath count L
  double max_delay = 2.5e-6; // path delays uniform on [0, max_delay] [s]
  std::uint64_t seed = 1;

  int n_antennas() const { return n_x * n_y; }
  GridDims grid() const { return GridDims{n_x, n_y, n_c}; }

  void validate() const {
    if (n_x <= 0 || n_y <= 0 || n_c <= 0) {
      throw std::invalid_argument("scenario: antenna/subcarrier counts must be positive");
    }
    if (n_paths < 1) throw std::invalid_argument("scenario: n_paths must be >= 1");
    if (!(bandwidth > 0)) throw std::invalid_argument("scenario: bandwidth must be > 0");
    if (f_ul == f_dl) throw std::invalid_argument("scenario: f_ul and f_dl must differ");
    if (!(max_delay >= 0)) throw std::invalid_argument("scenario: max_delay must be >= 0");
    if (!std::isfinite(f_ul) || !std::isfinite(f_dl) || !std::isfinite(bandwidth) ||
        !std::isfinite(max_delay)) {
      throw std::invalid_argument("scenario: non-finite parameter");
    }
  }

  // 8x8 UPA, 160 subcarriers, 58 paths: the full-scale urban microcell setup.
  static ScenarioConfig paper() { return ScenarioConfig{}; }

  // Desk-scale profile for fast experiments and the acceptance suite.
  static ScenarioConfig desk() {
    ScenarioConfig c;
    c.n_x = 4;
    c.n_y = 4;
    c.n_c = 32;
    c.n_paths = 20;
    c.max_delay = default_max_delay(32, 8e6);
    return c;
  }

  // (N_C/8)/W: spreads delays over an eighth of the delay-resolution grid,
  // which keeps the angular-delay transform of the channels visibly sparse.
  static double default_max_delay(int n_c, double bandwidth) {
    return (n_c / 8.0) / bandwidth;
  }
};

// Shared path geometry of one user. Angles are radians on the visible
// hemisphere; gains are CN(0,1).
struct PathSet {
  std::vector<double> azimuth;
  std::vector<double> elevation;
  std::vector<double> delay;
  std::vector<std::complex<double>> gain;
};

inline PathSet draw_paths(const ScenarioConfig& cfg, std::uint64_t user_seed) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, user_seed, 0x706174ULL));
  PathSet p;
  p.azimuth.resize(cfg.n_paths);
  p.elevation.resize(cfg.n_paths);
  p.delay.resize(cfg.n_paths);
  p.gain.resize(cfg.n_paths);
  for (int l = 0; l < cfg.n_paths; ++l) {
    p.gain[l] = rng.cgaussian();
    p.azimuth[l] = rng.uniform(-M_PI / 2, M_PI / 2);
    p.elevation[l] = rng.uniform(-M_PI / 2, M_PI / 2);
    p.delay[l] = rng.uniform(0.0, cfg.max_delay);
  }
  return p;
}

// Builds the N_A x N_C matrix of one band from a path set. The UPA has
// physical half-wavelength spacing at the UL/DL mean carrier; steering phases
// are evaluated at the band's center frequency, subcarrier phases at the
// absolute subcarrier frequencies f_band - W/2 + (i + 1/2) * W / N_C.
inline Eigen::MatrixXcd synthesize_channel(const ScenarioConfig& cfg, const PathSet& paths,
                                           double f_center) {
  const int n_a = cfg.n_antennas();
  const double f_design = 0.5 * (cfg.f_ul + cfg.f_dl);
  const double spacing_wavelengths = 0.5 * f_center / f_design;

  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n_a, cfg.n_c);
  Eigen::VectorXcd steer(n_a);
  Eigen::RowVectorXcd tone(cfg.n_c);
  const std::complex<double> j2pi(0.0, 2.0 * M_PI);
  for (std::size_t l = 0; l < paths.gain.size(); ++l) {
    const double u = std::sin(paths.elevation[l]) * std::cos(paths.azimuth[l]);
    const double v = std::sin(paths.elevation[l]) * std::sin(paths.azimuth[l]);
    for (int iy = 0; iy < cfg.n_y; ++iy) {
      for (int ix = 0; ix < cfg.n_x; ++ix) {
        const double phase = 2.0 * M_PI * spacing_wavelengths * (ix * u + iy * v);
        steer(ix + cfg.n_x * iy) = std::polar(1.0, phase);
      }
    }
    for (int i = 0; i < cfg.n_c; ++i) {
      const double f_i = f_center - 0.5 * cfg.bandwidth +
                         (i + 0.5) * cfg.bandwidth / cfg.n_c;
      tone(i) = std::exp(-j2pi * (paths.delay[l] * f_i));
    }
    h.noalias() += paths.gain[l] * (steer * tone);
  }
  return h;
}

// (H_UL, H_DL) of one user, built from the same path set. Deterministic in
// (cfg.seed, user_seed).
inline std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> generate_channel_pair(
    const ScenarioConfig& cfg, std::uint64_t user_seed) {
  const PathSet paths = draw_paths(cfg, user_seed);
  return {synthesize_channel(cfg, paths, cfg.f_ul),
          synthesize_channel(cfg, paths, cfg.f_dl)};
}

// H + N with i.i.d. CN noise scaled so that ||H||_F^2 / E||N||_F^2 equals the
// linear SNR of this particular realization.
inline Eigen::MatrixXcd add_noise(const Eigen::MatrixXcd& h, double snr_db,
                                  std::uint64_t seed) {
  if (std::isnan(snr_db)) throw std::invalid_argument("add_noise: snr_db is NaN");
  if (std::isinf(snr_db) && snr_db > 0) return h;
  const double snr = std::pow(10.0, snr_db / 10.0);
  const double entry_var = h.squaredNorm() / (snr * static_cast<double>(h.size()));
  const double scale = std::sqrt(entry_var);
  Rng rng(seed);
  Eigen::MatrixXcd out(h.rows(), h.cols());
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      out(r, c) = h(r, c) + scale * rng.cgaussian();
    }
  }
  return out;
}

// Scales so that ||H||_F^2 = N_A * N_C.
inline Eigen::MatrixXcd normalize_channel(const Eigen::MatrixXcd& h) {
  const double norm = h.norm();
  if (norm == 0.0) throw std::domain_error("normalize_channel: degenerate channel");
  return h * (std::sqrt(static_cast<double>(h.size())) / norm);
}

// User index spaces for dataset generation: training users come first,
// test users follow, so the two sets never share a channel.
struct ChannelDataset {
  Eigen::MatrixXcd ul_noisy;  // N_train x (N_A N_C), rows vectorized, normalized
  Eigen::MatrixXcd dl_true;   // N_test  x (N_A N_C), normalized ground truth
  Eigen::MatrixXcd dl_noisy;  // N_test  x (N_A N_C), normalized after noise
};

inline Eigen::MatrixXcd make_training_set(const ScenarioConfig& cfg, int n_train,
                                          double snr_ul_db) {
  if (n_train < 0) throw std::invalid_argument("n_train must be >= 0");
  Eigen::MatrixXcd rows(n_train, cfg.grid().flat_size());
  for (int i = 0; i < n_train; ++i) {
    const PathSet paths = draw_paths(cfg, static_cast<std::uint64_t>(i));
    const Eigen::MatrixXcd h = normalize_channel(synthesize_channel(cfg, paths, cfg.f_ul));
    const Eigen::MatrixXcd noisy =
        add_noise(h, snr_ul_db, derive_seed(cfg.seed, i, 0x756cULL));
    rows.row(i) = vectorize(normalize_channel(noisy));
  }
  return rows;
}

inline ChannelDataset make_dataset(const ScenarioConfig& cfg, int n_train, int n_test,
                                   double snr_ul_db, double snr_dl_db) {
  ChannelDataset ds;
  ds.ul_noisy = make_training_set(cfg, n_train, snr_ul_db);
  ds.dl_true.resize(n_test, cfg.grid().flat_size());
  ds.dl_noisy.resize(n_test, cfg.grid().flat_size());
  for (int i = 0; i < n_test; ++i) {
    const std::uint64_t user = static_cast<std::uint64_t>(n_train) + i;
    const PathSet paths = draw_paths(cfg, user);
    const Eigen::MatrixXcd h = normalize_channel(synthesize_channel(cfg, paths, cfg.f_dl));
    const Eigen::MatrixXcd noisy =
        add_noise(h, snr_dl_db, derive_seed(cfg.seed, user, 0x646cULL));
    ds.dl_true.row(i) = vectorize(h);
    ds.dl_noisy.row(i) = vectorize(normalize_channel(noisy));
  }
  return ds;
}

}  // namespace csifb
