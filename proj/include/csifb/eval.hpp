#pragma once

// Reconstruction metrics (NMSE, per-subcarrier cosine similarity) and the
// multi-user precoding evaluation: zero-forcing beamforming per subcarrier,
// water-filling power allocation planned on the *estimated* channels, rates
// realized on the *true* channels including the residual inter-user
// interference the planner cannot see. A Monte Carlo harness draws K users
// per trial and aggregates all three metrics.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "csifb/codec.hpp"
#include "csifb/container.hpp"
#include "csifb/errors.hpp"
#include "csifb/rng.hpp"

namespace csifb {

inline double nmse(const Eigen::MatrixXcd& h_hat, const Eigen::MatrixXcd& h) {
  if (h_hat.rows() != h.rows() || h_hat.cols() != h.cols()) {
    throw std::invalid_argument("nmse: dimension mismatch");
  }
  const double denom = h.squaredNorm();
  if (denom == 0.0) throw std::invalid_argument("nmse: reference channel is zero");
  return (h_hat - h).squaredNorm() / denom;
}

// (1/N_C) sum_c |h_hat_c^H h_c| / (||h_hat_c|| ||h_c||).
inline double cosine_similarity(const Eigen::MatrixXcd& h_hat, const Eigen::MatrixXcd& h) {
  if (h_hat.rows() != h.rows() || h_hat.cols() != h.cols()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch");
  }
  double acc = 0.0;
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    const double na = h_hat.col(c).norm();
    const double nb = h.col(c).norm();
    if (na == 0.0 || nb == 0.0) {
      throw std::invalid_argument("cosine_similarity: zero column");
    }
    acc += std::abs((h_hat.col(c).adjoint() * h.col(c)).value()) / (na * nb);
  }
  return acc / static_cast<double>(h.cols());
}

// Water-filling over parallel channels with unit noise: maximize
// sum log2(1 + p_k g_k) subject to sum p_k = total_power. Level search with
// inactive-user removal; the returned powers meet the budget to 1e-10.
inline Eigen::VectorXd waterfill(const Eigen::VectorXd& gains, double total_power) {
  const int k = static_cast<int>(gains.size());
  if (k == 0 || !(total_power >= 0)) throw std::invalid_argument("waterfill: bad input");
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&gains](int a, int b) {
    return 1.0 / gains(a) < 1.0 / gains(b);
  });

  Eigen::VectorXd powers = Eigen::VectorXd::Zero(k);
  double inv_sum = 0.0;
  int active = 0;
  double level = 0.0;
  for (int m = 0; m < k; ++m) {
    inv_sum += 1.0 / gains(idx[m]);
    const double candidate = (total_power + inv_sum) / (m + 1);
    if (candidate > 1.0 / gains(idx[m])) {
      active = m + 1;
      level = candidate;
    }
  }
  double assigned = 0.0;
  for (int m = 0; m < active; ++m) {
    powers(idx[m]) = level - 1.0 / gains(idx[m]);
    assigned += powers(idx[m]);
  }
  if (active > 0 && std::abs(assigned - total_power) > 1e-10 * std::max(1.0, total_power)) {
    throw NumericalError("waterfill: power constraint violated");
  }
  return powers;
}

// h_hat_set / h_true_set: K channel matrices (N_A x N_C). snr_db sets the
// per-subcarrier transmit power with unit noise.
inline double zf_waterfilling_sum_rate(const std::vector<Eigen::MatrixXcd>& h_hat_set,
                                       const std::vector<Eigen::MatrixXcd>& h_true_set,
                                       double snr_db) {
  const int k = static_cast<int>(h_hat_set.size());
  if (k == 0 || h_true_set.size() != static_cast<std::size_t>(k)) {
    throw std::invalid_argument("sum_rate: user set mismatch");
  }
  const auto n_a = h_hat_set[0].rows();
  const auto n_c = h_hat_set[0].cols();
  if (k > n_a) throw std::invalid_argument("sum_rate: K exceeds antenna count");
  const double total_power = std::pow(10.0, snr_db / 10.0);

  double rate_acc = 0.0;
  Eigen::MatrixXcd est(k, n_a), tru(k, n_a);
  for (Eigen::Index c = 0; c < n_c; ++c) {
    for (int u = 0; u < k; ++u) {
      est.row(u) = h_hat_set[u].col(c).transpose();
      tru.row(u) = h_true_set[u].col(c).transpose();
    }
    // Right pseudo-inverse of the estimated K x N_A matrix.
    const Eigen::MatrixXcd gram = est * est.adjoint();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(gram);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-12 * sv(0)) {
      throw NumericalError("sum_rate: rank-deficient estimated channel at subcarrier " +
                           std::to_string(c));
    }
    const Eigen::MatrixXcd w_tilde = est.adjoint() * gram.inverse();

    Eigen::VectorXd gains(k);
    Eigen::MatrixXcd w(n_a, k);
    for (int u = 0; u < k; ++u) {
      const double norm = w_tilde.col(u).norm();
      w.col(u) = w_tilde.col(u) / norm;
      gains(u) = 1.0 / (norm * norm);  // |est_u * w_u|^2 with unit-power column
    }
    const Eigen::VectorXd powers = waterfill(gains, total_power);

    const Eigen::MatrixXcd cross = tru * w;  // cross(u, j) = h_true_u * w_j
    for (int u = 0; u < k; ++u) {
      if (powers(u) == 0.0) continue;
      const double signal = powers(u) * std::norm(cross(u, u));
      double interference = 0.0;
      for (int j = 0; j < k; ++j) {
        if (j != u) interference += powers(j) * std::norm(cross(u, j));
      }
      rate_acc += std::log2(1.0 + signal / (1.0 + interference));
    }
  }
  return rate_acc / static_cast<double>(n_c);
}

struct MonteCarloConfig {
  int n_users = 8;       // K drawn per trial
  double snr_db = 10.0;  // transmit SNR per subcarrier for the ZF evaluation
  int n_trials = 200;
  std::uint64_t seed = 1;
};

struct EvalReport {
  struct Row {
    int b = 0;
    int trial = 0;
    double nmse = 0.0;      // mean over the K users of the trial
    double cosine = 0.0;    // mean over the K users of the trial
    double sum_rate = 0.0;  // bits per channel use
  };
  std::vector<Row> rows;
  json config_echo;

  std::vector<double> samples(int b, double Row::*field) const {
    std::vector<double> v;
    for (const auto& r : rows) {
      if (r.b == b) v.push_back(r.*field);
    }
    return v;
  }

  void to_csv(std::ostream& os) const {
    os << "B,trial,nmse,cosine,sum_rate\n";
    for (const auto& r : rows) {
      os << r.b << ',' << r.trial << ',' << r.nmse << ',' << r.cosine << ','
         << r.sum_rate << '\n';
    }
  }

  json summary() const;
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double x = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(x);
  const std::size_t j = std::min(i + 1, v.size() - 1);
  const double a = x - static_cast<double>(i);
  return v[i] * (1.0 - a) + v[j] * a;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace detail

inline json EvalReport::summary() const {
  std::vector<int> b_values;
  for (const auto& r : rows) {
    if (std::find(b_values.begin(), b_values.end(), r.b) == b_values.end()) {
      b_values.push_back(r.b);
    }
  }
  json out = json::object();
  out["config"] = config_echo;
  out["per_b"] = json::array();
  for (int b : b_values) {
    json cell;
    cell["B"] = b;
    for (auto [name, field] : {std::pair{"nmse", &Row::nmse},
                               std::pair{"cosine", &Row::cosine},
                               std::pair{"sum_rate", &Row::sum_rate}}) {
      const auto v = samples(b, field);
      cell[name] = {{"mean", detail::mean(v)},
                    {"median", detail::quantile(v, 0.5)},
                    {"q05", detail::quantile(v, 0.05)},
                    {"q95", detail::quantile(v, 0.95)},
                    {"stderr", detail::standard_error(v)},
                    {"count", v.size()}};
    }
    out["per_b"].push_back(cell);
  }
  return out;
}

// Runs the Monte Carlo protocol: per trial, K test users are drawn without
// replacement (the draw depends only on (seed, trial), so every codec state
// sees the same user sets), each user's noisy channel is encoded and decoded,
// and the three metrics are recorded.
inline EvalReport run_monte_carlo(const Eigen::MatrixXcd& test_true,
                                  const Eigen::MatrixXcd& test_noisy, GridDims dims,
                                  const std::vector<CodecState>& states,
                                  const MonteCarloConfig& cfg) {
  const int n_test = static_cast<int>(test_true.rows());
  if (test_noisy.rows() != n_test) {
    throw std::invalid_argument("monte carlo: true/noisy test sets differ in size");
  }
  if (cfg.n_trials > 0 && n_test < cfg.n_users) {
    throw std::invalid_argument("monte carlo: test set smaller than K");
  }

  EvalReport report;
  report.config_echo = {{"K", cfg.n_users},
                        {"snr_db", cfg.snr_db},
                        {"snr_reference", "transmit power per subcarrier, unit noise"},
                        {"n_trials", cfg.n_trials},
                        {"seed", cfg.seed},
                        {"n_test", n_test}};

  std::vector<int> pool(n_test);
  for (int trial = 0; trial < cfg.n_trials; ++trial) {
    Rng rng(derive_seed(cfg.seed, trial, 0x6d63ULL));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < cfg.n_users; ++i) {  // partial Fisher-Yates
      const std::size_t j = i + rng.index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    for (const auto& state : states) {
      std::vector<Eigen::MatrixXcd> h_hat_set, h_true_set;
      double nmse_acc = 0.0, cos_acc = 0.0;
      for (int i = 0; i < cfg.n_users; ++i) {
        const int user = pool[i];
        const Eigen::MatrixXcd h_true =
            devectorize(test_true.row(user), dims.n_antennas(), dims.n_c);
        const Eigen::MatrixXcd h_noisy =
            devectorize(test_noisy.row(user), dims.n_antennas(), dims.n_c);
        const Eigen::MatrixXcd h_hat = decode(encode(h_noisy, state), state);
        nmse_acc += nmse(h_hat, h_true);
        cos_acc += cosine_similarity(h_hat, h_true);
        h_hat_set.push_back(h_hat);
        h_true_set.push_back(h_true);
      }
      EvalReport::Row row;
      row.b = state.alloc.total;
      row.trial = trial;
      row.nmse = nmse_acc / cfg.n_users;
      row.cosine = cos_acc / cfg.n_users;
      row.sum_rate = zf_waterfilling_sum_rate(h_hat_set, h_true_set, cfg.snr_db);
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace csifb
