#pragma once

// Greedy feedback-bit allocation across principal components, plus the
// distortion oracles that drive it and an exhaustive-search reference used as
// a test oracle. The greedy step awards each bit to the component with the
// largest distortion decrease; the candidate set is pruned to component 1 and
// components with b_n < b_{n-1}, which is lossless when the component
// variances are non-increasing (the PCA ordering). Optimality of the greedy
// result is guaranteed under the analytic sigma^2 * 2^-b oracle on a
// descending spectrum; with the empirical (k-means) oracle the pruned search
// still enforces a non-increasing allocation but makes no optimality claim.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "csifb/container.hpp"
#include "csifb/kmeans.hpp"

namespace csifb {

struct BitAllocation {
  std::vector<int> bits;   // bits per component, length R
  int total = 0;           // B
  std::vector<int> order;  // order[i] = component receiving the (i+1)-th bit
  int latent_dim = 0;      // N_P: index past the last nonzero entry of bits

  void validate() const {
    long long sum = 0;
    for (std::size_t n = 0; n < bits.size(); ++n) {
      if (bits[n] < 0) throw std::logic_error("allocation: negative bits");
      if (n > 0 && bits[n] > bits[n - 1]) {
        throw std::logic_error("allocation: bits must be non-increasing");
      }
      sum += bits[n];
    }
    if (sum != total) throw std::logic_error("allocation: bits do not sum to B");
    if (static_cast<int>(order.size()) != total) {
      throw std::logic_error("allocation: order length != B");
    }
    std::vector<int> replay(bits.size(), 0);
    int last_nonzero = 0;
    for (int m : order) {
      if (m < 0 || m >= static_cast<int>(bits.size())) {
        throw std::logic_error("allocation: order index out of range");
      }
      replay[m]++;
    }
    if (replay != bits) throw std::logic_error("allocation: order does not replay bits");
    for (std::size_t n = 0; n < bits.size(); ++n) {
      if (bits[n] > 0) last_nonzero = static_cast<int>(n) + 1;
    }
    if (latent_dim != last_nonzero) throw std::logic_error("allocation: bad latent_dim");
  }
};

// Allocation for a shorter feedback B' <= B, replayed from the order prefix.
inline BitAllocation truncate_allocation(const BitAllocation& alloc, int b_prime) {
  if (b_prime < 0 || b_prime > alloc.total) {
    throw std::invalid_argument("truncate_allocation: B' out of range");
  }
  BitAllocation out;
  out.bits.assign(alloc.bits.size(), 0);
  out.total = b_prime;
  out.order.assign(alloc.order.begin(), alloc.order.begin() + b_prime);
  for (int m : out.order) {
    out.bits[m]++;
    out.latent_dim = std::max(out.latent_dim, m + 1);
  }
  return out;
}

// Distortion-rate of a CSCG variable with variance sigma_sq quantized with b
// bits. Exact in floating point: 2^-b only touches the exponent.
inline double analytic_distortion(double sigma_sq, int b) {
  if (sigma_sq < 0) throw std::invalid_argument("analytic_distortion: negative variance");
  if (b < 0) throw std::invalid_argument("analytic_distortion: negative bits");
  return std::ldexp(sigma_sq, -b);
}

struct EmpiricalDistortion {
  double value = 0.0;
  bool degenerate = false;
};

// Mean squared k-means quantization error of one latent column at 2^b levels;
// b = 0 is the column variance about its mean (the component is dropped and
// decodes to the latent prior).
inline EmpiricalDistortion empirical_distortion(const Eigen::VectorXcd& column, int b,
                                                std::uint64_t seed,
                                                const KmeansConfig& cfg = {}) {
  const Eigen::Index n = column.size();
  if (n == 0) throw std::invalid_argument("empirical_distortion: empty column");
  if (b < 0) throw std::invalid_argument("empirical_distortion: negative bits");
  if (b == 0) {
    const Complex mean = column.mean();
    const double var =
        (column.array() - mean).matrix().squaredNorm() / std::max<double>(1.0, n - 1);
    return {var, false};
  }
  if (b > 30) throw std::invalid_argument("empirical_distortion: rate too large");
  const KmeansResult r =
      kmeans_fit(CSpan(column.data(), static_cast<std::size_t>(n)), 1 << b, seed, cfg);
  return {r.distortion, r.degenerate};
}

enum class OracleMode { kAnalytic, kEmpirical };

// d_n(b) source for the allocator. Memoizes (n, b) lookups so each value is
// computed at most once per greedy run; reads are mutex-guarded so concurrent
// candidate evaluation stays safe.
class DistortionOracle {
 public:
  static DistortionOracle analytic(Eigen::VectorXd variances) {
    DistortionOracle o;
    o.mode_ = OracleMode::kAnalytic;
    for (Eigen::Index i = 0; i < variances.size(); ++i) {
      if (variances(i) < 0) {
        throw std::invalid_argument("analytic oracle: negative variance");
      }
    }
    o.variances_ = std::move(variances);
    return o;
  }

  static DistortionOracle empirical(Eigen::MatrixXcd projected_training,
                                    std::uint64_t seed, const KmeansConfig& cfg = {}) {
    if (projected_training.rows() == 0 || projected_training.cols() == 0) {
      throw std::invalid_argument("empirical oracle: empty training projection");
    }
    DistortionOracle o;
    o.mode_ = OracleMode::kEmpirical;
    o.g_train_ = std::move(projected_training);
    o.seed_ = seed;
    o.kmeans_cfg_ = cfg;
    return o;
  }

  OracleMode mode() const { return mode_; }

  int size() const {
    return mode_ == OracleMode::kAnalytic ? static_cast<int>(variances_.size())
                                          : static_cast<int>(g_train_.cols());
  }

  double operator()(int n, int b) const {
    if (n < 0 || n >= size()) throw std::invalid_argument("oracle: component out of range");
    if (mode_ == OracleMode::kAnalytic) return analytic_distortion(variances_(n), b);
    const std::uint64_t key = (static_cast<std::uint64_t>(n) << 32) |
                              static_cast<std::uint32_t>(b);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    const double d =
        empirical_distortion(g_train_.col(n), b, derive_seed(seed_, n, b), kmeans_cfg_)
            .value;
    std::lock_guard<std::mutex> lock(mutex_);
    cache_.emplace(key, d);
    return d;
  }

 private:
  OracleMode mode_ = OracleMode::kAnalytic;
  Eigen::VectorXd variances_;
  Eigen::MatrixXcd g_train_;
  std::uint64_t seed_ = 0;
  KmeansConfig kmeans_cfg_;
  mutable std::unordered_map<std::uint64_t, double> cache_;
  mutable std::mutex mutex_;
};

inline double total_distortion(const DistortionOracle& oracle, const std::vector<int>& bits) {
  double sum = 0.0;
  for (std::size_t n = 0; n < bits.size(); ++n) {
    sum += oracle(static_cast<int>(n), bits[n]);
  }
  return sum;
}

struct AllocateOptions {
  bool prune = true;  // restrict candidates per the non-increasing property
};

inline BitAllocation allocate_bits(int total_bits, const DistortionOracle& oracle,
                                   const AllocateOptions& opts = {}) {
  if (total_bits < 0) throw std::invalid_argument("allocate_bits: B must be >= 0");
  const int r = oracle.size();
  if (r < 1) throw std::invalid_argument("allocate_bits: oracle has no components");

  BitAllocation alloc;
  alloc.bits.assign(r, 0);
  alloc.total = total_bits;
  alloc.order.reserve(total_bits);
  if (total_bits == 0) return alloc;

  bool any_information = false;
  for (int n = 0; n < r; ++n) {
    if (oracle(n, 0) > 0.0) {
      any_information = true;
      break;
    }
  }
  if (!any_information) {
    throw std::runtime_error("allocate_bits: no information to allocate");
  }

  for (int i = 0; i < total_bits; ++i) {
    int best = -1;
    double best_delta = -std::numeric_limits<double>::infinity();
    for (int n = 0; n < r; ++n) {
      if (opts.prune && n > 0 && alloc.bits[n] == alloc.bits[n - 1]) continue;
      const double delta = oracle(n, alloc.bits[n]) - oracle(n, alloc.bits[n] + 1);
      if (delta > best_delta) {
        best_delta = delta;
        best = n;
      }
    }
    alloc.bits[best]++;
    alloc.order.push_back(best);
    alloc.latent_dim = std::max(alloc.latent_dim, best + 1);
  }
  return alloc;
}

// Exhaustive minimizer of the summed distortion over all compositions of B
// into r_max parts. Test oracle only; guarded against combinatorial blowup.
// Ties resolve to the lexicographically largest allocation (most bits on the
// lowest index), matched by enumerating in lex-descending order.
inline BitAllocation exhaustive_allocate(int total_bits, const DistortionOracle& oracle,
                                         int r_max) {
  if (r_max < 1 || r_max > 8 || total_bits < 0 || total_bits > 12) {
    throw std::invalid_argument("exhaustive_allocate: guard exceeded (r_max<=8, B<=12)");
  }
  if (r_max > oracle.size()) {
    throw std::invalid_argument("exhaustive_allocate: r_max exceeds oracle size");
  }

  std::vector<int> current(r_max, 0), best;
  double best_cost = std::numeric_limits<double>::infinity();
  auto recurse = [&](auto&& self, int n, int remaining) -> void {
    if (n == r_max - 1) {
      current[n] = remaining;
      const double cost = total_distortion(oracle, current);
      if (cost < best_cost) {
        best_cost = cost;
        best = current;
      }
      return;
    }
    for (int b = remaining; b >= 0; --b) {
      current[n] = b;
      self(self, n + 1, remaining - b);
    }
  };
  recurse(recurse, 0, total_bits);

  BitAllocation alloc;
  alloc.bits = best;
  alloc.total = total_bits;
  for (int n = 0; n < r_max; ++n) {
    for (int i = 0; i < best[n]; ++i) alloc.order.push_back(n);
    if (best[n] > 0) alloc.latent_dim = n + 1;
  }
  return alloc;
}

inline json allocation_to_json(const BitAllocation& alloc, const std::string& oracle_mode,
                               std::uint64_t seed) {
  return json{{"B", alloc.total},
              {"bits", alloc.bits},
              {"order", alloc.order},
              {"latent_dim", alloc.latent_dim},
              {"oracle_mode", oracle_mode},
              {"seed", seed}};
}

inline BitAllocation allocation_from_json(const json& j) {
  BitAllocation a;
  a.total = j.at("B").get<int>();
  a.bits = j.at("bits").get<std::vector<int>>();
  a.order = j.at("order").get<std::vector<int>>();
  a.latent_dim = j.at("latent_dim").get<int>();
  a.validate();
  return a;
}

}  // namespace csifb
