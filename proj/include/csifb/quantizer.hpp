#pragma once

// Quantization codebooks over the latent space. Two variants:
//  - per-component: one k-means codebook per component and per rate
//    r in [1, b_n], so any feedback length <= B can be served;
//  - shared: columns normalized to unit variance, pooled, one codebook per
//    rate r in [1, b_1]; component n uses the shared centers scaled by its
//    sigma_n (k-means levels scale with the data).

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "csifb/bit_alloc.hpp"
#include "csifb/container.hpp"
#include "csifb/errors.hpp"
#include "csifb/kmeans.hpp"

namespace csifb {

struct Codebook {
  enum class Variant { kPerComponent, kShared };

  Variant variant = Variant::kPerComponent;
  // per-component: levels[n][r-1] holds the 2^r centers of component n
  // (levels[n] is empty when b_n = 0).
  std::vector<std::vector<std::vector<Complex>>> levels;
  // shared: shared_levels[r-1] holds the 2^r pooled centers.
  std::vector<std::vector<Complex>> shared_levels;
  Eigen::VectorXd sigma;  // shared variant: per-component scaling.
  BitAllocation alloc;    // allocation the codebook was built for
  bool degenerate = false;

  int max_rate(int n) const {
    if (variant == Variant::kPerComponent) {
      return n < static_cast<int>(levels.size()) ? static_cast<int>(levels[n].size()) : 0;
    }
    return n < sigma.size() ? static_cast<int>(shared_levels.size()) : 0;
  }

  // Effective centers of component n at the given rate (sigma-scaled for the
  // shared variant).
  std::vector<Complex> centers_for(int n, int rate) const {
    if (rate < 1 || rate > max_rate(n)) {
      throw std::invalid_argument("codebook: no centers for component " +
                                  std::to_string(n) + " at rate " + std::to_string(rate));
    }
    if (variant == Variant::kPerComponent) return levels[n][rate - 1];
    std::vector<Complex> out = shared_levels[rate - 1];
    for (auto& c : out) c *= sigma(n);
    return out;
  }
};

inline Codebook build_per_component(const Eigen::MatrixXcd& z_train,
                                    const BitAllocation& alloc, std::uint64_t seed,
                                    const KmeansConfig& cfg = {}) {
  if (z_train.cols() != alloc.latent_dim) {
    throw std::invalid_argument("build_per_component: z_train columns != latent_dim");
  }
  Codebook cb;
  cb.variant = Codebook::Variant::kPerComponent;
  cb.alloc = alloc;
  cb.levels.resize(alloc.latent_dim);
  const auto n_rows = static_cast<std::size_t>(z_train.rows());
  for (int n = 0; n < alloc.latent_dim; ++n) {
    const int b_n = alloc.bits[n];
    cb.levels[n].reserve(b_n);
    for (int r = 1; r <= b_n; ++r) {
      const KmeansResult fit = kmeans_fit(CSpan(z_train.col(n).data(), n_rows), 1 << r,
                                          derive_seed(seed, n, r), cfg);
      cb.degenerate = cb.degenerate || fit.degenerate;
      cb.levels[n].push_back(fit.centers);
    }
  }
  return cb;
}

inline Codebook build_shared(const Eigen::MatrixXcd& z_train, const BitAllocation& alloc,
                             std::uint64_t seed, const KmeansConfig& cfg = {}) {
  if (z_train.cols() != alloc.latent_dim) {
    throw std::invalid_argument("build_shared: z_train columns != latent_dim");
  }
  Codebook cb;
  cb.variant = Codebook::Variant::kShared;
  cb.alloc = alloc;
  const Eigen::Index n_rows = z_train.rows();
  const int n_p = alloc.latent_dim;
  cb.sigma.resize(n_p);
  if (n_p == 0) return cb;

  // Latent columns are zero-mean by construction; sigma is the sample
  // standard deviation about zero, matching the eigenvalue normalization.
  for (int n = 0; n < n_p; ++n) {
    const double var = z_train.col(n).squaredNorm() / std::max<double>(1.0, n_rows - 1);
    if (!(var > 0.0)) {
      throw std::invalid_argument("build_shared: zero-variance latent column " +
                                  std::to_string(n));
    }
    cb.sigma(n) = std::sqrt(var);
  }

  std::vector<Complex> pooled;
  pooled.reserve(static_cast<std::size_t>(n_rows) * n_p);
  for (int n = 0; n < n_p; ++n) {
    for (Eigen::Index i = 0; i < n_rows; ++i) {
      pooled.push_back(z_train(i, n) / cb.sigma(n));
    }
  }

  const int b1 = alloc.bits[0];
  cb.shared_levels.reserve(b1);
  for (int r = 1; r <= b1; ++r) {
    const KmeansResult fit =
        kmeans_fit(CSpan(pooled.data(), pooled.size()), 1 << r, derive_seed(seed, 0, r), cfg);
    cb.degenerate = cb.degenerate || fit.degenerate;
    cb.shared_levels.push_back(fit.centers);
  }
  return cb;
}

// Rounds every center through complex64. Centers are offloaded as float32
// pairs; rounding up front keeps the in-memory codebook bit-identical to one
// reloaded from its serialized form.
inline void round_centers_to_c64(Codebook& cb) {
  auto round_set = [](std::vector<Complex>& centers) {
    for (auto& c : centers) {
      c = {static_cast<double>(static_cast<float>(c.real())),
           static_cast<double>(static_cast<float>(c.imag()))};
    }
  };
  for (auto& comp : cb.levels) {
    for (auto& set : comp) round_set(set);
  }
  for (auto& set : cb.shared_levels) round_set(set);
}

// Nearest-center indices for the components with b_n >= 1. alloc may be a
// truncation of the codebook's allocation (variable-length feedback); it only
// needs rates the codebook actually stores.
inline std::vector<int> quantize(const Eigen::RowVectorXcd& z, const Codebook& cb,
                                 const BitAllocation& alloc) {
  if (z.size() < alloc.latent_dim) {
    throw std::invalid_argument("quantize: latent vector shorter than allocation");
  }
  std::vector<int> indices;
  indices.reserve(alloc.latent_dim);
  for (int n = 0; n < alloc.latent_dim; ++n) {
    if (alloc.bits[n] == 0) continue;
    indices.push_back(nearest_center(z(n), cb.centers_for(n, alloc.bits[n])));
  }
  return indices;
}

inline Eigen::RowVectorXcd dequantize(const std::vector<int>& indices, const Codebook& cb,
                                      const BitAllocation& alloc) {
  Eigen::RowVectorXcd z = Eigen::RowVectorXcd::Zero(alloc.latent_dim);
  std::size_t at = 0;
  for (int n = 0; n < alloc.latent_dim; ++n) {
    if (alloc.bits[n] == 0) continue;  // dropped components decode to 0
    if (at >= indices.size()) throw MismatchError("dequantize: corrupt frame");
    const int idx = indices[at++];
    if (idx < 0 || idx >= (1 << alloc.bits[n])) {
      throw MismatchError("dequantize: corrupt frame");
    }
    const std::vector<Complex> centers = cb.centers_for(n, alloc.bits[n]);
    z(n) = centers[static_cast<std::size_t>(idx)];
  }
  if (at != indices.size()) throw MismatchError("dequantize: corrupt frame");
  return z;
}

inline void save_codebook(const std::string& path, const Codebook& cb,
                          const json& extra = json::object()) {
  Container c;
  c.header = extra;
  c.header["kind"] = "codebook";
  c.header["variant"] =
      cb.variant == Codebook::Variant::kPerComponent ? "per-component" : "shared";
  c.header["degenerate"] = cb.degenerate;
  c.header["allocation"] = allocation_to_json(cb.alloc, "", 0);

  // Centers are concatenated (component asc, rate asc); the header records
  // per-set offsets.
  std::vector<Complex> flat;
  json sets = json::array();
  auto push_set = [&](int n, int r, const std::vector<Complex>& centers) {
    sets.push_back({{"n", n}, {"rate", r}, {"offset", flat.size()}, {"k", centers.size()}});
    flat.insert(flat.end(), centers.begin(), centers.end());
  };
  if (cb.variant == Codebook::Variant::kPerComponent) {
    for (std::size_t n = 0; n < cb.levels.size(); ++n) {
      for (std::size_t r = 0; r < cb.levels[n].size(); ++r) {
        push_set(static_cast<int>(n), static_cast<int>(r + 1), cb.levels[n][r]);
      }
    }
  } else {
    for (std::size_t r = 0; r < cb.shared_levels.size(); ++r) {
      push_set(-1, static_cast<int>(r + 1), cb.shared_levels[r]);
    }
    c.add(make_array_f64("sigma", cb.sigma));
  }
  c.header["sets"] = sets;
  Eigen::MatrixXcd m(1, static_cast<Eigen::Index>(flat.size()));
  for (std::size_t i = 0; i < flat.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = flat[i];
  c.add(make_array_c64("centers", m));
  c.save(path);
}

inline Codebook load_codebook(const std::string& path) {
  const Container c = Container::load(path);
  if (c.header.value("kind", "") != "codebook") {
    throw MismatchError("not a codebook container: " + path);
  }
  Codebook cb;
  cb.variant = c.header.at("variant").get<std::string>() == "shared"
                   ? Codebook::Variant::kShared
                   : Codebook::Variant::kPerComponent;
  cb.degenerate = c.header.value("degenerate", false);
  cb.alloc = allocation_from_json(c.header.at("allocation"));
  const Eigen::MatrixXcd flat = array_to_complex_matrix(c.get("centers"));
  if (cb.variant == Codebook::Variant::kPerComponent) {
    cb.levels.resize(cb.alloc.latent_dim);
  } else {
    cb.sigma = array_to_real_vector(c.get("sigma"));
  }
  for (const auto& set : c.header.at("sets")) {
    const int n = set.at("n").get<int>();
    const auto offset = set.at("offset").get<std::size_t>();
    const auto k = set.at("k").get<std::size_t>();
    std::vector<Complex> centers(k);
    for (std::size_t i = 0; i < k; ++i) {
      centers[i] = flat(0, static_cast<Eigen::Index>(offset + i));
    }
    if (cb.variant == Codebook::Variant::kPerComponent) {
      cb.levels[n].push_back(std::move(centers));
    } else {
      cb.shared_levels.push_back(std::move(centers));
    }
  }
  return cb;
}

}  // namespace csifb
