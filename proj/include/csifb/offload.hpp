#pragma once

// Model offloading: principal components are sparsified in the angular-delay
// domain (unitary 3-D DFT over the two array axes and the subcarrier axis),
// only the largest-magnitude fraction 1/eta of coefficients is kept, and the
// receiver rebuilds a semi-unitary basis by inverse transform plus
// Gram-Schmidt. Parameter-count formulas for both the exact and sparsified
// offload live here too.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "csifb/bit_alloc.hpp"
#include "csifb/container.hpp"
#include "csifb/errors.hpp"
#include "csifb/grid.hpp"
#include "csifb/pca.hpp"

namespace csifb {

// Unitary 3-D DFT on vectors laid out per GridDims::flat_index. Precomputes
// the per-axis DFT matrices; apply() is three small matrix products.
class Dft3 {
 public:
  explicit Dft3(GridDims dims) : dims_(dims) {
    wx_ = dft_matrix(dims.n_x);
    wy_ = dft_matrix(dims.n_y);
    wc_ = dft_matrix(dims.n_c);
  }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v, bool inverse = false) const {
    if (v.size() != dims_.flat_size()) throw std::invalid_argument("dft3: size mismatch");
    const int n_x = dims_.n_x, n_y = dims_.n_y, n_c = dims_.n_c;
    const int n_a = n_x * n_y;
    const Eigen::MatrixXcd& fx = inverse ? wxh_() : wx_;
    const Eigen::MatrixXcd& fy = inverse ? wyh_() : wy_;
    const Eigen::MatrixXcd& fc = inverse ? wch_() : wc_;

    // x axis: flat layout is (x fastest), so the vector is an n_x x (n_y n_c)
    // column-major matrix.
    Eigen::VectorXcd out = v;
    {
      Eigen::Map<Eigen::MatrixXcd> m(out.data(), n_x, static_cast<Eigen::Index>(n_y) * n_c);
      m = (fx * m).eval();
    }
    // y axis: per subcarrier, an n_x x n_y block.
    for (int ic = 0; ic < n_c; ++ic) {
      Eigen::Map<Eigen::MatrixXcd> m(out.data() + static_cast<std::ptrdiff_t>(ic) * n_a,
                                     n_x, n_y);
      m = (m * fy.transpose()).eval();
    }
    // subcarrier axis: n_a x n_c matrix.
    {
      Eigen::Map<Eigen::MatrixXcd> m(out.data(), n_a, n_c);
      m = (m * fc.transpose()).eval();
    }
    return out;
  }

 private:
  static Eigen::MatrixXcd dft_matrix(int n) {
    Eigen::MatrixXcd w(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double phase = -2.0 * M_PI * j * k / n;
        w(j, k) = std::polar(scale, phase);
      }
    }
    return w;
  }

  const Eigen::MatrixXcd& wxh_() const { return lazy_adjoint(wx_, wxh_cache_); }
  const Eigen::MatrixXcd& wyh_() const { return lazy_adjoint(wy_, wyh_cache_); }
  const Eigen::MatrixXcd& wch_() const { return lazy_adjoint(wc_, wch_cache_); }

  static const Eigen::MatrixXcd& lazy_adjoint(const Eigen::MatrixXcd& w,
                                              Eigen::MatrixXcd& cache) {
    if (cache.size() == 0) cache = w.adjoint();
    return cache;
  }

  GridDims dims_;
  Eigen::MatrixXcd wx_, wy_, wc_;
  mutable Eigen::MatrixXcd wxh_cache_, wyh_cache_, wch_cache_;
};

inline Eigen::VectorXcd dft3(const Eigen::VectorXcd& v, GridDims dims,
                             bool inverse = false) {
  return Dft3(dims).apply(v, inverse);
}

struct SparsifiedModel {
  std::vector<std::vector<std::uint32_t>> positions;  // per component, ascending
  std::vector<std::vector<Complex>> values;
  double eta = 1.0;
  Eigen::RowVectorXcd mean;
  GridDims dims;
  int n_p = 0;

  std::int64_t kept_per_component() const {
    return positions.empty() ? 0 : static_cast<std::int64_t>(positions[0].size());
  }
};

// Keeps the floor(N_A N_C / eta) largest-magnitude transform coefficients of
// each of the first n_p components. Magnitude ties at the retention boundary
// keep the lowest flat index.
inline SparsifiedModel sparsify(const PcaModel& model, int n_p, double eta) {
  const std::int64_t d = model.dims.flat_size();
  if (!(eta >= 1.0) || eta > static_cast<double>(d)) {
    throw std::invalid_argument("sparsify: eta out of range [1, N_A*N_C]");
  }
  if (n_p < 0 || n_p > model.rank()) throw std::invalid_argument("sparsify: n_p out of range");
  const auto kept = static_cast<std::int64_t>(static_cast<double>(d) / eta);

  SparsifiedModel sm;
  sm.eta = eta;
  sm.mean = model.mean;
  sm.dims = model.dims;
  sm.n_p = n_p;
  sm.positions.resize(n_p);
  sm.values.resize(n_p);

  const Dft3 plan(model.dims);
  std::vector<std::int64_t> idx(d);
  for (int n = 0; n < n_p; ++n) {
    const Eigen::VectorXcd f = plan.apply(model.components.col(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::nth_element(idx.begin(), idx.begin() + kept, idx.end(),
                     [&f](std::int64_t a, std::int64_t b) {
                       const double ma = std::norm(f(a));
                       const double mb = std::norm(f(b));
                       return ma != mb ? ma > mb : a < b;
                     });
    std::sort(idx.begin(), idx.begin() + kept);
    sm.positions[n].reserve(kept);
    sm.values[n].reserve(kept);
    for (std::int64_t i = 0; i < kept; ++i) {
      sm.positions[n].push_back(static_cast<std::uint32_t>(idx[i]));
      sm.values[n].push_back(f(idx[i]));
    }
  }
  return sm;
}

// Rounds kept values and the mean through complex64. The offloaded wire
// format carries float32 pairs, so running this before densify makes the
// transmitter-side basis bit-identical to what a receiver derives from the
// offload file.
inline void quantize_offload(SparsifiedModel& sm) {
  for (auto& comp : sm.values) {
    for (auto& v : comp) {
      v = {static_cast<double>(static_cast<float>(v.real())),
           static_cast<double>(static_cast<float>(v.imag()))};
    }
  }
  for (Eigen::Index i = 0; i < sm.mean.size(); ++i) {
    sm.mean(i) = {static_cast<double>(static_cast<float>(sm.mean(i).real())),
                  static_cast<double>(static_cast<float>(sm.mean(i).imag()))};
  }
}

namespace detail {

// Gram-Schmidt over columns in order, with one re-orthogonalization pass so
// the result meets tight orthonormality tolerances even when the input
// columns are nearly dependent.
inline void gram_schmidt_columns(Eigen::MatrixXcd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        m.col(j) -= (m.col(i).adjoint() * m.col(j)).value() * m.col(i);
      }
    }
    const double norm = m.col(j).norm();
    if (norm < 1e-12) {
      throw RankCollapseError(static_cast<int>(j),
                              "rank collapse at column " + std::to_string(j) +
                                  "; decrease eta or n_p");
    }
    m.col(j) /= norm;
  }
}

}  // namespace detail

// Scatter, inverse transform, orthonormalize. Output columns are the
// reconstructed components, in the original order.
inline Eigen::MatrixXcd densify(const SparsifiedModel& sm) {
  const std::int64_t d = sm.dims.flat_size();
  Eigen::MatrixXcd v(d, sm.n_p);
  const Dft3 plan(sm.dims);
  Eigen::VectorXcd f(d);
  for (int n = 0; n < sm.n_p; ++n) {
    f.setZero();
    for (std::size_t i = 0; i < sm.positions[n].size(); ++i) {
      f(sm.positions[n][i]) = sm.values[n][i];
    }
    v.col(n) = plan.apply(f, /*inverse=*/true);
  }
  detail::gram_schmidt_columns(v);
  return v;
}

enum class ModelCountMode { kExact, kSparsified };

// Real-parameter count of the model offload. Exact mode covers the dense
// complex V_NP plus the mean; sparsified mode counts kept complex values,
// their positions (one real each) and the mean, with N_A N_C / eta floored.
inline std::int64_t count_model_params(std::int64_t n_a, std::int64_t n_c,
                                       std::int64_t n_p, double eta,
                                       ModelCountMode mode) {
  if (n_a <= 0 || n_c <= 0 || n_p <= 0) {
    throw std::invalid_argument("count_model_params: dims must be positive");
  }
  const std::int64_t d = n_a * n_c;
  if (mode == ModelCountMode::kExact) return 2 * d * n_p + 2 * d;
  if (!(eta >= 1.0)) throw std::invalid_argument("count_model_params: eta must be >= 1");
  const auto kept = static_cast<std::int64_t>(static_cast<double>(d) / eta);
  return 3 * kept * n_p + 2 * d;
}

enum class CodebookCountMode { kPerComponent, kShared };

// Real-parameter count of the codebook offload, including the allocation
// order vector m (B entries). Per-component offloads every rate up to b_n for
// every component; shared offloads one codebook per rate up to b_1 plus the
// per-component scaling vector.
inline std::int64_t count_codebook_params(const BitAllocation& alloc,
                                          CodebookCountMode mode) {
  auto geometric = [](int b) -> std::int64_t {
    // sum_{r=1..b} 2^r = 2^{b+1} - 2
    return b <= 0 ? 0 : (std::int64_t{2} << b) - 2;
  };
  if (mode == CodebookCountMode::kPerComponent) {
    std::int64_t levels = 0;
    for (int b : alloc.bits) levels += geometric(b);
    return 2 * levels + alloc.total;
  }
  const int b1 = alloc.bits.empty() ? 0 : alloc.bits[0];
  return 2 * geometric(b1) + alloc.latent_dim + alloc.total;
}

// Serialized per-component layout (little-endian): count as u32, positions as
// u32 each, values as complex64. Payload size is therefore exactly
// 4 * count_model_params(sparsified) + 4 * n_p framing bytes.
inline std::vector<std::uint8_t> sparsified_component_blob(const SparsifiedModel& sm) {
  std::vector<std::uint8_t> blob;
  auto put_u32 = [&blob](std::uint32_t v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    blob.insert(blob.end(), p, p + 4);
  };
  for (int n = 0; n < sm.n_p; ++n) {
    put_u32(static_cast<std::uint32_t>(sm.positions[n].size()));
    for (std::uint32_t pos : sm.positions[n]) put_u32(pos);
    for (Complex v : sm.values[n]) {
      const float re = static_cast<float>(v.real());
      const float im = static_cast<float>(v.imag());
      const auto* pr = reinterpret_cast<const std::uint8_t*>(&re);
      const auto* pi = reinterpret_cast<const std::uint8_t*>(&im);
      blob.insert(blob.end(), pr, pr + 4);
      blob.insert(blob.end(), pi, pi + 4);
    }
  }
  return blob;
}

inline void save_sparsified(const std::string& path, const SparsifiedModel& sm,
                            const json& extra = json::object()) {
  Container c;
  c.header = extra;
  c.header["kind"] = "sparsified_model";
  c.header["eta"] = sm.eta;
  c.header["n_p"] = sm.n_p;
  c.header["dims"] = {sm.dims.n_x, sm.dims.n_y, sm.dims.n_c};
  c.add(make_array_blob("components", sparsified_component_blob(sm)));
  c.add(make_array_c64("mean", sm.mean));
  c.save(path);
}

inline SparsifiedModel load_sparsified(const std::string& path) {
  const Container c = Container::load(path);
  if (c.header.value("kind", "") != "sparsified_model") {
    throw MismatchError("not a sparsified_model container: " + path);
  }
  SparsifiedModel sm;
  sm.eta = c.header.at("eta").get<double>();
  sm.n_p = c.header.at("n_p").get<int>();
  const auto d = c.header.at("dims");
  sm.dims = GridDims{d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
  sm.mean = array_to_complex_matrix(c.get("mean"));

  const auto& blob = c.get("components").bytes;
  std::size_t at = 0;
  auto get_u32 = [&blob, &at]() {
    if (at + 4 > blob.size()) throw MismatchError("sparsified model: truncated blob");
    std::uint32_t v = 0;
    std::memcpy(&v, blob.data() + at, 4);
    at += 4;
    return v;
  };
  sm.positions.resize(sm.n_p);
  sm.values.resize(sm.n_p);
  for (int n = 0; n < sm.n_p; ++n) {
    const std::uint32_t count = get_u32();
    sm.positions[n].resize(count);
    for (std::uint32_t i = 0; i < count; ++i) sm.positions[n][i] = get_u32();
    sm.values[n].resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      float re = 0, im = 0;
      if (at + 8 > blob.size()) throw MismatchError("sparsified model: truncated blob");
      std::memcpy(&re, blob.data() + at, 4);
      std::memcpy(&im, blob.data() + at + 4, 4);
      at += 8;
      sm.values[n][i] = {static_cast<double>(re), static_cast<double>(im)};
    }
  }
  if (at != blob.size()) throw MismatchError("sparsified model: trailing bytes");
  return sm;
}

}  // namespace csifb
