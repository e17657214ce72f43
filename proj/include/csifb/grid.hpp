#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>

namespace csifb {

// Antenna/subcarrier grid of a UPA channel. A channel matrix is
// N_A x N_C with antenna index a = ix + n_x*iy; its column-major
// vectorization therefore coincides with the flat (x, y, subcarrier)
// tensor layout used by the angular-delay transform.
struct GridDims {
  int n_x = 0;
  int n_y = 0;
  int n_c = 0;

  int n_antennas() const { return n_x * n_y; }
  std::int64_t flat_size() const {
    return static_cast<std::int64_t>(n_antennas()) * n_c;
  }
  std::int64_t flat_index(int ix, int iy, int ic) const {
    return ix + static_cast<std::int64_t>(n_x) * (iy + static_cast<std::int64_t>(n_y) * ic);
  }
  bool operator==(const GridDims&) const = default;
};

// Column-major vectorization of an N_A x N_C matrix into a row vector.
inline Eigen::RowVectorXcd vectorize(const Eigen::MatrixXcd& h) {
  return Eigen::Map<const Eigen::RowVectorXcd>(h.data(), h.size());
}

inline Eigen::MatrixXcd devectorize(const Eigen::RowVectorXcd& v, int n_a, int n_c) {
  if (v.size() != static_cast<Eigen::Index>(n_a) * n_c) {
    throw std::invalid_argument("devectorize: size does not match n_a*n_c");
  }
  return Eigen::Map<const Eigen::MatrixXcd>(v.data(), n_a, n_c);
}

}  // namespace csifb
