#pragma once

// Principal-component model of vectorized channels. Fitting runs an SVD of
// the centered training matrix instead of forming the sample covariance: for
// N_train < N_A*N_C the covariance is rank deficient and the SVD route is
// both cheaper and numerically tighter. Eigenvalues are the squared singular
// values divided by N_train - 1.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>

#include "csifb/container.hpp"
#include "csifb/grid.hpp"

namespace csifb {

struct PcaModel {
  Eigen::MatrixXcd components;  // D x R, orthonormal columns, descending eigenvalue
  Eigen::VectorXd eigenvalues;  // length R, non-negative, descending
  Eigen::RowVectorXcd mean;     // length D
  GridDims dims;

  int rank() const { return static_cast<int>(components.cols()); }
  Eigen::Index dim() const { return components.rows(); }
};

namespace detail {

// Eigenvectors are phase-ambiguous; rotate each column so its
// largest-magnitude entry is real positive. Ties on magnitude go to the
// lowest row index.
inline void fix_component_gauge(Eigen::MatrixXcd& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const double m = std::norm(v(r, c));
      if (m > best) {
        best = m;
        imax = r;
      }
    }
    const std::complex<double> pivot = v(imax, c);
    const double mag = std::abs(pivot);
    if (mag > 0.0) v.col(c) *= std::conj(pivot) / mag;
  }
}

}  // namespace detail

// training: N_train x D, rows are vectorized (pre-normalized) channels.
inline PcaModel fit_pca(const Eigen::MatrixXcd& training, GridDims dims) {
  const Eigen::Index n = training.rows();
  const Eigen::Index d = training.cols();
  if (n < 2) throw std::invalid_argument("fit_pca: need at least 2 training rows");
  if (d != dims.flat_size()) throw std::invalid_argument("fit_pca: dims mismatch");
  if (!training.allFinite()) throw std::invalid_argument("fit_pca: non-finite input");

  PcaModel model;
  model.dims = dims;
  model.mean = training.colwise().mean();
  Eigen::MatrixXcd centered = training.rowwise() - model.mean;

  const Eigen::Index r = std::min<Eigen::Index>(n - 1, d);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(centered, Eigen::ComputeThinV);
  model.components = svd.matrixV().leftCols(r);
  detail::fix_component_gauge(model.components);
  model.eigenvalues =
      svd.singularValues().head(r).array().square() / static_cast<double>(n - 1);
  return model;
}

// (h - mean) projected onto the first n_p components.
inline Eigen::RowVectorXcd project(const PcaModel& model, const Eigen::RowVectorXcd& h,
                                   int n_p) {
  if (n_p < 1 || n_p > model.rank()) {
    throw std::invalid_argument("project: n_p out of range");
  }
  if (h.size() != model.dim()) throw std::invalid_argument("project: size mismatch");
  return (h - model.mean) * model.components.leftCols(n_p);
}

inline Eigen::RowVectorXcd reconstruct(const PcaModel& model,
                                       const Eigen::RowVectorXcd& z) {
  const Eigen::Index n_p = z.size();
  if (n_p < 1 || n_p > model.rank()) {
    throw std::invalid_argument("reconstruct: embedding length out of range");
  }
  return z * model.components.leftCols(n_p).adjoint() + model.mean;
}

inline void save_pca(const std::string& path, const PcaModel& model,
                     const json& extra = json::object()) {
  Container c;
  c.header = extra;
  c.header["kind"] = "pca_model";
  c.header["dims"] = {model.dims.n_x, model.dims.n_y, model.dims.n_c};
  c.add(make_array_c128("components", model.components));
  c.add(make_array_f64("eigenvalues", model.eigenvalues));
  c.add(make_array_c128("mean", model.mean));
  c.save(path);
}

inline PcaModel load_pca(const std::string& path) {
  const Container c = Container::load(path);
  if (c.header.value("kind", "") != "pca_model") {
    throw MismatchError("not a pca_model container: " + path);
  }
  PcaModel m;
  const auto d = c.header.at("dims");
  m.dims = GridDims{d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
  m.components = array_to_complex_matrix(c.get("components"));
  m.eigenvalues = array_to_real_vector(c.get("eigenvalues"));
  m.mean = array_to_complex_matrix(c.get("mean"));
  return m;
}

}  // namespace csifb
