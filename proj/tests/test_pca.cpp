#include <catch2/catch_amalgamated.hpp>

#include "csifb/channel.hpp"
#include "csifb/pca.hpp"

using namespace csifb;

namespace {

// Small training matrix of normalized desk-scale channels.
Eigen::MatrixXcd small_training(int n) {
  ScenarioConfig cfg = ScenarioConfig::desk();
  cfg.n_x = 2;
  cfg.n_y = 2;
  cfg.n_c = 4;
  cfg.n_paths = 6;
  cfg.max_delay = ScenarioConfig::default_max_delay(cfg.n_c, cfg.bandwidth);
  cfg.seed = 99;
  return make_training_set(cfg, n, kNoiselessSnrDb);
}

constexpr GridDims kSmallDims{2, 2, 4};

}  // namespace

TEST_CASE("fit_pca on a hand-checked 2-column set") {
  // Rows (1,0), (-1,0), (2,0), (-2,0): mean 0, covariance diag(10/3, 0).
  Eigen::MatrixXcd rows(4, 2);
  rows << 1.0, 0.0, -1.0, 0.0, 2.0, 0.0, -2.0, 0.0;
  const PcaModel m = fit_pca(rows, GridDims{1, 1, 2});
  REQUIRE(m.mean(0) == std::complex<double>(0.0, 0.0));
  REQUIRE(m.mean(1) == std::complex<double>(0.0, 0.0));
  REQUIRE(m.eigenvalues(0) == Catch::Approx(10.0 / 3.0).epsilon(1e-12));
  REQUIRE(m.eigenvalues(1) == Catch::Approx(0.0).margin(1e-12));
  // Gauge fixing makes the dominant component (1, 0), not (-1, 0).
  REQUIRE(std::abs(m.components(0, 0) - 1.0) < 1e-12);
  REQUIRE(std::abs(m.components(1, 0)) < 1e-12);
}

TEST_CASE("identical rows give all-zero eigenvalues") {
  Eigen::MatrixXcd rows = Eigen::MatrixXcd::Ones(5, 6);
  const PcaModel m = fit_pca(rows, GridDims{1, 2, 3});
  REQUIRE(m.eigenvalues.maxCoeff() < 1e-20);
}

TEST_CASE("fit_pca rejects bad input") {
  REQUIRE_THROWS_AS(fit_pca(Eigen::MatrixXcd::Ones(1, 8), GridDims{2, 2, 2}),
                    std::invalid_argument);
  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Ones(3, 16);
  bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(fit_pca(bad, kSmallDims), std::invalid_argument);
}

TEST_CASE("components are orthonormal with descending eigenvalues") {
  const Eigen::MatrixXcd rows = small_training(24);
  const PcaModel m = fit_pca(rows, kSmallDims);
  REQUIRE(m.rank() == std::min<int>(23, 16));
  const Eigen::MatrixXcd gram =
      m.components.adjoint() * m.components -
      Eigen::MatrixXcd::Identity(m.rank(), m.rank());
  REQUIRE(gram.cwiseAbs().maxCoeff() < 1e-8);
  for (int n = 1; n < m.rank(); ++n) {
    REQUIRE(m.eigenvalues(n) <= m.eigenvalues(n - 1) + 1e-15);
    REQUIRE(m.eigenvalues(n) >= 0.0);
  }
}

TEST_CASE("eigenvalue sum preserves centered energy") {
  const Eigen::MatrixXcd rows = small_training(24);
  const PcaModel m = fit_pca(rows, kSmallDims);
  const Eigen::MatrixXcd centered = rows.rowwise() - m.mean;
  const double trace = centered.squaredNorm() / (rows.rows() - 1);
  REQUIRE(m.eigenvalues.sum() == Catch::Approx(trace).epsilon(1e-8));
}

TEST_CASE("project and reconstruct") {
  const Eigen::MatrixXcd rows = small_training(24);
  const PcaModel m = fit_pca(rows, kSmallDims);

  SECTION("mean projects to zero") {
    const Eigen::RowVectorXcd z = project(m, m.mean, m.rank());
    REQUIRE(z.norm() < 1e-10);
  }
  SECTION("mean plus a component projects to a basis vector") {
    const Eigen::RowVectorXcd h = m.mean + m.components.col(0).transpose();
    const Eigen::RowVectorXcd z = project(m, h, 3);
    REQUIRE(std::abs(z(0) - 1.0) < 1e-10);
    REQUIRE(std::abs(z(1)) < 1e-10);
    REQUIRE(std::abs(z(2)) < 1e-10);
  }
  SECTION("basis embedding reconstructs mean plus component") {
    Eigen::RowVectorXcd z = Eigen::RowVectorXcd::Zero(2);
    z(0) = 1.0;
    const Eigen::RowVectorXcd h = reconstruct(m, z);
    REQUIRE((h - (m.mean + m.components.col(0).transpose())).norm() < 1e-10);
  }
  SECTION("full-rank roundtrip recovers training rows") {
    for (int i : {0, 5, 13}) {
      const Eigen::RowVectorXcd h = rows.row(i);
      const Eigen::RowVectorXcd back = reconstruct(m, project(m, h, m.rank()));
      REQUIRE((back - h).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SECTION("distortion is non-increasing in n_p") {
    const Eigen::RowVectorXcd h = rows.row(7);
    double prev = std::numeric_limits<double>::infinity();
    for (int n_p = 1; n_p <= m.rank(); ++n_p) {
      const double err = (reconstruct(m, project(m, h, n_p)) - h).norm();
      REQUIRE(err <= prev + 1e-12);
      prev = err;
    }
  }
  SECTION("range checks") {
    REQUIRE_THROWS_AS(project(m, m.mean, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(project(m, m.mean, m.rank() + 1), std::invalid_argument);
    REQUIRE_THROWS_AS(reconstruct(m, Eigen::RowVectorXcd::Zero(m.rank() + 1)),
                      std::invalid_argument);
  }
}

TEST_CASE("fit is deterministic") {
  const Eigen::MatrixXcd rows = small_training(16);
  const PcaModel a = fit_pca(rows, kSmallDims);
  const PcaModel b = fit_pca(rows, kSmallDims);
  REQUIRE(a.components == b.components);
  REQUIRE(a.eigenvalues == b.eigenvalues);
}
