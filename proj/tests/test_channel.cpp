#include <catch2/catch_amalgamated.hpp>

#include "csifb/channel.hpp"

using namespace csifb;

namespace {

ScenarioConfig tiny() {
  ScenarioConfig cfg = ScenarioConfig::desk();
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("generate_channel_pair shapes and determinism") {
  const ScenarioConfig cfg = tiny();
  const auto [ul, dl] = generate_channel_pair(cfg, 3);
  REQUIRE(ul.rows() == cfg.n_antennas());
  REQUIRE(ul.cols() == cfg.n_c);
  REQUIRE(dl.rows() == cfg.n_antennas());
  REQUIRE(dl.cols() == cfg.n_c);

  const auto [ul2, dl2] = generate_channel_pair(cfg, 3);
  REQUIRE(ul == ul2);
  REQUIRE(dl == dl2);

  const auto [ul3, dl3] = generate_channel_pair(cfg, 4);
  REQUIRE(ul != ul3);
}

TEST_CASE("UL and DL are built from the same path set") {
  const ScenarioConfig cfg = tiny();
  const PathSet paths = draw_paths(cfg, 11);
  const auto [ul, dl] = generate_channel_pair(cfg, 11);
  REQUIRE(ul == synthesize_channel(cfg, paths, cfg.f_ul));
  REQUIRE(dl == synthesize_channel(cfg, paths, cfg.f_dl));
}

TEST_CASE("single zero-delay path gives a frequency-flat channel") {
  ScenarioConfig cfg = tiny();
  cfg.n_paths = 1;
  cfg.max_delay = 0.0;
  const auto [ul, dl] = generate_channel_pair(cfg, 0);
  for (int c = 1; c < cfg.n_c; ++c) {
    REQUIRE((dl.col(c) - dl.col(0)).norm() == Catch::Approx(0.0).margin(1e-14));
  }
}

TEST_CASE("UL/DL subcarrier vectors decorrelate across the duplex gap") {
  // Paper-scale geometry; correlation magnitude averaged over pairs and
  // subcarriers must be low although the path geometry is shared.
  ScenarioConfig cfg = ScenarioConfig::paper();
  cfg.seed = 42;
  double acc = 0.0;
  const int n_pairs = 200;
  for (int u = 0; u < n_pairs; ++u) {
    const auto [ul, dl] = generate_channel_pair(cfg, u);
    double per_pair = 0.0;
    for (int c = 0; c < cfg.n_c; ++c) {
      per_pair += std::abs((ul.col(c).adjoint() * dl.col(c)).value()) /
                  (ul.col(c).norm() * dl.col(c).norm());
    }
    acc += per_pair / cfg.n_c;
  }
  REQUIRE(acc / n_pairs < 0.5);
}

TEST_CASE("normalize_channel") {
  SECTION("direct 1x2 example") {
    Eigen::MatrixXcd h(1, 2);
    h << 3.0, 4.0;
    const Eigen::MatrixXcd out = normalize_channel(h);
    REQUIRE(out(0, 0).real() == Catch::Approx(3.0 / 5.0 * std::sqrt(2.0)).epsilon(1e-12));
    REQUIRE(out(0, 1).real() == Catch::Approx(4.0 / 5.0 * std::sqrt(2.0)).epsilon(1e-12));
    REQUIRE(out.squaredNorm() == Catch::Approx(2.0).epsilon(1e-10));
  }
  SECTION("idempotent and scale invariant") {
    const auto [ul, dl] = generate_channel_pair(tiny(), 5);
    const Eigen::MatrixXcd n1 = normalize_channel(dl);
    REQUIRE(n1.squaredNorm() ==
            Catch::Approx(static_cast<double>(dl.size())).epsilon(1e-10));
    REQUIRE((normalize_channel(n1) - n1).norm() < 1e-10 * n1.norm());
    REQUIRE((normalize_channel(3.7 * dl) - n1).norm() < 1e-10 * n1.norm());
  }
  SECTION("zero matrix is rejected") {
    const Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(4, 4);
    REQUIRE_THROWS_AS(normalize_channel(z), std::domain_error);
  }
}

TEST_CASE("add_noise") {
  const ScenarioConfig cfg = tiny();
  const auto [ul, dl] = generate_channel_pair(cfg, 9);
  const Eigen::MatrixXcd h = normalize_channel(ul);

  SECTION("infinite SNR returns the input") {
    REQUIRE(add_noise(h, kNoiselessSnrDb, 1) == h);
  }
  SECTION("zero channel stays zero") {
    const Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(4, 4);
    REQUIRE(add_noise(z, 10.0, 1) == z);
  }
  SECTION("deterministic per seed") {
    REQUIRE(add_noise(h, 10.0, 5) == add_noise(h, 10.0, 5));
    REQUIRE(add_noise(h, 10.0, 5) != add_noise(h, 10.0, 6));
  }
  SECTION("empirical SNR matches the target within 2%") {
    const double h_power = h.squaredNorm();
    double ratio_acc = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
      const Eigen::MatrixXcd noisy = add_noise(h, 10.0, 1000 + t);
      ratio_acc += h_power / (noisy - h).squaredNorm();
    }
    REQUIRE(ratio_acc / trials == Catch::Approx(10.0).epsilon(0.02));
  }
}

TEST_CASE("scenario validation") {
  ScenarioConfig cfg = tiny();
  cfg.f_dl = cfg.f_ul;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny();
  cfg.n_paths = 0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny();
  cfg.bandwidth = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("dataset pipeline produces normalized rows") {
  const ScenarioConfig cfg = tiny();
  const ChannelDataset ds = make_dataset(cfg, 8, 4, 10.0, 10.0);
  REQUIRE(ds.ul_noisy.rows() == 8);
  REQUIRE(ds.dl_true.rows() == 4);
  const double target = static_cast<double>(cfg.grid().flat_size());
  for (int i = 0; i < 8; ++i) {
    REQUIRE(ds.ul_noisy.row(i).squaredNorm() == Catch::Approx(target).epsilon(1e-10));
  }
  for (int i = 0; i < 4; ++i) {
    REQUIRE(ds.dl_true.row(i).squaredNorm() == Catch::Approx(target).epsilon(1e-10));
    REQUIRE(ds.dl_noisy.row(i).squaredNorm() == Catch::Approx(target).epsilon(1e-10));
  }
}
