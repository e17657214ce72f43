#pragma once

// Offline training pipeline and artifact store. Orders the stages the way the
// deployed system must: PCA on noisy uplink channels, sparsify -> densify of
// the component basis at the configured eta (so bit allocation and codebooks
// are learned against the basis the UE will actually reconstruct), greedy bit
// allocation per feedback length, codebook construction, then persistence
// with fingerprints so encode/decode can refuse mismatched artifact sets.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "csifb/bit_alloc.hpp"
#include "csifb/channel.hpp"
#include "csifb/codec.hpp"
#include "csifb/container.hpp"
#include "csifb/eval.hpp"
#include "csifb/offload.hpp"
#include "csifb/pca.hpp"
#include "csifb/quantizer.hpp"

namespace csifb {

struct TrainOptions {
  std::vector<int> b_list;
  double eta = 16.0;
  OracleMode oracle = OracleMode::kEmpirical;
  Codebook::Variant variant = Codebook::Variant::kShared;
  std::uint64_t seed = 1;
  KmeansConfig kmeans;
};

struct TrainedStack {
  PcaModel pca;
  SparsifiedModel sparse;  // complex64-exact offload representation
  Eigen::MatrixXcd v_hat;  // densified basis, n_transform columns
  int n_transform = 0;
  std::vector<BitAllocation> allocations;  // aligned with b_list
  std::vector<Codebook> codebooks;
  std::vector<CodecState> states;
  json manifest;
};

// N_P never exceeds B, so transforming min(rank, max B) components is enough
// for every allocation in the list.
inline int transform_width(const PcaModel& pca, const std::vector<int>& b_list) {
  int b_max = 0;
  for (int b : b_list) b_max = std::max(b_max, b);
  return std::min(pca.rank(), b_max);
}

inline TrainedStack train_stack(const Eigen::MatrixXcd& training_rows, GridDims dims,
                                const TrainOptions& opts) {
  if (opts.b_list.empty()) throw std::invalid_argument("train: empty B list");
  for (std::size_t i = 1; i < opts.b_list.size(); ++i) {
    if (opts.b_list[i] <= opts.b_list[i - 1]) {
      throw std::invalid_argument("train: B list must be strictly increasing");
    }
  }

  TrainedStack st;
  st.pca = fit_pca(training_rows, dims);
  st.n_transform = transform_width(st.pca, opts.b_list);

  // The offloaded representation is float32; rounding before densify makes
  // the BS-side basis identical to what a UE rebuilds from the offload file.
  st.sparse = sparsify(st.pca, st.n_transform, opts.eta);
  quantize_offload(st.sparse);
  for (;;) {
    try {
      st.v_hat = densify(st.sparse);
      break;
    } catch (const RankCollapseError& e) {
      if (e.column() == 0) throw;
      // Keep the orthonormalizable prefix and retry.
      st.n_transform = e.column();
      st.sparse.n_p = st.n_transform;
      st.sparse.positions.resize(st.n_transform);
      st.sparse.values.resize(st.n_transform);
    }
  }

  const Eigen::MatrixXcd centered = training_rows.rowwise() - st.pca.mean;
  const Eigen::MatrixXcd g_hat = centered * st.v_hat;

  DistortionOracle oracle = [&]() {
    if (opts.oracle == OracleMode::kAnalytic || g_hat.cols() == 0) {
      Eigen::VectorXd variances(g_hat.cols());
      const double denom = std::max<double>(1.0, static_cast<double>(g_hat.rows()) - 1);
      for (Eigen::Index n = 0; n < g_hat.cols(); ++n) {
        variances(n) = g_hat.col(n).squaredNorm() / denom;
      }
      return DistortionOracle::analytic(std::move(variances));
    }
    return DistortionOracle::empirical(g_hat, derive_seed(opts.seed, 0x6f7261ULL),
                                       opts.kmeans);
  }();

  st.manifest = {{"kind", "train_manifest"},
                 {"eta", opts.eta},
                 {"n_transform", st.n_transform},
                 {"oracle", opts.oracle == OracleMode::kAnalytic ? "analytic" : "empirical"},
                 {"codebook", opts.variant == Codebook::Variant::kShared ? "shared"
                                                                         : "per-component"},
                 {"seed", opts.seed},
                 {"b_list", opts.b_list},
                 {"model_ids", json::object()}};

  for (int b : opts.b_list) {
    BitAllocation alloc = b == 0 || st.n_transform == 0
                              ? BitAllocation{std::vector<int>(std::max(st.n_transform, 1), 0),
                                              0, {}, 0}
                              : allocate_bits(b, oracle);
    Codebook cb;
    if (alloc.latent_dim > 0) {
      const Eigen::MatrixXcd z_train = g_hat.leftCols(alloc.latent_dim);
      cb = opts.variant == Codebook::Variant::kShared
               ? build_shared(z_train, alloc, derive_seed(opts.seed, b, 1), opts.kmeans)
               : build_per_component(z_train, alloc, derive_seed(opts.seed, b, 2),
                                     opts.kmeans);
    } else {
      cb.variant = opts.variant;
      cb.alloc = alloc;
    }
    round_centers_to_c64(cb);
    CodecState state = make_codec_state(st.v_hat.leftCols(alloc.latent_dim), st.sparse.mean,
                                        dims, cb, alloc);
    st.manifest["model_ids"][std::to_string(b)] = state.model_id;
    st.allocations.push_back(std::move(alloc));
    st.codebooks.push_back(std::move(cb));
    st.states.push_back(std::move(state));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Artifact store layout under one directory:
//   pca_model.csfb      full-precision trained model
//   offload_model.csfb  sparsified complex64 offload
//   alloc_B<b>.json     bit allocation per feedback length
//   codebook_B<b>.csfb  codebook per feedback length
//   train_manifest.json fingerprints + configuration echo

inline std::string alloc_path(const std::string& dir, int b) {
  return dir + "/alloc_B" + std::to_string(b) + ".json";
}
inline std::string codebook_path(const std::string& dir, int b) {
  return dir + "/codebook_B" + std::to_string(b) + ".csfb";
}

inline void save_stack(const std::string& dir, const TrainedStack& st,
                       const std::vector<int>& b_list) {
  std::filesystem::create_directories(dir);
  save_pca(dir + "/pca_model.csfb", st.pca);
  save_sparsified(dir + "/offload_model.csfb", st.sparse);
  for (std::size_t i = 0; i < b_list.size(); ++i) {
    const int b = b_list[i];
    save_json_sidecar(alloc_path(dir, b), allocation_to_json(st.allocations[i], "", 0));
    save_codebook(codebook_path(dir, b), st.codebooks[i]);
  }
  save_json_sidecar(dir + "/train_manifest.json", st.manifest);
}

// Rebuilds the codec state for one feedback length from persisted artifacts,
// exactly as a UE would from the offloaded bytes. Refuses artifacts whose
// fingerprint disagrees with the training manifest.
inline CodecState load_codec_state(const std::string& dir, int b) {
  const json manifest = load_json(dir + "/train_manifest.json");
  const SparsifiedModel sparse = load_sparsified(dir + "/offload_model.csfb");
  const Eigen::MatrixXcd v_hat = densify(sparse);
  const BitAllocation alloc = allocation_from_json(load_json(alloc_path(dir, b)));
  const Codebook cb = load_codebook(codebook_path(dir, b));
  CodecState state = make_codec_state(v_hat.leftCols(alloc.latent_dim), sparse.mean,
                                      sparse.dims, cb, alloc);
  const auto& ids = manifest.at("model_ids");
  const std::string key = std::to_string(b);
  if (!ids.contains(key)) {
    throw MismatchError("model dir has no artifacts for B=" + key);
  }
  if (ids.at(key).get<std::uint64_t>() != state.model_id) {
    throw MismatchError("artifact fingerprint mismatch for B=" + key);
  }
  return state;
}

// Dataset persistence: one complex64 matrix container per set plus a JSON
// sidecar echoing the scenario and seeds.

inline void save_dataset(const std::string& dir, const ScenarioConfig& cfg,
                         const ChannelDataset& ds, double snr_ul_db, double snr_dl_db) {
  std::filesystem::create_directories(dir);
  auto save_matrix = [&](const std::string& name, const Eigen::MatrixXcd& m) {
    Container c;
    c.header = {{"kind", "channel_set"}, {"name", name}};
    c.add(make_array_c64("rows", m));
    c.save(dir + "/" + name + ".csfb");
  };
  save_matrix("train_ul_noisy", ds.ul_noisy);
  save_matrix("test_dl_true", ds.dl_true);
  save_matrix("test_dl_noisy", ds.dl_noisy);
  const json sidecar = {{"kind", "dataset_manifest"},
                        {"scenario",
                         {{"n_x", cfg.n_x},
                          {"n_y", cfg.n_y},
                          {"n_c", cfg.n_c},
                          {"f_ul", cfg.f_ul},
                          {"f_dl", cfg.f_dl},
                          {"bandwidth", cfg.bandwidth},
                          {"n_paths", cfg.n_paths},
                          {"max_delay", cfg.max_delay},
                          {"seed", cfg.seed}}},
                        {"n_train", ds.ul_noisy.rows()},
                        {"n_test", ds.dl_true.rows()},
                        {"snr_ul_db", snr_ul_db},
                        {"snr_dl_db", snr_dl_db}};
  save_json_sidecar(dir + "/dataset_manifest.json", sidecar);
}

inline Eigen::MatrixXcd load_channel_set(const std::string& path) {
  const Container c = Container::load(path);
  if (c.header.value("kind", "") != "channel_set") {
    throw MismatchError("not a channel_set container: " + path);
  }
  return array_to_complex_matrix(c.get("rows"));
}

inline ScenarioConfig scenario_from_json(const json& s) {
  ScenarioConfig cfg;
  cfg.n_x = s.at("n_x").get<int>();
  cfg.n_y = s.at("n_y").get<int>();
  cfg.n_c = s.at("n_c").get<int>();
  cfg.f_ul = s.at("f_ul").get<double>();
  cfg.f_dl = s.at("f_dl").get<double>();
  cfg.bandwidth = s.at("bandwidth").get<double>();
  cfg.n_paths = s.at("n_paths").get<int>();
  cfg.max_delay = s.at("max_delay").get<double>();
  cfg.seed = s.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

}  // namespace csifb
