// csifb: dataset generation, training, model offloading, encode/decode and
// evaluation sweeps for PCA-based variable-length CSI feedback.
//
// Exit codes: 0 success, 1 usage error, 2 data/model mismatch, 3 numerical
// failure.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "csifb/pipeline.hpp"

namespace {

using namespace csifb;

struct ScenarioFlags {
  std::string profile = "desk";
  int n_x = -1, n_y = -1, n_c = -1, n_paths = -1;
  double f_ul = -1, f_dl = -1, bandwidth = -1, max_delay = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;

  ScenarioConfig resolve() const {
    ScenarioConfig cfg = profile == "paper" ? ScenarioConfig::paper() : ScenarioConfig::desk();
    if (n_x > 0) cfg.n_x = n_x;
    if (n_y > 0) cfg.n_y = n_y;
    if (n_c > 0) cfg.n_c = n_c;
    if (n_paths > 0) cfg.n_paths = n_paths;
    if (f_ul > 0) cfg.f_ul = f_ul;
    if (f_dl > 0) cfg.f_dl = f_dl;
    if (bandwidth > 0) cfg.bandwidth = bandwidth;
    if (max_delay >= 0) cfg.max_delay = max_delay;
    if (seed_set) cfg.seed = seed;
    cfg.validate();
    return cfg;
  }

  int default_n_train() const { return profile == "paper" ? 5000 : 2000; }
  int default_n_test() const { return profile == "paper" ? 2000 : 500; }

  void attach(CLI::App* cmd) {
    cmd->add_option("--scenario", profile, "scenario profile")
        ->check(CLI::IsMember({"paper", "desk"}))
        ->capture_default_str();
    cmd->add_option("--nx", n_x, "antennas per UPA row");
    cmd->add_option("--ny", n_y, "antennas per UPA column");
    cmd->add_option("--nc", n_c, "subcarriers");
    cmd->add_option("--paths", n_paths, "multipath count L");
    cmd->add_option("--f-ul", f_ul, "uplink center frequency [Hz]");
    cmd->add_option("--f-dl", f_dl, "downlink center frequency [Hz]");
    cmd->add_option("--bandwidth", bandwidth, "channel bandwidth [Hz]");
    cmd->add_option("--max-delay", max_delay, "maximum path delay [s]");
    cmd->add_option("--seed", seed, "scenario RNG seed")
        ->each([this](const std::string&) { seed_set = true; });
  }
};

OracleMode parse_oracle(const std::string& s) {
  return s == "analytic" ? OracleMode::kAnalytic : OracleMode::kEmpirical;
}

Codebook::Variant parse_variant(const std::string& s) {
  return s == "shared" ? Codebook::Variant::kShared : Codebook::Variant::kPerComponent;
}

void require_increasing(const std::vector<int>& b_list) {
  for (std::size_t i = 0; i < b_list.size(); ++i) {
    if (b_list[i] < 0 || (i > 0 && b_list[i] <= b_list[i - 1])) {
      throw std::invalid_argument("--b-list must be strictly increasing non-negative integers");
    }
  }
}

Eigen::MatrixXcd load_training(const std::string& dataset_dir) {
  return load_channel_set(dataset_dir + "/train_ul_noisy.csfb");
}

GridDims dims_from_dataset(const std::string& dataset_dir) {
  const json m = load_json(dataset_dir + "/dataset_manifest.json");
  return scenario_from_json(m.at("scenario")).grid();
}

int cmd_generate(const ScenarioFlags& sf, int n_train, int n_test, double snr_ul,
                 double snr_dl, const std::string& out) {
  const ScenarioConfig cfg = sf.resolve();
  if (n_train < 0) n_train = sf.default_n_train();
  if (n_test < 0) n_test = sf.default_n_test();
  const ChannelDataset ds = make_dataset(cfg, n_train, n_test, snr_ul, snr_dl);
  save_dataset(out, cfg, ds, snr_ul, snr_dl);
  std::cout << "wrote dataset (" << n_train << " train, " << n_test << " test) to " << out
            << "\n";
  return 0;
}

int cmd_train(const ScenarioFlags& sf, const std::string& dataset_dir, int n_train,
              double snr_ul, const TrainOptions& opts, const std::string& out) {
  Eigen::MatrixXcd training;
  GridDims dims;
  json scenario_echo;
  if (!dataset_dir.empty()) {
    training = load_training(dataset_dir);
    const json m = load_json(dataset_dir + "/dataset_manifest.json");
    scenario_echo = m.at("scenario");
    dims = scenario_from_json(scenario_echo).grid();
  } else {
    const ScenarioConfig cfg = sf.resolve();
    if (n_train < 0) n_train = sf.default_n_train();
    training = make_training_set(cfg, n_train, snr_ul);
    dims = cfg.grid();
    scenario_echo = {{"n_x", cfg.n_x},       {"n_y", cfg.n_y},
                     {"n_c", cfg.n_c},       {"f_ul", cfg.f_ul},
                     {"f_dl", cfg.f_dl},     {"bandwidth", cfg.bandwidth},
                     {"n_paths", cfg.n_paths},{"max_delay", cfg.max_delay},
                     {"seed", cfg.seed}};
  }
  TrainedStack st = train_stack(training, dims, opts);
  st.manifest["scenario"] = scenario_echo;
  st.manifest["n_train"] = training.rows();
  save_stack(out, st, opts.b_list);
  std::cout << "trained model (rank " << st.pca.rank() << ", transformed "
            << st.n_transform << " components) to " << out << "\n";
  for (std::size_t i = 0; i < opts.b_list.size(); ++i) {
    std::cout << "  B=" << opts.b_list[i] << ": N_P=" << st.allocations[i].latent_dim
              << " b1=" << (st.allocations[i].bits.empty() ? 0 : st.allocations[i].bits[0])
              << " model_id=" << st.states[i].model_id << "\n";
  }
  return 0;
}

int cmd_offload(const std::string& model_dir, double eta, int n_p,
                const std::string& out) {
  const PcaModel pca = load_pca(model_dir + "/pca_model.csfb");
  if (n_p < 0) {
    const json manifest = load_json(model_dir + "/train_manifest.json");
    n_p = manifest.at("n_transform").get<int>();
  }
  SparsifiedModel sm = sparsify(pca, std::min(n_p, pca.rank()), eta);
  quantize_offload(sm);
  save_sparsified(out, sm);
  const auto n_a = static_cast<std::int64_t>(pca.dims.n_antennas());
  const std::int64_t params =
      count_model_params(n_a, pca.dims.n_c, sm.n_p, eta, ModelCountMode::kSparsified);
  const auto file_size = std::filesystem::file_size(out);
  std::cout << "offload: n_p=" << sm.n_p << " eta=" << eta << " kept="
            << sm.kept_per_component() << "/component\n"
            << "  real parameters: " << params << " (payload " << 4 * params
            << " bytes + framing)\n"
            << "  file size: " << file_size << " bytes\n";
  return 0;
}

int cmd_encode(const std::string& model_dir, int b, const std::string& dataset_dir,
               int index, const std::string& out) {
  const CodecState state = load_codec_state(model_dir, b);
  const Eigen::MatrixXcd rows = load_channel_set(dataset_dir + "/test_dl_noisy.csfb");
  if (index < 0 || index >= rows.rows()) {
    throw std::invalid_argument("--index out of range for test set");
  }
  const Eigen::MatrixXcd h =
      devectorize(rows.row(index), state.dims.n_antennas(), state.dims.n_c);
  const FeedbackFrame frame = encode(h, state);
  const auto bytes = serialize_frame(frame);
  std::ofstream f(out, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("cannot write frame: " + out);
  std::cout << "encoded user " << index << ": " << frame.bit_count << " bits, model_id "
            << frame.model_id << "\n";
  return 0;
}

int cmd_decode(const std::string& model_dir, int b, const std::string& frame_path,
               const std::string& out, const std::string& dataset_dir, int index) {
  const CodecState state = load_codec_state(model_dir, b);
  std::ifstream f(frame_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read frame: " + frame_path);
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(f),
                                  std::istreambuf_iterator<char>()};
  const Eigen::MatrixXcd h_hat = decode(parse_frame(bytes), state);
  if (!out.empty()) {
    Container c;
    c.header = {{"kind", "channel_set"}, {"name", "decoded"}};
    c.add(make_array_c64("rows", vectorize(h_hat)));
    c.save(out);
  }
  if (!dataset_dir.empty()) {
    const Eigen::MatrixXcd rows = load_channel_set(dataset_dir + "/test_dl_true.csfb");
    if (index < 0 || index >= rows.rows()) {
      throw std::invalid_argument("--index out of range for test set");
    }
    const Eigen::MatrixXcd h_true =
        devectorize(rows.row(index), state.dims.n_antennas(), state.dims.n_c);
    std::cout << "nmse=" << nmse(h_hat, h_true)
              << " cosine=" << cosine_similarity(h_hat, h_true) << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& model_dir, const std::string& dataset_dir,
                 std::vector<int> b_list, const MonteCarloConfig& mc,
                 const std::string& out) {
  const json manifest = load_json(model_dir + "/train_manifest.json");
  if (b_list.empty()) b_list = manifest.at("b_list").get<std::vector<int>>();
  std::vector<CodecState> states;
  for (int b : b_list) states.push_back(load_codec_state(model_dir, b));

  const Eigen::MatrixXcd test_true = load_channel_set(dataset_dir + "/test_dl_true.csfb");
  const Eigen::MatrixXcd test_noisy = load_channel_set(dataset_dir + "/test_dl_noisy.csfb");
  const GridDims dims = dims_from_dataset(dataset_dir);

  EvalReport report = run_monte_carlo(test_true, test_noisy, dims, states, mc);
  report.config_echo["model_dir"] = model_dir;
  report.config_echo["b_list"] = b_list;

  std::filesystem::create_directories(out);
  std::ofstream csv(out + "/report.csv");
  report.to_csv(csv);
  save_json_sidecar(out + "/report.json", report.summary());
  std::cout << report.summary()["per_b"].dump(2) << "\n";
  return 0;
}

int cmd_sweep(const ScenarioFlags& sf, const std::string& dataset_dir, int n_train,
              int n_test, double snr_ul, double snr_dl, std::vector<int> b_list,
              std::vector<double> eta_list, OracleMode oracle, Codebook::Variant variant,
              std::uint64_t train_seed, const MonteCarloConfig& mc,
              const std::string& out) {
  std::filesystem::create_directories(out);
  std::ofstream csv(out + "/sweep.csv");
  csv << "B,eta,median_nmse,mean_nmse,median_cosine,mean_sum_rate,stderr_sum_rate,"
         "n_p,model_params,codebook_params\n";
  json cells = json::array();
  if (b_list.empty() || eta_list.empty()) {  // empty grid: empty report
    save_json_sidecar(out + "/sweep.json", {{"cells", cells}});
    return 0;
  }
  require_increasing(b_list);

  Eigen::MatrixXcd training, test_true, test_noisy;
  GridDims dims;
  if (!dataset_dir.empty()) {
    training = load_training(dataset_dir);
    test_true = load_channel_set(dataset_dir + "/test_dl_true.csfb");
    test_noisy = load_channel_set(dataset_dir + "/test_dl_noisy.csfb");
    dims = dims_from_dataset(dataset_dir);
  } else {
    const ScenarioConfig cfg = sf.resolve();
    if (n_train < 0) n_train = sf.default_n_train();
    if (n_test < 0) n_test = sf.default_n_test();
    ChannelDataset ds = make_dataset(cfg, n_train, n_test, snr_ul, snr_dl);
    training = std::move(ds.ul_noisy);
    test_true = std::move(ds.dl_true);
    test_noisy = std::move(ds.dl_noisy);
    dims = cfg.grid();
  }

  for (double eta : eta_list) {
    TrainOptions opts;
    opts.b_list = b_list;
    opts.eta = eta;
    opts.oracle = oracle;
    opts.variant = variant;
    opts.seed = train_seed;
    const TrainedStack st = train_stack(training, dims, opts);
    const EvalReport report = run_monte_carlo(test_true, test_noisy, dims, st.states, mc);
    for (std::size_t i = 0; i < b_list.size(); ++i) {
      const int b = b_list[i];
      const auto nm = report.samples(b, &EvalReport::Row::nmse);
      const auto cs = report.samples(b, &EvalReport::Row::cosine);
      const auto sr = report.samples(b, &EvalReport::Row::sum_rate);
      const int n_p = st.allocations[i].latent_dim;
      const std::int64_t mp =
          n_p == 0 ? 0
                   : count_model_params(dims.n_antennas(), dims.n_c, n_p, eta,
                                        ModelCountMode::kSparsified);
      const std::int64_t cp = count_codebook_params(
          st.allocations[i], variant == Codebook::Variant::kShared
                                 ? CodebookCountMode::kShared
                                 : CodebookCountMode::kPerComponent);
      csv << b << ',' << eta << ',' << detail::quantile(nm, 0.5) << ',' << detail::mean(nm)
          << ',' << detail::quantile(cs, 0.5) << ',' << detail::mean(sr) << ','
          << detail::standard_error(sr) << ',' << n_p << ',' << mp << ',' << cp << '\n';
      cells.push_back({{"B", b},
                       {"eta", eta},
                       {"median_nmse", detail::quantile(nm, 0.5)},
                       {"mean_nmse", detail::mean(nm)},
                       {"median_cosine", detail::quantile(cs, 0.5)},
                       {"mean_sum_rate", detail::mean(sr)},
                       {"stderr_sum_rate", detail::standard_error(sr)},
                       {"n_p", n_p},
                       {"model_params", mp},
                       {"codebook_params", cp}});
    }
  }
  save_json_sidecar(out + "/sweep.json", {{"cells", cells}});
  std::cout << "sweep complete: " << cells.size() << " cells -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PCA-based variable-length CSI feedback"};
  app.set_config("--config", "", "read options from a key=value config file");
  app.require_subcommand(1);

  ScenarioFlags sf;
  std::string dataset_dir, model_dir, out_dir = "out", frame_path, out_file;
  int n_train = -1, n_test = -1, index = 0, b_single = 0, n_p = -1;
  double snr_ul = 10.0, snr_dl = 10.0, eta = 16.0;
  std::vector<int> b_list;
  std::vector<double> eta_list{16.0};
  std::string oracle_mode = "empirical", codebook_variant = "shared";
  std::uint64_t train_seed = 1;
  MonteCarloConfig mc;

  auto* generate = app.add_subcommand("generate", "generate a channel dataset");
  sf.attach(generate);
  generate->add_option("--n-train", n_train, "training users (default per profile)");
  generate->add_option("--n-test", n_test, "test users (default per profile)");
  generate->add_option("--snr-ul", snr_ul, "uplink estimation SNR [dB]")->capture_default_str();
  generate->add_option("--snr-dl", snr_dl, "downlink estimation SNR [dB]")->capture_default_str();
  generate->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "fit PCA, allocate bits, build codebooks");
  sf.attach(train);
  train->add_option("--dataset", dataset_dir, "dataset directory (else generated)");
  train->add_option("--n-train", n_train, "training users when generating");
  train->add_option("--snr-ul", snr_ul, "uplink estimation SNR [dB]")->capture_default_str();
  train->add_option("--b-list", b_list, "feedback lengths")->required();
  train->add_option("--eta", eta, "sparsification factor")->capture_default_str();
  train->add_option("--oracle", oracle_mode, "distortion oracle")
      ->check(CLI::IsMember({"analytic", "empirical"}))
      ->capture_default_str();
  train->add_option("--codebook", codebook_variant, "codebook variant")
      ->check(CLI::IsMember({"per-component", "shared"}))
      ->capture_default_str();
  train->add_option("--train-seed", train_seed, "k-means/allocation seed")
      ->capture_default_str();
  train->add_option("--out", out_dir, "artifact directory")->capture_default_str();

  auto* offload = app.add_subcommand("offload", "emit a sparsified model offload file");
  offload->add_option("--model-dir", model_dir, "trained artifact directory")->required();
  offload->add_option("--eta", eta, "sparsification factor")->capture_default_str();
  offload->add_option("--np", n_p, "components to offload (default: trained width)");
  offload->add_option("--out", out_file, "output file")->required();

  auto* encode_cmd = app.add_subcommand("encode", "encode one test channel into a frame");
  encode_cmd->add_option("--model-dir", model_dir)->required();
  encode_cmd->add_option("--b", b_single, "feedback length")->required();
  encode_cmd->add_option("--dataset", dataset_dir)->required();
  encode_cmd->add_option("--index", index, "test-set row")->capture_default_str();
  encode_cmd->add_option("--out", out_file, "frame file")->required();

  auto* decode_cmd = app.add_subcommand("decode", "decode a frame into a channel estimate");
  decode_cmd->add_option("--model-dir", model_dir)->required();
  decode_cmd->add_option("--b", b_single, "feedback length")->required();
  decode_cmd->add_option("--frame", frame_path, "frame file")->required();
  decode_cmd->add_option("--out", out_file, "decoded channel container");
  decode_cmd->add_option("--reference", dataset_dir, "dataset dir for ground-truth metrics");
  decode_cmd->add_option("--index", index, "test-set row")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo evaluation of a trained model");
  evaluate->add_option("--model-dir", model_dir)->required();
  evaluate->add_option("--dataset", dataset_dir)->required();
  evaluate->add_option("--b-list", b_list, "feedback lengths (default: trained list)");
  evaluate->add_option("--trials", mc.n_trials)->capture_default_str();
  evaluate->add_option("--k", mc.n_users, "users per trial")->capture_default_str();
  evaluate->add_option("--snr", mc.snr_db, "ZF transmit SNR [dB]")->capture_default_str();
  evaluate->add_option("--mc-seed", mc.seed)->capture_default_str();
  evaluate->add_option("--out", out_dir, "report directory")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "train + evaluate over a (B, eta) grid");
  sf.attach(sweep);
  sweep->add_option("--dataset", dataset_dir, "dataset directory (else generated)");
  sweep->add_option("--n-train", n_train);
  sweep->add_option("--n-test", n_test);
  sweep->add_option("--snr-ul", snr_ul)->capture_default_str();
  sweep->add_option("--snr-dl", snr_dl)->capture_default_str();
  sweep->add_option("--b-list", b_list, "feedback lengths");
  sweep->add_option("--eta-list", eta_list, "sparsification factors")->capture_default_str();
  sweep->add_option("--oracle", oracle_mode)
      ->check(CLI::IsMember({"analytic", "empirical"}))
      ->capture_default_str();
  sweep->add_option("--codebook", codebook_variant)
      ->check(CLI::IsMember({"per-component", "shared"}))
      ->capture_default_str();
  sweep->add_option("--train-seed", train_seed)->capture_default_str();
  sweep->add_option("--trials", mc.n_trials)->capture_default_str();
  sweep->add_option("--k", mc.n_users)->capture_default_str();
  sweep->add_option("--snr", mc.snr_db)->capture_default_str();
  sweep->add_option("--mc-seed", mc.seed)->capture_default_str();
  sweep->add_option("--out", out_dir, "report directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      return app.exit(e);
    }
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (generate->parsed()) {
      return cmd_generate(sf, n_train, n_test, snr_ul, snr_dl, out_dir);
    }
    if (train->parsed()) {
      require_increasing(b_list);
      TrainOptions opts;
      opts.b_list = b_list;
      opts.eta = eta;
      opts.oracle = parse_oracle(oracle_mode);
      opts.variant = parse_variant(codebook_variant);
      opts.seed = train_seed;
      return cmd_train(sf, dataset_dir, n_train, snr_ul, opts, out_dir);
    }
    if (offload->parsed()) return cmd_offload(model_dir, eta, n_p, out_file);
    if (encode_cmd->parsed()) {
      return cmd_encode(model_dir, b_single, dataset_dir, index, out_file);
    }
    if (decode_cmd->parsed()) {
      return cmd_decode(model_dir, b_single, frame_path, out_file, dataset_dir, index);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(model_dir, dataset_dir, b_list, mc, out_dir);
    }
    if (sweep->parsed()) {
      return cmd_sweep(sf, dataset_dir, n_train, n_test, snr_ul, snr_dl, b_list, eta_list,
                       parse_oracle(oracle_mode), parse_variant(codebook_variant),
                       train_seed, mc, out_dir);
    }
  } catch (const MismatchError& e) {
    std::cerr << "mismatch: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
