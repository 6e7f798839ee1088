#include "srcgeo/app.hpp"
#include "srcgeo/lab.hpp"
#include "srcgeo/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace srcgeo;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, path + ": " + e.what());
  }
}

bool flag_present(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

/// Turns a JSON config into flag tokens for every key not already given on
/// the command line. "train_config" is kept aside as the TrainConfig base.
std::vector<std::string> config_tokens(const nlohmann::json& config,
                                       const std::vector<std::string>& given,
                                       nlohmann::json& train_config) {
  if (!config.is_object()) throw Error(ErrorCode::parse, "--config must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : config.items()) {
    if (key == "train_config") {
      train_config = value;
      continue;
    }
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag_present(given, flag)) continue;
    tokens.push_back(flag);
    if (value.is_array()) {
      for (const auto& item : value) tokens.push_back(scalar_text(item));
    } else {
      tokens.push_back(scalar_text(value));
    }
  }
  return tokens;
}

struct TrainFlags {
  CLI::Option* epochs = nullptr;
  CLI::Option* steps = nullptr;
  CLI::Option* batch = nullptr;
  CLI::Option* lr = nullptr;
  CLI::Option* embed_dim = nullptr;
  int epochs_v = 0, steps_v = 0, batch_v = 0;
  double lr_v = 0;
  long embed_dim_v = 0;

  void add(CLI::App* cmd) {
    epochs = cmd->add_option("--epochs", epochs_v, "training epochs");
    steps = cmd->add_option("--steps-per-epoch", steps_v, "gradient steps per epoch");
    batch = cmd->add_option("--per-class-batch", batch_v, "samples per class in each batch");
    lr = cmd->add_option("--lr", lr_v, "learning rate");
    embed_dim = cmd->add_option("--embed-dim", embed_dim_v, "embedding dimension (0: input dimension)");
  }
  void apply(TrainConfig& c) const {
    if (epochs->count()) c.epochs = epochs_v;
    if (steps->count()) c.steps_per_epoch = steps_v;
    if (batch->count()) c.per_class_batch = batch_v;
    if (lr->count()) c.learning_rate = lr_v;
    if (embed_dim->count()) c.embed_dim = embed_dim_v;
  }
};

int run(std::vector<std::string> args) {
  CLI::App app{"Sparse-representation classification and embedding geometry toolkit", "srcgeo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "srcgeo 1.0");

  std::string config_path;
  nlohmann::json train_config_json;

  // classify
  auto* classify = app.add_subcommand("classify", "fixed SRC on a dictionary and a test set");
  std::string c_dict, c_test, c_out, c_report, c_encoder;
  int c_sparsity = 0;
  classify->add_option("--dictionary", c_dict, "dictionary embeddings CSV")->required();
  classify->add_option("--test", c_test, "test embeddings CSV")->required();
  auto* c_s = classify->add_option("-s,--sparsity", c_sparsity, "OMP sparsity (default 30, clamped)");
  classify->add_option("--encoder", c_encoder, "encoder checkpoint applied to both inputs");
  classify->add_option("-o,--out", c_out, "predictions CSV (default stdout)");
  classify->add_option("--report", c_report, "evaluation JSON");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "effective rank, Cohesion_max and principal angles");
  std::string d_input, d_out, d_encoder;
  long d_dim = 0;
  diag->add_option("--input", d_input, "embeddings CSV")->required();
  auto* d_d = diag->add_option("-d,--dim", d_dim, "subspace dimension (default: smallest centered rank)");
  diag->add_option("--encoder", d_encoder, "encoder checkpoint applied first");
  diag->add_option("-o,--out", d_out, "JSON output (default stdout)");

  // train
  auto* train = app.add_subcommand("train", "train a linear encoder");
  std::string t_input, t_checkpoint, t_trace, t_kind = "geometry";
  std::uint64_t t_seed = 0;
  TrainFlags t_flags;
  train->add_option("--input", t_input, "raw features CSV")->required();
  train->add_option("--checkpoint", t_checkpoint, "encoder checkpoint JSON")->required();
  train->add_option("--trace", t_trace, "loss trace CSV");
  train->add_option("--kind", t_kind, "geometry or ce")->check(CLI::IsMember({"geometry", "ce"}));
  auto* t_seed_opt = train->add_option("--seed", t_seed, "random seed");
  t_flags.add(train);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "(mu, lambda) grid over seeds");
  std::string sw_train, sw_test, sw_out;
  std::vector<double> sw_mu{0.1, 1, 10, 100}, sw_lambda{0.001, 0.01, 0.1};
  std::vector<std::uint64_t> sw_seeds{0};
  int sw_sparsity = 0;
  TrainFlags sw_flags;
  sweep->add_option("--train", sw_train, "raw training CSV (also the SRC dictionary)")->required();
  sweep->add_option("--test", sw_test, "raw held-out CSV")->required();
  sweep->add_option("--mu", sw_mu, "mask penalty grid")->capture_default_str();
  sweep->add_option("--lambda", sw_lambda, "ridge grid")->capture_default_str();
  sweep->add_option("--seeds", sw_seeds, "seeds")->capture_default_str();
  auto* sw_s = sweep->add_option("-s,--sparsity", sw_sparsity, "OMP sparsity (default 30, clamped)");
  sweep->add_option("-o,--out", sw_out, "CSV output (default stdout)");
  sw_flags.add(sweep);

  // verify
  auto* verify = app.add_subcommand("verify", "randomized theorem suite");
  int v_trials = 1000;
  std::uint64_t v_seed = 0;
  std::string v_out;
  verify->add_option("--trials", v_trials, "instances per statement")->capture_default_str();
  verify->add_option("--seed", v_seed, "random seed")->capture_default_str();
  verify->add_option("-o,--out", v_out, "JSON lines output (default stdout)");

  // generate
  auto* gen = app.add_subcommand("generate", "synthetic union-of-subspaces embeddings");
  UnionDatasetConfig g;
  std::string g_dict, g_test;
  gen->add_option("--classes", g.classes)->capture_default_str();
  gen->add_option("--ambient-dim", g.ambient_dim)->capture_default_str();
  gen->add_option("--subspace-dim", g.subspace_dim)->capture_default_str();
  gen->add_option("--angle", g.angle, "principal angle between every class pair (rad)")->capture_default_str();
  gen->add_option("--train-per-class", g.train_per_class)->capture_default_str();
  gen->add_option("--test-per-class", g.test_per_class)->capture_default_str();
  gen->add_option("--noise", g.noise, "Gaussian noise std per coordinate")->capture_default_str();
  gen->add_option("--seed", g.seed)->capture_default_str();
  gen->add_option("--dictionary-out", g_dict, "dictionary CSV")->required();
  gen->add_option("--test-out", g_test, "test CSV")->required();

  for (auto* cmd : {classify, diag, train, sweep, verify, gen})
    cmd->add_option("--config", config_path, "JSON file whose keys mirror the long flags");

  // Splice the config file in as flags so explicit flags win.
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    if (path.empty()) continue;
    const auto tokens = config_tokens(read_json(path), args, train_config_json);
    args.insert(args.end(), tokens.begin(), tokens.end());
    break;
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "srcgeo: usage error: " << e.what() << '\n';
    return 2;
  }

  auto base_train_config = [&] {
    TrainConfig c;
    if (!train_config_json.is_null()) c = train_config_json.get<TrainConfig>();
    return c;
  };

  if (*classify) {
    LabeledEmbeddingSet dict = load_embedding_csv(c_dict);
    LabeledEmbeddingSet test = load_embedding_csv(c_test);
    if (!c_encoder.empty()) {
      const LinearEncoder enc = encoder_from_checkpoint(load_checkpoint(c_encoder));
      dict = enc.embed(dict);
      test = enc.embed(test);
    }
    dict = l2_normalize(dict);
    const int s = resolve_sparsity(c_s->count() ? std::optional<int>(c_sparsity) : std::nullopt,
                                   dict.dim(), dict.size());
    const EvaluationReport report = evaluate(dict, test, s);
    for (const auto& w : report.warnings) std::cerr << "srcgeo: warning: " << w << '\n';
    write_output(c_out, format_predictions_csv(report, dict));
    if (!c_report.empty()) write_output(c_report, evaluation_json(report).dump(2) + '\n');
    return 0;
  }

  if (*diag) {
    LabeledEmbeddingSet set = load_embedding_csv(d_input);
    if (!d_encoder.empty()) set = encoder_from_checkpoint(load_checkpoint(d_encoder)).embed(set);
    const Diagnostics result =
        diagnose(set, d_d->count() ? std::optional<Index>(d_dim) : std::nullopt);
    write_output(d_out, diagnostics_json(result).dump(2) + '\n');
    return 0;
  }

  if (*train) {
    const LabeledEmbeddingSet data = load_embedding_csv(t_input);
    TrainConfig config = base_train_config();
    t_flags.apply(config);
    if (t_seed_opt->count()) config.seed = t_seed;
    if (t_kind == "ce") {
      const CeResult result = train_ce_reference(data, config);
      const double final_loss = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
      save_checkpoint(t_checkpoint, checkpoint_json(result.encoder, config, final_loss, "ce"));
      if (!t_trace.empty()) {
        std::string csv = "step,ce_loss\n";
        for (std::size_t i = 0; i < result.loss_trace.size(); ++i)
          csv += std::to_string(i) + ',' + format_number(result.loss_trace[i]) + '\n';
        write_output(t_trace, csv);
      }
      std::cout << "kind=ce steps=" << result.loss_trace.size() << " final_loss=" << format_number(final_loss)
                << " head_train_accuracy=" << format_number(result.head_train_accuracy) << '\n';
      return 0;
    }
    TrainResult result;
    try {
      result = train_linear_encoder(data, config);
    } catch (const DivergenceError& e) {
      if (!t_trace.empty()) write_output(t_trace, format_loss_trace(e.trace()));
      throw;
    }
    const double final_loss = result.trace.empty() ? 0.0 : result.trace.back().total;
    save_checkpoint(t_checkpoint, checkpoint_json(result.encoder, config, final_loss, "geometry"));
    if (!t_trace.empty()) write_output(t_trace, format_loss_trace(result.trace));
    std::cout << "kind=geometry steps=" << result.trace.size() << " final_loss=" << format_number(final_loss)
              << '\n';
    return 0;
  }

  if (*sweep) {
    SweepSpec grid;
    grid.mus = sw_mu;
    grid.lambdas = sw_lambda;
    grid.seeds = sw_seeds;
    grid.sparsity = sw_s->count() ? std::optional<int>(sw_sparsity) : std::nullopt;
    grid.base = base_train_config();
    sw_flags.apply(grid.base);
    const auto rows = run_sweep(load_embedding_csv(sw_train), load_embedding_csv(sw_test), grid);
    for (const auto& r : rows)
      if (!r.error.empty())
        std::cerr << "srcgeo: warning: cell mu=" << format_number(r.mu) << " lambda="
                  << format_number(r.lambda) << " seed=" << r.seed << " failed: " << r.error << '\n';
    write_output(sw_out, format_sweep_csv(rows));
    return 0;
  }

  if (*verify) {
    const auto results = run_theorem_suite(v_trials, v_seed);
    std::string out;
    int violations = 0;
    for (const auto& r : results) {
      out += to_json(r).dump() + '\n';
      violations += r.violations;
    }
    write_output(v_out, out);
    return violations ? 1 : 0;
  }

  if (*gen) {
    const UnionDataset data = generate_union_dataset(g);
    save_embedding_csv(data.train, g_dict);
    save_embedding_csv(data.test, g_test);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const srcgeo::Error& e) {
    std::cerr << "srcgeo: " << srcgeo::to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "srcgeo: error: " << e.what() << '\n';
    return 2;
  }
}
