// dpvae: train, evaluate, sample from and traverse decoupled-prior VAEs.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpvae/config.hpp"
#include "dpvae/errors.hpp"
#include "dpvae/format.hpp"
#include "dpvae/report.hpp"
#include "dpvae/train.hpp"

namespace fs = std::filesystem;
using namespace dpvae;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(parse_double(tok));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Index>(vals.size()));
}

Matrix reference_points(const Checkpoint& ck, const std::string& path) {
  return path.empty() ? checkpoint_data(ck).train.points : read_points_csv(path);
}

int run_train(const std::string& config_path, const std::string& out_override, long log_every) {
  TrainConfig cfg = load_train_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  const DataSplit data = make_split(cfg.dataset, cfg.seed);
  write_csv(data.train, dir / "train.csv");
  write_csv(data.heldout, dir / "heldout.csv");

  TrainResult r = train(cfg, [&](long it, const LossBreakdown& l) {
    if (log_every > 0 && (it % log_every == 0 || it + 1 == cfg.iterations)) {
      std::cerr << "iter " << it << " total " << l.total << " recon " << l.recon << " kl " << l.kl << " extra "
                << l.extra << '\n';
    }
  });
  save_checkpoint(r.checkpoint, dir / "checkpoint.txt");
  write_runlog_csv(r.log, dir / "runlog.csv");
  std::cout << (dir / "checkpoint.txt").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoupled-prior VAE toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long log_every = 1000;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON config");
  train_cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_dir, "Override output_dir");
  train_cmd->add_option("--log-every", log_every, "Progress interval (0 disables)");

  std::string ckpt_path;
  std::string data_path;
  std::string reference_path;
  std::string out_path;
  MetricSpec mspec;
  std::string flag = "base";
  auto* eval_cmd = app.add_subcommand("eval", "Compute the metric report");
  eval_cmd->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_path, "Held-out points CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--reference", reference_path, "Aggregate-posterior points CSV (default: training split)");
  eval_cmd->add_option("--skl-n", mspec.skl_n)->capture_default_str();
  eval_cmd->add_option("--nll-n", mspec.nll_n)->capture_default_str();
  eval_cmd->add_option("--leak-n", mspec.leak_n)->capture_default_str();
  eval_cmd->add_option("--mmd-n", mspec.mmd_n)->capture_default_str();
  eval_cmd->add_option("--tau", mspec.taus, "Leakage thresholds")->capture_default_str();
  eval_cmd->add_option("--seed", mspec.seed)->capture_default_str();
  eval_cmd->add_option("--flag", flag, "Leakage flag density")->check(CLI::IsMember({"base", "cov"}));
  eval_cmd->add_option("--out", out_path, "Output CSV (default metrics.csv)");

  std::string mode;
  Index n = 1000;
  Index k = 0;
  std::uint64_t seed = 0;
  auto* gen_cmd = app.add_subcommand("generate", "Decode prior, LP or HP samples");
  gen_cmd->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--mode", mode)->required()->check(CLI::IsMember({"random", "lp", "hp"}));
  gen_cmd->add_option("--n", n, "Samples (random) or pool size (lp/hp)")->capture_default_str();
  gen_cmd->add_option("--k", k, "Lowest-ranked samples kept (lp/hp)");
  gen_cmd->add_option("--seed", seed)->capture_default_str();
  gen_cmd->add_option("--reference", reference_path);
  gen_cmd->add_option("--out", out_path, "Output CSV (default samples.csv)");

  std::string tmode;
  std::string za;
  std::string zb;
  std::string xin;
  Index dim = 0;
  double sigmas = 5.0;
  Index steps = 11;
  auto* trav_cmd = app.add_subcommand("traverse", "Decode a latent path");
  trav_cmd->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  trav_cmd->add_option("--mode", tmode)->required()->check(CLI::IsMember({"pair", "factor"}));
  trav_cmd->add_option("--za", za, "pair: start latent, comma separated");
  trav_cmd->add_option("--zb", zb, "pair: end latent, comma separated");
  trav_cmd->add_option("--x", xin, "factor: data point, comma separated");
  trav_cmd->add_option("--dim", dim, "factor: rank of the dimension by aggregate std");
  trav_cmd->add_option("--sigmas", sigmas)->capture_default_str();
  trav_cmd->add_option("--steps", steps)->capture_default_str();
  trav_cmd->add_option("--reference", reference_path);
  trav_cmd->add_option("--out", out_path, "Output CSV (default latents.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) return run_train(config_path, out_dir, log_every);

    const Checkpoint ck = load_checkpoint(ckpt_path);
    if (eval_cmd->parsed()) {
      mspec.flag = flag == "cov" ? LeakageFlag::change_of_variables : LeakageFlag::base_at_h;
      const MetricReport rep = evaluate(ck, reference_points(ck, reference_path), read_points_csv(data_path), mspec);
      write_metrics_csv(rep, out_path.empty() ? "metrics.csv" : out_path);
      for (const auto& r : rep) std::cout << r.name << ' ' << r.metric.value << " +- " << r.metric.std_error << '\n';
    } else if (gen_cmd->parsed()) {
      const GenerateMode gm = parse_generate_mode(mode);
      const Index count = gm == GenerateMode::random ? n : (k > 0 ? k : n);
      const GeneratedSamples s = generate(ck, reference_points(ck, reference_path), count, gm, seed, n);
      write_samples_csv(s, out_path.empty() ? "samples.csv" : out_path);
    } else if (trav_cmd->parsed()) {
      LatentPath p;
      if (tmode == "pair") {
        if (za.empty() || zb.empty()) throw ArgumentError("pair traversal needs --za and --zb");
        p = latent_traverse(ck, parse_vector(za), parse_vector(zb), steps);
      } else {
        if (xin.empty()) throw ArgumentError("factor traversal needs --x");
        p = factor_traverse(ck, reference_points(ck, reference_path), parse_vector(xin), dim, sigmas, steps);
      }
      write_latents_csv(p, out_path.empty() ? "latents.csv" : out_path);
    }
    return 0;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
