#include "dpvae/report.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "dpvae/errors.hpp"
#include "dpvae/format.hpp"

namespace dpvae {

namespace {

void check_data(const Checkpoint& ckpt, const Matrix& data, std::string_view what) {
  if (data.rows() == 0) throw LoadError(std::string(what) + " is empty");
  if (data.cols() != ckpt.model.data_dim()) {
    throw LoadError(std::string(what) + " has " + std::to_string(data.cols()) + " columns, model expects " +
                    std::to_string(ckpt.model.data_dim()));
  }
}

std::string tau_name(double tau) { return "leakage_tau=" + format_double(tau); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  return out;
}

}  // namespace

MetricReport evaluate(const Checkpoint& ckpt, const Matrix& reference, const Matrix& heldout, const MetricSpec& spec) {
  check_data(ckpt, reference, "reference data");
  check_data(ckpt, heldout, "held-out data");
  const VaeModel& m = ckpt.model;
  MetricReport report;
  report.push_back({"skl", skl(m, reference, spec.skl_n, spec.seed)});
  if (spec.run_nll) report.push_back({"nll", nll_importance(m, heldout, spec.nll_n, spec.seed)});
  const LeakageDraws draws = leakage_draws(m, aggregate_posterior(m, reference), spec.leak_n, spec.seed, spec.flag);
  for (double tau : spec.taus) report.push_back({tau_name(tau), leakage_score(draws, tau)});
  report.push_back({"sample_quality_mmd", sample_quality_mmd(m, heldout, spec.mmd_n, spec.seed)});
  return report;
}

GenerateMode parse_generate_mode(std::string_view text) {
  if (text == "random") return GenerateMode::random;
  if (text == "lp" || text == "low-posterior") return GenerateMode::low_posterior;
  if (text == "hp" || text == "high-posterior") return GenerateMode::high_posterior;
  throw ArgumentError("unknown generate mode: " + std::string(text));
}

GeneratedSamples generate(const Checkpoint& ckpt, const Matrix& reference, Index n, GenerateMode mode,
                          std::uint64_t seed, Index pool) {
  if (n < 1) throw ArgumentError("generate needs n >= 1");
  check_data(ckpt, reference, "reference data");
  const VaeModel& m = ckpt.model;
  GeneratedSamples out;
  switch (mode) {
    case GenerateMode::random: {
      Rng rng = substream(seed, "generate");
      out.z = sample_prior(m, n, rng);
      break;
    }
    case GenerateMode::low_posterior:
      out.z = low_posterior_samples(m, reference, pool > 0 ? pool : 10 * n, n, seed).z;
      break;
    case GenerateMode::high_posterior:
      out.z = high_posterior_samples(m, reference, pool > 0 ? pool : 10 * n, n, seed).z;
      break;
  }
  out.x = decode_values(m, out.z);
  out.log_q = aggregate_posterior_log_density(aggregate_posterior(m, reference), out.z);
  out.log_p = prior_log_density(m, out.z);
  return out;
}

namespace {

void check_endpoints(const Checkpoint& ckpt, const Eigen::VectorXd& a, const Eigen::VectorXd& b, Index steps) {
  if (steps < 2) throw ArgumentError("traversal needs steps >= 2");
  const Index L = ckpt.model.latent_dim();
  if (a.size() != L || b.size() != L) throw ShapeError("traversal endpoints must have latent dimension");
}

Matrix lerp_rows(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, Index steps) {
  Matrix out(steps, a.size());
  for (Index i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    out.row(i) = (1.0 - t) * a + t * b;
  }
  return out;
}

LatentPath finish(const VaeModel& m, Matrix z) {
  LatentPath p;
  p.x = decode_values(m, z);
  p.log_p = prior_log_density(m, z);
  p.z = std::move(z);
  return p;
}

}  // namespace

LatentPath straight_traverse(const Checkpoint& ckpt, const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b,
                             Index steps) {
  check_endpoints(ckpt, z_a, z_b, steps);
  return finish(ckpt.model, lerp_rows(z_a.transpose(), z_b.transpose(), steps));
}

LatentPath latent_traverse(const Checkpoint& ckpt, const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b,
                           Index steps) {
  check_endpoints(ckpt, z_a, z_b, steps);
  const VaeModel& m = ckpt.model;
  if (!m.prior) return straight_traverse(ckpt, z_a, z_b, steps);
  Matrix ends(2, z_a.size());
  ends.row(0) = z_a.transpose();
  ends.row(1) = z_b.transpose();
  const Matrix w = m.prior->forward_values(m.params, ends);
  Matrix z = m.prior->inverse_values(m.params, lerp_rows(w.row(0), w.row(1), steps));
  // The inverse reproduces the endpoints only to rounding; pin them.
  z.row(0) = z_a.transpose();
  z.row(steps - 1) = z_b.transpose();
  return finish(m, std::move(z));
}

std::vector<Index> dims_by_std(const AggregatePosterior& agg) {
  const Eigen::VectorXd sd = aggregate_posterior_std(agg);
  std::vector<Index> order(static_cast<std::size_t>(sd.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sd(a) > sd(b); });
  return order;
}

LatentPath factor_traverse(const Checkpoint& ckpt, const Matrix& reference, const Eigen::VectorXd& x, Index dim,
                           double sigmas, Index steps) {
  const VaeModel& m = ckpt.model;
  if (dim < 0 || dim >= m.latent_dim()) throw ArgumentError("factor_traverse dim out of range");
  if (steps < 1) throw ArgumentError("factor_traverse needs steps >= 1");
  if (sigmas < 0) throw ArgumentError("factor_traverse needs sigmas >= 0");
  if (x.size() != m.data_dim()) throw ShapeError("factor_traverse input must have data dimension");
  check_data(ckpt, reference, "reference data");

  const AggregatePosterior agg = aggregate_posterior(m, reference);
  const Index coord = dims_by_std(agg)[static_cast<std::size_t>(dim)];
  const double half = sigmas * aggregate_posterior_std(agg)(coord);

  Matrix mu;
  Matrix log_var;
  encode_values(m, x.transpose(), mu, log_var);
  Matrix z = mu.replicate(steps, 1);
  for (Index i = 0; i < steps; ++i) {
    const double u = steps == 1 ? 0.0 : 2.0 * static_cast<double>(i) / static_cast<double>(steps - 1) - 1.0;
    z(i, coord) += u * half;
  }
  return finish(m, std::move(z));
}

void write_metrics_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "name,value,stderr,n,seed\n";
  for (const auto& r : report) {
    out << r.name << ',' << format_double(r.metric.value) << ',' << format_double(r.metric.std_error) << ','
        << r.metric.n << ',' << r.metric.seed << '\n';
  }
}

void write_samples_csv(const GeneratedSamples& s, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  for (Index j = 0; j < s.x.cols(); ++j) out << 'x' << j + 1 << ',';
  out << "log_q,log_p\n";
  for (Index i = 0; i < s.x.rows(); ++i) {
    for (Index j = 0; j < s.x.cols(); ++j) out << format_double(s.x(i, j)) << ',';
    out << format_double(s.log_q(i)) << ',' << format_double(s.log_p(i)) << '\n';
  }
}

void write_latents_csv(const LatentPath& p, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "step";
  for (Index j = 0; j < p.z.cols(); ++j) out << ",z" << j + 1;
  for (Index j = 0; j < p.x.cols(); ++j) out << ",x" << j + 1;
  out << ",log_p\n";
  for (Index i = 0; i < p.z.rows(); ++i) {
    out << i;
    for (Index j = 0; j < p.z.cols(); ++j) out << ',' << format_double(p.z(i, j));
    for (Index j = 0; j < p.x.cols(); ++j) out << ',' << format_double(p.x(i, j));
    out << ',' << format_double(p.log_p(i)) << '\n';
  }
}

void write_runlog_csv(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "iter,total,recon,kl,extra\n";
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const LossBreakdown& r = log.rows[i];
    out << i << ',' << format_double(r.total) << ',' << format_double(r.recon) << ',' << format_double(r.kl) << ','
        << format_double(r.extra) << '\n';
  }
}

}  // namespace dpvae
