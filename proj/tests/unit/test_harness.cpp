#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpvae/config.hpp"
#include "dpvae/errors.hpp"
#include "dpvae/report.hpp"
#include "dpvae/train.hpp"

using namespace dpvae;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny(ObjectiveKind kind, PriorMode mode, long iterations = 20) {
  TrainConfig c = two_moons_config(kind, mode, 3);
  c.iterations = iterations;
  c.batch_size = 16;
  c.dataset.n_train = 128;
  c.dataset.n_heldout = 32;
  c.arch.hidden = {16, 8};
  c.arch.flow.width = 8;
  c.disc_width = 16;
  c.disc_layers = 2;
  return c;
}

bool params_equal(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.entry(i).name != b.entry(i).name || a.entry(i).value != b.entry(i).value) return false;
  }
  return true;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing: defaults, overrides, unknown keys, validation") {
  const TrainConfig c = parse_train_config(R"({"objective": "beta-B", "prior_mode": "decoupled", "gamma": 3})");
  CHECK(c.objective.kind == ObjectiveKind::beta_b);
  CHECK(c.objective.prior_mode == PriorMode::decoupled);
  CHECK(c.objective.gamma == 3.0);
  CHECK(c.objective.c_max == 25.0);
  CHECK(c.learning_rate == 1e-4);
  CHECK(c.batch_size == 100);
  CHECK(c.iterations == 20000);
  CHECK_THROWS_AS(parse_train_config(R"({"objective": "vanilla", "betta": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"learning_rate": -1})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"batch_size": "large"})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"prior_mode": "decoupled", "latent_dim": 1})"), ConfigError);
}

TEST_CASE("config JSON round trip") {
  TrainConfig c = tiny(ObjectiveKind::info, PriorMode::decoupled);
  c.objective.lambda = 123.5;
  c.arch.obs_std = 0.3;
  c.output_dir = "somewhere";
  const TrainConfig back = parse_train_config(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.objective.lambda == 123.5);
  CHECK(back.arch.hidden == c.arch.hidden);
}

TEST_CASE("zero iterations returns the initialization") {
  TrainConfig c = tiny(ObjectiveKind::vanilla, PriorMode::decoupled, 0);
  const TrainResult r = train(c);
  CHECK(r.log.rows.empty());
  CHECK(r.checkpoint.iteration == 0);
  CHECK(params_equal(r.checkpoint.model.params, initialize(c).model.params));
}

TEST_CASE("training is deterministic and logs one row per iteration") {
  for (auto kind : {ObjectiveKind::vanilla, ObjectiveKind::beta_b, ObjectiveKind::factor, ObjectiveKind::beta_tc,
                    ObjectiveKind::info}) {
    CAPTURE(to_string(kind));
    const TrainConfig c = tiny(kind, PriorMode::decoupled, 15);
    const TrainResult a = train(c);
    const TrainResult b = train(c);
    REQUIRE(a.log.rows.size() == 15);
    CHECK(std::memcmp(a.log.rows.data(), b.log.rows.data(), 15 * sizeof(LossBreakdown)) == 0);
    CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
    CHECK(a.checkpoint.discriminator.has_value() == (kind == ObjectiveKind::factor));
  }
}

TEST_CASE("prior mode switch changes only prior-dependent terms at iteration 0") {
  const TrainResult s = train(tiny(ObjectiveKind::beta_h, PriorMode::standard, 1));
  const TrainResult d = train(tiny(ObjectiveKind::beta_h, PriorMode::decoupled, 1));
  CHECK(s.log.rows[0].recon == d.log.rows[0].recon);
  CHECK(s.log.rows[0].kl != d.log.rows[0].kl);
}

TEST_CASE("a non-finite loss aborts with the iteration") {
  TrainConfig c = tiny(ObjectiveKind::vanilla, PriorMode::standard, 5);
  c.arch.obs_std = 1e-300;
  try {
    train(c);
    FAIL("expected NumericAbort");
  } catch (const NumericAbort& e) {
    CHECK(e.iteration() == 0);
    CHECK(std::string(e.what()).find("recon") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip reproduces forward passes bitwise") {
  for (auto kind : {ObjectiveKind::beta_h, ObjectiveKind::factor}) {
    const TrainResult r = train(tiny(kind, PriorMode::decoupled, 10));
    const auto path = fs::temp_directory_path() / "dpvae_ckpt_test.txt";
    save_checkpoint(r.checkpoint, path);
    const Checkpoint back = load_checkpoint(path);
    fs::remove(path);
    CHECK(back.iteration == 10);
    CHECK(params_equal(back.model.params, r.checkpoint.model.params));
    REQUIRE(back.discriminator.has_value() == r.checkpoint.discriminator.has_value());
    if (back.discriminator) CHECK(params_equal(back.discriminator->params, r.checkpoint.discriminator->params));

    Rng rng(4);
    const Matrix probes = standard_normal(rng, 100, 2);
    Matrix mu1, lv1, mu2, lv2;
    encode_values(r.checkpoint.model, probes, mu1, lv1);
    encode_values(back.model, probes, mu2, lv2);
    CHECK(mu1 == mu2);
    CHECK(lv1 == lv2);
    CHECK(decode_values(r.checkpoint.model, probes) == decode_values(back.model, probes));
    CHECK(prior_log_density(r.checkpoint.model, probes) == prior_log_density(back.model, probes));
  }
}

TEST_CASE("malformed checkpoints are rejected") {
  const TrainResult r = train(tiny(ObjectiveKind::vanilla, PriorMode::standard, 1));
  const std::string good = serialize_checkpoint(r.checkpoint);
  CHECK_NOTHROW(parse_checkpoint(good));
  CHECK_THROWS_AS(parse_checkpoint("garbage"), LoadError);
  CHECK_THROWS_AS(parse_checkpoint(good.substr(0, good.size() - 4)), LoadError);

  std::string renamed = good;
  renamed.replace(renamed.find("encoder.l0.w"), 12, "encoder.lX.w");
  CHECK_THROWS_AS(parse_checkpoint(renamed), LoadError);

  std::string reshaped = good;
  const auto pos = reshaped.find("param model encoder.l0.w 16 2");
  REQUIRE(pos != std::string::npos);
  reshaped.replace(pos, 29, "param model encoder.l0.w 2 16");
  CHECK_THROWS_AS(parse_checkpoint(reshaped), LoadError);

  // A checkpoint whose config disagrees with its arrays.
  std::string wider = good;
  wider.replace(wider.find("\"hidden\":[16,8]"), 15, "\"hidden\":[17,8]");
  CHECK_THROWS_AS(parse_checkpoint(wider), LoadError);
}

TEST_CASE("evaluate: default tau grid, repeatability, shape errors") {
  const TrainResult r = train(tiny(ObjectiveKind::beta_h, PriorMode::decoupled, 10));
  const DataSplit data = checkpoint_data(r.checkpoint);
  MetricSpec spec;
  CHECK(spec.taus == std::vector<double>{-10, -8, -6, -4, -2});
  spec.skl_n = 200;
  spec.nll_n = 20;
  spec.leak_n = 200;
  spec.mmd_n = 50;
  const MetricReport a = evaluate(r.checkpoint, data.train.points, data.heldout.points, spec);
  const MetricReport b = evaluate(r.checkpoint, data.train.points, data.heldout.points, spec);
  REQUIRE(a.size() == 8);
  CHECK(a[0].name == "skl");
  CHECK(a[1].name == "nll");
  CHECK(a[2].name == "leakage_tau=-10");
  CHECK(a[7].name == "sample_quality_mmd");
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].metric.value == b[i].metric.value);
    CHECK(a[i].metric.std_error == b[i].metric.std_error);
  }
  CHECK_THROWS_AS(evaluate(r.checkpoint, data.train.points, Matrix::Ones(4, 3), spec), LoadError);
}

TEST_CASE("sKL standard error shrinks like 1/sqrt(n)") {
  const TrainResult r = train(tiny(ObjectiveKind::vanilla, PriorMode::standard, 0));
  const Matrix ref = checkpoint_data(r.checkpoint).train.points;
  const double s1 = skl(r.checkpoint.model, ref, 500, 1).std_error;
  const double s2 = skl(r.checkpoint.model, ref, 5000, 1).std_error;
  const double s3 = skl(r.checkpoint.model, ref, 50000, 1).std_error;
  CHECK(s1 / s2 == doctest::Approx(std::sqrt(10.0)).epsilon(0.25));
  CHECK(s2 / s3 == doctest::Approx(std::sqrt(10.0)).epsilon(0.25));
}

TEST_CASE("generate: counts, scores, identity-flow equivalence") {
  const TrainResult r = train(tiny(ObjectiveKind::vanilla, PriorMode::decoupled, 5));
  const Matrix ref = checkpoint_data(r.checkpoint).train.points;
  const GeneratedSamples lp = generate(r.checkpoint, ref, 7, GenerateMode::low_posterior, 2, 70);
  CHECK(lp.x.rows() == 7);
  CHECK(lp.log_q.isApprox(low_posterior_samples(r.checkpoint.model, ref, 70, 7, 2).score));
  CHECK(generate(r.checkpoint, ref, 9, GenerateMode::high_posterior, 2).z.rows() == 9);
  CHECK_THROWS_AS(generate(r.checkpoint, ref, 0, GenerateMode::random, 2), ArgumentError);
  CHECK(parse_generate_mode("lp") == GenerateMode::low_posterior);
  CHECK_THROWS_AS(parse_generate_mode("best"), ArgumentError);

  // Zero-initialized flow: decoupled random samples equal standard ones.
  TrainConfig c = tiny(ObjectiveKind::vanilla, PriorMode::decoupled, 0);
  Checkpoint dp = initialize(c);
  for (std::size_t i = 0; i < dp.model.params.size(); ++i) {
    if (dp.model.params.entry(i).name.rfind("prior.", 0) == 0) dp.model.params.entry(i).value.setZero();
  }
  c.objective.prior_mode = PriorMode::standard;
  const Checkpoint sp = initialize(c);
  const GeneratedSamples gd = generate(dp, ref, 20, GenerateMode::random, 5);
  const GeneratedSamples gs = generate(sp, ref, 20, GenerateMode::random, 5);
  CHECK(gd.z == gs.z);
  CHECK(gd.x == gs.x);
}

TEST_CASE("latent traversals") {
  const TrainResult r = train(tiny(ObjectiveKind::vanilla, PriorMode::decoupled, 5));
  const Eigen::Vector2d a(-1.0, 0.5);
  const Eigen::Vector2d b(0.7, 1.2);
  const LatentPath two = latent_traverse(r.checkpoint, a, b, 2);
  CHECK(two.z.row(0) == a.transpose());
  CHECK(two.z.row(1) == b.transpose());
  Matrix ends(2, 2);
  ends << a.transpose(), b.transpose();
  CHECK(two.x == decode_values(r.checkpoint.model, ends));

  const LatentPath curved = latent_traverse(r.checkpoint, a, b, 9);
  const LatentPath straight = straight_traverse(r.checkpoint, a, b, 9);
  CHECK(curved.z.rows() == 9);
  CHECK((curved.z - straight.z).norm() > 1e-6);
  CHECK_THROWS_AS(latent_traverse(r.checkpoint, a, b, 1), ArgumentError);
  CHECK_THROWS_AS(latent_traverse(r.checkpoint, Eigen::Vector3d::Zero(), b, 5), ShapeError);

  // Identity flow: the mapped path is the straight segment.
  Checkpoint id = r.checkpoint;
  for (std::size_t i = 0; i < id.model.params.size(); ++i) {
    if (id.model.params.entry(i).name.rfind("prior.", 0) == 0) id.model.params.entry(i).value.setZero();
  }
  CHECK((latent_traverse(id, a, b, 9).z - straight_traverse(id, a, b, 9).z).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("factor traversal") {
  const TrainResult r = train(tiny(ObjectiveKind::vanilla, PriorMode::standard, 5));
  const Matrix ref = checkpoint_data(r.checkpoint).train.points;
  const Eigen::Vector2d x(0.3, 0.2);
  Matrix mu, lv;
  encode_values(r.checkpoint.model, x.transpose(), mu, lv);
  const Matrix recon = decode_values(r.checkpoint.model, mu);

  const LatentPath flat = factor_traverse(r.checkpoint, ref, x, 0, 0.0, 4);
  CHECK(flat.x.rows() == 4);
  for (Index i = 0; i < 4; ++i) CHECK(flat.x.row(i) == recon.row(0));

  const LatentPath p = factor_traverse(r.checkpoint, ref, x, 1, 5.0, 7);
  CHECK(p.z.rows() == 7);
  CHECK(p.x.row(3) == recon.row(0));
  const std::vector<Index> order = dims_by_std(aggregate_posterior(r.checkpoint.model, ref));
  const Index moved = order[1];
  const Index fixed = order[0];
  CHECK(p.z(0, fixed) == p.z(6, fixed));
  CHECK(p.z(6, moved) - p.z(0, moved) ==
        doctest::Approx(10.0 * aggregate_posterior_std(aggregate_posterior(r.checkpoint.model, ref))(moved)));
  CHECK_THROWS_AS(factor_traverse(r.checkpoint, ref, x, 2, 5.0, 7), ArgumentError);
  CHECK_THROWS_AS(factor_traverse(r.checkpoint, ref, x, -1, 5.0, 7), ArgumentError);
}

TEST_CASE("CSV writers use the documented headers") {
  const TrainResult r = train(tiny(ObjectiveKind::vanilla, PriorMode::standard, 3));
  const Matrix ref = checkpoint_data(r.checkpoint).train.points;
  const fs::path dir = fs::temp_directory_path() / "dpvae_csv_test";
  fs::create_directories(dir);
  write_runlog_csv(r.log, dir / "runlog.csv");
  write_samples_csv(generate(r.checkpoint, ref, 4, GenerateMode::random, 1), dir / "samples.csv");
  write_latents_csv(latent_traverse(r.checkpoint, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 3),
                    dir / "latents.csv");
  write_metrics_csv({{"skl", MetricValue{0.5, 0.1, 10, 2}}}, dir / "metrics.csv");
  CHECK(read_all(dir / "runlog.csv").rfind("iter,total,recon,kl,extra\n0,", 0) == 0);
  CHECK(read_all(dir / "samples.csv").rfind("x1,x2,log_q,log_p\n", 0) == 0);
  CHECK(read_all(dir / "latents.csv").rfind("step,z1,z2,x1,x2,log_p\n0,", 0) == 0);
  CHECK(read_all(dir / "metrics.csv") == "name,value,stderr,n,seed\nskl,0.5,0.10000000000000001,10,2\n");
  fs::remove_all(dir);
}
