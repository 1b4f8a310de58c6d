#include <cmath>
#include <functional>

#include "doctest.h"
#include "fairscrub/datagen.hpp"
#include "fairscrub/error.hpp"
#include "fairscrub/optim.hpp"
#include "fairscrub/trainer.hpp"
#include "oracles.hpp"

using namespace fairscrub;

namespace {

Dataset random_batch(std::size_t n, std::size_t dim, Rng& rng, std::vector<std::size_t> arities = {2}) {
  Dataset d;
  d.x = oracle::random_matrix(n, dim, rng);
  d.num_targets = 2;
  d.protected_arities = arities;
  d.y.resize(n);
  d.z.assign(arities.size(), std::vector<Label>(n));
  for (std::size_t i = 0; i < n; ++i) {
    d.y[i] = d.x(i, 0) > 0 ? 1 : 0;
    for (std::size_t a = 0; a < arities.size(); ++a) {
      d.z[a][i] = static_cast<Label>(rng.below(arities[a]));
    }
  }
  return d;
}

void randomize_biases(AdsModel& m, Rng& rng) {
  for (Mlp* net : {&m.encoder(), &m.scrubber()}) {
    auto p = net->mutable_params();
    for (std::size_t l = 0; l < net->num_layers(); ++l) {
      for (std::size_t j = 0; j < net->layer(l).out; ++j) {
        p[net->layer(l).bias_offset + j] = rng.uniform(-0.3, 0.3);
      }
    }
  }
}

std::vector<double> fd_gradient(Mlp& net, const std::function<double()>& loss) {
  auto params = net.mutable_params();
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) g[i] = oracle::central_diff(loss, params[i], 1e-6);
  return g;
}

void clip(std::vector<std::vector<double>*> groups, double max_norm) {
  double sq = 0;
  for (auto* g : groups) {
    for (double v : *g) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  for (auto* g : groups) {
    for (double& v : *g) v *= max_norm / norm;
  }
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_SUITE("adamw") {
  TEST_CASE("zero gradient and zero decay leave parameters unchanged") {
    std::vector<double> p{1.0, -2.0, 3.5};
    const auto before = p;
    AdamWState st;
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    for (int i = 0; i < 5; ++i) adamw_step(p, std::vector<double>(3, 0.0), st, 0.1, cfg);
    CHECK(p == before);
  }

  TEST_CASE("first step has the closed form") {
    std::vector<double> p{0.5, -1.0, 2.0, 0.0};
    const std::vector<double> g{0.3, -4.0, 1e-3, 0.0};
    AdamWConfig cfg;
    cfg.weight_decay = 0.1;
    const double lr = 0.01;
    const auto before = p;
    AdamWState st;
    adamw_step(p, g, st, lr, cfg);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double want = before[i] * (1 - lr * cfg.weight_decay) - lr * g[i] / (std::abs(g[i]) + cfg.eps);
      CHECK(p[i] == doctest::Approx(want).epsilon(1e-14));
    }
  }

  TEST_CASE("100 steps on a quadratic match the reference implementation") {
    const std::vector<double> target{1.0, -3.0, 0.25, 7.0, -0.5};
    const std::vector<double> curvature{1.0, 10.0, 0.1, 3.0, 50.0};
    std::vector<double> p(5, 0.0);
    std::vector<double> q(5, 0.0);
    AdamWConfig cfg;
    cfg.weight_decay = 0.02;
    AdamWState st;
    oracle::ReferenceAdamW ref{0.05, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay, {}, {}, 0};
    for (int t = 0; t < 100; ++t) {
      std::vector<double> gp(5), gq(5);
      for (std::size_t i = 0; i < 5; ++i) {
        gp[i] = curvature[i] * (p[i] - target[i]);
        gq[i] = curvature[i] * (q[i] - target[i]);
      }
      adamw_step(p, gp, st, 0.05, cfg);
      ref.step(q, gq);
    }
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-10);
  }

  TEST_CASE("global norm clipping") {
    std::vector<double> a{3.0, 0.0}, b{4.0};
    std::vector<std::span<double>> bufs{a, b};
    CHECK(clip_global_norm(bufs, 1.0) == doctest::Approx(5.0));
    CHECK(a[0] == doctest::Approx(0.6));
    CHECK(b[0] == doctest::Approx(0.8));
    CHECK(clip_global_norm(bufs, 0.0) == doctest::Approx(1.0));
    CHECK(a[0] == doctest::Approx(0.6));
  }

  TEST_CASE("size mismatch and bad config") {
    std::vector<double> p(2);
    AdamWState st;
    CHECK_THROWS_AS(adamw_step(p, std::vector<double>(3), st, 0.1, AdamWConfig{}), DimensionError);
    AdamWConfig bad;
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_SUITE("train_step") {
  TEST_CASE("zero lambdas give the same scrubber gradients as no-adversary") {
    Rng rng(1);
    const AdsModel m = AdsModel::create(ModelDims{5, 4, 4, 6, 2, {2}}, 3);
    const Dataset batch = random_batch(8, 5, rng);
    LossConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    Rng g1(5), g2(5);
    const auto ads = scrubber_gradients(m, batch, cfg, Regime::Ads, g1);
    const auto plain = scrubber_gradients(m, batch, cfg, Regime::NoAdversary, g2);
    CHECK(ads.encoder.params == plain.encoder.params);
    CHECK(ads.scrubber.params == plain.scrubber.params);
    CHECK(ads.task.params == plain.task.params);

    // The discriminator still learns in the Ads regime.
    AdsModel trained = m;
    TrainConfig tc;
    tc.loss = cfg;
    Trainer(trained, tc).step(batch);
    CHECK_FALSE(trained.discriminator(0).same_parameters(m.discriminator(0)));
    AdsModel base = m;
    tc.regime = Regime::NoAdversary;
    const auto rec = Trainer(base, tc).step(batch);
    CHECK(base.discriminator(0).same_parameters(m.discriminator(0)));
    CHECK_FALSE(rec.disc_loss.has_value());
  }

  TEST_CASE("zero learning rate leaves every parameter bit-identical") {
    Rng rng(2);
    AdsModel m = AdsModel::create(ModelDims{5, 4, 4, 6, 2, {2, 3}}, 4);
    const AdsModel before = m;
    TrainConfig tc;
    tc.learning_rate = 0.0;
    tc.loss.lambda1 = 3.0;
    tc.loss.lambda2 = 1.0;
    Trainer trainer(m, tc);
    for (int i = 0; i < 3; ++i) trainer.step(random_batch(6, 5, rng, {2, 3}));
    CHECK(m.same_parameters(before));
  }

  TEST_CASE("one step on four examples matches a hand-rolled two-phase update") {
    Rng rng(3);
    AdsModel m = AdsModel::create(ModelDims{3, 4, 4, 5, 2, {3}}, 8);
    randomize_biases(m, rng);
    const Dataset batch = random_batch(4, 3, rng, {3});
    TrainConfig tc;
    tc.learning_rate = 0.01;
    tc.loss.lambda1 = 2.0;
    tc.loss.lambda2 = 0.5;
    tc.loss.gumbel_noise = false;
    tc.clip_norm = 0.5;  // small enough that clipping is exercised

    // Oracle: finite-difference gradients, textbook AdamW, manual clipping.
    AdsModel work = m;
    auto disc_loss = [&] {
      const Matrix u = oracle::forward(work.scrubber(), oracle::forward(work.encoder(), batch.x));
      return cross_entropy(oracle::forward(work.discriminator(0), u), batch.z[0]).loss;
    };
    auto gd = fd_gradient(work.discriminator(0), disc_loss);
    clip({&gd}, tc.clip_norm);
    auto pd = to_vec(work.discriminator(0).params());
    oracle::ReferenceAdamW(tc.learning_rate, 0.9, 0.999, 1e-8, 0.01).step(pd, gd);
    std::copy(pd.begin(), pd.end(), work.discriminator(0).mutable_params().begin());

    auto scrub_loss = [&] {
      const Matrix u = oracle::forward(work.scrubber(), oracle::forward(work.encoder(), batch.x));
      const Matrix c = oracle::forward(work.task(), u);
      const Matrix d = oracle::forward(work.discriminator(0), u);
      double h = 0, delta = 0;
      for (std::size_t i = 0; i < d.rows(); ++i) {
        const auto p = oracle::softmax_ld(d.row(i));
        for (auto v : p) h -= static_cast<double>(v * std::log(v));
        delta += static_cast<double>(p[static_cast<std::size_t>(batch.z[0][i])]);
      }
      const double n = static_cast<double>(d.rows());
      return cross_entropy(c, batch.y).loss - tc.loss.lambda1 * h / n + tc.loss.lambda2 * delta / n;
    };
    auto ge = fd_gradient(work.encoder(), scrub_loss);
    auto gs = fd_gradient(work.scrubber(), scrub_loss);
    auto gc = fd_gradient(work.task(), scrub_loss);
    clip({&ge, &gs, &gc}, tc.clip_norm);
    std::vector<std::vector<double>> want;
    const std::vector<std::pair<Mlp*, std::vector<double>*>> groups{
        {&work.encoder(), &ge}, {&work.scrubber(), &gs}, {&work.task(), &gc}};
    for (auto [net, g] : groups) {
      auto p = to_vec(net->params());
      oracle::ReferenceAdamW(tc.learning_rate, 0.9, 0.999, 1e-8, 0.01).step(p, *g);
      want.push_back(p);
    }

    Trainer trainer(m, tc);
    trainer.step(batch);
    const std::vector<std::span<const double>> got{m.encoder().params(), m.scrubber().params(),
                                                   m.task().params()};
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t i = 0; i < want[k].size(); ++i) CHECK(std::abs(got[k][i] - want[k][i]) < 1e-7);
    }
    const auto d = m.discriminator(0).params();
    for (std::size_t i = 0; i < pd.size(); ++i) CHECK(std::abs(d[i] - pd[i]) < 1e-7);
  }

  TEST_CASE("phases touch only their own parameter groups") {
    Rng rng(4);
    AdsModel m = AdsModel::create(ModelDims{5, 4, 4, 6, 2, {2, 2}}, 6);
    const Dataset batch = random_batch(10, 5, rng, {2, 2});
    TrainConfig tc;
    tc.loss.lambda1 = 5.0;
    tc.learning_rate = 0.05;

    // Phase 1 by hand from the library's own pieces.
    AdsModel expect = m;
    auto dg = discriminator_gradients(expect, batch);
    std::vector<std::span<double>> dbufs;
    for (auto& t : dg.tapes) dbufs.emplace_back(t.params);
    clip_global_norm(dbufs, tc.clip_norm);
    for (std::size_t n = 0; n < 2; ++n) {
      AdamWState st;
      adamw_step(expect.discriminator(n).mutable_params(), dg.tapes[n].params, st, tc.learning_rate, tc.adamw);
    }
    const AdsModel after_phase1 = expect;
    CHECK(after_phase1.encoder().same_parameters(m.encoder()));
    CHECK(after_phase1.scrubber().same_parameters(m.scrubber()));
    CHECK(after_phase1.task().same_parameters(m.task()));

    // Phase 2 against the updated discriminators.
    Rng gumbel(derive_seed(tc.seed, "gumbel"));
    auto sg = scrubber_gradients(expect, batch, tc.loss, Regime::Ads, gumbel);
    std::vector<std::span<double>> sbufs{sg.encoder.params, sg.scrubber.params, sg.task.params};
    clip_global_norm(sbufs, tc.clip_norm);
    AdamWState se, ss, sc;
    adamw_step(expect.encoder().mutable_params(), sg.encoder.params, se, tc.learning_rate, tc.adamw);
    adamw_step(expect.scrubber().mutable_params(), sg.scrubber.params, ss, tc.learning_rate, tc.adamw);
    adamw_step(expect.task().mutable_params(), sg.task.params, sc, tc.learning_rate, tc.adamw);
    for (std::size_t n = 0; n < 2; ++n) {
      CHECK(expect.discriminator(n).same_parameters(after_phase1.discriminator(n)));
    }

    Trainer(m, tc).step(batch);
    CHECK(m.same_parameters(expect));
  }

  TEST_CASE("attribute count mismatch is a usage error") {
    Rng rng(5);
    AdsModel m = AdsModel::create(ModelDims{5, 4, 4, 6, 2, {2}}, 1);
    CHECK_THROWS_AS(Trainer(m, TrainConfig{}).step(random_batch(4, 5, rng, {2, 2})), UsageError);
  }
}

TEST_SUITE("train") {
  TEST_CASE("zero iterations return the initial model") {
    Rng rng(6);
    const Dataset data = random_batch(40, 5, rng);
    const AdsModel m = AdsModel::create(ModelDims{5, 4, 4, 6, 2, {2}}, 2);
    TrainConfig tc;
    tc.max_iterations = 0;
    const auto r = train(m, data, tc);
    CHECK(r.model.same_parameters(m));
    CHECK(r.trace.records.empty());
  }

  TEST_CASE("training is deterministic for a fixed seed") {
    Rng rng(7);
    const Dataset data = random_batch(100, 5, rng, {2, 3});
    const AdsModel m = AdsModel::create(ModelDims{5, 4, 4, 6, 2, {2, 3}}, 2);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 16;
    tc.loss.lambda2 = 0.3;
    tc.seed = 99;
    const auto a = train(m, data, tc);
    const auto b = train(m, data, tc);
    CHECK(a.model.same_parameters(b.model));
    CHECK(a.trace.to_csv() == b.trace.to_csv());
    tc.seed = 100;
    CHECK_FALSE(train(m, data, tc).model.same_parameters(a.model));
  }

  TEST_CASE("trace layout and finiteness") {
    Rng rng(8);
    const Dataset data = random_batch(50, 5, rng);
    const AdsModel m = AdsModel::create(ModelDims{5, 4, 4, 6, 2, {2}}, 2);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 20;
    const auto ads = train(m, data, tc);
    CHECK(ads.trace.records.size() == 6);
    const auto csv = ads.trace.to_csv();
    CHECK(csv.rfind("iter,L_d,L_c,H,delta,L_s\n", 0) == 0);
    for (const auto& r : ads.trace.records) {
      REQUIRE(r.disc_loss.has_value());
      CHECK(std::isfinite(*r.disc_loss));
      CHECK(std::isfinite(r.scrubber_loss));
      CHECK(r.scrubber_loss == doctest::Approx(r.task_loss - tc.loss.lambda1 * r.entropy));
    }
    tc.regime = Regime::NoAdversary;
    const auto plain = train(m, data, tc).trace.to_csv();
    CHECK(plain.find("\n0,NA,") != std::string::npos);
  }

  TEST_CASE("linearly separable task is learned without an adversary") {
    SynthSpec spec;
    spec.n = 1000;
    spec.dim = 16;
    spec.y_strength = 1.0;
    spec.z_strengths = {0.0};
    spec.noise_sigma = 0.1;
    spec.seed = 3;
    const Dataset data = generate(spec);
    // The oracle confirms separability first.
    REQUIRE(oracle::logistic_regression_accuracy(data.x, data.y, data.x, data.y, 2) >= 99.0);

    TrainConfig tc;
    tc.regime = Regime::NoAdversary;
    tc.epochs = 50;
    const auto r = train(AdsModel::create(ModelDims{16, 32, 32, 32, 2, {2}}, 1), data, tc);
    const Matrix logits = predict_task(r.model, scrub(r.model, encode(r.model, data.x)));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      correct += (logits(i, 1) > logits(i, 0) ? 1 : 0) == data.y[i];
    }
    CHECK(100.0 * static_cast<double>(correct) / static_cast<double>(data.size()) >= 99.0);
  }

  TEST_CASE("adversary ends no better than an information-free baseline") {
    SynthSpec spec;
    spec.n = 3000;
    spec.dim = 16;
    spec.overlap = 0.3;
    spec.seed = 5;
    const Dataset data = generate(spec);
    TrainConfig tc;
    tc.loss.lambda1 = 10.0;
    tc.epochs = 10;
    const auto r = train(AdsModel::create(ModelDims{16, 32, 32, 32, 2, {2}}, 5), data, tc);
    const auto& recs = r.trace.records;
    const std::size_t tail = recs.size() / 5;
    double mean = 0;
    for (std::size_t i = recs.size() - tail; i < recs.size(); ++i) mean += *recs[i].disc_loss;
    mean /= static_cast<double>(tail);
    // With the scrubber zeroed u is constant, so the best discriminator
    // predicts the label prior and pays its entropy.
    const auto counts = label_counts(data, 1);
    double prior_ce = 0;
    for (auto c : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(data.size());
      if (p > 0) prior_ce -= p * std::log(p);
    }
    CHECK(mean >= prior_ce - 0.05);
  }

  TEST_CASE("small scrubber steps do not help a trained discriminator") {
    Rng rng(10);
    int non_decreasing = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
      AdsModel m = AdsModel::create(ModelDims{6, 8, 8, 8, 2, {2}}, 1000 + t);
      Dataset batch = random_batch(32, 6, rng);
      for (std::size_t i = 0; i < batch.size(); ++i) batch.z[0][i] = batch.x(i, 1) > 0;
      AdamWState st;
      for (int k = 0; k < 300; ++k) {
        auto g = discriminator_gradients(m, batch);
        adamw_step(m.discriminator(0).mutable_params(), g.tapes[0].params, st, 0.05, AdamWConfig{});
      }
      const double before = discriminator_gradients(m, batch).loss;
      LossConfig cfg;
      cfg.lambda1 = 10.0;
      Rng g(t);
      const auto sg = scrubber_gradients(m, batch, cfg, Regime::Ads, g);
      const double eta = 1e-3;
      auto pe = m.encoder().mutable_params();
      for (std::size_t i = 0; i < pe.size(); ++i) pe[i] -= eta * sg.encoder.params[i];
      auto ps = m.scrubber().mutable_params();
      for (std::size_t i = 0; i < ps.size(); ++i) ps[i] -= eta * sg.scrubber.params[i];
      non_decreasing += discriminator_gradients(m, batch).loss >= before;
    }
    CHECK(non_decreasing >= 48);
  }
}
