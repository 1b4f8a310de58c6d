#include <cstring>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "json.hpp"
#include "fairscrub/checkpoint.hpp"
#include "fairscrub/error.hpp"
#include "fairscrub/model.hpp"
#include "oracles.hpp"

using namespace fairscrub;

namespace {

Mlp zero_with_bias(std::size_t in, std::size_t out, double bias) {
  Mlp net({in, out}, Activation::Identity);
  for (std::size_t j = 0; j < out; ++j) net.set_bias(0, j, bias + static_cast<double>(j));
  return net;
}

void check_close(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
  }
}

}  // namespace

TEST_SUITE("model composition") {
  TEST_CASE("zero weights broadcast the bias") {
    Rng rng(1);
    AdsModel m(zero_with_bias(3, 4, 0.5), zero_with_bias(4, 4, -1.0), zero_with_bias(4, 2, 2.0),
               {zero_with_bias(4, 3, 7.0)});
    const Matrix x = oracle::random_matrix(5, 3, rng);
    const Matrix e = encode(m, x);
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t j = 0; j < 4; ++j) CHECK(e(r, j) == 0.5 + j);
    }
    const Matrix u = scrub(m, e);
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t j = 0; j < 4; ++j) CHECK(u(r, j) == -1.0 + j);
    }
    const Matrix c = predict_task(m, u);
    const Matrix d = predict_bias(m, u, 0);
    CHECK(c(3, 1) == 3.0);
    CHECK(d(4, 2) == 9.0);
  }

  TEST_CASE("identity networks pass inputs through") {
    Rng rng(2);
    AdsModel m(Mlp::identity(4), Mlp::identity(4), Mlp::identity(4), {Mlp::identity(4)});
    const Matrix x = oracle::random_matrix(3, 4, rng);
    CHECK(encode(m, x) == x);
    CHECK(scrub(m, x) == x);
    CHECK(predict_task(m, x) == x);
    CHECK(predict_bias(m, x, 0) == x);
  }

  TEST_CASE("components equal standalone forwards and compose") {
    const AdsModel m = AdsModel::create(ModelDims{6, 5, 4, 7, 3, {2, 4}}, 9);
    Rng rng(3);
    const Matrix x = oracle::random_matrix(8, 6, rng);
    const Matrix e = encode(m, x);
    check_close(e, oracle::forward(m.encoder(), x));
    const Matrix u = scrub(m, e);
    check_close(u, oracle::forward(m.scrubber(), e));
    check_close(predict_task(m, u), oracle::forward(m.task(), u));
    check_close(predict_bias(m, u, 1), oracle::forward(m.discriminator(1), u));
    const Matrix end_to_end =
        oracle::forward(m.task(), oracle::forward(m.scrubber(), oracle::forward(m.encoder(), x)));
    check_close(predict_task(m, u), end_to_end);
  }

  TEST_CASE("architecture follows the defaults") {
    const AdsModel m = AdsModel::create(ModelDims{}, 0);
    CHECK(m.encoder().layer_sizes() == std::vector<std::size_t>{64, 32, 32});
    CHECK(m.scrubber().layer_sizes() == std::vector<std::size_t>{32, 32, 32});
    CHECK(m.task().layer_sizes() == std::vector<std::size_t>{32, 2});
    CHECK(m.discriminator(0).layer_sizes() == std::vector<std::size_t>{32, 2});
    CHECK(m.scrubber().hidden_activation() == Activation::ReLU);
  }

  TEST_CASE("parameter groups partition the model") {
    const AdsModel m = AdsModel::create(ModelDims{6, 5, 4, 7, 3, {2, 4}}, 5);
    std::size_t sum = m.encoder().num_params() + m.scrubber().num_params() + m.task().num_params();
    for (const auto& d : m.discriminators()) sum += d.num_params();
    CHECK(sum == m.num_params());
    // Each group owns its own buffer: touching one leaves all others alone.
    AdsModel copy = m;
    copy.scrubber().mutable_params()[0] += 1.0;
    CHECK(copy.encoder().same_parameters(m.encoder()));
    CHECK(copy.task().same_parameters(m.task()));
    CHECK(copy.discriminator(0).same_parameters(m.discriminator(0)));
    CHECK(copy.discriminator(1).same_parameters(m.discriminator(1)));
    CHECK_FALSE(copy.scrubber().same_parameters(m.scrubber()));
  }

  TEST_CASE("dimension mismatches are rejected") {
    CHECK_THROWS_AS(AdsModel(Mlp::identity(3), Mlp::identity(4), Mlp::identity(4), {Mlp::identity(4)}),
                    DimensionError);
    CHECK_THROWS_AS(AdsModel(Mlp::identity(4), Mlp::identity(4), Mlp({4, 2}, Activation::Identity),
                             {Mlp({3, 2}, Activation::Identity)}),
                    DimensionError);
    const AdsModel m = AdsModel::create(ModelDims{}, 0);
    CHECK_THROWS_AS(predict_bias(m, Matrix(1, 32), 1), UsageError);
    CHECK_THROWS_AS(encode(m, Matrix(1, 10)), DimensionError);
  }
}

TEST_SUITE("taps") {
  TEST_CASE("identity scrubber makes the scrubbed tap equal the encoder tap") {
    const AdsModel base = AdsModel::create(ModelDims{6, 4, 4, 5, 2, {2}}, 3);
    AdsModel m(base.encoder(), Mlp::identity(4), Mlp({4, 2}, Activation::Identity),
               {Mlp({4, 2}, Activation::Identity)});
    Rng rng(4);
    const Matrix x = oracle::random_matrix(7, 6, rng);
    CHECK(tap(m, x, RepresentationTap::AdsScrubbed) == tap(m, x, RepresentationTap::AdsEncoder));
  }

  TEST_CASE("pretrained tap is a deterministic function of the seed") {
    Rng rng(5);
    const Matrix x = oracle::random_matrix(4, 64, rng);
    const auto a = tap(AdsModel::create(ModelDims{}, 11), x, RepresentationTap::PretrainedEncoder);
    const auto b = tap(AdsModel::create(ModelDims{}, 11), x, RepresentationTap::PretrainedEncoder);
    const auto c = tap(AdsModel::create(ModelDims{}, 12), x, RepresentationTap::PretrainedEncoder);
    CHECK(a == b);
    CHECK_FALSE(a == c);
  }

  TEST_CASE("every tap keeps the batch size and leaves the model untouched") {
    const AdsModel m = AdsModel::create(ModelDims{}, 2);
    const AdsModel before = m;
    Rng rng(6);
    const Matrix x = oracle::random_matrix(13, 64, rng);
    for (auto kind : kAllTaps) {
      const Matrix r = tap(m, x, kind);
      CHECK(r.rows() == 13);
      CHECK(r.cols() == 32);
    }
    CHECK(m.same_parameters(before));
  }

  TEST_CASE("names round-trip") {
    for (auto kind : kAllTaps) CHECK(parse_tap(tap_name(kind)) == kind);
    CHECK_THROWS_AS(parse_tap("bert"), UsageError);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bit exact") {
    AdsModel m = AdsModel::create(ModelDims{6, 5, 4, 7, 3, {2, 4}}, 21);
    // Values that stress decimal round-tripping.
    auto p = m.encoder().mutable_params();
    p[0] = 0.1;
    p[1] = std::numeric_limits<double>::denorm_min();
    p[2] = -std::numeric_limits<double>::max();
    p[3] = 1.0 / 3.0;
    p[4] = -0.0;
    const auto text = checkpoint_to_json(m, {{"regime", "ads"}, {"seed", "21"}});
    const auto back = checkpoint_from_json(text);
    CHECK(back.model.same_parameters(m));
    CHECK(back.metadata.at("regime") == "ads");
    const auto a = m.encoder().params();
    const auto b = back.model.encoder().params();
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    CHECK(checkpoint_to_json(back.model, back.metadata) == text);
  }

  TEST_CASE("file round trip") {
    const AdsModel m = AdsModel::create(ModelDims{}, 4);
    const auto path = std::filesystem::temp_directory_path() / "fairscrub_test_ckpt.json";
    save_checkpoint(path, m);
    CHECK(load_checkpoint(path).model.same_parameters(m));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }

  TEST_CASE("malformed documents are config errors") {
    CHECK_THROWS_AS(checkpoint_from_json("{"), ConfigError);
    CHECK_THROWS_AS(checkpoint_from_json(R"({"format":"other","version":1})"), ConfigError);
    auto doc = nlohmann::json::parse(checkpoint_to_json(AdsModel::create(ModelDims{}, 0)));
    doc["version"] = 9;
    CHECK_THROWS_AS(checkpoint_from_json(doc.dump()), ConfigError);
  }
}
