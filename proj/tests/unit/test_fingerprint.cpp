#include <doctest.h>

#include <random>

#include "harness.hpp"
#include "oracles.hpp"
#include "topmind/fingerprint.hpp"

using namespace topmind;
using fingerprint::ClassifierModel;

namespace {

std::map<std::string, std::string> families(const std::vector<std::string>& ids) {
  std::map<std::string, std::string> out;
  for (const auto& id : ids) out[id] = id.substr(0, id.find('-'));
  return out;
}

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<std::string> labels;
};

Blobs blobs(std::size_t per_class, std::size_t dim, double spread, std::uint64_t seed) {
  const std::vector<std::string> ids{"gpt-a", "gpt-b", "llama-a", "qwen-a"};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Blobs b{Eigen::MatrixXd(per_class * ids.size(), dim), {}};
  for (std::size_t c = 0; c < ids.size(); ++c) {
    std::vector<double> center(dim);
    for (auto& v : center) v = spread * n(rng);
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t j = 0; j < dim; ++j) b.x(c * per_class + i, j) = center[j] + n(rng);
      b.labels.push_back(ids[c]);
    }
  }
  return b;
}

}  // namespace

TEST_SUITE("fingerprint") {
  TEST_CASE("loss and gradient agree with the reference") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    for (int inst = 0; inst < 30; ++inst) {
      const std::size_t k = 2 + rng() % 3, d = 1 + rng() % 8, rows = 1 + rng() % 20;
      Eigen::MatrixXd w(k, d), x(rows, d);
      Eigen::VectorXd b(k);
      std::vector<int> y(rows);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = n(rng);
      for (auto& v : y) v = static_cast<int>(rng() % k);
      const double l2 = 0.01;
      const auto lg = fingerprint::loss_and_gradient(w, b, x, y, l2);

      std::vector<double> wf(k * d), bf(b.data(), b.data() + k), xf(rows * d);
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) wf[c * d + j] = w(c, j);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < d; ++j) xf[i * d + j] = x(i, j);
      CHECK(lg.loss == doctest::Approx(oracle::softmax_loss(wf, bf, xf, y, k, d, l2)).epsilon(1e-12));

      const double h = 1e-6;
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) {
          const double keep = wf[c * d + j];
          wf[c * d + j] = keep + h;
          const double up = oracle::softmax_loss(wf, bf, xf, y, k, d, l2);
          wf[c * d + j] = keep - h;
          const double down = oracle::softmax_loss(wf, bf, xf, y, k, d, l2);
          wf[c * d + j] = keep;
          CHECK(lg.grad_weights(c, j) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1));
        }
    }
  }

  TEST_CASE("training separates Gaussian blobs") {
    const auto b = blobs(200, 16, 4.0, 1);
    fingerprint::TrainConfig config;
    config.seed = 2;
    const auto result = fingerprint::train(b.x, b.labels, families({"gpt-a", "gpt-b", "llama-a", "qwen-a"}), config);
    CHECK(result.report.individual_accuracy >= 0.95);
    CHECK(result.report.family_accuracy >= result.report.individual_accuracy);
    CHECK(result.split.test.size() == 160);
    CHECK(result.report.test_count == 160);
    std::size_t confusion_total = 0;
    for (const auto& row : result.report.confusion)
      for (auto v : row) confusion_total += v;
    CHECK(confusion_total == 160);
  }

  TEST_CASE("small learning rate never increases the loss") {
    const auto b = blobs(30, 6, 1.0, 5);
    fingerprint::TrainConfig config;
    config.learning_rate = 1e-3;
    config.epochs = 300;
    const auto result = fingerprint::train(b.x, b.labels, families({"gpt-a", "gpt-b", "llama-a", "qwen-a"}), config);
    REQUIRE(result.loss_history.size() >= 2);
    for (std::size_t i = 1; i < result.loss_history.size(); ++i)
      CHECK(result.loss_history[i] <= result.loss_history[i - 1] + 1e-15);
  }

  TEST_CASE("one repeated point per class") {
    Eigen::MatrixXd x(10, 2);
    std::vector<std::string> labels;
    for (int i = 0; i < 10; ++i) {
      x(i, 0) = i < 5 ? 1.0 : -1.0;
      x(i, 1) = i < 5 ? 0.5 : 2.0;
      labels.push_back(i < 5 ? "a-1" : "b-1");
    }
    const auto result = fingerprint::train(x, labels, families({"a-1", "b-1"}), {});
    CHECK(result.report.individual_accuracy == 1.0);
    const auto train_eval = fingerprint::evaluate(result.model, x, labels, result.split.train);
    CHECK(train_eval.individual_accuracy == 1.0);
  }

  TEST_CASE("training preconditions") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 3);
    std::vector<std::string> labels{"a-1", "a-1", "a-1", "a-1", "a-1", "b-1", "b-1", "b-1"};
    CHECK_THROWS(fingerprint::train(x, labels, families({"a-1", "b-1"}), {}));
    std::vector<std::string> one(8, "a-1");
    CHECK_THROWS(fingerprint::train(x, one, families({"a-1"}), {}));
    Eigen::MatrixXd huge = Eigen::MatrixXd::Constant(10, 2, 1e300);
    huge.bottomRows(5) *= -1;
    std::vector<std::string> ok{"a-1", "a-1", "a-1", "a-1", "a-1", "b-1", "b-1", "b-1", "b-1", "b-1"};
    fingerprint::TrainConfig config;
    config.learning_rate = 1e10;
    CHECK_THROWS(fingerprint::train(huge, ok, families({"a-1", "b-1"}), config));
  }

  TEST_CASE("predict") {
    ClassifierModel m;
    m.weights = Eigen::MatrixXd::Zero(4, 3);
    m.biases = Eigen::VectorXd::Zero(4);
    m.class_ids = {"a", "b", "c", "d"};
    const std::vector<double> x{1, -2, 3};
    const auto p = fingerprint::predict(m, x);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(p(i) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS(fingerprint::predict(m, std::vector<double>{1, 2}));

    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0, 30);
    for (int i = 0; i < 500; ++i) {
      for (Eigen::Index k = 0; k < m.weights.size(); ++k) m.weights.data()[k] = n(rng);
      for (Eigen::Index k = 0; k < 4; ++k) m.biases(k) = n(rng);
      const std::vector<double> v{n(rng), n(rng), n(rng)};
      const auto probs = fingerprint::predict(m, v);
      CHECK(std::abs(probs.sum() - 1.0) <= 1e-9);
      CHECK((probs.array() >= 0).all());
      Eigen::Index pa, la;
      probs.maxCoeff(&pa);
      fingerprint::logits(m, v).maxCoeff(&la);
      CHECK(pa == la);
      const auto logits = fingerprint::logits(m, v);
      const auto shifted = fingerprint::softmax((logits.array() + 17.5).matrix());
      CHECK((shifted - fingerprint::softmax(logits)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  TEST_CASE("family aggregation") {
    const auto fam = families({"gpt-20b", "gpt-120b", "llama-8b"});
    const std::vector<std::string> truth{"gpt-120b", "llama-8b"}, predicted{"gpt-20b", "llama-8b"};
    CHECK(fingerprint::family_aggregate(truth, predicted, fam) == 1.0);
    CHECK(fingerprint::family_aggregate(truth, truth, fam) == 1.0);
    const std::vector<std::string> wrong{"llama-8b", "gpt-20b"};
    CHECK(fingerprint::family_aggregate(truth, wrong, fam) == 0.0);
    const std::vector<std::string> unknown{"mystery", "llama-8b"};
    CHECK_THROWS(fingerprint::family_aggregate(truth, unknown, fam));
  }

  TEST_CASE("saved models predict identically") {
    const auto b = blobs(20, 5, 3.0, 4);
    const auto fam = families({"gpt-a", "gpt-b", "llama-a", "qwen-a"});
    fingerprint::TrainConfig config;
    config.l2_normalize = true;
    config.epochs = 50;
    const auto result = fingerprint::train(b.x, b.labels, fam, config);
    harness::TempDir tmp;
    fingerprint::save_model(tmp / "model", result.model, {{"note", "x"}});
    nlohmann::json extra;
    const auto back = fingerprint::load_model(tmp / "model", &extra);
    CHECK(extra.at("note") == "x");
    CHECK(back.class_ids == result.model.class_ids);
    CHECK(back.family_of == result.model.family_of);
    CHECK(back.train_config.l2_normalize);
    CHECK(back.weights == result.model.weights);
    CHECK(back.biases == result.model.biases);
    const auto again = fingerprint::evaluate(back, b.x, b.labels, result.split.test);
    CHECK(again.individual_accuracy == result.report.individual_accuracy);
    CHECK(again.confusion == result.report.confusion);
  }

  TEST_CASE("stratified split") {
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) labels.push_back(i % 3 == 0 ? 0 : 1);
    const auto s = fingerprint::stratified_split(labels, 2, 0.2, 7);
    CHECK(s.train.size() + s.test.size() == 50);
    std::size_t zeros = 0;
    for (auto i : s.test) zeros += labels[i] == 0 ? 1 : 0;
    CHECK(zeros == 3);  // round(0.2 * 17)
    const auto t = fingerprint::stratified_split(labels, 2, 0.2, 7);
    CHECK(s.test == t.test);
  }
}
