#include "topmind/fingerprint.hpp"

#include <algorithm>
#include <cmath>

#include "topmind/embed.hpp"
#include "topmind/error.hpp"
#include "topmind/jsonl.hpp"
#include "topmind/random.hpp"

namespace topmind::fingerprint {

using nlohmann::json;

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double max = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - max).exp();
  return e / e.sum();
}

LossGradient loss_and_gradient(const Eigen::MatrixXd& weights, const Eigen::VectorXd& biases,
                               const Eigen::MatrixXd& features, std::span<const int> labels, double l2) {
  const auto n = features.rows();
  // scores: n x classes
  Eigen::MatrixXd scores = features * weights.transpose();
  scores.rowwise() += biases.transpose();

  LossGradient out;
  Eigen::MatrixXd residual(n, weights.rows());  // P - Y
  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double max = scores.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = scores.row(i).array() - max;
    const double log_norm = std::log(shifted.array().exp().sum());
    nll -= shifted(labels[static_cast<std::size_t>(i)]) - log_norm;
    residual.row(i) = (shifted.array() - log_norm).exp();
    residual(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = nll * inv_n + 0.5 * l2 * weights.squaredNorm();
  out.grad_weights = inv_n * residual.transpose() * features + l2 * weights;
  out.grad_biases = inv_n * residual.colwise().sum().transpose();
  return out;
}

namespace {

Eigen::VectorXd prepare(const ClassifierModel& model, std::span<const double> x) {
  if (x.size() != model.dim())
    throw Error("feature vector has dim " + std::to_string(x.size()) + ", model expects " +
                std::to_string(model.dim()));
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  if (model.train_config.l2_normalize) {
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
  }
  return v;
}

Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& features, bool l2_normalize) {
  Eigen::MatrixXd out = features;
  if (!l2_normalize) return out;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

std::size_t argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

}  // namespace

Eigen::VectorXd logits(const ClassifierModel& model, std::span<const double> x) {
  return model.weights * prepare(model, x) + model.biases;
}

Eigen::VectorXd predict(const ClassifierModel& model, std::span<const double> x) {
  return softmax(logits(model, x));
}

SplitIndices stratified_split(std::span<const int> labels, std::size_t num_classes, double test_fraction,
                              std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> per_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) per_class[static_cast<std::size_t>(labels[i])].push_back(i);
  Rng rng(seed);
  SplitIndices split;
  for (auto& rows : per_class) {
    if (rows.empty()) continue;
    shuffle(rows.begin(), rows.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
    split.test.insert(split.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::ranges::sort(split.train);
  std::ranges::sort(split.test);
  return split;
}

double family_aggregate(std::span<const std::string> truth, std::span<const std::string> predicted,
                        const std::map<std::string, std::string>& family_of) {
  if (truth.size() != predicted.size()) throw Error("family_aggregate: length mismatch");
  if (truth.empty()) return 0.0;
  auto family = [&](const std::string& cls) -> const std::string& {
    const auto it = family_of.find(cls);
    if (it == family_of.end()) throw Error("unknown class '" + cls + "' has no family");
    return it->second;
  };
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += family(truth[i]) == family(predicted[i]);
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

EvalReport evaluate(const ClassifierModel& model, const Eigen::MatrixXd& features,
                    std::span<const std::string> labels, std::span<const std::size_t> rows) {
  EvalReport report;
  report.class_ids = model.class_ids;
  const std::size_t k = model.num_classes();
  report.confusion.assign(k, std::vector<std::size_t>(k, 0));

  std::map<std::string, std::size_t> index_of;
  for (std::size_t c = 0; c < k; ++c) index_of[model.class_ids[c]] = c;

  std::vector<std::string> truth, predicted;
  std::size_t correct = 0;
  std::vector<double> x(static_cast<std::size_t>(features.cols()));
  for (std::size_t row : rows) {
    const auto it = index_of.find(labels[row]);
    if (it == index_of.end()) throw Error("class '" + labels[row] + "' is not known to the model");
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = features(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));
    const std::size_t guess = argmax(logits(model, x));
    ++report.confusion[it->second][guess];
    correct += guess == it->second;
    truth.push_back(labels[row]);
    predicted.push_back(model.class_ids[guess]);
  }
  report.test_count = rows.size();
  if (!rows.empty()) report.individual_accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  report.family_accuracy = family_aggregate(truth, predicted, model.family_of);
  return report;
}

TrainResult train(const Eigen::MatrixXd& features, std::span<const std::string> labels,
                  const std::map<std::string, std::string>& family_of, const TrainConfig& config) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw Error("train: feature rows and labels differ in count");

  TrainResult result;
  auto& model = result.model;
  model.train_config = config;
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  if (counts.size() < 2) throw Error("train: need at least two classes, got " + std::to_string(counts.size()));
  for (const auto& [cls, c] : counts) {
    if (c < 5) throw Error("train: class '" + cls + "' has " + std::to_string(c) + " records; at least 5 required");
    model.class_ids.push_back(cls);
    const auto fam = family_of.find(cls);
    model.family_of[cls] = fam == family_of.end() ? cls : fam->second;
  }

  std::map<std::string, int> index_of;
  for (std::size_t c = 0; c < model.class_ids.size(); ++c) index_of[model.class_ids[c]] = static_cast<int>(c);
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = index_of[labels[i]];

  result.split = stratified_split(y, model.class_ids.size(), config.test_fraction, config.seed);
  const Eigen::MatrixXd all = normalized_rows(features, config.l2_normalize);
  Eigen::MatrixXd x_train(static_cast<Eigen::Index>(result.split.train.size()), all.cols());
  std::vector<int> y_train;
  for (std::size_t i = 0; i < result.split.train.size(); ++i) {
    x_train.row(static_cast<Eigen::Index>(i)) = all.row(static_cast<Eigen::Index>(result.split.train[i]));
    y_train.push_back(y[result.split.train[i]]);
  }

  const auto k = static_cast<Eigen::Index>(model.class_ids.size());
  model.weights = Eigen::MatrixXd::Zero(k, all.cols());
  model.biases = Eigen::VectorXd::Zero(k);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto step = loss_and_gradient(model.weights, model.biases, x_train, y_train, config.l2);
    if (!std::isfinite(step.loss))
      throw Error("train: loss became non-finite at epoch " + std::to_string(epoch) +
                  "; lower the learning rate or normalize features");
    result.loss_history.push_back(step.loss);
    model.weights -= config.learning_rate * step.grad_weights;
    model.biases -= config.learning_rate * step.grad_biases;
  }
  // Round to storage precision before evaluating.
  model.weights = model.weights.cast<float>().cast<double>();
  model.biases = model.biases.cast<float>().cast<double>();
  const auto final_loss = loss_and_gradient(model.weights, model.biases, x_train, y_train, config.l2).loss;
  if (!std::isfinite(final_loss)) throw Error("train: final loss is non-finite");
  result.loss_history.push_back(final_loss);

  result.report = evaluate(model, features, labels, result.split.test);
  return result;
}

json to_json(const EvalReport& r) {
  return json{{"individual_accuracy", r.individual_accuracy},
              {"family_accuracy", r.family_accuracy},
              {"class_ids", r.class_ids},
              {"confusion", r.confusion},
              {"test_count", r.test_count}};
}

void save_model(const std::filesystem::path& prefix, const ClassifierModel& model, const json& extra) {
  std::vector<float> w;
  w.reserve(static_cast<std::size_t>(model.weights.size()));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) w.push_back(static_cast<float>(model.weights(r, c)));
  embed::write_f32(embed::matrix_path(prefix), w);

  std::vector<float> biases;
  for (Eigen::Index i = 0; i < model.biases.size(); ++i) biases.push_back(static_cast<float>(model.biases(i)));
  const auto& tc = model.train_config;
  json meta{{"format", embed::kStoreFormat},
            {"kind", "softmax-regression"},
            {"rows", model.weights.rows()},
            {"dim", model.weights.cols()},
            {"class_ids", model.class_ids},
            {"family_of", model.family_of},
            {"biases", biases},
            {"train_config",
             {{"learning_rate", tc.learning_rate},
              {"epochs", tc.epochs},
              {"l2", tc.l2},
              {"seed", tc.seed},
              {"l2_normalize", tc.l2_normalize},
              {"test_fraction", tc.test_fraction}}},
            {"extra", extra}};
  jsonl::write_text_file(embed::meta_path(prefix), meta.dump(2) + "\n");
}

ClassifierModel load_model(const std::filesystem::path& prefix, json* extra) {
  const json meta = json::parse(jsonl::read_text_file(embed::meta_path(prefix)));
  ClassifierModel model;
  const auto rows = meta.at("rows").get<Eigen::Index>();
  const auto dim = meta.at("dim").get<Eigen::Index>();
  const auto w = embed::read_f32(embed::matrix_path(prefix));
  if (static_cast<Eigen::Index>(w.size()) != rows * dim) throw Error("model weights do not match metadata shape");
  model.weights.resize(rows, dim);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) model.weights(r, c) = w[static_cast<std::size_t>(r * dim + c)];
  const auto biases = meta.at("biases").get<std::vector<float>>();
  if (static_cast<Eigen::Index>(biases.size()) != rows) throw Error("model biases do not match class count");
  model.biases.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) model.biases(i) = biases[static_cast<std::size_t>(i)];
  meta.at("class_ids").get_to(model.class_ids);
  meta.at("family_of").get_to(model.family_of);
  const auto& tc = meta.at("train_config");
  model.train_config.learning_rate = tc.at("learning_rate");
  model.train_config.epochs = tc.at("epochs");
  model.train_config.l2 = tc.at("l2");
  model.train_config.seed = tc.at("seed");
  model.train_config.l2_normalize = tc.at("l2_normalize");
  model.train_config.test_fraction = tc.at("test_fraction");
  if (extra) *extra = meta.value("extra", json::object());
  return model;
}

}  // namespace topmind::fingerprint
