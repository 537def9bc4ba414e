#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace topmind::fingerprint {

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::uint64_t seed = 0;  ///< drives the train/test split
  bool l2_normalize = false;
  double test_fraction = 0.2;
};

/// Multinomial logistic regression. Row k of `weights` and `biases[k]` score
/// class `class_ids[k]`. Weights are kept at float32 precision so a model
/// read back from disk predicts exactly what the trainer evaluated.
struct ClassifierModel {
  Eigen::MatrixXd weights;  ///< classes x dim
  Eigen::VectorXd biases;   ///< classes
  std::vector<std::string> class_ids;
  std::map<std::string, std::string> family_of;
  TrainConfig train_config;

  std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t num_classes() const { return class_ids.size(); }
};

struct EvalReport {
  double individual_accuracy = 0.0;
  double family_accuracy = 0.0;
  std::vector<std::string> class_ids;
  std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]
  std::size_t test_count = 0;
};

nlohmann::json to_json(const EvalReport& r);

/// Mean cross-entropy plus (l2 / 2) * ||W||^2 (biases unpenalized), and its
/// gradient. `features` is n x dim, `labels[i]` indexes a class row.
struct LossGradient {
  double loss = 0.0;
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_biases;
};

LossGradient loss_and_gradient(const Eigen::MatrixXd& weights, const Eigen::VectorXd& biases,
                               const Eigen::MatrixXd& features, std::span<const int> labels, double l2);

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Class probabilities for one feature vector. Throws on a dimension
/// mismatch. Applies the model's feature normalization.
Eigen::VectorXd predict(const ClassifierModel& model, std::span<const double> x);
Eigen::VectorXd logits(const ClassifierModel& model, std::span<const double> x);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class, a seeded shuffle sends round(test_fraction * n_c) rows (at
/// least one) to the test set.
SplitIndices stratified_split(std::span<const int> labels, std::size_t num_classes, double test_fraction,
                              std::uint64_t seed);

struct TrainResult {
  ClassifierModel model;
  EvalReport report;
  SplitIndices split;
  std::vector<double> loss_history;  ///< training loss before each epoch, then final
};

/// Full-batch gradient descent from zero weights on the stratified training
/// split; evaluation on the held-out rows. Requires at least two classes with
/// at least five rows each; aborts if the loss stops being finite.
TrainResult train(const Eigen::MatrixXd& features, std::span<const std::string> labels,
                  const std::map<std::string, std::string>& family_of, const TrainConfig& config);

/// Accuracy and confusion of `model` on the given rows.
EvalReport evaluate(const ClassifierModel& model, const Eigen::MatrixXd& features,
                    std::span<const std::string> labels, std::span<const std::size_t> rows);

/// Fraction of predictions whose family matches the true family. Throws for
/// classes missing from `family_of`.
double family_aggregate(std::span<const std::string> truth, std::span<const std::string> predicted,
                        const std::map<std::string, std::string>& family_of);

/// MODEL.f32 holds the weights (classes x dim, float32, row-major);
/// MODEL.json holds biases, class ids, families, training config and `extra`.
void save_model(const std::filesystem::path& prefix, const ClassifierModel& model,
                const nlohmann::json& extra = nlohmann::json::object());
ClassifierModel load_model(const std::filesystem::path& prefix, nlohmann::json* extra = nullptr);

}  // namespace topmind::fingerprint
