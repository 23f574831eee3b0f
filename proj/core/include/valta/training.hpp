#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "valta/corpus.hpp"
#include "valta/model.hpp"
#include "valta/rng.hpp"

// Minibatch stochastic optimization of the four-term objective:
// reconstruction, rating MSE, and the two KL regularizers.

namespace valta {

struct RatingScale {
  double min = 0.0;
  double max = 0.0;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size_reviews = 100;
  double learning_rate = 1e-3;  // ADAM defaults
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  // total = w_gen*gen + w_mse*mse + w_kl_z*kl_z + w_kl_psi*kl_psi
  double weight_gen = 1.0;
  double weight_mse = 1.0;
  double weight_kl_z = 1.0;
  double weight_kl_psi = 1.0;
  // Prediction clamp range; unset means "derive from train ratings".
  std::optional<RatingScale> rating_scale;
  // Fraction of train reviews held out for best-checkpoint selection by MSE.
  double validation_fraction = 0.1;

  void validate() const;  // throws std::invalid_argument
};

struct LossBreakdown {
  double gen = 0.0;     // negative reconstruction log-likelihood, >= 0
  double mse = 0.0;     // squared rating error
  double kl_z = 0.0;    // >= 0
  double kl_psi = 0.0;  // >= 0
  double total = 0.0;   // weighted sum
};

// One uniform noise draw per latent: a length-A vector per sentence for z,
// and an A x K matrix for psi.
struct ReviewNoise {
  std::vector<Eigen::VectorXd> z;
  Eigen::MatrixXd psi;
};

ReviewNoise draw_review_noise(int num_sentences, int num_aspects,
                              int topics_per_aspect, Rng& rng);

// Single-sample estimate of the objective for one review. The review's user
// and item must be present in the corpus bags.
LossBreakdown review_loss(const ReviewRecord& review, const Corpus& corpus,
                          const ModelParams& params, const TrainConfig& config,
                          const ReviewNoise& noise);

// Gradients, same shapes as the parameters; bias maps hold touched ids only.
struct ParamGradients {
  Eigen::MatrixXd trunk_w;
  Eigen::VectorXd trunk_b;
  Eigen::MatrixXd aspect_w;
  Eigen::VectorXd aspect_b;
  Eigen::MatrixXd topic_w;
  Eigen::VectorXd topic_b;
  Eigen::MatrixXd decoder_w;
  Eigen::VectorXd decoder_b;
  double bias_global = 0.0;
  std::map<std::string, double> bias_item;
  std::map<std::string, double> bias_user;

  static ParamGradients zeros_like(const ModelParams& params);
  void accumulate(const ParamGradients& other);
  void scale(double factor);
};

// Loss plus the analytic gradient of `total` w.r.t. every parameter group.
LossBreakdown review_loss_grad(const ReviewRecord& review, const Corpus& corpus,
                               const ModelParams& params,
                               const TrainConfig& config,
                               const ReviewNoise& noise, ParamGradients* grads);

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& params, const TrainConfig& config);
  void step(ModelParams& params, const ParamGradients& grads);
  std::int64_t steps() const { return step_count_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::int64_t step_count_ = 0;
  Eigen::MatrixXd m_trunk_w_, v_trunk_w_, m_aspect_w_, v_aspect_w_;
  Eigen::MatrixXd m_topic_w_, v_topic_w_, m_decoder_w_, v_decoder_w_;
  Eigen::VectorXd m_trunk_b_, v_trunk_b_, m_aspect_b_, v_aspect_b_;
  Eigen::VectorXd m_topic_b_, v_topic_b_, m_decoder_b_, v_decoder_b_;
  double m_b0_ = 0.0, v_b0_ = 0.0;
  std::map<std::string, std::pair<double, double>> mv_bias_item_, mv_bias_user_;

  void step_dense(Eigen::MatrixXd& p, const Eigen::MatrixXd& g,
                  Eigen::MatrixXd& m, Eigen::MatrixXd& v, double corr1,
                  double corr2);
  void step_dense(Eigen::VectorXd& p, const Eigen::VectorXd& g,
                  Eigen::VectorXd& m, Eigen::VectorXd& v, double corr1,
                  double corr2);
  void step_scalar(double& p, double g, double& m, double& v, double corr1,
                   double corr2);
};

struct EpochStats {
  int epoch = 0;           // 1-based
  LossBreakdown train;     // averaged per review over the epoch
  std::optional<double> validation_mse;
  double wall_time_s = 0.0;
};

struct TrainResult {
  ModelParams params;                      // after the last epoch
  std::optional<ModelParams> best_params;  // lowest validation MSE
  std::optional<double> best_validation_mse;
  std::vector<EpochStats> history;
};

// Deterministic given config.seed: init, shuffling and noise are all seeded.
// Reviews shuffle each epoch; the last partial batch is kept. Aborts with a
// diagnostic naming the offending term and batch on non-finite loss.
// epoch_callback, when set, observes each EpochStats as it is produced.
TrainResult train(const Corpus& corpus, const ModelConfig& model_config,
                  const TrainConfig& train_config,
                  const std::function<void(const EpochStats&)>& epoch_callback = {});

// Mean squared error over test reviews, predictions clamped to the scale.
// Throws std::runtime_error when the corpus has no test reviews.
double evaluate_mse(const Corpus& corpus, const ModelParams& params,
                    const RatingScale& scale);

// Clamp range derived from train ratings.
RatingScale derive_rating_scale(const Corpus& corpus);

}  // namespace valta
