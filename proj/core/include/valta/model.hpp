#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "valta/concrete.hpp"
#include "valta/corpus.hpp"
#include "valta/rng.hpp"

// The network: a shared bag-of-words trunk feeding a sentence-level aspect
// encoder, a user-item topic encoder, a masked log-linear decoder over the
// vocabulary, and a biased aspect-weighted rating head.

namespace valta {

struct ModelConfig {
  int vocab_size = 0;        // V
  int num_aspects = 0;       // A
  int topics_per_aspect = 0; // K
  int hidden_size = 256;     // H
  double tau_z = 0.66;       // sentence aspect temperature (peaky)
  double tau_psi = 5.0;      // topic proportion temperature (diffuse)

  void validate() const;  // throws std::invalid_argument
  bool operator==(const ModelConfig& other) const = default;
};

// y = weight * x + bias
struct Affine {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    return weight * x + bias;
  }
};

struct ModelParams {
  ModelConfig config;
  Affine trunk;        // H x V, shared by sentence, user and item encoders
  Affine aspect_head;  // A x H
  Affine topic_head;   // A*K x 2H, on concat(h_item, h_user)
  Affine decoder;      // V x A*K, columns are per-(aspect,topic) word weights
  double bias_global = 0.0;
  std::map<std::string, double> bias_item;
  std::map<std::string, double> bias_user;
};

// Latents inferred for one review: a relaxed aspect assignment per sentence,
// topic logits rho (A x K) for the user-item pair, and one relaxed topic
// distribution per aspect.
struct LatentState {
  std::vector<ConcreteSample> z;    // per sentence, dimension A
  Eigen::MatrixXd rho;              // A x K
  std::vector<ConcreteSample> psi;  // per aspect, dimension K

  // psi samples stacked as an A x K row-stochastic matrix.
  Eigen::MatrixXd psi_matrix() const;
};

// Glorot-uniform weights, zero head/decoder biases, per-id rating biases zero,
// global bias as given (train mean rating by convention).
ModelParams init_params(const ModelConfig& config,
                        const std::vector<std::string>& user_ids,
                        const std::vector<std::string>& item_ids,
                        double global_bias, Rng& rng);

// h = tanh(trunk(bow / total)). Throws std::invalid_argument on an empty bag.
Eigen::VectorXd encode_hidden(const BagOfWords& bow, const ModelParams& params);

// Aspect logits o = aspect_head(encode_hidden(sentence)), sampled at tau_z.
ConcreteSample encode_sentence_aspect(const BagOfWords& sentence_bow,
                                      const ModelParams& params,
                                      const Eigen::VectorXd& noise);

// rho = topic_head(concat(h_item, h_user)) reshaped A x K (row-major);
// psi_a sampled independently per aspect at tau_psi. noise is A x K.
LatentState encode_user_item(const BagOfWords& user_bow,
                             const BagOfWords& item_bow,
                             const ModelParams& params,
                             const Eigen::MatrixXd& noise);

// Row a of the result is z[a] * psi.row(a).
Eigen::MatrixXd mask_topics(const ConcreteSample& z, const Eigen::MatrixXd& psi);

// Row-major flatten of an A x K matrix to length A*K, the decoder input order.
Eigen::VectorXd flatten_topics(const Eigen::MatrixXd& masked);

// log softmax(decoder(masked)); exponentiates to a distribution over V words.
Eigen::VectorXd decode_log_probs(const Eigen::VectorXd& masked,
                                 const ModelParams& params);

// Dot product of integer counts with log-probabilities; always <= 0.
double sentence_log_likelihood(const BagOfWords& sentence_bow,
                               const Eigen::VectorXd& log_probs);

// Raw aspect scores lambda = aspect_head(h); the rating head softmaxes the
// user/item average before weighting.
Eigen::VectorXd aspect_importance(const Eigen::VectorXd& hidden,
                                  const ModelParams& params);

struct RatingBreakdown {
  double prediction = 0.0;
  Eigen::VectorXd importance;     // softmax(0.5 (lambda_i + lambda_u)), length A
  Eigen::VectorXd aspect_rating;  // sum_k rho(a, k), length A
};

// r_hat = b0 + b_i + b_u + (1/A) sum_a importance_a * aspect_rating_a.
// Unknown user/item ids contribute bias 0 (cold start); the bags must still
// be nonempty.
RatingBreakdown predict_rating(const std::string& user_id,
                               const std::string& item_id,
                               const BagOfWords& user_bow,
                               const BagOfWords& item_bow,
                               const ModelParams& params);

// --- checkpoints ---------------------------------------------------------
// Single binary file: magic + version, JSON manifest (config, vocabulary,
// id lists, hashes), then raw little-endian doubles. Round-trips bitwise.

void checkpoint_save(const ModelParams& params,
                     const std::vector<std::string>& vocab,
                     const std::filesystem::path& path);

struct Checkpoint {
  ModelParams params;
  std::vector<std::string> vocab;
};

Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace valta
