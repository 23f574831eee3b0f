#include "valta/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "valta/concrete.hpp"

namespace valta {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size_reviews < 1) {
    throw std::invalid_argument("batch_size_reviews must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw std::invalid_argument("validation_fraction must lie in [0, 1)");
  }
  if (rating_scale && !(rating_scale->min <= rating_scale->max)) {
    throw std::invalid_argument("rating_scale.min must not exceed max");
  }
}

ReviewNoise draw_review_noise(int num_sentences, int num_aspects,
                              int topics_per_aspect, Rng& rng) {
  ReviewNoise noise;
  noise.z.reserve(num_sentences);
  for (int s = 0; s < num_sentences; ++s) {
    Eigen::VectorXd u(num_aspects);
    for (int a = 0; a < num_aspects; ++a) u[a] = uniform_open01(rng);
    noise.z.push_back(std::move(u));
  }
  noise.psi.resize(num_aspects, topics_per_aspect);
  for (int a = 0; a < num_aspects; ++a) {
    for (int k = 0; k < topics_per_aspect; ++k) {
      noise.psi(a, k) = uniform_open01(rng);
    }
  }
  return noise;
}

ParamGradients ParamGradients::zeros_like(const ModelParams& params) {
  ParamGradients g;
  g.trunk_w = Eigen::MatrixXd::Zero(params.trunk.weight.rows(),
                                    params.trunk.weight.cols());
  g.trunk_b = Eigen::VectorXd::Zero(params.trunk.bias.size());
  g.aspect_w = Eigen::MatrixXd::Zero(params.aspect_head.weight.rows(),
                                     params.aspect_head.weight.cols());
  g.aspect_b = Eigen::VectorXd::Zero(params.aspect_head.bias.size());
  g.topic_w = Eigen::MatrixXd::Zero(params.topic_head.weight.rows(),
                                    params.topic_head.weight.cols());
  g.topic_b = Eigen::VectorXd::Zero(params.topic_head.bias.size());
  g.decoder_w = Eigen::MatrixXd::Zero(params.decoder.weight.rows(),
                                      params.decoder.weight.cols());
  g.decoder_b = Eigen::VectorXd::Zero(params.decoder.bias.size());
  return g;
}

void ParamGradients::accumulate(const ParamGradients& other) {
  trunk_w += other.trunk_w;
  trunk_b += other.trunk_b;
  aspect_w += other.aspect_w;
  aspect_b += other.aspect_b;
  topic_w += other.topic_w;
  topic_b += other.topic_b;
  decoder_w += other.decoder_w;
  decoder_b += other.decoder_b;
  bias_global += other.bias_global;
  for (const auto& [id, g] : other.bias_item) bias_item[id] += g;
  for (const auto& [id, g] : other.bias_user) bias_user[id] += g;
}

void ParamGradients::scale(double factor) {
  trunk_w *= factor;
  trunk_b *= factor;
  aspect_w *= factor;
  aspect_b *= factor;
  topic_w *= factor;
  topic_b *= factor;
  decoder_w *= factor;
  decoder_b *= factor;
  bias_global *= factor;
  for (auto& [id, g] : bias_item) g *= factor;
  for (auto& [id, g] : bias_user) g *= factor;
}

namespace {

// Backprop through y = softmax(x): dx = y .* (dy - dot(dy, y)).
Eigen::VectorXd softmax_backward(const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& dy) {
  return y.array() * (dy.array() - dy.dot(y));
}

// d/dlogits of KL(softmax(logits) || uniform): p .* (log p - sum p log p).
Eigen::VectorXd kl_uniform_backward(const Eigen::VectorXd& logp) {
  const Eigen::VectorXd p = logp.array().exp();
  return p.array() * (logp.array() - p.dot(logp));
}

void add_trunk_grad(ParamGradients* grads, const BagOfWords& bow,
                    const Eigen::VectorXd& d_pre) {
  const double total = static_cast<double>(bow.total());
  for (const auto& [word, count] : bow.entries()) {
    grads->trunk_w.col(word) += (static_cast<double>(count) / total) * d_pre;
  }
  grads->trunk_b += d_pre;
}

// Forward pass for one review with everything the backward pass needs; when
// grads is null only the loss is computed.
LossBreakdown run_review(const ReviewRecord& review, const Corpus& corpus,
                         const ModelParams& params, const TrainConfig& config,
                         const ReviewNoise& noise, ParamGradients* grads) {
  const int A = params.config.num_aspects;
  const int K = params.config.topics_per_aspect;
  const int H = params.config.hidden_size;

  auto user_it = corpus.user_bow.find(review.user_id);
  auto item_it = corpus.item_bow.find(review.item_id);
  if (user_it == corpus.user_bow.end() || item_it == corpus.item_bow.end()) {
    throw std::invalid_argument("review user or item missing from corpus bags");
  }
  const BagOfWords& user_bow = user_it->second;
  const BagOfWords& item_bow = item_it->second;
  const auto num_sentences = review.sentences.size();
  if (noise.z.size() != num_sentences || noise.psi.rows() != A ||
      noise.psi.cols() != K) {
    throw std::invalid_argument("noise shape does not match review");
  }

  // --- forward ---
  const Eigen::VectorXd h_item = encode_hidden(item_bow, params);
  const Eigen::VectorXd h_user = encode_hidden(user_bow, params);
  Eigen::VectorXd joint(2 * H);
  joint << h_item, h_user;

  const Eigen::VectorXd rho_flat = params.topic_head(joint);
  Eigen::MatrixXd rho(A, K);
  for (int a = 0; a < A; ++a) {
    for (int k = 0; k < K; ++k) rho(a, k) = rho_flat[a * K + k];
  }

  Eigen::MatrixXd psi(A, K);                 // sampled topic distributions
  std::vector<Eigen::VectorXd> logq_rho(A);  // log softmax of rho rows
  double kl_psi = 0.0;
  for (int a = 0; a < A; ++a) {
    ConcreteParams cp{rho.row(a).transpose(), params.config.tau_psi};
    psi.row(a) = concrete_sample(cp, noise.psi.row(a).transpose())
                     .value.transpose();
    logq_rho[a] = log_softmax(cp.logits);
    kl_psi += kl_to_uniform(cp);
  }

  std::vector<Eigen::VectorXd> h_sent(num_sentences);
  std::vector<Eigen::VectorXd> o_sent(num_sentences);
  std::vector<Eigen::VectorXd> z_sent(num_sentences);
  std::vector<Eigen::VectorXd> logp_o(num_sentences);
  std::vector<Eigen::VectorXd> masked_flat(num_sentences);
  std::vector<Eigen::VectorXd> log_probs(num_sentences);
  double gen = 0.0;
  double kl_z = 0.0;
  for (std::size_t s = 0; s < num_sentences; ++s) {
    h_sent[s] = encode_hidden(review.sentences[s], params);
    o_sent[s] = params.aspect_head(h_sent[s]);
    ConcreteParams cp{o_sent[s], params.config.tau_z};
    ConcreteSample z = concrete_sample(cp, noise.z[s]);
    z_sent[s] = z.value;
    logp_o[s] = log_softmax(o_sent[s]);
    kl_z += kl_to_uniform(cp);
    masked_flat[s] = flatten_topics(mask_topics(z, psi));
    log_probs[s] = decode_log_probs(masked_flat[s], params);
    gen -= sentence_log_likelihood(review.sentences[s], log_probs[s]);
  }

  const Eigen::VectorXd lam_item = params.aspect_head(h_item);
  const Eigen::VectorXd lam_user = params.aspect_head(h_user);
  const Eigen::VectorXd lambda = softmax(0.5 * (lam_item + lam_user));
  const Eigen::VectorXd aspect_rating = rho.rowwise().sum();
  auto bias_or_zero = [](const std::map<std::string, double>& m,
                         const std::string& id) {
    auto it = m.find(id);
    return it == m.end() ? 0.0 : it->second;
  };
  const double b_item = bias_or_zero(params.bias_item, review.item_id);
  const double b_user = bias_or_zero(params.bias_user, review.user_id);
  const double r_hat = params.bias_global + b_item + b_user +
                       lambda.dot(aspect_rating) / static_cast<double>(A);
  const double err = r_hat - review.rating;

  LossBreakdown loss;
  loss.gen = gen;
  loss.mse = err * err;
  loss.kl_z = kl_z;
  loss.kl_psi = kl_psi;
  loss.total = config.weight_gen * loss.gen + config.weight_mse * loss.mse +
               config.weight_kl_z * loss.kl_z +
               config.weight_kl_psi * loss.kl_psi;
  if (grads == nullptr) return loss;

  // --- backward ---
  Eigen::VectorXd d_h_item = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd d_h_user = Eigen::VectorXd::Zero(H);
  Eigen::MatrixXd d_rho = Eigen::MatrixXd::Zero(A, K);
  Eigen::MatrixXd d_psi = Eigen::MatrixXd::Zero(A, K);

  // Rating head.
  const double dr = config.weight_mse * 2.0 * err;
  grads->bias_global += dr;
  grads->bias_item[review.item_id] += dr;
  grads->bias_user[review.user_id] += dr;
  const Eigen::VectorXd d_lambda = (dr / A) * aspect_rating;
  for (int a = 0; a < A; ++a) {
    d_rho.row(a).array() += (dr / A) * lambda[a];
  }
  const Eigen::VectorXd d_v = 0.5 * softmax_backward(lambda, d_lambda);
  grads->aspect_w += d_v * h_item.transpose() + d_v * h_user.transpose();
  grads->aspect_b += 2.0 * d_v;
  d_h_item += params.aspect_head.weight.transpose() * d_v;
  d_h_user += params.aspect_head.weight.transpose() * d_v;

  // Reconstruction and sentence-aspect paths.
  for (std::size_t s = 0; s < num_sentences; ++s) {
    const BagOfWords& counts = review.sentences[s];
    const double n_tokens = static_cast<double>(counts.total());

    Eigen::VectorXd d_w =
        (config.weight_gen * n_tokens) * log_probs[s].array().exp().matrix();
    for (const auto& [word, count] : counts.entries()) {
      d_w[word] -= config.weight_gen * static_cast<double>(count);
    }
    grads->decoder_w += d_w * masked_flat[s].transpose();
    grads->decoder_b += d_w;
    const Eigen::VectorXd d_masked = params.decoder.weight.transpose() * d_w;

    Eigen::VectorXd d_z(A);
    for (int a = 0; a < A; ++a) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k) {
        const double dm = d_masked[a * K + k];
        acc += dm * psi(a, k);
        d_psi(a, k) += dm * z_sent[s][a];
      }
      d_z[a] = acc;
    }

    Eigen::VectorXd d_o =
        softmax_backward(z_sent[s], d_z) / params.config.tau_z;
    d_o += config.weight_kl_z * kl_uniform_backward(logp_o[s]);
    grads->aspect_w += d_o * h_sent[s].transpose();
    grads->aspect_b += d_o;
    const Eigen::VectorXd d_h =
        params.aspect_head.weight.transpose() * d_o;
    const Eigen::VectorXd d_pre =
        (1.0 - h_sent[s].array().square()) * d_h.array();
    add_trunk_grad(grads, counts, d_pre);
  }

  // Topic distributions and their logits.
  Eigen::VectorXd d_rho_flat(A * K);
  for (int a = 0; a < A; ++a) {
    const Eigen::VectorXd psi_a = psi.row(a).transpose();
    Eigen::VectorXd d_yp = softmax_backward(psi_a, d_psi.row(a).transpose()) /
                           params.config.tau_psi;
    d_yp += config.weight_kl_psi * kl_uniform_backward(logq_rho[a]);
    for (int k = 0; k < K; ++k) {
      d_rho_flat[a * K + k] = d_rho(a, k) + d_yp[k];
    }
  }
  grads->topic_w += d_rho_flat * joint.transpose();
  grads->topic_b += d_rho_flat;
  const Eigen::VectorXd d_joint =
      params.topic_head.weight.transpose() * d_rho_flat;
  d_h_item += d_joint.head(H);
  d_h_user += d_joint.tail(H);

  // Shared trunk through the two history encoders.
  const Eigen::VectorXd d_pre_item =
      (1.0 - h_item.array().square()) * d_h_item.array();
  add_trunk_grad(grads, item_bow, d_pre_item);
  const Eigen::VectorXd d_pre_user =
      (1.0 - h_user.array().square()) * d_h_user.array();
  add_trunk_grad(grads, user_bow, d_pre_user);

  return loss;
}

const char* non_finite_term(const LossBreakdown& loss) {
  if (!std::isfinite(loss.gen)) return "gen";
  if (!std::isfinite(loss.mse)) return "mse";
  if (!std::isfinite(loss.kl_z)) return "kl_z";
  if (!std::isfinite(loss.kl_psi)) return "kl_psi";
  if (!std::isfinite(loss.total)) return "total";
  return nullptr;
}

}  // namespace

LossBreakdown review_loss(const ReviewRecord& review, const Corpus& corpus,
                          const ModelParams& params, const TrainConfig& config,
                          const ReviewNoise& noise) {
  return run_review(review, corpus, params, config, noise, nullptr);
}

LossBreakdown review_loss_grad(const ReviewRecord& review, const Corpus& corpus,
                               const ModelParams& params,
                               const TrainConfig& config,
                               const ReviewNoise& noise,
                               ParamGradients* grads) {
  return run_review(review, corpus, params, config, noise, grads);
}

// --- Adam ------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(const ModelParams& params,
                             const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      epsilon_(config.adam_epsilon) {
  auto zeros_m = [](const Eigen::MatrixXd& p) {
    return Eigen::MatrixXd::Zero(p.rows(), p.cols());
  };
  auto zeros_v = [](const Eigen::VectorXd& p) {
    return Eigen::VectorXd::Zero(p.size());
  };
  m_trunk_w_ = zeros_m(params.trunk.weight);
  v_trunk_w_ = zeros_m(params.trunk.weight);
  m_trunk_b_ = zeros_v(params.trunk.bias);
  v_trunk_b_ = zeros_v(params.trunk.bias);
  m_aspect_w_ = zeros_m(params.aspect_head.weight);
  v_aspect_w_ = zeros_m(params.aspect_head.weight);
  m_aspect_b_ = zeros_v(params.aspect_head.bias);
  v_aspect_b_ = zeros_v(params.aspect_head.bias);
  m_topic_w_ = zeros_m(params.topic_head.weight);
  v_topic_w_ = zeros_m(params.topic_head.weight);
  m_topic_b_ = zeros_v(params.topic_head.bias);
  v_topic_b_ = zeros_v(params.topic_head.bias);
  m_decoder_w_ = zeros_m(params.decoder.weight);
  v_decoder_w_ = zeros_m(params.decoder.weight);
  m_decoder_b_ = zeros_v(params.decoder.bias);
  v_decoder_b_ = zeros_v(params.decoder.bias);
}

void AdamOptimizer::step_dense(Eigen::MatrixXd& p, const Eigen::MatrixXd& g,
                               Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                               double corr1, double corr2) {
  m = beta1_ * m + (1.0 - beta1_) * g;
  v = beta2_ * v + (1.0 - beta2_) * g.array().square().matrix();
  p.array() -=
      lr_ * (m.array() / corr1) / ((v.array() / corr2).sqrt() + epsilon_);
}

void AdamOptimizer::step_dense(Eigen::VectorXd& p, const Eigen::VectorXd& g,
                               Eigen::VectorXd& m, Eigen::VectorXd& v,
                               double corr1, double corr2) {
  m = beta1_ * m + (1.0 - beta1_) * g;
  v = beta2_ * v + (1.0 - beta2_) * g.array().square().matrix();
  p.array() -=
      lr_ * (m.array() / corr1) / ((v.array() / corr2).sqrt() + epsilon_);
}

void AdamOptimizer::step_scalar(double& p, double g, double& m, double& v,
                                double corr1, double corr2) {
  m = beta1_ * m + (1.0 - beta1_) * g;
  v = beta2_ * v + (1.0 - beta2_) * g * g;
  p -= lr_ * (m / corr1) / (std::sqrt(v / corr2) + epsilon_);
}

void AdamOptimizer::step(ModelParams& params, const ParamGradients& grads) {
  ++step_count_;
  const double corr1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double corr2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

  step_dense(params.trunk.weight, grads.trunk_w, m_trunk_w_, v_trunk_w_, corr1,
             corr2);
  step_dense(params.trunk.bias, grads.trunk_b, m_trunk_b_, v_trunk_b_, corr1,
             corr2);
  step_dense(params.aspect_head.weight, grads.aspect_w, m_aspect_w_,
             v_aspect_w_, corr1, corr2);
  step_dense(params.aspect_head.bias, grads.aspect_b, m_aspect_b_, v_aspect_b_,
             corr1, corr2);
  step_dense(params.topic_head.weight, grads.topic_w, m_topic_w_, v_topic_w_,
             corr1, corr2);
  step_dense(params.topic_head.bias, grads.topic_b, m_topic_b_, v_topic_b_,
             corr1, corr2);
  step_dense(params.decoder.weight, grads.decoder_w, m_decoder_w_,
             v_decoder_w_, corr1, corr2);
  step_dense(params.decoder.bias, grads.decoder_b, m_decoder_b_, v_decoder_b_,
             corr1, corr2);
  step_scalar(params.bias_global, grads.bias_global, m_b0_, v_b0_, corr1,
              corr2);
  // Lazy sparse updates: only ids touched by the batch move.
  for (const auto& [id, g] : grads.bias_item) {
    auto& [m, v] = mv_bias_item_[id];
    step_scalar(params.bias_item[id], g, m, v, corr1, corr2);
  }
  for (const auto& [id, g] : grads.bias_user) {
    auto& [m, v] = mv_bias_user_[id];
    step_scalar(params.bias_user[id], g, m, v, corr1, corr2);
  }
}

// --- training loop -----------------------------------------------------------

RatingScale derive_rating_scale(const Corpus& corpus) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& rec : corpus.reviews) {
    if (rec.split != Split::kTrain) continue;
    lo = std::min(lo, rec.rating);
    hi = std::max(hi, rec.rating);
  }
  if (!std::isfinite(lo)) {
    throw std::runtime_error("corpus has no train reviews");
  }
  return {lo, hi};
}

namespace {

double clamped_prediction(const Corpus& corpus, const ModelParams& params,
                          const ReviewRecord& rec, const RatingScale& scale) {
  const double raw =
      predict_rating(rec.user_id, rec.item_id, corpus.user_bow.at(rec.user_id),
                     corpus.item_bow.at(rec.item_id), params)
          .prediction;
  return std::clamp(raw, scale.min, scale.max);
}

double mse_over(const Corpus& corpus, const ModelParams& params,
                const std::vector<std::size_t>& indices,
                const RatingScale& scale) {
  double sum = 0.0;
  for (std::size_t r : indices) {
    const auto& rec = corpus.reviews[r];
    const double err = clamped_prediction(corpus, params, rec, scale) -
                       rec.rating;
    sum += err * err;
  }
  return sum / static_cast<double>(indices.size());
}

}  // namespace

TrainResult train(const Corpus& corpus, const ModelConfig& model_config,
                  const TrainConfig& train_config,
                  const std::function<void(const EpochStats&)>& epoch_callback) {
  model_config.validate();
  train_config.validate();
  if (corpus.reviews.empty()) {
    throw std::invalid_argument("corpus has no reviews");
  }
  if (model_config.vocab_size != corpus.vocabulary.size()) {
    throw std::invalid_argument("model vocab_size does not match corpus");
  }

  std::vector<std::size_t> train_indices;
  double rating_sum = 0.0;
  for (std::size_t r = 0; r < corpus.reviews.size(); ++r) {
    if (corpus.reviews[r].split == Split::kTrain) {
      train_indices.push_back(r);
      rating_sum += corpus.reviews[r].rating;
    }
  }
  if (train_indices.empty()) {
    throw std::runtime_error("corpus has no train reviews");
  }
  const double mean_rating =
      rating_sum / static_cast<double>(train_indices.size());
  const RatingScale scale =
      train_config.rating_scale.value_or(derive_rating_scale(corpus));

  // Hold out a slice of the train reviews for best-checkpoint selection.
  std::vector<std::size_t> optimize_indices = train_indices;
  std::vector<std::size_t> validation_indices;
  if (train_config.validation_fraction > 0.0) {
    Rng rng = make_rng(train_config.seed, 1);
    shuffle(optimize_indices, rng);
    auto n_val = static_cast<std::size_t>(
        std::floor(static_cast<double>(optimize_indices.size()) *
                   train_config.validation_fraction));
    n_val = std::min(n_val, optimize_indices.size() - 1);
    validation_indices.assign(optimize_indices.end() - n_val,
                              optimize_indices.end());
    optimize_indices.resize(optimize_indices.size() - n_val);
    std::sort(optimize_indices.begin(), optimize_indices.end());
    std::sort(validation_indices.begin(), validation_indices.end());
  }

  std::vector<std::string> user_ids, item_ids;
  for (const auto& [id, bow] : corpus.user_bow) user_ids.push_back(id);
  for (const auto& [id, bow] : corpus.item_bow) item_ids.push_back(id);

  Rng init_rng = make_rng(train_config.seed, 2);
  ModelParams params =
      init_params(model_config, user_ids, item_ids, mean_rating, init_rng);
  AdamOptimizer optimizer(params, train_config);

  Rng shuffle_rng = make_rng(train_config.seed, 3);
  Rng noise_rng = make_rng(train_config.seed, 4);

  TrainResult result;
  const auto batch_size =
      static_cast<std::size_t>(train_config.batch_size_reviews);

  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = optimize_indices;
    shuffle(order, shuffle_rng);

    LossBreakdown epoch_sum;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(begin + batch_size, order.size());
      ParamGradients batch_grads = ParamGradients::zeros_like(params);
      for (std::size_t i = begin; i < end; ++i) {
        const ReviewRecord& review = corpus.reviews[order[i]];
        const ReviewNoise noise = draw_review_noise(
            static_cast<int>(review.sentences.size()),
            model_config.num_aspects, model_config.topics_per_aspect,
            noise_rng);
        const LossBreakdown loss = review_loss_grad(
            review, corpus, params, train_config, noise, &batch_grads);
        if (const char* term = non_finite_term(loss)) {
          throw std::runtime_error(
              "non-finite loss term '" + std::string(term) + "' at epoch " +
              std::to_string(epoch) + ", batch " +
              std::to_string(begin / batch_size) + ", review " +
              std::to_string(order[i]));
        }
        epoch_sum.gen += loss.gen;
        epoch_sum.mse += loss.mse;
        epoch_sum.kl_z += loss.kl_z;
        epoch_sum.kl_psi += loss.kl_psi;
        epoch_sum.total += loss.total;
      }
      batch_grads.scale(1.0 / static_cast<double>(end - begin));
      optimizer.step(params, batch_grads);
    }

    EpochStats stats;
    stats.epoch = epoch;
    const double n = static_cast<double>(order.size());
    stats.train = {epoch_sum.gen / n, epoch_sum.mse / n, epoch_sum.kl_z / n,
                   epoch_sum.kl_psi / n, epoch_sum.total / n};
    if (!validation_indices.empty()) {
      stats.validation_mse = mse_over(corpus, params, validation_indices,
                                      scale);
      if (!result.best_validation_mse ||
          *stats.validation_mse < *result.best_validation_mse) {
        result.best_validation_mse = stats.validation_mse;
        result.best_params = params;
      }
    }
    stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.history.push_back(stats);
    if (epoch_callback) epoch_callback(stats);
  }

  result.params = std::move(params);
  return result;
}

double evaluate_mse(const Corpus& corpus, const ModelParams& params,
                    const RatingScale& scale) {
  std::vector<std::size_t> test_indices;
  for (std::size_t r = 0; r < corpus.reviews.size(); ++r) {
    if (corpus.reviews[r].split == Split::kTest) test_indices.push_back(r);
  }
  if (test_indices.empty()) {
    throw std::runtime_error("corpus has no test reviews");
  }
  return mse_over(corpus, params, test_indices, scale);
}

}  // namespace valta
