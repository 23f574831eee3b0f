#include "valta/concrete.hpp"

#include <cmath>
#include <stdexcept>

namespace valta {

namespace {

// Noise is clamped away from the interval ends before the double log;
// exact 0 or 1 is a caller error and is rejected in concrete_sample.
constexpr double kNoiseLo = 1e-10;
constexpr double kNoiseHi = 1.0 - 1e-7;

}  // namespace

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  Eigen::VectorXd e = (x.array() - m).exp();
  return e / e.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  return x.array() - lse;
}

double entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

ConcreteSample concrete_sample(const ConcreteParams& params,
                               const Eigen::VectorXd& noise) {
  if (params.temperature <= 0.0) {
    throw std::invalid_argument("concrete temperature must be positive");
  }
  if (noise.size() != params.logits.size()) {
    throw std::invalid_argument("noise dimension does not match logits");
  }
  Eigen::VectorXd shifted(params.logits.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    const double u = noise[i];
    if (u <= 0.0 || u >= 1.0) {
      throw std::invalid_argument("concrete noise must lie strictly in (0,1)");
    }
    const double clamped = std::min(std::max(u, kNoiseLo), kNoiseHi);
    const double gumbel = -std::log(-std::log(clamped));
    shifted[i] = (params.logits[i] + gumbel) / params.temperature;
  }
  return ConcreteSample{softmax(shifted), params};
}

double kl_to_uniform(const ConcreteParams& params) {
  // KL(p || 1/D) = sum_d p_d (log p_d + log D), p = softmax(logits).
  // Computed from log-softmax so equal logits give exactly zero.
  const Eigen::VectorXd logp = log_softmax(params.logits);
  const double log_d = std::log(static_cast<double>(params.logits.size()));
  double kl = 0.0;
  for (Eigen::Index i = 0; i < logp.size(); ++i) {
    kl += std::exp(logp[i]) * (logp[i] + log_d);
  }
  return kl > 0.0 ? kl : 0.0;
}

}  // namespace valta
