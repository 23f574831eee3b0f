#pragma once

#include <Eigen/Core>

// Reparameterized Concrete (Gumbel-softmax) relaxation of a categorical
// variable, plus the KL regularizer used against a uniform prior.

namespace valta {

struct ConcreteParams {
  Eigen::VectorXd logits;   // unnormalized log-probabilities
  double temperature = 1.0; // > 0
};

// Point on the simplex: components in (0,1), summing to 1.
struct ConcreteSample {
  Eigen::VectorXd value;
  ConcreteParams params;
};

// noise holds independent Uniform(0,1) draws, one per category, strictly
// inside the open interval. The transform is
//   g_d = -log(-log(u_d)),  value = softmax((logits + g) / temperature),
// differentiable in the logits for fixed noise.
// Throws std::invalid_argument on noise components equal to 0 or 1.
ConcreteSample concrete_sample(const ConcreteParams& params,
                               const Eigen::VectorXd& noise);

// KL(softmax(logits) || uniform over D categories). Nonnegative; exactly zero
// when all logits are equal.
double kl_to_uniform(const ConcreteParams& params);

// Numerically safe softmax / log-softmax (max subtraction).
Eigen::VectorXd softmax(const Eigen::VectorXd& x);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& x);

// Shannon entropy -sum p log p of a simplex point; 0 log 0 taken as 0.
double entropy(const Eigen::VectorXd& p);

}  // namespace valta
