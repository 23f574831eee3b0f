#include "valta/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "valta/version.hpp"

namespace valta {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd w(rows, cols);
  // Column-major fill order; part of the seeded-determinism contract.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      w(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
  }
  return w;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw std::invalid_argument("vocab_size must be positive");
  if (num_aspects <= 0) throw std::invalid_argument("num_aspects must be positive");
  if (topics_per_aspect <= 0) {
    throw std::invalid_argument("topics_per_aspect must be positive");
  }
  if (hidden_size <= 0) throw std::invalid_argument("hidden_size must be positive");
  if (!(tau_z > 0.0)) throw std::invalid_argument("tau_z must be positive");
  if (!(tau_psi > 0.0)) throw std::invalid_argument("tau_psi must be positive");
}

Eigen::MatrixXd LatentState::psi_matrix() const {
  Eigen::MatrixXd m(psi.size(), psi.empty() ? 0 : psi.front().value.size());
  for (std::size_t a = 0; a < psi.size(); ++a) {
    m.row(static_cast<Eigen::Index>(a)) = psi[a].value.transpose();
  }
  return m;
}

ModelParams init_params(const ModelConfig& config,
                        const std::vector<std::string>& user_ids,
                        const std::vector<std::string>& item_ids,
                        double global_bias, Rng& rng) {
  config.validate();
  const int V = config.vocab_size;
  const int A = config.num_aspects;
  const int K = config.topics_per_aspect;
  const int H = config.hidden_size;

  ModelParams params;
  params.config = config;
  params.trunk = {glorot_uniform(H, V, rng), Eigen::VectorXd::Zero(H)};
  params.aspect_head = {glorot_uniform(A, H, rng), Eigen::VectorXd::Zero(A)};
  params.topic_head = {glorot_uniform(A * K, 2 * H, rng),
                       Eigen::VectorXd::Zero(A * K)};
  params.decoder = {glorot_uniform(V, A * K, rng), Eigen::VectorXd::Zero(V)};
  params.bias_global = global_bias;
  for (const auto& id : item_ids) params.bias_item[id] = 0.0;
  for (const auto& id : user_ids) params.bias_user[id] = 0.0;
  return params;
}

Eigen::VectorXd encode_hidden(const BagOfWords& bow,
                              const ModelParams& params) {
  if (bow.empty()) {
    throw std::invalid_argument("empty bag of words");
  }
  const double total = static_cast<double>(bow.total());
  Eigen::VectorXd pre = params.trunk.bias;
  for (const auto& [word, count] : bow.entries()) {
    if (word < 0 || word >= params.config.vocab_size) {
      throw std::invalid_argument("word id outside vocabulary");
    }
    pre += (static_cast<double>(count) / total) * params.trunk.weight.col(word);
  }
  return pre.array().tanh();
}

ConcreteSample encode_sentence_aspect(const BagOfWords& sentence_bow,
                                      const ModelParams& params,
                                      const Eigen::VectorXd& noise) {
  Eigen::VectorXd logits =
      params.aspect_head(encode_hidden(sentence_bow, params));
  return concrete_sample({std::move(logits), params.config.tau_z}, noise);
}

LatentState encode_user_item(const BagOfWords& user_bow,
                             const BagOfWords& item_bow,
                             const ModelParams& params,
                             const Eigen::MatrixXd& noise) {
  const int A = params.config.num_aspects;
  const int K = params.config.topics_per_aspect;
  const int H = params.config.hidden_size;
  if (noise.rows() != A || noise.cols() != K) {
    throw std::invalid_argument("psi noise must be A x K");
  }

  const Eigen::VectorXd h_item = encode_hidden(item_bow, params);
  const Eigen::VectorXd h_user = encode_hidden(user_bow, params);
  Eigen::VectorXd joint(2 * H);
  joint << h_item, h_user;
  const Eigen::VectorXd flat = params.topic_head(joint);

  LatentState state;
  state.rho.resize(A, K);
  for (int a = 0; a < A; ++a) {
    for (int k = 0; k < K; ++k) state.rho(a, k) = flat[a * K + k];
  }
  state.psi.reserve(A);
  for (int a = 0; a < A; ++a) {
    state.psi.push_back(concrete_sample(
        {state.rho.row(a).transpose(), params.config.tau_psi},
        noise.row(a).transpose()));
  }
  return state;
}

Eigen::MatrixXd mask_topics(const ConcreteSample& z,
                            const Eigen::MatrixXd& psi) {
  if (z.value.size() != psi.rows()) {
    throw std::invalid_argument("aspect sample and topic matrix disagree");
  }
  return z.value.asDiagonal() * psi;
}

Eigen::VectorXd flatten_topics(const Eigen::MatrixXd& masked) {
  Eigen::VectorXd flat(masked.rows() * masked.cols());
  for (Eigen::Index a = 0; a < masked.rows(); ++a) {
    for (Eigen::Index k = 0; k < masked.cols(); ++k) {
      flat[a * masked.cols() + k] = masked(a, k);
    }
  }
  return flat;
}

Eigen::VectorXd decode_log_probs(const Eigen::VectorXd& masked,
                                 const ModelParams& params) {
  return log_softmax(params.decoder(masked));
}

double sentence_log_likelihood(const BagOfWords& sentence_bow,
                               const Eigen::VectorXd& log_probs) {
  double ll = 0.0;
  for (const auto& [word, count] : sentence_bow.entries()) {
    ll += static_cast<double>(count) * log_probs[word];
  }
  return ll;
}

Eigen::VectorXd aspect_importance(const Eigen::VectorXd& hidden,
                                  const ModelParams& params) {
  return params.aspect_head(hidden);
}

RatingBreakdown predict_rating(const std::string& user_id,
                               const std::string& item_id,
                               const BagOfWords& user_bow,
                               const BagOfWords& item_bow,
                               const ModelParams& params) {
  const int A = params.config.num_aspects;
  const int K = params.config.topics_per_aspect;
  const int H = params.config.hidden_size;

  const Eigen::VectorXd h_item = encode_hidden(item_bow, params);
  const Eigen::VectorXd h_user = encode_hidden(user_bow, params);

  RatingBreakdown out;
  out.importance = softmax(0.5 * (aspect_importance(h_item, params) +
                                  aspect_importance(h_user, params)));

  Eigen::VectorXd joint(2 * H);
  joint << h_item, h_user;
  const Eigen::VectorXd rho = params.topic_head(joint);
  out.aspect_rating = Eigen::VectorXd::Zero(A);
  for (int a = 0; a < A; ++a) {
    for (int k = 0; k < K; ++k) out.aspect_rating[a] += rho[a * K + k];
  }

  auto bias_or_zero = [](const std::map<std::string, double>& m,
                         const std::string& id) {
    auto it = m.find(id);
    return it == m.end() ? 0.0 : it->second;
  };
  out.prediction = params.bias_global + bias_or_zero(params.bias_item, item_id) +
                   bias_or_zero(params.bias_user, user_id) +
                   out.importance.dot(out.aspect_rating) /
                       static_cast<double>(A);
  return out;
}

// --- checkpoints -----------------------------------------------------------
// Layout: 8-byte magic, little-endian u64 manifest length, manifest JSON,
// then raw f64 payload in a fixed tensor order. Bias maps are serialized in
// the (sorted) manifest id order.

namespace {

constexpr char kMagic[8] = {'V', 'A', 'L', 'T', 'A', 'C', 'P', '1'};

void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      char buf[sizeof(double)];
      std::memcpy(buf, &v, sizeof(double));
      out.append(buf, sizeof(double));
    }
  }
}

void put_vector(std::string& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double x = v[i];
    char buf[sizeof(double)];
    std::memcpy(buf, &x, sizeof(double));
    out.append(buf, sizeof(double));
  }
}

class Reader {
 public:
  Reader(const std::string& data, std::size_t offset)
      : data_(data), offset_(offset) {}

  double next() {
    if (offset_ + sizeof(double) > data_.size()) {
      throw std::runtime_error("checkpoint truncated");
    }
    double v;
    std::memcpy(&v, data_.data() + offset_, sizeof(double));
    offset_ += sizeof(double);
    return v;
  }
  void fill(Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = next();
    }
  }
  void fill(Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = next();
  }
  std::size_t offset() const { return offset_; }

 private:
  const std::string& data_;
  std::size_t offset_;
};

}  // namespace

void checkpoint_save(const ModelParams& params,
                     const std::vector<std::string>& vocab,
                     const std::filesystem::path& path) {
  ordered_json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["toolkit_version"] = kVersion;
  manifest["config"] = {{"vocab_size", params.config.vocab_size},
                        {"num_aspects", params.config.num_aspects},
                        {"topics_per_aspect", params.config.topics_per_aspect},
                        {"hidden_size", params.config.hidden_size},
                        {"tau_z", params.config.tau_z},
                        {"tau_psi", params.config.tau_psi}};
  manifest["vocab"] = vocab;
  std::vector<std::string> item_ids, user_ids;
  for (const auto& [id, b] : params.bias_item) item_ids.push_back(id);
  for (const auto& [id, b] : params.bias_user) user_ids.push_back(id);
  manifest["item_ids"] = item_ids;
  manifest["user_ids"] = user_ids;

  std::string data(kMagic, sizeof(kMagic));
  const std::string manifest_str = manifest.dump();
  std::uint64_t len = manifest_str.size();
  char lenbuf[sizeof(len)];
  std::memcpy(lenbuf, &len, sizeof(len));
  data.append(lenbuf, sizeof(len));
  data += manifest_str;

  put_matrix(data, params.trunk.weight);
  put_vector(data, params.trunk.bias);
  put_matrix(data, params.aspect_head.weight);
  put_vector(data, params.aspect_head.bias);
  put_matrix(data, params.topic_head.weight);
  put_vector(data, params.topic_head.bias);
  put_matrix(data, params.decoder.weight);
  put_vector(data, params.decoder.bias);
  put_vector(data, Eigen::VectorXd::Constant(1, params.bias_global));
  for (const auto& id : item_ids) {
    put_vector(data, Eigen::VectorXd::Constant(1, params.bias_item.at(id)));
  }
  for (const auto& id : user_ids) {
    put_vector(data, Eigen::VectorXd::Constant(1, params.bias_user.at(id)));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  if (data.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
      std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  std::uint64_t len;
  std::memcpy(&len, data.data() + sizeof(kMagic), sizeof(len));
  const std::size_t manifest_begin = sizeof(kMagic) + sizeof(len);
  if (manifest_begin + len > data.size()) {
    throw std::runtime_error("checkpoint truncated");
  }
  json manifest = json::parse(data.substr(manifest_begin, len));
  if (manifest["format_version"].get<int>() != kCheckpointFormatVersion) {
    throw std::runtime_error("unsupported checkpoint format version");
  }

  Checkpoint ckpt;
  const json& config = manifest["config"];
  ckpt.params.config.vocab_size = config["vocab_size"].get<int>();
  ckpt.params.config.num_aspects = config["num_aspects"].get<int>();
  ckpt.params.config.topics_per_aspect = config["topics_per_aspect"].get<int>();
  ckpt.params.config.hidden_size = config["hidden_size"].get<int>();
  ckpt.params.config.tau_z = config["tau_z"].get<double>();
  ckpt.params.config.tau_psi = config["tau_psi"].get<double>();
  ckpt.params.config.validate();
  ckpt.vocab = manifest["vocab"].get<std::vector<std::string>>();

  const int V = ckpt.params.config.vocab_size;
  const int A = ckpt.params.config.num_aspects;
  const int K = ckpt.params.config.topics_per_aspect;
  const int H = ckpt.params.config.hidden_size;

  ckpt.params.trunk = {Eigen::MatrixXd(H, V), Eigen::VectorXd(H)};
  ckpt.params.aspect_head = {Eigen::MatrixXd(A, H), Eigen::VectorXd(A)};
  ckpt.params.topic_head = {Eigen::MatrixXd(A * K, 2 * H),
                            Eigen::VectorXd(A * K)};
  ckpt.params.decoder = {Eigen::MatrixXd(V, A * K), Eigen::VectorXd(V)};

  Reader reader(data, manifest_begin + len);
  reader.fill(ckpt.params.trunk.weight);
  reader.fill(ckpt.params.trunk.bias);
  reader.fill(ckpt.params.aspect_head.weight);
  reader.fill(ckpt.params.aspect_head.bias);
  reader.fill(ckpt.params.topic_head.weight);
  reader.fill(ckpt.params.topic_head.bias);
  reader.fill(ckpt.params.decoder.weight);
  reader.fill(ckpt.params.decoder.bias);
  ckpt.params.bias_global = reader.next();
  for (const auto& id : manifest["item_ids"]) {
    ckpt.params.bias_item[id.get<std::string>()] = reader.next();
  }
  for (const auto& id : manifest["user_ids"]) {
    ckpt.params.bias_user[id.get<std::string>()] = reader.next();
  }
  if (reader.offset() != data.size()) {
    throw std::runtime_error("trailing bytes in checkpoint");
  }
  return ckpt;
}

}  // namespace valta
