#include "synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "valta/rng.hpp"

namespace valta::testing {

namespace {

double gaussian(Rng& rng) {
  // Box-Muller on open-interval uniforms.
  const double u1 = uniform_open01(rng);
  const double u2 = uniform_open01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::string pad2(int n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", n);
  return buf;
}

}  // namespace

PlantedReviews generate_planted_reviews(const PlantedConfig& config) {
  const int A = config.num_aspects;
  const int K = config.topics_per_aspect;
  Rng rng = make_rng(config.seed, 100);

  PlantedReviews out;
  out.config = config;

  out.topic_words.assign(A, std::vector<std::vector<std::string>>(K));
  for (int a = 0; a < A; ++a) {
    for (int k = 0; k < K; ++k) {
      for (int w = 0; w < config.words_per_topic; ++w) {
        out.topic_words[a][k].push_back("a" + std::to_string(a) + "k" +
                                        std::to_string(k) + "w" + pad2(w));
      }
    }
  }

  // Item-specific mixtures: one dominant topic per (item, aspect).
  std::vector<std::vector<std::vector<double>>> theta(
      config.num_items,
      std::vector<std::vector<double>>(A, std::vector<double>(K)));
  for (int i = 0; i < config.num_items; ++i) {
    for (int a = 0; a < A; ++a) {
      const int dominant = static_cast<int>(uniform_below(rng, K));
      const double w =
          config.dominance_lo +
          (config.dominance_hi - config.dominance_lo) * uniform01(rng);
      for (int k = 0; k < K; ++k) {
        theta[i][a][k] = (k == dominant)
                             ? w
                             : (1.0 - w) / static_cast<double>(K - 1);
      }
    }
  }

  // Known rating structure: global bias, user/item biases, and an aspect
  // signal tied to the topic mixture so text and ratings agree.
  const double b0 = 3.0;
  std::vector<double> bias_item(config.num_items), bias_user(config.num_users);
  for (double& b : bias_item) b = (2.0 * uniform01(rng) - 1.0) * config.bias_scale;
  for (double& b : bias_user) b = (2.0 * uniform01(rng) - 1.0) * config.bias_scale;
  std::vector<std::vector<double>> aspect_signal(config.num_items,
                                                 std::vector<double>(A, 0.0));
  for (int i = 0; i < config.num_items; ++i) {
    for (int a = 0; a < A; ++a) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) {
        const double c = (K == 1) ? 1.0 : 1.0 - 2.0 * k / static_cast<double>(K - 1);
        s += theta[i][a][k] * c;
      }
      aspect_signal[i][a] = config.signal_scale * s;
    }
  }

  double rating_sum = 0.0, rating_sq_sum = 0.0;
  for (int r = 0; r < config.num_reviews; ++r) {
    // Balanced coverage: every user and item sees the same review load.
    const int user = (r * 13) % config.num_users;
    const int item = (r * 7) % config.num_items;

    std::vector<int> aspects(config.sentences_per_review);
    std::string text;
    for (int s = 0; s < config.sentences_per_review; ++s) {
      const int a = static_cast<int>(uniform_below(rng, A));
      aspects[s] = a;
      std::string sentence;
      for (int t = 0; t < config.tokens_per_sentence; ++t) {
        // topic ~ theta[item][a], word uniform within the topic
        double u = uniform01(rng);
        int k = K - 1;
        for (int cand = 0; cand < K; ++cand) {
          if (u < theta[item][a][cand]) {
            k = cand;
            break;
          }
          u -= theta[item][a][cand];
        }
        std::string word = out.topic_words[a][k][static_cast<int>(
            uniform_below(rng, config.words_per_topic))];
        if (sentence.empty()) word[0] = static_cast<char>(word[0] - 'a' + 'A');
        if (!sentence.empty()) sentence += ' ';
        sentence += word;
      }
      sentence += '.';
      if (!text.empty()) text += ' ';
      text += sentence;
    }
    out.sentence_aspect.push_back(std::move(aspects));

    double signal = 0.0;
    for (int a = 0; a < A; ++a) signal += aspect_signal[item][a];
    signal /= static_cast<double>(A);
    const double rating = b0 + bias_item[item] + bias_user[user] + signal +
                          config.rating_noise * gaussian(rng);
    rating_sum += rating;
    rating_sq_sum += rating * rating;

    nlohmann::ordered_json line;
    line["user"] = "u" + pad2(user);
    line["item"] = "it" + pad2(item);
    line["rating"] = rating;
    line["text"] = text;
    out.jsonl_lines.push_back(line.dump());
  }

  const double n = static_cast<double>(config.num_reviews);
  const double mean = rating_sum / n;
  out.rating_variance = rating_sq_sum / n - mean * mean;
  return out;
}

std::filesystem::path write_planted_jsonl(const PlantedReviews& planted,
                                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "reviews.jsonl";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& line : planted.jsonl_lines) out << line << '\n';
  return path;
}

Corpus planted_corpus(const PlantedReviews& planted, double test_fraction,
                      std::uint64_t seed) {
  std::vector<RawReview> raws;
  for (const auto& line : planted.jsonl_lines) {
    const auto rec = nlohmann::json::parse(line);
    raws.push_back(RawReview{rec["user"], rec["item"], rec["rating"],
                             rec["text"]});
  }
  CorpusBuildSettings settings;
  settings.min_word_count = 1;
  settings.min_reviews = 1;
  settings.test_fraction = test_fraction;
  settings.seed = seed;
  return build_corpus(raws, settings, {});
}

}  // namespace valta::testing
