// Command-line front end: preprocess -> train -> topics/eval/infer/export.
// Exit codes: 0 ok, 1 I/O or data error, 2 usage error.

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "valta/corpus.hpp"
#include "valta/evaluation.hpp"
#include "valta/model.hpp"
#include "valta/training.hpp"
#include "valta/version.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace valta;

namespace {

std::string iso_utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file_or_die(const fs::path& path, const std::string& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << data;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) {
    throw std::runtime_error("no such file or directory: " + path.string());
  }
}

// Emitted for every command; enough to replay the run.
class RunManifest {
 public:
  RunManifest(std::string command) {
    body_["command"] = std::move(command);
    body_["toolkit_version"] = kVersion;
    body_["started_utc"] = iso_utc_now();
  }
  void set(const std::string& key, ordered_json value) {
    body_[key] = std::move(value);
  }
  ordered_json finish() {
    body_["finished_utc"] = iso_utc_now();
    return body_;
  }
  void write(const fs::path& path) {
    write_file_or_die(path, finish().dump(2) + "\n");
  }

 private:
  ordered_json body_;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

// --- flat key = value config file -------------------------------------------

struct TrainFileConfig {
  ModelConfig model;
  TrainConfig train;
  ordered_json snapshot;  // resolved values for the run manifest
};

TrainFileConfig parse_train_config(const fs::path& path, int vocab_size) {
  require_file(path);
  std::ifstream in(path);
  TrainFileConfig out;
  out.model.vocab_size = vocab_size;
  out.model.num_aspects = 0;       // required key
  out.model.topics_per_aspect = 0; // required key
  std::optional<double> rating_min, rating_max;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
      }
      if (blank) continue;
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "aspects") out.model.num_aspects = std::stoi(value);
      else if (key == "topics_per_aspect") out.model.topics_per_aspect = std::stoi(value);
      else if (key == "hidden") out.model.hidden_size = std::stoi(value);
      else if (key == "tau_z") out.model.tau_z = std::stod(value);
      else if (key == "tau_psi") out.model.tau_psi = std::stod(value);
      else if (key == "epochs") out.train.epochs = std::stoi(value);
      else if (key == "batch_size") out.train.batch_size_reviews = std::stoi(value);
      else if (key == "learning_rate") out.train.learning_rate = std::stod(value);
      else if (key == "adam_beta1") out.train.adam_beta1 = std::stod(value);
      else if (key == "adam_beta2") out.train.adam_beta2 = std::stod(value);
      else if (key == "adam_epsilon") out.train.adam_epsilon = std::stod(value);
      else if (key == "seed") out.train.seed = std::stoull(value);
      else if (key == "weight_gen") out.train.weight_gen = std::stod(value);
      else if (key == "weight_mse") out.train.weight_mse = std::stod(value);
      else if (key == "weight_kl_z") out.train.weight_kl_z = std::stod(value);
      else if (key == "weight_kl_psi") out.train.weight_kl_psi = std::stod(value);
      else if (key == "rating_min") rating_min = std::stod(value);
      else if (key == "rating_max") rating_max = std::stod(value);
      else if (key == "validation_fraction") out.train.validation_fraction = std::stod(value);
      else {
        throw std::runtime_error(path.string() + ": unknown config key '" +
                                 key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) + ": bad value for '" +
                               key + "'");
    }
  }
  if (out.model.num_aspects <= 0 || out.model.topics_per_aspect <= 0) {
    throw std::runtime_error(path.string() +
                             ": config must set aspects and topics_per_aspect");
  }
  if (rating_min && rating_max) {
    out.train.rating_scale = RatingScale{*rating_min, *rating_max};
  }

  out.snapshot["aspects"] = out.model.num_aspects;
  out.snapshot["topics_per_aspect"] = out.model.topics_per_aspect;
  out.snapshot["hidden"] = out.model.hidden_size;
  out.snapshot["tau_z"] = out.model.tau_z;
  out.snapshot["tau_psi"] = out.model.tau_psi;
  out.snapshot["epochs"] = out.train.epochs;
  out.snapshot["batch_size"] = out.train.batch_size_reviews;
  out.snapshot["learning_rate"] = out.train.learning_rate;
  out.snapshot["adam_beta1"] = out.train.adam_beta1;
  out.snapshot["adam_beta2"] = out.train.adam_beta2;
  out.snapshot["adam_epsilon"] = out.train.adam_epsilon;
  out.snapshot["seed"] = out.train.seed;
  out.snapshot["weight_gen"] = out.train.weight_gen;
  out.snapshot["weight_mse"] = out.train.weight_mse;
  out.snapshot["weight_kl_z"] = out.train.weight_kl_z;
  out.snapshot["weight_kl_psi"] = out.train.weight_kl_psi;
  if (out.train.rating_scale) {
    out.snapshot["rating_min"] = out.train.rating_scale->min;
    out.snapshot["rating_max"] = out.train.rating_scale->max;
  }
  out.snapshot["validation_fraction"] = out.train.validation_fraction;
  return out;
}

// --- subcommands ---------------------------------------------------------------

int cmd_preprocess(const std::string& input, const std::string& out_dir,
                   int min_word_count, int min_reviews,
                   const std::string& stopwords_path, double test_fraction,
                   std::uint64_t seed) {
  RunManifest manifest("preprocess");
  require_file(input);
  std::unordered_set<std::string> stopwords;
  if (!stopwords_path.empty()) {
    require_file(stopwords_path);
    stopwords = load_stopwords(stopwords_path);
  }

  const auto raws = ingest_jsonl(input);
  CorpusBuildSettings settings{min_word_count, min_reviews, test_fraction,
                               seed};
  const Corpus corpus = build_corpus(raws, settings, stopwords);
  save_corpus(corpus, out_dir);

  manifest.set("config",
               ordered_json{{"input", input},
                            {"out", out_dir},
                            {"min_word_count", min_word_count},
                            {"min_reviews", min_reviews},
                            {"stopwords", stopwords_path},
                            {"test_fraction", test_fraction}});
  manifest.set("seed", seed);
  manifest.set("corpus_hash", corpus_content_hash(corpus));
  manifest.write(fs::path(out_dir) / "run_manifest.json");

  std::printf("%10s %10s %10s %12s %12s\n", "users", "items", "reviews",
              "sentences", "vocabulary");
  std::printf("%10zu %10zu %10zu %12zu %12d\n", corpus.user_bow.size(),
              corpus.item_bow.size(), corpus.reviews.size(),
              corpus.num_sentences(), corpus.vocabulary.size());
  std::printf("train/test split: %zu / %zu\n", corpus.num_train(),
              corpus.num_test());
  return 0;
}

int cmd_train(const std::string& corpus_dir, const std::string& config_path,
              const std::string& out_dir) {
  RunManifest manifest("train");
  require_file(corpus_dir);
  const Corpus corpus = load_corpus(corpus_dir);
  TrainFileConfig config =
      parse_train_config(config_path, corpus.vocabulary.size());

  fs::create_directories(out_dir);
  std::ofstream log(fs::path(out_dir) / "training_log.jsonl",
                    std::ios::binary | std::ios::trunc);
  const TrainResult result =
      train(corpus, config.model, config.train, [&](const EpochStats& stats) {
        ordered_json line;
        line["epoch"] = stats.epoch;
        line["gen"] = stats.train.gen;
        line["mse"] = stats.train.mse;
        line["kl_z"] = stats.train.kl_z;
        line["kl_psi"] = stats.train.kl_psi;
        line["total"] = stats.train.total;
        if (stats.validation_mse) line["val_mse"] = *stats.validation_mse;
        line["wall_time_s"] = stats.wall_time_s;
        log << line.dump() << '\n';
        log.flush();
      });

  checkpoint_save(result.params, corpus.vocabulary.tokens(),
                  fs::path(out_dir) / "model.bin");
  if (result.best_params) {
    checkpoint_save(*result.best_params, corpus.vocabulary.tokens(),
                    fs::path(out_dir) / "best_model.bin");
  }

  manifest.set("config", config.snapshot);
  manifest.set("config_path", config_path);
  manifest.set("corpus", corpus_dir);
  manifest.set("seed", config.train.seed);
  manifest.set("corpus_hash", corpus_content_hash(corpus));
  if (result.best_validation_mse) {
    manifest.set("best_validation_mse", *result.best_validation_mse);
  }
  manifest.write(fs::path(out_dir) / "run_manifest.json");

  std::printf("trained %d epochs; final total loss %.6f\n",
              config.train.epochs, result.history.back().train.total);
  if (result.best_validation_mse) {
    std::printf("best validation mse %.6f (best_model.bin)\n",
                *result.best_validation_mse);
  }
  return 0;
}

int cmd_topics(const std::string& model_path, int top_t,
               const std::string& out_path) {
  RunManifest manifest("topics");
  require_file(model_path);
  const Checkpoint ckpt = checkpoint_load(model_path);
  const auto lists = top_words(ckpt.params, ckpt.vocab, top_t);

  std::string tsv = "aspect\tsub_aspect\trank\tword\tweight\n";
  for (const auto& list : lists) {
    for (std::size_t rank = 0; rank < list.words.size(); ++rank) {
      tsv += std::to_string(list.aspect) + '\t' +
             std::to_string(list.sub_aspect) + '\t' + std::to_string(rank) +
             '\t' + list.words[rank] + '\t' +
             format_double(list.weights[rank]) + '\n';
    }
  }
  write_file_or_die(out_path, tsv);

  manifest.set("config", ordered_json{{"model", model_path}, {"top", top_t}});
  manifest.write(out_path + ".manifest.json");
  return 0;
}

std::vector<LabeledSentence> load_labeled_sentences(const fs::path& path,
                                                    const Vocabulary& vocab,
                                                    std::size_t* skipped) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  std::vector<LabeledSentence> sentences;
  std::string line;
  int line_no = 0;
  *skipped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path.string() + ": malformed line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.contains("text") || !rec.contains("label")) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) +
                               ": expected fields text and label");
    }
    std::vector<int> ids;
    for (const auto& token : tokenize(rec["text"].get<std::string>())) {
      const int id = vocab.id(token);
      if (id >= 0) ids.push_back(id);
    }
    if (ids.empty()) {
      ++*skipped;  // nothing the model can see; not scoreable
      continue;
    }
    sentences.push_back(LabeledSentence{BagOfWords::from_ids(std::move(ids)),
                                        rec["label"].get<std::string>()});
  }
  return sentences;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_dir,
             const std::string& metrics_csv, const std::string& labels_path,
             const std::string& granularity_name, int top_t,
             const std::string& out_path) {
  RunManifest manifest("eval");
  require_file(model_path);
  require_file(corpus_dir);
  const Checkpoint ckpt = checkpoint_load(model_path);
  const Corpus corpus = load_corpus(corpus_dir);
  if (corpus.vocabulary.tokens() != ckpt.vocab) {
    throw std::runtime_error("corpus vocabulary does not match checkpoint");
  }

  const auto metrics = split_csv(metrics_csv);
  if (metrics.empty()) {
    throw std::runtime_error("no metrics requested");
  }
  Granularity granularity;
  if (granularity_name == "sentence") {
    granularity = Granularity::kSentence;
  } else if (granularity_name == "review") {
    granularity = Granularity::kReview;
  } else {
    throw std::runtime_error("granularity must be sentence or review");
  }

  ordered_json report;
  report["toolkit_version"] = kVersion;
  report["corpus_hash"] = corpus_content_hash(corpus);
  ordered_json body;
  for (const auto& metric : metrics) {
    if (metric == "npmi") {
      const auto lists = top_words(ckpt.params, ckpt.vocab, top_t);
      const auto documents = collect_documents(corpus, granularity);
      const CoherenceReport coherence =
          npmi(lists, documents, corpus.vocabulary, top_t, granularity);
      ordered_json per_topic = ordered_json::array();
      for (std::size_t i = 0; i < coherence.per_topic.size(); ++i) {
        per_topic.push_back(
            ordered_json{{"aspect", lists[i].aspect},
                         {"sub_aspect", lists[i].sub_aspect},
                         {"npmi", coherence.per_topic[i]}});
      }
      body["npmi"] = ordered_json{{"granularity", granularity_name},
                                  {"top", top_t},
                                  {"overall", coherence.overall},
                                  {"per_topic", std::move(per_topic)}};
    } else if (metric == "mse") {
      const RatingScale scale = derive_rating_scale(corpus);
      body["mse"] =
          ordered_json{{"value", evaluate_mse(corpus, ckpt.params, scale)},
                       {"num_test_reviews", corpus.num_test()},
                       {"rating_min", scale.min},
                       {"rating_max", scale.max}};
    } else if (metric == "aspects") {
      if (labels_path.empty()) {
        throw std::runtime_error("metric 'aspects' requires --labels");
      }
      std::size_t skipped = 0;
      const auto sentences =
          load_labeled_sentences(labels_path, corpus.vocabulary, &skipped);
      if (sentences.empty()) {
        throw std::runtime_error("no scoreable labeled sentences in " +
                                 labels_path);
      }
      const AspectLabelReport aspect_report =
          label_aspects(ckpt.params, sentences);
      ordered_json mapping;
      for (const auto& [aspect, label] : aspect_report.mapping) {
        mapping[std::to_string(aspect)] = label;
      }
      body["aspects"] = ordered_json{{"accuracy", aspect_report.accuracy},
                                     {"macro_f1", aspect_report.macro_f1},
                                     {"num_sentences", sentences.size()},
                                     {"num_skipped", skipped},
                                     {"mapping", std::move(mapping)}};
    } else {
      throw std::runtime_error("unknown metric '" + metric +
                               "' (expected npmi, mse or aspects)");
    }
  }
  report["metrics"] = std::move(body);
  write_file_or_die(out_path, report.dump(2) + "\n");

  manifest.set("config", ordered_json{{"model", model_path},
                                      {"corpus", corpus_dir},
                                      {"metrics", metrics_csv},
                                      {"labels", labels_path},
                                      {"granularity", granularity_name},
                                      {"top", top_t}});
  manifest.set("corpus_hash", corpus_content_hash(corpus));
  manifest.write(out_path + ".manifest.json");
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_infer(const std::string& model_path, const std::string& corpus_dir,
              const std::string& user_id, const std::string& item_id,
              const std::string& review_path) {
  RunManifest manifest("infer");
  require_file(model_path);
  require_file(corpus_dir);
  const Checkpoint ckpt = checkpoint_load(model_path);
  const Corpus corpus = load_corpus(corpus_dir);

  std::vector<BagOfWords> review_sentences;
  BagOfWords review_bow;
  if (!review_path.empty()) {
    require_file(review_path);
    std::ifstream in(review_path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    for (const auto& sentence : segment_sentences(buf.str())) {
      std::vector<int> ids;
      for (const auto& token : tokenize(sentence)) {
        const int id = corpus.vocabulary.id(token);
        if (id >= 0) ids.push_back(id);
      }
      if (ids.empty()) continue;
      BagOfWords bow = BagOfWords::from_ids(std::move(ids));
      review_bow.merge(bow);
      review_sentences.push_back(std::move(bow));
    }
  }

  // Cold start: an id without training history needs review text to encode.
  auto history = [&](const std::map<std::string, BagOfWords>& bows,
                     const std::string& id, const char* kind) {
    auto it = bows.find(id);
    if (it != bows.end()) return it->second;
    if (!review_bow.empty()) return review_bow;
    throw std::runtime_error(std::string(kind) + " '" + id +
                             "' has no training history; supply --review");
  };
  const BagOfWords user_bow = history(corpus.user_bow, user_id, "user");
  const BagOfWords item_bow = history(corpus.item_bow, item_id, "item");

  const RatingBreakdown breakdown =
      predict_rating(user_id, item_id, user_bow, item_bow, ckpt.params);
  std::printf("predicted rating: %.4f\n", breakdown.prediction);
  std::printf("%8s %12s %12s\n", "aspect", "importance", "rating");
  for (int a = 0; a < ckpt.params.config.num_aspects; ++a) {
    std::printf("%8d %12.4f %12.4f\n", a, breakdown.importance[a],
                breakdown.aspect_rating[a]);
  }
  if (!review_sentences.empty()) {
    std::printf("sentence aspect assignments:\n");
    for (std::size_t s = 0; s < review_sentences.size(); ++s) {
      const Eigen::VectorXd logits = ckpt.params.aspect_head(
          encode_hidden(review_sentences[s], ckpt.params));
      Eigen::Index best = 0;
      logits.maxCoeff(&best);
      std::printf("  sentence %zu -> aspect %d\n", s,
                  static_cast<int>(best));
    }
  }

  manifest.set("config", ordered_json{{"model", model_path},
                                      {"corpus", corpus_dir},
                                      {"user", user_id},
                                      {"item", item_id},
                                      {"review", review_path}});
  manifest.set("corpus_hash", corpus_content_hash(corpus));
  std::printf("run manifest: %s\n", manifest.finish().dump().c_str());
  return 0;
}

int cmd_export(const std::string& model_path, const std::string& corpus_dir,
               const std::string& items_csv, const std::string& out_path) {
  RunManifest manifest("export");
  require_file(model_path);
  require_file(corpus_dir);
  const Checkpoint ckpt = checkpoint_load(model_path);
  const Corpus corpus = load_corpus(corpus_dir);

  const auto items = split_csv(items_csv);
  if (items.empty()) {
    throw std::runtime_error("no item ids given");
  }
  const auto rows = export_item_representations(corpus, ckpt.params, items);

  std::string csv = "review_id,item_id,user_id,aspect,k,rho\n";
  for (const auto& row : rows) {
    csv += std::to_string(row.review_id) + ',' + row.item_id + ',' +
           row.user_id + ',' + std::to_string(row.aspect) + ',' +
           std::to_string(row.sub_aspect) + ',' + format_double(row.rho) +
           '\n';
  }
  write_file_or_die(out_path, csv);

  manifest.set("config", ordered_json{{"model", model_path},
                                      {"corpus", corpus_dir},
                                      {"items", items_csv}});
  manifest.set("corpus_hash", corpus_content_hash(corpus));
  manifest.write(out_path + ".manifest.json");
  std::printf("wrote %zu rows to %s\n", rows.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured aspect topic model toolkit"};
  app.require_subcommand(1);
  std::function<int()> run;

  // preprocess
  {
    auto* cmd = app.add_subcommand(
        "preprocess", "build a corpus directory from JSON-lines reviews");
    auto input = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto stopwords = std::make_shared<std::string>();
    auto min_word_count = std::make_shared<int>(5);
    auto min_reviews = std::make_shared<int>(5);
    auto test_fraction = std::make_shared<double>(0.1);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--input", *input, "JSONL review file")->required();
    cmd->add_option("--out", *out, "output corpus directory")->required();
    cmd->add_option("--min-word-count", *min_word_count,
                    "drop words seen fewer times than this");
    cmd->add_option("--min-reviews", *min_reviews,
                    "drop users/items with fewer reviews");
    cmd->add_option("--stopwords", *stopwords, "stopword list, one per line");
    cmd->add_option("--test-fraction", *test_fraction,
                    "held-out fraction per item");
    cmd->add_option("--seed", *seed, "split seed");
    cmd->callback([=, &run] {
      run = [=] {
        return cmd_preprocess(*input, *out, *min_word_count, *min_reviews,
                              *stopwords, *test_fraction, *seed);
      };
    });
  }

  // train
  {
    auto* cmd = app.add_subcommand("train", "fit the model on a corpus");
    auto corpus = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--corpus", *corpus, "corpus directory")->required();
    cmd->add_option("--config", *config, "key = value training config")
        ->required();
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->callback([=, &run] {
      run = [=] { return cmd_train(*corpus, *config, *out); };
    });
  }

  // topics
  {
    auto* cmd = app.add_subcommand("topics", "write per-topic top words as TSV");
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto top = std::make_shared<int>(10);
    cmd->add_option("--model", *model, "checkpoint path")->required();
    cmd->add_option("--top", *top, "words per topic");
    cmd->add_option("--out", *out, "output TSV path")->required();
    cmd->callback([=, &run] {
      run = [=] { return cmd_topics(*model, *top, *out); };
    });
  }

  // eval
  {
    auto* cmd = app.add_subcommand("eval", "compute metrics into a JSON report");
    auto model = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto metrics = std::make_shared<std::string>("npmi,mse");
    auto labels = std::make_shared<std::string>();
    auto granularity = std::make_shared<std::string>("sentence");
    auto top = std::make_shared<int>(10);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--model", *model, "checkpoint path")->required();
    cmd->add_option("--corpus", *corpus, "corpus directory")->required();
    cmd->add_option("--metrics", *metrics, "comma list: npmi,mse,aspects");
    cmd->add_option("--labels", *labels, "JSONL {text, label} gold sentences");
    cmd->add_option("--granularity", *granularity, "sentence or review");
    cmd->add_option("--top", *top, "words per topic for npmi");
    cmd->add_option("--out", *out, "output JSON path")->required();
    cmd->callback([=, &run] {
      run = [=] {
        return cmd_eval(*model, *corpus, *metrics, *labels, *granularity, *top,
                        *out);
      };
    });
  }

  // infer
  {
    auto* cmd = app.add_subcommand(
        "infer", "predict a rating with its per-aspect breakdown");
    auto model = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto user = std::make_shared<std::string>();
    auto item = std::make_shared<std::string>();
    auto review = std::make_shared<std::string>();
    cmd->add_option("--model", *model, "checkpoint path")->required();
    cmd->add_option("--corpus", *corpus, "corpus directory")->required();
    cmd->add_option("--user", *user, "user id")->required();
    cmd->add_option("--item", *item, "item id")->required();
    cmd->add_option("--review", *review,
                    "review text file (required for unseen ids)");
    cmd->callback([=, &run] {
      run = [=] { return cmd_infer(*model, *corpus, *user, *item, *review); };
    });
  }

  // export
  {
    auto* cmd = app.add_subcommand(
        "export", "dump per-review topic logits for chosen items as CSV");
    auto model = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto items = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--model", *model, "checkpoint path")->required();
    cmd->add_option("--corpus", *corpus, "corpus directory")->required();
    cmd->add_option("--items", *items, "comma list of item ids")->required();
    cmd->add_option("--out", *out, "output CSV path")->required();
    cmd->callback([=, &run] {
      run = [=] { return cmd_export(*model, *corpus, *items, *out); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
