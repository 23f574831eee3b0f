#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "synthetic.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using valta::testing::generate_planted_reviews;
using valta::testing::make_temp_dir;
using valta::testing::PlantedConfig;
using valta::testing::read_text;
using valta::testing::write_planted_jsonl;
using valta::testing::write_text;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(VALTA_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Pipeline {
  fs::path dir;
  fs::path corpus;
  fs::path run;

  explicit Pipeline(const std::string& tag, std::uint64_t seed) {
    dir = make_temp_dir(tag);
    PlantedConfig pc;
    pc.num_reviews = 80;
    pc.num_users = 10;
    pc.num_items = 8;
    pc.seed = 5;
    const auto planted = generate_planted_reviews(pc);
    write_planted_jsonl(planted, dir);
    write_text(dir / "config.txt",
               "aspects = 3\n"
               "topics_per_aspect = 2\n"
               "hidden = 8\n"
               "epochs = 2\n"
               "batch_size = 20\n"
               "seed = " + std::to_string(seed) + "\n");
    corpus = dir / "corpus";
    run = dir / "run";
    REQUIRE(run_cli("preprocess --input " + (dir / "reviews.jsonl").string() +
                        " --out " + corpus.string() +
                        " --min-word-count 1 --min-reviews 1"
                        " --test-fraction 0.2 --seed 3",
                    dir / "preprocess.log") == 0);
    REQUIRE(run_cli("train --corpus " + corpus.string() + " --config " +
                        (dir / "config.txt").string() + " --out " +
                        run.string(),
                    dir / "train.log") == 0);
  }
};

}  // namespace

TEST_CASE("pipeline commands succeed and leave their artifacts") {
  Pipeline p("cli_pipeline", 17);
  CHECK(fs::exists(p.corpus / "vocab.txt"));
  CHECK(fs::exists(p.corpus / "reviews.jsonl"));
  CHECK(fs::exists(p.corpus / "manifest.json"));
  CHECK(fs::exists(p.corpus / "run_manifest.json"));
  CHECK(fs::exists(p.run / "model.bin"));
  CHECK(fs::exists(p.run / "best_model.bin"));
  CHECK(fs::exists(p.run / "training_log.jsonl"));
  CHECK(fs::exists(p.run / "run_manifest.json"));

  // Training log: one JSON object per epoch with every loss field.
  std::istringstream log(read_text(p.run / "training_log.jsonl"));
  std::string line;
  int epochs = 0;
  while (std::getline(log, line)) {
    const json entry = json::parse(line);
    ++epochs;
    CHECK(entry["epoch"] == epochs);
    for (const char* key : {"gen", "mse", "kl_z", "kl_psi", "total",
                            "wall_time_s"}) {
      CHECK(entry.contains(key));
    }
  }
  CHECK(epochs == 2);

  const fs::path tsv = p.dir / "topics.tsv";
  CHECK(run_cli("topics --model " + (p.run / "model.bin").string() +
                    " --top 4 --out " + tsv.string(),
                p.dir / "topics.log") == 0);
  const std::string topics = read_text(tsv);
  CHECK(topics.starts_with("aspect\tsub_aspect\trank\tword\tweight\n"));
  // 3 aspects x 2 topics x 4 words + header
  int lines = 0;
  for (char c : topics) lines += (c == '\n');
  CHECK(lines == 25);
  CHECK(fs::exists(p.dir / "topics.tsv.manifest.json"));

  const fs::path metrics = p.dir / "metrics.json";
  CHECK(run_cli("eval --model " + (p.run / "model.bin").string() +
                    " --corpus " + p.corpus.string() +
                    " --metrics npmi,mse --granularity review --top 4"
                    " --out " + metrics.string(),
                p.dir / "eval.log") == 0);
  const json report = json::parse(read_text(metrics));
  CHECK(report.contains("toolkit_version"));
  CHECK(report.contains("corpus_hash"));
  CHECK(report["metrics"]["npmi"]["granularity"] == "review");
  CHECK(report["metrics"]["npmi"]["per_topic"].size() == 6);
  CHECK(report["metrics"]["npmi"].contains("overall"));
  CHECK(report["metrics"]["mse"].contains("value"));
  CHECK(report["metrics"]["mse"]["value"].get<double>() >= 0.0);

  const fs::path csv = p.dir / "rho.csv";
  CHECK(run_cli("export --model " + (p.run / "model.bin").string() +
                    " --corpus " + p.corpus.string() +
                    " --items it00,it01 --out " + csv.string(),
                p.dir / "export.log") == 0);
  const std::string rho = read_text(csv);
  CHECK(rho.starts_with("review_id,item_id,user_id,aspect,k,rho\n"));

  CHECK(run_cli("infer --model " + (p.run / "model.bin").string() +
                    " --corpus " + p.corpus.string() + " --user u01 --item it00",
                p.dir / "infer.log") == 0);
  const std::string infer_out = read_text(p.dir / "infer.log");
  CHECK(infer_out.find("predicted rating:") != std::string::npos);
  CHECK(infer_out.find("importance") != std::string::npos);
  CHECK(infer_out.find("run manifest:") != std::string::npos);
}

TEST_CASE("aspects metric consumes labeled sentences") {
  Pipeline p("cli_aspects", 19);
  // Gold labels straight from the planted vocabulary prefixes.
  std::string labels;
  for (int a = 0; a < 3; ++a) {
    for (int w = 0; w < 4; ++w) {
      labels += json{{"text", "a" + std::to_string(a) + "k0w0" +
                                  std::to_string(w) + " a" + std::to_string(a) +
                                  "k1w0" + std::to_string(w)},
                     {"label", "aspect" + std::to_string(a)}}
                    .dump() +
                "\n";
    }
  }
  write_text(p.dir / "labels.jsonl", labels);
  const fs::path metrics = p.dir / "aspect_metrics.json";
  CHECK(run_cli("eval --model " + (p.run / "model.bin").string() +
                    " --corpus " + p.corpus.string() +
                    " --metrics aspects --labels " +
                    (p.dir / "labels.jsonl").string() + " --out " +
                    metrics.string(),
                p.dir / "eval_aspects.log") == 0);
  const json report = json::parse(read_text(metrics));
  const auto& aspects = report["metrics"]["aspects"];
  CHECK(aspects["num_sentences"] == 12);
  CHECK(aspects["accuracy"].get<double>() >= 0.0);
  CHECK(aspects["accuracy"].get<double>() <= 1.0);
  CHECK(aspects["macro_f1"].get<double>() >= 0.0);
  CHECK(aspects.contains("mapping"));
}

TEST_CASE("same seed twice gives identical checkpoints and metric files") {
  Pipeline a("cli_det_a", 23);
  Pipeline b("cli_det_b", 23);
  CHECK(read_text(a.run / "model.bin") == read_text(b.run / "model.bin"));
  CHECK(read_text(a.corpus / "reviews.jsonl") ==
        read_text(b.corpus / "reviews.jsonl"));

  for (auto* p : {&a, &b}) {
    REQUIRE(run_cli("eval --model " + (p->run / "model.bin").string() +
                        " --corpus " + p->corpus.string() +
                        " --metrics npmi,mse --top 4 --out " +
                        (p->dir / "metrics.json").string(),
                    p->dir / "eval.log") == 0);
  }
  CHECK(read_text(a.dir / "metrics.json") == read_text(b.dir / "metrics.json"));
}

TEST_CASE("usage errors exit 2, data errors exit 1") {
  const auto dir = make_temp_dir("cli_errors");
  CHECK(run_cli("eval --bogus-flag", dir / "a.log") == 2);
  CHECK(run_cli("no_such_command", dir / "b.log") == 2);
  CHECK(run_cli("", dir / "c.log") == 2);  // a subcommand is required
  CHECK(run_cli("topics --model " + (dir / "missing.bin").string() +
                    " --out " + (dir / "t.tsv").string(),
                dir / "d.log") == 1);
  const std::string msg = read_text(dir / "d.log");
  CHECK(msg.find("missing.bin") != std::string::npos);

  Pipeline p("cli_errors_data", 29);
  CHECK(run_cli("eval --model " + (p.run / "model.bin").string() +
                    " --corpus " + p.corpus.string() +
                    " --metrics bogus --out " + (dir / "m.json").string(),
                dir / "e.log") == 1);
  CHECK(run_cli("eval --model " + (p.run / "model.bin").string() +
                    " --corpus " + p.corpus.string() +
                    " --metrics aspects --out " + (dir / "m.json").string(),
                dir / "f.log") == 1);  // aspects without --labels
  write_text(dir / "bad_config.txt", "aspects = 3\n");  // missing topics key
  CHECK(run_cli("train --corpus " + p.corpus.string() + " --config " +
                    (dir / "bad_config.txt").string() + " --out " +
                    (dir / "run2").string(),
                dir / "g.log") == 1);
  CHECK(run_cli("--help", dir / "h.log") == 0);
}

TEST_CASE("infer needs review text for unseen ids") {
  Pipeline p("cli_cold", 31);
  CHECK(run_cli("infer --model " + (p.run / "model.bin").string() +
                    " --corpus " + p.corpus.string() +
                    " --user stranger --item it00",
                p.dir / "cold_fail.log") == 1);
  const std::string msg = read_text(p.dir / "cold_fail.log");
  CHECK(msg.find("stranger") != std::string::npos);

  write_text(p.dir / "review.txt", "A0k0w00 a0k0w01 a0k0w02. A1k1w00 a1k1w01.");
  CHECK(run_cli("infer --model " + (p.run / "model.bin").string() +
                    " --corpus " + p.corpus.string() +
                    " --user stranger --item it00 --review " +
                    (p.dir / "review.txt").string(),
                p.dir / "cold_ok.log") == 0);
  const std::string out = read_text(p.dir / "cold_ok.log");
  CHECK(out.find("predicted rating:") != std::string::npos);
  CHECK(out.find("sentence aspect assignments:") != std::string::npos);
  CHECK(out.find("sentence 1 -> aspect") != std::string::npos);
}
