#include "doctest.h"
#include "cli_support.hpp"

#include "json.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("verify prints one json object per statement with zero violations") {
  const auto r = cli::run("verify --trials 40 --seed 0");
  CHECK(r.status == 0);
  const auto ls = lines(r.out);
  CHECK(ls.size() == 10);
  for (const auto& l : ls) {
    const auto j = nlohmann::json::parse(l);
    CHECK(j["violations"] == 0);
    CHECK(j["trials"] == 40);
  }
}

TEST_CASE("classify on orthogonal generated data is perfect") {
  const auto dir = cli::scratch("cli_classify");
  const auto gen = cli::run("generate --classes 3 --ambient-dim 12 --subspace-dim 3 --angle 1.5707963267948966 "
                            "--train-per-class 8 --test-per-class 6 --seed 4 --dictionary-out " +
                            q(dir / "dict.csv") + " --test-out " + q(dir / "test.csv"));
  REQUIRE(gen.status == 0);
  const auto cls = cli::run("classify --dictionary " + q(dir / "dict.csv") + " --test " + q(dir / "test.csv") +
                            " -s 3 -o " + q(dir / "pred.csv") + " --report " + q(dir / "report.json"));
  REQUIRE(cls.status == 0);
  const auto rows = lines(cli::slurp(dir / "pred.csv"));
  REQUIRE(rows.size() == 19);
  CHECK(rows[0] == "index,label,predicted,margin,r_1,r_2,r_3");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string idx, label, pred, margin;
    std::getline(in, idx, ',');
    std::getline(in, label, ',');
    std::getline(in, pred, ',');
    std::getline(in, margin, ',');
    CHECK(label == pred);
    CHECK(std::stod(margin) >= 1.0 - 1e-9);
  }
  const auto report = nlohmann::json::parse(cli::slurp(dir / "report.json"));
  CHECK(report["accuracy"] == 1.0);
}

TEST_CASE("diagnose reports the documented fields") {
  const auto dir = cli::scratch("cli_diag");
  REQUIRE(cli::run("generate --classes 2 --ambient-dim 12 --subspace-dim 2 --angle 0.5 --train-per-class 6 "
                   "--test-per-class 2 --seed 1 --dictionary-out " + q(dir / "d.csv") + " --test-out " +
                   q(dir / "t.csv")).status == 0);
  const auto r = cli::run("diagnose --input " + q(dir / "d.csv") + " -d 1");
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["d"] == 1);
  CHECK(j["effective_rank"].size() == 2);
  CHECK(j["theta_min"].size() == 2);
  CHECK(j.contains("cohesion_max"));
}

TEST_CASE("sweep emits twelve grid rows per seed") {
  const auto dir = cli::scratch("cli_sweep");
  REQUIRE(cli::run("generate --classes 2 --ambient-dim 8 --subspace-dim 2 --angle 0.4 --train-per-class 6 "
                   "--test-per-class 3 --seed 2 --dictionary-out " + q(dir / "tr.csv") + " --test-out " +
                   q(dir / "te.csv")).status == 0);
  const auto r = cli::run("sweep --train " + q(dir / "tr.csv") + " --test " + q(dir / "te.csv") +
                          " --seeds 0 1 --epochs 1 --steps-per-epoch 2 --per-class-batch 3 -s 2");
  REQUIRE(r.status == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 25);
  CHECK(rows[0] == "mu,lambda,seed,accuracy,balanced_accuracy,margin_mean,margin_median,effrank_mean,cohesion_max");
  CHECK(rows[1].rfind("0.1,0.001,0,", 0) == 0);
  CHECK(rows[24].rfind("100,0.1,1,", 0) == 0);
}

TEST_CASE("train writes a checkpoint and a trace; config files fill absent flags") {
  const auto dir = cli::scratch("cli_train");
  REQUIRE(cli::run("generate --classes 2 --ambient-dim 6 --subspace-dim 2 --angle 0.4 --train-per-class 6 "
                   "--test-per-class 1 --seed 2 --dictionary-out " + q(dir / "tr.csv") + " --test-out " +
                   q(dir / "te.csv")).status == 0);
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"epochs": 1, "steps_per_epoch": 3, "per_class_batch": 3})";
  }
  const auto r = cli::run("train --input " + q(dir / "tr.csv") + " --checkpoint " + q(dir / "ck.json") +
                          " --trace " + q(dir / "trace.csv") + " --config " + q(dir / "cfg.json"));
  REQUIRE(r.status == 0);
  CHECK(lines(cli::slurp(dir / "trace.csv")).size() == 4);
  const auto ck = nlohmann::json::parse(cli::slurp(dir / "ck.json"));
  CHECK(ck["kind"] == "geometry");
  CHECK(ck["config"]["steps_per_epoch"] == 3);
}

TEST_CASE("failures exit nonzero with a one-line diagnostic") {
  const auto bad_flag = cli::run("verify --bogus");
  CHECK(bad_flag.status == 2);
  CHECK(lines(bad_flag.out).size() == 1);

  const auto missing = cli::run("diagnose --input /nonexistent/x.csv");
  CHECK(missing.status == 2);
  CHECK(lines(missing.out).size() == 1);
  CHECK(missing.out.find("i/o error") != std::string::npos);

  const auto dir = cli::scratch("cli_err");
  const auto infeasible = cli::run("generate --classes 4 --ambient-dim 6 --subspace-dim 2 --dictionary-out " +
                                   q(dir / "a.csv") + " --test-out " + q(dir / "b.csv"));
  CHECK(infeasible.status == 2);
  CHECK(lines(infeasible.out).size() == 1);
  CHECK(infeasible.out.find("infeasible") != std::string::npos);
}
