// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ARCQUANT_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

json run_json(const std::string& args, int expected = 0) {
  const Run r = run(args + " --emit json");
  CHECK(r.status == expected);
  return json::parse(r.out);
}

const json& method(const json& doc, const std::string& name) {
  for (const auto& row : doc["rows"])
    if (row["method"] == name) return row;
  FAIL("method missing: " << name);
  return doc;
}

}  // namespace

TEST_CASE("formats table") {
  const json doc = run_json("formats");
  CHECK(doc["command"] == "formats");
  REQUIRE(doc["rows"].size() == 6);
  CHECK(doc["rows"][5]["format"] == "NVFP4");
  CHECK(doc["rows"][5]["max_normal"] == 6.0);
  CHECK(doc["rows"][0]["max_normal"] == 57344.0);
  const Run text = run("formats");
  CHECK(text.status == 0);
  CHECK(text.out.find("57344") != std::string::npos);
  const Run csv = run("formats --emit csv");
  CHECK(csv.out.rfind("# command=formats", 0) == 0);
}

TEST_CASE("gen, calibrate, simulate pipeline") {
  const json g = run_json("gen --k 256 --n 16 --outliers 1 --outlier-scale 64 --seed 3 --out cli_act.bin");
  CHECK(g["rows"][0]["cols"] == 256);
  run_json("gen --k 256 --n 8 --outliers 0 --outlier-scale 1 --seed 4 --out cli_wt.bin");

  const json cal = run_json("calibrate cli_act.bin --layer q_proj --out cli_profile.json");
  CHECK(cal["rows"][0]["s_raw"] == 1);
  CHECK(cal["rows"][0]["s"] == 16);
  CHECK(std::filesystem::exists("cli_profile.json"));

  const json sim = run_json("simulate --act cli_act.bin --wt cli_wt.bin --profile cli_profile.json");
  CHECK(sim["augmented_cols"] == 16);
  CHECK(sim["overhead"] == 0.0625);
  CHECK(sim["flops"] == 2 * 16 * (256 + 16) * 8);
  CHECK(method(sim, "arcquant")["mse"].get<double>() < method(sim, "rtn")["mse"].get<double>());

  const json zero = run_json("simulate --act cli_act.bin --wt cli_wt.bin --s-override 0");
  CHECK(method(zero, "arcquant")["mse"] == method(zero, "rtn")["mse"]);
  CHECK(zero["overhead"] == 0.0);

  const json cmp = run_json("compare --act cli_act.bin --wt cli_wt.bin");
  CHECK(cmp["rows"].size() == 4);
  CHECK(!cmp.contains("flops"));

  const json q = run_json("quantize cli_act.bin --profile cli_profile.json --out cli_q.bin");
  CHECK(q["rows"][0]["violations"] == 0);
  CHECK(q["rows"][0]["augmented_cols"] == 16);
  CHECK(std::filesystem::exists("cli_q.bin"));
}

TEST_CASE("verify-bounds exit codes") {
  const json ok = run_json("verify-bounds --samples 5000 --configs 5");
  CHECK(ok["passed"] == true);
  CHECK(ok["total_violations"] == 0);
  const json bad = run_json("verify-bounds --samples 5000 --configs 5 --inject-fault", 1);
  CHECK(bad["passed"] == false);
}

TEST_CASE("errors exit with status two") {
  CHECK(run("simulate --act missing.bin --wt missing.bin").status == 2);
  CHECK(run("formats --emit yaml").status == 2);
  CHECK(run("quantize cli_act.bin --format fp3").status == 2);
  CHECK(run("gen --k 8 --n 2").status == 2);
  CHECK(run("").status == 2);
}
