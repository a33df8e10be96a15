#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(FBIPOSE_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path scratch() {
  const auto dir = std::filesystem::temp_directory_path() / "fbipose_cli_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("help and argument errors") {
  const Run help = run("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("sweep-alpha") != std::string::npos);
  CHECK(run("synth --help").code == 0);
  CHECK(run("--frobnicate synth --out x").code != 0);
  CHECK(run("synth").code != 0);
  CHECK(run("").code != 0);
  CHECK(run("lift --in /nonexistent.jsonl --out /tmp/x.jsonl").code != 0);
}

TEST_CASE("synth, convert, lift and hist pipeline") {
  const auto dir = scratch();
  const std::string synth = (dir / "s.jsonl").string();
  Run r = run("synth --out " + synth + " --count 50 --seed 3");
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["records"] == 50);

  const std::string lifted = (dir / "l.jsonl").string();
  r = run("lift --in " + synth + " --out " + lifted + " --true-scale");
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["records"] == 50);

  const std::string fbi = (dir / "f.jsonl").string();
  r = run("convert-fbi --in " + lifted + " --out " + fbi + " --alpha 35");
  REQUIRE(r.code == 0);
  std::ifstream in(fbi);
  std::string header;
  std::getline(in, header);
  CHECK(json::parse(header)["schema"] == "fbi-annotation/v1");
  std::string line;
  std::getline(in, line);
  CHECK(json::parse(line)["labels"].size() == 14);

  r = run("hist --in " + synth + " --alpha 35");
  REQUIRE(r.code == 0);
  const json h = json::parse(r.out);
  CHECK(h["uncertain_fraction"].get<double>() > 0.0);
  CHECK(h["uncertain_histogram"]["counts"].size() == 9);

  const std::string cands = (dir / "c.jsonl").string();
  r = run("enumerate --in " + synth + " --id s0 --out " + cands + " --true-scale");
  CHECK(r.code == 0);
}

TEST_CASE("seed makes output reproducible") {
  const auto dir = scratch();
  const auto a = (dir / "a.jsonl").string();
  const auto b = (dir / "b.jsonl").string();
  REQUIRE(run("--seed 9 synth --out " + a + " --count 5").code == 0);
  REQUIRE(run("synth --out " + b + " --count 5 --seed 9").code == 0);
  std::ifstream fa(a), fb(b);
  std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
}
