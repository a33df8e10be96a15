#include <doctest.h>

#include <chrono>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "fbipose/dataio.hpp"
#include "fbipose/error.hpp"
#include "fbipose/pipeline.hpp"
#include "support.hpp"

using namespace fbipose;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

void write_text(const fbitest::fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

std::vector<TaskDefinition> regular_tasks(std::size_t n) {
  std::vector<TaskDefinition> out;
  const auto s = make_synthetic({.count = n, .seed = 4});
  for (std::size_t i = 0; i < n; ++i) out.push_back({"t" + std::to_string(i), "", s[i].pose2d, false, std::nullopt});
  return out;
}

std::vector<TaskDefinition> gold_tasks(std::size_t n) {
  std::vector<TaskDefinition> out;
  const auto s = make_synthetic({.count = n, .seed = 5});
  for (std::size_t i = 0; i < n; ++i) out.push_back({"g" + std::to_string(i), "", s[i].pose2d, true, s[i].fbi});
  return out;
}

}  // namespace

TEST_CASE("header lines") {
  CHECK(header_line(DatasetKind::kPose2D) == R"({"schema":"pose2d/v1"})");
  CHECK(header_line(DatasetKind::kSynthetic) == R"({"schema":"synthetic-sample/v1"})");
  CHECK(schema_name(DatasetKind::kFbiAnnotation) == "fbi-annotation");
}

TEST_CASE("synthetic samples round trip through JSONL") {
  const auto dir = fbitest::scratch_dir("synth_rt");
  auto s = make_synthetic({.count = 20, .seed = 2});
  s[3].pose3d.reset();
  s[4].action.clear();
  write_synthetic(s, (dir / "s.jsonl").string());
  const auto back = read_synthetic((dir / "s.jsonl").string());
  CHECK(back.errors.empty());
  REQUIRE(back.records.size() == 20);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(to_json(back.records[i]).dump() == to_json(s[i]).dump());
  }
  CHECK_FALSE(back.records[3].pose3d.has_value());
  CHECK(back.records[5].fbi == s[5].fbi);
  CHECK(back.records[5].probs.p_aws.isApprox(s[5].probs.p_aws, 1e-15));
}

TEST_CASE("pose and annotation records round trip") {
  const auto dir = fbitest::scratch_dir("records_rt");
  const auto s = make_synthetic({.count = 3, .seed = 1});
  std::vector<Pose2DRecord> p2{{"a", "img/a.png", s[0].pose2d, "walk"}, {"b", "", s[1].pose2d, ""}};
  write_pose2d(p2, (dir / "p2.jsonl").string());
  const auto p2b = read_pose2d((dir / "p2.jsonl").string());
  REQUIRE(p2b.records.size() == 2);
  CHECK(p2b.records[0].image_ref == "img/a.png");
  CHECK(p2b.records[1].image_ref.empty());
  CHECK(p2b.records[0].pose.joints[7] == s[0].pose2d.joints[7]);

  std::vector<Pose3DRecord> p3{{"x", *s[2].pose3d, "sitting"}};
  write_pose3d(p3, (dir / "p3.jsonl").string());
  CHECK(read_pose3d((dir / "p3.jsonl").string()).records.at(0).pose.joints[3] == s[2].pose3d->joints[3]);

  AnnotationRecord a;
  a.task_id = "g1";
  a.annotator_id = "ann";
  a.labels = s[0].fbi;
  a.duration_ms = 1234;
  a.is_gold = true;
  a.gold_conflicts = {2, 9};
  a.created_at = 1700000000123;
  write_annotations({a}, (dir / "a.jsonl").string());
  const auto ab = read_annotations((dir / "a.jsonl").string()).records.at(0);
  CHECK(to_json(ab) == to_json(a));
  std::ifstream in(dir / "a.jsonl");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == serialize_annotations({a}));
}

TEST_CASE("header errors") {
  const auto dir = fbitest::scratch_dir("headers");
  const auto f = (dir / "f.jsonl").string();
  write_text(f, "{\"schema\":\"pose3d/v1\"}\n");
  CHECK(code_of([&] { read_pose2d(f); }) == ErrorCode::kSchemaVersion);
  write_text(f, "{\"schema\":\"pose2d/v2\"}\n");
  CHECK(code_of([&] { read_pose2d(f); }) == ErrorCode::kSchemaVersion);
  write_text(f, "{\"id\":\"a\"}\n");
  CHECK(code_of([&] { read_pose2d(f); }) == ErrorCode::kParse);
  write_text(f, "not json\n");
  CHECK(code_of([&] { read_pose2d(f); }) == ErrorCode::kParse);
  write_text(f, "");
  CHECK(read_pose2d(f).records.empty());
  CHECK(code_of([&] { read_pose2d((dir / "missing.jsonl").string()); }) == ErrorCode::kIo);
  CHECK(code_of([&] { write_pose2d({}, (dir / "no/such/dir/x.jsonl").string()); }) == ErrorCode::kIo);
}

TEST_CASE("fault injection: malformed lines are reported and skipped") {
  const auto dir = fbitest::scratch_dir("faults");
  const auto s = make_synthetic({.count = 100, .seed = 8});
  std::string text = header_line(DatasetKind::kPose3D) + "\n";
  std::set<std::size_t> bad_lines;
  for (std::size_t i = 0; i < 100; ++i) {
    json j = to_json(Pose3DRecord{"r" + std::to_string(i), *s[i].pose3d, "x"});
    const std::size_t line = i + 2;
    switch (i % 10) {
      case 3:
        text += "{\"id\": \"broken\", \"pose3d\": [[1,2,3]\n";
        bad_lines.insert(line);
        continue;
      case 5:
        j["pose3d"].erase(4);
        bad_lines.insert(line);
        break;
      case 7:
        j.erase("id");
        bad_lines.insert(line);
        break;
      case 9:
        j["pose3d"][2][1] = "north";
        bad_lines.insert(line);
        break;
      default:
        break;
    }
    text += j.dump() + "\n";
    if (i == 50) text += "\n";  // blank lines are skipped
  }
  write_text(dir / "f.jsonl", text);
  const auto d = read_pose3d((dir / "f.jsonl").string());
  CHECK(d.records.size() == 60);
  REQUIRE(d.errors.size() == 40);
  std::set<std::size_t> reported;
  for (const auto& e : d.errors) {
    reported.insert(e.line);
    CHECK_FALSE(e.message.empty());
  }
  // Line numbers after the blank line shift by one.
  std::set<std::size_t> expected;
  for (auto l : bad_lines) expected.insert(l > 52 ? l + 1 : l);
  CHECK(reported == expected);
  CHECK(d.records.front().id == "r0");
}

TEST_CASE("out-of-range labels and probabilities are record errors") {
  auto s = make_synthetic({.count = 1, .seed = 2})[0];
  json j = to_json(s);
  j["fbi"][0] = 3;
  CHECK(code_of([&] { parse_synthetic_sample(j); }) == ErrorCode::kParse);
  j = to_json(s);
  j["p_fws"][0] = {0.5, 0.5, 0.5};
  CHECK(code_of([&] { parse_synthetic_sample(j); }) == ErrorCode::kParse);
}

TEST_CASE("writing 12K synthetic records is fast") {
  const auto dir = fbitest::scratch_dir("bulk");
  const auto s = make_synthetic({.count = 12000, .seed = 3});
  const auto t0 = std::chrono::steady_clock::now();
  write_synthetic(s, (dir / "big.jsonl").string());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 5.0);
  CHECK(read_synthetic((dir / "big.jsonl").string()).records.size() == 12000);
}

TEST_CASE("gold mixing hits the requested fraction") {
  const auto tasks = regular_tasks(90);
  const auto gold = gold_tasks(20);
  const auto mixed = mix_gold(tasks, gold, 0.1, 7);
  CHECK(mixed.size() == 100);  // round(0.1 * 90 / 0.9) = 10 gold
  std::set<std::string> ids;
  int n_gold = 0;
  for (const auto& t : mixed) {
    ids.insert(t.task_id);
    n_gold += t.is_gold ? 1 : 0;
  }
  CHECK(n_gold == 10);
  CHECK(ids.size() == 100);
  CHECK(mix_gold(tasks, gold, 0.1, 7)[17].task_id == mixed[17].task_id);
  CHECK(mix_gold(tasks, gold, 0.1, 8)[17].task_id != mixed[17].task_id);
}

TEST_CASE("gold mixing reuses a small pool with suffixed ids") {
  const auto mixed = mix_gold(regular_tasks(10), gold_tasks(3), 0.5, 1);
  CHECK(mixed.size() == 20);
  std::set<std::string> ids;
  int repeats = 0;
  for (const auto& t : mixed) {
    ids.insert(t.task_id);
    if (t.task_id.find("-r") != std::string::npos) ++repeats;
  }
  CHECK(ids.size() == 20);
  CHECK(repeats == 7);
  CHECK(mix_gold({}, gold_tasks(4), 1.0, 1).size() == 4);
  CHECK(mix_gold(regular_tasks(5), {}, 0.0, 1).size() == 5);
  CHECK(code_of([&] { mix_gold(regular_tasks(5), {}, 0.2, 1); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { mix_gold(regular_tasks(5), gold_tasks(2), 1.5, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("gold payloads never expose labels") {
  for (const auto& t : gold_tasks(5)) {
    const json v = t.client_view();
    CHECK_FALSE(v.contains("gold_fbi"));
    CHECK_FALSE(v.contains("fbi"));
    CHECK_FALSE(v.contains("is_gold"));
    CHECK_FALSE(v.contains("labels"));
    std::set<std::string> keys;
    for (auto it = v.begin(); it != v.end(); ++it) keys.insert(it.key());
    CHECK(keys == std::set<std::string>{"bones", "image_ref", "pose2d", "task_id", "topology_version"});
    CHECK(v["bones"].size() == 14);
  }
}

TEST_CASE("uncertain fraction") {
  std::vector<FbiMatrix> m{uniform_fbi(FbiStatus::kUncertain), uniform_fbi(FbiStatus::kForward)};
  CHECK(uncertain_fraction(m) == doctest::Approx(0.5));
  CHECK(code_of([] { uncertain_fraction(std::vector<FbiMatrix>{}); }) == ErrorCode::kEmptyDataset);
}
