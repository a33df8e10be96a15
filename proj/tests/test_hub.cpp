#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "fbipose/error.hpp"
#include "fbipose/hub.hpp"
#include "fbipose/pipeline.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace fbipose;
using nlohmann::json;

namespace {

std::vector<TaskDefinition> stream_of(std::size_t regular, std::size_t gold, std::uint64_t seed = 1) {
  std::vector<TaskDefinition> tasks, golds;
  const auto s = make_synthetic({.count = regular + gold, .seed = seed});
  for (std::size_t i = 0; i < regular; ++i) tasks.push_back({"t" + std::to_string(i), "img" + std::to_string(i), s[i].pose2d, false, std::nullopt});
  for (std::size_t i = regular; i < regular + gold; ++i) golds.push_back({"g" + std::to_string(i), "", s[i].pose2d, true, s[i].fbi});
  auto out = tasks;
  out.insert(out.end(), golds.begin(), golds.end());
  return out;
}

std::vector<int> as_ints(const FbiMatrix& m) {
  std::vector<int> v;
  for (auto s : m) v.push_back(static_cast<int>(s));
  return v;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

}  // namespace

TEST_CASE("tasks are dispensed in order and gold feedback lists clear conflicts") {
  AnnotationHub hub(stream_of(2, 1));
  auto t = hub.next_task("ann");
  REQUIRE(t);
  CHECK(t->task_id == "t0");
  auto r = hub.submit_labels("ann", "t0", std::vector<int>(14, 2), 100);
  CHECK(r.accepted);
  CHECK_FALSE(r.is_gold);
  CHECK(r.to_json()["feedback"].is_null());

  CHECK(hub.next_task("ann")->task_id == "t1");
  const auto g = hub.next_task("ann");
  REQUIRE(g);
  CHECK(g->is_gold);
  auto labels = as_ints(*g->gold_fbi);
  int flipped = -1;
  for (int b = 0; b < 14; ++b) {
    if (labels[static_cast<std::size_t>(b)] != 2) {
      labels[static_cast<std::size_t>(b)] = 1 - labels[static_cast<std::size_t>(b)];
      flipped = b;
      break;
    }
  }
  REQUIRE(flipped >= 0);
  r = hub.submit_labels("ann", g->task_id, labels, 300);
  CHECK(r.is_gold);
  REQUIRE(r.feedback.size() == 1);
  CHECK(r.feedback[0].bone == flipped);
  CHECK(r.feedback[0].correct == (*g->gold_fbi)[static_cast<std::size_t>(flipped)]);
  CHECK_FALSE(hub.next_task("ann"));

  const auto s = hub.annotator_stats("ann");
  CHECK(s.tasks_completed == 2);
  CHECK(s.gold_seen == 1);
  const int clear = clear_bone_count(*g->gold_fbi);
  CHECK(s.gold_total_clear_bones == clear);
  CHECK(s.gold_correct_bones == clear - 1);
  CHECK(*s.accuracy() == doctest::Approx(static_cast<double>(clear - 1) / clear));
  CHECK(*s.mean_duration_ms() == doctest::Approx(200.0));
}

TEST_CASE("submission errors") {
  AnnotationHub hub(stream_of(3, 0));
  hub.next_task("a");
  CHECK(code_of([&] { hub.submit_labels("a", "nope", std::vector<int>(14, 0), 1); }) == ErrorCode::kNotFound);
  CHECK(code_of([&] { hub.submit_labels("a", "t1", std::vector<int>(14, 0), 1); }) == ErrorCode::kConflict);
  CHECK(code_of([&] { hub.submit_labels("a", "t0", std::vector<int>(13, 0), 1); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { hub.submit_labels("a", "t0", std::vector<int>(14, 3), 1); }) == ErrorCode::kInvalidArgument);
  hub.submit_labels("a", "t0", std::vector<int>(14, 0), 1);
  CHECK(code_of([&] { hub.submit_labels("a", "t0", std::vector<int>(14, 0), 1); }) == ErrorCode::kConflict);
  CHECK(code_of([&] { hub.annotator_stats("ghost"); }) == ErrorCode::kNotFound);
  CHECK_FALSE(hub.annotator_stats("a").accuracy().has_value());
}

TEST_CASE("duplicate task ids are rejected") {
  auto s = stream_of(2, 0);
  s[1].task_id = s[0].task_id;
  CHECK(code_of([&] { AnnotationHub hub(s); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("log replay reconstructs identical stats") {
  const auto dir = fbitest::scratch_dir("replay");
  const auto log = (dir / "log.jsonl").string();
  const auto stream = stream_of(30, 10, 3);
  std::map<std::string, AnnotatorStats> live;
  // Independent tally of what the stats must be.
  std::map<std::string, std::array<long, 5>> tally;
  {
    AnnotationHub hub(stream, log);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> label(0, 2);
    std::uniform_int_distribution<int> dur(100, 5000);
    for (int round = 0; round < 60; ++round) {
      const std::string who = "ann" + std::to_string(round % 3);
      const auto t = hub.next_task(who);
      if (!t || round % 7 == 0) continue;  // some tasks are served and abandoned
      std::vector<int> labels(14);
      for (auto& l : labels) l = label(rng);
      const int d = dur(rng);
      hub.submit_labels(who, t->task_id, labels, d);
      auto& c = tally[who];
      c[0] += 1;
      c[4] += d;
      if (t->is_gold) {
        c[1] += 1;
        for (int b = 0; b < 14; ++b) {
          const auto g = (*t->gold_fbi)[static_cast<std::size_t>(b)];
          if (g == FbiStatus::kUncertain) continue;
          c[3] += 1;
          c[2] += static_cast<int>(g) == labels[static_cast<std::size_t>(b)] ? 1 : 0;
        }
      }
    }
    for (const auto& [who, counts] : tally) live[who] = hub.annotator_stats(who);
  }
  for (const auto& [who, c] : tally) {
    const auto& s = live.at(who);
    CHECK(s.tasks_completed == c[0]);
    CHECK(s.gold_seen == c[1]);
    CHECK(s.gold_correct_bones == c[2]);
    CHECK(s.gold_total_clear_bones == c[3]);
    CHECK(s.total_duration_ms == c[4]);
  }

  AnnotationHub replayed(stream, log);
  for (const auto& [who, s] : live) CHECK(replayed.annotator_stats(who) == s);
  const auto from_log = stats_from_records(read_annotations(log).records, stream);
  for (const auto& [who, s] : live) CHECK(from_log.at(who) == s);

  // Submitted tasks stay submitted after a restart.
  const auto exported = replayed.export_annotations("ann1");
  REQUIRE_FALSE(exported.empty());
  CHECK(code_of([&] { replayed.submit_labels("ann1", exported[0].task_id, std::vector<int>(14, 0), 1); }) ==
        ErrorCode::kConflict);
  for (std::size_t i = 1; i < exported.size(); ++i) {
    CHECK(std::make_pair(exported[i - 1].created_at, exported[i - 1].task_id) <=
          std::make_pair(exported[i].created_at, exported[i].task_id));
  }
}

TEST_CASE("replay rejects a log that names unknown tasks") {
  const auto dir = fbitest::scratch_dir("replay_bad");
  const auto log = (dir / "log.jsonl").string();
  {
    AnnotationHub hub(stream_of(3, 0), log);
    hub.next_task("a");
    hub.submit_labels("a", "t0", std::vector<int>(14, 0), 5);
  }
  auto other = stream_of(3, 0);
  other[0].task_id = "renamed";
  CHECK(code_of([&] { AnnotationHub hub(other, log); }) == ErrorCode::kNotFound);
}

TEST_CASE("concurrent annotators") {
  AnnotationHub hub(stream_of(40, 0));
  std::vector<std::thread> threads;
  for (int a = 0; a < 4; ++a) {
    threads.emplace_back([&hub, a] {
      const std::string who = "w" + std::to_string(a);
      while (auto t = hub.next_task(who)) hub.submit_labels(who, t->task_id, std::vector<int>(14, 2), 10);
    });
  }
  for (auto& t : threads) t.join();
  for (int a = 0; a < 4; ++a) CHECK(hub.annotator_stats("w" + std::to_string(a)).tasks_completed == 40);
  CHECK(hub.export_annotations().size() == 160);
}

TEST_CASE("HTTP API") {
  const auto dir = fbitest::scratch_dir("http");
  {
    std::ofstream(dir / "index.html") << "<html>ui</html>";
  }
  AnnotationHub hub(stream_of(1, 1));
  HubServer server(hub, dir.string());
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/api/topology");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["fbi_bones"].size() == 14);

  res = cli.Get("/api/tasks/next");
  REQUIRE(res);
  CHECK(res->status == 400);

  std::vector<std::string> served;
  for (int i = 0; i < 2; ++i) {
    res = cli.Get("/api/tasks/next?annotator=web");
    REQUIRE(res);
    CHECK(res->status == 200);
    const json body = json::parse(res->body);
    CHECK(body["done"] == false);
    const json& task = body["task"];
    CHECK_FALSE(task.contains("gold_fbi"));
    CHECK_FALSE(task.contains("is_gold"));
    CHECK(task["pose2d"].size() == 16);
    served.push_back(task["task_id"]);
  }
  res = cli.Get("/api/tasks/next?annotator=web");
  CHECK(json::parse(res->body) == json{{"done", true}});

  const json labels = json::array({0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1});
  res = cli.Post("/api/tasks/" + served[0] + "/labels", json{{"annotator", "web"}, {"labels", labels}, {"duration_ms", 50}}.dump(),
                 "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["accepted"] == true);

  res = cli.Post("/api/tasks/" + served[0] + "/labels", json{{"annotator", "web"}, {"labels", labels}}.dump(), "application/json");
  CHECK(res->status == 409);
  res = cli.Post("/api/tasks/unknown/labels", json{{"annotator", "web"}, {"labels", labels}}.dump(), "application/json");
  CHECK(res->status == 404);
  res = cli.Post("/api/tasks/" + served[1] + "/labels", json{{"annotator", "web"}, {"labels", {0, 1}}}.dump(), "application/json");
  CHECK(res->status == 400);
  CHECK(json::parse(res->body).contains("error"));
  res = cli.Post("/api/tasks/" + served[1] + "/labels", "{not json", "application/json");
  CHECK(res->status == 400);
  res = cli.Post("/api/tasks/" + served[1] + "/labels", json{{"annotator", "web"}, {"labels", labels}, {"duration_ms", 70}}.dump(),
                 "application/json");
  CHECK(res->status == 200);

  res = cli.Get("/api/annotators/web/stats");
  REQUIRE(res);
  const json stats = json::parse(res->body);
  CHECK(stats["tasks_completed"] == 2);
  CHECK(stats["gold_seen"] == 1);
  CHECK(stats["mean_duration_ms"] == 60.0);
  CHECK(cli.Get("/api/annotators/nobody/stats")->status == 404);

  res = cli.Get("/api/export?annotator=web");
  REQUIRE(res);
  CHECK(res->status == 200);
  const std::string first = res->body.substr(0, res->body.find('\n'));
  CHECK(json::parse(first)["schema"] == "fbi-annotation/v1");
  CHECK(std::count(res->body.begin(), res->body.end(), '\n') == 3);

  res = cli.Get("/index.html");
  REQUIRE(res);
  CHECK(res->body == "<html>ui</html>");
  server.stop();
}

TEST_CASE("service runs without a UI directory") {
  AnnotationHub hub(stream_of(1, 0));
  HubServer server(hub);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  CHECK(cli.Get("/api/tasks/next?annotator=x")->status == 200);
  CHECK(cli.Get("/index.html")->status == 404);
  server.stop();
}
