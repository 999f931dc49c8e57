#include <set>
#include <sstream>

#include "doctest.h"
#include "exq/harness.hpp"
#include "exq/service.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace exq;
using nlohmann::json;

namespace {

std::string dense_bytes(const DenseCollection& d) {
  std::ostringstream out;
  write_dense(out, d);
  return out.str();
}

struct Fixture {
  fixture::TempDir dir{"service"};
  SyntheticCollection synth{[] {
    SyntheticSpec s;
    s.n = 1000;
    s.dim_visual = 64;
    s.dim_text = 16;
    s.categories = 1;
    s.seed = 4;
    return s;
  }()};
  std::string visual = dense_bytes(synth.dense(Modality::kVisual));
  std::string text = dense_bytes(synth.dense(Modality::kText));
};

httplib::Result post_files(httplib::Client& cli, const std::string& visual, const std::string& text,
                           const std::string& tmpl = "") {
  httplib::MultipartFormDataItems items{{"visual", visual, "visual.exqd", "application/octet-stream"},
                                        {"text", text, "text.exqd", "application/octet-stream"},
                                        {"seed", "7", "", ""}};
  if (!tmpl.empty()) items.push_back({"thumbnail_template", tmpl, "", ""});
  return cli.Post("/collections", items);
}

httplib::Result post_json(httplib::Client& cli, const std::string& path, const json& body) {
  return cli.Post(path, body.dump(), "application/json");
}

json body_of(const httplib::Result& r) { return json::parse(r->body); }

std::vector<ItemId> ids_of(const json& suggestions) {
  std::vector<ItemId> out;
  for (const auto& item : suggestions.at("items")) out.push_back(item.at("id").get<ItemId>());
  return out;
}

}  // namespace

TEST_CASE("collections: ingest, list, duplicates and errors") {
  Fixture f;
  Service service(f.dir.path());
  const int port = service.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);

  auto created = post_files(cli, f.visual, f.text, "https://img.example/{id}.jpg");
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const auto c = body_of(created);
  const std::string id = c.at("id");
  CHECK(id.size() == 16);
  CHECK(c.at("n") == 1000);
  CHECK(c.at("dims").at("visual") == 64);
  CHECK(c.at("dims").at("text") == 16);
  CHECK(c.at("seed") == 7);
  CHECK(std::filesystem::exists(c.at("files").at("visual_index").get<std::string>()));
  CHECK(std::filesystem::exists(c.at("files").at("text").get<std::string>()));
  CHECK(created->get_header_value("Access-Control-Allow-Origin") == "*");

  auto got = cli.Get("/collections/" + id);
  REQUIRE(got);
  CHECK(got->status == 200);
  CHECK(body_of(got).at("n") == 1000);
  auto list = cli.Get("/collections");
  REQUIRE(list);
  CHECK(body_of(list).size() == 1);
  CHECK(cli.Get("/collections/nope")->status == 404);

  auto again = post_files(cli, f.visual, f.text);
  REQUIRE(again);
  CHECK(again->status == 409);
  CHECK(body_of(again).at("id") == id);

  SUBCASE("count mismatch") {
    const auto d = f.synth.dense(Modality::kText);
    const std::vector<float> fewer(d.values().begin(), d.values().end() - d.dim());
    auto r = post_files(cli, f.visual, dense_bytes(DenseCollection(d.dim(), fewer)));
    REQUIRE(r);
    CHECK(r->status == 422);
    CHECK(body_of(r).at("error") == "modality count mismatch");
  }
  SUBCASE("dimensionality beyond the id width") {
    DenseCollection wide(1024);
    for (int i = 0; i < 1000; ++i) wide.push_back(std::vector<float>(1024, 0.01F));
    auto r = post_files(cli, dense_bytes(wide), f.text);
    REQUIRE(r);
    CHECK(r->status == 422);
    CHECK(body_of(r).at("error") == "dimensionality exceeds id width");
  }
  SUBCASE("malformed file") {
    auto r = post_files(cli, "not a collection", f.text);
    REQUIRE(r);
    CHECK(r->status == 400);
    auto j = post_json(cli, "/collections", {{"visual_path", "/missing.exqd"}, {"text_path", "/missing.exqd"}});
    CHECK(j->status == 400);
    CHECK(cli.Post("/collections", "{", "application/json")->status == 400);
  }
  SUBCASE("JSON ingest by path") {
    DenseCollection other(8);
    for (int i = 0; i < 300; ++i) other.push_back(std::vector<float>(8, 0.1F * static_cast<float>(i % 10)));
    save_dense(f.dir / "v.exqd", other);
    save_dense(f.dir / "t.exqd", other);
    auto r = post_json(cli, "/collections",
                       {{"visual_path", (f.dir / "v.exqd").string()}, {"text_path", (f.dir / "t.exqd").string()}});
    REQUIRE(r);
    CHECK(r->status == 201);
    CHECK(body_of(r).at("n") == 300);
  }
}

TEST_CASE("sessions: suggestions, feedback, caching and stats") {
  Fixture f;
  Service service(f.dir.path());
  const int port = service.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  const std::string cid = body_of(post_files(cli, f.visual, f.text, "https://img.example/{id}.jpg")).at("id");

  const auto members = f.synth.members(0);
  const std::vector<ItemId> pos(members.begin(), members.begin() + 10);
  auto created = post_json(cli, "/sessions",
                           {{"collection", cid}, {"seed", 3}, {"positives", pos}, {"params", {{"b", 8}, {"k", 10}}}});
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const auto s = body_of(created);
  const std::string sid = s.at("id");
  CHECK(s.at("collection") == cid);
  CHECK(s.at("params").at("b") == 8);
  CHECK(s.at("params").at("k") == 10);
  CHECK(s.at("params").at("S_m") == "inf");

  auto first = cli.Get("/sessions/" + sid + "/suggestions");
  REQUIRE(first);
  REQUIRE(first->status == 200);
  const auto round1 = body_of(first);
  CHECK(round1.at("round") == 1);
  CHECK(round1.at("items").size() == 10);
  const auto& item = round1.at("items").at(0);
  CHECK(item.contains("score_visual"));
  CHECK(item.contains("score_text"));
  CHECK(item.contains("avg_rank"));
  CHECK(item.at("thumbnail") == "https://img.example/" + std::to_string(item.at("id").get<ItemId>()) + ".jpg");
  CHECK(round1.at("stats").at("round") == 1);
  CHECK(round1.at("stats").at("latency_ms").contains("train"));

  auto cached = cli.Get("/sessions/" + sid + "/suggestions");
  CHECK(cached->body == first->body);

  const auto ids1 = ids_of(round1);
  std::vector<ItemId> rel, non;
  for (ItemId id : ids1) (f.synth.category(id) == 0 ? rel : non).push_back(id);
  auto fb = post_json(cli, "/sessions/" + sid + "/feedback", {{"relevant", rel}, {"not_relevant", non}});
  REQUIRE(fb);
  CHECK(fb->status == 204);

  const auto round2 = body_of(cli.Get("/sessions/" + sid + "/suggestions"));
  CHECK(round2.at("round") == 2);
  std::set<ItemId> seen(ids1.begin(), ids1.end());
  for (ItemId id : ids_of(round2)) CHECK(seen.insert(id).second);

  const std::vector<ItemId> both{ids1[0]};
  auto conflict = post_json(cli, "/sessions/" + sid + "/feedback", {{"relevant", both}, {"not_relevant", both}});
  CHECK(conflict->status == 409);

  auto params = post_json(cli, "/sessions/" + sid + "/params", {{"k", 5}, {"S_m", 500}});
  REQUIRE(params);
  CHECK(params->status == 200);
  CHECK(body_of(params).at("params").at("k") == 5);
  CHECK(body_of(params).at("params").at("S_m") == 500);
  CHECK(post_json(cli, "/sessions/" + sid + "/params", {{"k", 101}})->status == 400);
  CHECK(post_json(cli, "/sessions/" + sid + "/params", {{"S_c", 3}, {"w", 2}})->status == 400);

  post_json(cli, "/sessions/" + sid + "/feedback", json::object());
  const auto round3 = body_of(cli.Get("/sessions/" + sid + "/suggestions"));
  CHECK(round3.at("round") == 3);
  CHECK(round3.at("items").size() == 5);

  auto stats = cli.Get("/sessions/" + sid + "/stats");
  REQUIRE(stats);
  const auto history = body_of(stats);
  REQUIRE(history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(history[i].at("round") == i + 1);
    CHECK(history[i].at("items_scored").get<std::size_t>() <= 2000);
  }

  CHECK(cli.Get("/sessions/zzz/suggestions")->status == 404);
  CHECK(cli.Get("/sessions/zzz/stats")->status == 404);
  CHECK(post_json(cli, "/sessions/zzz/feedback", json::object())->status == 404);
  CHECK(post_json(cli, "/sessions", {{"collection", "nope"}})->status == 404);
  CHECK(post_json(cli, "/sessions", json::object())->status == 400);
  CHECK(post_json(cli, "/sessions", {{"collection", cid}, {"positives", both}, {"negatives", both}})->status == 409);
  CHECK(post_json(cli, "/sessions", {{"collection", cid}, {"params", {{"k", 200}}}})->status == 400);

  auto cold = body_of(post_json(cli, "/sessions", {{"collection", cid}}));
  CHECK(cli.Get("/sessions/" + cold.at("id").get<std::string>() + "/suggestions")->status == 409);

  auto preflight = cli.Options("/sessions");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
}

TEST_CASE("sessions replay deterministically across services") {
  Fixture f;
  std::vector<std::string> payloads[2];
  for (int run = 0; run < 2; ++run) {
    fixture::TempDir dir("service-replay");
    Service service(dir.path());
    httplib::Client cli("127.0.0.1", service.start("127.0.0.1", 0));
    const std::string cid = body_of(post_files(cli, f.visual, f.text)).at("id");
    const auto members = f.synth.members(0);
    const std::vector<ItemId> pos(members.begin(), members.begin() + 10);
    const std::string sid =
        body_of(post_json(cli, "/sessions", {{"collection", cid}, {"seed", 9}, {"positives", pos}})).at("id");
    for (int round = 0; round < 3; ++round) {
      auto j = body_of(cli.Get("/sessions/" + sid + "/suggestions"));
      payloads[run].push_back(json(ids_of(j)).dump());
      post_json(cli, "/sessions/" + sid + "/feedback", {{"not_relevant", ids_of(j)}});
    }
  }
  CHECK(payloads[0] == payloads[1]);
}

TEST_CASE("collections are reloaded from the data directory") {
  Fixture f;
  std::string cid;
  {
    Service service(f.dir.path());
    httplib::Client cli("127.0.0.1", service.start("127.0.0.1", 0));
    cid = body_of(post_files(cli, f.visual, f.text)).at("id");
  }
  Service service(f.dir.path());
  CHECK(service.collection_count() == 1);
  httplib::Client cli("127.0.0.1", service.start("127.0.0.1", 0));
  auto got = cli.Get("/collections/" + cid);
  REQUIRE(got);
  CHECK(got->status == 200);
  CHECK(body_of(got).at("seed") == 7);
  CHECK(post_files(cli, f.visual, f.text)->status == 409);
}

TEST_CASE("default data directory honours EXQ_DATA_DIR") {
  ::setenv("EXQ_DATA_DIR", "/tmp/exq-test-data", 1);
  CHECK(default_data_dir() == std::filesystem::path("/tmp/exq-test-data"));
  ::unsetenv("EXQ_DATA_DIR");
  CHECK(default_data_dir() == std::filesystem::path("exq-data"));
}
