#include "exq/service.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include "exq/collection_io.hpp"
#include "exq/harness.hpp"
#include "exq/index.hpp"
#include "exq/session.hpp"
#include "httplib.h"
#include "json.hpp"

namespace exq {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::size_t kMaxSuggestions = 100;

struct HttpError {
  int status;
  std::string message;
  json extra = json::object();
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// FNV-1a; only used to derive stable content ids.
std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HttpError{400, "cannot read " + path.string()};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CollectionEntry {
  std::string id;
  std::size_t n = 0;
  std::uint32_t dim_visual = 0;
  std::uint32_t dim_text = 0;
  std::uint64_t seed = 0;
  std::string thumbnail_template;
  fs::path dir;
  Corpus corpus;

  json describe() const {
    json j = {{"id", id},
              {"n", n},
              {"dims", {{"visual", dim_visual}, {"text", dim_text}}},
              {"seed", seed},
              {"files",
               {{"visual", (dir / "visual.exqc").string()},
                {"text", (dir / "text.exqc").string()},
                {"visual_index", (dir / "visual.exqi").string()},
                {"text_index", (dir / "text.exqi").string()}}}};
    if (!thumbnail_template.empty()) j["thumbnail_template"] = thumbnail_template;
    return j;
  }
};

struct SessionEntry {
  std::mutex mutex;
  std::shared_ptr<const CollectionEntry> collection;
  std::unique_ptr<Session> session;
};

RetrievalParams apply_params(RetrievalParams p, const json& j) {
  auto read = [&](std::initializer_list<const char*> keys, auto& field) {
    for (const char* key : keys) {
      if (j.contains(key)) {
        const auto& v = j.at(key);
        if (v.is_string() && v.get<std::string>() == "inf") {
          field = static_cast<std::remove_reference_t<decltype(field)>>(kUnlimited);
        } else {
          field = v.get<std::remove_reference_t<decltype(field)>>();
        }
      }
    }
  };
  read({"b"}, p.b);
  read({"r"}, p.r);
  read({"k"}, p.k);
  read({"w", "workers"}, p.workers);
  read({"S_c", "segments"}, p.segments);
  read({"S_m", "max_cluster_size"}, p.max_cluster_size);
  if (p.k > kMaxSuggestions) throw HttpError{400, "k must not exceed 100"};
  try {
    p.validate();
  } catch (const Error& e) {
    throw HttpError{400, e.what()};
  }
  return p;
}

json params_json(const RetrievalParams& p) {
  json sm = p.max_cluster_size == kUnlimited ? json("inf") : json(p.max_cluster_size);
  return {{"b", p.b}, {"r", p.r}, {"k", p.k}, {"w", p.workers}, {"S_c", p.segments}, {"S_m", sm}};
}

json stats_json(const RoundStats& s) {
  return {{"round", s.round},
          {"latency_ms",
           {{"train", s.train_ms},
            {"select", s.select_ms},
            {"score", s.score_ms},
            {"fuse", s.fuse_ms},
            {"total", s.total_ms}}},
          {"clusters_scored", s.clusters_scored},
          {"items_scored", s.items_scored}};
}

std::vector<ItemId> id_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<ItemId>>();
}

std::string substitute(const std::string& tmpl, ItemId id) {
  std::string out = tmpl;
  const std::string key = "{id}";
  for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos)) {
    out.replace(pos, key.size(), std::to_string(id));
  }
  return out;
}

}  // namespace

struct Service::Impl {
  fs::path data_dir;
  httplib::Server server;
  std::thread thread;

  mutable std::shared_mutex collections_mutex;
  std::map<std::string, std::shared_ptr<const CollectionEntry>> collections;

  std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
  std::uint64_t next_session = 1;

  explicit Impl(fs::path dir) : data_dir(std::move(dir)) {
    fs::create_directories(data_dir / "collections");
    load_existing();
    routes();
  }

  void load_existing() {
    for (const auto& e : fs::directory_iterator(data_dir / "collections")) {
      const fs::path manifest = e.path() / "manifest.json";
      if (!e.is_directory() || !fs::exists(manifest)) continue;
      try {
        const json m = json::parse(read_file(manifest));
        auto entry = std::make_shared<CollectionEntry>();
        entry->id = m.at("id").get<std::string>();
        entry->seed = m.at("seed").get<std::uint64_t>();
        entry->thumbnail_template = m.value("thumbnail_template", std::string());
        entry->dir = e.path();
        const auto visual = load_compressed(e.path() / "visual.exqc");
        const auto text = load_compressed(e.path() / "text.exqc");
        entry->n = visual.size();
        entry->dim_visual = visual.dim;
        entry->dim_text = text.dim;
        entry->corpus.visual = load_index(e.path() / "visual.exqi", visual.vectors);
        entry->corpus.text = load_index(e.path() / "text.exqi", text.vectors);
        collections[entry->id] = std::move(entry);
      } catch (const std::exception& ex) {
        std::cerr << "exq: skipping collection " << e.path() << ": " << ex.what() << '\n';
      } catch (const HttpError& ex) {
        std::cerr << "exq: skipping collection " << e.path() << ": " << ex.message << '\n';
      }
    }
  }

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class Fn>
  static httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const HttpError& e) {
        json body = {{"error", e.message}};
        body.update(e.extra);
        send(res, e.status, body);
      } catch (const json::exception& e) {
        send(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
      } catch (const Error& e) {
        send(res, 400, {{"error", e.what()}});
      }
    };
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::exception&) {
      throw HttpError{400, "request body is not valid JSON"};
    }
  }

  std::shared_ptr<SessionEntry> find_session(const std::string& id) {
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "unknown session " + id};
    return it->second;
  }

  std::shared_ptr<const CollectionEntry> find_collection(const std::string& id) const {
    std::shared_lock lock(collections_mutex);
    auto it = collections.find(id);
    if (it == collections.end()) throw HttpError{404, "unknown collection " + id};
    return it->second;
  }

  void ingest(const httplib::Request& req, httplib::Response& res) {
    std::string visual_bytes;
    std::string text_bytes;
    std::uint64_t seed = 1;
    std::string tmpl;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("visual") || !req.has_file("text")) {
        throw HttpError{400, "multipart body needs \"visual\" and \"text\" files"};
      }
      visual_bytes = req.get_file_value("visual").content;
      text_bytes = req.get_file_value("text").content;
      if (req.has_file("seed")) seed = std::stoull(req.get_file_value("seed").content);
      if (req.has_file("thumbnail_template")) tmpl = req.get_file_value("thumbnail_template").content;
    } else {
      const json body = parse_body(req);
      if (!body.contains("visual_path") || !body.contains("text_path")) {
        throw HttpError{400, "body needs \"visual_path\" and \"text_path\""};
      }
      visual_bytes = read_file(body.at("visual_path").get<std::string>());
      text_bytes = read_file(body.at("text_path").get<std::string>());
      seed = body.value("seed", seed);
      tmpl = body.value("thumbnail_template", tmpl);
    }

    const std::string id = hex64(fnv1a(text_bytes, fnv1a(visual_bytes)));
    {
      std::shared_lock lock(collections_mutex);
      if (collections.contains(id)) {
        throw HttpError{409, "collection already exists", {{"id", id}}};
      }
    }

    auto parse = [](const std::string& bytes, const char* what) {
      std::istringstream in(bytes);
      try {
        return read_dense(in);
      } catch (const Error& e) {
        throw HttpError{400, std::string("malformed ") + what + " file: " + e.what()};
      }
    };
    const DenseCollection visual = parse(visual_bytes, "visual");
    const DenseCollection text = parse(text_bytes, "text");
    if (visual.dim() > kMaxDimension || text.dim() > kMaxDimension) {
      throw HttpError{422, "dimensionality exceeds id width"};
    }
    if (visual.size() != text.size()) throw HttpError{422, "modality count mismatch"};
    if (visual.empty()) throw HttpError{400, "empty collection"};

    auto entry = std::make_shared<CollectionEntry>();
    entry->id = id;
    entry->seed = seed;
    entry->thumbnail_template = tmpl;
    entry->n = visual.size();
    entry->dim_visual = visual.dim();
    entry->dim_text = text.dim();
    entry->dir = data_dir / "collections" / id;

    const auto cv = compress_collection(visual, compute_feature_stats(visual));
    const auto ct = compress_collection(text, compute_feature_stats(text));
    entry->corpus = build_corpus(cv, ct, seed);

    fs::create_directories(entry->dir);
    save_compressed(entry->dir / "visual.exqc", cv);
    save_compressed(entry->dir / "text.exqc", ct);
    save_index(entry->corpus.visual, entry->dir / "visual.exqi");
    save_index(entry->corpus.text, entry->dir / "text.exqi");
    {
      json manifest = {{"id", id}, {"seed", seed}, {"n", entry->n}};
      if (!tmpl.empty()) manifest["thumbnail_template"] = tmpl;
      std::ofstream out(entry->dir / "manifest.json", std::ios::trunc);
      out << manifest.dump(2);
    }

    std::unique_lock lock(collections_mutex);
    if (collections.contains(id)) throw HttpError{409, "collection already exists", {{"id", id}}};
    collections[id] = entry;
    send(res, 201, entry->describe());
  }

  json suggestions_payload(const SessionEntry& entry) {
    const Session& s = *entry.session;
    json items = json::array();
    for (const auto& c : s.last_suggestions().items) {
      json item = {{"id", c.id},
                   {"score_visual", c.score_visual},
                   {"score_text", c.score_text},
                   {"avg_rank", c.avg_rank}};
      if (!entry.collection->thumbnail_template.empty()) {
        item["thumbnail"] = substitute(entry.collection->thumbnail_template, c.id);
      }
      items.push_back(std::move(item));
    }
    return {{"round", s.round()}, {"items", items}, {"stats", stats_json(s.history().back())}};
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/collections", guarded([this](const auto& req, auto& res) { ingest(req, res); }));

    server.Get("/collections", guarded([this](const auto&, auto& res) {
      json list = json::array();
      std::shared_lock lock(collections_mutex);
      for (const auto& [id, c] : collections) list.push_back(c->describe());
      send(res, 200, list);
    }));

    server.Get(R"(/collections/([^/]+))", guarded([this](const auto& req, auto& res) {
      send(res, 200, find_collection(req.matches[1])->describe());
    }));

    server.Post("/sessions", guarded([this](const auto& req, auto& res) {
      const json body = parse_body(req);
      if (!body.contains("collection")) throw HttpError{400, "body needs \"collection\""};
      auto collection = find_collection(body.at("collection").get<std::string>());
      const RetrievalParams params =
          apply_params(RetrievalParams{}, body.value("params", json::object()));
      const std::uint64_t seed = body.value("seed", std::uint64_t{1});

      auto entry = std::make_shared<SessionEntry>();
      entry->collection = collection;
      std::string id;
      {
        std::lock_guard lock(sessions_mutex);
        id = "s" + std::to_string(next_session++);
      }
      entry->session = std::make_unique<Session>(id, params, seed, collection->n);
      try {
        entry->session->submit_feedback(id_list(body, "positives"), id_list(body, "negatives"));
      } catch (const Error& e) {
        const std::string msg = e.what();
        throw HttpError{msg == "conflicting label" ? 409 : 400, msg};
      }
      {
        std::lock_guard lock(sessions_mutex);
        sessions[id] = entry;
      }
      send(res, 201, {{"id", id}, {"collection", collection->id}, {"params", params_json(params)}});
    }));

    server.Post(R"(/sessions/([^/]+)/feedback)", guarded([this](const auto& req, auto& res) {
      auto entry = find_session(req.matches[1]);
      const json body = parse_body(req);
      std::lock_guard lock(entry->mutex);
      try {
        entry->session->submit_feedback(id_list(body, "relevant"), id_list(body, "not_relevant"));
      } catch (const Error& e) {
        const std::string msg = e.what();
        throw HttpError{msg == "conflicting label" ? 409 : 400, msg};
      }
      res.status = 204;
    }));

    server.Post(R"(/sessions/([^/]+)/params)", guarded([this](const auto& req, auto& res) {
      auto entry = find_session(req.matches[1]);
      const json body = parse_body(req);
      std::lock_guard lock(entry->mutex);
      entry->session->set_params(apply_params(entry->session->params(), body));
      send(res, 200, {{"params", params_json(entry->session->params())}});
    }));

    server.Get(R"(/sessions/([^/]+)/suggestions)", guarded([this](const auto& req, auto& res) {
      auto entry = find_session(req.matches[1]);
      std::lock_guard lock(entry->mutex);
      Session& s = *entry->session;
      if (s.needs_round()) {
        if (s.positives().empty()) throw HttpError{409, "cold session: no positive labels"};
        s.next_round(entry->collection->corpus);
      }
      send(res, 200, suggestions_payload(*entry));
    }));

    server.Get(R"(/sessions/([^/]+)/stats)", guarded([this](const auto& req, auto& res) {
      auto entry = find_session(req.matches[1]);
      std::lock_guard lock(entry->mutex);
      json list = json::array();
      for (const auto& s : entry->session->history()) list.push_back(stats_json(s));
      send(res, 200, list);
    }));
  }
};

Service::Service(std::filesystem::path data_dir) : impl_(std::make_unique<Impl>(std::move(data_dir))) {}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  return bound;
}

void Service::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::size_t Service::collection_count() const {
  std::shared_lock lock(impl_->collections_mutex);
  return impl_->collections.size();
}

std::filesystem::path default_data_dir() {
  if (const char* dir = std::getenv("EXQ_DATA_DIR"); dir != nullptr && *dir != '\0') return dir;
  return "exq-data";
}

}  // namespace exq
