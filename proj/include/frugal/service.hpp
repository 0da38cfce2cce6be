#pragma once

// HTTP session service for human labeling. Handlers are plain functions from a
// JSON request to a (status, JSON) response so they can be exercised without a
// socket; bind() wires them onto a cpp-httplib server.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>

#include "httplib.h"

#include "frugal/serialize.hpp"

namespace frugal {

struct Response {
  int status = 200;
  json body;
};

class LabelService {
 public:
  // With a non-empty state_dir, datasets and session snapshots are written
  // there after every change and reloaded on construction.
  explicit LabelService(std::filesystem::path state_dir = {}) : state_dir_(std::move(state_dir)) {
    if (!state_dir_.empty()) {
      std::filesystem::create_directories(state_dir_ / "datasets");
      std::filesystem::create_directories(state_dir_ / "sessions");
      restore();
    }
  }

  Response register_dataset(const json& body) {
    try {
      if (!body.is_object()) return error(400, "body must be a JSON object");
      auto entry = build_entry(body);
      std::string id;
      {
        std::unique_lock lock(registry_mutex_);
        id = body.contains("dataset_id") ? body["dataset_id"].get<std::string>()
                                         : "d" + std::to_string(++dataset_counter_);
        if (datasets_.count(id)) return error(409, "dataset '" + id + "' already exists");
        entry->raw = body;
        entry->raw["dataset_id"] = id;
        datasets_[id] = entry;
      }
      persist_dataset(id, *entry);
      json out{{"dataset_id", id},
               {"n", entry->pool->size()},
               {"d", entry->pool->dims()},
               {"nc", entry->pool->nc},
               {"has_test", entry->test != nullptr},
               {"warnings", entry->pool->warnings}};
      return {201, out};
    } catch (const ConfigError& e) {
      return error(400, e.what(), e.field());
    } catch (const std::exception& e) {
      return error(400, e.what());
    }
  }

  Response create_session(const json& body) {
    if (!body.is_object()) return error(400, "body must be a JSON object");
    if (!body.contains("dataset_id") || !body["dataset_id"].is_string())
      return error(404, "missing dataset reference", "dataset_id");
    std::shared_ptr<DatasetEntry> ds;
    {
      std::shared_lock lock(registry_mutex_);
      auto it = datasets_.find(body["dataset_id"].get<std::string>());
      if (it == datasets_.end()) return error(404, "unknown dataset '" + body["dataset_id"].get<std::string>() + "'");
      ds = it->second;
    }
    auto entry = std::make_shared<SessionEntry>();
    try {
      RunConfig cfg = config_from_json(body.value("config", json::object()));
      entry->session = std::make_unique<Session>(cfg, ds->pool, ds->test);
    } catch (const ConfigError& e) {
      return error(400, e.what(), e.field());
    } catch (const ParameterError& e) {
      return error(400, e.what(), "config");
    }
    entry->dataset_id = body["dataset_id"].get<std::string>();
    entry->dataset = ds;
    entry->created = entry->updated = now_iso();
    std::string id;
    {
      std::unique_lock lock(registry_mutex_);
      do {
        id = new_token();
      } while (sessions_.count(id));
      entry->id = id;
      sessions_[id] = entry;
    }
    std::lock_guard guard(entry->mutex);
    persist_session(*entry);
    json out{{"session_id", id}, {"phase", phase_name(entry->session->phase())}, {"display", display_payload(*entry)},
             {"warnings", entry->session->warnings()}};
    return {201, out};
  }

  Response get_display(const std::string& id) {
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    std::lock_guard guard(entry->mutex);
    if (entry->session->phase() == Phase::finished) {
      json out{{"error", "session finished"}, {"phase", "finished"}, {"t", entry->session->t()}};
      return {409, out};
    }
    return {200, display_payload(*entry)};
  }

  // Body: {"labels": {"<sample id>": class, ...}}. All entries are validated
  // before any is applied.
  Response submit_labels(const std::string& id, const json& body) {
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    std::lock_guard guard(entry->mutex);
    auto& s = *entry->session;
    if (s.phase() == Phase::finished) return {409, json{{"error", "session finished"}, {"phase", "finished"}}};
    if (!body.is_object() || !body.contains("labels") || !body["labels"].is_object())
      return error(400, "expected {\"labels\": {id: class}}", "labels");

    const auto& pending = s.pending_display();
    std::map<std::string, std::size_t> by_id;
    for (auto i : pending) by_id[s.pool().ids[i]] = i;
    json errors = json::array();
    std::vector<std::pair<std::size_t, int>> accepted;
    for (auto it = body["labels"].begin(); it != body["labels"].end(); ++it) {
      auto where = by_id.find(it.key());
      if (where == by_id.end()) {
        errors.push_back({{"id", it.key()}, {"message", "not in the pending display"}});
        continue;
      }
      if (!it.value().is_number_integer()) {
        errors.push_back({{"id", it.key()}, {"message", "label must be an integer"}});
        continue;
      }
      const int y = it.value().get<int>();
      if (y < 0 || y >= s.pool().nc) {
        errors.push_back({{"id", it.key()},
                          {"message", "label " + std::to_string(y) + " outside [0, " + std::to_string(s.pool().nc) + ")"}});
        continue;
      }
      accepted.emplace_back(where->second, y);
    }
    if (!errors.empty()) return {400, json{{"error", "validation failed"}, {"errors", errors}}};
    for (auto [i, y] : accepted) s.submit(i, y);

    bool advanced = false;
    json record = nullptr;
    if (s.ready()) {
      try {
        record = record_to_json(s.advance());
        advanced = true;
      } catch (const std::exception& e) {
        return error(500, std::string("advance failed: ") + e.what());
      }
    }
    entry->updated = now_iso();
    persist_session(*entry);
    json out{{"phase", phase_name(s.phase())},
             {"t", s.t()},
             {"advanced", advanced},
             {"remaining", s.missing_labels().size()},
             {"record", record}};
    return {200, out};
  }

  Response get_metrics(const std::string& id) {
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    std::lock_guard guard(entry->mutex);
    json records = json::array();
    for (const auto& r : entry->session->records()) records.push_back(record_to_json(r));
    return {200, json{{"session_id", id},
                      {"phase", phase_name(entry->session->phase())},
                      {"rl", entry->session->config().strategy.is_rl()},
                      {"records", records}}};
  }

  Response get_state(const std::string& id) {
    auto entry = find(id);
    if (!entry) return error(404, "unknown session '" + id + "'");
    std::lock_guard guard(entry->mutex);
    const auto& s = *entry->session;
    json out{{"session_id", id},
             {"dataset_id", entry->dataset_id},
             {"phase", phase_name(s.phase())},
             {"t", s.t()},
             {"T", s.config().T},
             {"B", s.config().B},
             {"pool_size", s.pool().size()},
             {"labeled_count", s.state().pool.labeled().size()},
             {"remaining", s.missing_labels().size()},
             {"weights", weights_to_json(s.state().weights)},
             {"config", config_to_json(s.config())},
             {"config_hash", config_hash(s.config())},
             {"created", entry->created},
             {"updated", entry->updated}};
    out["q"] = s.state().qtable ? json(s.state().qtable->q) : json(nullptr);
    return {200, out};
  }

  void bind(httplib::Server& server, const std::string& static_dir = {}) {
    auto reply = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    auto parse = [](const httplib::Request& req, json& out) {
      try {
        out = req.body.empty() ? json::object() : json::parse(req.body);
        return true;
      } catch (const json::parse_error&) {
        return false;
      }
    };
    auto bad_json = [](httplib::Response& res) {
      res.status = 400;
      res.set_content(json{{"error", "malformed JSON body"}}.dump(), "application/json");
    };
    server.Post("/datasets", [=, this](const httplib::Request& req, httplib::Response& res) {
      json body;
      if (!parse(req, body)) return bad_json(res);
      reply(res, register_dataset(body));
    });
    server.Post("/sessions", [=, this](const httplib::Request& req, httplib::Response& res) {
      json body;
      if (!parse(req, body)) return bad_json(res);
      reply(res, create_session(body));
    });
    server.Get(R"(/sessions/([^/]+)/display)", [=, this](const httplib::Request& req, httplib::Response& res) {
      reply(res, get_display(req.matches[1]));
    });
    server.Post(R"(/sessions/([^/]+)/labels)", [=, this](const httplib::Request& req, httplib::Response& res) {
      json body;
      if (!parse(req, body)) return bad_json(res);
      reply(res, submit_labels(req.matches[1], body));
    });
    server.Get(R"(/sessions/([^/]+)/metrics)", [=, this](const httplib::Request& req, httplib::Response& res) {
      reply(res, get_metrics(req.matches[1]));
    });
    server.Get(R"(/sessions/([^/]+)/state)", [=, this](const httplib::Request& req, httplib::Response& res) {
      reply(res, get_state(req.matches[1]));
    });
    if (!static_dir.empty()) server.set_mount_point("/", static_dir);
  }

 private:
  struct DatasetEntry {
    std::shared_ptr<const Dataset> pool;
    std::shared_ptr<const Dataset> test;
    std::map<std::string, json> payloads;
    json raw;
  };

  struct SessionEntry {
    std::string id;
    std::string dataset_id;
    std::shared_ptr<DatasetEntry> dataset;
    std::unique_ptr<Session> session;
    std::string created, updated;
    std::mutex mutex;
  };

  static Response error(int status, const std::string& message, const std::string& field = {}) {
    json body{{"error", message}};
    if (!field.empty()) body["field"] = field;
    return {status, body};
  }

  static Dataset dataset_part(const json& body, const std::string& key) {
    if (body.contains(key + "_csv")) {
      const auto& text = body[key + "_csv"];
      if (!text.is_string()) throw ConfigError(key + "_csv", "expected CSV text");
      std::istringstream in(text.get<std::string>());
      try {
        return parse_csv(in);
      } catch (const IngestError& e) {
        throw ConfigError(key + "_csv", e.what());
      }
    }
    if (!body.contains(key)) throw ConfigError(key, "missing");
    return dataset_from_json(body[key], key);
  }

  static std::string now_iso() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  static std::string new_token() {
    std::random_device rd;
    const std::uint64_t v = (std::uint64_t{rd()} << 32) ^ rd();
    return "s" + hex64(v);
  }

  std::shared_ptr<SessionEntry> find(const std::string& id) {
    std::shared_lock lock(registry_mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  json display_payload(const SessionEntry& entry) const {
    const auto& s = *entry.session;
    json items = json::array();
    for (auto i : s.pending_display()) {
      auto row = s.pool().features.row(i);
      json item{{"id", s.pool().ids[i]}, {"features", std::vector<double>(row.begin(), row.end())}};
      auto p = entry.dataset->payloads.find(s.pool().ids[i]);
      if (p != entry.dataset->payloads.end()) item["payload"] = p->second;
      if (auto it = s.state().pending_labels.find(i); it != s.state().pending_labels.end()) item["submitted"] = it->second;
      items.push_back(std::move(item));
    }
    return json{{"session_id", entry.id},
                {"phase", phase_name(s.phase())},
                {"t", s.t()},
                {"T", s.config().T},
                {"nc", s.pool().nc},
                {"items", items},
                {"remaining", s.missing_labels().size()},
                {"labeled_count", s.state().pool.labeled().size()},
                {"pool_size", s.pool().size()}};
  }

  static void write_atomically(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << text;
    }
    std::filesystem::rename(tmp, path);
  }

  void persist_dataset(const std::string& id, const DatasetEntry& entry) {
    if (state_dir_.empty()) return;
    write_atomically(state_dir_ / "datasets" / (id + ".json"), entry.raw.dump());
  }

  void persist_session(const SessionEntry& entry) {
    if (state_dir_.empty()) return;
    json snap{{"session_id", entry.id},
              {"dataset_id", entry.dataset_id},
              {"created", entry.created},
              {"updated", entry.updated},
              {"config", config_to_json(entry.session->config())},
              {"state", session_state_to_json(entry.session->state())}};
    write_atomically(state_dir_ / "sessions" / (entry.id + ".json"), snap.dump());
  }

  void restore() {
    for (const auto& f : std::filesystem::directory_iterator(state_dir_ / "datasets")) {
      if (f.path().extension() != ".json") continue;
      std::ifstream in(f.path());
      auto body = json::parse(in);
      register_restored(body);
    }
    for (const auto& f : std::filesystem::directory_iterator(state_dir_ / "sessions")) {
      if (f.path().extension() != ".json") continue;
      std::ifstream in(f.path());
      auto snap = json::parse(in);
      auto ds = datasets_.find(snap.at("dataset_id").get<std::string>());
      if (ds == datasets_.end()) continue;
      auto entry = std::make_shared<SessionEntry>();
      entry->id = snap.at("session_id").get<std::string>();
      entry->dataset_id = ds->first;
      entry->dataset = ds->second;
      entry->created = snap.at("created").get<std::string>();
      entry->updated = snap.at("updated").get<std::string>();
      entry->session = std::make_unique<Session>(config_from_json(snap.at("config")), ds->second->pool,
                                                 ds->second->test, session_state_from_json(snap.at("state")));
      sessions_[entry->id] = entry;
    }
  }

  static std::shared_ptr<DatasetEntry> build_entry(const json& body) {
    auto entry = std::make_shared<DatasetEntry>();
    entry->pool = std::make_shared<const Dataset>(dataset_part(body, "pool"));
    if (body.contains("test") || body.contains("test_csv")) {
      auto test = dataset_part(body, "test");
      if (!test.has_labels()) throw ConfigError("test", "evaluation split needs labels");
      if (test.dims() != entry->pool->dims()) throw ConfigError("test", "dimension differs from pool");
      entry->test = std::make_shared<const Dataset>(std::move(test));
    }
    if (body.contains("payloads")) {
      if (!body["payloads"].is_object()) throw ConfigError("payloads", "expected an object keyed by sample id");
      for (auto it = body["payloads"].begin(); it != body["payloads"].end(); ++it)
        entry->payloads[it.key()] = it.value();
    }
    return entry;
  }

  void register_restored(const json& body) {
    auto entry = build_entry(body);
    entry->raw = body;
    const auto id = body.at("dataset_id").get<std::string>();
    datasets_[id] = entry;
    if (id.size() > 1 && id[0] == 'd') {
      const auto n = std::strtoull(id.c_str() + 1, nullptr, 10);
      dataset_counter_ = std::max<std::uint64_t>(dataset_counter_, n);
    }
  }

  std::filesystem::path state_dir_;
  std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<DatasetEntry>> datasets_;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
  std::uint64_t dataset_counter_ = 0;
};

}  // namespace frugal
