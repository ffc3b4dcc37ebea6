#include "slamhive/store.hpp"

#include <sqlite3.h>

#include "slamhive/config_json.hpp"

namespace slamhive::store {

using nlohmann::json;

namespace {

class Statement {
 public:
  Statement(sqlite3* db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr) != SQLITE_OK)
      throw Error(Errc::StorageFailure, std::string(sqlite3_errmsg(db)) + " in: " + sql);
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int index, std::int64_t value) {
    sqlite3_bind_int64(stmt_, index, value);
    return *this;
  }
  Statement& bind(int index, double value) {
    sqlite3_bind_double(stmt_, index, value);
    return *this;
  }
  Statement& bind(int index, const std::string& value) {
    sqlite3_bind_text(stmt_, index, value.c_str(), static_cast<int>(value.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Statement& bind_null(int index) {
    sqlite3_bind_null(stmt_, index);
    return *this;
  }

  /// true while rows remain
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    if (rc == SQLITE_CONSTRAINT) throw Error(Errc::BadRequest, sqlite3_errmsg(db_));
    throw Error(Errc::StorageFailure, sqlite3_errmsg(db_));
  }

  std::int64_t integer(int column) const { return sqlite3_column_int64(stmt_, column); }
  std::string text(int column) const {
    const auto* p = sqlite3_column_text(stmt_, column);
    return p ? std::string(reinterpret_cast<const char*>(p), sqlite3_column_bytes(stmt_, column)) : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { run("BEGIN IMMEDIATE"); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    run("COMMIT");
    done_ = true;
  }

 private:
  void run(const char* sql) {
    char* message = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &message) != SQLITE_OK) {
      std::string text = message ? message : "unknown";
      sqlite3_free(message);
      throw Error(Errc::StorageFailure, text);
    }
  }
  sqlite3* db_;
  bool done_ = false;
};

const char* kSchema = R"sql(
PRAGMA foreign_keys = ON;
CREATE TABLE IF NOT EXISTS algorithms (id INTEGER PRIMARY KEY, body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS datasets (id INTEGER PRIMARY KEY, body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS combinations (id INTEGER PRIMARY KEY, body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS configurations (
  id INTEGER PRIMARY KEY,
  algorithm_id INTEGER NOT NULL REFERENCES algorithms(id),
  dataset_id INTEGER NOT NULL REFERENCES datasets(id),
  comb_parent INTEGER REFERENCES combinations(id),
  body TEXT NOT NULL);
CREATE INDEX IF NOT EXISTS configurations_comb ON configurations(comb_parent);
CREATE TABLE IF NOT EXISTS runs (
  id INTEGER PRIMARY KEY,
  config_id INTEGER NOT NULL REFERENCES configurations(id),
  status TEXT NOT NULL,
  ingested INTEGER NOT NULL DEFAULT 0,
  body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS evaluations (
  run_id INTEGER PRIMARY KEY REFERENCES runs(id),
  body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS reports (
  token TEXT PRIMARY KEY,
  listed INTEGER NOT NULL,
  created_at REAL NOT NULL,
  body TEXT NOT NULL);
)sql";

template <typename T>
std::vector<T> load_all(sqlite3* db, const std::string& sql) {
  std::vector<T> out;
  Statement st(db, sql);
  while (st.step()) out.push_back(json::parse(st.text(0)).get<T>());
  return out;
}

template <typename T>
T load_one(sqlite3* db, const std::string& sql, std::int64_t id, const std::string& what) {
  Statement st(db, sql);
  st.bind(1, id);
  if (!st.step()) throw Error(Errc::NotFound, what + " " + std::to_string(id) + " does not exist");
  return json::parse(st.text(0)).get<T>();
}

}  // namespace

}  // namespace slamhive::store

namespace slamhive::trajeval {

void to_json(nlohmann::json& j, const MetricStats& s) {
  j = {{"rmse", s.rmse}, {"mean", s.mean}, {"median", s.median}, {"std", s.std},
       {"min", s.min},   {"max", s.max},   {"sse", s.sse},       {"n", s.n}};
}

void from_json(const nlohmann::json& j, MetricStats& s) {
  s.rmse = j.at("rmse");
  s.mean = j.at("mean");
  s.median = j.at("median");
  s.std = j.at("std");
  s.min = j.at("min");
  s.max = j.at("max");
  s.sse = j.at("sse");
  s.n = j.at("n");
}

}  // namespace slamhive::trajeval

namespace slamhive::store {

void to_json(json& j, const RunRecord& r) {
  j = {{"id", r.id},
       {"config_id", r.config_id},
       {"node_id", r.node_id},
       {"cpu_type", r.cpu_type},
       {"core_count", r.core_count},
       {"status", executor::to_string(r.status)},
       {"reason", r.reason},
       {"cpu_mean", r.cpu_mean},
       {"cpu_max", r.cpu_max},
       {"ram_max", r.ram_max},
       {"traj_length", r.traj_length ? json(*r.traj_length) : json(nullptr)},
       {"started_at", r.started_at},
       {"finished_at", r.finished_at},
       {"time_scale", r.time_scale},
       {"ingested", r.ingested},
       {"map_artifact", r.map_artifact}};
}

void from_json(const json& j, RunRecord& r) {
  r.id = j.at("id");
  r.config_id = j.at("config_id");
  r.node_id = j.value("node_id", "");
  r.cpu_type = j.value("cpu_type", "");
  r.core_count = j.value("core_count", 0);
  r.status = executor::parse_run_state(j.at("status").get<std::string>());
  r.reason = j.value("reason", "");
  r.cpu_mean = j.value("cpu_mean", 0.0);
  r.cpu_max = j.value("cpu_max", 0.0);
  r.ram_max = j.value("ram_max", 0.0);
  r.traj_length.reset();
  if (j.contains("traj_length") && !j["traj_length"].is_null()) r.traj_length = j["traj_length"].get<double>();
  r.started_at = j.value("started_at", 0.0);
  r.finished_at = j.value("finished_at", 0.0);
  r.time_scale = j.value("time_scale", 1.0);
  r.ingested = j.value("ingested", false);
  r.map_artifact = j.value("map_artifact", "");
}

void to_json(json& j, const EvaluationRecord& e) {
  j = {{"run_id", e.run_id},
       {"ate", e.ate},
       {"rpe", e.rpe},
       {"aligned", e.aligned},
       {"with_scale", e.with_scale},
       {"rpe_delta", e.rpe_delta},
       {"max_time_diff", e.max_time_diff},
       {"evaluator_version", e.evaluator_version},
       {"evaluated_at", e.evaluated_at}};
}

void from_json(const json& j, EvaluationRecord& e) {
  e.run_id = j.at("run_id");
  e.ate = j.at("ate").get<trajeval::MetricStats>();
  e.rpe = j.at("rpe").get<trajeval::MetricStats>();
  e.aligned = j.value("aligned", true);
  e.with_scale = j.value("with_scale", false);
  e.rpe_delta = j.value("rpe_delta", 1.0);
  e.max_time_diff = j.value("max_time_diff", trajeval::kDefaultMaxTimeDiff);
  e.evaluator_version = j.value("evaluator_version", "");
  e.evaluated_at = j.value("evaluated_at", 0.0);
}

Store::Store(const fs::path& database) {
  if (database != ":memory:" && database.has_parent_path()) fs::create_directories(database.parent_path());
  if (sqlite3_open(database.c_str(), &db_) != SQLITE_OK) {
    const std::string message = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw Error(Errc::StorageFailure, "cannot open " + database.string() + ": " + message);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec(kSchema);
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const std::string& sql) const {
  char* message = nullptr;
  if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &message) != SQLITE_OK) {
    std::string text = message ? message : "unknown";
    sqlite3_free(message);
    throw Error(Errc::StorageFailure, text);
  }
}

Id Store::next_id(const char* table) const {
  Statement st(db_, std::string("SELECT COALESCE(MAX(id), 0) + 1 FROM ") + table);
  st.step();
  return st.integer(0);
}

Id Store::add_algorithm(config::AlgorithmSpec spec) {
  std::lock_guard lock(mutex_);
  if (spec.name.empty()) throw Error(Errc::BadRequest, "algorithm name is empty");
  Transaction tx(db_);
  if (spec.id == 0) spec.id = next_id("algorithms");
  Statement st(db_, "INSERT INTO algorithms (id, body) VALUES (?, ?)");
  st.bind(1, spec.id).bind(2, json(spec).dump());
  st.step();
  tx.commit();
  return spec.id;
}

config::AlgorithmSpec Store::algorithm(Id id) const {
  std::lock_guard lock(mutex_);
  return load_one<config::AlgorithmSpec>(db_, "SELECT body FROM algorithms WHERE id = ?", id, "algorithm");
}

std::vector<config::AlgorithmSpec> Store::algorithms() const {
  std::lock_guard lock(mutex_);
  return load_all<config::AlgorithmSpec>(db_, "SELECT body FROM algorithms ORDER BY id");
}

Id Store::add_dataset(config::DatasetSpec spec) {
  std::lock_guard lock(mutex_);
  if (spec.name.empty()) throw Error(Errc::BadRequest, "dataset name is empty");
  Transaction tx(db_);
  if (spec.id == 0) spec.id = next_id("datasets");
  Statement st(db_, "INSERT INTO datasets (id, body) VALUES (?, ?)");
  st.bind(1, spec.id).bind(2, json(spec).dump());
  st.step();
  tx.commit();
  return spec.id;
}

config::DatasetSpec Store::dataset(Id id) const {
  std::lock_guard lock(mutex_);
  return load_one<config::DatasetSpec>(db_, "SELECT body FROM datasets WHERE id = ?", id, "dataset");
}

std::vector<config::DatasetSpec> Store::datasets() const {
  std::lock_guard lock(mutex_);
  return load_all<config::DatasetSpec>(db_, "SELECT body FROM datasets ORDER BY id");
}

config::Catalog Store::catalog() const {
  std::lock_guard lock(mutex_);
  config::Catalog catalog;
  for (auto& a : algorithms()) catalog.algorithms[a.id] = std::move(a);
  for (auto& d : datasets()) catalog.datasets[d.id] = std::move(d);
  return catalog;
}

Id Store::add_configuration(config::MappingConfiguration config) {
  std::lock_guard lock(mutex_);
  config::validate(config, catalog());
  Transaction tx(db_);
  if (config.id == 0) config.id = next_id("configurations");
  Statement st(db_,
               "INSERT INTO configurations (id, algorithm_id, dataset_id, comb_parent, body) VALUES (?, ?, ?, ?, ?)");
  st.bind(1, config.id).bind(2, config.algorithm_id).bind(3, config.dataset_id);
  if (config.comb_parent)
    st.bind(4, *config.comb_parent);
  else
    st.bind_null(4);
  st.bind(5, json(config).dump());
  st.step();
  tx.commit();
  return config.id;
}

config::MappingConfiguration Store::configuration(Id id) const {
  std::lock_guard lock(mutex_);
  return load_one<config::MappingConfiguration>(db_, "SELECT body FROM configurations WHERE id = ?", id,
                                                "configuration");
}

std::vector<config::MappingConfiguration> Store::configurations() const {
  std::lock_guard lock(mutex_);
  return load_all<config::MappingConfiguration>(db_, "SELECT body FROM configurations ORDER BY id");
}

CombinationResult Store::add_combination(config::CombinationSpec spec, std::size_t cap) {
  std::lock_guard lock(mutex_);
  const auto cat = catalog();
  Transaction tx(db_);
  if (spec.id == 0) spec.id = next_id("combinations");
  auto children = config::expand_combinations(spec, cap);
  for (const auto& child : children) config::validate(child, cat);

  Statement insert_spec(db_, "INSERT INTO combinations (id, body) VALUES (?, ?)");
  insert_spec.bind(1, spec.id).bind(2, json(spec).dump());
  insert_spec.step();

  CombinationResult result;
  result.id = spec.id;
  Id next = next_id("configurations");
  for (auto& child : children) {
    child.id = next++;
    Statement st(db_,
                 "INSERT INTO configurations (id, algorithm_id, dataset_id, comb_parent, body) VALUES (?, ?, ?, ?, ?)");
    st.bind(1, child.id).bind(2, child.algorithm_id).bind(3, child.dataset_id).bind(4, spec.id);
    st.bind(5, json(child).dump());
    st.step();
    result.configuration_ids.push_back(child.id);
  }
  tx.commit();
  return result;
}

config::CombinationSpec Store::combination(Id id) const {
  std::lock_guard lock(mutex_);
  return load_one<config::CombinationSpec>(db_, "SELECT body FROM combinations WHERE id = ?", id, "combination");
}

std::vector<config::CombinationSpec> Store::combinations() const {
  std::lock_guard lock(mutex_);
  return load_all<config::CombinationSpec>(db_, "SELECT body FROM combinations ORDER BY id");
}

std::vector<Id> Store::combination_children(Id id) const {
  std::lock_guard lock(mutex_);
  combination(id);
  Statement st(db_, "SELECT id FROM configurations WHERE comb_parent = ? ORDER BY id");
  st.bind(1, id);
  std::vector<Id> out;
  while (st.step()) out.push_back(st.integer(0));
  return out;
}

RunRecord Store::create_run(Id config_id, const std::string& node_id) {
  std::lock_guard lock(mutex_);
  configuration(config_id);
  Transaction tx(db_);
  RunRecord record;
  record.id = next_id("runs");
  record.config_id = config_id;
  record.node_id = node_id;
  Statement st(db_, "INSERT INTO runs (id, config_id, status, ingested, body) VALUES (?, ?, ?, 0, ?)");
  st.bind(1, record.id).bind(2, config_id).bind(3, std::string(executor::to_string(record.status)));
  st.bind(4, json(record).dump());
  st.step();
  tx.commit();
  return record;
}

RunRecord Store::run(Id id) const {
  std::lock_guard lock(mutex_);
  return load_one<RunRecord>(db_, "SELECT body FROM runs WHERE id = ?", id, "run");
}

std::vector<RunRecord> Store::runs() const {
  std::lock_guard lock(mutex_);
  return load_all<RunRecord>(db_, "SELECT body FROM runs ORDER BY id");
}

void Store::update_run(const RunRecord& record) {
  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  Statement st(db_, "UPDATE runs SET status = ?, ingested = ?, body = ? WHERE id = ?");
  st.bind(1, std::string(executor::to_string(record.status)))
      .bind(2, std::int64_t{record.ingested})
      .bind(3, json(record).dump())
      .bind(4, record.id);
  st.step();
  if (sqlite3_changes(db_) == 0) throw Error(Errc::NotFound, "run " + std::to_string(record.id) + " does not exist");
  tx.commit();
}

bool Store::commit_ingest(const RunRecord& record) {
  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  {
    Statement check(db_, "SELECT ingested FROM runs WHERE id = ?");
    check.bind(1, record.id);
    if (check.step()) {
      if (check.integer(0) != 0) return false;
      Statement st(db_, "UPDATE runs SET status = ?, ingested = 1, config_id = ?, body = ? WHERE id = ?");
      auto stored = record;
      stored.ingested = true;
      st.bind(1, std::string(executor::to_string(stored.status)))
          .bind(2, stored.config_id)
          .bind(3, json(stored).dump())
          .bind(4, stored.id);
      st.step();
    } else {
      auto stored = record;
      stored.ingested = true;
      Statement st(db_, "INSERT INTO runs (id, config_id, status, ingested, body) VALUES (?, ?, ?, 1, ?)");
      st.bind(1, stored.id).bind(2, stored.config_id).bind(3, std::string(executor::to_string(stored.status)));
      st.bind(4, json(stored).dump());
      st.step();
    }
  }
  tx.commit();
  return true;
}

void Store::put_evaluation(const EvaluationRecord& record, bool replace) {
  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  {
    Statement check(db_, "SELECT status FROM runs WHERE id = ?");
    check.bind(1, record.run_id);
    if (!check.step()) throw Error(Errc::NotFound, "run " + std::to_string(record.run_id) + " does not exist");
    if (check.text(0) != executor::to_string(executor::RunState::finished))
      throw Error(Errc::RunNotFinished, "run " + std::to_string(record.run_id) + " is " + check.text(0));
  }
  if (!replace) {
    Statement existing(db_, "SELECT 1 FROM evaluations WHERE run_id = ?");
    existing.bind(1, record.run_id);
    if (existing.step())
      throw Error(Errc::AlreadyEvaluated, "run " + std::to_string(record.run_id) + " already has an evaluation");
  }
  Statement st(db_, "INSERT OR REPLACE INTO evaluations (run_id, body) VALUES (?, ?)");
  st.bind(1, record.run_id).bind(2, json(record).dump());
  st.step();
  tx.commit();
}

std::optional<EvaluationRecord> Store::evaluation(Id run_id) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT body FROM evaluations WHERE run_id = ?");
  st.bind(1, run_id);
  if (!st.step()) return std::nullopt;
  return json::parse(st.text(0)).get<EvaluationRecord>();
}

std::vector<EvaluationRecord> Store::evaluations() const {
  std::lock_guard lock(mutex_);
  return load_all<EvaluationRecord>(db_, "SELECT body FROM evaluations ORDER BY run_id");
}

void Store::add_report(const StoredReport& report) {
  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  json body = {{"token", report.token},
               {"group_name", report.group_name},
               {"created_at", report.created_at},
               {"listed", report.listed},
               {"body", report.body}};
  // INSERT without REPLACE: an existing token is never overwritten
  Statement st(db_, "INSERT INTO reports (token, listed, created_at, body) VALUES (?, ?, ?, ?)");
  st.bind(1, report.token).bind(2, std::int64_t{report.listed}).bind(3, report.created_at).bind(4, body.dump());
  st.step();
  tx.commit();
}

namespace {
StoredReport report_from(const std::string& text) {
  const auto j = json::parse(text);
  StoredReport r;
  r.token = j.at("token");
  r.group_name = j.value("group_name", "");
  r.created_at = j.value("created_at", 0.0);
  r.listed = j.value("listed", true);
  r.body = j.at("body");
  return r;
}
}  // namespace

StoredReport Store::report(const std::string& token) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT body FROM reports WHERE token = ?");
  st.bind(1, token);
  if (!st.step()) throw Error(Errc::NotFound, "no report " + token);
  return report_from(st.text(0));
}

std::vector<StoredReport> Store::reports(bool listed_only) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, listed_only ? "SELECT body FROM reports WHERE listed = 1 ORDER BY created_at, token"
                                : "SELECT body FROM reports ORDER BY created_at, token");
  std::vector<StoredReport> out;
  while (st.step()) out.push_back(report_from(st.text(0)));
  return out;
}

Snapshot Store::snapshot() const {
  std::lock_guard lock(mutex_);
  Snapshot snap;
  snap.catalog = catalog();
  for (auto& c : configurations()) snap.configurations[c.id] = std::move(c);
  for (auto& r : runs()) snap.runs[r.id] = std::move(r);
  for (auto& e : evaluations()) snap.evaluations[e.run_id] = std::move(e);
  return snap;
}

std::string Store::dump() const {
  std::lock_guard lock(mutex_);
  json out = json::object();
  for (const char* table : {"algorithms", "datasets", "combinations", "configurations", "runs"}) {
    json rows = json::array();
    Statement st(db_, std::string("SELECT body FROM ") + table + " ORDER BY id");
    while (st.step()) rows.push_back(json::parse(st.text(0)));
    out[table] = rows;
  }
  {
    json rows = json::array();
    Statement st(db_, "SELECT body FROM evaluations ORDER BY run_id");
    while (st.step()) rows.push_back(json::parse(st.text(0)));
    out["evaluations"] = rows;
  }
  {
    json rows = json::array();
    Statement st(db_, "SELECT body FROM reports ORDER BY token");
    while (st.step()) rows.push_back(json::parse(st.text(0)));
    out["reports"] = rows;
  }
  return out.dump(1);
}

}  // namespace slamhive::store
