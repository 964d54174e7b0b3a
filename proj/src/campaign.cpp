#include "steval/campaign.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>

#include <httplib.h>
#include <json.hpp>

#include "steval/error.hpp"
#include "steval/util.hpp"

namespace steval::campaign {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kRecordsHeader = "annotator_id\tsystem_id\tsegment_id\tscore\ttimestamp";

json condition_json(const evalset::Condition& c) {
  return {{"task", std::string(evalset::to_string(c.task))},
          {"langs", c.langs.str()},
          {"domain", std::string(evalset::to_string(c.domain))}};
}

json optional_text(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

json task_json(const da::AnnotationTask& t) {
  return {{"task_id", t.task_id},
          {"annotator_id", t.annotator_id},
          {"system_id", t.system_id},
          {"segment_id", t.segment_id},
          {"source", t.source_text},
          {"hyp", t.hyp_text},
          {"prev", optional_text(t.prev_hyp_text)},
          {"next", optional_text(t.next_hyp_text)},
          {"presentation_index", t.presentation_index}};
}

da::AnnotationTask task_from_json(const json& j) {
  da::AnnotationTask t;
  t.task_id = j.at("task_id").get<std::string>();
  t.annotator_id = j.at("annotator_id").get<std::string>();
  t.system_id = j.at("system_id").get<std::string>();
  t.segment_id = j.at("segment_id").get<std::string>();
  t.source_text = j.at("source").get<std::string>();
  t.hyp_text = j.at("hyp").get<std::string>();
  if (!j.at("prev").is_null()) t.prev_hyp_text = j.at("prev").get<std::string>();
  if (!j.at("next").is_null()) t.next_hyp_text = j.at("next").get<std::string>();
  t.presentation_index = j.at("presentation_index").get<std::size_t>();
  return t;
}

std::string record_line(const da::DARecord& r) {
  return r.annotator_id + "\t" + r.system_id + "\t" + r.segment_id + "\t" + util::format_double(r.raw_score) + "\t" +
         r.timestamp + "\n";
}

}  // namespace

std::unique_ptr<Campaign> Campaign::build(const evalset::TestSet& testset, const CampaignConfig& config,
                                          const fs::path& dir) {
  if (fs::exists(dir / "campaign.json")) throw ValidationError(dir.string() + " already holds a campaign");
  std::vector<evalset::SystemOutput> systems;
  if (config.systems.empty()) {
    for (const auto& [id, sys] : testset.systems) systems.push_back(sys);
  } else {
    for (const auto& id : config.systems) {
      auto it = testset.systems.find(id);
      if (it == testset.systems.end()) throw ValidationError("system '" + id + "' is not registered in the test set");
      systems.push_back(it->second);
    }
  }

  std::unique_ptr<Campaign> c(new Campaign());
  c->dir_ = dir;
  c->config_ = config;
  c->plan_ = da::sample_segments(testset, config.k, config.seed);
  c->tasks_ = da::build_tasks(c->plan_, testset, systems, config.annotators, config.shuffle_seed);
  if (c->config_.systems.empty()) {
    for (const auto& s : systems) c->config_.systems.push_back(s.system_id);
  }
  for (std::size_t i = 0; i < c->tasks_.size(); ++i) c->task_index_[c->tasks_[i].task_id] = i;

  json manifest;
  manifest["condition"] = condition_json(testset.condition);
  manifest["testset"] = config.testset;
  manifest["k"] = config.k;
  manifest["seed"] = config.seed;
  manifest["shuffle_seed"] = config.shuffle_seed;
  manifest["annotators"] = config.annotators;
  manifest["systems"] = c->config_.systems;
  manifest["segment_ids"] = c->plan_.segment_ids;
  manifest["task_count"] = c->tasks_.size();
  json per_annotator = json::object();
  for (const auto& [a, p] : c->progress()) per_annotator[a] = p.total;
  manifest["tasks_per_annotator"] = per_annotator;

  fs::create_directories(dir);
  util::write_file(dir / "campaign.json", manifest.dump(2) + "\n");
  std::string tasks;
  for (const auto& t : c->tasks_) tasks += task_json(t).dump() + "\n";
  util::write_file(dir / "tasks.jsonl", tasks);
  util::write_file(dir / "records.tsv", std::string(kRecordsHeader) + "\n");
  return c;
}

std::unique_ptr<Campaign> Campaign::load(const fs::path& dir) {
  if (!fs::exists(dir / "campaign.json")) throw ValidationError(dir.string() + " is not a campaign directory");
  std::unique_ptr<Campaign> c(new Campaign());
  c->dir_ = dir;
  try {
    json manifest = json::parse(util::read_file(dir / "campaign.json"));
    const json& cond = manifest.at("condition");
    c->plan_.condition = evalset::make_condition(cond.at("task").get<std::string>(), cond.at("langs").get<std::string>(),
                                                 cond.at("domain").get<std::string>());
    c->config_.testset = manifest.at("testset").get<std::string>();
    c->config_.k = manifest.at("k").get<std::size_t>();
    c->config_.seed = manifest.at("seed").get<std::uint64_t>();
    c->config_.shuffle_seed = manifest.at("shuffle_seed").get<std::uint64_t>();
    c->config_.annotators = manifest.at("annotators").get<std::vector<std::string>>();
    c->config_.systems = manifest.at("systems").get<std::vector<std::string>>();
    c->plan_.seed = c->config_.seed;
    c->plan_.k = c->config_.k;
    c->plan_.segment_ids = manifest.at("segment_ids").get<std::vector<std::string>>();
    for (const auto& line : util::read_lines(dir / "tasks.jsonl")) {
      if (!line.empty()) c->tasks_.push_back(task_from_json(json::parse(line)));
    }
    if (c->tasks_.size() != manifest.at("task_count").get<std::size_t>()) {
      throw ValidationError("task count differs from campaign.json");
    }
  } catch (const json::exception& e) {
    throw ValidationError(dir.string() + ": corrupt campaign: " + e.what());
  }
  for (std::size_t i = 0; i < c->tasks_.size(); ++i) c->task_index_[c->tasks_[i].task_id] = i;

  da::IngestResult log = da::ingest_da(dir / "records.tsv", c->tasks_);
  if (!log.rejected.empty()) {
    throw ValidationError((dir / "records.tsv").string() + ":" + std::to_string(log.rejected.front().line) +
                          ": corrupt record log: " + log.rejected.front().reason);
  }
  c->records_ = std::move(log.accepted);
  return c;
}

std::vector<da::DARecord> Campaign::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

const da::AnnotationTask* Campaign::find_task(std::string_view task_id) const {
  auto it = task_index_.find(std::string(task_id));
  return it == task_index_.end() ? nullptr : &tasks_[it->second];
}

bool Campaign::has_annotator(std::string_view annotator_id) const {
  for (const auto& a : config_.annotators) {
    if (a == annotator_id) return true;
  }
  return false;
}

std::optional<da::AnnotationTask> Campaign::next_task(std::string_view annotator_id) const {
  std::set<std::pair<std::string, std::string>> scored;
  {
    std::lock_guard lock(mutex_);
    for (const auto& r : records_) {
      if (r.annotator_id == annotator_id) scored.insert({r.system_id, r.segment_id});
    }
  }
  const da::AnnotationTask* best = nullptr;
  for (const auto& t : tasks_) {
    if (t.annotator_id != annotator_id || scored.count({t.system_id, t.segment_id})) continue;
    if (!best || t.presentation_index < best->presentation_index) best = &t;
  }
  if (!best) return std::nullopt;
  return *best;
}

std::map<std::string, Progress> Campaign::progress() const {
  std::map<std::string, Progress> out;
  for (const auto& a : config_.annotators) out[a];
  for (const auto& t : tasks_) ++out[t.annotator_id].total;
  std::lock_guard lock(mutex_);
  for (const auto& r : records_) ++out[r.annotator_id].done;
  return out;
}

void Campaign::append_locked(const da::DARecord& record) {
  std::ofstream out(dir_ / "records.tsv", std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + (dir_ / "records.tsv").string());
  out << record_line(record);
  out.flush();
  if (!out) throw IoError("write failed for " + (dir_ / "records.tsv").string());
  records_.push_back(record);
}

Campaign::AddResult Campaign::add_score(std::string_view task_id, std::string_view annotator_id, double score,
                                        std::string timestamp) {
  const da::AnnotationTask* task = find_task(task_id);
  if (!task) return {AddStatus::Invalid, "unknown task_id '" + std::string(task_id) + "'"};
  if (task->annotator_id != annotator_id) {
    return {AddStatus::Invalid, "task '" + std::string(task_id) + "' is not assigned to '" + std::string(annotator_id) + "'"};
  }
  da::DARecord rec{task->annotator_id, task->system_id, task->segment_id, score, std::move(timestamp)};
  std::lock_guard lock(mutex_);
  if (auto reason = da::check_record(rec, std::span(task, 1), records_)) {
    bool duplicate = reason->starts_with("duplicate");
    return {duplicate ? AddStatus::Duplicate : AddStatus::Invalid, *reason};
  }
  append_locked(rec);
  return {AddStatus::Accepted, ""};
}

da::IngestResult Campaign::ingest(const fs::path& scores) {
  std::lock_guard lock(mutex_);
  da::IngestResult result = da::ingest_da(scores, tasks_, records_);
  for (const auto& r : result.accepted) append_locked(r);
  return result;
}

std::string task_payload(const Campaign& campaign, const da::AnnotationTask& task) {
  Progress p = campaign.progress()[task.annotator_id];
  json j = {{"task_id", task.task_id},
            {"source", task.source_text},
            {"hyp", task.hyp_text},
            {"prev", optional_text(task.prev_hyp_text)},
            {"next", optional_text(task.next_hyp_text)},
            {"slider", {{"min", da::kMinScore}, {"max", da::kMaxScore}}},
            {"instructions", std::string(kAnnotatorInstructions)},
            {"progress", {{"done", p.done}, {"total", p.total}}}};
  return j.dump();
}

namespace {

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void json_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

struct CampaignServer::Impl {
  Campaign& campaign;
  httplib::Server server;
  std::mutex state;
  bool listening = false;
  bool stopped = false;
  explicit Impl(Campaign& c) : campaign(c) {}
};

CampaignServer::CampaignServer(Campaign& campaign, std::optional<fs::path> static_dir)
    : impl_(std::make_unique<Impl>(campaign)) {
  auto& srv = impl_->server;
  Campaign& c = campaign;
  // SO_REUSEADDR only: the library default of SO_REUSEPORT would let a second
  // server share the port instead of failing.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  srv.Get("/api/tasks/next", [&c](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("annotator")) return json_error(res, 400, "missing 'annotator' query parameter");
    const std::string annotator = req.get_param_value("annotator");
    if (!c.has_annotator(annotator)) return json_error(res, 404, "unknown annotator '" + annotator + "'");
    auto task = c.next_task(annotator);
    if (!task) {
      res.status = 204;
      return;
    }
    res.status = 200;
    res.set_content(task_payload(c, *task), "application/json");
  });

  srv.Post("/api/scores", [&c](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      return json_error(res, 400, "body is not JSON");
    }
    if (!body.is_object() || !body.contains("task_id") || !body["task_id"].is_string() ||
        !body.contains("annotator_id") || !body["annotator_id"].is_string()) {
      return json_error(res, 422, "body needs string fields task_id and annotator_id");
    }
    if (!body.contains("score") || !body["score"].is_number()) return json_error(res, 422, "score must be a number");
    const double score = body["score"].get<double>();
    auto result = c.add_score(body["task_id"].get<std::string>(), body["annotator_id"].get<std::string>(), score,
                              utc_timestamp());
    switch (result.status) {
      case Campaign::AddStatus::Accepted:
        res.status = 201;
        res.set_content(json{{"status", "recorded"}}.dump(), "application/json");
        return;
      case Campaign::AddStatus::Duplicate:
        return json_error(res, 409, result.message);
      case Campaign::AddStatus::Invalid:
        return json_error(res, 422, result.message);
    }
  });

  srv.Get("/api/progress", [&c](const httplib::Request&, httplib::Response& res) {
    json out = json::object();
    for (const auto& [a, p] : c.progress()) out[a] = {{"done", p.done}, {"total", p.total}};
    res.set_content(out.dump(), "application/json");
  });

  if (static_dir) srv.set_mount_point("/", static_dir->string());
}

CampaignServer::~CampaignServer() { stop(); }

int CampaignServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  return bound;
}

void CampaignServer::listen() {
  {
    std::lock_guard lock(impl_->state);
    if (impl_->stopped) return;
    impl_->listening = true;
  }
  impl_->server.listen_after_bind();
}

// Safe from any thread, before or after listen() has started, and idempotent.
void CampaignServer::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->state);
    if (impl_->stopped) return;
    impl_->stopped = true;
    if (!impl_->listening) return;
  }
  impl_->server.wait_until_ready();
  impl_->server.stop();
}

}  // namespace steval::campaign
