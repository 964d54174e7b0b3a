#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "steval/da.hpp"
#include "steval/evalset.hpp"

namespace steval::campaign {

/// Instructions shown with every task.
inline constexpr std::string_view kAnnotatorInstructions =
    "Sentence boundary errors are expected and should not be factored in when judging translation quality. "
    "This is when the translation appears to be missing or adding extra words but the source was segmented at a "
    "different place. To this end, we have included the translations for the previous and next sentences also. "
    "If the source and translation are only different because of sentence boundary issues, do not let this affect "
    "your scoring judgment.";

struct CampaignConfig {
  std::string testset;  // manifest path as given; recorded for reproducibility
  std::size_t k = 1000;
  std::uint64_t seed = 0;
  std::uint64_t shuffle_seed = 0;
  std::vector<std::string> annotators;
  std::vector<std::string> systems;  // empty: every registered system
};

struct Progress {
  std::size_t done = 0;
  std::size_t total = 0;
};

/// A DA campaign on disk: campaign.json (plan and seeds), tasks.jsonl, and
/// the append-only records.tsv log. Records are written by one writer at a
/// time; task data never changes after build.
class Campaign {
 public:
  /// Samples, builds tasks for the resegmented systems and writes the campaign directory.
  static std::unique_ptr<Campaign> build(const evalset::TestSet& testset, const CampaignConfig& config,
                                         const std::filesystem::path& dir);
  static std::unique_ptr<Campaign> load(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const CampaignConfig& config() const { return config_; }
  const da::SamplePlan& plan() const { return plan_; }
  const std::vector<da::AnnotationTask>& tasks() const { return tasks_; }
  std::vector<da::DARecord> records() const;

  const da::AnnotationTask* find_task(std::string_view task_id) const;
  bool has_annotator(std::string_view annotator_id) const;
  /// Next unscored task in the annotator's presentation order.
  std::optional<da::AnnotationTask> next_task(std::string_view annotator_id) const;
  std::map<std::string, Progress> progress() const;

  enum class AddStatus { Accepted, Invalid, Duplicate };
  struct AddResult {
    AddStatus status;
    std::string message;
  };
  /// Validates and appends one score for `task_id`.
  AddResult add_score(std::string_view task_id, std::string_view annotator_id, double score, std::string timestamp);

  /// Validates a score file and appends the accepted rows.
  da::IngestResult ingest(const std::filesystem::path& scores);

  Campaign(const Campaign&) = delete;
  Campaign& operator=(const Campaign&) = delete;

 private:
  Campaign() = default;
  void append_locked(const da::DARecord& record);

  std::filesystem::path dir_;
  CampaignConfig config_;
  da::SamplePlan plan_;
  std::vector<da::AnnotationTask> tasks_;
  std::map<std::string, std::size_t> task_index_;
  mutable std::mutex mutex_;
  std::vector<da::DARecord> records_;
};

/// JSON task payload served to annotators; carries no system identity.
std::string task_payload(const Campaign& campaign, const da::AnnotationTask& task);

/// HTTP API over a campaign:
///   GET  /api/tasks/next?annotator=ID   200 task | 204 done
///   POST /api/scores {task_id, annotator_id, score}   201 | 409 duplicate | 422 invalid
///   GET  /api/progress
class CampaignServer {
 public:
  explicit CampaignServer(Campaign& campaign, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~CampaignServer();

  /// Binds; port 0 picks a free port. Returns the bound port. Throws IoError.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace steval::campaign
