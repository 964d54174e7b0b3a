#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "steval/evalset.hpp"
#include "steval/metrics.hpp"

namespace steval::da {

inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 100.0;

/// Segments chosen for annotation; identical for every system.
struct SamplePlan {
  evalset::Condition condition;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::vector<std::string> segment_ids;  // canonical (document, index) order
  bool operator==(const SamplePlan&) const = default;
};

/// Uniform sampling without replacement of min(k, N) segments. The draw is
/// a partial Fisher-Yates shuffle of the canonical segment list driven by
/// std::mt19937_64(seed), so plans are reproducible across platforms.
SamplePlan sample_segments(const evalset::TestSet& testset, std::size_t k, std::uint64_t seed);

struct AnnotationTask {
  std::string task_id;
  std::string annotator_id;
  std::string system_id;  // never shown to annotators
  std::string segment_id;
  std::string source_text;
  std::string hyp_text;
  std::optional<std::string> prev_hyp_text;  // absent at the start of a talk
  std::optional<std::string> next_hyp_text;  // absent at the end of a talk
  std::size_t presentation_index = 0;        // position in the annotator's queue
  bool operator==(const AnnotationTask&) const = default;
};

/// One task per (system, sampled segment), shuffled with `shuffle_seed` and
/// dealt round-robin to annotators. Each annotator's queue is then ordered
/// so the same segment never appears twice in a row when avoidable.
std::vector<AnnotationTask> build_tasks(const SamplePlan& plan, const evalset::TestSet& testset,
                                        std::span<const evalset::SystemOutput> systems,
                                        std::span<const std::string> annotators, std::uint64_t shuffle_seed);

struct DARecord {
  std::string annotator_id;
  std::string system_id;
  std::string segment_id;
  double raw_score = 0.0;
  std::string timestamp;
  bool operator==(const DARecord&) const = default;
};

struct Rejection {
  std::size_t line = 0;
  std::string reason;
};

struct IngestResult {
  std::vector<DARecord> accepted;
  std::vector<Rejection> rejected;
};

/// Validates score rows against issued tasks. Out-of-range scores, unknown
/// tasks and duplicates of (annotator, system, segment), including ones
/// already in `existing`, are rejected; the first occurrence is kept.
/// Columns (TSV, header row, any order): annotator_id, system_id, segment_id,
/// score, optional timestamp.
IngestResult ingest_da(const std::filesystem::path& records_path, std::span<const AnnotationTask> tasks,
                       std::span<const DARecord> existing = {});

/// Same checks for a single record; returns the rejection reason if any.
std::optional<std::string> check_record(const DARecord& record, std::span<const AnnotationTask> tasks,
                                        std::span<const DARecord> existing);

enum class Aggregation { RawMean, AnnotatorZ };
Aggregation parse_aggregation(std::string_view name);
std::string_view to_string(Aggregation mode);

struct AggregateResult {
  metrics::ScoreTable table;
  std::vector<std::string> warnings;
};

/// System-level DA. RawMean averages raw scores per system. AnnotatorZ first
/// standardizes each annotator's scores (zero-variance annotators contribute 0).
/// Systems in `expected_systems` without records are left out with a warning.
AggregateResult aggregate_system_da(std::span<const DARecord> records, Aggregation mode,
                                    const evalset::Condition& condition,
                                    std::span<const std::string> expected_systems = {});

/// WMT-style TSV: task, lang_pair, domain, system_id, doc_id, segment_id,
/// annotator_id, raw_score, timestamp; sorted by system, document, segment
/// index, annotator.
void export_wmt(std::span<const DARecord> records, const evalset::Condition& condition,
                const std::filesystem::path& path);

struct WmtImport {
  std::optional<evalset::Condition> condition;
  std::vector<DARecord> records;
};

/// Reads an export_wmt file; columns may appear in any order.
WmtImport import_wmt(const std::filesystem::path& path);

}  // namespace steval::da
