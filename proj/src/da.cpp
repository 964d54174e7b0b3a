#include "steval/da.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "steval/error.hpp"
#include "steval/util.hpp"

namespace steval::da {

SamplePlan sample_segments(const evalset::TestSet& testset, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ValidationError("sample size k must be positive");
  SamplePlan plan;
  plan.condition = testset.condition;
  plan.seed = seed;
  plan.k = k;
  std::vector<std::string> all = testset.segment_ids();
  if (k >= all.size()) {
    plan.segment_ids = std::move(all);
    return plan;
  }
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(util::uniform_below(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) plan.segment_ids.push_back(all[i]);
  return plan;
}

namespace {

// Orders one annotator's queue so no segment follows itself. Takes the
// earliest task whose segment differs from the previous one, unless some
// segment is so frequent that it must be placed now to stay feasible.
std::vector<AnnotationTask> separate_repeats(std::vector<AnnotationTask> queue) {
  std::vector<AnnotationTask> out;
  out.reserve(queue.size());
  std::vector<bool> used(queue.size(), false);
  std::map<std::string, std::size_t> remaining;
  for (const auto& t : queue) ++remaining[t.segment_id];
  for (std::size_t left = queue.size(); left > 0; --left) {
    const std::string* last = out.empty() ? nullptr : &out.back().segment_id;
    std::size_t pick = queue.size();
    // most frequent remaining segment, first occurrence wins ties
    std::size_t best_count = 0;
    std::size_t best_pos = queue.size();
    for (std::size_t i = 0; i < queue.size(); ++i) {
      if (used[i]) continue;
      std::size_t c = remaining[queue[i].segment_id];
      if (c > best_count) {
        best_count = c;
        best_pos = i;
      }
    }
    if (2 * best_count >= left + 1 && (!last || queue[best_pos].segment_id != *last)) pick = best_pos;
    if (pick == queue.size()) {
      for (std::size_t i = 0; i < queue.size(); ++i) {
        if (!used[i] && (!last || queue[i].segment_id != *last)) {
          pick = i;
          break;
        }
      }
    }
    if (pick == queue.size()) {
      for (std::size_t i = 0; i < queue.size(); ++i) {
        if (!used[i]) {
          pick = i;
          break;
        }
      }
    }
    used[pick] = true;
    --remaining[queue[pick].segment_id];
    out.push_back(std::move(queue[pick]));
  }
  return out;
}

std::string zero_pad(std::size_t v, std::size_t width) {
  std::string s = std::to_string(v);
  return s.size() >= width ? s : std::string(width - s.size(), '0') + s;
}

}  // namespace

std::vector<AnnotationTask> build_tasks(const SamplePlan& plan, const evalset::TestSet& testset,
                                        std::span<const evalset::SystemOutput> systems,
                                        std::span<const std::string> annotators, std::uint64_t shuffle_seed) {
  if (annotators.empty()) throw ValidationError("at least one annotator is required");
  std::set<std::string> distinct(annotators.begin(), annotators.end());
  if (distinct.size() != annotators.size()) throw ValidationError("annotator ids must be distinct");
  if (systems.empty()) throw ValidationError("at least one system is required");

  std::vector<AnnotationTask> tasks;
  tasks.reserve(systems.size() * plan.segment_ids.size());
  for (const auto& sys : systems) {
    if (!sys.resegmented) {
      throw ValidationError("system '" + sys.system_id + "' is not resegmented; resegment before building tasks");
    }
    for (const auto& segment_id : plan.segment_ids) {
      auto [doc_id, index] = evalset::parse_segment_id(segment_id);
      const evalset::Document& doc = testset.document(doc_id);
      auto it = sys.documents.find(doc_id);
      if (it == sys.documents.end()) {
        throw ValidationError("system '" + sys.system_id + "' has no output for document '" + doc_id +
                              "' needed by sampled segment " + segment_id);
      }
      const auto& lines = it->second;
      if (lines.size() != doc.segments.size() || index >= lines.size()) {
        throw ValidationError("system '" + sys.system_id + "' output for '" + doc_id +
                              "' is not parallel to the reference segmentation");
      }
      AnnotationTask t;
      t.system_id = sys.system_id;
      t.segment_id = segment_id;
      t.source_text = doc.segments[index].source_text;
      t.hyp_text = lines[index];
      if (index > 0) t.prev_hyp_text = lines[index - 1];
      if (index + 1 < lines.size()) t.next_hyp_text = lines[index + 1];
      tasks.push_back(std::move(t));
    }
  }

  std::mt19937_64 rng(shuffle_seed);
  util::shuffle(tasks, rng);

  std::vector<std::vector<AnnotationTask>> queues(annotators.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) queues[i % annotators.size()].push_back(std::move(tasks[i]));

  std::vector<AnnotationTask> out;
  out.reserve(tasks.size());
  const std::size_t width = std::max<std::size_t>(6, std::to_string(tasks.size()).size());
  for (std::size_t a = 0; a < annotators.size(); ++a) {
    std::vector<AnnotationTask> ordered = separate_repeats(std::move(queues[a]));
    for (std::size_t pos = 0; pos < ordered.size(); ++pos) {
      ordered[pos].annotator_id = annotators[a];
      ordered[pos].presentation_index = pos;
      ordered[pos].task_id = "t" + zero_pad(out.size(), width);
      out.push_back(std::move(ordered[pos]));
    }
  }
  return out;
}

namespace {

using RecordKey = std::tuple<std::string, std::string, std::string>;

RecordKey key_of(const DARecord& r) { return {r.annotator_id, r.system_id, r.segment_id}; }

std::string describe(const DARecord& r) {
  return "(" + r.annotator_id + ", " + r.system_id + ", " + r.segment_id + ")";
}

std::optional<std::string> check_against(const DARecord& record, const std::set<RecordKey>& issued,
                                         const std::set<RecordKey>& taken) {
  if (!(record.raw_score >= kMinScore && record.raw_score <= kMaxScore)) {
    return "score " + util::format_double(record.raw_score) + " outside [0,100]";
  }
  if (!issued.count(key_of(record))) return "no issued task for " + describe(record);
  if (taken.count(key_of(record))) return "duplicate score for " + describe(record);
  return std::nullopt;
}

std::set<RecordKey> issued_keys(std::span<const AnnotationTask> tasks) {
  std::set<RecordKey> keys;
  for (const auto& t : tasks) keys.insert({t.annotator_id, t.system_id, t.segment_id});
  return keys;
}

std::map<std::string, std::size_t> header_columns(const std::vector<std::string>& lines, const std::string& where,
                                                  std::initializer_list<const char*> required) {
  if (lines.empty()) throw ValidationError(where + ": missing header row");
  std::map<std::string, std::size_t> col;
  auto header = util::split(lines[0], '\t');
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* r : required) {
    if (!col.count(r)) throw ValidationError(where + ":1: missing column '" + std::string(r) + "'");
  }
  return col;
}

}  // namespace

std::optional<std::string> check_record(const DARecord& record, std::span<const AnnotationTask> tasks,
                                        std::span<const DARecord> existing) {
  std::set<RecordKey> taken;
  for (const auto& r : existing) taken.insert(key_of(r));
  return check_against(record, issued_keys(tasks), taken);
}

IngestResult ingest_da(const std::filesystem::path& records_path, std::span<const AnnotationTask> tasks,
                       std::span<const DARecord> existing) {
  const std::string where = records_path.string();
  std::vector<std::string> lines = util::read_lines(records_path);
  auto col = header_columns(lines, where, {"annotator_id", "system_id", "segment_id", "score"});
  const std::size_t width = util::split(lines[0], '\t').size();
  const std::set<RecordKey> issued = issued_keys(tasks);
  std::set<RecordKey> taken;
  for (const auto& r : existing) taken.insert(key_of(r));

  IngestResult result;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto f = util::split(lines[ln], '\t');
    if (f.size() != width) {
      result.rejected.push_back({ln + 1, "expected " + std::to_string(width) + " fields, found " + std::to_string(f.size())});
      continue;
    }
    DARecord rec;
    rec.annotator_id = f[col["annotator_id"]];
    rec.system_id = f[col["system_id"]];
    rec.segment_id = f[col["segment_id"]];
    if (col.count("timestamp")) rec.timestamp = f[col["timestamp"]];
    if (!util::parse_double(f[col["score"]], rec.raw_score)) {
      result.rejected.push_back({ln + 1, "non-numeric score '" + f[col["score"]] + "'"});
      continue;
    }
    if (auto reason = check_against(rec, issued, taken)) {
      result.rejected.push_back({ln + 1, *reason});
      continue;
    }
    taken.insert(key_of(rec));
    result.accepted.push_back(std::move(rec));
  }
  return result;
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "raw" || name == "raw-mean") return Aggregation::RawMean;
  if (name == "z" || name == "annotator-z") return Aggregation::AnnotatorZ;
  throw ValidationError("unknown aggregation '" + std::string(name) + "' (expected raw|z)");
}

std::string_view to_string(Aggregation mode) { return mode == Aggregation::RawMean ? "raw" : "z"; }

AggregateResult aggregate_system_da(std::span<const DARecord> records, Aggregation mode,
                                    const evalset::Condition& condition, std::span<const std::string> expected_systems) {
  std::vector<double> values(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) values[i] = records[i].raw_score;

  if (mode == Aggregation::AnnotatorZ) {
    std::map<std::string, std::vector<std::size_t>> by_annotator;
    for (std::size_t i = 0; i < records.size(); ++i) by_annotator[records[i].annotator_id].push_back(i);
    for (const auto& [annotator, idx] : by_annotator) {
      double mean = 0;
      for (std::size_t i : idx) mean += records[i].raw_score;
      mean /= static_cast<double>(idx.size());
      double var = 0;
      for (std::size_t i : idx) var += (records[i].raw_score - mean) * (records[i].raw_score - mean);
      var /= static_cast<double>(idx.size());
      const double sd = std::sqrt(var);
      for (std::size_t i : idx) values[i] = sd > 0 ? (records[i].raw_score - mean) / sd : 0.0;
    }
  }

  std::map<std::string, std::pair<double, std::size_t>> per_system;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& acc = per_system[records[i].system_id];
    acc.first += values[i];
    ++acc.second;
  }

  AggregateResult result;
  result.table.method = mode == Aggregation::RawMean ? "da" : "da_z";
  result.table.granularity = metrics::Granularity::System;
  result.table.condition = condition;
  for (const auto& [sys, acc] : per_system) {
    result.table.rows.push_back({sys, "", acc.first / static_cast<double>(acc.second)});
  }
  for (const auto& sys : expected_systems) {
    if (!per_system.count(sys)) result.warnings.push_back("system '" + sys + "' has no DA records; excluded");
  }
  return result;
}

void export_wmt(std::span<const DARecord> records, const evalset::Condition& condition,
                const std::filesystem::path& path) {
  struct Row {
    const DARecord* rec;
    std::string doc_id;
    std::size_t index;
  };
  std::vector<Row> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    auto [doc_id, index] = evalset::parse_segment_id(r.segment_id);
    rows.push_back({&r, std::move(doc_id), index});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.rec->system_id, a.doc_id, a.index, a.rec->annotator_id) <
           std::tie(b.rec->system_id, b.doc_id, b.index, b.rec->annotator_id);
  });
  std::ostringstream out;
  out << "task\tlang_pair\tdomain\tsystem_id\tdoc_id\tsegment_id\tannotator_id\traw_score\ttimestamp\n";
  for (const auto& row : rows) {
    out << evalset::to_string(condition.task) << '\t' << condition.langs.str() << '\t'
        << evalset::to_string(condition.domain) << '\t' << row.rec->system_id << '\t' << row.doc_id << '\t'
        << row.rec->segment_id << '\t' << row.rec->annotator_id << '\t' << util::format_double(row.rec->raw_score)
        << '\t' << row.rec->timestamp << '\n';
  }
  util::write_file(path, out.str());
}

WmtImport import_wmt(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::vector<std::string> lines = util::read_lines(path);
  auto col = header_columns(lines, where,
                            {"task", "lang_pair", "domain", "system_id", "segment_id", "annotator_id", "raw_score"});
  const std::size_t width = util::split(lines[0], '\t').size();
  WmtImport result;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string at = where + ":" + std::to_string(ln + 1);
    auto f = util::split(lines[ln], '\t');
    if (f.size() != width) throw ValidationError(at + ": wrong field count");
    evalset::Condition cond = evalset::make_condition(f[col["task"]], f[col["lang_pair"]], f[col["domain"]]);
    if (result.condition && *result.condition != cond) throw ValidationError(at + ": rows mix conditions");
    result.condition = cond;
    DARecord rec;
    rec.system_id = f[col["system_id"]];
    rec.segment_id = f[col["segment_id"]];
    rec.annotator_id = f[col["annotator_id"]];
    if (col.count("timestamp")) rec.timestamp = f[col["timestamp"]];
    if (!util::parse_double(f[col["raw_score"]], rec.raw_score)) throw ValidationError(at + ": non-numeric score");
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace steval::da
