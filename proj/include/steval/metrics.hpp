#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "steval/evalset.hpp"
#include "steval/textproc.hpp"

namespace steval::metrics {

enum class Metric { ChrF, BLEU };

struct MetricConfig {
  Metric metric = Metric::ChrF;
  int char_ngram_max = 6;
  double beta = 2.0;
  int bleu_ngram_max = 4;
  /// Token level for BLEU; defaults from the target language when unset.
  std::optional<text::TokenizationLevel> bleu_level;

  void validate() const;
};

Metric parse_metric(std::string_view name);
std::string_view to_string(Metric metric);

/// Character level for Chinese and Japanese targets, word level otherwise.
text::TokenizationLevel default_level_for(std::string_view target_language);

/// Corpus chrF in [0, 100]. Matches and n-gram totals are summed over the
/// corpus per order; the per-order F-beta values are averaged. Whitespace is
/// removed before extracting character n-grams.
double chrf_corpus(std::span<const std::string> hyps, std::span<const std::string> refs, const MetricConfig& cfg = {});
double chrf_sentence(const std::string& hyp, const std::string& ref, const MetricConfig& cfg = {});

/// Corpus BLEU in [0, 100], single reference, no smoothing.
double bleu_corpus(std::span<const text::TokenStream> hyps, std::span<const text::TokenStream> refs,
                   const MetricConfig& cfg = {});

enum class Granularity { Segment, System };
std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view name);

struct ScoreRow {
  std::string system_id;
  std::string segment_id;  // empty for system granularity
  double score = 0.0;
  bool operator==(const ScoreRow&) const = default;
};

/// Scores of one method under one condition.
struct ScoreTable {
  std::string method;  // "chrf", "bleu", "comet", "da", "mqm", "cr", ...
  Granularity granularity = Granularity::System;
  evalset::Condition condition;
  std::optional<std::string> reference_set;
  std::vector<ScoreRow> rows;
  /// Constituent conditions when the table was derived from several (domain averaging).
  std::vector<evalset::Condition> sources;

  std::map<std::string, double> system_scores() const;
  std::vector<std::string> system_ids() const;
  /// Throws ValidationError on duplicate rows, mismatched segment sets or out-of-range scores.
  void validate() const;
  bool operator==(const ScoreTable&) const = default;
};

/// Inclusive score range for bounded methods (chrf, bleu, da); nullopt otherwise.
std::optional<std::pair<double, double>> score_range(std::string_view method);

/// Score TSV columns: method, task, lang_pair, domain, [reference_set], system_id, segment_id, score.
void write_score_tables(std::ostream& out, std::span<const ScoreTable> tables);
void write_score_tables(const std::filesystem::path& path, std::span<const ScoreTable> tables);
/// Groups rows by (method, condition, reference_set, granularity).
std::vector<ScoreTable> read_score_tables(const std::filesystem::path& path);

/// Reads an externally computed score file (COMET, MQM, CR, ...) and returns the
/// rows for `method` under `condition`. With `registered`, system and
/// segment ids are checked against the test set.
ScoreTable ingest_external_scores(const std::filesystem::path& path, const std::string& method, Granularity granularity,
                                  const evalset::Condition& condition, const evalset::TestSet* registered = nullptr);

/// One system-level score per system over every segment of the test set.
/// Throws ValidationError when a system is not resegmented.
ScoreTable score_systems(const evalset::TestSet& testset, std::span<const evalset::SystemOutput> systems,
                         const MetricConfig& cfg, const std::string& reference_set);

/// Sentence-level chrF per (system, segment).
ScoreTable score_segments(const evalset::TestSet& testset, std::span<const evalset::SystemOutput> systems,
                          const MetricConfig& cfg, const std::string& reference_set);

}  // namespace steval::metrics
