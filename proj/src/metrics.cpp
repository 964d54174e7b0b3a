#include "steval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "steval/error.hpp"
#include "steval/util.hpp"

namespace steval::metrics {

void MetricConfig::validate() const {
  if (char_ngram_max < 1) throw ValidationError("char_ngram_max must be >= 1");
  if (!(beta > 0)) throw ValidationError("beta must be > 0");
  if (bleu_ngram_max < 1) throw ValidationError("bleu_ngram_max must be >= 1");
}

Metric parse_metric(std::string_view name) {
  if (name == "chrf") return Metric::ChrF;
  if (name == "bleu") return Metric::BLEU;
  throw ValidationError("unknown metric '" + std::string(name) + "' (expected chrf|bleu)");
}

std::string_view to_string(Metric metric) { return metric == Metric::ChrF ? "chrf" : "bleu"; }

text::TokenizationLevel default_level_for(std::string_view target_language) {
  return (target_language == "zh" || target_language == "ja") ? text::TokenizationLevel::Character
                                                              : text::TokenizationLevel::Word;
}

namespace {

struct OrderCounts {
  std::vector<double> hyp;
  std::vector<double> ref;
  std::vector<double> match;

  explicit OrderCounts(int orders) : hyp(orders, 0.0), ref(orders, 0.0), match(orders, 0.0) {}
};

template <typename Seq, typename Key>
std::unordered_map<Key, int> ngram_counts(const Seq& seq, std::size_t n) {
  std::unordered_map<Key, int> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[Key(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

template <typename Key>
double clipped_matches(const std::unordered_map<Key, int>& hyp, const std::unordered_map<Key, int>& ref) {
  double m = 0;
  for (const auto& [gram, c] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

std::u32string strip_whitespace(const std::string& s) {
  std::u32string out;
  for (char32_t c : text::decode_utf8(s)) {
    if (!text::is_whitespace(c)) out.push_back(c);
  }
  return out;
}

void add_chrf_counts(const std::string& hyp, const std::string& ref, OrderCounts& counts) {
  const std::u32string h = strip_whitespace(hyp);
  const std::u32string r = strip_whitespace(ref);
  for (std::size_t n = 1; n <= counts.hyp.size(); ++n) {
    auto hc = ngram_counts<std::u32string, std::u32string>(h, n);
    auto rc = ngram_counts<std::u32string, std::u32string>(r, n);
    counts.hyp[n - 1] += h.size() >= n ? static_cast<double>(h.size() - n + 1) : 0.0;
    counts.ref[n - 1] += r.size() >= n ? static_cast<double>(r.size() - n + 1) : 0.0;
    counts.match[n - 1] += clipped_matches(hc, rc);
  }
}

double chrf_from_counts(const OrderCounts& counts, double beta) {
  const double b2 = beta * beta;
  double sum = 0;
  int used = 0;
  for (std::size_t k = 0; k < counts.hyp.size(); ++k) {
    if (counts.hyp[k] == 0 && counts.ref[k] == 0) continue;
    ++used;
    double p = counts.hyp[k] > 0 ? counts.match[k] / counts.hyp[k] : 0.0;
    double r = counts.ref[k] > 0 ? counts.match[k] / counts.ref[k] : 0.0;
    if (p + r > 0) sum += (1 + b2) * p * r / (b2 * p + r);
  }
  return used ? 100.0 * sum / used : 0.0;
}

}  // namespace

double chrf_corpus(std::span<const std::string> hyps, std::span<const std::string> refs, const MetricConfig& cfg) {
  cfg.validate();
  if (hyps.size() != refs.size()) {
    throw ValidationError("chrF: " + std::to_string(hyps.size()) + " hypotheses vs " + std::to_string(refs.size()) +
                          " references");
  }
  if (hyps.empty()) throw ValidationError("chrF: empty corpus");
  OrderCounts counts(cfg.char_ngram_max);
  for (std::size_t i = 0; i < hyps.size(); ++i) add_chrf_counts(hyps[i], refs[i], counts);
  return chrf_from_counts(counts, cfg.beta);
}

double chrf_sentence(const std::string& hyp, const std::string& ref, const MetricConfig& cfg) {
  return chrf_corpus(std::span(&hyp, 1), std::span(&ref, 1), cfg);
}

double bleu_corpus(std::span<const text::TokenStream> hyps, std::span<const text::TokenStream> refs,
                   const MetricConfig& cfg) {
  cfg.validate();
  if (hyps.size() != refs.size()) {
    throw ValidationError("BLEU: " + std::to_string(hyps.size()) + " hypotheses vs " + std::to_string(refs.size()) +
                          " references");
  }
  if (hyps.empty()) throw ValidationError("BLEU: empty corpus");
  using Gram = std::vector<std::string>;
  struct GramHash {
    std::size_t operator()(const Gram& g) const {
      std::size_t h = 0;
      for (const auto& s : g) h = h * 1000003u ^ std::hash<std::string>{}(s);
      return h;
    }
  };
  OrderCounts counts(cfg.bleu_ngram_max);
  double hyp_len = 0;
  double ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (hyps[i].level != refs[i].level) throw ValidationError("BLEU: mixed tokenization levels");
    const auto& h = hyps[i].tokens;
    const auto& r = refs[i].tokens;
    hyp_len += static_cast<double>(h.size());
    ref_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= counts.hyp.size(); ++n) {
      std::unordered_map<Gram, int, GramHash> hc;
      std::unordered_map<Gram, int, GramHash> rc;
      for (std::size_t k = 0; k + n <= h.size(); ++k) ++hc[Gram(h.begin() + k, h.begin() + k + n)];
      for (std::size_t k = 0; k + n <= r.size(); ++k) ++rc[Gram(r.begin() + k, r.begin() + k + n)];
      counts.hyp[n - 1] += h.size() >= n ? static_cast<double>(h.size() - n + 1) : 0.0;
      counts.ref[n - 1] += r.size() >= n ? static_cast<double>(r.size() - n + 1) : 0.0;
      for (const auto& [gram, c] : hc) {
        auto it = rc.find(gram);
        if (it != rc.end()) counts.match[n - 1] += std::min(c, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_sum = 0;
  int used = 0;
  for (std::size_t k = 0; k < counts.hyp.size(); ++k) {
    // an order with no n-grams on either side carries no evidence
    if (counts.hyp[k] == 0 && counts.ref[k] == 0) continue;
    if (counts.match[k] == 0) return 0.0;
    log_sum += std::log(counts.match[k] / counts.hyp[k]);
    ++used;
  }
  double bp = hyp_len < ref_len ? std::exp(1.0 - ref_len / hyp_len) : 1.0;
  return 100.0 * bp * std::exp(log_sum / used);
}

std::string_view to_string(Granularity g) { return g == Granularity::System ? "system" : "segment"; }

Granularity parse_granularity(std::string_view name) {
  if (name == "system") return Granularity::System;
  if (name == "segment") return Granularity::Segment;
  throw ValidationError("unknown granularity '" + std::string(name) + "' (expected system|segment)");
}

std::map<std::string, double> ScoreTable::system_scores() const {
  if (granularity != Granularity::System) throw ValidationError("table '" + method + "' is not system-level");
  std::map<std::string, double> out;
  for (const auto& row : rows) out[row.system_id] = row.score;
  return out;
}

std::vector<std::string> ScoreTable::system_ids() const {
  std::set<std::string> ids;
  for (const auto& row : rows) ids.insert(row.system_id);
  return {ids.begin(), ids.end()};
}

std::optional<std::pair<double, double>> score_range(std::string_view method) {
  if (method == "chrf" || method == "bleu" || method == "da") return std::pair{0.0, 100.0};
  return std::nullopt;
}

void ScoreTable::validate() const {
  const std::string what = "score table '" + method + "' (" + condition.str() + ")";
  if (auto range = score_range(method)) {
    for (const auto& row : rows) {
      if (row.score < range->first || row.score > range->second) {
        throw ValidationError(what + ": score " + util::format_double(row.score) + " for system '" + row.system_id +
                              "' outside [" + util::format_double(range->first) + "," +
                              util::format_double(range->second) + "]");
      }
    }
  }
  if (granularity == Granularity::System) {
    std::set<std::string> seen;
    for (const auto& row : rows) {
      if (!row.segment_id.empty()) throw ValidationError(what + ": system-level row carries segment id");
      if (!seen.insert(row.system_id).second) {
        throw ValidationError(what + ": more than one row for system '" + row.system_id + "'");
      }
    }
    return;
  }
  std::map<std::string, std::set<std::string>> per_system;
  for (const auto& row : rows) {
    if (row.segment_id.empty()) throw ValidationError(what + ": segment-level row without segment id");
    if (!per_system[row.system_id].insert(row.segment_id).second) {
      throw ValidationError(what + ": duplicate row for (" + row.system_id + ", " + row.segment_id + ")");
    }
  }
  const std::set<std::string>* reference = nullptr;
  std::string reference_system;
  for (const auto& [system_id, segs] : per_system) {
    if (!reference) {
      reference = &segs;
      reference_system = system_id;
      continue;
    }
    if (segs != *reference) {
      std::vector<std::string> missing;
      for (const auto& s : *reference) {
        if (!segs.count(s)) missing.push_back(system_id + " lacks " + s);
      }
      for (const auto& s : segs) {
        if (!reference->count(s)) missing.push_back(reference_system + " lacks " + s);
      }
      throw ValidationError(what + ": segment sets differ across systems: " + util::join(missing, "; "));
    }
  }
}

namespace {

constexpr const char* kScoreHeader = "method\ttask\tlang_pair\tdomain\treference_set\tsystem_id\tsegment_id\tscore";

}  // namespace

void write_score_tables(std::ostream& out, std::span<const ScoreTable> tables) {
  out << kScoreHeader << '\n';
  for (const auto& t : tables) {
    for (const auto& row : t.rows) {
      out << t.method << '\t' << evalset::to_string(t.condition.task) << '\t' << t.condition.langs.str() << '\t'
          << evalset::to_string(t.condition.domain) << '\t' << t.reference_set.value_or("") << '\t' << row.system_id
          << '\t' << row.segment_id << '\t' << util::format_double(row.score) << '\n';
    }
  }
}

void write_score_tables(const std::filesystem::path& path, std::span<const ScoreTable> tables) {
  std::ostringstream out;
  write_score_tables(out, tables);
  util::write_file(path, out.str());
}

std::vector<ScoreTable> read_score_tables(const std::filesystem::path& path) {
  std::vector<std::string> lines = util::read_lines(path);
  const std::string where = path.string();
  if (lines.empty()) throw ValidationError(where + ": missing header row");
  std::vector<std::string> header = util::split(lines[0], '\t');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"method", "task", "lang_pair", "domain", "system_id", "segment_id", "score"}) {
    if (!col.count(required)) throw ValidationError(where + ":1: missing column '" + std::string(required) + "'");
  }
  const bool has_ref = col.count("reference_set") > 0;

  using Key = std::tuple<std::string, evalset::Condition, std::string, Granularity>;
  std::map<Key, ScoreTable> groups;
  std::vector<Key> order;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string at = where + ":" + std::to_string(ln + 1);
    std::vector<std::string> f = util::split(lines[ln], '\t');
    if (f.size() != header.size()) {
      throw ValidationError(at + ": expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(f.size()));
    }
    double score = 0;
    if (!util::parse_double(f[col["score"]], score)) {
      throw ValidationError(at + ": non-numeric score '" + f[col["score"]] + "'");
    }
    evalset::Condition cond;
    try {
      cond = evalset::make_condition(f[col["task"]], f[col["lang_pair"]], f[col["domain"]]);
    } catch (const ValidationError& e) {
      throw ValidationError(at + ": " + e.what());
    }
    const std::string ref = has_ref ? f[col["reference_set"]] : "";
    const std::string& segment_id = f[col["segment_id"]];
    Granularity g = segment_id.empty() ? Granularity::System : Granularity::Segment;
    Key key{f[col["method"]], cond, ref, g};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) {
      order.push_back(key);
      it->second.method = f[col["method"]];
      it->second.condition = cond;
      it->second.granularity = g;
      if (!ref.empty()) it->second.reference_set = ref;
    }
    it->second.rows.push_back({f[col["system_id"]], segment_id, score});
  }
  std::vector<ScoreTable> tables;
  for (const auto& key : order) {
    ScoreTable& t = groups.at(key);
    try {
      t.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

ScoreTable ingest_external_scores(const std::filesystem::path& path, const std::string& method, Granularity granularity,
                                  const evalset::Condition& condition, const evalset::TestSet* registered) {
  std::vector<ScoreTable> matching;
  for (auto& t : read_score_tables(path)) {
    if (t.method == method && t.condition == condition && t.granularity == granularity) matching.push_back(std::move(t));
  }
  if (matching.empty()) {
    throw ValidationError(path.string() + ": no " + std::string(to_string(granularity)) + "-level rows for method '" +
                          method + "' under " + condition.str());
  }
  if (matching.size() > 1) {
    throw ValidationError(path.string() + ": rows for method '" + method + "' span several reference sets");
  }
  ScoreTable table = std::move(matching.front());
  if (registered) {
    std::set<std::string> offenders;
    for (const auto& row : table.rows) {
      if (!registered->systems.empty() && !registered->systems.count(row.system_id)) {
        offenders.insert("system '" + row.system_id + "'");
      }
      if (!row.segment_id.empty() && !registered->has_segment(row.segment_id)) {
        offenders.insert("segment '" + row.segment_id + "'");
      }
    }
    if (!offenders.empty()) {
      throw ValidationError(path.string() + ": unknown ids: " + util::join({offenders.begin(), offenders.end()}, ", "));
    }
  }
  return table;
}

namespace {

struct Corpus {
  std::vector<std::string> hyps;
  std::vector<std::string> refs;
  std::vector<std::string> segment_ids;
};

Corpus gather(const evalset::TestSet& testset, const evalset::SystemOutput& sys, const std::string& reference_set) {
  if (!sys.resegmented) {
    throw ValidationError("system '" + sys.system_id +
                          "' is not resegmented; run `steval reseg` on it before scoring");
  }
  if (std::find(testset.reference_sets.begin(), testset.reference_sets.end(), reference_set) ==
      testset.reference_sets.end()) {
    throw ValidationError("unknown reference set '" + reference_set + "'");
  }
  Corpus c;
  for (const auto& doc : testset.documents) {
    auto it = sys.documents.find(doc.doc_id);
    if (it == sys.documents.end()) {
      throw ValidationError("system '" + sys.system_id + "' has no output for document '" + doc.doc_id + "'");
    }
    if (it->second.size() != doc.segments.size()) {
      throw ValidationError("system '" + sys.system_id + "' document '" + doc.doc_id + "' has " +
                            std::to_string(it->second.size()) + " segments, reference has " +
                            std::to_string(doc.segments.size()));
    }
    for (std::size_t i = 0; i < doc.segments.size(); ++i) {
      c.hyps.push_back(it->second[i]);
      c.refs.push_back(doc.segments[i].references.at(reference_set));
      c.segment_ids.push_back(doc.segments[i].segment_id);
    }
  }
  return c;
}

}  // namespace

ScoreTable score_systems(const evalset::TestSet& testset, std::span<const evalset::SystemOutput> systems,
                         const MetricConfig& cfg, const std::string& reference_set) {
  cfg.validate();
  ScoreTable table;
  table.method = std::string(to_string(cfg.metric));
  table.granularity = Granularity::System;
  table.condition = testset.condition;
  table.reference_set = reference_set;
  const text::TokenizationLevel level = cfg.bleu_level.value_or(default_level_for(testset.condition.langs.target));
  for (const auto& sys : systems) {
    Corpus c = gather(testset, sys, reference_set);
    double score = 0;
    if (cfg.metric == Metric::ChrF) {
      score = chrf_corpus(c.hyps, c.refs, cfg);
    } else {
      std::vector<text::TokenStream> h;
      std::vector<text::TokenStream> r;
      for (std::size_t i = 0; i < c.hyps.size(); ++i) {
        h.push_back(text::tokenize(c.hyps[i], level));
        r.push_back(text::tokenize(c.refs[i], level));
      }
      score = bleu_corpus(h, r, cfg);
    }
    table.rows.push_back({sys.system_id, "", score});
  }
  table.validate();
  return table;
}

ScoreTable score_segments(const evalset::TestSet& testset, std::span<const evalset::SystemOutput> systems,
                          const MetricConfig& cfg, const std::string& reference_set) {
  if (cfg.metric != Metric::ChrF) throw ValidationError("segment-level scoring is offered for chrF only");
  ScoreTable table;
  table.method = "chrf";
  table.granularity = Granularity::Segment;
  table.condition = testset.condition;
  table.reference_set = reference_set;
  for (const auto& sys : systems) {
    Corpus c = gather(testset, sys, reference_set);
    for (std::size_t i = 0; i < c.hyps.size(); ++i) {
      table.rows.push_back({sys.system_id, c.segment_ids[i], chrf_sentence(c.hyps[i], c.refs[i], cfg)});
    }
  }
  table.validate();
  return table;
}

}  // namespace steval::metrics
