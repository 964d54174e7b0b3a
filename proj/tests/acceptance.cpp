// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "steval/align.hpp"
#include "steval/campaign.hpp"
#include "steval/da.hpp"
#include "steval/evalset.hpp"
#include "steval/metrics.hpp"
#include "steval/stats.hpp"
#include "steval/util.hpp"

using namespace steval;
namespace fs = std::filesystem;

namespace {

constexpr double kTol = 1e-9;
constexpr double kOptimalitySeconds = 30.0;
constexpr double kEndToEndSeconds = 60.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail << ")" << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

text::TokenStream stream(const oracle::Tokens& t) { return {t, text::TokenizationLevel::Word}; }

oracle::Tokens noisy_copy(std::mt19937_64& rng, const oracle::Tokens& src, int alphabet) {
  oracle::Tokens out;
  for (const auto& t : src) {
    switch (rng() % 10) {
      case 0:
        break;
      case 1:
        out.push_back(std::string(1, static_cast<char>('a' + rng() % alphabet)));
        break;
      case 2:
        out.push_back(t);
        out.push_back(std::string(1, static_cast<char>('a' + rng() % alphabet)));
        break;
      default:
        out.push_back(t);
    }
  }
  return out;
}

Outcome resegmentation_optimality() {
  std::mt19937_64 rng(0xA11CE);
  const auto t0 = std::chrono::steady_clock::now();
  int matched = 0;
  const int instances = 300;
  for (int i = 0; i < instances; ++i) {
    auto hyp = oracle::random_tokens(rng, rng() % 13, 3);
    std::vector<oracle::Tokens> refs(1 + rng() % 4);
    std::vector<text::TokenStream> ref_streams;
    for (auto& r : refs) {
      r = oracle::random_tokens(rng, rng() % 6, 3);
      ref_streams.push_back(stream(r));
    }
    auto seg = align::resegment(stream(hyp), ref_streams);
    if (seg.total_distance == oracle::best_segmentation_cost(hyp, refs)) ++matched;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << matched << "/" << instances << " optimal, " << util::format_fixed(secs, 2) << " s";
  return {matched == instances && secs < kOptimalitySeconds, d.str()};
}

Outcome decomposition_identity() {
  std::mt19937_64 rng(0xDEC0);
  int ok = 0;
  const int instances = 200;
  std::size_t largest = 0;
  for (int i = 0; i < instances; ++i) {
    const int alphabet = 2 + static_cast<int>(rng() % 30);
    const std::size_t target = 1 + rng() % 2000;
    std::vector<oracle::Tokens> refs;
    std::size_t total = 0;
    while (total < target) {
      std::size_t len = std::min<std::size_t>(rng() % 40, target - total);
      refs.push_back(oracle::random_tokens(rng, len, alphabet));
      total += len;
      if (len == 0 && refs.size() > 3) total += 1;
    }
    oracle::Tokens concat;
    for (const auto& r : refs) concat.insert(concat.end(), r.begin(), r.end());
    oracle::Tokens hyp = i % 2 ? noisy_copy(rng, concat, alphabet)
                               : oracle::random_tokens(rng, rng() % 2001, alphabet);
    if (hyp.size() > 2000) hyp.resize(2000);
    largest = std::max({largest, hyp.size(), concat.size()});
    std::vector<text::TokenStream> ref_streams;
    for (const auto& r : refs) ref_streams.push_back(stream(r));
    auto seg = align::resegment(stream(hyp), ref_streams);
    std::size_t sum = 0;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      oracle::Tokens piece(hyp.begin() + static_cast<long>(seg.cut_points[k]),
                           hyp.begin() + static_cast<long>(seg.cut_points[k + 1]));
      sum += oracle::edit_distance(piece, refs[k]);
    }
    if (sum == align::edit_distance(stream(hyp), stream(concat)) && sum == seg.total_distance) ++ok;
  }
  std::ostringstream d;
  d << ok << "/" << instances << " exact, largest side " << largest << " tokens";
  return {ok == instances, d.str()};
}

Outcome memory_mode_equivalence() {
  std::mt19937_64 rng(0x3E3);
  align::ResegmentOptions full;
  full.mode = align::MemoryMode::FullMatrix;
  align::ResegmentOptions linear;
  linear.mode = align::MemoryMode::LinearMemory;
  linear.linear_leaf_cells = 64;  // force deep recursion
  int same_distance = 0;
  int same_cuts = 0;
  const int instances = 100;
  for (int i = 0; i < instances; ++i) {
    const int alphabet = 2 + static_cast<int>(rng() % 6);
    std::vector<text::TokenStream> refs;
    oracle::Tokens concat;
    for (std::size_t k = 1 + rng() % 30; k > 0; --k) {
      refs.push_back(stream(oracle::random_tokens(rng, rng() % 15, alphabet)));
      concat.insert(concat.end(), refs.back().tokens.begin(), refs.back().tokens.end());
    }
    auto hyp = stream(i % 2 ? noisy_copy(rng, concat, alphabet) : oracle::random_tokens(rng, rng() % 400, alphabet));
    auto a = align::resegment(hyp, refs, full);
    auto b = align::resegment(hyp, refs, linear);
    same_distance += a.total_distance == b.total_distance;
    same_cuts += a.cut_points == b.cut_points;
  }
  std::ostringstream d;
  d << same_distance << "/" << instances << " equal distances, " << same_cuts << "/" << instances << " equal cuts";
  return {same_distance == instances && same_cuts == instances, d.str()};
}

Outcome chrf_correctness() {
  metrics::MetricConfig n2;
  n2.char_ngram_max = 2;
  metrics::MetricConfig n3;
  n3.char_ngram_max = 3;
  metrics::MetricConfig n1;
  n1.char_ngram_max = 1;
  struct Crafted {
    std::vector<std::string> hyp;
    std::vector<std::string> ref;
    metrics::MetricConfig cfg;
    double expected;
  };
  // hand counts with beta = 2
  const Crafted crafted[] = {
      {{"ab"}, {"abc"}, n2, 100.0 * 40.0 / 63.0},
      {{"abc"}, {"ab"}, n2, 100.0 * 115.0 / 132.0},
      {{"aaa"}, {"aa"}, n2, 100.0 * 115.0 / 132.0},
      {{"a b"}, {"ab"}, n2, 100.0},
      {{"abcd"}, {"abd"}, n3, 100.0 * 245.0 / 528.0},
      {{"a"}, {"ab"}, n2, 100.0 * 5.0 / 18.0},
      {{"ab", "cd"}, {"ab", "ce"}, n1, 75.0},
  };
  int crafted_ok = 0;
  double worst = 0;
  for (const auto& c : crafted) {
    double got = metrics::chrf_corpus(c.hyp, c.ref, c.cfg);
    worst = std::max(worst, std::fabs(got - c.expected));
    crafted_ok += std::fabs(got - c.expected) <= kTol;
  }
  std::mt19937_64 rng(0xC4F);
  int identity_ok = 0;
  int disjoint_ok = 0;
  for (int i = 0; i < 100; ++i) {
    std::string x;
    std::string y;
    for (std::size_t k = 1 + rng() % 40; k > 0; --k) {
      x += static_cast<char>('a' + rng() % 13);
      y += static_cast<char>('N' + rng() % 13);
      if (rng() % 7 == 0) x += ' ';
    }
    identity_ok += metrics::chrf_sentence(x, x) == 100.0;
    disjoint_ok += metrics::chrf_sentence(x, y) == 0.0;
  }
  const int n = static_cast<int>(std::size(crafted));
  std::ostringstream d;
  d << crafted_ok << "/" << n << " crafted pairs (max error " << worst << "), identity " << identity_ok
    << "/100, disjoint " << disjoint_ok << "/100";
  return {crafted_ok == n && identity_ok == 100 && disjoint_ok == 100, d.str()};
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(50, 15);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

Outcome statistics_correctness() {
  std::mt19937_64 rng(0x57A7);
  double worst = 0;
  int ok = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 3 + rng() % 18;
    auto x = gaussian(rng, n);
    auto y = gaussian(rng, n);
    const double mix = static_cast<double>(rng() % 5) / 4.0;
    for (std::size_t k = 0; k < n; ++k) y[k] = mix * x[k] + (1 - mix) * y[k];
    if (i % 4 == 0) {
      for (auto& v : x) v = std::round(v / 10);  // ties
    }
    auto p = stats::pearson(x, y);
    auto s = stats::spearman(x, y);
    const double rp = oracle::pearson(x, y);
    const double rs = oracle::spearman(x, y);
    double err = std::max({std::fabs(*p.value - rp), std::fabs(*p.p - oracle::correlation_p(rp, n)),
                           std::fabs(*s.value - rs), std::fabs(*s.p - oracle::correlation_p(rs, n))});
    worst = std::max(worst, err);
    ok += err <= kTol;
  }

  // two systems, as in a condition with only two submissions
  std::vector<double> hx = {73.4, 61.0};
  std::vector<double> mx = {41.2, 37.9};
  stats::PairedScores two{{"s1", "s2"}, hx, mx, "da", "chrf", {evalset::make_condition("simultaneous", "en-zh", "TED")},
                          std::nullopt};
  auto r = stats::correlate(two);
  std::vector<stats::CorrelationResult> rows = {r};
  std::ostringstream md;
  stats::render_report(rows, stats::ReportFormat::Markdown, md);
  const bool degenerate_ok = r.pearson_p == 1.0 && !r.spearman_p.has_value() &&
                             md.str().find("1.00 (p=1.00) | 1.00 (p=n/a)") != std::string::npos;

  std::ostringstream d;
  d << ok << "/100 within " << kTol << " (max error " << worst << "), n=2 row: "
    << (degenerate_ok ? "\"1.00 (p=1.00)\" and \"(p=n/a)\"" : "wrong");
  return {ok == 100 && degenerate_ok, d.str()};
}

Outcome invariance() {
  std::mt19937_64 rng(0x1A7);
  auto x = gaussian(rng, 16);
  auto y = gaussian(rng, 16);
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += 0.7 * x[k];
  const double p0 = *stats::pearson(x, y).value;
  const double s0 = *stats::spearman(x, y).value;
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  std::uniform_real_distribution<double> shift(-1e3, 1e3);
  double worst_p = 0;
  double worst_s = 0;
  for (int i = 0; i < 50; ++i) {
    const double a = scale(rng);
    const double b = shift(rng);
    auto t = x;
    for (auto& v : t) v = a * v + b;
    worst_p = std::max(worst_p, std::fabs(*stats::pearson(t, y).value - p0));
  }
  for (int i = 0; i < 50; ++i) {
    const double a = scale(rng);
    const double b = shift(rng);
    const int kind = i % 3;
    auto t = x;
    for (auto& v : t) {
      if (kind == 0) v = a * std::exp(v / 50.0) + b;
      else if (kind == 1) v = std::cbrt(v - 50) * a + b;
      else v = a * v * v * v + v + b;
    }
    worst_s = std::max(worst_s, std::fabs(*stats::spearman(t, y).value - s0));
  }
  std::ostringstream d;
  d << "pearson max drift " << worst_p << " over 50 affine maps, spearman max drift " << worst_s
    << " over 50 monotone maps";
  return {worst_p <= kTol && worst_s <= kTol, d.str()};
}

// Runs the whole pipeline into `work` and returns every produced artifact by relative path.
std::map<std::string, std::string> pipeline(const fs::path& fixture, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);

  // reseg
  evalset::TestSet raw = evalset::load_testset(fixture);
  evalset::TestSet ts = raw;
  std::ostringstream reseg_log;
  for (auto& [id, sys] : ts.systems) {
    std::vector<align::DocumentAlignment> docs;
    sys = align::resegment_all(raw.systems.at(id), raw, "new", text::TokenizationLevel::Word, {}, &docs);
    for (const auto& a : docs) reseg_log << id << '\t' << a.doc_id << '\t' << a.distance << '\t' << a.wer() << '\n';
  }
  evalset::save_testset(ts, work / "testset");
  util::write_file(work / "reseg.tsv", reseg_log.str());
  ts = evalset::load_testset(work / "testset");

  // score
  std::vector<evalset::SystemOutput> systems;
  for (const auto& [id, sys] : ts.systems) systems.push_back(sys);
  std::vector<metrics::ScoreTable> metric_tables;
  for (const std::string ref : {"new", "original"}) {
    metric_tables.push_back(metrics::score_systems(ts, systems, {}, ref));
    metrics::MetricConfig bleu;
    bleu.metric = metrics::Metric::BLEU;
    metric_tables.push_back(metrics::score_systems(ts, systems, bleu, ref));
  }
  metrics::write_score_tables(work / "metrics.tsv", metric_tables);

  // sample + build
  campaign::CampaignConfig cfg;
  cfg.testset = "testset";
  cfg.k = 30;
  cfg.seed = 2022;
  cfg.shuffle_seed = 527;
  cfg.annotators = {"r1", "r2", "r3"};
  auto camp = campaign::Campaign::build(ts, cfg, work / "campaign");

  // synthetic human scores: sentence chrF against the new references plus seeded noise
  std::mt19937_64 rng(99);
  std::ostringstream scores;
  scores << "annotator_id\tsystem_id\tsegment_id\tscore\ttimestamp\n";
  std::size_t i = 0;
  for (const auto& t : camp->tasks()) {
    auto [doc_id, index] = evalset::parse_segment_id(t.segment_id);
    const std::string& ref = ts.document(doc_id).segments[index].references.at("new");
    const double noise = static_cast<double>(util::uniform_below(rng, 2001)) / 100.0 - 10.0;
    const double s = std::clamp(metrics::chrf_sentence(t.hyp_text, ref) + noise, 0.0, 100.0);
    scores << t.annotator_id << '\t' << t.system_id << '\t' << t.segment_id << '\t' << util::format_fixed(s, 1)
           << "\t2024-01-01T00:00:" << (i++ % 60 < 10 ? "0" : "") << i % 60 << "Z\n";
  }
  util::write_file(work / "synthetic_scores.tsv", scores.str());
  auto ingested = camp->ingest(work / "synthetic_scores.tsv");
  if (!ingested.rejected.empty()) throw std::runtime_error("synthetic scores rejected: " + ingested.rejected[0].reason);
  auto records = camp->records();
  da::export_wmt(records, ts.condition, work / "wmt.tsv");

  // aggregate + correlate + report
  std::vector<metrics::ScoreTable> human;
  for (auto mode : {da::Aggregation::RawMean, da::Aggregation::AnnotatorZ}) {
    human.push_back(da::aggregate_system_da(records, mode, ts.condition, camp->config().systems).table);
  }
  metrics::write_score_tables(work / "human.tsv", human);
  std::vector<stats::CorrelationResult> results;
  for (const auto& h : human) {
    for (const auto& m : metric_tables) results.push_back(stats::correlate(h, m));
  }
  std::ostringstream tsv;
  std::ostringstream md;
  stats::render_report(results, stats::ReportFormat::TSV, tsv);
  stats::render_report(results, stats::ReportFormat::Markdown, md);
  util::write_file(work / "report.tsv", tsv.str());
  util::write_file(work / "report.md", md.str());

  std::map<std::string, std::string> artifacts;
  for (const auto& e : fs::recursive_directory_iterator(work)) {
    if (e.is_regular_file()) artifacts[fs::relative(e.path(), work).string()] = util::read_file(e.path());
  }
  return artifacts;
}

Outcome end_to_end_determinism() {
  const fs::path fixture = fs::path(STEVAL_FIXTURES) / "mini";
  const fs::path base = fs::temp_directory_path() / "steval_acceptance";
  const auto t0 = std::chrono::steady_clock::now();
  auto a = pipeline(fixture, base / "run1");
  auto b = pipeline(fixture, base / "run2");
  const double secs = seconds_since(t0);
  fs::remove_all(base);

  std::size_t differing = 0;
  for (const auto& [path, content] : a) {
    auto it = b.find(path);
    if (it == b.end() || it->second != content) ++differing;
  }
  if (a.size() != b.size()) differing += 1;
  const bool complete = a.count("report.md") && a.count("wmt.tsv") && a.count("campaign/records.tsv");
  std::ostringstream d;
  d << a.size() << " artifacts, " << differing << " differing, " << util::format_fixed(secs, 2) << " s for two runs";
  return {complete && differing == 0 && secs < kEndToEndSeconds, d.str()};
}

}  // namespace

int main() {
  report("resegmentation optimality", resegmentation_optimality);
  report("decomposition identity", decomposition_identity);
  report("memory-mode equivalence", memory_mode_equivalence);
  report("chrF correctness", chrf_correctness);
  report("statistics correctness", statistics_correctness);
  report("affine/monotone invariance", invariance);
  report("end-to-end determinism", end_to_end_determinism);
  std::cout << "N/A   reproduction of published DA correlations  (requires the released DA judgments and "
               "submitted system outputs, which are not bundled)"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
