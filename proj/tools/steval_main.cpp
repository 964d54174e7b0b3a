// steval: speech translation evaluation toolkit.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "steval/align.hpp"
#include "steval/campaign.hpp"
#include "steval/da.hpp"
#include "steval/error.hpp"
#include "steval/evalset.hpp"
#include "steval/metrics.hpp"
#include "steval/stats.hpp"
#include "steval/util.hpp"

namespace fs = std::filesystem;
using namespace steval;

namespace {

// Writes to `path`, or to stdout when it is empty or "-".
void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    util::write_file(path, content);
  }
}

std::string pick_reference_set(const evalset::TestSet& ts, const std::string& requested) {
  if (requested.empty()) return ts.reference_sets.front();
  for (const auto& r : ts.reference_sets) {
    if (r == requested) return r;
  }
  throw ValidationError("reference set '" + requested + "' not in test set (have: " + util::join(ts.reference_sets, ", ") +
                        ")");
}

text::TokenizationLevel pick_level(const evalset::TestSet& ts, const std::string& requested) {
  return requested.empty() ? metrics::default_level_for(ts.condition.langs.target) : text::parse_level(requested);
}

std::vector<evalset::SystemOutput> pick_systems(const evalset::TestSet& ts, const std::vector<std::string>& ids) {
  std::vector<evalset::SystemOutput> out;
  if (ids.empty()) {
    for (const auto& [id, sys] : ts.systems) out.push_back(sys);
  } else {
    for (const auto& id : ids) {
      auto it = ts.systems.find(id);
      if (it == ts.systems.end()) throw ValidationError("system '" + id + "' is not registered in the test set");
      out.push_back(it->second);
    }
  }
  if (out.empty()) throw ValidationError("test set registers no systems");
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// ---------------------------------------------------------------- reseg

struct ResegArgs {
  std::string ref_manifest;
  std::string hyp;
  std::string doc;
  std::vector<std::string> systems;
  std::string ref_set;
  std::string level;
  std::string out;
  std::optional<std::size_t> band;
};

void print_alignment_row(const std::string& system, const align::DocumentAlignment& a) {
  std::cout << system << '\t' << a.doc_id << '\t' << a.distance << '\t' << a.ref_tokens << '\t'
            << util::format_double(a.wer()) << (a.approximate ? "\tapprox" : "") << '\n';
}

int run_reseg(const ResegArgs& args) {
  evalset::TestSet ts = evalset::load_testset(args.ref_manifest);
  const std::string ref_set = pick_reference_set(ts, args.ref_set);
  const text::TokenizationLevel level = pick_level(ts, args.level);
  align::ResegmentOptions opts;
  opts.band = args.band;

  std::cout << "system_id\tdoc_id\tdistance\tref_tokens\twer\n";
  if (!args.hyp.empty()) {
    std::string doc_id = args.doc;
    if (doc_id.empty()) {
      if (ts.documents.size() != 1) throw ValidationError("--doc is required when the test set has several documents");
      doc_id = ts.documents.front().doc_id;
    }
    evalset::SystemOutput sys = evalset::load_system_output({"hyp", {{doc_id, args.hyp}}}, ts.condition, ts);
    auto lines = sys.documents.at(doc_id);
    align::DocumentAlignment a = align::resegment_document(lines, ts.document(doc_id), ref_set, level, opts);
    evalset::write_hypothesis_file(args.out, a.segments, true);
    print_alignment_row("hyp", a);
    return 0;
  }

  evalset::TestSet out = ts;
  out.systems.clear();
  for (const auto& sys : pick_systems(ts, args.systems)) {
    std::vector<align::DocumentAlignment> report;
    out.systems[sys.system_id] = align::resegment_all(sys, ts, ref_set, level, opts, &report);
    for (const auto& a : report) print_alignment_row(sys.system_id, a);
  }
  evalset::save_testset(out, args.out);
  return 0;
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string testset;
  std::vector<std::string> systems;
  std::string metric = "chrf";
  std::string ref_set;
  std::string granularity = "system";
  std::string level;
  std::string out;
};

int run_score(const ScoreArgs& args) {
  evalset::TestSet ts = evalset::load_testset(args.testset);
  auto systems = pick_systems(ts, args.systems);
  metrics::MetricConfig cfg;
  cfg.metric = metrics::parse_metric(args.metric);
  if (!args.level.empty()) cfg.bleu_level = text::parse_level(args.level);
  const std::string ref_set = pick_reference_set(ts, args.ref_set);
  metrics::ScoreTable table = metrics::parse_granularity(args.granularity) == metrics::Granularity::Segment
                                  ? metrics::score_segments(ts, systems, cfg, ref_set)
                                  : metrics::score_systems(ts, systems, cfg, ref_set);
  std::ostringstream os;
  metrics::write_score_tables(os, std::span(&table, 1));
  emit(args.out, os.str());
  return 0;
}

// ---------------------------------------------------------------- campaign

struct CampaignArgs {
  std::string dir;
  std::string testset;
  std::size_t k = 1000;
  std::uint64_t seed = 0;
  std::uint64_t shuffle_seed = 0;
  std::vector<std::string> annotators;
  std::vector<std::string> systems;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::string scores;
  std::string mode = "raw";
  std::string out;
};

fs::path campaign_dir(const CampaignArgs& args) {
  if (!args.dir.empty()) return args.dir;
  if (const char* env = std::getenv("STEVAL_CAMPAIGN_DIR"); env && *env) return env;
  throw ValidationError("no campaign directory given (argument or STEVAL_CAMPAIGN_DIR)");
}

int run_campaign_build(const CampaignArgs& args) {
  evalset::TestSet ts = evalset::load_testset(args.testset);
  campaign::CampaignConfig cfg;
  cfg.testset = args.testset;
  cfg.k = args.k;
  cfg.seed = args.seed;
  cfg.shuffle_seed = args.shuffle_seed;
  cfg.annotators = args.annotators;
  cfg.systems = args.systems;
  auto c = campaign::Campaign::build(ts, cfg, campaign_dir(args));
  std::cout << "segments\t" << c->plan().segment_ids.size() << '\n';
  std::cout << "systems\t" << c->config().systems.size() << '\n';
  std::cout << "tasks\t" << c->tasks().size() << '\n';
  return 0;
}

int run_campaign_serve(const CampaignArgs& args) {
  auto c = campaign::Campaign::load(campaign_dir(args));
  std::optional<fs::path> static_dir;
  if (!args.static_dir.empty()) static_dir = args.static_dir;
  campaign::CampaignServer server(*c, static_dir);
  int port = server.bind(args.host, args.port);
  std::cout << "listening on http://" << args.host << ':' << port << std::endl;
  server.listen();
  return 0;
}

int run_campaign_ingest(const CampaignArgs& args) {
  auto c = campaign::Campaign::load(campaign_dir(args));
  da::IngestResult res = c->ingest(args.scores);
  for (const auto& r : res.rejected) std::cerr << args.scores << ':' << r.line << ": rejected: " << r.reason << '\n';
  std::cout << "accepted\t" << res.accepted.size() << '\n' << "rejected\t" << res.rejected.size() << '\n';
  return 0;
}

int run_campaign_export(const CampaignArgs& args) {
  auto c = campaign::Campaign::load(campaign_dir(args));
  auto records = c->records();
  if (args.out.empty() || args.out == "-") {
    throw ValidationError("export needs --out FILE");
  }
  da::export_wmt(records, c->plan().condition, args.out);
  return 0;
}

int run_campaign_aggregate(const CampaignArgs& args) {
  auto c = campaign::Campaign::load(campaign_dir(args));
  auto records = c->records();
  da::AggregateResult agg =
      da::aggregate_system_da(records, da::parse_aggregation(args.mode), c->plan().condition, c->config().systems);
  print_warnings(agg.warnings);
  std::ostringstream os;
  metrics::write_score_tables(os, std::span(&agg.table, 1));
  emit(args.out, os.str());
  return 0;
}

// ---------------------------------------------------------------- correlate

struct CorrelateArgs {
  std::vector<std::string> human;
  std::vector<std::string> metric;
  bool average_domains = false;
  std::string pool;
  bool center = false;
  std::string format = "tsv";
  std::string out;
};

std::vector<metrics::ScoreTable> load_tables(const std::vector<std::string>& paths) {
  std::vector<metrics::ScoreTable> out;
  for (const auto& p : paths) {
    for (auto& t : metrics::read_score_tables(p)) {
      if (t.granularity != metrics::Granularity::System) {
        std::cerr << "warning: " << p << ": skipping segment-level " << t.method << " table\n";
        continue;
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

// Domain-averages tables sharing (method, task, language pair, reference set).
std::vector<metrics::ScoreTable> average_by_domain(const std::vector<metrics::ScoreTable>& tables) {
  using Key = std::tuple<std::string, evalset::Task, evalset::LanguagePair, std::string>;
  std::map<Key, std::vector<metrics::ScoreTable>> groups;
  std::vector<Key> order;
  for (const auto& t : tables) {
    Key key{t.method, t.condition.task, t.condition.langs, t.reference_set.value_or("")};
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(t);
  }
  std::vector<metrics::ScoreTable> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    if (g.size() < 2) {
      std::cerr << "warning: " << std::get<0>(key) << " under " << g.front().condition.str()
                << " has a single domain; not averaged\n";
      continue;
    }
    out.push_back(stats::average_domains(g));
  }
  return out;
}

std::vector<evalset::Condition> provenance(const metrics::ScoreTable& t) {
  return t.sources.empty() ? std::vector<evalset::Condition>{t.condition} : t.sources;
}

std::string outside_axis_key(const evalset::Condition& c, stats::PoolAxis axis) {
  switch (axis) {
    case stats::PoolAxis::Task:
      return c.langs.str() + "/" + std::string(evalset::to_string(c.domain));
    case stats::PoolAxis::Domain:
      return std::string(evalset::to_string(c.task)) + "/" + c.langs.str();
    case stats::PoolAxis::Language:
      return std::string(evalset::to_string(c.task)) + "/" + std::string(evalset::to_string(c.domain));
  }
  return {};
}

std::vector<stats::CorrelationResult> pooled(const std::vector<metrics::ScoreTable>& human,
                                             const std::vector<metrics::ScoreTable>& metric, stats::PoolAxis axis,
                                             const stats::PoolOptions& opts) {
  using HumanKey = std::pair<std::string, std::string>;  // method, outside-axis key
  std::map<HumanKey, std::vector<metrics::ScoreTable>> hgroups;
  std::vector<HumanKey> horder;
  for (const auto& h : human) {
    HumanKey key{h.method, outside_axis_key(h.condition, axis)};
    if (!hgroups.count(key)) horder.push_back(key);
    hgroups[key].push_back(h);
  }
  using MetricKey = std::pair<std::string, std::string>;  // method, reference set
  std::vector<MetricKey> morder;
  for (const auto& m : metric) {
    MetricKey key{m.method, m.reference_set.value_or("")};
    if (std::find(morder.begin(), morder.end(), key) == morder.end()) morder.push_back(key);
  }

  std::vector<stats::CorrelationResult> out;
  for (const auto& hk : horder) {
    const auto& hs = hgroups[hk];
    if (hs.size() < 2) {
      std::cerr << "warning: " << hk.first << " under " << hs.front().condition.str() << " has nothing to pool with\n";
      continue;
    }
    for (const auto& mk : morder) {
      std::vector<metrics::ScoreTable> ms;
      for (const auto& m : metric) {
        if (m.method != mk.first || m.reference_set.value_or("") != mk.second) continue;
        for (const auto& h : hs) {
          if (h.condition == m.condition) ms.push_back(m);
        }
      }
      if (ms.empty()) continue;
      out.push_back(stats::pool_conditions(hs, ms, axis, opts));
    }
  }
  return out;
}

int run_correlate(const CorrelateArgs& args) {
  std::vector<metrics::ScoreTable> human = load_tables(args.human);
  std::vector<metrics::ScoreTable> metric = load_tables(args.metric);
  if (human.empty()) throw ValidationError("no system-level human tables");
  if (metric.empty()) throw ValidationError("no system-level metric tables");
  if (args.average_domains && !args.pool.empty()) {
    throw ValidationError("--average-domains and --pool cannot be combined");
  }

  std::vector<stats::CorrelationResult> results;
  if (!args.pool.empty()) {
    results = pooled(human, metric, stats::parse_pool_axis(args.pool), {args.center});
  } else {
    if (args.average_domains) {
      human = average_by_domain(human);
      metric = average_by_domain(metric);
    }
    for (const auto& h : human) {
      for (const auto& m : metric) {
        if (provenance(h) == provenance(m)) results.push_back(stats::correlate(h, m));
      }
    }
  }
  if (results.empty()) throw ValidationError("no metric table matches the conditions of the human tables");
  for (const auto& r : results) print_warnings(r.warnings);

  std::ostringstream os;
  stats::render_report(results, stats::parse_report_format(args.format), os);
  emit(args.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech translation evaluation: resegmentation, metrics, DA campaigns, correlation"};
  app.require_subcommand(1);

  ResegArgs reseg;
  auto* reseg_cmd = app.add_subcommand("reseg", "Resegment hypotheses onto the reference segmentation");
  reseg_cmd->add_option("--ref-manifest", reseg.ref_manifest, "Test set manifest (file or directory)")->required();
  auto* hyp_opt = reseg_cmd->add_option("--hyp", reseg.hyp, "Single hypothesis file for one document");
  reseg_cmd->add_option("--doc", reseg.doc, "Document id for --hyp")->needs(hyp_opt);
  reseg_cmd->add_option("--system", reseg.systems, "Registered systems to resegment (default: all)")->excludes(hyp_opt);
  reseg_cmd->add_option("--ref-set", reseg.ref_set, "Reference set (default: first in manifest)");
  reseg_cmd->add_option("--level", reseg.level, "word|char (default: char for zh/ja targets, word otherwise)");
  reseg_cmd->add_option("--out", reseg.out, "Output file with --hyp, else output test set directory")->required();
  reseg_cmd->add_option("--band", reseg.band, "Diagonal band half-width; approximate");

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score resegmented systems with chrF or BLEU");
  score_cmd->add_option("--testset", score.testset, "Test set manifest")->required();
  score_cmd->add_option("--systems", score.systems, "Systems to score (default: all)");
  score_cmd->add_option("--metric", score.metric, "chrf|bleu");
  score_cmd->add_option("--ref-set", score.ref_set, "Reference set (default: first in manifest)");
  score_cmd->add_option("--granularity", score.granularity, "system|segment");
  score_cmd->add_option("--level", score.level, "BLEU tokenization: word|char");
  score_cmd->add_option("--out", score.out, "Score TSV (default: stdout)");

  CampaignArgs camp;
  auto* camp_cmd = app.add_subcommand("campaign", "Direct assessment campaigns");
  camp_cmd->require_subcommand(1);
  auto add_dir = [&camp](CLI::App* cmd) {
    cmd->add_option("dir", camp.dir, "Campaign directory (default: $STEVAL_CAMPAIGN_DIR)");
  };
  auto* build_cmd = camp_cmd->add_subcommand("build", "Sample segments and write tasks");
  add_dir(build_cmd);
  build_cmd->add_option("--testset", camp.testset, "Test set manifest with resegmented systems")->required();
  build_cmd->add_option("--k", camp.k, "Segments to sample")->required();
  build_cmd->add_option("--seed", camp.seed, "Sampling seed")->required();
  build_cmd->add_option("--annotators", camp.annotators, "Annotator ids")->required()->delimiter(',');
  build_cmd->add_option("--shuffle-seed", camp.shuffle_seed, "Task shuffle seed")->required();
  build_cmd->add_option("--systems", camp.systems, "Systems to include (default: all)")->delimiter(',');
  auto* serve_cmd = camp_cmd->add_subcommand("serve", "Serve the annotation JSON API");
  add_dir(serve_cmd);
  serve_cmd->add_option("--host", camp.host, "Bind address");
  serve_cmd->add_option("--port", camp.port, "Port (0 picks a free one)");
  serve_cmd->add_option("--static", camp.static_dir, "Directory served at /");
  auto* ingest_cmd = camp_cmd->add_subcommand("ingest", "Validate and append a score file");
  add_dir(ingest_cmd);
  ingest_cmd->add_option("--scores", camp.scores, "TSV with annotator_id, system_id, segment_id, score")->required();
  auto* export_cmd = camp_cmd->add_subcommand("export", "Write records as WMT-style TSV");
  add_dir(export_cmd);
  export_cmd->add_option("--out", camp.out, "Output TSV")->required();
  auto* agg_cmd = camp_cmd->add_subcommand("aggregate", "System-level DA score table");
  add_dir(agg_cmd);
  agg_cmd->add_option("--mode", camp.mode, "raw|z");
  agg_cmd->add_option("--out", camp.out, "Score TSV (default: stdout)");

  CorrelateArgs corr;
  auto* corr_cmd = app.add_subcommand("correlate", "Correlate human and metric system scores");
  corr_cmd->add_option("--human", corr.human, "Human score TSV")->required();
  corr_cmd->add_option("--metric", corr.metric, "Metric score TSVs")->required();
  corr_cmd->add_flag("--average-domains", corr.average_domains, "Average each system over domains first");
  corr_cmd->add_option("--pool", corr.pool, "Pool conditions along task|domain|language");
  corr_cmd->add_flag("--center", corr.center, "Center each condition before pooling");
  corr_cmd->add_option("--format", corr.format, "tsv|md");
  corr_cmd->add_option("--out", corr.out, "Report file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (reseg_cmd->parsed()) {
      return run_reseg(reseg);
    }
    if (score_cmd->parsed()) return run_score(score);
    if (build_cmd->parsed()) return run_campaign_build(camp);
    if (serve_cmd->parsed()) return run_campaign_serve(camp);
    if (ingest_cmd->parsed()) return run_campaign_ingest(camp);
    if (export_cmd->parsed()) return run_campaign_export(camp);
    if (agg_cmd->parsed()) return run_campaign_aggregate(camp);
    if (corr_cmd->parsed()) return run_correlate(corr);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
