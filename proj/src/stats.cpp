#include "steval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "steval/error.hpp"
#include "steval/util.hpp"

namespace steval::stats {

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

void check_inputs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
  if (x.size() < 2) throw ValidationError("correlation needs at least 2 points");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ValidationError("correlation input is not finite");
  }
}

// Mean-centered copy scaled to unit norm; empty when the input is constant.
std::vector<double> standardized(std::span<const double> v) {
  if (is_constant(v)) return {};
  long double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<long double>(v.size());
  std::vector<double> out(v.size());
  long double norm = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    long double c = v[i] - mean;
    norm += c * c;
  }
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>((v[i] - mean) / norm);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

double clamp_unit(double r) { return std::clamp(r, -1.0, 1.0); }

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw ValidationError("incomplete_beta: shape parameters must be positive");
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) return 1.0;
  // df / (df + t^2) simplifies to 1 - r^2
  const double x = 1.0 - r * r;
  if (x <= 0) return 0.0;
  const double df = static_cast<double>(n - 2);
  return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

Coefficient pearson(std::span<const double> x, std::span<const double> y) {
  check_inputs(x, y);
  if (is_constant(x) || is_constant(y)) return {};
  const std::size_t n = x.size();
  long double mx = 0;
  long double my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<long double>(n);
  my /= static_cast<long double>(n);
  long double sxx = 0;
  long double syy = 0;
  long double sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double dx = x[i] - mx;
    const long double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  double r = clamp_unit(static_cast<double>(sxy / std::sqrt(sxx * syy)));
  if (n == 2) return {r < 0 ? -1.0 : 1.0, 1.0};
  return {r, correlation_p_value(r, n)};
}

Coefficient spearman(std::span<const double> x, std::span<const double> y) {
  check_inputs(x, y);
  std::vector<double> rx = average_ranks(x);
  std::vector<double> ry = average_ranks(y);
  Coefficient c = pearson(rx, ry);
  if (x.size() == 2) c.p.reset();
  return c;
}

void PairedScores::validate() const {
  if (x.size() != y.size() || labels.size() != x.size()) {
    throw ValidationError("paired scores: labels/x/y lengths differ");
  }
  if (x.size() < 2) throw ValidationError("paired scores: need at least 2 systems");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) throw ValidationError("paired scores: duplicate label '" + l + "'");
  }
}

Coefficient pearson(const PairedScores& pairs) {
  pairs.validate();
  return pearson(pairs.x, pairs.y);
}

Coefficient spearman(const PairedScores& pairs) {
  pairs.validate();
  return spearman(pairs.x, pairs.y);
}

double permutation_p(const PairedScores& pairs, Statistic statistic, std::size_t iterations, std::uint64_t seed) {
  pairs.validate();
  const std::size_t n = pairs.x.size();
  if (n < 3) throw ValidationError("permutation test needs at least 3 points");
  std::vector<double> x = pairs.x;
  std::vector<double> y = pairs.y;
  if (statistic == Statistic::Spearman) {
    x = average_ranks(x);
    y = average_ranks(y);
  }
  std::vector<double> xs = standardized(x);
  std::vector<double> ys = standardized(y);
  if (xs.empty() || ys.empty()) throw ValidationError("permutation test undefined for constant input");

  const double observed = std::fabs(clamp_unit(dot(xs, ys)));
  const double threshold = observed - 1e-12;
  std::vector<double> permuted(n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto stat = [&]() {
    for (std::size_t i = 0; i < n; ++i) permuted[i] = ys[idx[i]];
    return std::fabs(dot(xs, permuted));
  };

  std::uint64_t hits = 0;
  std::uint64_t total = 0;
  if (n <= 8) {
    do {
      if (stat() >= threshold) ++hits;
      ++total;
    } while (std::next_permutation(idx.begin(), idx.end()));
  } else {
    if (iterations == 0) throw ValidationError("permutation test needs at least one iteration");
    std::mt19937_64 rng(seed);
    for (std::size_t it = 0; it < iterations; ++it) {
      util::shuffle(idx, rng);
      if (stat() >= threshold) ++hits;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

CorrelationResult correlate(const PairedScores& pairs) {
  pairs.validate();
  CorrelationResult res;
  res.method_x = pairs.method_x;
  res.method_y = pairs.method_y;
  res.conditions = pairs.conditions;
  res.reference_set = pairs.reference_set;
  res.n = pairs.x.size();
  Coefficient p = pearson(pairs.x, pairs.y);
  Coefficient s = spearman(pairs.x, pairs.y);
  res.pearson_rho = p.value;
  res.pearson_p = p.p;
  res.spearman_r = s.value;
  res.spearman_p = s.p;
  res.significant_pearson = p.p && *p.p <= kSignificanceLevel;
  res.significant_spearman = s.p && *s.p <= kSignificanceLevel;
  if (!p.value) res.warnings.push_back("Pearson undefined: zero variance");
  if (!s.value) res.warnings.push_back("Spearman undefined: zero variance");
  return res;
}

namespace {

std::vector<evalset::Condition> provenance(const metrics::ScoreTable& t) {
  return t.sources.empty() ? std::vector<evalset::Condition>{t.condition} : t.sources;
}

void require_system_level(const metrics::ScoreTable& t) {
  if (t.granularity != metrics::Granularity::System) {
    throw ValidationError("table '" + t.method + "' (" + t.condition.str() + ") is not system-level");
  }
}

}  // namespace

CorrelationResult correlate(const metrics::ScoreTable& a, const metrics::ScoreTable& b) {
  require_system_level(a);
  require_system_level(b);
  auto sa = a.system_scores();
  auto sb = b.system_scores();
  PairedScores pairs;
  pairs.method_x = a.method;
  pairs.method_y = b.method;
  pairs.conditions = provenance(a);
  for (const auto& c : provenance(b)) {
    if (std::find(pairs.conditions.begin(), pairs.conditions.end(), c) == pairs.conditions.end()) {
      pairs.conditions.push_back(c);
    }
  }
  pairs.reference_set = b.reference_set ? b.reference_set : a.reference_set;
  std::vector<std::string> warnings;
  for (const auto& [sys, score] : sa) {
    auto it = sb.find(sys);
    if (it == sb.end()) {
      warnings.push_back("system '" + sys + "' only in " + a.method + " table");
      continue;
    }
    pairs.labels.push_back(sys);
    pairs.x.push_back(score);
    pairs.y.push_back(it->second);
  }
  for (const auto& [sys, score] : sb) {
    if (!sa.count(sys)) warnings.push_back("system '" + sys + "' only in " + b.method + " table");
  }
  if (pairs.labels.size() < 2) {
    throw ValidationError("tables '" + a.method + "' and '" + b.method + "' share " +
                          std::to_string(pairs.labels.size()) + " systems; need at least 2");
  }
  CorrelationResult res = correlate(pairs);
  res.warnings.insert(res.warnings.begin(), warnings.begin(), warnings.end());
  return res;
}

metrics::ScoreTable average_domains(std::span<const metrics::ScoreTable> tables) {
  if (tables.size() < 2) throw ValidationError("domain averaging needs at least 2 tables");
  const metrics::ScoreTable& first = tables.front();
  std::set<evalset::Domain> domains;
  for (const auto& t : tables) {
    require_system_level(t);
    if (t.method != first.method) throw ValidationError("domain averaging over different methods");
    if (t.condition.task != first.condition.task || t.condition.langs != first.condition.langs) {
      throw ValidationError("domain averaging needs one task and language pair; got " + first.condition.str() +
                            " and " + t.condition.str());
    }
    if (!domains.insert(t.condition.domain).second) {
      throw ValidationError("domain averaging: domain " + std::string(evalset::to_string(t.condition.domain)) +
                            " appears twice");
    }
  }
  const std::vector<std::string> systems = first.system_ids();
  for (const auto& t : tables) {
    if (t.system_ids() != systems) {
      std::vector<std::string> diff;
      std::vector<std::string> other = t.system_ids();
      std::set_symmetric_difference(systems.begin(), systems.end(), other.begin(), other.end(),
                                    std::back_inserter(diff));
      throw ValidationError("domain averaging: systems not scored in every domain: " + util::join(diff, ", "));
    }
  }

  metrics::ScoreTable out;
  out.method = first.method;
  out.granularity = metrics::Granularity::System;
  out.condition = first.condition;
  std::set<std::string> refs;
  for (const auto& t : tables) {
    if (t.reference_set) refs.insert(*t.reference_set);
    out.sources.push_back(t.condition);
  }
  if (!refs.empty()) out.reference_set = util::join({refs.begin(), refs.end()}, "+");
  for (const auto& sys : systems) {
    double sum = 0;
    for (const auto& t : tables) sum += t.system_scores().at(sys);
    out.rows.push_back({sys, "", sum / static_cast<double>(tables.size())});
  }
  return out;
}

PoolAxis parse_pool_axis(std::string_view name) {
  if (name == "task") return PoolAxis::Task;
  if (name == "domain") return PoolAxis::Domain;
  if (name == "language") return PoolAxis::Language;
  throw ValidationError("unknown pool axis '" + std::string(name) + "' (expected task|domain|language)");
}

std::string_view to_string(PoolAxis axis) {
  switch (axis) {
    case PoolAxis::Task:
      return "task";
    case PoolAxis::Domain:
      return "domain";
    case PoolAxis::Language:
      return "language";
  }
  return "?";
}

namespace {

bool same_outside_axis(const evalset::Condition& a, const evalset::Condition& b, PoolAxis axis) {
  switch (axis) {
    case PoolAxis::Task:
      return a.langs == b.langs && a.domain == b.domain;
    case PoolAxis::Domain:
      return a.task == b.task && a.langs == b.langs;
    case PoolAxis::Language:
      return a.task == b.task && a.domain == b.domain;
  }
  return false;
}

}  // namespace

CorrelationResult pool_conditions(std::span<const metrics::ScoreTable> human, std::span<const metrics::ScoreTable> metric,
                                  PoolAxis axis, const PoolOptions& options) {
  if (human.empty()) throw ValidationError("pooling needs at least one condition");
  if (human.size() != metric.size()) {
    throw ValidationError("pooling: " + std::to_string(human.size()) + " human tables vs " +
                          std::to_string(metric.size()) + " metric tables");
  }
  PairedScores pairs;
  pairs.method_x = human.front().method;
  pairs.method_y = metric.front().method;
  std::vector<std::string> warnings;
  std::set<evalset::Condition> seen;
  for (const auto& h : human) {
    require_system_level(h);
    if (h.method != pairs.method_x) throw ValidationError("pooling: human tables mix methods");
    if (!same_outside_axis(h.condition, human.front().condition, axis)) {
      throw ValidationError("pooling over " + std::string(to_string(axis)) + ": conditions " +
                            human.front().condition.str() + " and " + h.condition.str() +
                            " differ along another axis");
    }
    if (!seen.insert(h.condition).second) throw ValidationError("pooling: condition " + h.condition.str() + " repeated");
    auto m = std::find_if(metric.begin(), metric.end(), [&](const auto& t) { return t.condition == h.condition; });
    if (m == metric.end()) throw ValidationError("pooling: no metric table for condition " + h.condition.str());
    require_system_level(*m);
    if (m->method != pairs.method_y) throw ValidationError("pooling: metric tables mix methods");
    if (!pairs.reference_set && m->reference_set) pairs.reference_set = m->reference_set;

    auto hs = h.system_scores();
    auto ms = m->system_scores();
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [sys, score] : hs) {
      auto it = ms.find(sys);
      if (it == ms.end()) {
        warnings.push_back("system '" + sys + "' has no metric score under " + h.condition.str());
        continue;
      }
      pairs.labels.push_back(sys + "@" + h.condition.str());
      xs.push_back(score);
      ys.push_back(it->second);
    }
    if (options.center_per_condition && !xs.empty()) {
      const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
      const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
      for (auto& v : xs) v -= mx;
      for (auto& v : ys) v -= my;
    }
    pairs.x.insert(pairs.x.end(), xs.begin(), xs.end());
    pairs.y.insert(pairs.y.end(), ys.begin(), ys.end());
    pairs.conditions.push_back(h.condition);
  }
  for (const auto& m : metric) {
    if (!seen.count(m.condition)) throw ValidationError("pooling: no human table for condition " + m.condition.str());
  }
  if (pairs.x.size() < 3) {
    throw ValidationError("pooling yields " + std::to_string(pairs.x.size()) + " points; need at least 3");
  }
  CorrelationResult res = correlate(pairs);
  res.warnings.insert(res.warnings.begin(), warnings.begin(), warnings.end());
  if (options.center_per_condition) res.warnings.push_back("per-condition centering applied (extension)");
  return res;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "tsv") return ReportFormat::TSV;
  if (name == "md" || name == "markdown") return ReportFormat::Markdown;
  throw ValidationError("unknown report format '" + std::string(name) + "' (expected tsv|md)");
}

namespace {

template <typename F>
std::string distinct_join(const std::vector<evalset::Condition>& conditions, F field) {
  std::vector<std::string> parts;
  for (const auto& c : conditions) {
    std::string v(field(c));
    if (std::find(parts.begin(), parts.end(), v) == parts.end()) parts.push_back(v);
  }
  return util::join(parts, "+");
}

std::string opt_full(const std::optional<double>& v) { return v ? util::format_double(*v) : "n/a"; }

std::string md_cell(const std::optional<double>& value, const std::optional<double>& p, bool significant) {
  if (!value) return "n/a";
  std::string v = util::format_fixed(*value, 2);
  if (significant) v = "**" + v + "**";
  return v + " (p=" + (p ? util::format_fixed(*p, 2) : std::string("n/a")) + ")";
}

}  // namespace

void render_report(std::span<const CorrelationResult> results, ReportFormat format, std::ostream& out) {
  auto task = [](const evalset::Condition& c) { return evalset::to_string(c.task); };
  auto lang = [](const evalset::Condition& c) { return c.langs.str(); };
  auto domain = [](const evalset::Condition& c) { return evalset::to_string(c.domain); };
  if (format == ReportFormat::TSV) {
    out << "task\tlang_pair\tdomain\tmethod_x\tmethod_y\treference_set\tn\tpearson_rho\tpearson_p\tspearman_r\t"
           "spearman_p\tsig_pearson\tsig_spearman\n";
    for (const auto& r : results) {
      out << distinct_join(r.conditions, task) << '\t' << distinct_join(r.conditions, lang) << '\t'
          << distinct_join(r.conditions, domain) << '\t' << r.method_x << '\t' << r.method_y << '\t'
          << r.reference_set.value_or("") << '\t' << r.n << '\t' << opt_full(r.pearson_rho) << '\t'
          << opt_full(r.pearson_p) << '\t' << opt_full(r.spearman_r) << '\t' << opt_full(r.spearman_p) << '\t'
          << (r.significant_pearson ? "true" : "false") << '\t' << (r.significant_spearman ? "true" : "false") << '\n';
    }
    return;
  }
  out << "| Task | Lang. | Dom. | X | Y | Ref. | n | ρ | r |\n";
  out << "|---|---|---|---|---|---|---:|---|---|\n";
  for (const auto& r : results) {
    out << "| " << distinct_join(r.conditions, task) << " | " << distinct_join(r.conditions, lang) << " | "
        << distinct_join(r.conditions, domain) << " | " << r.method_x << " | " << r.method_y << " | "
        << r.reference_set.value_or("") << " | " << r.n << " | "
        << md_cell(r.pearson_rho, r.pearson_p, r.significant_pearson) << " | "
        << md_cell(r.spearman_r, r.spearman_p, r.significant_spearman) << " |\n";
  }
}

}  // namespace steval::stats
