#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "steval/error.hpp"
#include "steval/stats.hpp"

using namespace steval;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(50, 20);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

metrics::ScoreTable table(const std::string& method, const std::string& cond_task, const std::string& langs,
                          const std::string& domain, std::vector<std::pair<std::string, double>> rows) {
  metrics::ScoreTable t;
  t.method = method;
  t.condition = evalset::make_condition(cond_task, langs, domain);
  for (auto& [sys, score] : rows) t.rows.push_back({sys, "", score});
  return t;
}

}  // namespace

TEST(IncompleteBeta, ClosedForms) {
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    EXPECT_NEAR(stats::incomplete_beta(1, 1, x), x, 1e-14);
    EXPECT_NEAR(stats::incomplete_beta(3, 1, x), x * x * x, 1e-14);
    EXPECT_NEAR(stats::incomplete_beta(1, 2, x), 1 - (1 - x) * (1 - x), 1e-14);
  }
  EXPECT_NEAR(stats::incomplete_beta(4.5, 4.5, 0.5), 0.5, 1e-14);
  // a = 1/2, b = 1/2: (2/pi) asin(sqrt(x))
  EXPECT_NEAR(stats::incomplete_beta(0.5, 0.5, 0.3), 2 / M_PI * std::asin(std::sqrt(0.3)), 1e-12);
}

TEST(PValue, MatchesNumericalIntegration) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.999, 0.999);
  for (int i = 0; i < 200; ++i) {
    double r = u(rng);
    std::size_t n = 3 + rng() % 30;
    ASSERT_NEAR(stats::correlation_p_value(r, n), oracle::correlation_p(r, n), 1e-9) << "r=" << r << " n=" << n;
  }
  EXPECT_DOUBLE_EQ(stats::correlation_p_value(0.0, 10), 1.0);
  EXPECT_DOUBLE_EQ(stats::correlation_p_value(1.0, 10), 0.0);
  EXPECT_DOUBLE_EQ(stats::correlation_p_value(0.3, 2), 1.0);
}

// Small-sample coefficients and their p-values to two decimals.
TEST(PValue, SmallSampleTwoDecimalValues) {
  struct Row {
    double r;
    std::size_t n;
    double p;
  };
  const Row rows[] = {{0.5, 3, 0.67},  {0.2, 4, 0.80},       {0.9, 5, 0.04},  {0.6, 5, 0.28},
                      {0.5, 5, 0.39},  {0.75, 7, 0.05},      {5.0 / 7, 7, 0.07}, {11.0 / 14, 8, 0.02}};
  for (const auto& row : rows) {
    EXPECT_NEAR(stats::correlation_p_value(row.r, row.n), row.p, 0.005) << row.r << " " << row.n;
  }
}

TEST(Pearson, MatchesCovarianceSums) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 3 + rng() % 18;
    auto x = random_vector(rng, n);
    auto y = random_vector(rng, n);
    for (std::size_t k = 0; k < n; ++k) y[k] += (i % 3) * x[k];
    auto c = stats::pearson(x, y);
    double expected = oracle::pearson(x, y);
    ASSERT_NEAR(*c.value, expected, 1e-9);
    ASSERT_NEAR(*c.p, oracle::correlation_p(expected, n), 1e-9);
  }
}

TEST(Spearman, MatchesRankOracleWithTies) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 3 + rng() % 18;
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = static_cast<double>(rng() % 6);
      y[k] = static_cast<double>(rng() % 6) + 0.5 * x[k];
    }
    if (oracle::ranks(x) == std::vector<double>(n, (n + 1) / 2.0)) continue;
    if (oracle::ranks(y) == std::vector<double>(n, (n + 1) / 2.0)) continue;
    auto c = stats::spearman(x, y);
    double expected = oracle::spearman(x, y);
    ASSERT_NEAR(*c.value, expected, 1e-9);
    ASSERT_NEAR(*c.p, oracle::correlation_p(expected, n), 1e-9);
  }
}

TEST(Spearman, KnownTiedExample) {
  std::vector<double> x = {1, 2, 3};
  std::vector<double> y = {10, 10, 20};
  auto c = stats::spearman(x, y);
  EXPECT_NEAR(*c.value, std::sqrt(3.0) / 2, 1e-15);
  EXPECT_NEAR(*c.p, 1.0 / 3, 1e-12);
  EXPECT_EQ(stats::average_ranks(y), (std::vector<double>{1.5, 1.5, 3}));
}

TEST(Pearson, KnownExample) {
  std::vector<double> x = {1, 2, 3, 4};
  std::vector<double> y = {1, 3, 2, 4};
  auto c = stats::pearson(x, y);
  EXPECT_NEAR(*c.value, 0.8, 1e-15);
  EXPECT_NEAR(*c.p, 0.2, 1e-12);
}

TEST(Degenerate, TwoPoints) {
  std::vector<double> x = {71.2, 64.0};
  std::vector<double> y = {30.1, 25.3};
  auto p = stats::pearson(x, y);
  EXPECT_DOUBLE_EQ(*p.value, 1.0);
  EXPECT_DOUBLE_EQ(*p.p, 1.0);
  auto s = stats::spearman(x, y);
  EXPECT_DOUBLE_EQ(*s.value, 1.0);
  EXPECT_FALSE(s.p.has_value());
  std::vector<double> down = {1, 2};
  EXPECT_DOUBLE_EQ(*stats::pearson(x, down).value, -1.0);
}

TEST(Degenerate, ConstantAndTooShort) {
  std::vector<double> c = {5, 5, 5};
  std::vector<double> v = {1, 2, 3};
  EXPECT_FALSE(stats::pearson(c, v).value.has_value());
  EXPECT_FALSE(stats::spearman(v, c).value.has_value());
  std::vector<double> one = {1};
  EXPECT_THROW(stats::pearson(one, one), ValidationError);
  std::vector<double> two = {1, 2};
  EXPECT_THROW(stats::pearson(two, v), ValidationError);
}

TEST(Invariance, PearsonUnderPositiveAffine) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> scale(0.01, 100);
  std::uniform_real_distribution<double> shift(-1000, 1000);
  auto x = random_vector(rng, 12);
  auto y = random_vector(rng, 12);
  const double base = *stats::pearson(x, y).value;
  for (int i = 0; i < 50; ++i) {
    double a = scale(rng);
    double b = shift(rng);
    std::vector<double> t = x;
    for (auto& v : t) v = a * v + b;
    ASSERT_NEAR(*stats::pearson(t, y).value, base, 1e-9);
  }
}

TEST(Invariance, SpearmanUnderMonotone) {
  std::mt19937_64 rng(22);
  auto x = random_vector(rng, 15);
  auto y = random_vector(rng, 15);
  const double base = *stats::spearman(x, y).value;
  std::uniform_real_distribution<double> u(0.1, 3);
  for (int i = 0; i < 50; ++i) {
    double a = u(rng);
    double b = u(rng);
    std::vector<double> t = x;
    for (auto& v : t) v = a * std::exp(v / 40.0) + b * v * 0.01 + std::cbrt(v);
    ASSERT_NEAR(*stats::spearman(t, y).value, base, 1e-9);
  }
}

TEST(Permutation, ExactSmallSample) {
  stats::PairedScores pairs{{"a", "b", "c"}, {1, 2, 3}, {1, 2, 3}, "x", "y", {}, std::nullopt};
  // only the identity and the reversal reach |r| = 1
  EXPECT_NEAR(stats::permutation_p(pairs, stats::Statistic::Pearson, 0), 2.0 / 6, 1e-15);
  EXPECT_NEAR(stats::permutation_p(pairs, stats::Statistic::Spearman, 0), 2.0 / 6, 1e-15);
}

TEST(Permutation, MonteCarloIsSeededAndClose) {
  std::mt19937_64 rng(3);
  stats::PairedScores pairs;
  pairs.x = random_vector(rng, 14);
  pairs.y = pairs.x;
  std::normal_distribution<double> noise(0, 25);
  for (auto& v : pairs.y) v += noise(rng);
  for (int i = 0; i < 14; ++i) pairs.labels.push_back("s" + std::to_string(i));
  double a = stats::permutation_p(pairs, stats::Statistic::Pearson, 20000, 1);
  double b = stats::permutation_p(pairs, stats::Statistic::Pearson, 20000, 1);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a, *stats::pearson(pairs).p, 0.03);
}

TEST(Permutation, UnderNullIsRoughlyUniform) {
  // Kolmogorov-Smirnov distance of exact permutation p-values under independence
  std::mt19937_64 rng(44);
  std::vector<double> ps;
  for (int i = 0; i < 300; ++i) {
    stats::PairedScores pairs;
    pairs.x = random_vector(rng, 7);
    pairs.y = random_vector(rng, 7);
    for (int k = 0; k < 7; ++k) pairs.labels.push_back(std::to_string(k));
    ps.push_back(stats::permutation_p(pairs, stats::Statistic::Pearson, 0));
  }
  std::sort(ps.begin(), ps.end());
  double d = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    d = std::max(d, std::fabs(ps[i] - static_cast<double>(i + 1) / ps.size()));
    d = std::max(d, std::fabs(ps[i] - static_cast<double>(i) / ps.size()));
  }
  EXPECT_LT(d, 1.63 / std::sqrt(300.0));  // 1% critical value
}

TEST(Correlate, JoinsOnSystemAndWarns) {
  auto h = table("da", "offline", "en-de", "TED", {{"a", 70}, {"b", 60}, {"c", 50}, {"z", 10}});
  auto m = table("chrf", "offline", "en-de", "TED", {{"a", 55}, {"b", 54}, {"c", 40}, {"q", 1}});
  m.reference_set = "new";
  auto r = stats::correlate(h, m);
  EXPECT_EQ(r.n, 3u);
  EXPECT_EQ(r.method_x, "da");
  EXPECT_EQ(r.method_y, "chrf");
  EXPECT_EQ(r.reference_set, "new");
  EXPECT_EQ(r.warnings.size(), 2u);
  EXPECT_NEAR(*r.spearman_r, 1.0, 1e-15);
  EXPECT_NEAR(*r.pearson_rho, oracle::pearson({70, 60, 50}, {55, 54, 40}), 1e-12);

  auto lonely = table("chrf", "offline", "en-de", "TED", {{"a", 1}, {"y", 2}});
  EXPECT_THROW(stats::correlate(h, lonely), ValidationError);
}

TEST(Correlate, SignificanceFollowsThreshold) {
  stats::PairedScores pairs{{"a", "b", "c", "d", "e"}, {1, 2, 3, 4, 5}, {1.1, 2.3, 2.9, 4.2, 5.1}, "da", "chrf",
                            {},
                            std::nullopt};
  auto r = stats::correlate(pairs);
  EXPECT_TRUE(r.significant_pearson);
  EXPECT_EQ(r.significant_pearson, *r.pearson_p < stats::kSignificanceLevel);
  stats::PairedScores weak{{"a", "b", "c"}, {1, 2, 3}, {2, 1, 3}, "da", "chrf", {}, std::nullopt};
  EXPECT_FALSE(stats::correlate(weak).significant_spearman);
}

TEST(PairedScores, Validation) {
  stats::PairedScores p{{"a", "a"}, {1, 2}, {1, 2}, "x", "y", {}, std::nullopt};
  EXPECT_THROW(p.validate(), ValidationError);
  stats::PairedScores q{{"a", "b"}, {1, 2}, {1}, "x", "y", {}, std::nullopt};
  EXPECT_THROW(q.validate(), ValidationError);
}

TEST(AverageDomains, PerSystemMean) {
  auto ted = table("da", "offline", "en-de", "TED", {{"a", 70}, {"b", 60}});
  auto acl = table("da", "offline", "en-de", "ACL", {{"a", 50}, {"b", 61}});
  std::vector<metrics::ScoreTable> both = {ted, acl};
  auto avg = stats::average_domains(both);
  auto s = avg.system_scores();
  EXPECT_DOUBLE_EQ(s.at("a"), 60);
  EXPECT_DOUBLE_EQ(s.at("b"), 60.5);
  EXPECT_EQ(avg.sources.size(), 2u);

  auto missing = table("da", "offline", "en-de", "ACL", {{"a", 50}});
  std::vector<metrics::ScoreTable> bad = {ted, missing};
  EXPECT_THROW(stats::average_domains(bad), ValidationError);
  std::vector<metrics::ScoreTable> same = {ted, ted};
  EXPECT_THROW(stats::average_domains(same), ValidationError);
}

TEST(Pool, StacksConditionsAndSumsN) {
  auto h1 = table("da", "offline", "en-de", "TED", {{"a", 70}, {"b", 60}, {"c", 50}});
  auto h2 = table("da", "simultaneous", "en-de", "TED", {{"a", 40}, {"b", 45}});
  auto m1 = table("chrf", "offline", "en-de", "TED", {{"a", 55}, {"b", 50}, {"c", 45}});
  auto m2 = table("chrf", "simultaneous", "en-de", "TED", {{"a", 30}, {"b", 33}});
  std::vector<metrics::ScoreTable> human = {h1, h2};
  std::vector<metrics::ScoreTable> metric = {m2, m1};
  auto r = stats::pool_conditions(human, metric, stats::PoolAxis::Task);
  EXPECT_EQ(r.n, 5u);
  EXPECT_EQ(r.conditions.size(), 2u);
  EXPECT_NEAR(*r.pearson_rho, oracle::pearson({70, 60, 50, 40, 45}, {55, 50, 45, 30, 33}), 1e-12);
  EXPECT_THROW(stats::pool_conditions(human, metric, stats::PoolAxis::Domain), ValidationError);
  std::vector<metrics::ScoreTable> one_metric = {m1};
  EXPECT_THROW(stats::pool_conditions(human, one_metric, stats::PoolAxis::Task), ValidationError);
}

TEST(Pool, CenteringRemovesConditionOffsets) {
  auto h1 = table("da", "offline", "en-de", "TED", {{"a", 70}, {"b", 60}, {"c", 50}});
  auto h2 = table("da", "simultaneous", "en-de", "TED", {{"a", 40}, {"b", 45}, {"c", 20}});
  auto m1 = table("chrf", "offline", "en-de", "TED", {{"a", 55}, {"b", 50}, {"c", 45}});
  auto m2 = table("chrf", "simultaneous", "en-de", "TED", {{"a", 130}, {"b", 133}, {"c", 110}});
  std::vector<metrics::ScoreTable> human = {h1, h2};
  std::vector<metrics::ScoreTable> metric = {m1, m2};
  auto plain = stats::pool_conditions(human, metric, stats::PoolAxis::Task);
  auto centered = stats::pool_conditions(human, metric, stats::PoolAxis::Task, {true});
  std::vector<double> x = {10, 0, -10, 5, 10, -15};
  const double m = 373.0 / 3;
  std::vector<double> y = {5, 0, -5, 130 - m, 133 - m, 110 - m};
  EXPECT_NEAR(*centered.pearson_rho, oracle::pearson(x, y), 1e-12);
  EXPECT_LT(*plain.pearson_rho, 0.0);
}

TEST(Report, MarkdownMarksSignificanceAndUndefinedValues) {
  stats::CorrelationResult sig;
  sig.method_x = "da";
  sig.method_y = "chrf";
  sig.conditions = {evalset::make_condition("offline", "en-de", "TED")};
  sig.reference_set = "new";
  sig.n = 10;
  sig.pearson_rho = 0.991;
  sig.pearson_p = 0.0001;
  sig.spearman_r = 0.5;
  sig.spearman_p = 0.14;
  sig.significant_pearson = true;
  stats::CorrelationResult two;
  two.method_x = "da";
  two.method_y = "chrf";
  two.conditions = {evalset::make_condition("simultaneous", "en-zh", "TED")};
  two.n = 2;
  two.pearson_rho = 1.0;
  two.pearson_p = 1.0;
  two.spearman_r = 1.0;
  std::vector<stats::CorrelationResult> rs = {sig, two};
  std::ostringstream md;
  stats::render_report(rs, stats::ReportFormat::Markdown, md);
  const std::string s = md.str();
  EXPECT_NE(s.find("| offline | en-de | TED | da | chrf | new | 10 | **0.99** (p=0.00) | 0.50 (p=0.14) |"),
            std::string::npos)
      << s;
  EXPECT_NE(s.find("| 2 | 1.00 (p=1.00) | 1.00 (p=n/a) |"), std::string::npos) << s;

  std::ostringstream tsv;
  stats::render_report(rs, stats::ReportFormat::TSV, tsv);
  EXPECT_EQ(tsv.str().substr(0, tsv.str().find('\n')),
            "task\tlang_pair\tdomain\tmethod_x\tmethod_y\treference_set\tn\tpearson_rho\tpearson_p\tspearman_r\t"
            "spearman_p\tsig_pearson\tsig_spearman");
  EXPECT_NE(tsv.str().find("\t2\t1\t1\t1\tn/a\tfalse\tfalse\n"), std::string::npos) << tsv.str();
}
