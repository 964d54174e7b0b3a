#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "steval/evalset.hpp"
#include "steval/metrics.hpp"

namespace steval::stats {

inline constexpr double kSignificanceLevel = 0.05;

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a correlation coefficient `r` over n points under the
/// t approximation t = r sqrt((n-2)/(1-r^2)) with n-2 degrees of freedom.
double correlation_p_value(double r, std::size_t n);

/// Average ranks, ties share the mean of their positions (1-based).
std::vector<double> average_ranks(std::span<const double> values);

/// A coefficient and its p-value; either may be undefined.
struct Coefficient {
  std::optional<double> value;
  std::optional<double> p;
};

/// Sample Pearson coefficient with t-test p. n = 2 gives +-1 with p = 1;
/// a constant vector gives an undefined coefficient. Throws for n < 2.
Coefficient pearson(std::span<const double> x, std::span<const double> y);

/// Pearson on average ranks. n = 2 gives +-1 with undefined p.
Coefficient spearman(std::span<const double> x, std::span<const double> y);

struct PairedScores {
  std::vector<std::string> labels;
  std::vector<double> x;
  std::vector<double> y;
  std::string method_x;
  std::string method_y;
  std::vector<evalset::Condition> conditions;
  std::optional<std::string> reference_set;

  /// Throws ValidationError unless |labels| = |x| = |y| >= 2 and labels are distinct.
  void validate() const;
};

Coefficient pearson(const PairedScores& pairs);
Coefficient spearman(const PairedScores& pairs);

enum class Statistic { Pearson, Spearman };

/// Two-sided permutation p-value: the fraction of permutations of y whose
/// |statistic| reaches the observed one. Exact enumeration for n <= 8,
/// seeded Monte Carlo with `iterations` draws above. Throws for n < 3 or
/// constant input.
double permutation_p(const PairedScores& pairs, Statistic statistic, std::size_t iterations,
                     std::uint64_t seed = 0x5eed);

struct CorrelationResult {
  std::string method_x;
  std::string method_y;
  std::vector<evalset::Condition> conditions;
  std::optional<std::string> reference_set;
  std::size_t n = 0;
  std::optional<double> pearson_rho;
  std::optional<double> pearson_p;
  std::optional<double> spearman_r;
  std::optional<double> spearman_p;
  bool significant_pearson = false;
  bool significant_spearman = false;
  std::vector<std::string> warnings;
};

CorrelationResult correlate(const PairedScores& pairs);

/// Joins two system-level tables on system_id (inner join, mismatches
/// warned) and correlates them. Throws when fewer than 2 systems overlap.
CorrelationResult correlate(const metrics::ScoreTable& a, const metrics::ScoreTable& b);

/// Per-system unweighted mean across tables of one method that differ in domain.
metrics::ScoreTable average_domains(std::span<const metrics::ScoreTable> tables);

enum class PoolAxis { Task, Domain, Language };
PoolAxis parse_pool_axis(std::string_view name);
std::string_view to_string(PoolAxis axis);

struct PoolOptions {
  /// Extension, not part of the reference procedure: subtract each
  /// condition's mean from both score vectors before pooling.
  bool center_per_condition = false;
};

/// Stacks (system, condition) points from several conditions that differ only
/// along `axis` and correlates them jointly. Every human table needs a
/// metric table for the same condition.
CorrelationResult pool_conditions(std::span<const metrics::ScoreTable> human, std::span<const metrics::ScoreTable> metric,
                                  PoolAxis axis, const PoolOptions& options = {});

enum class ReportFormat { TSV, Markdown };
ReportFormat parse_report_format(std::string_view name);

void render_report(std::span<const CorrelationResult> results, ReportFormat format, std::ostream& out);

}  // namespace steval::stats
