#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cyborg/flips.hpp"
#include "cyborg/ingest.hpp"

namespace cyborg::stats {

// Regularized incomplete beta I_x(a, b), evaluated with the modified Lentz
// continued fraction (using I_x(a,b) = 1 - I_{1-x}(b,a) when x is past the
// mean of the beta density).
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// Upper tail probability of the F distribution.
double f_upper_p(double f, double df1, double df2);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
// Both samples need >= 2 points and at least one needs nonzero variance
// (InvalidArgument otherwise).
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Pooled-variance Student t-test.
TTestResult student_t_test(std::span<const double> a, std::span<const double> b);

struct AnovaResult {
  double f = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p = 1.0;
};

// >= 2 groups, each with >= 2 points, and nonzero within-group variation.
AnovaResult one_way_anova(std::span<const std::vector<double>> groups);

// Cohen's kappa for two equal-length label lists. Returns 1 when chance
// agreement is 1 (both raters used one identical label throughout).
double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares; needs >= 2 points and not all x equal.
LinearFit linear_fit(std::span<const std::pair<double, double>> points);

double mean(std::span<const double> v);
double sample_variance(std::span<const double> v);

// Encoding used for the lifespan regression: Cyborg=0, Human=1, Bot=2.
double class_code(flips::AgentClass c);

struct CohortRow {
  flips::AgentClass cls = flips::AgentClass::Human;
  std::size_t n = 0;
  std::size_t n_suspended = 0;
  double prop_suspended = 0.0;
  std::size_t n_alive = 0;
  bool lifespan_defined = false;  // false when no alive member
  double mean_lifespan_days = 0.0;
  double stddev_lifespan_days = 0.0;  // sample standard deviation
};

struct CohortReport {
  std::vector<CohortRow> rows;  // Bot, Cyborg, Human
  std::optional<AnovaResult> anova;  // over alive lifespans of classes with >= 2 alive members
  std::vector<std::pair<double, double>> fit_points;  // (class_code, mean lifespan)
  std::optional<LinearFit> fit;
  std::size_t missing_suspension_flag = 0;  // treated as not suspended
};

// Whole days between account creation and analysis_date.
long long lifespan_days(const ingest::ProfileSnapshot& profile, Day analysis_date);

// Agents present in `classes` but without a profile are ignored. Suspended
// agents count toward the suspension proportion but are excluded from the
// lifespan statistics.
CohortReport cohort_report(const std::map<std::string, ingest::ProfileSnapshot>& profiles,
                           const std::map<std::string, flips::AgentClass>& classes, Day analysis_date);

}  // namespace cyborg::stats
