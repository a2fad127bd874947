#include "cyborg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cyborg/error.hpp"

namespace cyborg::stats {
namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw ConvergenceError("incomplete beta continued fraction did not converge", 0.0);
}

void require_sizes(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("t-test: each sample needs at least 2 points");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("incomplete_beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("incomplete_beta: x must be in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw InvalidArgument("student_t: df must be > 0");
  if (std::isinf(t)) return 0.0;
  const double p = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return std::clamp(p, 0.0, 1.0);
}

double f_upper_p(double f, double df1, double df2) {
  if (!(df1 > 0.0 && df2 > 0.0)) throw InvalidArgument("f distribution: df must be > 0");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return std::clamp(incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)), 0.0, 1.0);
}

double mean(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw InvalidArgument("variance needs at least 2 points");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  require_sizes(a, b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = sample_variance(a) / na, vb = sample_variance(b) / nb;
  if (!(va + vb > 0.0)) throw InvalidArgument("welch_t_test: both samples have zero variance");
  TTestResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

TTestResult student_t_test(std::span<const double> a, std::span<const double> b) {
  require_sizes(a, b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
  if (!(pooled > 0.0)) throw InvalidArgument("student_t_test: zero pooled variance");
  TTestResult r;
  r.df = na + nb - 2.0;
  r.t = (mean(a) - mean(b)) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

AnovaResult one_way_anova(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw InvalidArgument("anova: needs at least 2 groups");
  double grand = 0.0;
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw InvalidArgument("anova: each group needs at least 2 points");
    for (double x : g) grand += x;
    total += g.size();
  }
  grand /= static_cast<double>(total);
  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = mean(g);
    ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ss_within += (x - m) * (x - m);
  }
  if (!(ss_within > 0.0)) throw InvalidArgument("anova: zero within-group variation");
  AnovaResult r;
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(total - groups.size());
  r.f = (ss_between / r.df_between) / (ss_within / r.df_within);
  r.p = f_upper_p(r.f, r.df_between, r.df_within);
  return r;
}

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) throw InvalidArgument("cohen_kappa: label lists differ in length");
  if (a.empty()) throw InvalidArgument("cohen_kappa: empty label lists");
  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
    if (a[i] == b[i]) ++agree;
  }
  const double n = static_cast<double>(a.size());
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, counts] : marginals)
    p_e += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  if (p_e >= 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

LinearFit linear_fit(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw InvalidArgument("linear_fit: needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("linear_fit: all x values are equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double class_code(flips::AgentClass c) {
  switch (c) {
    case flips::AgentClass::Cyborg:
      return 0.0;
    case flips::AgentClass::Human:
      return 1.0;
    case flips::AgentClass::Bot:
      return 2.0;
  }
  return 1.0;
}

long long lifespan_days(const ingest::ProfileSnapshot& profile, Day analysis_date) {
  const auto secs = (Timestamp{analysis_date} - profile.account_created_at).count();
  return std::max<long long>(0, secs / 86400);
}

CohortReport cohort_report(const std::map<std::string, ingest::ProfileSnapshot>& profiles,
                           const std::map<std::string, flips::AgentClass>& classes, Day analysis_date) {
  using flips::AgentClass;
  const AgentClass order[] = {AgentClass::Bot, AgentClass::Cyborg, AgentClass::Human};
  std::map<AgentClass, std::vector<double>> alive;
  std::map<AgentClass, CohortRow> rows;
  CohortReport report;
  for (AgentClass c : order) rows[c].cls = c;

  for (const auto& [agent, cls] : classes) {
    auto it = profiles.find(agent);
    if (it == profiles.end()) continue;
    CohortRow& row = rows[cls];
    ++row.n;
    const auto& prof = it->second;
    if (!prof.is_suspended) ++report.missing_suspension_flag;
    if (prof.is_suspended.value_or(false)) {
      ++row.n_suspended;
    } else {
      alive[cls].push_back(static_cast<double>(lifespan_days(prof, analysis_date)));
    }
  }

  std::vector<std::vector<double>> anova_groups;
  for (AgentClass c : order) {
    CohortRow& row = rows[c];
    row.prop_suspended = row.n ? static_cast<double>(row.n_suspended) / static_cast<double>(row.n) : 0.0;
    const auto& spans = alive[c];
    row.n_alive = spans.size();
    if (!spans.empty()) {
      row.lifespan_defined = true;
      row.mean_lifespan_days = mean(spans);
      row.stddev_lifespan_days = spans.size() > 1 ? std::sqrt(sample_variance(spans)) : 0.0;
      report.fit_points.emplace_back(class_code(c), row.mean_lifespan_days);
    }
    if (spans.size() >= 2) anova_groups.push_back(spans);
    report.rows.push_back(row);
  }
  if (anova_groups.size() >= 2) {
    try {
      report.anova = one_way_anova(anova_groups);
    } catch (const InvalidArgument&) {
      report.anova.reset();
    }
  }
  std::sort(report.fit_points.begin(), report.fit_points.end());
  if (report.fit_points.size() >= 2) report.fit = linear_fit(report.fit_points);
  return report;
}

}  // namespace cyborg::stats
