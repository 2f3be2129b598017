#include "report.hpp"

#include <cstdio>

namespace dpc::cli {

Json point_json(const PointRef& x) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(x(i));
  return a;
}

Json ledger_json(const PrivacyBudget& budget) {
  Json entries = Json::array();
  for (const auto& c : budget.ledger()) entries.push_back({{"label", c.label}, {"eps", c.epsilon}, {"delta", c.delta}});
  const auto total = budget.total();
  return {{"entries", entries}, {"eps_total", total.epsilon}, {"delta_total", total.delta}};
}

Json solution_json(const Solution& s) {
  Json diag = Json::object();
  for (const auto& [k, v] : s.diagnostics) diag[k] = v;
  return {{"center", point_json(s.ball.center)},
          {"radius", s.ball.radius},
          {"radius_index", s.radius_index},
          {"covered_reported", s.covered},
          {"noisy_count", s.noisy_count},
          {"coverage_slack", s.coverage_slack},
          {"fallback", s.fallback},
          {"diagnostic", s.diagnostic},
          {"diagnostics", diag}};
}

Json truth_json(const Dataset& data, const Solution& s, std::size_t t, bool with_oracle) {
  const std::size_t exact = count_in_ball(data, s.ball);
  Json j{{"exact_coverage", exact},
         {"coverage_shortfall", exact >= t ? 0.0 : static_cast<double>(t - exact)},
         {"delta_measured", s.coverage_slack},
         {"coverage_ok", static_cast<double>(exact) >= static_cast<double>(t) - s.coverage_slack}};
  if (with_oracle) {
    const Ball o = oracle_min_ball(data, t);
    j["oracle_center"] = point_json(o.center);
    j["oracle_radius"] = o.radius;
    j["w_measured"] = o.radius > 0.0 ? s.ball.radius / o.radius : (s.ball.radius > 0.0 ? -1.0 : 1.0);
  }
  return j;
}

Json kmeans_json(const KMeansResult& r) {
  Json trace = Json::array();
  for (const auto& it : r.trace)
    trace.push_back({{"remaining", it.remaining},
                     {"remaining_hat", it.remaining_hat},
                     {"target", it.target},
                     {"center", point_json(it.ball.center)},
                     {"radius", it.ball.radius},
                     {"cluster_fallback", it.cluster_fallback},
                     {"in_ball", it.in_ball},
                     {"in_ball_hat", it.in_ball_hat},
                     {"keep_probability", it.keep_probability},
                     {"excluded", it.excluded},
                     {"weight", it.weight}});
  Json centers = Json::array();
  for (const auto& c : r.centers) centers.push_back(point_json(c));
  Json warnings = Json::array();
  for (const auto& w : r.warnings) warnings.push_back(w);
  return {{"centers", centers},
          {"iterations", r.trace.size()},
          {"max_iterations", r.max_iterations},
          {"stopped_by_cap", r.stopped_by_cap},
          {"final_remaining", r.final_remaining},
          {"final_remaining_hat", r.final_remaining_hat},
          {"nu", r.nu},
          {"cluster_slack", r.cluster_slack},
          {"t_min", r.t_min},
          {"t_min_raised", r.t_min_raised},
          {"additive_term", r.additive_term},
          {"privacy", {{"eps", r.privacy.epsilon}, {"delta", r.privacy.delta}}},
          {"warnings", warnings},
          {"trace", trace}};
}

Json kmeans_summary(double cost, double baseline_cost, const KMeansResult& r) {
  return {{"cost", cost},
          {"baseline_cost", baseline_cost},
          {"ratio", baseline_cost > 0.0 ? cost / baseline_cost : 0.0},
          {"eps_total", r.privacy.epsilon},
          {"delta_total", r.privacy.delta},
          {"iterations", r.trace.size()}};
}

Json trace_check_json(const TraceCheck& c) {
  return {{"successful", c.successful}, {"group_sizes", c.group_sizes}, {"weights", c.weights},
          {"stopping", c.stopping},     {"monotone", c.monotone},       {"ok", c.ok()},
          {"detail", c.detail}};
}

Json check_json(const DpCheck& c) {
  return {{"name", c.name},
          {"kind", c.kind == DpCheck::Kind::Analytic ? "analytic" : "empirical"},
          {"eps", c.epsilon},
          {"delta", c.delta},
          {"trials", c.trials},
          {"worst", c.worst},
          {"tolerance", c.tolerance},
          {"pass", c.pass},
          {"detail", c.detail}};
}

void write_centers_csv(std::ostream& out, const CenterList& centers) {
  if (centers.empty()) return;
  const auto d = centers.front().size();
  for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << "x" << i;
  out << "\n";
  char buf[40];
  for (const auto& c : centers) {
    for (Eigen::Index i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", c(i));
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace dpc::cli
