#pragma once

#include <json.hpp>
#include <ostream>
#include <string>

#include "dpc/budget.hpp"
#include "dpc/core.hpp"
#include "dpc/kmeans.hpp"
#include "dpc/verify_dp.hpp"

namespace dpc::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

Json point_json(const PointRef& x);
Json ledger_json(const PrivacyBudget& budget);
Json solution_json(const Solution& s);

// Ground truth for a 1-cluster answer. The oracle radius is skipped when
// with_oracle is false (it is quadratic in n).
Json truth_json(const Dataset& data, const Solution& s, std::size_t t, bool with_oracle);

Json kmeans_json(const KMeansResult& r);
Json kmeans_summary(double cost, double baseline_cost, const KMeansResult& r);
Json trace_check_json(const TraceCheck& c);
Json check_json(const DpCheck& c);

void write_centers_csv(std::ostream& out, const CenterList& centers);

}  // namespace dpc::cli
