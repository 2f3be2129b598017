#include "dpc/budget.hpp"

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "dpc/error.hpp"

namespace dpc {

namespace {

void check_k_fold(double epsilon, double delta, double delta_prime) {
  if (epsilon < 0.0 || delta < 0.0 || delta >= 1.0)
    throw PreconditionError("composition: invalid per-step (epsilon, delta)");
  if (!(delta_prime > 0.0 && delta_prime < 1.0))
    throw PreconditionError("composition: delta' must lie in (0, 1)");
}

}  // namespace

EpsDelta compose_basic(std::span<const EpsDelta> charges) {
  EpsDelta total;
  for (const auto& c : charges) {
    total.epsilon += c.epsilon;
    total.delta += c.delta;
  }
  return total;
}

EpsDelta compose_advanced(std::size_t k, double epsilon, double delta, double delta_prime) {
  check_k_fold(epsilon, delta, delta_prime);
  const double kd = static_cast<double>(k);
  return {2.0 * kd * epsilon * epsilon + epsilon * std::sqrt(2.0 * kd * std::log(1.0 / delta_prime)),
          kd * delta + delta_prime};
}

EpsDelta compose_advanced_exp(std::size_t k, double epsilon, double delta, double delta_prime) {
  check_k_fold(epsilon, delta, delta_prime);
  const double kd = static_cast<double>(k);
  return {epsilon * std::sqrt(2.0 * kd * std::log(1.0 / delta_prime)) + kd * epsilon * std::expm1(epsilon),
          kd * delta + delta_prime};
}

EpsDelta compose_repeated(std::size_t k, double epsilon, double delta, double delta_prime) {
  const double kd = static_cast<double>(k);
  const EpsDelta basic{kd * epsilon, kd * delta};
  const EpsDelta adv = compose_advanced(k, epsilon, delta, delta_prime);
  return adv.epsilon < basic.epsilon ? adv : basic;
}

PrivacyBudget::PrivacyBudget(double epsilon_cap, double delta_cap) : epsilon_(epsilon_cap), delta_(delta_cap) {
  if (!(epsilon_cap > 0.0)) throw PreconditionError("budget epsilon must be positive");
  if (!(delta_cap >= 0.0 && delta_cap <= 1.0)) throw PreconditionError("budget delta must lie in [0, 1]");
}

void PrivacyBudget::charge(std::string label, double epsilon, double delta) {
  if (epsilon < 0.0 || delta < 0.0) throw PreconditionError("negative privacy charge: " + label);
  const EpsDelta now = total();
  // Relative slack absorbs float round-off when a split sums back to the cap.
  const double tol = 1e-12;
  if (now.epsilon + epsilon > epsilon_ * (1 + tol) || now.delta + delta > delta_ * (1 + tol) + 1e-300) {
    std::ostringstream msg;
    msg << "privacy budget exhausted by '" << label << "': total would be (" << now.epsilon + epsilon << ", "
        << now.delta + delta << ") against cap (" << epsilon_ << ", " << delta_ << ")";
    throw BudgetExhausted(msg.str());
  }
  ledger_.push_back({std::move(label), epsilon, delta});
}

EpsDelta PrivacyBudget::total() const {
  EpsDelta t;
  for (const auto& c : ledger_) {
    t.epsilon += c.epsilon;
    t.delta += c.delta;
  }
  return t;
}

bool PrivacyBudget::within_cap() const {
  const EpsDelta t = total();
  return t.epsilon <= epsilon_ * (1 + 1e-12) && t.delta <= delta_ * (1 + 1e-12);
}

std::string PrivacyBudget::to_json_lines() const {
  std::string out;
  for (const auto& c : ledger_) {
    out += nlohmann::ordered_json{{"label", c.label}, {"eps", c.epsilon}, {"delta", c.delta}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace dpc
