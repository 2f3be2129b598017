#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dpc {

struct EpsDelta {
  double epsilon = 0.0;
  double delta = 0.0;
};

struct Charge {
  std::string label;
  double epsilon = 0.0;
  double delta = 0.0;
};

// Component-wise sum; holds for heterogeneous mechanisms.
EpsDelta compose_basic(std::span<const EpsDelta> charges);

// k-fold adaptive composition: eps' = 2k eps^2 + eps sqrt(2k ln(1/delta')),
// delta_total = k delta + delta'.
EpsDelta compose_advanced(std::size_t k, double epsilon, double delta, double delta_prime);

// Same bound in the form eps sqrt(2k ln(1/delta')) + k eps (e^eps - 1).
EpsDelta compose_advanced_exp(std::size_t k, double epsilon, double delta, double delta_prime);

// Whichever of the basic and advanced bounds has the smaller epsilon.
EpsDelta compose_repeated(std::size_t k, double epsilon, double delta, double delta_prime);

// A declared (epsilon, delta) cap plus an append-only ledger of charges.
// Appends are not synchronized; callers serialize them.
class PrivacyBudget {
 public:
  PrivacyBudget() = default;
  PrivacyBudget(double epsilon_cap, double delta_cap);

  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }
  const std::vector<Charge>& ledger() const { return ledger_; }

  // Throws BudgetExhausted if the basic total would exceed the cap.
  void charge(std::string label, double epsilon, double delta);
  void charge(std::string label, EpsDelta cost) { charge(std::move(label), cost.epsilon, cost.delta); }

  EpsDelta total() const;
  bool within_cap() const;

  // One {"label":..,"eps":..,"delta":..} object per line.
  std::string to_json_lines() const;

 private:
  double epsilon_ = std::numeric_limits<double>::infinity();
  double delta_ = 1.0;
  std::vector<Charge> ledger_;
};

}  // namespace dpc
