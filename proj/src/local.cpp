#include "dpc/local.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <ostream>

#include "dpc/lsh.hpp"

namespace dpc {

namespace {

using u128 = unsigned __int128;
constexpr std::uint64_t kPrime = LshFunction::kPrime;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  const u128 v = static_cast<u128>(a) * b;
  std::uint64_t s = static_cast<std::uint64_t>(v & kPrime) + static_cast<std::uint64_t>(v >> 61);
  while (s >= kPrime) s -= kPrime;
  return s;
}

std::uint64_t addmod(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a + b;
  return s >= kPrime ? s - kPrime : s;
}

const char* kind_name(Message::Kind k) {
  switch (k) {
    case Message::Kind::Bit: return "bit";
    case Message::Kind::IndexedBit: return "indexed_bit";
    case Message::Kind::Real: return "real";
    case Message::Kind::Level: return "level";
  }
  return "?";
}

}  // namespace

// ---- oracle ---------------------------------------------------------------------

LrOracle::LrOracle(Dataset data, double declared_epsilon, bool keep_transcript)
    : data_(std::move(data)),
      declared_(declared_epsilon),
      keep_(keep_transcript),
      user_eps_(data_.size(), 0.0),
      user_rounds_(data_.size(), 0),
      last_round_(data_.size(), 0) {
  if (!(declared_epsilon > 0.0)) throw PreconditionError("oracle: declared epsilon must be positive");
}

Message LrOracle::invoke(std::size_t user, std::string_view label, double epsilon, const Randomizer& randomizer,
                         Rng& rng) {
  if (user >= data_.size()) throw PreconditionError("oracle: user index out of range");
  if (!(epsilon > 0.0)) throw PreconditionError("oracle: randomizer epsilon must be positive");
  if (user_eps_[user] + epsilon > declared_ * (1.0 + 1e-12))
    throw BudgetExhausted("oracle: user " + std::to_string(user) + " would exceed the declared epsilon via '" +
                          std::string(label) + "'");
  user_eps_[user] += epsilon;
  if (last_round_[user] != round_) {
    last_round_[user] = round_;
    ++user_rounds_[user];
  }
  ++invocations_;
  Message m = randomizer(data_.point(user), rng);
  if (keep_)
    transcript_.push_back({round_, static_cast<std::uint32_t>(user), std::string(label), epsilon, m, user_eps_[user]});
  return m;
}

double LrOracle::max_user_epsilon() const {
  return user_eps_.empty() ? 0.0 : *std::max_element(user_eps_.begin(), user_eps_.end());
}

std::uint32_t LrOracle::max_rounds_per_user() const {
  return user_rounds_.empty() ? 0 : *std::max_element(user_rounds_.begin(), user_rounds_.end());
}

bool LrOracle::ledger_ok() const { return max_user_epsilon() <= declared_ * (1.0 + 1e-12); }

void LrOracle::write_transcript(std::ostream& out) const {
  using nlohmann::ordered_json;
  for (const auto& e : transcript_) {
    const auto& m = e.message;
    const int bit = m.value > 0 ? 1 : -1;
    ordered_json payload;
    switch (m.kind) {
      case Message::Kind::Bit: payload = {{"bit", bit}}; break;
      case Message::Kind::IndexedBit: payload = {{"row", m.index}, {"bit", bit}}; break;
      case Message::Kind::Real: payload = {{"z", m.value}}; break;
      case Message::Kind::Level: payload = {{"level", m.index}}; break;
    }
    out << ordered_json{{"round", e.round},          {"user", e.user},       {"randomizer", e.label},
                        {"kind", kind_name(m.kind)}, {"payload", payload},   {"eps", e.epsilon},
                        {"user_eps_total", e.user_epsilon_total}}
               .dump()
        << '\n';
  }
}

// ---- exclusion ---------------------------------------------------------------------

MemberHash MemberHash::sample(int lambda, double probability, Rng& rng) {
  if (lambda < 1) throw PreconditionError("member hash: independence must be at least 1");
  if (!(probability >= 0.0 && probability <= 1.0)) throw PreconditionError("member hash: probability outside [0, 1]");
  MemberHash h;
  h.coeffs_.resize(static_cast<std::size_t>(lambda));
  for (auto& c : h.coeffs_) c = rng.bits() % kPrime;
  h.threshold_ = static_cast<std::uint32_t>(std::floor(probability * static_cast<double>(1u << 30)));
  return h;
}

std::uint64_t MemberHash::value(std::uint64_t key) const {
  key %= kPrime;
  std::uint64_t acc = 0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = addmod(mulmod(acc, key), *it);
  return acc;
}

std::uint64_t MemberHash::point_key(const PointRef& x) {
  constexpr std::uint64_t base = 0x9E3779B97F4A7C15ULL % kPrime;
  std::uint64_t acc = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i) == 0.0 ? 0.0 : x(i);  // fold -0 onto +0
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    acc = addmod(mulmod(acc, base), bits % kPrime);
  }
  return acc;
}

bool MemberHash::operator()(const PointRef& x) const {
  if (coeffs_.empty()) return false;
  return (value(point_key(x)) >> 31) < threshold_;
}

bool ExclusionPredicate::operator()(const PointRef& x) const {
  for (const auto& r : records_)
    if ((x - r.center).norm() <= r.radius && r.member(x)) return true;
  return false;
}

// ---- counting ----------------------------------------------------------------------

double rr_keep_probability(double epsilon) { return 1.0 / (1.0 + std::exp(-epsilon)); }

double ldp_count_error(std::size_t n, double epsilon, double beta) {
  const double nd = static_cast<double>(n);
  if (epsilon <= 1.0) return 3.0 / epsilon * std::sqrt(nd * std::log(8.0 / beta));
  // Bernstein on the n flipped-or-kept reports, each with variance q(1-q).
  const double q = 1.0 - rr_keep_probability(epsilon);
  const double l = std::log(2.0 / beta);
  return (std::sqrt(2.0 * nd * q * (1.0 - q) * l) + 2.0 * l / 3.0) / std::tanh(epsilon / 2.0);
}

namespace {

double debias(double reported_ones, double n, double epsilon) {
  const double p = rr_keep_probability(epsilon);
  return (reported_ones - n * (1.0 - p)) / (2.0 * p - 1.0);
}

void check_eps(double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("ldp_count: epsilon must be positive");
}

}  // namespace

CountEstimate ldp_count(std::span<const std::uint8_t> bits, double epsilon, Rng& rng) {
  check_eps(epsilon);
  const double p = rr_keep_probability(epsilon);
  double ones = 0.0;
  for (auto b : bits) {
    const bool keep = rng.bernoulli(p);
    ones += (b != 0) == keep ? 1.0 : 0.0;
  }
  return {debias(ones, static_cast<double>(bits.size()), epsilon), epsilon > 1.0};
}

CountEstimate ldp_count(LrOracle& oracle, std::span<const std::size_t> users,
                        const std::function<bool(const PointRef&)>& bit, double epsilon, std::string_view label,
                        Rng& rng) {
  check_eps(epsilon);
  const double p = rr_keep_probability(epsilon);
  const Randomizer rr = [&](const PointRef& x, Rng& g) {
    const bool truth = bit(x);
    const bool out = g.bernoulli(p) ? truth : !truth;
    return Message{Message::Kind::Bit, 0, out ? 1.0 : -1.0};
  };
  double ones = 0.0;
  for (auto u : users) ones += oracle.invoke(u, label, epsilon, rr, rng).value > 0 ? 1.0 : 0.0;
  return {debias(ones, static_cast<double>(users.size()), epsilon), epsilon > 1.0};
}

// ---- averaging ----------------------------------------------------------------------

double randomizer_R(double x, double epsilon, double b, Rng& rng) {
  if (!(epsilon > 0.0) || !(b > 0.0)) throw PreconditionError("randomizer_R: epsilon and b must be positive");
  if (x > b || x < 0.0) x = 0.0;
  return x + rng.laplace(b / epsilon);
}

std::vector<int> random_coordinate_assignment(std::size_t users, int d, Rng& rng) {
  std::vector<int> a(users);
  for (std::size_t j = 0; j < users; ++j) a[j] = static_cast<int>(j % static_cast<std::size_t>(d));
  for (std::size_t i = users; i > 1; --i) std::swap(a[i - 1], a[rng.index(i)]);
  return a;
}

double ldp_avg_error_bound(std::size_t n, std::size_t t, int d, double b, double epsilon, double beta) {
  return 30.0 * b * d / (static_cast<double>(t) * epsilon) *
         std::sqrt(static_cast<double>(n) * std::log(32.0 * d / beta));
}

AvgEncoding avg_encoding(std::size_t n, double b, double epsilon, double beta) {
  const double nd = static_cast<double>(std::max<std::size_t>(n, 2));
  const double scale = b / (epsilon / 2.0);
  const double tail = scale * std::log(nd / beta);
  AvgEncoding e;
  e.low = -tail;
  e.step = scale / std::sqrt(nd);
  e.levels = static_cast<std::uint64_t>(std::ceil((b + 2.0 * tail) / e.step)) + 1;
  e.bits = static_cast<int>(std::bit_width(e.levels - 1));
  return e;
}

LdpAvgResult ldp_avg(LrOracle& oracle, std::span<const std::size_t> users, const UserVector& vector_of,
                     const LdpAvgConfig& config, Rng& rng, std::string_view label) {
  const int d = static_cast<int>(config.box_origin.size());
  if (d < 1) throw PreconditionError("ldp_avg: box origin must be set");
  if (config.assignment.size() != users.size()) throw PreconditionError("ldp_avg: assignment size mismatch");
  if (!(config.b > 0.0) || !(config.epsilon > 0.0)) throw PreconditionError("ldp_avg: b and epsilon must be positive");
  const double half = config.epsilon / 2.0;
  const std::size_t n = users.size();
  const AvgEncoding enc = avg_encoding(n, config.b, config.epsilon, config.beta);

  const auto in_box = [&](const std::optional<Point>& v) {
    if (!v || v->size() != d) return false;
    const auto rel = (*v - config.box_origin).array();
    return (rel >= 0.0).all() && (rel <= config.b).all();
  };

  LdpAvgResult res;
  res.group_sizes.assign(static_cast<std::size_t>(d), 0);
  Point y = Point::Zero(d);
  const std::string r_label = std::string(label) + "/R";
  for (std::size_t j = 0; j < n; ++j) {
    const int coord = config.assignment[j];
    const Randomizer r = [&](const PointRef& x, Rng& g) {
      const auto v = vector_of(x);
      const double xi = in_box(v) ? (*v)(coord) - config.box_origin(coord) : 0.0;
      const double z = randomizer_R(xi, half, config.b, g);
      if (!config.compress) return Message{Message::Kind::Real, 0, z};
      const double clipped = std::clamp(z, enc.low, enc.low + static_cast<double>(enc.levels - 1) * enc.step);
      return Message{Message::Kind::Level, static_cast<std::uint64_t>(std::llround((clipped - enc.low) / enc.step)), 0.0};
    };
    const Message m = oracle.invoke(users[j], r_label, half, r, rng);
    const double z = config.compress ? enc.low + static_cast<double>(m.index) * enc.step : m.value;
    y(coord) += z;
    ++res.group_sizes[static_cast<std::size_t>(coord)];
  }
  for (int i = 0; i < d; ++i) {
    const auto size = res.group_sizes[static_cast<std::size_t>(i)];
    y(i) = size ? y(i) * static_cast<double>(n) / static_cast<double>(size) : 0.0;
  }

  const auto count = ldp_count(oracle, users, [&](const PointRef& x) { return in_box(vector_of(x)); }, half,
                               std::string(label) + "/count", rng);
  res.count_estimate = count.value;
  res.count_floor = std::max(1.0, 6.0 / config.epsilon * std::sqrt(static_cast<double>(n) * std::log(32.0 / config.beta)));
  if (count.value < res.count_floor) return res;
  res.value = config.box_origin + y / count.value;
  return res;
}

}  // namespace dpc
