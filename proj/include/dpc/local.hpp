#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpc/core.hpp"
#include "dpc/rng.hpp"

namespace dpc {

// A post-randomization message.
struct Message {
  enum class Kind : std::uint8_t { Bit, IndexedBit, Real, Level };
  Kind kind = Kind::Bit;
  std::uint64_t index = 0;  // Hadamard row (IndexedBit) or grid level (Level)
  double value = 0.0;       // +-1 for bits, the real payload otherwise
};

struct TranscriptEntry {
  std::uint32_t round;
  std::uint32_t user;
  std::string label;
  double epsilon;
  Message message;
  double user_epsilon_total;
};

// Local randomizer: sees one user's point, returns a message.
using Randomizer = std::function<Message(const PointRef&, Rng&)>;

// Simulated LR oracle. All access to user data goes through invoke(), which
// logs the randomizer's label and epsilon against the user and refuses any
// invocation that would lift the user's basic-composed epsilon past the
// declared protocol epsilon.
class LrOracle {
 public:
  LrOracle(Dataset data, double declared_epsilon, bool keep_transcript = false);

  std::size_t size() const { return data_.size(); }
  int dim() const { return data_.dim(); }
  const GridSpec& grid() const { return data_.grid(); }
  double declared_epsilon() const { return declared_; }

  std::uint32_t round() const { return round_; }
  std::uint32_t begin_round() { return ++round_; }

  Message invoke(std::size_t user, std::string_view label, double epsilon, const Randomizer& randomizer, Rng& rng);

  double user_epsilon(std::size_t user) const { return user_eps_[user]; }
  double max_user_epsilon() const;
  std::uint32_t max_rounds_per_user() const;
  std::size_t invocations() const { return invocations_; }
  bool ledger_ok() const;

  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  // JSON lines: round, user, label, payload, per-user epsilon ledger.
  void write_transcript(std::ostream& out) const;

 private:
  Dataset data_;
  double declared_;
  bool keep_;
  std::uint32_t round_ = 1;
  std::size_t invocations_ = 0;
  std::vector<double> user_eps_;
  std::vector<std::uint32_t> user_rounds_;
  std::vector<std::uint32_t> last_round_;
  std::vector<TranscriptEntry> transcript_;
};

// Degree-(lambda-1) polynomial hash over GF(2^61 - 1), thresholded so that a
// point is a member with probability p (p quantized to multiples of 2^-30).
class MemberHash {
 public:
  MemberHash() = default;
  static MemberHash sample(int lambda, double probability, Rng& rng);

  bool operator()(const PointRef& x) const;
  std::uint64_t value(std::uint64_t key) const;  // polynomial value in [0, 2^61 - 1)
  static std::uint64_t point_key(const PointRef& x);

  double probability() const { return static_cast<double>(threshold_) / static_cast<double>(1u << 30); }
  int independence() const { return static_cast<int>(coeffs_.size()); }

 private:
  std::vector<std::uint64_t> coeffs_;
  std::uint32_t threshold_ = 0;
};

struct ExclusionRecord {
  Point center;
  double radius = 0.0;
  MemberHash member;
};

// sigma(x) = 1 iff some record's ball holds x and its hash selects x. Public
// and append-only, so every user can evaluate it locally.
class ExclusionPredicate {
 public:
  void append(ExclusionRecord record) { records_.push_back(std::move(record)); }
  bool operator()(const PointRef& x) const;
  const std::vector<ExclusionRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

 private:
  std::vector<ExclusionRecord> records_;
};

// ---- counting ----------------------------------------------------------------

struct CountEstimate {
  double value = 0.0;
  bool outside_bound_range = false;  // epsilon > 1
};

// Probability that randomized response reports the true bit.
double rr_keep_probability(double epsilon);

// (3/eps) sqrt(n ln(8/beta)) for eps <= 1. Larger eps, outside that form's
// range, uses a Bernstein bound that shrinks as the flip probability does.
double ldp_count_error(std::size_t n, double epsilon, double beta);

CountEstimate ldp_count(std::span<const std::uint8_t> bits, double epsilon, Rng& rng);

// Same protocol through the oracle; `bit` runs on the user's side.
CountEstimate ldp_count(LrOracle& oracle, std::span<const std::size_t> users,
                        const std::function<bool(const PointRef&)>& bit, double epsilon, std::string_view label,
                        Rng& rng);

// ---- frequency oracle (Hadamard response) -------------------------------------

// Smallest power of two >= size.
std::uint64_t hadamard_universe(std::uint64_t size);

// The user draws a uniform row s and sends (s, RR(H[s, v])).
Message hadamard_encode(std::uint64_t value, std::uint64_t universe, double epsilon, Rng& rng);

class HadamardAggregator {
 public:
  static constexpr std::uint64_t kMaxEnumerable = std::uint64_t{1} << 20;

  HadamardAggregator(std::uint64_t universe, double epsilon);

  void add(const Message& m);
  std::size_t reports() const { return rows_.size(); }
  std::uint64_t universe() const { return universe_; }

  // Unbiased estimate of the count of v; O(reports).
  double estimate(std::uint64_t v) const;
  // All estimates via a fast Walsh-Hadamard transform; universe <= 2^20.
  std::vector<double> estimate_all() const;
  // (1/c) sqrt(2 n ln(2|U|/beta)): uniform error over the universe.
  double error_bound(double beta) const;

 private:
  std::uint64_t universe_;
  double scale_;  // 1/c with c = (e^eps - 1)/(e^eps + 1)
  std::vector<std::uint64_t> rows_;
  std::vector<std::int8_t> bits_;
};

struct HeavyHitter {
  std::uint64_t value;
  double estimate;
};

// Elements whose estimate clears the uniform error bound, heaviest first, at
// most sqrt(n) of them.
std::vector<HeavyHitter> ldp_histogram(std::span<const std::uint64_t> values, std::uint64_t universe,
                                       double epsilon, double beta, Rng& rng);

// ---- averaging ----------------------------------------------------------------

// Clamp x outside [0, b] to 0, then add Lap(b/eps).
double randomizer_R(double x, double epsilon, double b, Rng& rng);

struct LdpAvgConfig {
  double b = 1.0;
  Point box_origin;
  double epsilon = 1.0;
  double beta = 0.05;
  std::vector<int> assignment;  // coordinate of each listed user
  bool compress = false;        // fixed-point messages
};

// Random partition of `users` into d coordinate groups of near-equal size.
std::vector<int> random_coordinate_assignment(std::size_t users, int d, Rng& rng);

// Maps a user's raw point to the vector being averaged, or nullopt.
using UserVector = std::function<std::optional<Point>(const PointRef&)>;

struct LdpAvgResult {
  std::optional<Point> value;  // nullopt when the noisy count is too low
  double count_estimate = 0.0;
  double count_floor = 0.0;
  std::vector<std::size_t> group_sizes;
};

// Error bound (30 b d / (t eps)) sqrt(n ln(32 d / beta)).
double ldp_avg_error_bound(std::size_t n, std::size_t t, int d, double b, double epsilon, double beta);

// Fixed-point encoding used when compression is on.
struct AvgEncoding {
  double low;
  double step;
  std::uint64_t levels;
  int bits;
};
AvgEncoding avg_encoding(std::size_t n, double b, double epsilon, double beta);

// One round: each user sends R of their assigned coordinate and a
// randomized-response in-box bit, each at epsilon/2.
LdpAvgResult ldp_avg(LrOracle& oracle, std::span<const std::size_t> users, const UserVector& vector_of,
                     const LdpAvgConfig& config, Rng& rng, std::string_view label = "avg");

}  // namespace dpc
