#include "dpc/lsh.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace dpc {

namespace {

using u128 = unsigned __int128;

std::uint64_t mod_prime(u128 v) {
  constexpr std::uint64_t p = LshFunction::kPrime;
  // 2^61 = 1 mod p
  std::uint64_t lo = static_cast<std::uint64_t>(v & p);
  std::uint64_t hi = static_cast<std::uint64_t>(v >> 61);
  std::uint64_t s = lo + hi;
  while (s >= p) s -= p;
  return s;
}

std::uint64_t signed_mod_prime(std::int64_t v) {
  constexpr auto p = static_cast<std::int64_t>(LshFunction::kPrime);
  std::int64_t m = v % p;
  if (m < 0) m += p;
  return static_cast<std::uint64_t>(m);
}

struct Candidate {
  bool feasible = false;
  double width_ratio = 0.0;
  int concat = 0;
  double p_side = 0.0;
  double q_side = 0.0;
};

// Best width for a fixed c: maximize the p-side subject to the q-side target.
Candidate best_width(double c, double target_p, double target_q) {
  Candidate best;
  for (double omega = 0.25; omega <= 2000.0; omega *= 1.01) {
    const double p1 = projection_collision_probability(1.0 / omega);
    const double p2 = projection_collision_probability(c / omega);
    if (p2 <= 0.0 || p2 >= 1.0) continue;
    const int k = std::max(1, static_cast<int>(std::ceil(std::log(target_q) / std::log(p2) - 1e-12)));
    const double ps = std::pow(p1, k);
    if (ps > best.p_side) {
      best.width_ratio = omega;
      best.concat = k;
      best.p_side = ps;
      best.q_side = std::pow(p2, k);
    }
  }
  best.feasible = best.p_side >= target_p;
  return best;
}

std::string hexd(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

double LshParams::target_p() const { return std::pow(static_cast<double>(n), -b); }
double LshParams::target_q() const { return std::pow(static_cast<double>(n), -2.0 - a); }

void LshParams::validate() const {
  if (!(r > 0.0)) throw PreconditionError("lsh: r must be positive");
  if (!(c > 1.0)) throw PreconditionError("lsh: c must exceed 1");
  if (!(b > 0.0) || !(a > b)) throw PreconditionError("lsh: need a > b > 0");
  if (n < 2) throw PreconditionError("lsh: n must be at least 2");
}

double projection_collision_probability(double rho) {
  if (rho <= 0.0) return 1.0;
  const double x = 1.0 / rho;  // width over distance
  const double tail = 0.5 * std::erfc(x / std::numbers::sqrt2);
  return 1.0 - 2.0 * tail - 2.0 / (std::sqrt(2.0 * std::numbers::pi) * x) * (1.0 - std::exp(-0.5 * x * x));
}

LshDesign design_lsh(const LshParams& params) {
  params.validate();
  const double tp = params.target_p();
  const double tq = params.target_q();
  Candidate cand = best_width(params.c, tp, tq);
  double c = params.c;
  if (!cand.feasible) {
    double lo = params.c, hi = params.c * 2.0;
    while (!best_width(hi, tp, tq).feasible) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e7) throw PreconditionError("lsh: no feasible c for these targets");
    }
    while (hi / lo > 1.0 + 1e-4) {
      const double mid = std::sqrt(lo * hi);
      (best_width(mid, tp, tq).feasible ? hi : lo) = mid;
    }
    if (!params.adjust_c) {
      throw LshInfeasible("lsh: targets infeasible at c=" + std::to_string(params.c) +
                              "; minimal feasible c=" + std::to_string(hi),
                          hi);
    }
    c = hi;
    cand = best_width(c, tp, tq);
  }
  LshDesign d;
  d.width_ratio = cand.width_ratio;
  d.concat = cand.concat;
  d.c_requested = params.c;
  d.c_effective = c;
  d.p_side = cand.p_side;
  d.q_side = cand.q_side;
  d.target_p = tp;
  d.target_q = tq;
  return d;
}

LshFunction::LshFunction(Eigen::MatrixXd directions, Eigen::VectorXd offsets, double width,
                         std::vector<std::uint64_t> rehash, std::uint64_t universe)
    : directions_(std::move(directions)),
      offsets_(std::move(offsets)),
      width_(width),
      rehash_(std::move(rehash)),
      universe_(universe) {
  if (directions_.rows() < 1 || directions_.cols() < 1) throw PreconditionError("lsh: empty projection set");
  if (offsets_.size() != directions_.rows()) throw PreconditionError("lsh: offsets do not match projections");
  if (rehash_.size() != static_cast<std::size_t>(directions_.rows()) + 1)
    throw PreconditionError("lsh: rehash coefficient count mismatch");
  if (!(width_ > 0.0)) throw PreconditionError("lsh: width must be positive");
  if (universe_ < 1 || universe_ >= kPrime) throw PreconditionError("lsh: universe out of range");
}

std::vector<std::int64_t> LshFunction::pre_bucket(const PointRef& x) const {
  if (x.size() != directions_.cols()) throw PreconditionError("lsh: dimension mismatch");
  const Eigen::VectorXd proj = (directions_ * x + offsets_) / width_;
  std::vector<std::int64_t> out(static_cast<std::size_t>(proj.size()));
  for (Eigen::Index i = 0; i < proj.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(proj(i)));
  return out;
}

std::uint64_t LshFunction::rehash(const std::vector<std::int64_t>& pre) const {
  u128 acc = rehash_.back();
  for (std::size_t i = 0; i < pre.size(); ++i) {
    acc += static_cast<u128>(rehash_[i]) * signed_mod_prime(pre[i]);
    acc = mod_prime(acc);
  }
  return mod_prime(acc) % universe_;
}

std::vector<std::uint64_t> LshFunction::buckets(const PointMatrix& xs) const {
  if (xs.rows() != directions_.cols()) throw PreconditionError("lsh: dimension mismatch");
  const Eigen::MatrixXd proj = ((directions_ * xs).colwise() + offsets_) / width_;
  std::vector<std::uint64_t> out(static_cast<std::size_t>(xs.cols()));
  std::vector<std::int64_t> pre(static_cast<std::size_t>(proj.rows()));
  for (Eigen::Index j = 0; j < proj.cols(); ++j) {
    for (Eigen::Index i = 0; i < proj.rows(); ++i)
      pre[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(proj(i, j)));
    out[static_cast<std::size_t>(j)] = rehash(pre);
  }
  return out;
}

std::string LshFunction::serialize() const {
  std::ostringstream out;
  out << "dpc-lsh 1\n";
  out << "dim " << dim() << " concat " << concat_count() << " width " << hexd(width_) << " universe " << universe_
      << "\n";
  for (Eigen::Index i = 0; i < directions_.rows(); ++i) {
    out << "dir";
    for (Eigen::Index j = 0; j < directions_.cols(); ++j) out << ' ' << hexd(directions_(i, j));
    out << ' ' << hexd(offsets_(i)) << "\n";
  }
  out << "rehash";
  for (auto v : rehash_) out << ' ' << v;
  out << "\n";
  return out.str();
}

LshFunction LshFunction::deserialize(std::string_view blob) {
  std::istringstream in{std::string(blob)};
  std::string tag, key;
  int version = 0;
  in >> tag >> version;
  if (tag != "dpc-lsh" || version != 1) throw PreconditionError("lsh blob: unknown format");
  int d = 0, k = 0;
  std::string width_s;
  std::uint64_t universe = 0;
  in >> key >> d;
  if (key != "dim") throw PreconditionError("lsh blob: expected dim");
  in >> key >> k;
  if (key != "concat") throw PreconditionError("lsh blob: expected concat");
  in >> key >> width_s;
  if (key != "width") throw PreconditionError("lsh blob: expected width");
  in >> key >> universe;
  if (key != "universe" || d < 1 || k < 1) throw PreconditionError("lsh blob: bad header");
  Eigen::MatrixXd dirs(k, d);
  Eigen::VectorXd offs(k);
  std::string tok;
  for (int i = 0; i < k; ++i) {
    in >> key;
    if (key != "dir") throw PreconditionError("lsh blob: expected dir");
    for (int j = 0; j < d; ++j) {
      in >> tok;
      dirs(i, j) = std::strtod(tok.c_str(), nullptr);
    }
    in >> tok;
    offs(i) = std::strtod(tok.c_str(), nullptr);
  }
  in >> key;
  if (key != "rehash") throw PreconditionError("lsh blob: expected rehash");
  std::vector<std::uint64_t> rh(static_cast<std::size_t>(k) + 1);
  for (auto& v : rh) in >> v;
  if (!in) throw PreconditionError("lsh blob: truncated");
  return LshFunction(std::move(dirs), std::move(offs), std::strtod(width_s.c_str(), nullptr), std::move(rh), universe);
}

std::uint64_t default_universe(std::size_t n) {
  const double cube = std::pow(static_cast<double>(n), 3.0);
  if (cube >= static_cast<double>(LshFunction::kPrime - 1)) return LshFunction::kPrime - 1;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(cube));
}

LshFunction sample_lsh(const LshParams& params, int dim, Rng& rng) {
  return sample_lsh(design_lsh(params), params.r, dim, default_universe(params.n), rng);
}

LshFunction sample_lsh(const LshDesign& design, double r, int dim, std::uint64_t universe, Rng& rng) {
  if (dim < 1) throw PreconditionError("lsh: dimension must be positive");
  if (!(r > 0.0)) throw PreconditionError("lsh: r must be positive");
  const double width = design.width_ratio * r;
  Eigen::MatrixXd dirs(design.concat, dim);
  for (Eigen::Index i = 0; i < dirs.size(); ++i) dirs(i) = rng.normal();
  Eigen::VectorXd offs(design.concat);
  for (Eigen::Index i = 0; i < offs.size(); ++i) offs(i) = rng.uniform() * width;
  std::vector<std::uint64_t> rh(static_cast<std::size_t>(design.concat) + 1);
  for (auto& v : rh) v = rng.bits() % LshFunction::kPrime;
  return LshFunction(std::move(dirs), std::move(offs), width, std::move(rh), universe);
}

RotationBasis sample_rotation(int d, Rng& rng) {
  if (d < 1) throw PreconditionError("rotation: dimension must be positive");
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  // Sign fix so the distribution is Haar rather than QR-biased.
  for (int i = 0; i < d; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return {std::move(q)};
}

double projection_bound_factor(int d, std::size_t m, double beta) {
  return 2.0 * std::sqrt(std::log(static_cast<double>(d) * static_cast<double>(m) / beta) / d);
}

double measure_collision_rate(const LshDesign& design, double r, int dim, double distance, std::size_t trials,
                              Rng& rng) {
  std::size_t hits = 0;
  Point x(dim), dir(dim);
  for (std::size_t s = 0; s < trials; ++s) {
    const LshFunction h = sample_lsh(design, r, dim, LshFunction::kPrime - 1, rng);
    for (int i = 0; i < dim; ++i) {
      x(i) = rng.uniform();
      dir(i) = rng.normal();
    }
    const Point y = x + distance * dir.normalized();
    if (h.bucket(x) == h.bucket(y)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace dpc
