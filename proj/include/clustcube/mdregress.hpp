#pragma once

// Ordinary least squares over mergeable sufficient statistics. A cell keeps
// exact sums for (n, XᵀX, Xᵀy, yᵀy, Σy); parent cells are fitted from merged child
// statistics, never from raw rows. Predictor vectors carry an explicit
// leading 1 for the intercept, which ridge never penalizes.

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "clustcube/error.hpp"

namespace clustcube {

namespace detail {

// Exact running sum as a nonoverlapping expansion of doubles, increasing in
// magnitude. value() is the correctly rounded sum, so it depends only on the
// multiset of addends and not on the order of adds and merges.
class ExactSum {
 public:
  void add(double x) {
    if (!std::isfinite(x)) {
      special_ += x;
      return;
    }
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      double hi = x + y;
      double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  void add(const ExactSum& o) {
    for (double p : o.partials_) add(p);
    special_ += o.special_;
  }

  double value() const {
    if (special_ != 0.0 || std::isnan(special_)) return special_;
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n], lo = 0.0;
    while (n > 0) {
      double x = hi, y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    // round-half-even correction when the remaining tail pushes past a tie
    if (n > 0 && ((lo < 0 && partials_[n - 1] < 0) || (lo > 0 && partials_[n - 1] > 0))) {
      double y = lo * 2.0, x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
  double special_ = 0.0;
};

}  // namespace detail

/// Sums are held exactly; accessors return the correctly rounded values, so
/// merged statistics equal direct accumulation over the same rows bit for bit.
class RegressionStats {
 public:
  std::size_t d = 0;
  std::size_t n = 0;

  RegressionStats() = default;
  explicit RegressionStats(std::size_t dim) : d(dim), sums_(dim * (dim + 1) / 2 + dim + 2) {}

  double xtx_at(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return sums_[tri(i, j)].value();
  }
  double xty(std::size_t i) const { return sums_[d * (d + 1) / 2 + i].value(); }
  double yty() const { return sums_[sums_.size() - 2].value(); }
  double sum_y() const { return sums_.back().value(); }

  std::vector<double> xtx() const {
    std::vector<double> out(d * d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) out[i * d + j] = out[j * d + i] = xtx_at(i, j);
    }
    return out;
  }
  std::vector<double> xty() const {
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = xty(i);
    return out;
  }

  void add_row(std::span<const double> x, double y) {
    if (x.size() != d) {
      throw DomainError("predictor vector has " + std::to_string(x.size()) + " entries, stats expect " +
                        std::to_string(d));
    }
    std::size_t k = 0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) sums_[k++].add(x[i] * x[j]);
    }
    for (std::size_t i = 0; i < d; ++i) sums_[k++].add(x[i] * y);
    sums_[k++].add(y * y);
    sums_[k].add(y);
    ++n;
  }

  void add_stats(const RegressionStats& o) {
    if (o.d != d) {
      throw DomainError("cannot merge stats of dimension " + std::to_string(d) + " and " + std::to_string(o.d));
    }
    for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k].add(o.sums_[k]);
    n += o.n;
  }

  bool operator==(const RegressionStats& o) const {
    if (d != o.d || n != o.n) return false;
    for (std::size_t k = 0; k < sums_.size(); ++k) {
      if (sums_[k].value() != o.sums_[k].value()) return false;
    }
    return true;
  }

 private:
  std::size_t tri(std::size_t i, std::size_t j) const { return i * d - i * (i + 1) / 2 + j; }

  std::vector<detail::ExactSum> sums_;
};

inline RegressionStats accumulate(RegressionStats s, std::span<const double> x, double y) {
  s.add_row(x, y);
  return s;
}

/// In-place form used on hot paths; same arithmetic as accumulate().
inline void accumulate_into(RegressionStats& s, std::span<const double> x, double y) { s.add_row(x, y); }

inline RegressionStats merge(const RegressionStats& a, const RegressionStats& b) {
  RegressionStats out = a;
  out.add_stats(b);
  return out;
}

/// Left fold in the given order. The result does not depend on the order.
inline RegressionStats merge_all(std::span<const RegressionStats> parts, std::size_t d) {
  RegressionStats acc(d);
  for (const auto& p : parts) acc.add_stats(p);
  return acc;
}

struct RegressionFit {
  std::vector<double> beta;
  double r2 = 0;
  double rmse = 0;
  double lambda = 0;
  std::size_t n = 0;

  bool operator==(const RegressionFit&) const = default;
};

inline constexpr double kMaxCondition = 1e12;

namespace detail {

struct SolveResult {
  Eigen::VectorXd beta;
  bool ok = false;
};

/// Jacobi-scaled LDLᵀ solve with one step of iterative refinement. Fails when
/// the factorization breaks down or the estimated condition number of the
/// scaled system exceeds kMaxCondition.
inline SolveResult spd_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, bool check_condition) {
  const Eigen::Index d = a.rows();
  Eigen::VectorXd scale(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(a(i, i) > 0)) return {};
    scale(i) = 1.0 / std::sqrt(a(i, i));
  }
  Eigen::MatrixXd as = scale.asDiagonal() * a * scale.asDiagonal();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(as);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return {};
  // rcond() can miss exact zero pivots, so the pivot spread of D counts too
  Eigen::VectorXd piv = ldlt.vectorD();
  double dmax = piv.maxCoeff(), dmin = piv.minCoeff();
  if (!(dmin > 0)) return {};
  double rcond = ldlt.rcond();
  double cond = std::max(1.0 / rcond, dmax / dmin);
  if (!(rcond > 0) || (check_condition && cond > kMaxCondition)) return {};
  Eigen::VectorXd bs = scale.asDiagonal() * b;
  Eigen::VectorXd z = ldlt.solve(bs);
  z += ldlt.solve(bs - as * z);
  if (!z.allFinite()) return {};
  return {scale.asDiagonal() * z, true};
}

}  // namespace detail

/// Solves (XᵀX + λI′)β = Xᵀy where I′ zeroes the intercept entry. With λ = 0
/// and a singular or ill-conditioned system the fit retries with
/// λ = 1e-8·trace(XᵀX)/d, reported in `lambda`.
inline RegressionFit fit(const RegressionStats& s, double lambda = 0.0) {
  if (s.n == 0) throw DomainError("cannot fit regression on zero rows");
  if (!(lambda >= 0)) throw DomainError("lambda must be non-negative");
  const auto d = static_cast<Eigen::Index>(s.d);
  Eigen::MatrixXd xtx(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      xtx(i, j) = xtx(j, i) = s.xtx_at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  Eigen::VectorXd xty(d);
  for (Eigen::Index i = 0; i < d; ++i) xty(i) = s.xty(static_cast<std::size_t>(i));

  auto ridge = [&](double l) {
    Eigen::MatrixXd a = xtx;
    for (Eigen::Index i = 1; i < d; ++i) a(i, i) += l;
    return a;
  };

  double used = lambda;
  auto solved = detail::spd_solve(ridge(lambda), xty, lambda == 0.0);
  if (!solved.ok && lambda == 0.0) {
    used = 1e-8 * xtx.trace() / static_cast<double>(d);
    solved = detail::spd_solve(ridge(used), xty, false);
  }
  if (!solved.ok) throw DomainError("regression system could not be solved");

  const Eigen::VectorXd& beta = solved.beta;
  double n = static_cast<double>(s.n);
  double yty = s.yty(), sum_y = s.sum_y();
  double ssr = yty - 2.0 * beta.dot(xty) + beta.dot(xtx * beta);
  // SSR recovered from sums cannot resolve below rounding of yᵀy
  if (ssr < 1e-12 * yty) ssr = 0.0;
  double sst = yty - sum_y * sum_y / n;
  if (sst < 0) sst = 0;

  RegressionFit f;
  f.beta.assign(beta.data(), beta.data() + d);
  f.lambda = used;
  f.n = s.n;
  f.rmse = std::sqrt(ssr / n);
  if (sst <= 1e-12) {
    f.r2 = ssr <= 1e-12 ? 1.0 : 0.0;
  } else {
    f.r2 = 1.0 - ssr / sst;
  }
  return f;
}

inline nlohmann::ordered_json to_json(const RegressionFit& f, const std::vector<std::string>& predictor_names) {
  nlohmann::ordered_json j;
  j["beta"] = f.beta;
  j["r2"] = f.r2;
  j["rmse"] = f.rmse;
  j["lambda"] = f.lambda;
  j["n"] = f.n;
  j["predictor_names"] = predictor_names;
  return j;
}

inline nlohmann::ordered_json to_json(const RegressionStats& s) {
  nlohmann::ordered_json j;
  j["d"] = s.d;
  j["n"] = s.n;
  j["xtx"] = s.xtx();
  j["xty"] = s.xty();
  j["yty"] = s.yty();
  j["sum_y"] = s.sum_y();
  return j;
}

}  // namespace clustcube
