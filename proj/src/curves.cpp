#include "bpcal/curves.hpp"

#include <algorithm>
#include <cmath>

#include "bpcal/assay_data.hpp"

namespace bpcal {

double Logistic4::operator()(double m) const {
  // exp(-rate * (m - beta2)) with the sign chosen so the curve decreases.
  const double t = m - beta2;
  const double e3 = std::exp(-beta3 * t);
  const double e4 = std::exp(-beta4 * t);
  const double w = 1.0 / (1.0 + std::exp(-beta_star() * t));
  // w is a weight in (0, 1); guard the 0 * inf corner when a tail saturates.
  const double a = w > 0.0 ? w * e3 : 0.0;
  const double b = w < 1.0 ? (1.0 - w) * e4 : 0.0;
  const double e = a + b;
  return beta1 / (1.0 + 1.0 / e);
}

KnotSequence::KnotSequence(std::vector<double> interior, double lo, double hi)
    : interior_(std::move(interior)), lo_(lo), hi_(hi) {
  if (!(lo_ < hi_)) throw ContractViolation("knot boundaries need lo < hi");
  double prev = lo_;
  for (double t : interior_) {
    if (!(t > prev)) throw ContractViolation("interior knots must be strictly increasing inside (lo, hi)");
    prev = t;
  }
  if (!(hi_ > prev)) throw ContractViolation("interior knots must lie below hi");
}

KnotSequence KnotSequence::equally_spaced(double lo, double hi, double spacing) {
  std::vector<double> interior;
  const int n = static_cast<int>(std::ceil((hi - lo) / spacing - 1e-9)) - 1;
  for (int i = 1; i <= n; ++i) interior.push_back(lo + i * spacing);
  // Drop a final knot that would sit on top of hi.
  while (!interior.empty() && hi - interior.back() < 1e-9) interior.pop_back();
  return KnotSequence(std::move(interior), lo, hi);
}

std::vector<double> KnotSequence::full() const {
  std::vector<double> t;
  t.reserve(interior_.size() + 2 * kOrder);
  t.insert(t.end(), kOrder, lo_);
  t.insert(t.end(), interior_.begin(), interior_.end());
  t.insert(t.end(), kOrder, hi_);
  return t;
}

namespace {

// M-spline recursion on the full knot vector t. Fills out[0..B) with the
// order-3 values at x; `span` is the index with t[span] <= x < t[span+1].
void mspline_recursion(const std::vector<double>& t, int span, double x, std::span<double> out) {
  const int nt = static_cast<int>(t.size());
  std::vector<double> cur(nt - 1, 0.0);
  cur[span] = 1.0 / (t[span + 1] - t[span]);
  for (int order = 2; order <= KnotSequence::kOrder; ++order) {
    std::vector<double> next(nt - order, 0.0);
    for (int i = 0; i < nt - order; ++i) {
      const double denom = t[i + order] - t[i];
      if (denom <= 0.0) continue;
      const double left = cur[i];
      const double right = i + 1 < static_cast<int>(cur.size()) ? cur[i + 1] : 0.0;
      next[i] = order * ((x - t[i]) * left + (t[i + order] - x) * right) / ((order - 1) * denom);
    }
    cur = std::move(next);
  }
  std::copy(cur.begin(), cur.end(), out.begin());
}

}  // namespace

ISplineBasis::ISplineBasis(KnotSequence knots) : knots_(std::move(knots)) {
  breaks_.push_back(knots_.lo());
  breaks_.insert(breaks_.end(), knots_.interior().begin(), knots_.interior().end());
  breaks_.push_back(knots_.hi());

  const auto t = knots_.full();
  const int B = size();
  const int n_int = static_cast<int>(breaks_.size()) - 1;
  std::vector<double> cum(B, 0.0);
  std::vector<double> m(B);
  intervals_.resize(n_int);
  for (int j = 0; j < n_int; ++j) {
    Interval& iv = intervals_[j];
    iv.start = breaks_[j];
    iv.width = breaks_[j + 1] - breaks_[j];
    // Each M-spline is quadratic on the interval: sample at u = 1/4, 1/2, 3/4.
    double v[3][3];
    for (int s = 0; s < 3; ++s) {
      const double x = iv.start + iv.width * (0.25 * (s + 1));
      mspline_recursion(t, KnotSequence::kOrder - 1 + j, x, m);
      for (int r = 0; r < 3; ++r) v[r][s] = m[j + r];
    }
    for (int r = 0; r < 3; ++r) {
      const double p2 = 8.0 * (v[r][0] - 2.0 * v[r][1] + v[r][2]);
      const double p1 = 2.0 * (v[r][2] - v[r][0]) - p2;
      const double p0 = v[r][1] - 0.5 * p1 - 0.25 * p2;
      Cubic& c = iv.basis[r];
      c.a0 = cum[j + r];
      c.a1 = iv.width * p0;
      c.a2 = iv.width * p1 / 2.0;
      c.a3 = iv.width * p2 / 3.0;
      cum[j + r] = c.a0 + c.a1 + c.a2 + c.a3;
    }
  }
}

int ISplineBasis::interval(double x) const {
  if (x <= breaks_.front()) return 0;
  if (x >= breaks_.back()) return static_cast<int>(intervals_.size()) - 1;
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
  return static_cast<int>(it - breaks_.begin()) - 1;
}

void ISplineBasis::active(int j, double x, double out[3]) const {
  const Interval& iv = intervals_[j];
  const double u = std::clamp((x - iv.start) / iv.width, 0.0, 1.0);
  for (int r = 0; r < 3; ++r) {
    const Cubic& c = iv.basis[r];
    out[r] = std::clamp(c.a0 + u * (c.a1 + u * (c.a2 + u * c.a3)), 0.0, 1.0);
  }
}

void ISplineBasis::ispline(double x, std::span<double> out) const {
  const int B = size();
  if (x <= knots_.lo()) {
    std::fill(out.begin(), out.begin() + B, 0.0);
    return;
  }
  if (x >= knots_.hi()) {
    std::fill(out.begin(), out.begin() + B, 1.0);
    return;
  }
  const int j = interval(x);
  double a[3];
  active(j, x, a);
  for (int i = 0; i < B; ++i) out[i] = i < j ? 1.0 : (i > j + 2 ? 0.0 : a[i - j]);
}

std::vector<double> ISplineBasis::ispline(double x) const {
  std::vector<double> out(size());
  ispline(x, out);
  return out;
}

void ISplineBasis::mspline(double x, std::span<double> out) const {
  const auto t = knots_.full();
  const double xc = std::clamp(x, knots_.lo(), knots_.hi());
  const int j = interval(xc);
  mspline_recursion(t, KnotSequence::kOrder - 1 + j, xc, out);
}

std::vector<double> ISplineBasis::mspline(double x) const {
  std::vector<double> out(size());
  mspline(x, out);
  return out;
}

ISplineCurve::ISplineCurve(std::shared_ptr<const ISplineBasis> basis, std::vector<double> coeffs)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
  if (static_cast<int>(coeffs_.size()) != basis_->size())
    throw ContractViolation("I-spline curve needs " + std::to_string(basis_->size()) +
                            " coefficients, got " + std::to_string(coeffs_.size()));
  suffix_.assign(coeffs_.size() + 1, 0.0);
  for (int i = static_cast<int>(coeffs_.size()) - 1; i >= 0; --i) suffix_[i] = suffix_[i + 1] + coeffs_[i];
}

ISplineCurve::ISplineCurve(const KnotSequence& knots, std::vector<double> coeffs)
    : ISplineCurve(std::make_shared<const ISplineBasis>(knots), std::move(coeffs)) {}

double ISplineCurve::operator()(double m) const {
  const auto& kn = basis_->knots();
  if (m <= kn.lo()) return suffix_[0];
  if (m >= kn.hi()) return 0.0;
  const int j = basis_->interval(m);
  double a[3];
  basis_->active(j, m, a);
  double g = suffix_[std::min<std::size_t>(j + 3, coeffs_.size())];
  for (int r = 0; r < 3; ++r) g += coeffs_[j + r] * (1.0 - a[r]);
  return g;
}

double eval_curve(const CurveModel& g, double m) {
  return std::visit([m](const auto& c) { return c(m); }, g);
}

void eval_curve(const CurveModel& g, std::span<const double> grid, std::span<double> out) {
  std::visit(
      [&](const auto& c) {
        for (std::size_t i = 0; i < grid.size(); ++i) out[i] = c(grid[i]);
      },
      g);
}

std::vector<double> eval_curve(const CurveModel& g, std::span<const double> grid) {
  std::vector<double> out(grid.size());
  eval_curve(g, grid, out);
  return out;
}

bool is_non_increasing(std::span<const double> values, double tol) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] <= values[i - 1] + tol)) return false;
  return true;
}

bool check_monotone_decreasing(const CurveModel& g, std::span<const double> grid) {
  if (grid.size() < 2) throw ContractViolation("monotonicity check needs at least 2 grid points");
  double prev = eval_curve(g, grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = eval_curve(g, grid[i]);
    if (!(cur <= prev + 1e-9)) return false;
    prev = cur;
  }
  return true;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
  v[n - 1] = hi;
  return v;
}

Eigen::MatrixXd design_matrix(const ISplineBasis& basis, std::span<const double> m) {
  const int B = basis.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(m.size()), B);
  std::vector<double> row(B);
  for (std::size_t r = 0; r < m.size(); ++r) {
    basis.ispline(m[r], row);
    for (int i = 0; i < B; ++i) X(static_cast<Eigen::Index>(r), i) = 1.0 - row[i];
  }
  return X;
}

LsFit ls_fit(const ISplineBasis& basis, std::span<const double> m, std::span<const double> y,
             double sigma_d) {
  const int B = basis.size();
  if (m.size() != y.size() || m.size() < static_cast<std::size_t>(B))
    throw ContractViolation("ls_fit needs equal-length m and y with at least B points");
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(B, B);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(B);
  // Rows are 0 before the active window, 1 after it: accumulate sparsely.
  Eigen::VectorXd row(B);
  for (std::size_t r = 0; r < m.size(); ++r) {
    const double x = m[r];
    if (x <= basis.knots().lo()) {
      row.setOnes();
    } else if (x >= basis.knots().hi()) {
      row.setZero();
    } else {
      const int j = basis.interval(x);
      double a[3];
      basis.active(j, x, a);
      for (int i = 0; i < B; ++i) row[i] = i < j ? 0.0 : (i > j + 2 ? 1.0 : 1.0 - a[i - j]);
    }
    gram.selfadjointView<Eigen::Lower>().rankUpdate(row);
    xty += y[r] * row;
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += kLsRidge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  LsFit fit;
  fit.coeffs = ldlt.solve(xty);
  fit.cov = sigma_d * sigma_d * ldlt.solve(Eigen::MatrixXd::Identity(B, B));
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose());
  fit.gram = std::move(gram);
  return fit;
}

}  // namespace bpcal
