#pragma once

// Monotone decreasing MIC -> DIA curves: the four-parameter logistic and the
// I-spline curve g(m) = sum_j c_j (1 - I_j(m)).

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace bpcal {

/// Weighted average of two logistic curves with rates beta3 and beta4 around
/// the inflection beta2, decreasing from beta1 to 0.
struct Logistic4 {
  double beta1 = 1.0;  // upper asymptote, mm
  double beta2 = 0.0;  // inflection, log2 MIC
  double beta3 = 1.0;
  double beta4 = 1.0;

  double beta_star() const { return 2.0 * beta3 * beta4 / (beta3 + beta4); }
  double operator()(double m) const;
  bool valid() const { return beta1 > 0.0 && beta3 > 0.0 && beta4 > 0.0; }
};

/// d = intercept + slope * m. Used for simulation truths only.
struct LinearCurve {
  double intercept = 0.0;
  double slope = -1.0;
  double operator()(double m) const { return intercept + slope * m; }
};

/// Interior knots strictly inside (lo, hi); the boundary knots carry
/// multiplicity 3 in the full knot vector.
class KnotSequence {
 public:
  static constexpr int kOrder = 3;  // M-spline order (quadratic M, cubic I)

  KnotSequence(std::vector<double> interior, double lo, double hi);

  /// Interior knots every `spacing` units strictly inside (lo, hi).
  static KnotSequence equally_spaced(double lo, double hi, double spacing);

  const std::vector<double>& interior() const { return interior_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int k() const { return static_cast<int>(interior_.size()); }
  int num_bases() const { return k() + kOrder; }
  /// lo x3, interior..., hi x3.
  std::vector<double> full() const;

  friend bool operator==(const KnotSequence&, const KnotSequence&) = default;

 private:
  std::vector<double> interior_;
  double lo_;
  double hi_;
};

/// Precomputed M-/I-spline basis for one knot sequence. On each knot interval
/// every I-spline is either 0, 1 or one of three active cubics.
class ISplineBasis {
 public:
  explicit ISplineBasis(KnotSequence knots);

  const KnotSequence& knots() const { return knots_; }
  int size() const { return knots_.num_bases(); }

  /// All I-spline values at x (clamped to [lo, hi]).
  void ispline(double x, std::span<double> out) const;
  std::vector<double> ispline(double x) const;

  /// All M-spline values at x via the de Boor style recursion. Right-continuous
  /// except at hi, where the left limit is returned.
  void mspline(double x, std::span<double> out) const;
  std::vector<double> mspline(double x) const;

  /// Index j of the knot interval holding x (after clamping); the active
  /// bases on interval j are j, j+1, j+2.
  int interval(double x) const;

  /// Values of the three active I-splines on interval j at x.
  void active(int j, double x, double out[3]) const;

 private:
  struct Cubic {
    double a0, a1, a2, a3;  // in u = (x - start) / width
  };
  struct Interval {
    double start;
    double width;
    Cubic basis[3];
  };

  KnotSequence knots_;
  std::vector<double> breaks_;  // lo, interior..., hi
  std::vector<Interval> intervals_;
};

/// g(m) = sum_j coeffs_j (1 - I_j(m)); g(lo) = sum of coeffs, g(hi) = 0.
class ISplineCurve {
 public:
  ISplineCurve(std::shared_ptr<const ISplineBasis> basis, std::vector<double> coeffs);
  ISplineCurve(const KnotSequence& knots, std::vector<double> coeffs);

  const ISplineBasis& basis() const { return *basis_; }
  std::shared_ptr<const ISplineBasis> basis_ptr() const { return basis_; }
  const KnotSequence& knots() const { return basis_->knots(); }
  const std::vector<double>& coeffs() const { return coeffs_; }

  double operator()(double m) const;

 private:
  std::shared_ptr<const ISplineBasis> basis_;
  std::vector<double> coeffs_;
  std::vector<double> suffix_;  // suffix_[i] = sum_{l >= i} coeffs_[l], size B+1
};

using CurveModel = std::variant<Logistic4, ISplineCurve, LinearCurve>;

double eval_curve(const CurveModel& g, double m);
void eval_curve(const CurveModel& g, std::span<const double> grid, std::span<double> out);
std::vector<double> eval_curve(const CurveModel& g, std::span<const double> grid);

/// True iff g never rises by more than 1e-9 between consecutive grid points.
bool check_monotone_decreasing(const CurveModel& g, std::span<const double> grid);
bool is_non_increasing(std::span<const double> values, double tol = 1e-9);

/// `n` equally spaced points on [lo, hi].
std::vector<double> linspace(double lo, double hi, std::size_t n);

struct LsFit {
  Eigen::VectorXd coeffs;
  Eigen::MatrixXd cov;   // sigma_d^2 (X'X + eps I)^-1
  Eigen::MatrixXd gram;  // X'X + eps I
};

inline constexpr double kLsRidge = 1e-8;

/// Decreasing-basis design matrix: row r holds 1 - I_j(m_r).
Eigen::MatrixXd design_matrix(const ISplineBasis& basis, std::span<const double> m);

/// Least squares regression of y on the decreasing basis at m.
LsFit ls_fit(const ISplineBasis& basis, std::span<const double> m, std::span<const double> y,
             double sigma_d);

}  // namespace bpcal
