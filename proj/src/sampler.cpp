#include "bpcal/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bpcal/normal.hpp"

namespace bpcal {

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::logistic4:
      return "logistic4";
    case ModelKind::spline_rw:
      return "spline-rw";
    case ModelKind::spline_rj:
      return "spline-rj";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model(const std::string& name) {
  if (name == "logistic4" || name == "logistic") return ModelKind::logistic4;
  if (name == "spline-rw" || name == "spline_rw") return ModelKind::spline_rw;
  if (name == "spline-rj" || name == "spline_rj") return ModelKind::spline_rj;
  return std::nullopt;
}

void SamplerConfig::validate() const {
  if (iterations < 1) throw ContractViolation("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ContractViolation("burn-in must be in [0, iterations)");
  if (thin < 1) throw ContractViolation("thin must be >= 1");
  if (grid_points < 100) throw ContractViolation("grid_points must be >= 100");
  if (adapt_window < 2) throw ContractViolation("adapt_window must be >= 2");
  if (k_max < 1) throw ContractViolation("k_max must be >= 1");
  if (initial_knots < 1 || initial_knots > k_max)
    throw ContractViolation("initial_knots must be in [1, k_max]");
  if (!(knot_spacing > 0.0)) throw ContractViolation("knot_spacing must be positive");
}

// ---------------------------------------------------------------------------
// Adaptive random-walk proposal

AdaptiveProposal::AdaptiveProposal(int dim, double base_var, int adapt_start, int window, int burn_in)
    : dim_(dim),
      base_var_(base_var),
      adapt_start_(adapt_start),
      window_(window),
      burn_in_(burn_in),
      target_rate_(dim == 1 ? 0.44 : 0.234) {
  shape_ = base_var_ * Eigen::MatrixXd::Identity(dim, dim);
  history_.reserve(static_cast<std::size_t>(window));
  refresh_factor();
}

Eigen::MatrixXd AdaptiveProposal::covariance() const { return factor_ * factor_.transpose(); }

void AdaptiveProposal::refresh_factor() {
  const double scale2 = std::exp(2.0 * log_scale_);
  Eigen::LLT<Eigen::MatrixXd> llt(scale2 * shape_);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
  } else {
    factor_ = (scale2 * shape_.diagonal().cwiseMax(1e-12)).cwiseSqrt().asDiagonal();
  }
}

Eigen::VectorXd AdaptiveProposal::propose(const Eigen::VectorXd& x, Rng& rng) {
  Eigen::VectorXd z(dim_);
  for (int i = 0; i < dim_; ++i) z[i] = rng.normal();
  return x + factor_ * z;
}

void AdaptiveProposal::record(bool accepted, const Eigen::VectorXd& state, int iteration) {
  if (static_cast<int>(history_.size()) < window_) {
    history_.push_back(state);
  } else {
    history_[head_] = state;
    head_ = (head_ + 1) % history_.size();
  }

  bool changed = false;
  if (iteration >= adapt_start_ && history_.size() >= 2) {
    if (!covariance_phase_) {
      covariance_phase_ = true;
      log_scale_ = 0.0;
      phase_start_ = iteration;
    }
    const auto n = static_cast<double>(history_.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim_);
    for (const auto& h : history_) mean += h;
    mean /= n;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim_, dim_);
    for (const auto& h : history_) {
      const Eigen::VectorXd r = h - mean;
      cov.selfadjointView<Eigen::Lower>().rankUpdate(r);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= (n - 1.0);
    cov.diagonal().array() += 1e-8;
    shape_ = (2.38 * 2.38 / dim_) * cov;
    changed = true;
  }
  if (iteration < burn_in_) {
    const double gain = std::pow(static_cast<double>(iteration - phase_start_ + 1), -0.6);
    log_scale_ = std::clamp(log_scale_ + gain * ((accepted ? 1.0 : 0.0) - target_rate_), -20.0, 5.0);
    changed = true;
  }
  if (changed) refresh_factor();
}

// ---------------------------------------------------------------------------

double knot_count_log_prior(int k) { return k * std::log(3.0) - std::lgamma(k + 1.0); }

double truncated_poisson_mean(double rate, int k_max) {
  double num = 0.0, den = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    const double p = std::exp(k * std::log(rate) - std::lgamma(k + 1.0));
    num += k * p;
    den += p;
  }
  return num / den;
}

namespace {

constexpr double kLatentProposalVar = 0.5;
constexpr double kLambdaHalfWidth = 0.1;
constexpr double kLambdaMax = 2.0;
constexpr double kCoefPriorVar = 100.0;

// Number of feasible RJ move types at knot count k.
int rj_move_count(int k, int k_max) { return 1 + (k < k_max ? 1 : 0) + (k > 1 ? 1 : 0); }

double median_of(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Chain::Chain(const SamplerConfig& config, const AssayDataset& data)
    : config_(config),
      data_(data),
      iso_(expand_isolates(data)),
      rng_(config.seed),
      censoring_(config.model == ModelKind::logistic4) {
  config_.validate();
  y_.assign(iso_.dia.begin(), iso_.dia.end());
  grid_ = linspace(data.grid_lo(), data.grid_hi(), static_cast<std::size_t>(config_.grid_points));

  state_.m.resize(iso_.size());
  for (std::size_t i = 0; i < iso_.size(); ++i) state_.m[i] = iso_.mic[i] - 0.5;

  const double lo = data.grid_lo(), hi = data.grid_hi();
  switch (config_.model) {
    case ModelKind::logistic4: {
      const double top = *std::max_element(y_.begin(), y_.end());
      theta_ = Eigen::Vector4d(std::log(top), median_of(iso_.mic), 0.0, 0.0);
      break;
    }
    case ModelKind::spline_rw:
    case ModelKind::spline_rj: {
      KnotSequence knots = [&] {
        if (config_.model == ModelKind::spline_rw) return KnotSequence::equally_spaced(lo, hi, config_.knot_spacing);
        std::vector<double> interior;
        const int k = config_.initial_knots;
        for (int j = 1; j <= k; ++j) interior.push_back(lo + (hi - lo) * j / (k + 1.0));
        return KnotSequence(std::move(interior), lo, hi);
      }();
      auto basis = std::make_shared<const ISplineBasis>(std::move(knots));
      const int B = basis->size();
      std::vector<double> coeffs(static_cast<std::size_t>(B), 1.0);
      if (iso_.size() >= static_cast<std::size_t>(B)) {
        const LsFit fit = ls_fit(*basis, state_.m, y_, data.sigma_d());
        for (int j = 0; j < B; ++j) coeffs[static_cast<std::size_t>(j)] = fit.coeffs[j] > 0.0 ? fit.coeffs[j] : 0.01;
      }
      theta_.resize(B);
      for (int j = 0; j < B; ++j) {
        const double c = coeffs[static_cast<std::size_t>(j)];
        theta_[j] = config_.model == ModelKind::spline_rw ? std::log(c) : c;
      }
      state_.curve = ISplineCurve(basis, coeffs);
      break;
    }
  }
  state_.curve = curve_from_theta(theta_);
  state_.lambda = 1.0;
  state_.dpm = DpmState::single_cluster(state_.m, 1.0);
  refresh_g0(state_.dpm, rng_);

  if (config_.model != ModelKind::spline_rj)
    proposal_ = AdaptiveProposal(static_cast<int>(theta_.size()), 0.2, config_.adapt_start, config_.adapt_window,
                                 config_.burn_in);

  refresh_caches();
  for (std::size_t i = 0; i < iso_.size(); ++i) {
    if (!std::isfinite(mic_lp_[i]) || !std::isfinite(dia_lp_[i]))
      throw InitError("non-finite log-likelihood at initialization for isolate " + std::to_string(i) +
                      " (mic " + std::to_string(iso_.mic[i]) + ", dia " + std::to_string(iso_.dia[i]) + ")");
  }
}

void Chain::refresh_caches() {
  const std::size_t n = iso_.size();
  d_.resize(n);
  mic_lp_.resize(n);
  dia_lp_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Censor mc = censoring_ ? iso_.mic_censor[i] : Censor::none;
    const Censor dc = censoring_ ? iso_.dia_censor[i] : Censor::none;
    d_[i] = eval_curve(state_.curve, state_.m[i]);
    mic_lp_[i] = mic_obs_logprob(iso_.mic[i], state_.m[i], data_.sigma_m(), mc);
    dia_lp_[i] = dia_obs_logprob(iso_.dia[i], d_[i], data_.sigma_d(), dc);
  }
}

void Chain::set_latent(std::vector<double> m) {
  if (m.size() != iso_.size()) throw ContractViolation("set_latent: size mismatch");
  state_.m = std::move(m);
  ls_cache_.reset();
  refresh_caches();
}

void Chain::set_curve(const CurveModel& curve) {
  state_.curve = curve;
  if (const auto* s = std::get_if<ISplineCurve>(&curve)) {
    theta_.resize(static_cast<Eigen::Index>(s->coeffs().size()));
    for (std::size_t j = 0; j < s->coeffs().size(); ++j)
      theta_[static_cast<Eigen::Index>(j)] =
          config_.model == ModelKind::spline_rw ? std::log(s->coeffs()[j]) : s->coeffs()[j];
  } else if (const auto* l = std::get_if<Logistic4>(&curve)) {
    theta_ = Eigen::Vector4d(std::log(l->beta1), l->beta2, std::log(l->beta3), std::log(l->beta4));
  }
  ls_cache_.reset();
  refresh_caches();
}

double Chain::dia_loglik(const CurveModel& curve) {
  const std::size_t n = iso_.size();
  prop_d_.resize(n);
  prop_dia_lp_.resize(n);
  eval_curve(curve, state_.m, prop_d_);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Censor dc = censoring_ ? iso_.dia_censor[i] : Censor::none;
    total += prop_dia_lp_[i] = dia_obs_logprob(iso_.dia[i], prop_d_[i], data_.sigma_d(), dc);
  }
  return total;
}

void Chain::adopt_proposed_dia() {
  d_.swap(prop_d_);
  dia_lp_.swap(prop_dia_lp_);
}

double Chain::curve_log_prior(const Eigen::VectorXd& theta) const {
  double lp = 0.0;
  switch (config_.model) {
    case ModelKind::logistic4:
      for (Eigen::Index j = 0; j < theta.size(); ++j) lp += normal_logpdf(theta[j], 0.0, kCoefPriorVar);
      break;
    case ModelKind::spline_rw:
      lp = normal_logpdf(theta[0], 0.0, kCoefPriorVar);
      for (Eigen::Index j = 1; j < theta.size(); ++j) lp += normal_logpdf(theta[j], theta[j - 1], state_.lambda);
      break;
    case ModelKind::spline_rj:
      for (Eigen::Index j = 0; j < theta.size(); ++j) lp += normal_logpdf(theta[j], 0.0, kCoefPriorVar);
      break;
  }
  return lp;
}

CurveModel Chain::curve_from_theta(const Eigen::VectorXd& theta) const {
  switch (config_.model) {
    case ModelKind::logistic4:
      return Logistic4{std::exp(theta[0]), theta[1], std::exp(theta[2]), std::exp(theta[3])};
    case ModelKind::spline_rw: {
      std::vector<double> c(static_cast<std::size_t>(theta.size()));
      for (Eigen::Index j = 0; j < theta.size(); ++j) c[static_cast<std::size_t>(j)] = std::exp(theta[j]);
      return ISplineCurve(std::get<ISplineCurve>(state_.curve).basis_ptr(), std::move(c));
    }
    case ModelKind::spline_rj: {
      std::vector<double> c(theta.data(), theta.data() + theta.size());
      return ISplineCurve(std::get<ISplineCurve>(state_.curve).basis_ptr(), std::move(c));
    }
  }
  return state_.curve;
}

bool Chain::feasible(const CurveModel& curve) const {
  if (!config_.use_likelihood) return true;
  if (config_.model != ModelKind::spline_rj) return true;
  return check_monotone_decreasing(curve, grid_);
}

void Chain::step() {
  ++state_.iteration;
  update_latent_mics();
  update_curve();
  if (config_.model == ModelKind::spline_rw) update_lambda();
  if (config_.model == ModelKind::spline_rj) rjmcmc_step();
  update_density();
}

void Chain::update_latent_mics() {
  const double sd = std::sqrt(kLatentProposalVar);
  MoveStats& st = stats_["latent"];
  for (std::size_t i = 0; i < iso_.size(); ++i) {
    const double cur = state_.m[i];
    const double prop = cur + sd * rng_.normal();
    double log_a = state_.dpm.log_conditional_ratio(i, prop, cur);
    double mic_lp = 0.0, dia_lp = 0.0, d = 0.0;
    if (config_.use_likelihood) {
      const Censor mc = censoring_ ? iso_.mic_censor[i] : Censor::none;
      const Censor dc = censoring_ ? iso_.dia_censor[i] : Censor::none;
      d = eval_curve(state_.curve, prop);
      mic_lp = mic_obs_logprob(iso_.mic[i], prop, data_.sigma_m(), mc);
      dia_lp = dia_obs_logprob(iso_.dia[i], d, data_.sigma_d(), dc);
      log_a += (mic_lp + dia_lp) - (mic_lp_[i] + dia_lp_[i]);
    }
    ++st.proposed;
    if (std::log(rng_.uniform()) < log_a) {
      ++st.accepted;
      state_.m[i] = prop;
      if (config_.use_likelihood) {
        d_[i] = d;
        mic_lp_[i] = mic_lp;
        dia_lp_[i] = dia_lp;
      } else {
        d_[i] = eval_curve(state_.curve, prop);
      }
    }
  }
}

void Chain::update_curve() {
  MoveStats& st = stats_["curve"];
  Eigen::VectorXd prop;
  if (config_.model == ModelKind::spline_rj) {
    // Random walk shaped by the least-squares covariance of the current knots.
    const LsFit& fit = current_ls();
    Eigen::LLT<Eigen::MatrixXd> llt(fit.gram);
    const auto B = theta_.size();
    Eigen::VectorXd z(B);
    for (Eigen::Index j = 0; j < B; ++j) z[j] = rng_.normal();
    const double c = std::exp(rj_log_scale_) * 2.38 / std::sqrt(static_cast<double>(B)) * data_.sigma_d();
    prop = theta_ + c * llt.matrixU().solve(z);
  } else {
    prop = proposal_.propose(theta_, rng_);
  }

  const CurveModel curve = curve_from_theta(prop);
  bool accepted = false;
  ++st.proposed;
  if (feasible(curve)) {
    double log_a = curve_log_prior(prop) - curve_log_prior(theta_);
    double new_dia = 0.0;
    if (config_.use_likelihood) {
      new_dia = dia_loglik(curve);
      double old_dia = 0.0;
      for (double v : dia_lp_) old_dia += v;
      log_a += new_dia - old_dia;
    }
    if (std::log(rng_.uniform()) < log_a) {
      accepted = true;
      ++st.accepted;
      theta_ = prop;
      state_.curve = curve;
      if (config_.use_likelihood) adopt_proposed_dia(); else refresh_caches();
    }
  }

  if (config_.model == ModelKind::spline_rj) {
    if (state_.iteration < config_.burn_in) {
      const double gain = std::pow(static_cast<double>(state_.iteration), -0.6);
      rj_log_scale_ = std::clamp(rj_log_scale_ + gain * ((accepted ? 1.0 : 0.0) - 0.234), -20.0, 5.0);
    }
  } else {
    proposal_.record(accepted, theta_, state_.iteration);
  }
}

void Chain::update_lambda() {
  if (config_.model != ModelKind::spline_rw) throw ContractViolation("lambda exists only for spline-rw");
  MoveStats& st = stats_["lambda"];
  ++st.proposed;
  const double prop = state_.lambda + rng_.uniform(-kLambdaHalfWidth, kLambdaHalfWidth);
  if (prop <= 0.0 || prop >= kLambdaMax) return;
  double ss = 0.0;
  for (Eigen::Index j = 1; j < theta_.size(); ++j) {
    const double d = theta_[j] - theta_[j - 1];
    ss += d * d;
  }
  const double n_inc = static_cast<double>(theta_.size() - 1);
  auto loglik = [&](double lam) { return -0.5 * n_inc * std::log(2.0 * std::numbers::pi * lam) - 0.5 * ss / lam; };
  if (std::log(rng_.uniform()) < loglik(prop) - loglik(state_.lambda)) {
    ++st.accepted;
    state_.lambda = prop;
  }
}

LsFit Chain::ls_for(const ISplineBasis& basis) const {
  if (config_.use_likelihood) return ls_fit(basis, state_.m, y_, data_.sigma_d());
  // Without data the least-squares fit carries no information and its draws
  // barely overlap the coefficient prior, so knot moves would never mix.
  // Propose from the prior itself through the same (mean, gram) form:
  // sigma_d^2 gram^-1 = kCoefPriorVar * I.
  const int B = basis.size();
  const double s2 = data_.sigma_d() * data_.sigma_d();
  LsFit fit;
  fit.coeffs = Eigen::VectorXd::Zero(B);
  fit.gram = (s2 / kCoefPriorVar) * Eigen::MatrixXd::Identity(B, B);
  fit.cov = kCoefPriorVar * Eigen::MatrixXd::Identity(B, B);
  return fit;
}

const LsFit& Chain::current_ls() {
  if (!ls_cache_ || ls_cache_iteration_ != state_.iteration) {
    ls_cache_ = ls_for(std::get<ISplineCurve>(state_.curve).basis());
    ls_cache_iteration_ = state_.iteration;
  }
  return *ls_cache_;
}

double Chain::ls_log_density(const LsFit& fit, const Eigen::VectorXd& beta) const {
  Eigen::LLT<Eigen::MatrixXd> llt(fit.gram);
  const double B = static_cast<double>(beta.size());
  const double sd = data_.sigma_d();
  const Eigen::VectorXd r = beta - fit.coeffs;
  const Eigen::VectorXd lr = llt.matrixU() * r;  // r' G r = |U r|^2
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) log_det += std::log(llt.matrixL()(j, j));
  return -0.5 * B * std::log(2.0 * std::numbers::pi) - B * std::log(sd) + log_det -
         0.5 * lr.squaredNorm() / (sd * sd);
}

Eigen::VectorXd Chain::ls_draw(const LsFit& fit) {
  Eigen::LLT<Eigen::MatrixXd> llt(fit.gram);
  Eigen::VectorXd z(fit.coeffs.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng_.normal();
  return fit.coeffs + data_.sigma_d() * llt.matrixU().solve(z);
}

void Chain::rjmcmc_step() {
  if (config_.model != ModelKind::spline_rj) throw ContractViolation("rjmcmc_step needs spline-rj");
  const auto& cur_curve = std::get<ISplineCurve>(state_.curve);
  const KnotSequence& knots = cur_curve.knots();
  const int k = knots.k();
  const int k_max = config_.k_max;
  const double lo = knots.lo(), hi = knots.hi();

  enum class Move { birth, move, death };
  std::vector<Move> options;
  if (k < k_max) options.push_back(Move::birth);
  options.push_back(Move::move);
  if (k > 1) options.push_back(Move::death);
  const Move type = options[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(options.size()) - 1))];

  std::vector<double> interior = knots.interior();
  double log_extra = 0.0;  // knot-count prior and move-type bookkeeping
  const char* name = "move";
  switch (type) {
    case Move::birth: {
      name = "birth";
      const double t = rng_.uniform(lo, hi);
      interior.insert(std::upper_bound(interior.begin(), interior.end(), t), t);
      log_extra = knot_count_log_prior(k + 1) - knot_count_log_prior(k) +
                  std::log(static_cast<double>(rj_move_count(k, k_max))) -
                  std::log(static_cast<double>(rj_move_count(k + 1, k_max)));
      break;
    }
    case Move::death: {
      name = "death";
      const int j = rng_.uniform_int(0, k - 1);
      interior.erase(interior.begin() + j);
      log_extra = knot_count_log_prior(k - 1) - knot_count_log_prior(k) +
                  std::log(static_cast<double>(rj_move_count(k, k_max))) -
                  std::log(static_cast<double>(rj_move_count(k - 1, k_max)));
      break;
    }
    case Move::move: {
      const int j = rng_.uniform_int(0, k - 1);
      const double left = j == 0 ? lo : interior[static_cast<std::size_t>(j - 1)];
      const double right = j == k - 1 ? hi : interior[static_cast<std::size_t>(j + 1)];
      interior[static_cast<std::size_t>(j)] = rng_.uniform(left, right);
      break;
    }
  }
  MoveStats& st = stats_[name];
  ++st.proposed;

  std::shared_ptr<const ISplineBasis> basis;
  try {
    basis = std::make_shared<const ISplineBasis>(KnotSequence(interior, lo, hi));
  } catch (const ContractViolation&) {
    return;  // coincident knots: a null-probability event
  }
  const LsFit& cur_fit = current_ls();
  LsFit new_fit = ls_for(*basis);
  const Eigen::VectorXd beta_new = ls_draw(new_fit);
  std::vector<double> coeffs(beta_new.data(), beta_new.data() + beta_new.size());
  const CurveModel curve = ISplineCurve(basis, std::move(coeffs));
  if (!feasible(curve)) return;

  double log_prior_new = 0.0, log_prior_old = 0.0;
  for (Eigen::Index j = 0; j < beta_new.size(); ++j) log_prior_new += normal_logpdf(beta_new[j], 0.0, kCoefPriorVar);
  for (Eigen::Index j = 0; j < theta_.size(); ++j) log_prior_old += normal_logpdf(theta_[j], 0.0, kCoefPriorVar);

  double log_a = log_prior_new - log_prior_old + log_extra + ls_log_density(cur_fit, theta_) -
                 ls_log_density(new_fit, beta_new);
  if (config_.use_likelihood) {
    double old_dia = 0.0;
    for (double v : dia_lp_) old_dia += v;
    log_a += dia_loglik(curve) - old_dia;
  }
  if (std::log(rng_.uniform()) < log_a) {
    ++st.accepted;
    theta_ = beta_new;
    state_.curve = curve;
    ls_cache_ = std::move(new_fit);
    ls_cache_iteration_ = state_.iteration;
    if (config_.use_likelihood) adopt_proposed_dia(); else refresh_caches();
  }
}

void Chain::update_density() {
  dpm_sweep(state_.dpm, state_.m, rng_);
  MoveStats& st = stats_["alpha"];
  ++st.proposed;
  if (update_alpha(state_.dpm, rng_)) ++st.accepted;
}

ChainTrace Chain::run() {
  ChainTrace trace;
  trace.config = config_;
  trace.dataset_digest = data_.digest();
  trace.grid = grid_;
  for (int t = 1; t <= config_.iterations; ++t) {
    step();
    if (t > config_.burn_in && (t - config_.burn_in) % config_.thin == 0) {
      CurveSample s;
      s.iteration = t;
      s.curve = state_.curve;
      if (config_.model == ModelKind::spline_rw) s.lambda = state_.lambda;
      if (config_.model == ModelKind::spline_rj) s.k = std::get<ISplineCurve>(state_.curve).knots().k();
      s.alpha = state_.dpm.alpha;
      s.clusters = state_.dpm.num_clusters();
      trace.samples.push_back(std::move(s));
      trace.g_grid.push_back(eval_curve(state_.curve, grid_));
      trace.f_grid.push_back(density_eval(state_.dpm, grid_));
    }
  }
  trace.acceptance = stats_;
  return trace;
}

ChainTrace run_chain(const SamplerConfig& config, const AssayDataset& data) {
  Chain chain(config, data);
  return chain.run();
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ContractViolation("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

PosteriorSummary posterior_summary(const ChainTrace& trace, std::size_t min_samples) {
  if (trace.size() < min_samples)
    throw ContractViolation("posterior summary needs at least " + std::to_string(min_samples) + " samples, got " +
                            std::to_string(trace.size()));
  PosteriorSummary s;
  s.grid = trace.grid;
  const std::size_t G = trace.grid.size();
  for (auto* v : {&s.g_median, &s.g_lo, &s.g_hi, &s.f_median, &s.f_lo, &s.f_hi}) v->resize(G);
  std::vector<double> col(trace.size());
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t r = 0; r < trace.size(); ++r) col[r] = trace.g_grid[r][g];
    s.g_median[g] = quantile(col, 0.5);
    s.g_lo[g] = quantile(col, 0.025);
    s.g_hi[g] = quantile(col, 0.975);
    for (std::size_t r = 0; r < trace.size(); ++r) col[r] = trace.f_grid[r][g];
    s.f_median[g] = quantile(col, 0.5);
    s.f_lo[g] = quantile(col, 0.025);
    s.f_hi[g] = quantile(col, 0.975);
  }
  return s;
}

}  // namespace bpcal
