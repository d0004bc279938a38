#include "habitlens/dynamic_rp.hpp"

#include "habitlens/error.hpp"
#include "habitlens/lp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace habitlens {

Vector Certificate::stacked(Index t) const {
  const Index j = contemporaneous.at(static_cast<std::size_t>(t)).size();
  const Index j2 = habit.empty() ? 0 : habit.front().at(static_cast<std::size_t>(t)).size();
  Vector out(j + lags() * j2);
  out.head(j) = contemporaneous[static_cast<std::size_t>(t)];
  for (int l = 1; l <= lags(); ++l) out.segment(j + (l - 1) * j2, j2) = habit[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(t)];
  return out * std::pow(beta, -static_cast<double>(t));
}

namespace {

void require_periods(Index periods, int lags) {
  if (periods < 2 * lags + 1) {
    throw Error(ErrorCode::too_few_periods, "need at least " + std::to_string(2 * lags + 1) + " periods, have " +
                                                std::to_string(periods));
  }
}

double price_scale(const HouseholdPanel& panel) {
  const double mean = panel.mean_active_price();
  return mean > 0.0 ? 1.0 / mean : 1.0;
}

// Augmented bundle at zero-based date t (needs t >= L).
Vector augmented_at(const Technology& tech, const std::vector<Vector>& quantities, Index t) {
  std::vector<Vector> bundles;
  bundles.reserve(static_cast<std::size_t>(tech.lags()) + 1);
  for (int l = 0; l <= tech.lags(); ++l) bundles.push_back(quantities[static_cast<std::size_t>(t - l)]);
  return augmented_bundle(tech, bundles);
}

}  // namespace

// ---------------------------------------------------------------------------

struct DynamicSystem::Impl {
  EngineOptions options;
  Index periods = 0;
  int lags = 1;
  double scale = 1.0;

  Technology original;
  CompactTechnology compact;
  std::vector<Index> habit_position;  // compact habit index -> original habit position
  std::vector<Vector> quantities;     // compact goods
  std::vector<Vector> prices;         // compact goods, rescaled
  std::vector<double> expenditure;    // rescaled

  StructuralVerdict verdict;
  bool structural_ok = true;

  std::vector<Index> retained;
  std::vector<Index> equality;

  // Shadow-price maps: stacked (pi^0_t, pi^1_t, ..., pi^L_t) = offset + coeff * u.
  std::vector<Vector> offset;
  std::vector<Matrix> coeff;
  Index unknowns = 0;

  // Rows of the reduced system: first the Afriat rows, then extra rows.
  struct AfriatRow {
    Index s = 0;  // position in `retained`
    Index t = 0;
    double rhs = 0.0;
    double budget = 0.0;
  };
  std::vector<AfriatRow> afriat_rows;
  Vector extra_rhs;
  Matrix w;      // full coefficient matrix on u (rows: Afriat then extra)
  Matrix range;  // orthonormal basis of range(w)

  Index value_vars() const { return static_cast<Index>(retained.size()) - 1; }

  Matrix lp_matrix(double beta) const {
    const Index m = w.rows();
    const Index nv = value_vars();
    Matrix g = Matrix::Zero(m, nv + range.cols());
    const Index na = static_cast<Index>(afriat_rows.size());
    for (Index i = 0; i < na; ++i) {
      const auto& row = afriat_rows[static_cast<std::size_t>(i)];
      if (row.s > 0) g(i, row.s - 1) += 1.0;
      if (row.t > 0) g(i, row.t - 1) -= 1.0;
      const double f = std::pow(beta, -static_cast<double>(retained[static_cast<std::size_t>(row.t)]));
      g.row(i).tail(range.cols()) = f * range.row(i);
    }
    for (Index i = na; i < m; ++i) g.row(i).tail(range.cols()) = range.row(i);
    return g;
  }

  Vector lp_rhs(double beta, double efficiency) const {
    const Index m = w.rows();
    Vector h(m);
    const Index na = static_cast<Index>(afriat_rows.size());
    for (Index i = 0; i < na; ++i) {
      const auto& row = afriat_rows[static_cast<std::size_t>(i)];
      const double f = std::pow(beta, -static_cast<double>(retained[static_cast<std::size_t>(row.t)]));
      h(i) = f * (row.rhs + (1.0 - efficiency) * row.budget);
    }
    h.tail(m - na) = extra_rhs;
    return h;
  }

  lp::Options lp_options() const {
    lp::Options o;
    o.feasibility_tol = options.feasibility_tol;
    return o;
  }
};

DynamicSystem::DynamicSystem(const HouseholdPanel& panel, const Technology& tech, const EngineOptions& options)
    : impl_(std::make_unique<Impl>()) {
  Impl& s = *impl_;
  s.options = options;
  s.periods = panel.period_count();
  s.lags = tech.lags();
  s.original = tech;
  require_periods(s.periods, s.lags);
  if (panel.goods_count() != tech.goods_count()) {
    throw Error(ErrorCode::dimension_mismatch, "panel goods count does not match technology for household " +
                                                   panel.household_id);
  }
  s.scale = price_scale(panel);

  // Unpurchased goods only enter through the full-price inequalities.
  std::vector<Index> goods;
  if (options.mode == PriceMode::missing_prices) {
    goods = panel.purchased_goods();
  } else {
    goods.resize(static_cast<std::size_t>(tech.goods_count()));
    for (Index k = 0; k < tech.goods_count(); ++k) goods[static_cast<std::size_t>(k)] = k;
  }
  s.compact = compact_technology(tech, goods);
  const Technology& ct = s.compact.technology;
  for (std::size_t h = 0; h < tech.habit_rows().size(); ++h) {
    if (std::binary_search(s.compact.rows.begin(), s.compact.rows.end(), tech.habit_rows()[h])) {
      s.habit_position.push_back(static_cast<Index>(h));
    }
  }

  const Index kc = static_cast<Index>(goods.size());
  HouseholdPanel compact_panel;
  compact_panel.household_id = panel.household_id;
  for (const auto& p : panel.periods) {
    Period cp = p;
    cp.quantities.resize(kc);
    cp.prices.resize(kc);
    for (Index c = 0; c < kc; ++c) {
      cp.quantities(c) = p.quantities(goods[static_cast<std::size_t>(c)]);
      cp.prices(c) = p.prices(goods[static_cast<std::size_t>(c)]);
    }
    s.quantities.push_back(cp.quantities);
    Vector scaled = cp.prices * s.scale;
    s.prices.push_back(scaled);
    double spend = 0.0;
    for (Index c = 0; c < kc; ++c) {
      if (cp.quantities(c) > 0.0) spend += scaled(c) * cp.quantities(c);
    }
    s.expenditure.push_back(spend);
    compact_panel.periods.push_back(std::move(cp));
  }

  s.verdict = evaluate_structure(compact_panel, ct, options.rank_tol);
  s.structural_ok = s.verdict.nc_all_pass();
  s.retained = retained_dates(s.periods, s.lags);
  s.equality = equality_dates(s.periods, s.lags);
  if (!s.structural_ok) return;

  const Index j = ct.characteristic_count();
  const Index j2 = ct.habit_count();
  const Index d = ct.augmented_size();
  const int lags = s.lags;

  // Particular solutions and null spaces of the pricing equalities.
  std::vector<Vector> particular(static_cast<std::size_t>(s.periods));
  std::vector<Matrix> null_basis(static_cast<std::size_t>(s.periods));
  std::vector<Index> block_start(static_cast<std::size_t>(s.periods), -1);
  std::vector<bool> is_equality(static_cast<std::size_t>(s.periods), false);
  Index u = 0;
  for (Index t : s.equality) {
    const auto ut = static_cast<std::size_t>(t);
    is_equality[ut] = true;
    const ActiveSlice slice = active_slice(ct, s.quantities[ut], s.prices[ut]);
    particular[ut] = solve_shadow_prices(slice, options.rank_tol);
    null_basis[ut] = shadow_price_null_space(slice, options.rank_tol);
    block_start[ut] = u;
    u += null_basis[ut].cols();
  }
  // Free blocks: pi^0_t without an equality at t, pi^l_t without one at t-l.
  std::vector<Index> free0(static_cast<std::size_t>(s.periods), -1);
  std::vector<std::vector<Index>> free_lag(static_cast<std::size_t>(lags), std::vector<Index>(static_cast<std::size_t>(s.periods), -1));
  for (Index t : s.retained) {
    const auto ut = static_cast<std::size_t>(t);
    if (!is_equality[ut]) {
      free0[ut] = u;
      u += j;
    }
    for (int l = 1; l <= lags; ++l) {
      const Index src = t - l;
      if (src < 0 || !is_equality[static_cast<std::size_t>(src)]) {
        free_lag[static_cast<std::size_t>(l - 1)][ut] = u;
        u += j2;
      }
    }
  }
  s.unknowns = u;

  for (Index t : s.retained) {
    const auto ut = static_cast<std::size_t>(t);
    Vector c = Vector::Zero(d);
    Matrix m = Matrix::Zero(d, u);
    if (is_equality[ut]) {
      c.head(j) = particular[ut].head(j);
      m.block(0, block_start[ut], j, null_basis[ut].cols()) = null_basis[ut].topRows(j);
    } else {
      m.block(0, free0[ut], j, j) = Matrix::Identity(j, j);
    }
    for (int l = 1; l <= lags; ++l) {
      const Index src = t - l;
      const Index row0 = j + (l - 1) * j2;
      if (src >= 0 && is_equality[static_cast<std::size_t>(src)]) {
        const auto us = static_cast<std::size_t>(src);
        c.segment(row0, j2) = particular[us].segment(row0, j2);
        m.block(row0, block_start[us], j2, null_basis[us].cols()) = null_basis[us].middleRows(row0, j2);
      } else {
        m.block(row0, free_lag[static_cast<std::size_t>(l - 1)][ut], j2, j2) = Matrix::Identity(j2, j2);
      }
    }
    s.offset.push_back(std::move(c));
    s.coeff.push_back(std::move(m));
  }

  std::vector<Vector> bundles;
  for (Index t : s.retained) bundles.push_back(augmented_at(ct, s.quantities, t));

  // Afriat rows: V_s - V_t - f_t dz' (c_t + M_t u) <= 0.
  const Index nr = static_cast<Index>(s.retained.size());
  std::vector<Vector> row_coeffs;
  for (Index ti = 0; ti < nr; ++ti) {
    for (Index si = 0; si < nr; ++si) {
      if (si == ti) continue;
      const Vector dz = bundles[static_cast<std::size_t>(si)] - bundles[static_cast<std::size_t>(ti)];
      Impl::AfriatRow row;
      row.s = si;
      row.t = ti;
      row.rhs = dz.dot(s.offset[static_cast<std::size_t>(ti)]);
      row.budget = s.expenditure[static_cast<std::size_t>(s.retained[static_cast<std::size_t>(ti)])];
      s.afriat_rows.push_back(row);
      row_coeffs.push_back(-(s.coeff[static_cast<std::size_t>(ti)].transpose() * dz));
    }
  }

  std::vector<double> extra_rhs;
  if (options.mode == PriceMode::full_prices) {
    // a_k' pi^0_t + sum_l a_k^a' pi^l_{t+l} <= rho_t^k for unpurchased k.
    Matrix loadings_aug(d, kc);
    loadings_aug.topRows(j) = ct.loadings();
    const Matrix ha = ct.habit_loadings();
    for (int l = 1; l <= lags; ++l) loadings_aug.middleRows(j + (l - 1) * j2, j2) = ha;
    for (Index t : s.equality) {
      const auto ut = static_cast<std::size_t>(t);
      for (Index k = 0; k < kc; ++k) {
        if (s.quantities[ut](k) > 0.0) continue;
        if (!std::isfinite(s.prices[ut](k))) {
          throw Error(ErrorCode::missing_price, "full-price mode needs a price for every good (household " +
                                                    panel.household_id + ", period " + std::to_string(t + 1) + ")");
        }
        const Vector g = loadings_aug.col(k);
        Vector coeffs = Vector::Zero(u);
        coeffs.segment(block_start[ut], null_basis[ut].cols()) = null_basis[ut].transpose() * g;
        row_coeffs.push_back(coeffs);
        extra_rhs.push_back(s.prices[ut](k) - g.dot(particular[ut]));
      }
    }
  }
  if (options.nonnegative_shadow_prices) {
    for (Index ti = 0; ti < nr; ++ti) {
      const auto uti = static_cast<std::size_t>(ti);
      for (Index r = 0; r < d; ++r) {
        row_coeffs.push_back(-s.coeff[uti].row(r).transpose());
        extra_rhs.push_back(s.offset[uti](r));
      }
    }
  }
  s.extra_rhs = Eigen::Map<const Vector>(extra_rhs.data(), static_cast<Index>(extra_rhs.size()));

  const Index m = static_cast<Index>(row_coeffs.size());
  s.w.resize(m, u);
  for (Index i = 0; i < m; ++i) s.w.row(i) = row_coeffs[static_cast<std::size_t>(i)].transpose();

  if (u > 0 && m > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(s.w);
    qr.setThreshold(1e-11);
    const Index r = qr.rank();
    s.range = Matrix(qr.householderQ()).leftCols(r);
  } else {
    s.range.resize(m, 0);
  }
}

DynamicSystem::~DynamicSystem() = default;
DynamicSystem::DynamicSystem(DynamicSystem&&) noexcept = default;
DynamicSystem& DynamicSystem::operator=(DynamicSystem&&) noexcept = default;

const StructuralVerdict& DynamicSystem::structure() const { return impl_->verdict; }

bool DynamicSystem::structurally_feasible() const { return impl_->structural_ok; }

bool DynamicSystem::feasible(double beta, double efficiency) const {
  const Impl& s = *impl_;
  if (!(beta > 0.0) || beta > 1.0) throw Error(ErrorCode::invalid_argument, "beta must lie in (0, 1]");
  if (!s.structural_ok) return false;
  return lp::solve_inequalities(s.lp_matrix(beta), s.lp_rhs(beta, efficiency), s.lp_options()).feasible();
}

std::optional<Certificate> DynamicSystem::certificate(double beta) const {
  const Impl& s = *impl_;
  if (!(beta > 0.0) || beta > 1.0) throw Error(ErrorCode::invalid_argument, "beta must lie in (0, 1]");
  if (!s.structural_ok) return std::nullopt;
  const lp::Result res = lp::solve_inequalities(s.lp_matrix(beta), s.lp_rhs(beta, 1.0), s.lp_options());
  if (!res.feasible()) return std::nullopt;

  const Index nv = s.value_vars();
  Vector u = Vector::Zero(s.unknowns);
  if (s.range.cols() > 0) {
    const Vector target = s.range * res.x.tail(s.range.cols());
    u = s.w.completeOrthogonalDecomposition().solve(target);
  }

  const Technology& ct = s.compact.technology;
  const Index j = ct.characteristic_count();
  const Index j2 = ct.habit_count();
  const Index jf = s.original.characteristic_count();
  const Index j2f = s.original.habit_count();
  const double unscale = 1.0 / s.scale;

  Certificate cert;
  cert.beta = beta;
  cert.dates = s.retained;
  cert.contemporaneous.assign(static_cast<std::size_t>(s.periods), Vector::Zero(jf));
  cert.habit.assign(static_cast<std::size_t>(s.lags),
                    std::vector<Vector>(static_cast<std::size_t>(s.periods + s.lags), Vector::Zero(j2f)));
  std::vector<Vector> full_quantities;
  for (std::size_t ti = 0; ti < s.retained.size(); ++ti) {
    const Index t = s.retained[ti];
    const Vector stacked = s.offset[ti] + s.coeff[ti] * u;
    Vector& p0 = cert.contemporaneous[static_cast<std::size_t>(t)];
    for (Index r = 0; r < j; ++r) p0(s.compact.rows[static_cast<std::size_t>(r)]) = stacked(r) * unscale;
    for (int l = 1; l <= s.lags; ++l) {
      Vector& pl = cert.habit[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(t)];
      for (Index h = 0; h < j2; ++h) {
        pl(s.habit_position[static_cast<std::size_t>(h)]) = stacked(j + (l - 1) * j2 + h) * unscale;
      }
    }
    cert.values.push_back((ti == 0 ? 0.0 : res.x(static_cast<Index>(ti) - 1)) * unscale);
  }
  (void)nv;
  // Bundles in the caller's coordinates.
  std::vector<Vector> q;
  for (Index t = 0; t < s.periods; ++t) {
    Vector x = Vector::Zero(s.original.goods_count());
    for (std::size_t c = 0; c < s.compact.goods.size(); ++c) x(s.compact.goods[c]) = s.quantities[static_cast<std::size_t>(t)](static_cast<Index>(c));
    q.push_back(std::move(x));
  }
  for (Index t : s.retained) cert.bundles.push_back(augmented_at(s.original, q, t));
  return cert;
}

std::optional<double> DynamicSystem::max_efficiency(double beta) const {
  const Impl& s = *impl_;
  if (!s.structural_ok) return std::nullopt;
  const Matrix g = s.lp_matrix(beta);
  const Vector h = s.lp_rhs(beta, 1.0);
  lp::Problem prob;
  for (Index c = 0; c < g.cols(); ++c) prob.add_variable(true);
  const Index e = prob.add_variable(false, -1.0);
  const Index na = static_cast<Index>(s.afriat_rows.size());
  for (Index i = 0; i < g.rows(); ++i) {
    double rhs = h(i);
    double ecoef = 0.0;
    if (i < na) {
      const auto& row = s.afriat_rows[static_cast<std::size_t>(i)];
      const double f = std::pow(beta, -static_cast<double>(s.retained[static_cast<std::size_t>(row.t)]));
      ecoef = f * row.budget;
      rhs += f * row.budget;
    }
    const Index r = prob.add_constraint(lp::Sense::less_equal, rhs);
    for (Index c = 0; c < g.cols(); ++c) prob.add_coefficient(r, c, g(i, c));
    prob.add_coefficient(r, e, ecoef);
  }
  const Index cap = prob.add_constraint(lp::Sense::less_equal, 1.0);
  prob.add_coefficient(cap, e, 1.0);
  const lp::Result res = lp::solve(prob, s.lp_options());
  if (!res.feasible()) return std::nullopt;
  return std::clamp(res.x(e), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

std::optional<Certificate> feasible_at_beta(const HouseholdPanel& panel, const Technology& tech, double beta,
                                            const EngineOptions& options) {
  return DynamicSystem(panel, tech, options).certificate(beta);
}

std::vector<double> admissible_beta_set(const HouseholdPanel& panel, const Technology& tech,
                                        std::span<const double> grid, const EngineOptions& options) {
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "beta grid is empty");
  const DynamicSystem system(panel, tech, options);
  std::vector<double> out;
  for (double b : grid) {
    if (system.feasible(b)) out.push_back(b);
  }
  return out;
}

namespace {

double efficiency_search(const DynamicSystem& system, std::span<const double> grid, double tol) {
  double best = -1.0;
  for (double beta : grid) {
    const double probe = best < 0.0 ? 0.0 : best + tol;
    if (probe >= 1.0) break;
    if (!system.feasible(beta, probe)) continue;
    double lo = probe;
    double hi = 1.0;
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (system.feasible(beta, mid)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    best = lo;
  }
  return std::max(best, 0.0);
}

}  // namespace

std::optional<double> ccei(const DynamicSystem& system, std::span<const double> grid, double tol) {
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "beta grid is empty");
  if (!system.structurally_feasible()) return std::nullopt;
  for (double beta : grid) {
    if (system.feasible(beta, 1.0)) return 1.0;
  }
  return efficiency_search(system, grid, tol);
}

std::optional<double> ccei(const HouseholdPanel& panel, const Technology& tech, std::span<const double> grid,
                           const EngineOptions& options) {
  return ccei(DynamicSystem(panel, tech, options), grid, options.ccei_tol);
}

TestOutcome run_dynamic_test(const HouseholdPanel& panel, const Technology& tech, std::span<const double> grid,
                             const EngineOptions& options, bool with_ccei) {
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "beta grid is empty");
  const DynamicSystem system(panel, tech, options);
  TestOutcome out;
  out.household_id = panel.household_id;
  out.structural = system.structure();
  if (system.structurally_feasible()) {
    for (double b : grid) {
      if (system.feasible(b)) out.admissible_betas.push_back(b);
    }
  }
  out.pass = !out.admissible_betas.empty();
  if (out.pass) {
    out.certificate = system.certificate(out.admissible_betas.front());
    out.ccei = 1.0;
  } else if (with_ccei && system.structurally_feasible()) {
    out.ccei = efficiency_search(system, grid, options.ccei_tol);
  }
  return out;
}

// ---------------------------------------------------------------------------

double certificate_violation(const HouseholdPanel& panel, const Technology& tech, const Certificate& cert,
                             const EngineOptions& options) {
  const Index periods = panel.period_count();
  const int lags = tech.lags();
  if (cert.period_count() != periods || cert.lags() != lags) {
    throw Error(ErrorCode::dimension_mismatch, "certificate does not match panel / technology");
  }
  const double scale = price_scale(panel);
  double worst = 0.0;

  for (int l = 1; l <= lags; ++l) {
    for (Index t = periods; t < periods + lags; ++t) {
      const Vector& v = cert.habit[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(t)];
      if (v.size() > 0 && v.cwiseAbs().maxCoeff() != 0.0) {
        return std::numeric_limits<double>::infinity();
      }
    }
  }

  const Index j = tech.characteristic_count();
  const Index j2 = tech.habit_count();
  for (Index t : equality_dates(periods, lags)) {
    const Period& p = panel.periods[static_cast<std::size_t>(t)];
    Vector theta(tech.augmented_size());
    theta.head(j) = cert.contemporaneous[static_cast<std::size_t>(t)];
    for (int l = 1; l <= lags; ++l) {
      theta.segment(j + (l - 1) * j2, j2) = cert.habit[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(t + l)];
    }
    const ActiveSlice slice = active_slice(tech, p.quantities, p.prices);
    worst = std::max(worst, (slice.augmented * theta - slice.prices).cwiseAbs().maxCoeff() * scale);
    if (options.mode == PriceMode::full_prices) {
      const Matrix ha = tech.habit_loadings();
      for (Index k = 0; k < tech.goods_count(); ++k) {
        if (p.active(k)) continue;
        double implied = tech.loadings().col(k).dot(theta.head(j));
        for (int l = 1; l <= lags; ++l) implied += ha.col(k).dot(theta.segment(j + (l - 1) * j2, j2));
        worst = std::max(worst, (implied - p.prices(k)) * scale);
      }
    }
  }

  std::vector<Vector> q;
  for (const auto& p : panel.periods) q.push_back(p.quantities);
  const auto dates = retained_dates(periods, lags);
  std::vector<Vector> z;
  std::vector<Vector> pi;
  for (Index t : dates) {
    z.push_back(augmented_at(tech, q, t));
    pi.push_back(cert.stacked(t));
  }
  for (std::size_t ti = 0; ti < dates.size(); ++ti) {
    for (std::size_t si = 0; si < dates.size(); ++si) {
      if (si == ti) continue;
      const double lhs = cert.values[si] - cert.values[ti] - pi[ti].dot(z[si] - z[ti]);
      worst = std::max(worst, lhs * scale);
    }
  }
  if (options.nonnegative_shadow_prices) {
    for (Index t : dates) worst = std::max(worst, -cert.stacked(t).minCoeff() * scale);
  }
  return worst;
}

std::optional<Certificate> feasible_one_lag_direct(const HouseholdPanel& panel, const Technology& tech, double beta,
                                                   const EngineOptions& options) {
  if (tech.lags() != 1) throw Error(ErrorCode::invalid_argument, "one-lag path needs L = 1");
  const Index periods = panel.period_count();
  require_periods(periods, 1);
  if (!(beta > 0.0) || beta > 1.0) throw Error(ErrorCode::invalid_argument, "beta must lie in (0, 1]");

  const double scale = price_scale(panel);
  const Index j = tech.characteristic_count();
  const Index j2 = tech.habit_count();
  const Matrix& a = tech.loadings();
  const Matrix aa = tech.habit_loadings();
  const bool free = !options.nonnegative_shadow_prices;

  // Variables per period t = 0..T-1: V_t, pi^0_t (J), pi^1_t (J2); pi^1_T is
  // the terminal zero and never materialised. Only t >= 1 is used.
  lp::Problem prob;
  std::vector<Index> v(static_cast<std::size_t>(periods), -1);
  std::vector<Index> p0(static_cast<std::size_t>(periods), -1);
  std::vector<Index> p1(static_cast<std::size_t>(periods), -1);
  for (Index t = 1; t < periods; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    v[ut] = prob.add_variable(true);
    p0[ut] = prob.variable_count();
    for (Index i = 0; i < j; ++i) prob.add_variable(free);
    p1[ut] = prob.variable_count();
    for (Index i = 0; i < j2; ++i) prob.add_variable(free);
  }

  // (L3) on t = 2..T-1 and, with full prices, (L2).
  for (Index t = 1; t <= periods - 2; ++t) {
    const Period& p = panel.periods[static_cast<std::size_t>(t)];
    for (Index k = 0; k < tech.goods_count(); ++k) {
      const bool active = p.active(k);
      if (!active && options.mode == PriceMode::missing_prices) continue;
      if (!p.has_price(k)) {
        throw Error(active ? ErrorCode::missing_active_price : ErrorCode::missing_price, "price missing");
      }
      const Index r = prob.add_constraint(active ? lp::Sense::equal : lp::Sense::less_equal, p.prices(k) * scale);
      for (Index i = 0; i < j; ++i) prob.add_coefficient(r, p0[static_cast<std::size_t>(t)] + i, a(i, k));
      for (Index h = 0; h < j2; ++h) prob.add_coefficient(r, p1[static_cast<std::size_t>(t + 1)] + h, aa(h, k));
    }
  }

  // (L1) on t = 2..T.
  std::vector<Vector> z(static_cast<std::size_t>(periods));
  for (Index t = 1; t < periods; ++t) {
    const Vector& x = panel.periods[static_cast<std::size_t>(t)].quantities;
    const Vector& xl = panel.periods[static_cast<std::size_t>(t - 1)].quantities;
    Vector zt(j + j2);
    zt.head(j) = a * x;
    zt.tail(j2) = aa * xl;
    z[static_cast<std::size_t>(t)] = zt;
  }
  for (Index t = 1; t < periods; ++t) {
    const double f = std::pow(beta, -static_cast<double>(t));
    for (Index s = 1; s < periods; ++s) {
      if (s == t) continue;
      const Vector dz = z[static_cast<std::size_t>(s)] - z[static_cast<std::size_t>(t)];
      const Index r = prob.add_constraint(lp::Sense::less_equal, 0.0);
      prob.add_coefficient(r, v[static_cast<std::size_t>(s)], 1.0);
      prob.add_coefficient(r, v[static_cast<std::size_t>(t)], -1.0);
      for (Index i = 0; i < j; ++i) prob.add_coefficient(r, p0[static_cast<std::size_t>(t)] + i, -f * dz(i));
      for (Index h = 0; h < j2; ++h) prob.add_coefficient(r, p1[static_cast<std::size_t>(t)] + h, -f * dz(j + h));
    }
  }

  lp::Options lo;
  lo.feasibility_tol = options.feasibility_tol;
  const lp::Result res = lp::solve(prob, lo);
  if (!res.feasible()) return std::nullopt;

  Certificate cert;
  cert.beta = beta;
  cert.contemporaneous.assign(static_cast<std::size_t>(periods), Vector::Zero(j));
  cert.habit.assign(1, std::vector<Vector>(static_cast<std::size_t>(periods + 1), Vector::Zero(j2)));
  for (Index t = 1; t < periods; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    cert.dates.push_back(t);
    cert.values.push_back(res.x(v[ut]) / scale);
    cert.bundles.push_back(z[ut]);
    cert.contemporaneous[ut] = res.x.segment(p0[ut], j) / scale;
    cert.habit[0][ut] = res.x.segment(p1[ut], j2) / scale;
  }
  return cert;
}

// ---------------------------------------------------------------------------

bool check_cycles_bruteforce(std::span<const Vector> prices, std::span<const Vector> bundles, std::size_t max_len,
                             double tol) {
  if (prices.size() != bundles.size()) throw Error(ErrorCode::dimension_mismatch, "cycle check: list sizes differ");
  const std::size_t n = prices.size();
  if (n < 2 || max_len < 2) return true;
  max_len = std::min(max_len, n);

  // gain[a][b] = p_a'(z_b - z_a): the term for the step a -> b.
  std::vector<std::vector<double>> gain(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) gain[a][b] = prices[a].dot(bundles[b] - bundles[a]);
  }

  // Each cycle is enumerated once per rotation class by fixing its smallest
  // element as the start.
  std::vector<std::size_t> path;
  std::vector<bool> used(n, false);
  bool ok = true;
  std::function<void(std::size_t, double)> extend = [&](std::size_t start, double sum) {
    if (!ok) return;
    const std::size_t last = path.back();
    if (path.size() >= 2 && sum + gain[last][start] < -tol) {
      ok = false;
      return;
    }
    if (path.size() == max_len) return;
    for (std::size_t next = start + 1; next < n; ++next) {
      if (used[next]) continue;
      used[next] = true;
      path.push_back(next);
      extend(start, sum + gain[last][next]);
      path.pop_back();
      used[next] = false;
      if (!ok) return;
    }
  };
  for (std::size_t start = 0; start < n && ok; ++start) {
    path.assign(1, start);
    used.assign(n, false);
    used[start] = true;
    extend(start, 0.0);
  }
  return ok;
}

bool afriat_feasible(std::span<const Vector> prices, std::span<const Vector> bundles, double feasibility_tol) {
  if (prices.size() != bundles.size()) throw Error(ErrorCode::dimension_mismatch, "afriat: list sizes differ");
  const std::size_t n = prices.size();
  lp::Problem prob;
  for (std::size_t i = 0; i < n; ++i) prob.add_variable(true);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      if (s == t) continue;
      const Index r = prob.add_constraint(lp::Sense::less_equal, prices[t].dot(bundles[s] - bundles[t]));
      prob.add_coefficient(r, static_cast<Index>(s), 1.0);
      prob.add_coefficient(r, static_cast<Index>(t), -1.0);
    }
  }
  lp::Options o;
  o.feasibility_tol = feasibility_tol;
  return lp::solve(prob, o).feasible();
}

AfriatEnvelope::AfriatEnvelope(const Certificate& cert) {
  for (std::size_t i = 0; i < cert.dates.size(); ++i) {
    values_.push_back(cert.values[i]);
    gradients_.push_back(cert.stacked(cert.dates[i]));
    points_.push_back(cert.bundles[i]);
  }
}

AfriatEnvelope::AfriatEnvelope(std::vector<double> values, std::vector<Vector> gradients, std::vector<Vector> points)
    : values_(std::move(values)), gradients_(std::move(gradients)), points_(std::move(points)) {
  if (values_.size() != gradients_.size() || values_.size() != points_.size() || values_.empty()) {
    throw Error(ErrorCode::dimension_mismatch, "envelope needs matching, non-empty lists");
  }
}

double AfriatEnvelope::operator()(const Vector& z) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values_.size(); ++i) {
    best = std::min(best, values_[i] + gradients_[i].dot(z - points_[i]));
  }
  return best;
}

}  // namespace habitlens
