#include "habitlens/lp.hpp"

#include "habitlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace habitlens::lp {

const char* to_string(Status status) noexcept {
  switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

Index Problem::add_variable(bool free, double cost) {
  free_.push_back(free);
  cost_.push_back(cost);
  return static_cast<Index>(free_.size()) - 1;
}

Index Problem::add_constraint(Sense sense, double rhs) {
  senses_.push_back(sense);
  rhs_.push_back(rhs);
  return static_cast<Index>(senses_.size()) - 1;
}

void Problem::add_coefficient(Index row, Index col, double value) {
  if (row < 0 || row >= constraint_count() || col < 0 || col >= variable_count()) {
    throw Error(ErrorCode::invalid_argument, "lp: coefficient index out of range");
  }
  if (value != 0.0) entries_.push_back({row, col, value});
}

void Problem::set_cost(Index col, double cost) {
  if (col < 0 || col >= variable_count()) {
    throw Error(ErrorCode::invalid_argument, "lp: cost index out of range");
  }
  cost_[static_cast<std::size_t>(col)] = cost;
}

double Problem::max_violation(const Vector& x) const {
  std::vector<double> lhs(senses_.size(), 0.0);
  for (const auto& e : entries_) lhs[static_cast<std::size_t>(e.row)] += e.value * x(e.col);
  double worst = 0.0;
  for (std::size_t i = 0; i < senses_.size(); ++i) {
    const double r = lhs[i] - rhs_[i];
    switch (senses_[i]) {
      case Sense::less_equal: worst = std::max(worst, r); break;
      case Sense::greater_equal: worst = std::max(worst, -r); break;
      case Sense::equal: worst = std::max(worst, std::abs(r)); break;
    }
  }
  for (std::size_t j = 0; j < free_.size(); ++j) {
    if (!free_[j]) worst = std::max(worst, -x(static_cast<Index>(j)));
  }
  return worst;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Standard form  A x = b, x >= 0, b >= 0, with an initial basis made of slack
// or artificial columns. The last tableau row holds reduced costs, the last
// column the basic values.
class Tableau {
 public:
  Tableau(Index rows, Index cols) : t_(RowMatrix::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  double& at(Index r, Index c) { return t_(r, c); }
  double& rhs(Index r) { return t_(r, t_.cols() - 1); }
  Index rows() const { return t_.rows() - 1; }
  Index cols() const { return t_.cols() - 1; }
  std::vector<Index>& basis() { return basis_; }

  void mark_artificial(Index col) {
    if (artificial_.size() < static_cast<std::size_t>(cols())) artificial_.assign(cols(), false);
    artificial_[col] = true;
  }
  bool is_artificial(Index col) const {
    return !artificial_.empty() && artificial_[static_cast<std::size_t>(col)];
  }

  // Loads reduced costs for `cost` given the current basis.
  void set_objective(const std::vector<double>& cost) {
    const Index m = rows();
    auto obj = t_.row(m);
    obj.setZero();
    for (Index j = 0; j < cols(); ++j) obj(j) = cost[static_cast<std::size_t>(j)];
    for (Index i = 0; i < m; ++i) {
      const double cb = cost[static_cast<std::size_t>(basis_[i])];
      if (cb != 0.0) obj -= cb * t_.row(i);
    }
  }

  double objective_value() const { return -t_(rows(), t_.cols() - 1); }

  void pivot(Index r, Index c) {
    const double p = t_(r, c);
    t_.row(r) /= p;
    t_(r, c) = 1.0;
    for (Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) {
        t_.row(i) -= f * t_.row(r);
        t_(i, c) = 0.0;
      }
    }
    basis_[r] = c;
  }

  // Minimises the loaded objective; artificial columns may not enter when
  // `bar_artificial` is set.
  Status optimise(const Options& opt, bool bar_artificial, int& iterations) {
    const Index m = rows();
    const Index n = cols();
    int degenerate_run = 0;
    while (true) {
      if (iterations >= opt.iteration_limit) return Status::iteration_limit;
      const bool bland = degenerate_run > 50;
      Index enter = -1;
      double best = -opt.optimality_tol;
      for (Index j = 0; j < n; ++j) {
        if (bar_artificial && is_artificial(j)) continue;
        const double d = t_(m, j);
        if (d < best) {
          enter = j;
          if (bland) break;
          best = d;
        }
      }
      if (enter < 0) return Status::optimal;

      Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < m; ++i) {
        const double a = t_(i, enter);
        if (a <= opt.pivot_tol) continue;
        const double r = std::max(0.0, rhs(i)) / a;
        if (r < ratio - 1e-12 ||
            (r <= ratio + 1e-12 && leave >= 0 && basis_[i] < basis_[leave])) {
          if (r < ratio) ratio = r;
          leave = i;
        }
      }
      if (leave < 0) return Status::unbounded;
      degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++iterations;
    }
  }

  Vector column_values() const {
    Vector v = Vector::Zero(cols());
    for (Index i = 0; i < rows(); ++i) v(basis_[i]) = t_(i, t_.cols() - 1);
    return v;
  }

  // After phase one: pivot basic artificials out wherever possible.
  void expel_artificials(double tol) {
    for (Index i = 0; i < rows(); ++i) {
      if (!is_artificial(basis_[i])) continue;
      Index best = -1;
      double mag = tol;
      for (Index j = 0; j < cols(); ++j) {
        if (is_artificial(j)) continue;
        const double a = std::abs(t_(i, j));
        if (a > mag) {
          mag = a;
          best = j;
        }
      }
      if (best >= 0) pivot(i, best);
    }
  }

 private:
  RowMatrix t_;
  std::vector<Index> basis_;
  std::vector<bool> artificial_;
};

// Column bookkeeping for mapping the standard-form solution back.
struct ColumnMap {
  std::vector<Index> plus;   // column of x+ (or x) for each user variable
  std::vector<Index> minus;  // column of x- for free variables, -1 otherwise
};

Result run_two_phase(Tableau& tab, const std::vector<double>& phase2_cost, bool has_cost,
                     const Options& opt, Index artificial_begin) {
  Result result;
  int iterations = 0;
  const Index n = tab.cols();

  std::vector<double> phase1(static_cast<std::size_t>(n), 0.0);
  bool any_artificial = false;
  for (Index j = artificial_begin; j < n; ++j) {
    phase1[static_cast<std::size_t>(j)] = 1.0;
    tab.mark_artificial(j);
    any_artificial = true;
  }

  if (any_artificial) {
    tab.set_objective(phase1);
    const Status s = tab.optimise(opt, false, iterations);
    result.iterations = iterations;
    if (s == Status::iteration_limit) {
      result.status = s;
      return result;
    }
    if (tab.objective_value() > opt.feasibility_tol) {
      result.status = Status::infeasible;
      return result;
    }
    tab.expel_artificials(1e-9);
  }

  if (has_cost && !opt.feasibility_only) {
    tab.set_objective(phase2_cost);
    const Status s = tab.optimise(opt, true, iterations);
    result.iterations = iterations;
    if (s != Status::optimal) {
      result.status = s;
      return result;
    }
    result.objective = tab.objective_value();
  }
  result.status = Status::optimal;
  result.iterations = iterations;
  return result;
}

}  // namespace

Result solve(const Problem& problem, const Options& options) {
  const Index m = problem.constraint_count();
  const Index nv = problem.variable_count();

  ColumnMap cmap;
  cmap.plus.resize(static_cast<std::size_t>(nv));
  cmap.minus.assign(static_cast<std::size_t>(nv), -1);
  Index col = 0;
  for (Index j = 0; j < nv; ++j) {
    cmap.plus[static_cast<std::size_t>(j)] = col++;
    if (problem.free_variables()[static_cast<std::size_t>(j)]) cmap.minus[static_cast<std::size_t>(j)] = col++;
  }
  const Index structural = col;

  // Slack columns.
  std::vector<Index> slack(static_cast<std::size_t>(m), -1);
  for (Index i = 0; i < m; ++i) {
    if (problem.senses()[static_cast<std::size_t>(i)] != Sense::equal) slack[static_cast<std::size_t>(i)] = col++;
  }
  const Index artificial_begin = col;

  // Row signs so that b >= 0, then decide which rows need an artificial.
  std::vector<double> sign(static_cast<std::size_t>(m), 1.0);
  std::vector<bool> needs_art(static_cast<std::size_t>(m), false);
  Index n_art = 0;
  for (Index i = 0; i < m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (problem.rhs()[ui] < 0.0) sign[ui] = -1.0;
    const Sense s = problem.senses()[ui];
    const double slack_coef = s == Sense::less_equal ? 1.0 : (s == Sense::greater_equal ? -1.0 : 0.0);
    if (slack_coef * sign[ui] <= 0.0) {
      needs_art[ui] = true;
      ++n_art;
    }
  }
  const Index ncols = artificial_begin + n_art;

  Tableau tab(m, ncols);
  for (const auto& e : problem.entries()) {
    const double v = sign[static_cast<std::size_t>(e.row)] * e.value;
    tab.at(e.row, cmap.plus[static_cast<std::size_t>(e.col)]) += v;
    const Index mc = cmap.minus[static_cast<std::size_t>(e.col)];
    if (mc >= 0) tab.at(e.row, mc) -= v;
  }
  Index art = artificial_begin;
  for (Index i = 0; i < m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Sense s = problem.senses()[ui];
    if (slack[ui] >= 0) tab.at(i, slack[ui]) = sign[ui] * (s == Sense::less_equal ? 1.0 : -1.0);
    tab.rhs(i) = sign[ui] * problem.rhs()[ui];
    if (needs_art[ui]) {
      tab.at(i, art) = 1.0;
      tab.basis()[i] = art++;
    } else {
      tab.basis()[i] = slack[ui];
    }
  }

  std::vector<double> cost(static_cast<std::size_t>(ncols), 0.0);
  bool has_cost = false;
  for (Index j = 0; j < nv; ++j) {
    const double c = problem.costs()[static_cast<std::size_t>(j)];
    if (c == 0.0) continue;
    has_cost = true;
    cost[static_cast<std::size_t>(cmap.plus[static_cast<std::size_t>(j)])] = c;
    const Index mc = cmap.minus[static_cast<std::size_t>(j)];
    if (mc >= 0) cost[static_cast<std::size_t>(mc)] = -c;
  }
  (void)structural;

  Result result = run_two_phase(tab, cost, has_cost, options, artificial_begin);
  if (!result.feasible()) return result;

  const Vector values = tab.column_values();
  result.x.resize(nv);
  for (Index j = 0; j < nv; ++j) {
    double v = values(cmap.plus[static_cast<std::size_t>(j)]);
    const Index mc = cmap.minus[static_cast<std::size_t>(j)];
    if (mc >= 0) v -= values(mc);
    result.x(j) = v;
  }
  if (has_cost) {
    double obj = 0.0;
    for (Index j = 0; j < nv; ++j) obj += problem.costs()[static_cast<std::size_t>(j)] * result.x(j);
    result.objective = obj;
  }
  if (problem.max_violation(result.x) > 100.0 * options.feasibility_tol) {
    result.status = Status::numerical_failure;
  }
  return result;
}

Result solve_inequalities(const Matrix& G, const Vector& h, const Options& options) {
  const Index m = G.rows();
  const Index n = G.cols();
  if (h.size() != m) throw Error(ErrorCode::dimension_mismatch, "lp: rhs size mismatch");

  Index n_art = 0;
  for (Index i = 0; i < m; ++i) n_art += h(i) < 0.0 ? 1 : 0;
  const Index slack_begin = 2 * n;
  const Index artificial_begin = slack_begin + m;

  Tableau tab(m, artificial_begin + n_art);
  Index art = artificial_begin;
  for (Index i = 0; i < m; ++i) {
    const double s = h(i) < 0.0 ? -1.0 : 1.0;
    for (Index j = 0; j < n; ++j) {
      const double v = s * G(i, j);
      tab.at(i, 2 * j) = v;
      tab.at(i, 2 * j + 1) = -v;
    }
    tab.at(i, slack_begin + i) = s;
    tab.rhs(i) = s * h(i);
    if (s < 0.0) {
      tab.at(i, art) = 1.0;
      tab.basis()[i] = art++;
    } else {
      tab.basis()[i] = slack_begin + i;
    }
  }

  Result result = run_two_phase(tab, {}, false, options, artificial_begin);
  if (!result.feasible()) return result;

  const Vector values = tab.column_values();
  result.x.resize(n);
  for (Index j = 0; j < n; ++j) result.x(j) = values(2 * j) - values(2 * j + 1);
  const double worst = m > 0 ? (G * result.x - h).maxCoeff() : 0.0;
  if (worst > 100.0 * options.feasibility_tol) result.status = Status::numerical_failure;
  return result;
}

}  // namespace habitlens::lp
