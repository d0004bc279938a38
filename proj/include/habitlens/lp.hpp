#pragma once

// Linear feasibility / optimisation backend.
//
// A small dense two-phase primal simplex. The problems produced by the
// revealed-preference engine have at most a few hundred rows and columns, so
// a dense tableau is both simple and fast enough.

#include "habitlens/types.hpp"

#include <vector>

namespace habitlens::lp {

enum class Sense { less_equal, equal, greater_equal };

enum class Status { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

const char* to_string(Status status) noexcept;

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Sparse description: variables are either free or nonnegative, constraints
/// are given as coefficient triplets with a sense and a right-hand side.
/// The objective (minimised) defaults to zero, i.e. a pure feasibility
/// problem.
class Problem {
 public:
  Index add_variable(bool free = true, double cost = 0.0);
  Index add_constraint(Sense sense, double rhs);
  void add_coefficient(Index row, Index col, double value);
  void set_cost(Index col, double cost);

  Index variable_count() const { return static_cast<Index>(free_.size()); }
  Index constraint_count() const { return static_cast<Index>(senses_.size()); }

  const std::vector<bool>& free_variables() const { return free_; }
  const std::vector<double>& costs() const { return cost_; }
  const std::vector<Sense>& senses() const { return senses_; }
  const std::vector<double>& rhs() const { return rhs_; }
  const std::vector<Triplet>& entries() const { return entries_; }

  /// Largest violation of any constraint (and of any sign restriction) at x.
  double max_violation(const Vector& x) const;

 private:
  std::vector<bool> free_;
  std::vector<double> cost_;
  std::vector<Sense> senses_;
  std::vector<double> rhs_;
  std::vector<Triplet> entries_;
};

struct Options {
  /// Absolute tolerance on the total (l1) constraint violation accepted at the
  /// end of phase one.
  double feasibility_tol = kDefaultFeasibilityTolerance;
  double pivot_tol = 1e-10;
  double optimality_tol = 1e-10;
  int iteration_limit = 20000;
  /// Skip phase two even when costs are present.
  bool feasibility_only = false;
};

struct Result {
  Status status = Status::infeasible;
  Vector x;
  double objective = 0.0;
  int iterations = 0;

  bool feasible() const { return status == Status::optimal; }
};

Result solve(const Problem& problem, const Options& options = {});

/// Dense shortcut for { y free : G y <= h }.
Result solve_inequalities(const Matrix& G, const Vector& h, const Options& options = {});

}  // namespace habitlens::lp
