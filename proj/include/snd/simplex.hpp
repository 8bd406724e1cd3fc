#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "snd/instance.hpp"  // kInf

namespace snd {

enum class RowSense { LE, GE, EQ };

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

// min obj'x  s.t.  A x {<=,>=,=} rhs,  lower <= x <= upper.
struct LpModel {
  Eigen::MatrixXd A;  // rows x structural columns
  std::vector<RowSense> sense;
  Eigen::VectorXd rhs;
  Eigen::VectorXd obj;
  Eigen::VectorXd lower;  // -kInf allowed
  Eigen::VectorXd upper;  // +kInf allowed

  int num_rows() const { return static_cast<int>(A.rows()); }
  int num_cols() const { return static_cast<int>(A.cols()); }
};

// Basis for warm starts: `basic` holds one column id per row (structural ids
// first, then slack ids n..n+m-1); nonbasic columns rest at the bound in
// `at_upper` (ignored for basic columns).
struct LpBasis {
  std::vector<int> basic;
  std::vector<char> at_upper;
  bool valid() const { return !basic.empty(); }
};

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  Eigen::VectorXd x;          // structural values
  Eigen::VectorXd row_duals;  // simplex multipliers y (phase-1 ray when infeasible)
  double objective = std::numeric_limits<double>::quiet_NaN();
  LpBasis basis;
  long iterations = 0;
};

// Bounded-variable revised simplex with an explicit basis inverse, composite
// (big-free) phase 1 that starts from any basis, Dantzig pricing with a Bland
// fallback, and periodic refactorization.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LpModel& model) : model_(model), m_(model.num_rows()), n_(model.num_cols()) {
    total_ = n_ + m_;
    feas_tol_ = 1e-9 * (1.0 + (m_ ? model.rhs.lpNorm<Eigen::Infinity>() : 0.0));
    opt_tol_ = 1e-9 * (1.0 + model.obj.lpNorm<Eigen::Infinity>());
  }

  LpSolution solve(const LpBasis* warm = nullptr, long max_iter = -1) {
    if (max_iter < 0) max_iter = 400 + 40L * total_;
    init_columns();
    init_basis(warm);
    refactorize();
    compute_primal();

    LpSolution out;
    long iters = 0;

    // phase 1: drive out bound violations with the composite objective
    if (!phase(true, max_iter, iters)) {
      out.status = LpStatus::IterationLimit;
      finalize(out, iters);
      return out;
    }
    if (total_infeasibility() > feas_tol_ * 16) {
      out.status = LpStatus::Infeasible;
      finalize(out, iters);
      // phase-1 multipliers certify infeasibility
      Eigen::VectorXd d = phase_cost(true);
      out.row_duals = binv_.transpose() * project_basic(d);
      return out;
    }

    if (!phase(false, max_iter, iters)) {
      out.status = unbounded_ ? LpStatus::Unbounded : LpStatus::IterationLimit;
      finalize(out, iters);
      return out;
    }
    out.status = unbounded_ ? LpStatus::Unbounded : LpStatus::Optimal;
    finalize(out, iters);
    return out;
  }

 private:
  const LpModel& model_;
  int m_, n_, total_;
  double feas_tol_, opt_tol_;
  bool unbounded_ = false;

  Eigen::VectorXd lo_, up_;    // bounds, slacks included
  Eigen::MatrixXd binv_;       // basis inverse
  std::vector<int> basic_;     // column of each basis row
  std::vector<int> row_of_;    // column -> basis row or -1
  std::vector<char> at_upper_; // nonbasic rest position
  Eigen::VectorXd xval_;       // all column values

  Eigen::VectorXd column(int j) const {
    if (j < n_) return model_.A.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - n_] = 1.0;
    return e;
  }

  void init_columns() {
    lo_.resize(total_);
    up_.resize(total_);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = model_.lower[j];
      up_[j] = model_.upper[j];
    }
    for (int i = 0; i < m_; ++i) {
      switch (model_.sense[static_cast<std::size_t>(i)]) {
        case RowSense::LE: lo_[n_ + i] = 0.0; up_[n_ + i] = kInf; break;
        case RowSense::GE: lo_[n_ + i] = -kInf; up_[n_ + i] = 0.0; break;
        case RowSense::EQ: lo_[n_ + i] = 0.0; up_[n_ + i] = 0.0; break;
      }
    }
  }

  void init_basis(const LpBasis* warm) {
    basic_.assign(static_cast<std::size_t>(m_), -1);
    at_upper_.assign(static_cast<std::size_t>(total_), 0);
    row_of_.assign(static_cast<std::size_t>(total_), -1);
    bool ok = false;
    if (warm && warm->valid() && static_cast<int>(warm->basic.size()) == m_) {
      ok = true;
      std::vector<char> used(static_cast<std::size_t>(total_), 0);
      for (int i = 0; i < m_ && ok; ++i) {
        const int j = warm->basic[static_cast<std::size_t>(i)];
        if (j < 0 || j >= total_ || used[static_cast<std::size_t>(j)]) ok = false;
        else used[static_cast<std::size_t>(j)] = 1;
      }
      if (ok) {
        basic_ = warm->basic;
        if (static_cast<int>(warm->at_upper.size()) == total_) at_upper_ = warm->at_upper;
        // a singular warm basis falls back to the slack basis below
        for (int i = 0; i < m_; ++i) row_of_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])] = i;
        if (!try_refactorize()) {
          ok = false;
          std::fill(row_of_.begin(), row_of_.end(), -1);
        }
      }
    }
    if (!ok) {
      for (int i = 0; i < m_; ++i) {
        basic_[static_cast<std::size_t>(i)] = n_ + i;
        row_of_[static_cast<std::size_t>(n_) + static_cast<std::size_t>(i)] = i;
      }
      std::fill(at_upper_.begin(), at_upper_.end(), 0);
      refactorize();
    }
    // rest nonbasic columns on a finite bound when one exists
    for (int j = 0; j < total_; ++j) {
      if (row_of_[static_cast<std::size_t>(j)] >= 0) continue;
      if (at_upper_[static_cast<std::size_t>(j)] && up_[j] == kInf) at_upper_[static_cast<std::size_t>(j)] = 0;
      if (!at_upper_[static_cast<std::size_t>(j)] && lo_[j] == -kInf)
        at_upper_[static_cast<std::size_t>(j)] = up_[j] != kInf ? 1 : 0;
    }
  }

  bool try_refactorize() {
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = column(basic_[static_cast<std::size_t>(i)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) return false;
    binv_ = lu.inverse();
    return true;
  }

  void refactorize() {
    if (!try_refactorize()) {
      // defensive: replace dependent columns with slacks until invertible
      for (int i = 0; i < m_; ++i) {
        Eigen::MatrixXd B(m_, m_);
        for (int t = 0; t < m_; ++t) B.col(t) = column(basic_[static_cast<std::size_t>(t)]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        if (lu.isInvertible()) {
          binv_ = lu.inverse();
          return;
        }
        // find a row whose slack is nonbasic and swap it in
        for (int r = 0; r < m_; ++r) {
          if (row_of_[static_cast<std::size_t>(n_) + static_cast<std::size_t>(r)] < 0) {
            const int old = basic_[static_cast<std::size_t>(r)];
            row_of_[static_cast<std::size_t>(old)] = -1;
            basic_[static_cast<std::size_t>(r)] = n_ + r;
            row_of_[static_cast<std::size_t>(n_) + static_cast<std::size_t>(r)] = r;
            break;
          }
        }
      }
      try_refactorize();
    }
  }

  double rest_value(int j) const { return at_upper_[static_cast<std::size_t>(j)] ? up_[j] : (lo_[j] == -kInf ? 0.0 : lo_[j]); }

  void compute_primal() {
    xval_ = Eigen::VectorXd::Zero(total_);
    Eigen::VectorXd accum = model_.rhs;
    for (int j = 0; j < total_; ++j) {
      if (row_of_[static_cast<std::size_t>(j)] >= 0) continue;
      const double v = rest_value(j);
      xval_[j] = v;
      if (v != 0.0) accum -= column(j) * v;
    }
    Eigen::VectorXd xb = binv_ * accum;
    for (int i = 0; i < m_; ++i) xval_[basic_[static_cast<std::size_t>(i)]] = xb[i];
  }

  double total_infeasibility() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int j = basic_[static_cast<std::size_t>(i)];
      s += std::max(0.0, lo_[j] - xval_[j]) + std::max(0.0, xval_[j] - up_[j]);
    }
    return s;
  }

  Eigen::VectorXd phase_cost(bool phase1) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(total_);
    if (phase1) {
      for (int i = 0; i < m_; ++i) {
        const int j = basic_[static_cast<std::size_t>(i)];
        if (xval_[j] < lo_[j] - feas_tol_) d[j] = -1.0;
        else if (xval_[j] > up_[j] + feas_tol_) d[j] = 1.0;
      }
    } else {
      d.head(n_) = model_.obj;
    }
    return d;
  }

  Eigen::VectorXd project_basic(const Eigen::VectorXd& d) const {
    Eigen::VectorXd db(m_);
    for (int i = 0; i < m_; ++i) db[i] = d[basic_[static_cast<std::size_t>(i)]];
    return db;
  }

  // One simplex phase; returns false on iteration exhaustion.
  bool phase(bool phase1, long max_iter, long& iters) {
    unbounded_ = false;
    int since_refactor = 0;
    long stall = 0;
    double last_merit = merit(phase1);
    while (iters < max_iter) {
      if (phase1 && total_infeasibility() <= feas_tol_) return true;

      Eigen::VectorXd d = phase_cost(phase1);
      Eigen::VectorXd y = binv_.transpose() * project_basic(d);

      const bool bland = stall > 2L * m_ + 50;
      int enter = -1, enter_dir = 0;
      double best_score = phase1 ? -feas_tol_ : -opt_tol_;
      for (int j = 0; j < total_; ++j) {
        if (row_of_[static_cast<std::size_t>(j)] >= 0) continue;
        if (lo_[j] == up_[j]) continue;  // fixed column never enters
        const double rc = d[j] - y.dot(column(j));
        int dir = 0;
        double score = 0.0;
        const bool may_increase = !at_upper_[static_cast<std::size_t>(j)] || up_[j] == kInf;
        const bool may_decrease = at_upper_[static_cast<std::size_t>(j)] || lo_[j] == -kInf ||
                                  xval_[j] > lo_[j] + feas_tol_;
        if (rc < (phase1 ? -feas_tol_ : -opt_tol_) && may_increase) {
          dir = +1;
          score = rc;
        } else if (rc > (phase1 ? feas_tol_ : opt_tol_) && may_decrease) {
          dir = -1;
          score = -rc;
        } else {
          continue;
        }
        if (bland) {
          enter = j;
          enter_dir = dir;
          break;
        }
        if (score < best_score) {
          best_score = score;
          enter = j;
          enter_dir = dir;
        }
      }
      if (enter < 0) return true;  // optimal for this phase

      // ratio test along +-direction of the entering column
      Eigen::VectorXd w = binv_ * column(enter);
      const double s = enter_dir;
      double t_max = kInf;
      int leave_row = -1;
      char leave_to_upper = 0;
      // entering variable's own range
      if (s > 0 && up_[enter] != kInf) t_max = up_[enter] - xval_[enter];
      if (s < 0 && lo_[enter] != -kInf) t_max = xval_[enter] - lo_[enter];
      for (int i = 0; i < m_; ++i) {
        const double rate = -s * w[i];  // basic value change per unit t
        if (std::abs(rate) < 1e-11) continue;
        const int j = basic_[static_cast<std::size_t>(i)];
        double bound, t;
        char to_upper;
        if (rate > 0) {  // increasing: blocks at the first bound above
          if (xval_[j] < lo_[j] - feas_tol_) { bound = lo_[j]; to_upper = 0; }
          else if (up_[j] != kInf && xval_[j] <= up_[j] + feas_tol_) { bound = up_[j]; to_upper = 1; }
          else continue;  // already above the upper bound, no breakpoint upward
          t = (bound - xval_[j]) / rate;
        } else {  // decreasing: blocks at the first bound below
          if (xval_[j] > up_[j] + feas_tol_) { bound = up_[j]; to_upper = 1; }
          else if (lo_[j] != -kInf && xval_[j] >= lo_[j] - feas_tol_) { bound = lo_[j]; to_upper = 0; }
          else continue;  // already below the lower bound, no breakpoint downward
          t = (bound - xval_[j]) / rate;
        }
        t = std::max(0.0, t);
        if (t < t_max - 1e-12 || (bland && t <= t_max && (leave_row < 0 || j < basic_[static_cast<std::size_t>(leave_row)]))) {
          t_max = t;
          leave_row = i;
          leave_to_upper = to_upper;
        }
      }

      if (t_max == kInf) {
        if (phase1) return true;  // cannot happen: phase-1 merit is bounded below
        unbounded_ = true;
        return true;
      }

      ++iters;
      // apply the step
      xval_[enter] += s * t_max;
      for (int i = 0; i < m_; ++i) xval_[basic_[static_cast<std::size_t>(i)]] -= s * t_max * w[i];

      if (leave_row < 0) {
        // bound flip, basis unchanged
        at_upper_[static_cast<std::size_t>(enter)] = s > 0 ? 1 : 0;
      } else {
        const int leave = basic_[static_cast<std::size_t>(leave_row)];
        xval_[leave] = leave_to_upper ? up_[leave] : lo_[leave];
        at_upper_[static_cast<std::size_t>(leave)] = leave_to_upper;
        row_of_[static_cast<std::size_t>(leave)] = -1;
        basic_[static_cast<std::size_t>(leave_row)] = enter;
        row_of_[static_cast<std::size_t>(enter)] = leave_row;
        // product-form update of the inverse
        const double pivot = w[leave_row];
        if (std::abs(pivot) < 1e-11 || ++since_refactor >= 100) {
          refactorize();
          since_refactor = 0;
        } else {
          Eigen::RowVectorXd prow = binv_.row(leave_row) / pivot;
          for (int i = 0; i < m_; ++i)
            if (i != leave_row) binv_.row(i) -= w[i] * prow;
          binv_.row(leave_row) = prow;
        }
        compute_primal();
      }

      const double now = merit(phase1);
      if (now < last_merit - 1e-12 * (1.0 + std::abs(last_merit))) {
        stall = 0;
        last_merit = now;
      } else {
        ++stall;
      }
    }
    return false;
  }

  double merit(bool phase1) const {
    if (phase1) return total_infeasibility();
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += model_.obj[j] * xval_[j];
    return obj;
  }

  void finalize(LpSolution& out, long iters) {
    refactorize();
    compute_primal();
    out.x = xval_.head(n_);
    out.objective = model_.obj.dot(out.x);
    out.row_duals = binv_.transpose() * project_basic(phase_cost(false));
    out.basis.basic = basic_;
    out.basis.at_upper = at_upper_;
    out.iterations = iters;
  }
};

inline LpSolution solve_lp(const LpModel& model, const LpBasis* warm = nullptr, long max_iter = -1) {
  SimplexSolver solver(model);
  return solver.solve(warm, max_iter);
}

}  // namespace snd
