// SPDX-License-Identifier: Apache-2.0
//
// Cross-method comparison metrics: Delta_m% (mean relative drop against a
// single-task reference, sign-flipped for higher-better columns), mean rank
// with average-rank tie handling, per-step improvement rates, and
// conflicting-gradient detection.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtopt/jacobian.hpp"

namespace mtopt {

enum class MetricDirection { kLowerBetter, kHigherBetter };

// Rows = methods, columns = per-task metrics, plus one single-task
// reference value per column.
struct MetricTable {
  std::vector<std::string> methods;
  std::vector<std::string> columns;
  std::vector<MetricDirection> directions;
  Eigen::MatrixXd values;     // methods x columns
  Eigen::VectorXd reference;  // single-task baseline per column

  void validate() const;
  Eigen::Index method_row(const std::string& name) const;
};

// Delta_m% = (100/K) * sum_k (-1)^{higher_better_k} (M_mk - B_k) / B_k.
// Lower is better; 0 means matching the single-task references exactly.
double delta_m_percent(const MetricTable& table, Eigen::Index method_row);
double delta_m_percent(const MetricTable& table, const std::string& method);

// Mean rank per method: rank methods per column (1 = best, direction-aware),
// ties get the average of the ranks they straddle; MR = mean across columns.
std::vector<double> mean_rank(const MetricTable& table);

// r_i = (prev_i - curr_i) / prev_i, elementwise. prev must be nonzero.
Eigen::VectorXd improvement_rates(const Eigen::VectorXd& prev_losses,
                                  const Eigen::VectorXd& curr_losses);

// Indices of tasks whose gradient conflicts with d: row_i . d < -1e-10.
std::vector<Eigen::Index> detect_conflict(const TaskJacobian& jac,
                                          const Eigen::VectorXd& d);

// CSV: method, one column per metric, delta_m_percent, mean_rank.
void write_metric_csv(const MetricTable& table, std::ostream& os);

}  // namespace mtopt
