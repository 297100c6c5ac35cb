// SPDX-License-Identifier: Apache-2.0

#include "mtopt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace mtopt {

void MetricTable::validate() const {
  const auto rows = Eigen::Index(methods.size());
  const auto cols = Eigen::Index(columns.size());
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("MetricTable: empty table");
  if (values.rows() != rows || values.cols() != cols)
    throw std::invalid_argument("MetricTable: values shape mismatch");
  if (Eigen::Index(directions.size()) != cols)
    throw std::invalid_argument("MetricTable: directions size mismatch");
  if (reference.size() != cols)
    throw std::invalid_argument("MetricTable: reference size mismatch");
  if (!values.allFinite() || !reference.allFinite())
    throw std::invalid_argument("MetricTable: non-finite entries");
  for (Eigen::Index c = 0; c < cols; ++c)
    if (reference[c] == 0.0)
      throw std::invalid_argument("MetricTable: zero reference value");
}

Eigen::Index MetricTable::method_row(const std::string& name) const {
  const auto it = std::find(methods.begin(), methods.end(), name);
  if (it == methods.end())
    throw std::invalid_argument("MetricTable: unknown method " + name);
  return Eigen::Index(it - methods.begin());
}

double delta_m_percent(const MetricTable& table, Eigen::Index method_row) {
  table.validate();
  if (method_row < 0 || method_row >= Eigen::Index(table.methods.size()))
    throw std::invalid_argument("delta_m_percent: bad method row");
  const Eigen::Index cols = table.values.cols();
  double acc = 0.0;
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double sign =
        table.directions[size_t(c)] == MetricDirection::kHigherBetter ? -1.0
                                                                      : 1.0;
    acc += sign * (table.values(method_row, c) - table.reference[c]) /
           table.reference[c];
  }
  return 100.0 * acc / double(cols);
}

double delta_m_percent(const MetricTable& table, const std::string& method) {
  return delta_m_percent(table, table.method_row(method));
}

std::vector<double> mean_rank(const MetricTable& table) {
  table.validate();
  const Eigen::Index rows = table.values.rows(), cols = table.values.cols();
  std::vector<double> acc(size_t(rows), 0.0);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
  for (Eigen::Index c = 0; c < cols; ++c) {
    // better value first; lower-better ascends, higher-better descends
    const bool lower = table.directions[size_t(c)] == MetricDirection::kLowerBetter;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double va = table.values(a, c), vb = table.values(b, c);
      return lower ? va < vb : va > vb;
    });
    // ties share the average of the positions they straddle
    size_t i = 0;
    while (i < order.size()) {
      size_t j = i;
      while (j + 1 < order.size() &&
             table.values(order[j + 1], c) == table.values(order[i], c))
        ++j;
      const double shared = 0.5 * double(i + j) + 1.0;  // average of i+1..j+1
      for (size_t t = i; t <= j; ++t) acc[size_t(order[t])] += shared;
      i = j + 1;
    }
  }
  for (double& a : acc) a /= double(cols);
  return acc;
}

Eigen::VectorXd improvement_rates(const Eigen::VectorXd& prev_losses,
                                  const Eigen::VectorXd& curr_losses) {
  if (prev_losses.size() != curr_losses.size())
    throw std::invalid_argument("improvement_rates: size mismatch");
  if ((prev_losses.array() == 0.0).any())
    throw std::invalid_argument("improvement_rates: zero previous loss");
  return ((prev_losses - curr_losses).array() / prev_losses.array()).matrix();
}

std::vector<Eigen::Index> detect_conflict(const TaskJacobian& jac,
                                          const Eigen::VectorXd& d) {
  if (d.size() != jac.dim())
    throw std::invalid_argument("detect_conflict: dim mismatch");
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < jac.tasks(); ++i)
    if (jac.row(i).dot(d) < -1e-10) out.push_back(i);
  return out;
}

void write_metric_csv(const MetricTable& table, std::ostream& os) {
  table.validate();
  os << "method";
  for (const auto& c : table.columns) os << "," << c;
  os << ",delta_m_percent,mean_rank\n";
  const std::vector<double> mr = mean_rank(table);
  for (Eigen::Index r = 0; r < Eigen::Index(table.methods.size()); ++r) {
    os << table.methods[size_t(r)];
    for (Eigen::Index c = 0; c < table.values.cols(); ++c)
      os << "," << table.values(r, c);
    os << "," << delta_m_percent(table, r) << "," << mr[size_t(r)] << "\n";
  }
}

}  // namespace mtopt
