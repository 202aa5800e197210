#include "tagshot/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

namespace tagshot::kernels {

double cosine(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 0.0;
  return std::clamp(dot / denom, -1.0, 1.0);
}

namespace {

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) return 0.0;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double w = weights.empty() ? 1.0 : weights[i];
    num += w * values[i];
    den += w;
  }
  return den == 0.0 ? 0.0 : num / den;
}

double row_max(std::span<const double> sim, std::size_t n, std::size_t i) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) best = std::max(best, sim[i * n + j]);
  return best;
}

double col_max(std::span<const double> sim, std::size_t m, std::size_t n, std::size_t j) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) best = std::max(best, sim[i * n + j]);
  return best;
}

}  // namespace

namespace serial {

void cosine_scan(std::span<const double> query, RowsView rows, std::span<double> out) {
  std::size_t const r = rows.rows();
  for (std::size_t i = 0; i < r; ++i) out[i] = cosine(query, rows.row(i));
}

void cosine_matrix(RowsView a, RowsView b, std::span<double> out) {
  std::size_t const m = a.rows();
  std::size_t const n = b.rows();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = cosine(a.row(i), b.row(j));
}

GreedyMatch greedy_match(std::span<const double> sim, std::size_t m, std::size_t n,
                         std::span<const double> row_weights, std::span<const double> col_weights) {
  if (m == 0 || n == 0) return {};
  std::vector<double> rmax(m);
  std::vector<double> cmax(n);
  for (std::size_t i = 0; i < m; ++i) rmax[i] = row_max(sim, n, i);
  for (std::size_t j = 0; j < n; ++j) cmax[j] = col_max(sim, m, n, j);
  return {weighted_mean(rmax, row_weights), weighted_mean(cmax, col_weights)};
}

}  // namespace serial

namespace parallel {

void cosine_scan(std::span<const double> query, RowsView rows, std::span<double> out) {
  auto const r = static_cast<std::ptrdiff_t>(rows.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < r; ++i) {
    out[static_cast<std::size_t>(i)] = cosine(query, rows.row(static_cast<std::size_t>(i)));
  }
}

void cosine_matrix(RowsView a, RowsView b, std::span<double> out) {
  auto const m = static_cast<std::ptrdiff_t>(a.rows());
  std::size_t const n = b.rows();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    auto const row = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < n; ++j) out[row * n + j] = cosine(a.row(row), b.row(j));
  }
}

GreedyMatch greedy_match(std::span<const double> sim, std::size_t m, std::size_t n,
                         std::span<const double> row_weights, std::span<const double> col_weights) {
  if (m == 0 || n == 0) return {};
  std::vector<double> rmax(m);
  std::vector<double> cmax(n);
  auto const mi = static_cast<std::ptrdiff_t>(m);
  auto const ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < mi; ++i) rmax[static_cast<std::size_t>(i)] = row_max(sim, n, static_cast<std::size_t>(i));
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < ni; ++j) cmax[static_cast<std::size_t>(j)] = col_max(sim, m, n, static_cast<std::size_t>(j));
  }
  // The means are reduced serially so the result matches serial:: exactly.
  return {weighted_mean(rmax, row_weights), weighted_mean(cmax, col_weights)};
}

}  // namespace parallel

}  // namespace tagshot::kernels
