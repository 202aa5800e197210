#pragma once

// Dense cosine kernels used by similarity selection and BERTScore.
//
// Every kernel has a serial reference in `serial::` and an OpenMP version in
// `parallel::`. Both evaluate each output element with the same scalar
// routine and reduce in the same order, so their results are bitwise equal.

#include <cstddef>
#include <span>

namespace tagshot::kernels {

/// Row-major matrix view: rows() x dim.
struct RowsView {
  std::span<const double> data;
  std::size_t dim = 0;

  std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> row(std::size_t i) const { return data.subspan(i * dim, dim); }
};

/// dot(a,b) / (|a| |b|), clamped to [-1, 1]; 0 when either norm is zero.
double cosine(std::span<const double> a, std::span<const double> b);

struct GreedyMatch {
  double precision = 0.0;  // weighted mean over rows of the row max
  double recall = 0.0;     // weighted mean over columns of the column max
};

namespace serial {

/// out[i] = cosine(query, rows.row(i)).
void cosine_scan(std::span<const double> query, RowsView rows, std::span<double> out);

/// out[i * b.rows() + j] = cosine(a.row(i), b.row(j)).
void cosine_matrix(RowsView a, RowsView b, std::span<double> out);

/// Greedy matching over an m x n similarity matrix. Empty weight spans mean
/// uniform weights.
GreedyMatch greedy_match(std::span<const double> sim, std::size_t m, std::size_t n,
                         std::span<const double> row_weights = {},
                         std::span<const double> col_weights = {});

}  // namespace serial

namespace parallel {

void cosine_scan(std::span<const double> query, RowsView rows, std::span<double> out);
void cosine_matrix(RowsView a, RowsView b, std::span<double> out);
GreedyMatch greedy_match(std::span<const double> sim, std::size_t m, std::size_t n,
                         std::span<const double> row_weights = {},
                         std::span<const double> col_weights = {});

}  // namespace parallel

}  // namespace tagshot::kernels
