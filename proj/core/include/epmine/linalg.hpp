#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "epmine/errors.hpp"

namespace epmine {

/// Dense row-major matrix. Rows are the items, columns the features.
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeMismatch("matrix data size does not match rows*cols");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool operator==(const BasicMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using MatrixF = BasicMatrix<float>;

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T acc{0};
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T squared_norm(std::span<const T> a) {
  return dot(a, a);
}

/// Rows of unit L2 norm: the embedding f(x) on the hypersphere.
///
/// Only l2_normalize_rows() constructs one from raw data; wrap_unchecked()
/// exists for callers that already hold normalized rows (file loaders, tests).
template <typename T>
class BasicEmbeddingMatrix {
 public:
  BasicEmbeddingMatrix() = default;

  static BasicEmbeddingMatrix wrap_unchecked(BasicMatrix<T> m) {
    return BasicEmbeddingMatrix(std::move(m));
  }

  std::size_t rows() const noexcept { return m_.rows(); }
  std::size_t dim() const noexcept { return m_.cols(); }
  std::span<const T> row(std::size_t r) const { return m_.row(r); }
  T operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  const BasicMatrix<T>& matrix() const noexcept { return m_; }

  bool operator==(const BasicEmbeddingMatrix&) const = default;

 private:
  explicit BasicEmbeddingMatrix(BasicMatrix<T> m) : m_(std::move(m)) {}
  BasicMatrix<T> m_;
};

using EmbeddingMatrix = BasicEmbeddingMatrix<double>;
using EmbeddingMatrixF = BasicEmbeddingMatrix<float>;

/// Symmetric B x B matrix of pairwise dot products.
template <typename T>
class BasicSimilarityMatrix {
 public:
  BasicSimilarityMatrix() = default;
  explicit BasicSimilarityMatrix(BasicMatrix<T> s) : s_(std::move(s)) {
    if (s_.rows() != s_.cols()) throw ShapeMismatch("similarity matrix must be square");
  }

  std::size_t size() const noexcept { return s_.rows(); }
  T operator()(std::size_t i, std::size_t j) const { return s_(i, j); }
  std::span<const T> row(std::size_t i) const { return s_.row(i); }
  const BasicMatrix<T>& matrix() const noexcept { return s_; }

 private:
  BasicMatrix<T> s_;
};

using SimilarityMatrix = BasicSimilarityMatrix<double>;
using SimilarityMatrixF = BasicSimilarityMatrix<float>;

inline constexpr double kZeroNormThreshold = 1e-12;

template <typename T>
BasicEmbeddingMatrix<T> l2_normalize_rows(BasicMatrix<T> m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double norm = std::sqrt(static_cast<double>(squared_norm<T>(row)));
    if (!(norm > kZeroNormThreshold)) throw ZeroRow(r);
    const T inv = static_cast<T>(1.0 / norm);
    for (auto& v : row) v *= inv;
  }
  return BasicEmbeddingMatrix<T>::wrap_unchecked(std::move(m));
}

/// Upper triangle of e * e^T, mirrored. Rows need not be unit norm.
template <typename T>
BasicSimilarityMatrix<T> gram_matrix(const BasicMatrix<T>& e) {
  const std::size_t n = e.rows();
  BasicMatrix<T> s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = e.row(i);
    for (std::size_t j = i; j < n; ++j) {
      const T v = dot<T>(ri, e.row(j));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return BasicSimilarityMatrix<T>(std::move(s));
}

template <typename T>
BasicSimilarityMatrix<T> cosine_similarity_matrix(const BasicEmbeddingMatrix<T>& e) {
  return gram_matrix(e.matrix());
}

/// Query x gallery similarity block (not square, not symmetric).
Matrix cross_similarity(const EmbeddingMatrix& query, const EmbeddingMatrix& gallery);

/// ||u - v||^2 = 2 - 2 u.v for unit vectors.
double squared_distance_from_similarity(double s);

}  // namespace epmine
