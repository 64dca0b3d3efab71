// Copyright 2026 The Guided Grounding Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GUIDED_TENSOR_HPP_
#define GUIDED_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "guided/errors.hpp"

namespace guided {

// Dense row-major 2-D array. `Matrix` (32-bit) carries embeddings and
// parameters; `MatrixD` is the 64-bit twin used for gradient checking.
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data);
  // Nested-list construction for tests and small literals.
  BasicMatrix(std::initializer_list<std::initializer_list<T>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  void fill(T value);
  void set_zero() { fill(T(0)); }
  bool same_shape(const BasicMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  bool operator==(const BasicMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;
using MatrixD = BasicMatrix<double>;

template <typename U, typename T>
BasicMatrix<U> cast(const BasicMatrix<T>& m) {
  std::vector<U> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = static_cast<U>(m[i]);
  return BasicMatrix<U>(m.rows(), m.cols(), std::move(out));
}

// Products. The transposed variants avoid materializing a transpose in the
// backward passes.
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b);
// aᵀ · b
template <typename T>
BasicMatrix<T> matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b);
// a · bᵀ
template <typename T>
BasicMatrix<T> matmul_nt(const BasicMatrix<T>& a, const BasicMatrix<T>& b);
// acc += aᵀ · b
template <typename T>
void matmul_tn_accumulate(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                          BasicMatrix<T>& acc);

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& m);

template <typename T>
void add_inplace(BasicMatrix<T>& acc, const BasicMatrix<T>& x);
template <typename T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b);
// Adds a 1×cols row to every row of m.
template <typename T>
void add_row_inplace(BasicMatrix<T>& m, const BasicMatrix<T>& row);
// acc (1×cols) += column sums of m.
template <typename T>
void accumulate_column_sums(const BasicMatrix<T>& m, BasicMatrix<T>& acc);
template <typename T>
void scale_inplace(BasicMatrix<T>& m, T factor);

// Rows [start, start + count); rows past the end are zero.
template <typename T>
BasicMatrix<T> slice_rows_padded(const BasicMatrix<T>& m, std::size_t start,
                                 std::size_t count);
template <typename T>
BasicMatrix<T> slice_cols(const BasicMatrix<T>& m, std::size_t start,
                          std::size_t count);
template <typename T>
void assign_cols(BasicMatrix<T>& dst, std::size_t start,
                 const BasicMatrix<T>& src);
template <typename T>
void assign_rows(BasicMatrix<T>& dst, std::size_t start,
                 const BasicMatrix<T>& src);

template <typename T>
bool all_finite(const BasicMatrix<T>& m);

// Throws NumericError naming `where` when m holds NaN or Inf.
template <typename T>
void require_finite(const BasicMatrix<T>& m, const char* where);

}  // namespace guided

#endif  // GUIDED_TENSOR_HPP_
