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

#include "guided/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace guided {

namespace {

template <typename T>
using RowMajor =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMajor<T>> view(const BasicMatrix<T>& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

template <typename T>
Eigen::Map<RowMajor<T>> view(BasicMatrix<T>& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

template <typename T>
[[noreturn]] void shape_mismatch(const char* op, const BasicMatrix<T>& a,
                                 const BasicMatrix<T>& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       a.shape_string() + " and " + b.shape_string());
}

}  // namespace

template <typename T>
BasicMatrix<T>::BasicMatrix(std::size_t rows, std::size_t cols,
                            std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
  }
}

template <typename T>
BasicMatrix<T>::BasicMatrix(std::initializer_list<std::initializer_list<T>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

template <typename T>
void BasicMatrix<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
std::string BasicMatrix<T>::shape_string() const {
  std::ostringstream os;
  os << "(" << rows_ << "x" << cols_ << ")";
  return os.str();
}

template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  BasicMatrix<T> out(a.rows(), b.cols());
  if (out.empty() || a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b);
  return out;
}

template <typename T>
BasicMatrix<T> matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  BasicMatrix<T> out(a.cols(), b.cols());
  if (out.empty() || a.rows() == 0) return out;
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

template <typename T>
BasicMatrix<T> matmul_nt(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  BasicMatrix<T> out(a.rows(), b.rows());
  if (out.empty() || a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

template <typename T>
void matmul_tn_accumulate(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                          BasicMatrix<T>& acc) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn_accumulate", a, b);
  if (acc.rows() != a.cols() || acc.cols() != b.cols()) {
    shape_mismatch("matmul_tn_accumulate", acc, b);
  }
  if (acc.empty() || a.rows() == 0) return;
  view(acc).noalias() += view(a).transpose() * view(b);
}

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& m) {
  BasicMatrix<T> out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  }
  return out;
}

template <typename T>
void add_inplace(BasicMatrix<T>& acc, const BasicMatrix<T>& x) {
  if (!acc.same_shape(x)) shape_mismatch("add", acc, x);
  T* dst = acc.data();
  const T* src = x.data();
  for (std::size_t i = 0; i < acc.size(); ++i) dst[i] += src[i];
}

template <typename T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  BasicMatrix<T> out = a;
  add_inplace(out, b);
  return out;
}

template <typename T>
void add_row_inplace(BasicMatrix<T>& m, const BasicMatrix<T>& row) {
  if (row.rows() != 1 || row.cols() != m.cols()) {
    shape_mismatch("add_row", m, row);
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    T* dst = m.data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] += row[c];
  }
}

template <typename T>
void accumulate_column_sums(const BasicMatrix<T>& m, BasicMatrix<T>& acc) {
  if (acc.rows() != 1 || acc.cols() != m.cols()) {
    shape_mismatch("column_sums", m, acc);
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const T* src = m.data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) acc[c] += src[c];
  }
}

template <typename T>
void scale_inplace(BasicMatrix<T>& m, T factor) {
  for (T& v : m.values()) v *= factor;
}

template <typename T>
BasicMatrix<T> slice_rows_padded(const BasicMatrix<T>& m, std::size_t start,
                                 std::size_t count) {
  BasicMatrix<T> out(count, m.cols());
  if (start >= m.rows()) return out;
  const std::size_t avail = std::min(count, m.rows() - start);
  std::copy_n(m.data() + start * m.cols(), avail * m.cols(), out.data());
  return out;
}

template <typename T>
BasicMatrix<T> slice_cols(const BasicMatrix<T>& m, std::size_t start,
                          std::size_t count) {
  if (start + count > m.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) +
                         ", " + std::to_string(start + count) +
                         ") out of range for " + m.shape_string());
  }
  BasicMatrix<T> out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::copy_n(m.data() + r * m.cols() + start, count,
                out.data() + r * count);
  }
  return out;
}

template <typename T>
void assign_cols(BasicMatrix<T>& dst, std::size_t start,
                 const BasicMatrix<T>& src) {
  if (src.rows() != dst.rows() || start + src.cols() > dst.cols()) {
    shape_mismatch("assign_cols", dst, src);
  }
  for (std::size_t r = 0; r < src.rows(); ++r) {
    std::copy_n(src.data() + r * src.cols(), src.cols(),
                dst.data() + r * dst.cols() + start);
  }
}

template <typename T>
void assign_rows(BasicMatrix<T>& dst, std::size_t start,
                 const BasicMatrix<T>& src) {
  if (src.cols() != dst.cols() || start + src.rows() > dst.rows()) {
    shape_mismatch("assign_rows", dst, src);
  }
  std::copy_n(src.data(), src.size(), dst.data() + start * dst.cols());
}

template <typename T>
bool all_finite(const BasicMatrix<T>& m) {
  for (T v : m.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void require_finite(const BasicMatrix<T>& m, const char* where) {
  if (!all_finite(m)) {
    throw NumericError(std::string("non-finite value in ") + where + " " +
                       m.shape_string());
  }
}

#define GUIDED_INSTANTIATE(T)                                                  \
  template class BasicMatrix<T>;                                               \
  template BasicMatrix<T> matmul(const BasicMatrix<T>&, const BasicMatrix<T>&); \
  template BasicMatrix<T> matmul_tn(const BasicMatrix<T>&,                     \
                                    const BasicMatrix<T>&);                    \
  template BasicMatrix<T> matmul_nt(const BasicMatrix<T>&,                     \
                                    const BasicMatrix<T>&);                    \
  template void matmul_tn_accumulate(const BasicMatrix<T>&,                    \
                                     const BasicMatrix<T>&, BasicMatrix<T>&);  \
  template BasicMatrix<T> transpose(const BasicMatrix<T>&);                    \
  template void add_inplace(BasicMatrix<T>&, const BasicMatrix<T>&);           \
  template BasicMatrix<T> add(const BasicMatrix<T>&, const BasicMatrix<T>&);   \
  template void add_row_inplace(BasicMatrix<T>&, const BasicMatrix<T>&);       \
  template void accumulate_column_sums(const BasicMatrix<T>&,                  \
                                       BasicMatrix<T>&);                       \
  template void scale_inplace(BasicMatrix<T>&, T);                             \
  template BasicMatrix<T> slice_rows_padded(const BasicMatrix<T>&,             \
                                            std::size_t, std::size_t);         \
  template BasicMatrix<T> slice_cols(const BasicMatrix<T>&, std::size_t,       \
                                     std::size_t);                             \
  template void assign_cols(BasicMatrix<T>&, std::size_t,                      \
                            const BasicMatrix<T>&);                            \
  template void assign_rows(BasicMatrix<T>&, std::size_t,                      \
                            const BasicMatrix<T>&);                            \
  template bool all_finite(const BasicMatrix<T>&);                             \
  template void require_finite(const BasicMatrix<T>&, const char*);

GUIDED_INSTANTIATE(float)
GUIDED_INSTANTIATE(double)

#undef GUIDED_INSTANTIATE

}  // namespace guided
