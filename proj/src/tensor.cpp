#include "smgan/tensor.hpp"

#include <cmath>
#include <sstream>

#include "smgan/errors.hpp"

namespace smgan {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ArgumentError("tensor extents must be positive, got " + shape_str(shape_));
  }
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ArgumentError("from_rows: no rows");
  std::size_t cols = rows[0].size();
  std::vector<double> flat;
  flat.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("from_rows: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(flat));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ArgumentError("axis " + std::to_string(axis) + " out of range for " + shape_string());
  }
  return shape_[axis];
}

namespace {
std::size_t flat_offset(const Shape& shape, std::initializer_list<std::size_t> idx,
                        const std::string& shape_desc) {
  if (idx.size() != shape.size()) {
    throw ArgumentError("index rank " + std::to_string(idx.size()) + " vs tensor " + shape_desc);
  }
  std::size_t off = 0, i = 0;
  for (auto v : idx) {
    if (v >= shape[i]) throw ArgumentError("index out of range in " + shape_desc);
    off = off * shape[i] + v;
    ++i;
  }
  return off;
}
}  // namespace

double& Tensor::at(std::initializer_list<std::size_t> idx) {
  return data_[flat_offset(shape_, idx, shape_string())];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  return data_[flat_offset(shape_, idx, shape_string())];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string());
  return data_[0];
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace smgan
