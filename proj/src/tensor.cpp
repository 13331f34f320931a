#include "evib/tensor.hpp"

#include <sstream>

#include "evib/error.hpp"

namespace evib {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    std::ostringstream msg;
    msg << "tensor data of length " << data_.size() << " does not fit shape [" << rows << ", "
        << cols << "]";
    throw DimensionError(msg.str());
  }
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor(1, values.size(), std::vector<double>(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

std::string Tensor::shape_string() const {
  std::ostringstream out;
  out << "[" << rows_ << ", " << cols_ << "]";
  return out.str();
}

void Tensor::fill(double v) {
  for (auto& x : data_) x = v;
}

void Tensor::add_scaled(const Tensor& other, double scale) {
  if (!same_shape(other)) {
    throw DimensionError("add_scaled shape mismatch " + shape_string() + " vs " +
                         other.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return s;
}

}  // namespace evib
