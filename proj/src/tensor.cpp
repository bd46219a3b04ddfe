#include "trajcap/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace trajcap {

namespace {

std::size_t checked_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(checked_count(shape_), fill) {}

Tensor Tensor::scalar(double v) {
    Tensor t(std::vector<int>{1});
    t.data_[0] = v;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    std::size_t n = checked_count(shape);
    if (n != values.size()) {
        throw std::invalid_argument("tensor data size does not match shape");
    }
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (static_cast<std::int64_t>(checked_count(shape)) != size()) {
        throw std::invalid_argument("reshape changes element count");
    }
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::fabs(x));
    return m;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double x : data_) s += x;
    return s;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Tensor uniform_tensor(std::vector<int> shape, double half_width, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        t[i] = rng.uniform(-half_width, half_width);
    }
    return t;
}

}  // namespace trajcap
