#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace trajcap {

/// Dense row-major tensor of doubles. Rank is dynamic (vectors, matrices,
/// H x W x C feature maps, ks x ks x Cin x Cout convolution kernels).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0);

    static Tensor scalar(double v);
    static Tensor from(std::vector<int> shape, std::vector<double> values);
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(int i) { return data_[idx1(i)]; }
    double at(int i) const { return data_[idx1(i)]; }
    double& at(int i, int j) { return data_[idx2(i, j)]; }
    double at(int i, int j) const { return data_[idx2(i, j)]; }
    double& at(int i, int j, int k) { return data_[idx3(i, j, k)]; }
    double at(int i, int j, int k) const { return data_[idx3(i, j, k)]; }
    double& at(int i, int j, int k, int l) { return data_[idx4(i, j, k, l)]; }
    double at(int i, int j, int k, int l) const { return data_[idx4(i, j, k, l)]; }

    void fill(double v);
    Tensor reshaped(std::vector<int> shape) const;

    double max_abs() const;
    double sum() const;
    bool all_finite() const;

private:
    std::size_t idx1(int i) const {
        assert(rank() == 1);
        return static_cast<std::size_t>(i);
    }
    std::size_t idx2(int i, int j) const {
        assert(rank() == 2);
        return static_cast<std::size_t>(i) * shape_[1] + j;
    }
    std::size_t idx3(int i, int j, int k) const {
        assert(rank() == 3);
        return (static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k;
    }
    std::size_t idx4(int i, int j, int k, int l) const {
        assert(rank() == 4);
        return ((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

/// Seeded RNG with platform-independent draws (raw mt19937_64 bits, no
/// implementation-defined std distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        assert(n > 0);
        int v = static_cast<int>(uniform() * n);
        return v < n ? v : n - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (int i = static_cast<int>(xs.size()) - 1; i > 0; --i) {
            std::swap(xs[static_cast<std::size_t>(i)],
                      xs[static_cast<std::size_t>(uniform_int(i + 1))]);
        }
    }

private:
    std::mt19937_64 gen_;
};

/// Tensor with entries drawn uniformly from [-half_width, half_width].
Tensor uniform_tensor(std::vector<int> shape, double half_width, Rng& rng);

}  // namespace trajcap
