#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hybridx {

/// Dense n-dimensional array of doubles, row-major.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 3-d (channel, row, col) and 2-d (row, col) accessors; unchecked.
    double& at3(std::size_t c, std::size_t h, std::size_t w) {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }
    double at3(std::size_t c, std::size_t h, std::size_t w) const {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }
    double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    // 4-d (out channel, in channel, kernel row, kernel col)
    double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }
    double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

/// Counter-based seeded generator (splitmix64). Identical seeds yield
/// identical draw sequences on every platform.
class RngState {
public:
    explicit RngState(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }
    static const char* algorithm() { return "splitmix64"; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

    /// Standard normal via the polar method; second draw is cached.
    double gaussian();

    /// Uniform integer in [0, n); rejection sampling keeps it unbiased.
    std::uint64_t uniform_below(std::uint64_t n);

    /// Derive an independent stream for a named stage.
    RngState split(std::uint64_t stream) const;

    /// Deterministic Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    Tensor gaussian_tensor(std::vector<std::size_t> shape, double stddev);

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hybridx
