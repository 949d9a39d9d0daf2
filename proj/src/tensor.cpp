#include "hybridx/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hybridx {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ",";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    for (std::size_t e : shape_) {
        if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_to_string(shape_));
    }
    data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (std::size_t e : shape_) {
        if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_to_string(shape_));
    }
    if (data_.size() != shape_product(shape_)) {
        throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_to_string(shape_));
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = value;
    return t;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::uint64_t RngState::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double RngState::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

std::uint64_t RngState::uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

RngState RngState::split(std::uint64_t stream) const {
    return RngState(mix64(seed_ ^ mix64(stream + kGolden)));
}

Tensor RngState::gaussian_tensor(std::vector<std::size_t> shape, double stddev) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = gaussian() * stddev;
    return t;
}

}  // namespace hybridx
