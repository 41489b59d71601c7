#include "dsebm/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace dsebm {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) {
        if (extent == 0) {
            throw std::invalid_argument("tensor shape has zero extent: " + shape_string(shape));
        }
        n *= extent;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (checked_numel(shape) != data.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_string(shape));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = checked_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::ones(std::vector<std::size_t> shape) {
    std::size_t n = checked_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 1.0));
}

Tensor Tensor::filled(std::vector<std::size_t> shape, double value) {
    std::size_t n = checked_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw std::invalid_argument("rows(): tensor is not 2-D");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw std::invalid_argument("cols(): tensor is not 2-D");
    return shape[1];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return data[i * shape[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return data[i * shape[1] + j];
}

double& Tensor::at(std::size_t c, std::size_t i, std::size_t j) {
    return data[(c * shape[1] + i) * shape[2] + j];
}

double Tensor::at(std::size_t c, std::size_t i, std::size_t j) const {
    return data[(c * shape[1] + i) * shape[2] + j];
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_shape(other, shape, "tensor +=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    require_shape(other, shape, "tensor -=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= other.data[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data) v *= s;
    return *this;
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) n *= extent;
    return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << ")";
    return out.str();
}

void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                   const char* context) {
    if (t.shape != shape) {
        throw std::invalid_argument(std::string(context) + ": expected shape " +
                                    shape_string(shape) + ", got " + shape_string(t.shape));
    }
}

std::uint64_t checksum_bytes(const void* bytes, std::size_t n, std::uint64_t seed) {
    // FNV-1a, 64-bit.
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t checksum_tensors(const std::vector<const Tensor*>& tensors) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor* t : tensors) {
        for (double v : t->data) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            unsigned char le[8];
            for (int b = 0; b < 8; ++b) le[b] = static_cast<unsigned char>(bits >> (8 * b));
            h = checksum_bytes(le, 8, h);
        }
    }
    return h;
}

RngStream::RngStream(std::uint64_t seed)
    : seed_(seed), algorithm_("mt19937_64/box-muller"), engine_(seed) {}

std::uint64_t RngStream::next_u64() {
    return engine_();
}

double RngStream::next_uniform01() {
    // 53 high bits -> [0, 1); the standard distributions are not portable,
    // this mapping is.
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller on uniforms from the stream; u1 shifted into (0, 1].
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = next_uniform01();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

std::size_t RngStream::next_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("next_index: n must be positive");
    // Rejection-free for powers of two, thin modulo bias otherwise; fixed
    // algorithm keeps replay exact.
    return static_cast<std::size_t>(next_u64() % n);
}

Tensor RngStream::gaussian_tensor(std::vector<std::size_t> shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = stddev * next_gaussian();
    return t;
}

}  // namespace dsebm
