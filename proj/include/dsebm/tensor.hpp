#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dsebm {

/// Dense row-major multi-dimensional array of doubles; the universal value
/// type of the library. Rank 1 = feature vector, rank 2 = matrix/filter,
/// rank 3 = channels x height x width image.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor ones(std::vector<std::size_t> shape);
    static Tensor filled(std::vector<std::size_t> shape, double value);
    static Tensor vector(std::vector<double> values);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    // 2-D accessors (row-major).
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;

    // 3-D accessors (channel, row, col).
    double& at(std::size_t c, std::size_t i, std::size_t j);
    double at(std::size_t c, std::size_t i, std::size_t j) const;

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);
    Tensor& operator*=(double s);
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

/// Throws std::invalid_argument naming `context` when shapes differ.
void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                   const char* context);

/// FNV-1a over the raw little-endian bytes of the tensor payloads, in order.
/// Used both for model artifact integrity and the training-trace checksum.
std::uint64_t checksum_bytes(const void* bytes, std::size_t n, std::uint64_t seed);
std::uint64_t checksum_tensors(const std::vector<const Tensor*>& tensors);

/// Deterministic replayable random stream. The generator and every
/// derived draw (uniform, Gaussian, shuffle) are fixed transforms of the
/// mt19937_64 word sequence, so equal seeds replay bitwise on any platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    const std::string& algorithm() const { return algorithm_; }

    std::uint64_t next_u64();
    double next_uniform01();         // [0, 1)
    double next_gaussian();          // N(0, 1) via Box-Muller
    std::size_t next_index(std::size_t n);  // uniform in [0, n)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_index(i)]);
        }
    }

    Tensor gaussian_tensor(std::vector<std::size_t> shape, double stddev);

private:
    std::uint64_t seed_;
    std::string algorithm_;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dsebm
