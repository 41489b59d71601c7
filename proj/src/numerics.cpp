#include "dsebm/numerics.hpp"

#include <cmath>
#include <stdexcept>

#include "dsebm/errors.hpp"

namespace dsebm {

double softplus(double x) {
    // log(1+e^x) = max(x,0) + log1p(e^-|x|)
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor softplus(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.data) v = softplus(v);
    return out;
}

Tensor sigmoid(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.data) v = sigmoid(v);
    return out;
}

namespace {

void require_2d(const Tensor& t, const char* context) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(context) + ": expected 2-D tensor, got " +
                                    shape_string(t.shape));
    }
}

}  // namespace

Tensor conv_valid(const Tensor& image, const Tensor& filter) {
    require_2d(image, "conv_valid image");
    require_2d(filter, "conv_valid filter");
    const std::size_t h = image.shape[0], w = image.shape[1];
    const std::size_t fh = filter.shape[0], fw = filter.shape[1];
    if (fh > h || fw > w) {
        throw std::invalid_argument("conv_valid: filter " + shape_string(filter.shape) +
                                    " larger than image " + shape_string(image.shape));
    }
    Tensor out = Tensor::zeros({h - fh + 1, w - fw + 1});
    for (std::size_t p = 0; p < out.shape[0]; ++p) {
        for (std::size_t q = 0; q < out.shape[1]; ++q) {
            double acc = 0.0;
            for (std::size_t i = 0; i < fh; ++i) {
                const double* img_row = &image.data[(p + i) * w + q];
                const double* fil_row = &filter.data[i * fw];
                for (std::size_t j = 0; j < fw; ++j) acc += img_row[j] * fil_row[j];
            }
            out.at(p, q) = acc;
        }
    }
    return out;
}

Tensor conv_full(const Tensor& image, const Tensor& filter) {
    require_2d(image, "conv_full image");
    require_2d(filter, "conv_full filter");
    const std::size_t h = image.shape[0], w = image.shape[1];
    const std::size_t fh = filter.shape[0], fw = filter.shape[1];
    Tensor out = Tensor::zeros({h + fh - 1, w + fw - 1});
    // out[p,q] = sum_{i,j} image[p+i-(fh-1), q+j-(fw-1)] * filter[i,j],
    // image taken as zero outside its bounds.
    for (std::size_t p = 0; p < out.shape[0]; ++p) {
        for (std::size_t q = 0; q < out.shape[1]; ++q) {
            double acc = 0.0;
            for (std::size_t i = 0; i < fh; ++i) {
                std::size_t r = p + i;
                if (r < fh - 1 || r >= h + fh - 1) continue;
                std::size_t img_i = r - (fh - 1);
                for (std::size_t j = 0; j < fw; ++j) {
                    std::size_t c = q + j;
                    if (c < fw - 1 || c >= w + fw - 1) continue;
                    acc += image.at(img_i, c - (fw - 1)) * filter.at(i, j);
                }
            }
            out.at(p, q) = acc;
        }
    }
    return out;
}

Tensor flip2d(const Tensor& filter) {
    require_2d(filter, "flip2d");
    const std::size_t h = filter.shape[0], w = filter.shape[1];
    Tensor out = Tensor::zeros({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            out.at(i, j) = filter.at(h - 1 - i, w - 1 - j);
    return out;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
    Tensor grad = Tensor::zeros(x.shape);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double saved = probe.data[i];
        probe.data[i] = saved + step;
        const double above = f(probe);
        probe.data[i] = saved - step;
        const double below = f(probe);
        probe.data[i] = saved;
        if (!std::isfinite(above) || !std::isfinite(below)) {
            throw NumericError("finite_diff_grad: function returned non-finite value at coordinate " +
                               std::to_string(i));
        }
        grad.data[i] = (above - below) / (2.0 * step);
    }
    return grad;
}

Tensor matvec(const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || m.shape[1] != v.shape[0]) {
        throw std::invalid_argument("matvec: incompatible shapes " + shape_string(m.shape) +
                                    " * " + shape_string(v.shape));
    }
    Tensor out = Tensor::zeros({m.shape[0]});
    for (std::size_t i = 0; i < m.shape[0]; ++i) {
        double acc = 0.0;
        const double* row = &m.data[i * m.shape[1]];
        for (std::size_t j = 0; j < m.shape[1]; ++j) acc += row[j] * v.data[j];
        out.data[i] = acc;
    }
    return out;
}

Tensor matvec_transposed(const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || m.shape[0] != v.shape[0]) {
        throw std::invalid_argument("matvec_transposed: incompatible shapes " +
                                    shape_string(m.shape) + "^T * " + shape_string(v.shape));
    }
    Tensor out = Tensor::zeros({m.shape[1]});
    for (std::size_t i = 0; i < m.shape[0]; ++i) {
        const double vi = v.data[i];
        const double* row = &m.data[i * m.shape[1]];
        for (std::size_t j = 0; j < m.shape[1]; ++j) out.data[j] += row[j] * vi;
    }
    return out;
}

void add_outer(Tensor& m, const Tensor& u, const Tensor& v) {
    if (m.rank() != 2 || u.rank() != 1 || v.rank() != 1 ||
        m.shape[0] != u.shape[0] || m.shape[1] != v.shape[0]) {
        throw std::invalid_argument("add_outer: incompatible shapes");
    }
    for (std::size_t i = 0; i < u.shape[0]; ++i) {
        const double ui = u.data[i];
        double* row = &m.data[i * m.shape[1]];
        for (std::size_t j = 0; j < v.shape[0]; ++j) row[j] += ui * v.data[j];
    }
}

double dot(const Tensor& a, const Tensor& b) {
    require_shape(b, a.shape, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

double squared_norm(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.data) acc += v * v;
    return acc;
}

double sum(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.data) acc += v;
    return acc;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_shape(b, a.shape, "hadamard");
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.data[i];
    return out;
}

}  // namespace dsebm
