#pragma once

#include <functional>

#include "dsebm/tensor.hpp"

namespace dsebm {

/// log(1 + e^x), overflow-safe at both ends.
double softplus(double x);

/// 1 / (1 + e^-x) == d/dx softplus(x).
double sigmoid(double x);

Tensor softplus(const Tensor& t);
Tensor sigmoid(const Tensor& t);

/// Cross-correlation restricted to full overlap. image (h x w), filter
/// (fh x fw, fh <= h, fw <= w) -> (h-fh+1) x (w-fw+1).
Tensor conv_valid(const Tensor& image, const Tensor& filter);

/// Zero-padded cross-correlation over every partial overlap:
/// (h+fh-1) x (w+fw-1). Adjoint of conv_valid under a filter flip.
Tensor conv_full(const Tensor& image, const Tensor& filter);

/// Reverse a 2-D tensor along both axes (180-degree rotation).
Tensor flip2d(const Tensor& filter);

/// Central finite differences of a scalar field, coordinate by coordinate.
/// Default step suits unit-scale inputs.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double step = 1e-5);

// Small dense linear algebra on 2-D tensors, used by the energy modules.
Tensor matvec(const Tensor& m, const Tensor& v);              // m (r x c) * v (c) -> (r)
Tensor matvec_transposed(const Tensor& m, const Tensor& v);   // m^T * v: (r x c), v (r) -> (c)
void add_outer(Tensor& m, const Tensor& u, const Tensor& v);  // m += u v^T
double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& t);
double sum(const Tensor& t);
Tensor hadamard(const Tensor& a, const Tensor& b);

}  // namespace dsebm
