#pragma once

// 3D convolution kernels built on im2col + Eigen GEMM.
//
// Layouts (row-major):
//   input   [Cin, T, H, W]
//   weight  [Cout, Cin, kt, kh, kw]
//   output  [Cout, T', H', W']
//
// The three kernels form a closed bilinear family: the derivative of each one
// with respect to either argument is expressible through the other two, which
// is what lets the autodiff layer differentiate its own backward pass.

#include "previts/tensor.hpp"

#include <array>

namespace previts {

struct Conv3dGeometry {
    std::array<int, 3> kernel{3, 3, 3};
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> pad{0, 0, 0};

    int out_extent(int axis, int in) const {
        return (in + 2 * pad[axis] - kernel[axis]) / stride[axis] + 1;
    }

    Shape output_shape(const Shape& in, int out_channels) const {
        return {out_channels, out_extent(0, in[1]), out_extent(1, in[2]), out_extent(2, in[3])};
    }

    bool operator==(const Conv3dGeometry&) const = default;
};

namespace detail {

// cols is column-major (P × K): column k = (ci, dt, dy, dx), row p = output position.
template <typename T>
MatrixX<T> im2col(const BasicTensor<T>& x, const Conv3dGeometry& g, const Shape& out) {
    const int cin = x.shape[0], tin = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int to = out[1], ho = out[2], wo = out[3];
    const int kt = g.kernel[0], kh = g.kernel[1], kw = g.kernel[2];
    const std::ptrdiff_t positions = std::ptrdiff_t{to} * ho * wo;
    MatrixX<T> cols(positions, std::ptrdiff_t{cin} * kt * kh * kw);
    std::ptrdiff_t k = 0;
    for (int c = 0; c < cin; ++c) {
        const T* xc = x.data.data() + std::ptrdiff_t{c} * tin * hin * win;
        for (int dt = 0; dt < kt; ++dt) {
            for (int dy = 0; dy < kh; ++dy) {
                for (int dx = 0; dx < kw; ++dx, ++k) {
                    T* col = cols.col(k).data();
                    std::ptrdiff_t p = 0;
                    for (int ot = 0; ot < to; ++ot) {
                        const int it = ot * g.stride[0] - g.pad[0] + dt;
                        const bool t_ok = it >= 0 && it < tin;
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * g.stride[1] - g.pad[1] + dy;
                            const bool y_ok = t_ok && iy >= 0 && iy < hin;
                            const T* row = y_ok ? xc + (std::ptrdiff_t{it} * hin + iy) * win : nullptr;
                            for (int ox = 0; ox < wo; ++ox, ++p) {
                                const int ix = ox * g.stride[2] - g.pad[2] + dx;
                                col[p] = (y_ok && ix >= 0 && ix < win) ? row[ix] : T(0);
                            }
                        }
                    }
                }
            }
        }
    }
    return cols;
}

template <typename T>
void col2im(const MatrixX<T>& cols, const Conv3dGeometry& g, const Shape& out, BasicTensor<T>& x) {
    const int cin = x.shape[0], tin = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int to = out[1], ho = out[2], wo = out[3];
    const int kt = g.kernel[0], kh = g.kernel[1], kw = g.kernel[2];
    std::ptrdiff_t k = 0;
    for (int c = 0; c < cin; ++c) {
        T* xc = x.data.data() + std::ptrdiff_t{c} * tin * hin * win;
        for (int dt = 0; dt < kt; ++dt) {
            for (int dy = 0; dy < kh; ++dy) {
                for (int dx = 0; dx < kw; ++dx, ++k) {
                    const T* col = cols.col(k).data();
                    std::ptrdiff_t p = 0;
                    for (int ot = 0; ot < to; ++ot) {
                        const int it = ot * g.stride[0] - g.pad[0] + dt;
                        const bool t_ok = it >= 0 && it < tin;
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * g.stride[1] - g.pad[1] + dy;
                            const bool y_ok = t_ok && iy >= 0 && iy < hin;
                            T* row = y_ok ? xc + (std::ptrdiff_t{it} * hin + iy) * win : nullptr;
                            for (int ox = 0; ox < wo; ++ox, ++p) {
                                const int ix = ox * g.stride[2] - g.pad[2] + dx;
                                if (y_ok && ix >= 0 && ix < win) row[ix] += col[p];
                            }
                        }
                    }
                }
            }
        }
    }
}

inline void check_conv_args(const Shape& x, const Shape& w) {
    if (x.size() != 4 || w.size() != 5 || x[0] != w[1]) {
        throw std::invalid_argument("conv3d shape mismatch: input " + shape_str(x) + ", weight " +
                                    shape_str(w));
    }
}

}  // namespace detail

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& x, const BasicTensor<T>& w, const Conv3dGeometry& g) {
    detail::check_conv_args(x.shape, w.shape);
    const int cout = w.shape[0];
    Shape out = g.output_shape(x.shape, cout);
    if (out[1] <= 0 || out[2] <= 0 || out[3] <= 0) {
        throw std::invalid_argument("conv3d input " + shape_str(x.shape) + " too small for kernel");
    }
    const MatrixX<T> cols = detail::im2col(x, g, out);
    const auto wm = w.as_colmajor(cols.cols(), cout);
    BasicTensor<T> y(out);
    Eigen::Map<MatrixX<T>>(y.data.data(), cols.rows(), cout).noalias() = cols * wm;
    return y;
}

// d<grad_out, conv(x, w)>/dx
template <typename T>
BasicTensor<T> conv3d_input_grad(const BasicTensor<T>& grad_out, const BasicTensor<T>& w,
                                 const Conv3dGeometry& g, const Shape& input_shape) {
    detail::check_conv_args(input_shape, w.shape);
    const int cout = w.shape[0];
    const std::ptrdiff_t positions = grad_out.numel() / cout;
    const std::ptrdiff_t k = w.numel() / cout;
    Eigen::Map<const MatrixX<T>> gm(grad_out.data.data(), positions, cout);
    const auto wm = w.as_colmajor(k, cout);
    const MatrixX<T> cols = gm * wm.transpose();
    BasicTensor<T> gx(input_shape);
    detail::col2im(cols, g, grad_out.shape, gx);
    return gx;
}

// d<grad_out, conv(x, w)>/dw
template <typename T>
BasicTensor<T> conv3d_weight_grad(const BasicTensor<T>& x, const BasicTensor<T>& grad_out,
                                  const Conv3dGeometry& g, const Shape& weight_shape) {
    detail::check_conv_args(x.shape, weight_shape);
    const int cout = weight_shape[0];
    const MatrixX<T> cols = detail::im2col(x, g, grad_out.shape);
    Eigen::Map<const MatrixX<T>> gm(grad_out.data.data(), cols.rows(), cout);
    BasicTensor<T> gw(weight_shape);
    Eigen::Map<MatrixX<T>>(gw.data.data(), cols.cols(), cout).noalias() = cols.transpose() * gm;
    return gw;
}

}  // namespace previts
