#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace previts {

using Scalar = double;

template <typename T = Scalar>
using ArrayX = Eigen::Array<T, Eigen::Dynamic, 1>;
template <typename T = Scalar>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T = Scalar>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

using Shape = std::vector<int>;

inline std::ptrdiff_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::ptrdiff_t{1},
                           [](std::ptrdiff_t a, int b) { return a * b; });
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

// Dense row-major (C order) tensor with a flat Eigen array as storage.
template <typename T>
struct BasicTensor {
    Shape shape;
    ArrayX<T> data;

    BasicTensor() = default;
    explicit BasicTensor(Shape s) : shape(std::move(s)), data(ArrayX<T>::Zero(shape_numel(shape))) {}
    BasicTensor(Shape s, ArrayX<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != shape_numel(shape)) {
            throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape));
        }
    }

    static BasicTensor zeros(Shape s) { return BasicTensor(std::move(s)); }
    static BasicTensor constant(Shape s, T value) {
        BasicTensor t(std::move(s));
        t.data.setConstant(value);
        return t;
    }

    std::ptrdiff_t numel() const { return data.size(); }
    int dim(std::size_t i) const { return shape.at(i); }
    int rank() const { return static_cast<int>(shape.size()); }

    // Rows = leading axis, columns = everything else, as a column-major view of the
    // row-major buffer (so the Eigen matrix is the transpose: cols × rows).
    Eigen::Map<const MatrixX<T>> as_colmajor(std::ptrdiff_t rows, std::ptrdiff_t cols) const {
        return {data.data(), rows, cols};
    }

    template <typename U>
    BasicTensor<U> cast() const {
        return BasicTensor<U>(shape, data.template cast<U>());
    }
};

using Tensor = BasicTensor<Scalar>;

}  // namespace previts
