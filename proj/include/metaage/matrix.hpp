#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

namespace metaage {

/// Dense row-major matrix of 64-bit reals. Row b of a batch matrix is sample b.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
}

}  // namespace detail

inline void require_cols(const Matrix& m, Eigen::Index cols, const char* what) {
    if (m.cols() != cols) {
        throw ShapeError(std::string(what) + ": expected " + std::to_string(cols) + " columns, got " +
                         detail::shape_str(m.rows(), m.cols()));
    }
}

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ShapeError(std::string(what) + ": expected " + detail::shape_str(rows, cols) + ", got " +
                         detail::shape_str(m.rows(), m.cols()));
    }
}

inline void require_size(const Vector& v, Eigen::Index n, const char* what) {
    if (v.size() != n) {
        throw ShapeError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
    }
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.allFinite();
}

}  // namespace metaage
