#pragma once

#include <complex>

#include <Eigen/Dense>

namespace ambc {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

}  // namespace ambc
