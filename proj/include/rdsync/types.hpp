#pragma once

#include <Eigen/Dense>

#include <vector>

namespace rdsync {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Points = std::vector<Vec>;

inline constexpr double kPi = 3.14159265358979323846264338327950;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace rdsync
