#pragma once

#include <Eigen/Dense>

namespace timecoord {

/// One classical 4th-order step of y' = f(t, y) over [t, t+h].
template <typename Field>
Eigen::VectorXd rk4_step(Field&& f, double t, const Eigen::VectorXd& y, double h) {
    const Eigen::VectorXd k1 = f(t, y);
    const Eigen::VectorXd k2 = f(t + 0.5 * h, y + (0.5 * h) * k1);
    const Eigen::VectorXd k3 = f(t + 0.5 * h, y + (0.5 * h) * k2);
    const Eigen::VectorXd k4 = f(t + h, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace timecoord
