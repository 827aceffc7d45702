#pragma once

// Dense Levenberg-Marquardt least squares with optional box bounds and
// a central-difference Jacobian fallback. Deterministic: identical
// inputs give identical iterates.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>

#include "sivspec/errors.hpp"

namespace sivspec::fit {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LMOptions {
    int max_iterations = 300;
    double ftol = 1e-14;         // relative chi^2 improvement
    double xtol = 1e-13;         // relative step norm
    double gtol = 1e-14;         // gradient infinity norm
    double lambda_init = 1e-3;
    double lambda_up = 11.0;
    double lambda_down = 9.0;
    double fd_rel_step = 1e-6;   // central-difference step, relative
    Eigen::VectorXd lower;       // empty = unbounded
    Eigen::VectorXd upper;
};

struct LMResult {
    Eigen::VectorXd params;
    double chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
    Eigen::MatrixXd covariance;  // (J^T J)^+ at the solution, unscaled
    std::string message;
};

inline Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                        double rel_step = 1e-6) {
    const Eigen::VectorXd r0 = f(x);
    Eigen::MatrixXd jac(r0.size(), x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = rel_step * std::max(std::abs(x[j]), 1e-8);
        xp[j] = x[j] + h;
        const Eigen::VectorXd rp = f(xp);
        xp[j] = x[j] - h;
        const Eigen::VectorXd rm = f(xp);
        xp[j] = x[j];
        jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return jac;
}

inline LMResult levenberg_marquardt(const ResidualFn& residuals, const Eigen::VectorXd& x0,
                                    const LMOptions& opt = {},
                                    const JacobianFn& jacobian = nullptr) {
    const auto n = x0.size();
    const bool bounded = opt.lower.size() == n && opt.upper.size() == n;
    auto clamp = [&](Eigen::VectorXd v) {
        if (bounded)
            for (Eigen::Index i = 0; i < n; ++i)
                v[i] = std::min(std::max(v[i], opt.lower[i]), opt.upper[i]);
        return v;
    };

    LMResult res;
    res.params = clamp(x0);

    Eigen::VectorXd r = residuals(res.params);
    if (!r.allFinite()) throw NumericalError("levenberg_marquardt: non-finite residuals at start");
    res.chi2 = r.squaredNorm();

    double lambda = opt.lambda_init;
    Eigen::MatrixXd jac;
    bool jac_fresh = false;

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        if (!jac_fresh) {
            jac = jacobian ? jacobian(res.params)
                           : numeric_jacobian(residuals, res.params, opt.fd_rel_step);
            if (!jac.allFinite())
                throw NumericalError("levenberg_marquardt: non-finite Jacobian");
            jac_fresh = true;
        }

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;

        if (grad.lpNorm<Eigen::Infinity>() < opt.gtol) {
            res.converged = true;
            res.message = "gradient below tolerance";
            break;
        }

        Eigen::VectorXd diag = jtj.diagonal();
        const double dmax = diag.maxCoeff();
        for (Eigen::Index i = 0; i < n; ++i)
            diag[i] = std::max(diag[i], dmax > 0 ? 1e-14 * dmax : 1e-14);

        Eigen::MatrixXd damped = jtj;
        damped.diagonal() += lambda * diag;
        const Eigen::VectorXd step = damped.ldlt().solve(-grad);

        const Eigen::VectorXd trial = clamp(res.params + step);
        const Eigen::VectorXd delta = trial - res.params;
        const Eigen::VectorXd rt = residuals(trial);
        const double chi2_t = rt.allFinite() ? rt.squaredNorm()
                                             : std::numeric_limits<double>::infinity();

        if (chi2_t < res.chi2) {
            const double drop = res.chi2 - chi2_t;
            const double step_norm = delta.norm();
            res.params = trial;
            r = rt;
            res.chi2 = chi2_t;
            lambda = std::max(lambda / opt.lambda_down, 1e-14);
            jac_fresh = false;

            if (drop <= opt.ftol * std::max(res.chi2, 1e-300) ||
                step_norm <= opt.xtol * (res.params.norm() + opt.xtol)) {
                res.converged = true;
                res.message = "chi2/step below tolerance";
                break;
            }
        } else {
            lambda *= opt.lambda_up;
            if (lambda > 1e14) {
                res.converged = true;  // no downhill direction left
                res.message = "damping exhausted";
                break;
            }
        }
    }

    if (!res.converged) res.message = "iteration cap reached";

    // Covariance from the undamped normal matrix; SVD pseudo-inverse so
    // flat directions come back huge instead of poisoning everything.
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jtj, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double tol = 1e-14 * std::max(1.0, svd.singularValues().maxCoeff());
    Eigen::VectorXd inv = svd.singularValues();
    for (Eigen::Index i = 0; i < inv.size(); ++i)
        inv[i] = inv[i] > tol ? 1.0 / inv[i] : 1.0 / tol;
    res.covariance = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();

    return res;
}

}  // namespace sivspec::fit
