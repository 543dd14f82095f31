#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "sqclock/analysis.hpp"
#include "sqclock/error.hpp"

namespace sqclock::analysis {
namespace {

using Vec4 = Eigen::Vector4d;

double rabi_cost(std::span<const std::pair<double, double>> scan, const Vec4& p)
{
    double c = 0.0;
    for (const auto& [x, y] : scan) {
        const double r = p[0] * std::sin(p[1] * x + p[2]) + p[3] - y;
        c += r * r;
    }
    return c;
}

}  // namespace

RabiFit fit_rabi(std::span<const std::pair<double, double>> scan)
{
    if (scan.size() < 5) {
        throw ValidationError("fit_rabi: need at least 5 scan points");
    }
    double lo = scan.front().first;
    double hi = lo;
    for (const auto& [x, y] : scan) {
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw ValidationError("fit_rabi: non-finite scan point");
        }
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi - lo < 2.0 * kPi * (1.0 - 1e-9)) {
        throw ValidationError("fit_rabi: scan must cover at least one full oscillation");
    }

    // Linear start at unit frequency: y = s sin x + c cos x + d.
    Eigen::MatrixXd a(scan.size(), 3);
    Eigen::VectorXd b(scan.size());
    for (std::size_t i = 0; i < scan.size(); ++i) {
        a(i, 0) = std::sin(scan[i].first);
        a(i, 1) = std::cos(scan[i].first);
        a(i, 2) = 1.0;
        b(i) = scan[i].second;
    }
    const Eigen::Vector3d lin = a.colPivHouseholderQr().solve(b);
    Vec4 p(std::hypot(lin[0], lin[1]), 1.0, std::atan2(lin[1], lin[0]), lin[2]);

    double cost = rabi_cost(scan, p);
    double lambda = 1e-3;
    int it = 0;
    bool converged = false;
    for (; it < 500; ++it) {
        if (cost < 1e-28) {
            converged = true;
            break;
        }
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Vec4 jtr = Vec4::Zero();
        for (const auto& [x, y] : scan) {
            const double arg = p[1] * x + p[2];
            const double s = std::sin(arg);
            const double c = std::cos(arg);
            const Vec4 j(s, p[0] * x * c, p[0] * c, 1.0);
            const double r = p[0] * s + p[3] - y;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        bool accepted = false;
        while (lambda < 1e12) {
            Eigen::Matrix4d damped = jtj;
            damped.diagonal() *= 1.0 + lambda;
            const Vec4 step = damped.ldlt().solve(-jtr);
            const Vec4 trial = p + step;
            const double trial_cost = rabi_cost(scan, trial);
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                const double drop = cost - trial_cost;
                p = trial;
                lambda = std::max(lambda * 0.1, 1e-12);
                accepted = true;
                if (drop <= 1e-14 * cost || step.norm() < 1e-13 * (1.0 + p.norm())) {
                    converged = true;
                }
                cost = trial_cost;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // No downhill step at any damping: already at a minimum.
            converged = true;
        }
        if (converged) {
            break;
        }
    }
    if (!converged || !p.allFinite()) {
        throw NumericalError("fit_rabi: fit did not converge");
    }
    if (p[0] < 0.0) {
        p[0] = -p[0];
        p[2] += kPi;
    }
    RabiFit fit{};
    fit.contrast = p[0];
    fit.frequency = p[1];
    fit.phase = std::remainder(p[2], 2.0 * kPi);
    fit.offset = p[3];
    fit.residual_rms = std::sqrt(cost / static_cast<double>(scan.size()));
    fit.iterations = it;
    return fit;
}

double dynamic_range_model(double theta, double n_atoms, double xi_sq, double gamma_sq, double delta_x0)
{
    const double g = gamma_sq - 1.0 / gamma_sq;
    const double t = std::tan(theta);
    return std::sqrt(xi_sq / n_atoms + g * g * t * t / (2.0 * n_atoms * n_atoms) + delta_x0 * delta_x0);
}

DynamicRangeFit fit_dynamic_range(std::span<const std::pair<double, double>> points, double n_atoms,
                                  double xi_sq, double delta_x0)
{
    if (points.size() < 2) {
        throw ValidationError("fit_dynamic_range: need at least 2 points");
    }
    if (!(n_atoms > 0.0) || !(xi_sq > 0.0) || !std::isfinite(delta_x0)) {
        throw ValidationError("fit_dynamic_range: invalid fixed parameters");
    }
    const double base = xi_sq / n_atoms + delta_x0 * delta_x0;
    std::vector<double> weight(points.size());
    double sbb = 0.0;
    double sbd = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto [theta, dtheta] = points[i];
        if (!(std::abs(theta) < kPi / 2.0) || !(dtheta > 0.0)) {
            throw ValidationError("fit_dynamic_range: points need |theta| < pi/2 and positive spread");
        }
        const double t = std::tan(theta);
        weight[i] = t * t / (2.0 * n_atoms * n_atoms);
        sbb += weight[i] * weight[i];
        sbd += weight[i] * (dtheta * dtheta - base);
    }
    if (!(sbb > 0.0)) {
        throw ValidationError("fit_dynamic_range: insufficient theta span");
    }

    // u = (G^2 - G^-2)^2. Start from the linear solution in variance space,
    // then Gauss-Newton on the residuals in radians.
    double u = std::max(0.0, sbd / sbb);
    auto residual_norm = [&](double uu) {
        double s = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double r = std::sqrt(base + uu * weight[i]) - points[i].second;
            s += r * r;
        }
        return std::sqrt(s);
    };
    for (int it = 0; it < 200; ++it) {
        double jtj = 0.0;
        double jtr = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double f = std::sqrt(base + u * weight[i]);
            const double j = weight[i] / (2.0 * f);
            jtj += j * j;
            jtr += j * (f - points[i].second);
        }
        if (!(jtj > 0.0)) {
            break;
        }
        double step = -jtr / jtj;
        const double before = residual_norm(u);
        while (std::abs(step) > 0.0 && residual_norm(std::max(0.0, u + step)) > before) {
            step *= 0.5;
        }
        const double next = std::max(0.0, u + step);
        if (std::abs(next - u) <= 1e-15 * std::max(1.0, u)) {
            u = next;
            break;
        }
        u = next;
    }

    double knee = 0.0;
    for (double w : weight) {
        knee = std::max(knee, u * w);
    }
    if (knee < base) {
        throw ValidationError("fit_dynamic_range: insufficient theta span (no point beyond the knee)");
    }

    const double s = std::sqrt(u);
    DynamicRangeFit fit{};
    fit.xi_sq = xi_sq;
    fit.gamma_sq = 0.5 * (s + std::sqrt(s * s + 4.0));
    fit.delta_x0 = delta_x0;
    fit.residual_norm = residual_norm(u);
    return fit;
}

double qpn_crossing(const DynamicRangeFit& fit, double n_atoms)
{
    const double base = fit.xi_sq / n_atoms + fit.delta_x0 * fit.delta_x0;
    const double margin = 1.0 / n_atoms - base;
    if (margin <= 0.0) {
        return 0.0;
    }
    const double g = fit.gamma_sq - 1.0 / fit.gamma_sq;
    if (g == 0.0) {
        return kPi / 2.0;
    }
    return std::atan(std::sqrt(margin * 2.0 * n_atoms * n_atoms) / std::abs(g));
}

}  // namespace sqclock::analysis
