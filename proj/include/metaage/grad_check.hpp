#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metaage {

/// One named parameter block: live values (perturbed in place) and the
/// analytic gradient to compare against.
struct GradCheckParam {
    std::string name;
    std::span<double> values;
    std::span<const double> analytic;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string failing_param;  // empty when every entry is within tolerance
    std::size_t failing_index = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;

    bool passed() const { return failing_param.empty(); }
};

class NondeterministicClosure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// |a - n| / max(|a|, |n|, floor). Below `floor` the comparison is absolute:
/// a central difference carries roundoff of order eps * |loss| / step, so
/// relative error on near-zero entries measures only that noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

/// Central-difference check of every entry of every block. `loss` must read
/// the parameters through the spans. Values are restored after each probe.
inline GradCheckReport grad_check(const std::function<double()>& loss, std::span<const GradCheckParam> params,
                                  double tolerance, double step = 1e-5, double floor = 1e-5) {
    const double base = loss();
    if (loss() != base) {
        throw NondeterministicClosure("grad_check: closure returned different values for identical parameters");
    }
    GradCheckReport report;
    for (const GradCheckParam& p : params) {
        if (p.values.size() != p.analytic.size()) {
            throw std::invalid_argument("grad_check: gradient size mismatch for " + p.name);
        }
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const double saved = p.values[i];
            if (!std::isfinite(saved)) {
                throw std::invalid_argument("grad_check: non-finite parameter in " + p.name);
            }
            p.values[i] = saved + step;
            const double plus = loss();
            p.values[i] = saved - step;
            const double minus = loss();
            p.values[i] = saved;

            const double numeric = (plus - minus) / (2.0 * step);
            const double err = relative_error(p.analytic[i], numeric, floor);
            ++report.checked;
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_param = p.name;
                report.worst_index = i;
            }
            if (err > tolerance && report.failing_param.empty()) {
                report.failing_param = p.name;
                report.failing_index = i;
            }
        }
    }
    if (loss() != base) {
        throw NondeterministicClosure("grad_check: closure drifted after probing");
    }
    return report;
}

}  // namespace metaage
