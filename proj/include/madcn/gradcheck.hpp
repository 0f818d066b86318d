#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "madcn/errors.hpp"
#include "madcn/matrix.hpp"

namespace madcn {

// Contract every differentiable transform in the system satisfies: a forward
// pass over continuous inputs plus trainable parameters, and a backward pass
// producing the gradient of sum(upstream * output) for each of them. The
// parameters are exposed mutably so the checker can perturb them in place.
class DifferentiableTransform {
public:
    virtual ~DifferentiableTransform() = default;

    virtual std::string name() const = 0;
    virtual Matrix forward(const std::vector<Matrix>& inputs) const = 0;

    struct Gradients {
        std::vector<Matrix> inputs; // same shapes as the inputs
        std::vector<Vec> params;    // flat, aligned with mutable_params()
    };
    virtual Gradients backward(const std::vector<Matrix>& inputs, const Matrix& upstream) const = 0;

    virtual std::vector<std::span<double>> mutable_params() { return {}; }
};

struct GradCheckReport {
    std::string op_name;
    double max_rel_error = 0.0;
    // (tensor, flat coordinate); tensor indexes inputs first, then parameters
    std::pair<std::size_t, std::size_t> worst_coordinate{0, 0};
};

namespace detail {

inline double matrix_sum(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m[i];
    return s;
}

} // namespace detail

// Compares the analytic gradient of the scalar probe sum(outputs) against
// central differences (f(x+eps) - f(x-eps)) / (2 eps) for every input and
// parameter coordinate. Relative error uses denominator
// max(|analytic|, |numeric|, 1e-8).
inline GradCheckReport grad_check(DifferentiableTransform& transform,
                                  std::vector<Matrix> inputs, double eps = 1e-5) {
    if (!(eps > 0.0 && eps <= 1e-2)) {
        throw argument_error("grad_check eps must be in (0, 1e-2], got " + std::to_string(eps));
    }

    Matrix out = transform.forward(inputs);
    if (!out.all_finite()) {
        throw evaluation_error("grad_check: non-finite forward output from " + transform.name());
    }

    Matrix upstream(out.rows(), out.cols(), 1.0);
    auto analytic = transform.backward(inputs, upstream);

    GradCheckReport report;
    report.op_name = transform.name();

    std::size_t tensor_idx = 0;
    auto check_coord = [&](double analytic_g, double numeric_g, std::size_t flat) {
        double denom = std::max({std::fabs(analytic_g), std::fabs(numeric_g), 1e-8});
        double rel = std::fabs(analytic_g - numeric_g) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coordinate = {tensor_idx, flat};
        }
    };

    auto probe = [&](double* coord) {
        double saved = *coord;
        *coord = saved + eps;
        double up = detail::matrix_sum(transform.forward(inputs));
        *coord = saved - eps;
        double down = detail::matrix_sum(transform.forward(inputs));
        *coord = saved;
        return (up - down) / (2.0 * eps);
    };

    for (std::size_t t = 0; t < inputs.size(); ++t, ++tensor_idx) {
        for (std::size_t i = 0; i < inputs[t].size(); ++i) {
            check_coord(analytic.inputs[t][i], probe(&inputs[t][i]), i);
        }
    }
    auto params = transform.mutable_params();
    for (std::size_t p = 0; p < params.size(); ++p, ++tensor_idx) {
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            check_coord(analytic.params[p][i], probe(&params[p][i]), i);
        }
    }
    return report;
}

} // namespace madcn
