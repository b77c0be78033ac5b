#pragma once

#include <memory>
#include <variant>
#include <vector>

namespace pipeflow {

/// Scalar function of time used for injections, slack densities and
/// compression-ratio schedules. Value semantics; cheap to copy.
///
/// Shipped forms: constant, sinusoid (offset + amplitude*sin(2*pi*t/period + phase)),
/// piecewise-linear breakpoint table (constant extrapolation outside the table),
/// and a one-shot switch between two functions (used by the monitoring policy).
class TimeFunction {
public:
    struct Constant {
        double value;
    };
    struct Sinusoid {
        double offset;
        double amplitude;
        double period;
        double phase;
    };
    struct PiecewiseLinear {
        std::vector<double> t; // strictly increasing
        std::vector<double> v;
    };
    struct Switched {
        double t_switch;
        std::shared_ptr<const TimeFunction> before;
        std::shared_ptr<const TimeFunction> after;
    };
    using Node = std::variant<Constant, Sinusoid, PiecewiseLinear, Switched>;

    TimeFunction() : node_(Constant{0.0}) {}

    static TimeFunction constant(double value);
    static TimeFunction sinusoid(double offset, double amplitude, double period, double phase = 0.0);
    static TimeFunction piecewise_linear(std::vector<double> t, std::vector<double> v);
    static TimeFunction switched(double t_switch, TimeFunction before, TimeFunction after);

    double value(double t) const;
    double operator()(double t) const { return value(t); }

    /// d/dt; right-sided at piecewise-linear breakpoints and switch times.
    double derivative(double t) const;

    /// Appends all non-smooth points in (t0, t1) to `out` (PWL breakpoints,
    /// switch times). The integrator lands steps on these.
    void collect_breakpoints(double t0, double t1, std::vector<double>& out) const;

    const Node& node() const { return node_; }

private:
    explicit TimeFunction(Node n) : node_(std::move(n)) {}
    Node node_;
};

} // namespace pipeflow
