#include "pipeflow/timefunc.hpp"

#include "pipeflow/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pipeflow {

TimeFunction TimeFunction::constant(double value) { return TimeFunction(Constant{value}); }

TimeFunction TimeFunction::sinusoid(double offset, double amplitude, double period, double phase) {
    require(period > 0.0, Errc::bad_argument, "sinusoid period must be positive");
    return TimeFunction(Sinusoid{offset, amplitude, period, phase});
}

TimeFunction TimeFunction::piecewise_linear(std::vector<double> t, std::vector<double> v) {
    require(!t.empty() && t.size() == v.size(), Errc::bad_argument,
            "piecewise-linear table needs matching, nonempty t/v arrays");
    for (std::size_t i = 1; i < t.size(); ++i)
        require(t[i] > t[i - 1], Errc::bad_argument, "piecewise-linear breakpoints must increase");
    return TimeFunction(PiecewiseLinear{std::move(t), std::move(v)});
}

TimeFunction TimeFunction::switched(double t_switch, TimeFunction before, TimeFunction after) {
    Switched s{t_switch, std::make_shared<const TimeFunction>(std::move(before)),
               std::make_shared<const TimeFunction>(std::move(after))};
    return TimeFunction(Node{std::move(s)});
}

namespace {

double pwl_value(const TimeFunction::PiecewiseLinear& p, double t) {
    if (t <= p.t.front()) return p.v.front();
    if (t >= p.t.back()) return p.v.back();
    auto it = std::upper_bound(p.t.begin(), p.t.end(), t);
    std::size_t i = static_cast<std::size_t>(it - p.t.begin());
    double w = (t - p.t[i - 1]) / (p.t[i] - p.t[i - 1]);
    return p.v[i - 1] + w * (p.v[i] - p.v[i - 1]);
}

double pwl_derivative(const TimeFunction::PiecewiseLinear& p, double t) {
    if (t < p.t.front() || t >= p.t.back()) return 0.0;
    auto it = std::upper_bound(p.t.begin(), p.t.end(), t);
    std::size_t i = static_cast<std::size_t>(it - p.t.begin());
    return (p.v[i] - p.v[i - 1]) / (p.t[i] - p.t[i - 1]);
}

} // namespace

double TimeFunction::value(double t) const {
    struct V {
        double t;
        double operator()(const Constant& c) const { return c.value; }
        double operator()(const Sinusoid& s) const {
            return s.offset + s.amplitude * std::sin(2.0 * M_PI * t / s.period + s.phase);
        }
        double operator()(const PiecewiseLinear& p) const { return pwl_value(p, t); }
        double operator()(const Switched& s) const {
            return t < s.t_switch ? s.before->value(t) : s.after->value(t);
        }
    };
    return std::visit(V{t}, node_);
}

double TimeFunction::derivative(double t) const {
    struct V {
        double t;
        double operator()(const Constant&) const { return 0.0; }
        double operator()(const Sinusoid& s) const {
            double w = 2.0 * M_PI / s.period;
            return s.amplitude * w * std::cos(w * t + s.phase);
        }
        double operator()(const PiecewiseLinear& p) const { return pwl_derivative(p, t); }
        double operator()(const Switched& s) const {
            return t < s.t_switch ? s.before->derivative(t) : s.after->derivative(t);
        }
    };
    return std::visit(V{t}, node_);
}

void TimeFunction::collect_breakpoints(double t0, double t1, std::vector<double>& out) const {
    struct V {
        double t0, t1;
        std::vector<double>& out;
        void operator()(const Constant&) const {}
        void operator()(const Sinusoid&) const {}
        void operator()(const PiecewiseLinear& p) const {
            for (double tb : p.t)
                if (tb > t0 && tb < t1) out.push_back(tb);
        }
        void operator()(const Switched& s) const {
            if (s.t_switch > t0 && s.t_switch < t1) out.push_back(s.t_switch);
            s.before->collect_breakpoints(t0, t1, out);
            s.after->collect_breakpoints(t0, t1, out);
        }
    };
    std::visit(V{t0, t1, out}, node_);
}

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::disconnected_graph: return "DisconnectedGraph";
        case Errc::empty_slack_set: return "EmptySlackSet";
        case Errc::duplicate_edge: return "DuplicateEdge";
        case Errc::non_positive_parameter: return "NonPositiveParameter";
        case Errc::non_positive_epsilon: return "NonPositiveEpsilon";
        case Errc::vertex_mismatch: return "VertexMismatch";
        case Errc::non_positive_density: return "NonPositiveDensity";
        case Errc::density_cavitation: return "DensityCavitation";
        case Errc::non_convergence: return "NonConvergence";
        case Errc::singular_jacobian: return "SingularJacobian";
        case Errc::unlifted_scenario: return "UnliftedScenario";
        case Errc::missing_model: return "MissingModel";
        case Errc::step_failure: return "StepFailure";
        case Errc::grid_mismatch: return "GridMismatch";
        case Errc::hypothesis_violated: return "HypothesisViolated";
        case Errc::no_crossing: return "NoCrossing";
        case Errc::envelope_inverted: return "EnvelopeInverted";
        case Errc::sandwich_violated: return "SandwichViolated";
        case Errc::path_not_found: return "PathNotFound";
        case Errc::parse_error: return "ParseError";
        case Errc::io_error: return "IoError";
        case Errc::bad_argument: return "BadArgument";
    }
    return "UnknownError";
}

} // namespace pipeflow
