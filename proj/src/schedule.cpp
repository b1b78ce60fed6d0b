#include "glyphrl/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace glyphrl {

const char* schedule_kind_name(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::Sigmoid: return "sigmoid";
        case ScheduleKind::Power: return "power";
        case ScheduleKind::Exponential: return "exponential";
        case ScheduleKind::Constant: return "constant";
    }
    return "?";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
    if (name == "sigmoid") return ScheduleKind::Sigmoid;
    if (name == "power") return ScheduleKind::Power;
    if (name == "exponential") return ScheduleKind::Exponential;
    if (name == "constant") return ScheduleKind::Constant;
    throw std::invalid_argument("unknown schedule kind: " + name);
}

void validate_schedule(const ScheduleSpec& spec) {
    if (!(spec.alpha0 >= 0.0) || !std::isfinite(spec.alpha0)) {
        throw std::invalid_argument("schedule: alpha0 must be finite and >= 0");
    }
    switch (spec.kind) {
        case ScheduleKind::Sigmoid:
            if (!(spec.lambda_steep > 0.0)) {
                throw std::invalid_argument("schedule: lambda_steep must be > 0");
            }
            break;
        case ScheduleKind::Power:
            if (!(spec.p_exp > 0.0)) {
                throw std::invalid_argument("schedule: p_exp must be > 0");
            }
            break;
        case ScheduleKind::Exponential:
            if (!(spec.decay > 0.0 && spec.decay <= 1.0)) {
                throw std::invalid_argument("schedule: decay must be in (0, 1]");
            }
            break;
        case ScheduleKind::Constant:
            break;
    }
}

double eval_schedule(const ScheduleSpec& spec, int t, int t_max) {
    validate_schedule(spec);
    if (t_max <= 0) throw std::out_of_range("eval_schedule: t_max must be > 0");
    if (t < 0 || t > t_max) {
        throw std::out_of_range("eval_schedule: t must be in [0, t_max], got " + std::to_string(t));
    }
    double ft = static_cast<double>(t);
    double fmax = static_cast<double>(t_max);
    switch (spec.kind) {
        case ScheduleKind::Sigmoid:
            return spec.alpha0 *
                   (1.0 - 1.0 / (1.0 + std::exp(-spec.lambda_steep * (ft - spec.gamma_mid) / fmax)));
        case ScheduleKind::Power:
            return spec.alpha0 * std::pow(1.0 - ft / fmax, spec.p_exp);
        case ScheduleKind::Exponential:
            return spec.alpha0 * std::pow(spec.decay, ft / fmax);
        case ScheduleKind::Constant:
            return spec.alpha0;
    }
    throw std::invalid_argument("eval_schedule: unknown kind");
}

}  // namespace glyphrl
