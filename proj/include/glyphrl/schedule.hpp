#pragma once

#include <string>

namespace glyphrl {

enum class ScheduleKind { Sigmoid, Power, Exponential, Constant };

const char* schedule_kind_name(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

// Noise-strength annealing. alpha0 is the starting strength; the remaining
// fields are only read by the kinds that use them.
struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::Sigmoid;
    double alpha0 = 200.0;
    double gamma_mid = 30.0;     // sigmoid: step at which alpha = alpha0/2
    double lambda_steep = 30.0;  // sigmoid: steepness
    double p_exp = 3.0;          // power: exponent
    double decay = 0.98;         // exponential: per-run decay factor
};

// Throws std::invalid_argument if the fields violate their ranges
// (alpha0 >= 0, lambda_steep > 0, p_exp > 0, decay in (0, 1]).
void validate_schedule(const ScheduleSpec& spec);

// alpha_t for step t of a t_max-step run:
//   Sigmoid:     alpha0 * (1 - 1/(1 + exp(-lambda*(t - gamma)/t_max)))
//   Power:       alpha0 * (1 - t/t_max)^p
//   Exponential: alpha0 * decay^(t/t_max)
//   Constant:    alpha0
// Throws std::out_of_range unless 0 <= t <= t_max and t_max > 0.
double eval_schedule(const ScheduleSpec& spec, int t, int t_max);

}  // namespace glyphrl
