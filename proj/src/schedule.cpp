#include "admplan/schedule.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace admplan {

void NoiseSchedule::validate() const {
  if (steps < 2) throw std::invalid_argument("schedule needs at least 2 steps");
  if (!(sigma_last > 0.0) || !(sigma_max > sigma_last))
    throw std::invalid_argument("schedule requires sigma_max > sigma_last > 0");
  if (!(rho > 0.0)) throw std::invalid_argument("schedule requires rho > 0");
}

std::vector<double> NoiseSchedule::sigmas() const {
  validate();
  std::vector<double> out(static_cast<std::size_t>(steps) + 1);
  const double inv_rho = 1.0 / rho;
  const double a = std::pow(sigma_max, inv_rho);
  const double b = std::pow(sigma_last, inv_rho);
  out[0] = sigma_max;
  for (int i = 1; i + 1 < steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
    out[static_cast<std::size_t>(i)] = std::pow(a + frac * (b - a), rho);
  }
  out[static_cast<std::size_t>(steps) - 1] = sigma_last;
  out[static_cast<std::size_t>(steps)] = 0.0;
  return out;
}

Curriculum Curriculum::off() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {inf, inf};
}

Curriculum Curriculum::from_mode(Mode mode) {
  switch (mode) {
    case Mode::kPre:
      return pre();
    case Mode::kMid:
      return mid();
    case Mode::kPost:
      return post();
    case Mode::kOff:
      return off();
  }
  throw std::logic_error("unreachable curriculum mode");
}

Curriculum Curriculum::from_name(const std::string& name) {
  if (name == "pre") return pre();
  if (name == "mid") return mid();
  if (name == "post") return post();
  if (name == "off") return off();
  throw std::invalid_argument("unknown curriculum '" + name + "' (valid: pre, mid, post, off)");
}

bool Curriculum::is_off() const { return std::isinf(sigma_min) && std::isinf(sigma_max); }

void Curriculum::validate() const {
  if (is_off()) return;
  if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min))
    throw std::invalid_argument("curriculum requires 0 < sigma_min <= sigma_max");
}

double Curriculum::skip_probability(double sigma) const {
  validate();
  if (sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
  if (is_off()) return 1.0;
  if (sigma > sigma_max) return 1.0;
  if (sigma_max == sigma_min) return 0.0;  // degenerate band: project at and below the threshold
  if (sigma < sigma_min) return 0.0;
  return (sigma - sigma_min) / (sigma_max - sigma_min);
}

}  // namespace admplan
