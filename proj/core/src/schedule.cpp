#include "brp/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace brp {

Schedule make_restart_schedule(double lr0, int first_period, int total_epochs) {
  if (first_period < 1 || total_epochs < 1) {
    throw std::invalid_argument("schedule: periods and epoch count must be positive");
  }
  if (!(lr0 > 0.0)) throw std::invalid_argument("schedule: lr0 must be positive");
  Schedule s;
  s.total_epochs = total_epochs;
  long start = 0;
  long period = first_period;
  double lr = lr0;
  while (start < total_epochs) {
    s.starts.push_back(static_cast<double>(start));
    s.periods.push_back(static_cast<double>(period));
    s.start_lrs.push_back(lr);
    start += period;
    period *= 2;
    lr /= 2.0;
  }
  if (start != total_epochs) {
    throw std::invalid_argument("schedule: doubling periods from " + std::to_string(first_period) +
                                " do not sum to " + std::to_string(total_epochs) + " epochs");
  }
  return s;
}

double lr_at(const Schedule& s, double epoch) {
  if (!(epoch >= 0.0 && epoch < s.total_epochs)) {
    throw std::out_of_range("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(s.total_epochs) + ")");
  }
  std::size_t k = 0;
  while (k + 1 < s.starts.size() && epoch >= s.starts[k + 1]) ++k;
  const double t = (epoch - s.starts[k]) / s.periods[k];
  return s.start_lrs[k] * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

double lr_at(double epoch, double lr0, int first_period, int total_epochs) {
  return lr_at(make_restart_schedule(lr0, first_period, total_epochs), epoch);
}

}  // namespace brp
