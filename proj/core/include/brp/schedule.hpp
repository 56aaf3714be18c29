#pragma once

#include <vector>

namespace brp {

/// Cosine annealing with warm restarts. Period k lasts first_period * 2^k
/// epochs and starts at lr0 / 2^k.
struct Schedule {
  std::vector<double> starts;
  std::vector<double> periods;
  std::vector<double> start_lrs;
  int total_epochs = 0;
};

/// Throws std::invalid_argument unless the doubling periods sum exactly to
/// `total_epochs`. A single period equal to `total_epochs` means no restart.
Schedule make_restart_schedule(double lr0, int first_period, int total_epochs);

/// Learning rate at a (possibly fractional) epoch in [0, total_epochs).
double lr_at(const Schedule& schedule, double epoch);
double lr_at(double epoch, double lr0, int first_period, int total_epochs);

}  // namespace brp
