#include "optoent/measures.hpp"

#include <algorithm>
#include <sstream>

namespace optoent::measures {

TrajectoryStats trajectory_stats(const std::vector<double>& t, const std::vector<double>& e_n, double period,
                                 double window_fraction) {
  if (t.size() != e_n.size()) throw std::invalid_argument("trajectory_stats: time and value sizes differ");
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
    throw std::invalid_argument("trajectory_stats: window_fraction must be in (0, 1]");
  }
  if (t.size() < 3) throw WindowTooShort("trajectory_stats: fewer than 3 samples");

  TrajectoryStats s;
  s.window_fraction = window_fraction;
  const double t0 = t.front();
  const double t1 = t.back();
  const double w0 = t1 - window_fraction * (t1 - t0);
  if (period > 0.0 && t1 - w0 < 5.0 * period * (1.0 - 1e-9)) {
    std::ostringstream msg;
    msg << "trajectory_stats: window of length " << (t1 - w0) << " holds fewer than 5 periods of " << period;
    throw WindowTooShort(msg.str());
  }
  std::size_t first = 0;
  while (first < t.size() && t[first] < w0) ++first;
  if (t.size() - first < 2) throw WindowTooShort("trajectory_stats: window holds fewer than 2 samples");

  std::vector<double> peaks;
  for (std::size_t i = std::max<std::size_t>(first, 1); i + 1 < t.size(); ++i) {
    if (e_n[i] > e_n[i - 1] && e_n[i] > e_n[i + 1]) peaks.push_back(e_n[i]);
  }
  s.peak_count = peaks.size();
  if (peaks.empty()) {
    s.stabilized_peak = *std::max_element(e_n.begin() + static_cast<std::ptrdiff_t>(first), e_n.end());
  } else {
    std::sort(peaks.begin(), peaks.end());
    const std::size_t m = peaks.size();
    s.stabilized_peak = m % 2 == 1 ? peaks[m / 2] : 0.5 * (peaks[m / 2 - 1] + peaks[m / 2]);
  }

  double area = 0.0;
  for (std::size_t i = first + 1; i < t.size(); ++i) area += 0.5 * (e_n[i] + e_n[i - 1]) * (t[i] - t[i - 1]);
  s.stabilized_mean = area / (t.back() - t[first]);

  // Zero runs, with edges placed halfway to the neighbouring positive samples.
  const double stride = (t1 - t0) / static_cast<double>(t.size() - 1);
  std::size_t i = 0;
  while (i < t.size()) {
    if (e_n[i] != 0.0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < t.size() && e_n[j + 1] == 0.0) ++j;
    const double a = i == 0 ? t[0] : 0.5 * (t[i - 1] + t[i]);
    const double b = j + 1 == t.size() ? t[j] : 0.5 * (t[j] + t[j + 1]);
    if (b - a > stride * (1.0 + 1e-9)) s.esd_intervals.emplace_back(a, b);
    i = j + 1;
  }
  return s;
}

}  // namespace optoent::measures
