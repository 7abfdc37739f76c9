#pragma once

#include <algorithm>
#include <limits>
#include <vector>

namespace spoofprint::testing {

/// Brute-force EER in percent. Every candidate threshold (each distinct score,
/// each midpoint, and +-inf) is scored with O(n) counting; the sorted (FPR, FNR)
/// curve is then searched for the first sign change of FPR - FNR and linearly
/// interpolated there. Scores >= t count as spoof.
inline double oracle_eer(const std::vector<double>& bona, const std::vector<double>& spoof) {
  std::vector<double> all = bona;
  all.insert(all.end(), spoof.begin(), spoof.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> thresholds = {-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 1; i < all.size(); ++i) thresholds.push_back((all[i - 1] + all[i]) / 2);
  thresholds.push_back(std::numeric_limits<double>::infinity());

  auto rates = [&](double t) {
    double fp = 0, fn = 0;
    for (double b : bona) fp += b >= t;
    for (double s : spoof) fn += s < t;
    return std::pair{fp / bona.size(), fn / spoof.size()};
  };
  auto [fpr0, fnr0] = rates(thresholds[0]);
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const auto [fpr, fnr] = rates(thresholds[i]);
    if (fpr - fnr <= 0) {
      const double d0 = fpr0 - fnr0, d1 = fpr - fnr;
      const double a = d0 / (d0 - d1);
      return 100.0 * (fpr0 + a * (fpr - fpr0));
    }
    fpr0 = fpr;
    fnr0 = fnr;
  }
  return 0.0;
}

}  // namespace spoofprint::testing
