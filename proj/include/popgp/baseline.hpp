#pragma once

#include "popgp/model.hpp"

namespace popgp {

// Per-content sample-mean rates. Deliberately unsmoothed: all-zero rows give
// a zero rate, which is exactly the small-sample overfitting the Bayesian
// model is compared against.
struct MleRates {
  Vec rates;
};

inline MleRates mle_rates(const RequestHistory& history) {
  history.validate();
  const auto totals = history.counts.cast<std::int64_t>().rowwise().sum();
  MleRates out;
  out.rates = totals.cast<double>() / static_cast<double>(history.slot_count());
  return out;
}

}  // namespace popgp
