#pragma once

#include <cstdint>
#include <vector>

#include "majoraudit/common.hpp"

namespace majoraudit::stats {

enum class CiMethod { percentile_bootstrap, normal };

CiMethod ci_method_from_name(const std::string& name);

struct MeanCi {
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool degenerate = false;  // fewer than 2 samples: interval collapsed
};

double mean_of(const std::vector<double>& xs);

// empirical quantile with linear interpolation between order statistics
double quantile(std::vector<double> xs, double q);

// inverse standard normal CDF (rational approximation, ~1e-9 absolute)
double normal_quantile(double p);

// Arithmetic mean plus a confidence interval at `level`. percentile_bootstrap
// resamples the mean `resamples` times (deterministic under seed) and takes
// the (1-level)/2 and 1-(1-level)/2 empirical quantiles; normal uses the
// t-free large-sample interval.
MeanCi mean_ci(const std::vector<double>& samples, double level, CiMethod method,
               std::size_t resamples, std::uint64_t seed);

// Percentile interval of statistics that are already bootstrap replicates
// (one replicate per resample); the mean reported is the replicate mean.
MeanCi replicate_ci(const std::vector<double>& replicates, double level);

}  // namespace majoraudit::stats
