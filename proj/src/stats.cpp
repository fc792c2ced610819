#include "majoraudit/stats.hpp"

#include <algorithm>
#include <cmath>

namespace majoraudit::stats {

CiMethod ci_method_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "percentile_bootstrap" || n == "bootstrap") return CiMethod::percentile_bootstrap;
    if (n == "normal") return CiMethod::normal;
    throw ConfigError("unknown CI method: " + name);
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) throw ValidationError("mean of empty sample");
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw ValidationError("quantile of empty sample");
    std::sort(xs.begin(), xs.end());
    if (q <= 0.0) return xs.front();
    if (q >= 1.0) return xs.back();
    const double pos = q * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= xs.size()) return xs.back();
    return xs[lo] * (1.0 - frac) + xs[lo + 1] * frac;
}

double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) throw ValidationError("normal_quantile needs p in (0,1)");
    // Acklam's rational approximation
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    return x;
}

MeanCi mean_ci(const std::vector<double>& samples, double level, CiMethod method,
               std::size_t resamples, std::uint64_t seed) {
    if (samples.empty()) throw ValidationError("mean_ci: no samples");
    if (level <= 0.0 || level >= 1.0) throw ValidationError("mean_ci: level must be in (0,1)");
    MeanCi out;
    out.mean = mean_of(samples);
    if (samples.size() < 2) {
        out.ci_lo = out.ci_hi = out.mean;
        out.degenerate = true;
        return out;
    }
    const double alpha = 1.0 - level;
    if (method == CiMethod::normal) {
        double ss = 0.0;
        for (double x : samples) ss += (x - out.mean) * (x - out.mean);
        const double sd = std::sqrt(ss / static_cast<double>(samples.size() - 1));
        const double z = normal_quantile(1.0 - alpha / 2.0);
        const double half = z * sd / std::sqrt(static_cast<double>(samples.size()));
        out.ci_lo = out.mean - half;
        out.ci_hi = out.mean + half;
        return out;
    }
    if (resamples < 2) throw ValidationError("mean_ci: bootstrap needs resamples >= 2");
    Rng rng(mix64(seed, 0x626f6f74ULL));  // distinct stream per seed
    const std::size_t n = samples.size();
    std::vector<double> means(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += samples[rng.next_index(n)];
        means[b] = sum / static_cast<double>(n);
    }
    out.ci_lo = quantile(means, alpha / 2.0);
    out.ci_hi = quantile(std::move(means), 1.0 - alpha / 2.0);
    return out;
}

MeanCi replicate_ci(const std::vector<double>& replicates, double level) {
    if (replicates.empty()) throw ValidationError("replicate_ci: no replicates");
    if (level <= 0.0 || level >= 1.0)
        throw ValidationError("replicate_ci: level must be in (0,1)");
    MeanCi out;
    out.mean = mean_of(replicates);
    if (replicates.size() < 2) {
        out.ci_lo = out.ci_hi = out.mean;
        out.degenerate = true;
        return out;
    }
    const double alpha = 1.0 - level;
    out.ci_lo = quantile(replicates, alpha / 2.0);
    out.ci_hi = quantile(replicates, 1.0 - alpha / 2.0);
    // replicate spread can straddle the mean asymmetrically but must contain it
    out.ci_lo = std::min(out.ci_lo, out.mean);
    out.ci_hi = std::max(out.ci_hi, out.mean);
    return out;
}

}  // namespace majoraudit::stats
