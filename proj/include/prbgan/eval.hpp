#pragma once

#include <span>
#include <string>
#include <vector>

#include "prbgan/synthdata.hpp"
#include "prbgan/tensor.hpp"

namespace prbgan::eval {

// Equal-width histogram. Bins are half-open [lo, hi) except the final bin,
// which is closed at the upper range edge. Samples outside the range are
// tracked as out-of-range mass, never silently dropped.
struct Histogram {
    std::vector<double> edges; // bins + 1, strictly increasing
    std::vector<long> counts;  // per bin
    long total = 0;

    std::size_t bins() const { return counts.size(); }
    long in_range() const;
    long out_of_range() const { return total - in_range(); }
};

Histogram histogram(std::span<const double> samples, int bins, double lo, double hi);
// Column 0 of an [n x d] tensor.
Histogram histogram_column(const Tensor& samples, int bins, double lo, double hi);

// Jensen-Shannon divergence (natural log) of the normalized count vectors.
// Requires identical edges. A histogram with no in-range mass is treated as
// maximally divergent (ln 2).
double js_divergence(const Histogram& a, const Histogram& b);

struct ModeReport {
    bool captured = false;
    double mass_fraction = 0.0; // fraction of samples within 3 sigma of the mode
};

struct ModeCoverageReport {
    std::vector<ModeReport> modes;
    int modes_captured = 0;
    double high_quality_fraction = 0.0; // within 3 sigma of any mode
    double jsd = 0.0;                   // filled by the experiment runner
};

// Mode m is captured iff the fraction of samples within 3*std of its mean
// (component-wise for multi-d) reaches tau.
ModeCoverageReport mode_coverage(const Tensor& samples, const synthdata::MixtureSpec& spec,
                                 double tau = 0.02);

// CSV with header "bin_lo,bin_hi,count"; a trailing "# out_of_range=..
// total=.." comment preserves the mass bookkeeping across round-trips.
void write_histogram_csv(const std::string& path, const Histogram& h);
Histogram read_histogram_csv(const std::string& path);

// "key: value" per line.
std::string report_text(const ModeCoverageReport& r);
ModeCoverageReport parse_report_text(const std::string& text);

} // namespace prbgan::eval
