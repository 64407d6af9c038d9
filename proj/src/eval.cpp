#include "prbgan/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "prbgan/errors.hpp"

namespace prbgan::eval {

namespace {
std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace

long Histogram::in_range() const {
    long s = 0;
    for (long c : counts) s += c;
    return s;
}

Histogram histogram(std::span<const double> samples, int bins, double lo, double hi) {
    if (samples.empty()) throw ContractError("histogram: empty sample set");
    if (bins < 1) throw ContractError("histogram: bins must be >= 1");
    if (!(lo < hi)) throw ContractError("histogram: range.min must be < range.max");
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    const double width = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + i * width;
    h.edges.back() = hi;
    h.total = static_cast<long>(samples.size());
    for (double x : samples) {
        if (x < lo || x > hi) continue; // out-of-range mass
        auto idx = static_cast<long>((x - lo) / width);
        if (idx >= bins) idx = bins - 1; // closed final bin (x == hi and fp edge cases)
        h.counts[static_cast<std::size_t>(idx)] += 1;
    }
    return h;
}

Histogram histogram_column(const Tensor& samples, int bins, double lo, double hi) {
    if (samples.rank() != 2)
        throw ContractError("histogram_column: samples must be [n x d], got " +
                            samples.shape_str());
    std::vector<double> col(samples.rows());
    for (std::size_t i = 0; i < samples.rows(); ++i) col[i] = samples.at(i, 0);
    return histogram(col, bins, lo, hi);
}

double js_divergence(const Histogram& a, const Histogram& b) {
    if (a.edges != b.edges)
        throw ContractError("js_divergence: histograms have different bin edges");
    const double na = static_cast<double>(a.in_range());
    const double nb = static_cast<double>(b.in_range());
    if (na == 0.0 || nb == 0.0) return std::log(2.0);
    double jsd = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        const double p = a.counts[i] / na;
        const double q = b.counts[i] / nb;
        const double m = 0.5 * (p + q);
        if (p > 0.0) jsd += 0.5 * p * std::log(p / m);
        if (q > 0.0) jsd += 0.5 * q * std::log(q / m);
    }
    // Analytic range is [0, ln 2]; trim float residue at the ends.
    return std::min(std::max(jsd, 0.0), std::log(2.0));
}

ModeCoverageReport mode_coverage(const Tensor& samples, const synthdata::MixtureSpec& spec,
                                 double tau) {
    if (samples.rank() != 2 || samples.rows() == 0)
        throw ContractError("mode_coverage: samples must be a nonempty [n x d] tensor");
    if (!(tau > 0.0 && tau < 1.0)) throw ContractError("mode_coverage: tau must lie in (0,1)");
    if (samples.cols() != spec.dimension)
        throw DimensionError("mode_coverage: samples " + samples.shape_str() +
                             " vs mixture dimension " + std::to_string(spec.dimension));
    const std::size_t n = samples.rows();
    const std::size_t k = spec.components.size();
    ModeCoverageReport rep;
    rep.modes.resize(k);
    std::vector<long> in_mode(k, 0);
    long in_any = 0;
    for (std::size_t r = 0; r < n; ++r) {
        bool any = false;
        for (std::size_t c = 0; c < k; ++c) {
            const synthdata::Component& comp = spec.components[c];
            bool inside = true;
            for (std::size_t d = 0; d < spec.dimension && inside; ++d)
                inside = std::fabs(samples.at(r, d) - comp.mean[d]) <= 3.0 * comp.stddev[d];
            if (inside) {
                in_mode[c] += 1;
                any = true;
            }
        }
        if (any) in_any += 1;
    }
    for (std::size_t c = 0; c < k; ++c) {
        rep.modes[c].mass_fraction = static_cast<double>(in_mode[c]) / static_cast<double>(n);
        rep.modes[c].captured = rep.modes[c].mass_fraction >= tau;
        if (rep.modes[c].captured) rep.modes_captured += 1;
    }
    rep.high_quality_fraction = static_cast<double>(in_any) / static_cast<double>(n);
    return rep;
}

void write_histogram_csv(const std::string& path, const Histogram& h) {
    std::ofstream os(path);
    if (!os) throw ContractError("write_histogram_csv: cannot open " + path);
    os << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        os << fmt_double(h.edges[i]) << "," << fmt_double(h.edges[i + 1]) << "," << h.counts[i]
           << "\n";
    os << "# out_of_range=" << h.out_of_range() << " total=" << h.total << "\n";
    if (!os) throw ContractError("write_histogram_csv: write failed for " + path);
}

Histogram read_histogram_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractError("read_histogram_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != "bin_lo,bin_hi,count")
        throw ContractError("read_histogram_csv: missing header in " + path);
    Histogram h;
    long out_of_range = 0;
    bool have_meta = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            long oor = 0, total = 0;
            if (std::sscanf(line.c_str(), "# out_of_range=%ld total=%ld", &oor, &total) == 2) {
                out_of_range = oor;
                h.total = total;
                have_meta = true;
            }
            continue;
        }
        double lo = 0.0, hi = 0.0;
        long count = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%ld", &lo, &hi, &count) != 3)
            throw ContractError("read_histogram_csv: bad row '" + line + "'");
        if (h.edges.empty()) h.edges.push_back(lo);
        h.edges.push_back(hi);
        h.counts.push_back(count);
    }
    if (h.counts.empty()) throw ContractError("read_histogram_csv: no bins in " + path);
    if (!have_meta) h.total = h.in_range() + out_of_range;
    return h;
}

std::string report_text(const ModeCoverageReport& r) {
    std::ostringstream os;
    os << "modes_captured: " << r.modes_captured << "\n";
    os << "high_quality_fraction: " << fmt_double(r.high_quality_fraction) << "\n";
    os << "jsd: " << fmt_double(r.jsd) << "\n";
    for (std::size_t i = 0; i < r.modes.size(); ++i) {
        os << "mode_" << i << "_captured: " << (r.modes[i].captured ? 1 : 0) << "\n";
        os << "mode_" << i << "_mass_fraction: " << fmt_double(r.modes[i].mass_fraction) << "\n";
    }
    return os.str();
}

ModeCoverageReport parse_report_text(const std::string& text) {
    ModeCoverageReport r;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto colon = line.find(": ");
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        const std::string val = line.substr(colon + 2);
        if (key == "modes_captured") r.modes_captured = std::stoi(val);
        else if (key == "high_quality_fraction") r.high_quality_fraction = std::stod(val);
        else if (key == "jsd") r.jsd = std::stod(val);
        else if (key.rfind("mode_", 0) == 0) {
            const auto second = key.find('_', 5);
            const std::size_t idx = std::stoul(key.substr(5, second - 5));
            if (r.modes.size() <= idx) r.modes.resize(idx + 1);
            if (key.ends_with("_captured")) r.modes[idx].captured = val == "1";
            else if (key.ends_with("_mass_fraction")) r.modes[idx].mass_fraction = std::stod(val);
        }
    }
    return r;
}

} // namespace prbgan::eval
