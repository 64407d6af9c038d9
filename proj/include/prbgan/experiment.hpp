#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prbgan/eval.hpp"
#include "prbgan/gan.hpp"
#include "prbgan/synthdata.hpp"

namespace prbgan::cli {

struct TrainSchedule {
    long total_steps = 2000;
    int disc_steps_per_gen_step = 1;
    long eval_every = 200;
    std::size_t sample_count_for_eval = 10000;
};

struct ExperimentConfig {
    gan::GanConfig gan;
    gan::NetSpec net;
    synthdata::MixtureSpec mixture;
    TrainSchedule schedule;
    std::string out_dir = "runs/out";
    std::vector<std::uint64_t> seeds = {1};
    int histogram_bins = 100;
    double capture_tau = 0.02;
    // Standardize the data coordinates inside the GAN (fixed affine map from
    // the mixture's analytic moments); all emitted samples stay raw.
    bool standardize_data = true;

    void validate() const; // throws ConfigError
};

// The 1-D mixture protocol: 4 fully connected layers of 600 leaky-relu
// units (slope 0.2), 1-D latent noise, p = 0.4, N = 20, batch 64, adam at
// 2e-4, five training epochs' worth of steps over the 600k-point dataset
// (override total_steps for shorter studies).
ExperimentConfig preset_paper_1d();

// Flat `key = value` config with [section] headers; arrays are comma
// lists. Unknown keys and malformed lines raise ConfigError carrying the
// line number.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// The config rendered back out (round-trips through parse_config_text).
std::string config_text(const ExperimentConfig& cfg);

struct SeedOutcome {
    std::uint64_t seed = 0;
    eval::ModeCoverageReport final_report;
    double jsd_step0 = 0.0;
    double jsd_final = 0.0;
    long steps_completed = 0;
    bool aborted = false;
    std::string error;
};

// Trains one seed; artifacts land under <out_dir>/seed_<k>/:
// hist_real.csv, hist_step_<s>.csv, report_step_<s>.txt, metrics.jsonl,
// samples_final.csv, gen.ckpt, disc.ckpt.
SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

// Every seed in the list (up to PRBGAN_THREADS in parallel), then
// summary.json with median/IQR aggregates. Exit status: 0 on success,
// 3 when a seed aborted numerically (partial outputs retained).
int run(const ExperimentConfig& cfg);

// One sample per row, comma-separated coordinates.
void write_samples_csv(const std::string& path, const Tensor& samples);
Tensor read_samples_csv(const std::string& path);

// Reads a metrics.jsonl stream back as raw JSON lines (validated).
std::vector<std::string> read_metrics_lines(const std::string& path);

double median(std::vector<double> values);
double iqr(std::vector<double> values); // Tukey hinges

} // namespace prbgan::cli
