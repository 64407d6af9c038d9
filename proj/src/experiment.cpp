#include "prbgan/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "prbgan/nn.hpp"
#include "prbgan/rng.hpp"

namespace prbgan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
    gan.validate();
    if (schedule.total_steps < 1) throw ConfigError("train: total_steps must be >= 1");
    if (schedule.disc_steps_per_gen_step < 1)
        throw ConfigError("train: disc_steps_per_gen_step must be >= 1");
    if (schedule.eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
    if (schedule.sample_count_for_eval < 1)
        throw ConfigError("train: sample_count_for_eval must be >= 1");
    if (seeds.empty()) throw ConfigError("train: seed list must not be empty");
    if (histogram_bins < 1) throw ConfigError("train: histogram_bins must be >= 1");
    if (!(capture_tau > 0.0 && capture_tau < 1.0))
        throw ConfigError("train: tau must lie in (0,1)");
    if (out_dir.empty()) throw ConfigError("train: out_dir must not be empty");
    synthdata::MixtureSpec copy = mixture;
    copy.validate_and_normalize();
    if (net.hidden < 1 || net.hidden_layers < 1)
        throw ConfigError("net: hidden and hidden_layers must be >= 1");
    if (!(net.leaky_slope > 0.0 && net.leaky_slope < 1.0))
        throw ConfigError("net: leaky_slope must lie in (0,1)");
}

ExperimentConfig preset_paper_1d() {
    ExperimentConfig cfg;
    cfg.gan.variant = gan::Variant::prb;
    cfg.gan.p = 0.4;
    cfg.gan.n_mc = 20;
    cfg.gan.batch = 64;
    cfg.gan.latent_dim = 1;
    cfg.gan.opt_kind = nn::OptKind::adam;
    // Learning rate is a project default, not a published protocol value.
    cfg.gan.learning_rate = 2e-4;
    cfg.gan.weight_decay = 1e-4;
    cfg.net.data_dim = 1;
    cfg.net.hidden = 600;
    cfg.net.hidden_layers = 3; // 4 fully connected layers
    cfg.net.leaky_slope = 0.2;
    cfg.mixture = synthdata::paper_mixture();
    // 5 epochs over the 600k-point dataset at batch 64.
    cfg.schedule.total_steps = 5L * 600000L / 64L;
    cfg.schedule.eval_every = 500;
    cfg.schedule.sample_count_for_eval = 10000;
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.out_dir = "runs/paper_1d";
    return cfg;
}

// --- config file ------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_line(int line_no, const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
}

double to_double(const std::string& v, int line_no) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) bad_line(line_no, "trailing characters in number '" + v + "'");
        return d;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_line(line_no, "expected a number, got '" + v + "'");
    }
}

long to_long(const std::string& v, int line_no) {
    try {
        std::size_t pos = 0;
        const long l = std::stol(v, &pos);
        if (pos != v.size()) bad_line(line_no, "trailing characters in integer '" + v + "'");
        return l;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_line(line_no, "expected an integer, got '" + v + "'");
    }
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(v);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    cfg.mixture = synthdata::paper_mixture();
    std::vector<double> means, stds, weights;
    std::string mixture_preset;
    bool mixture_explicit = false;

    std::istringstream is(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') bad_line(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "gan" && section != "net" && section != "mixture" &&
                section != "train")
                bad_line(line_no, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) bad_line(line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) bad_line(line_no, "empty key");

        if (section == "gan") {
            if (key == "variant") {
                try {
                    cfg.gan.variant = gan::variant_from_name(val);
                } catch (const ConfigError& e) {
                    bad_line(line_no, e.what());
                }
            } else if (key == "p") cfg.gan.p = to_double(val, line_no);
            else if (key == "n_mc") cfg.gan.n_mc = static_cast<int>(to_long(val, line_no));
            else if (key == "batch") cfg.gan.batch = static_cast<int>(to_long(val, line_no));
            else if (key == "latent_dim")
                cfg.gan.latent_dim = static_cast<int>(to_long(val, line_no));
            else if (key == "b1") cfg.gan.b1 = to_double(val, line_no);
            else if (key == "b2") cfg.gan.b2 = to_double(val, line_no);
            else if (key == "lambda_var") cfg.gan.lambda_var = to_double(val, line_no);
            else if (key == "n_projections")
                cfg.gan.n_projections = static_cast<int>(to_long(val, line_no));
            else if (key == "m_slice") cfg.gan.m_slice = static_cast<int>(to_long(val, line_no));
            else if (key == "optimizer") {
                if (val == "adam") cfg.gan.opt_kind = nn::OptKind::adam;
                else if (val == "sgd") cfg.gan.opt_kind = nn::OptKind::sgd;
                else bad_line(line_no, "optimizer must be adam or sgd, got '" + val + "'");
            } else if (key == "learning_rate") cfg.gan.learning_rate = to_double(val, line_no);
            else if (key == "weight_decay") cfg.gan.weight_decay = to_double(val, line_no);
            else if (key == "adam_beta1") cfg.gan.adam_beta1 = to_double(val, line_no);
            else if (key == "adam_beta2") cfg.gan.adam_beta2 = to_double(val, line_no);
            else if (key == "adam_eps") cfg.gan.adam_eps = to_double(val, line_no);
            else if (key == "latent_prior") {
                if (val == "uniform") cfg.gan.latent_prior = synthdata::LatentPrior::uniform;
                else if (val == "gaussian")
                    cfg.gan.latent_prior = synthdata::LatentPrior::gaussian;
                else bad_line(line_no, "latent_prior must be uniform or gaussian");
            } else if (key == "p_per_layer") {
                cfg.gan.p_per_layer.clear();
                for (const auto& item : split_list(val))
                    cfg.gan.p_per_layer.push_back(to_double(item, line_no));
            } else bad_line(line_no, "unknown [gan] key '" + key + "'");
        } else if (section == "net") {
            if (key == "hidden") cfg.net.hidden = static_cast<std::size_t>(to_long(val, line_no));
            else if (key == "hidden_layers")
                cfg.net.hidden_layers = static_cast<std::size_t>(to_long(val, line_no));
            else if (key == "leaky_slope") cfg.net.leaky_slope = to_double(val, line_no);
            else bad_line(line_no, "unknown [net] key '" + key + "'");
        } else if (section == "mixture") {
            if (key == "preset") mixture_preset = val;
            else if (key == "means") {
                mixture_explicit = true;
                for (const auto& item : split_list(val)) means.push_back(to_double(item, line_no));
            } else if (key == "stds") {
                mixture_explicit = true;
                for (const auto& item : split_list(val)) stds.push_back(to_double(item, line_no));
            } else if (key == "weights") {
                mixture_explicit = true;
                for (const auto& item : split_list(val))
                    weights.push_back(to_double(item, line_no));
            } else bad_line(line_no, "unknown [mixture] key '" + key + "'");
        } else if (section == "train") {
            if (key == "total_steps") cfg.schedule.total_steps = to_long(val, line_no);
            else if (key == "disc_steps_per_gen_step")
                cfg.schedule.disc_steps_per_gen_step = static_cast<int>(to_long(val, line_no));
            else if (key == "eval_every") cfg.schedule.eval_every = to_long(val, line_no);
            else if (key == "sample_count_for_eval")
                cfg.schedule.sample_count_for_eval =
                    static_cast<std::size_t>(to_long(val, line_no));
            else if (key == "histogram_bins")
                cfg.histogram_bins = static_cast<int>(to_long(val, line_no));
            else if (key == "tau") cfg.capture_tau = to_double(val, line_no);
            else if (key == "standardize_data") {
                if (val == "true") cfg.standardize_data = true;
                else if (val == "false") cfg.standardize_data = false;
                else bad_line(line_no, "standardize_data must be true or false");
            }
            else if (key == "seeds") {
                cfg.seeds.clear();
                for (const auto& item : split_list(val))
                    cfg.seeds.push_back(static_cast<std::uint64_t>(to_long(item, line_no)));
            } else if (key == "out_dir") cfg.out_dir = val;
            else bad_line(line_no, "unknown [train] key '" + key + "'");
        } else {
            bad_line(line_no, "key outside any [section]");
        }
    }

    if (!mixture_preset.empty()) {
        if (mixture_explicit)
            throw ConfigError("config: give either a mixture preset or explicit lists, not both");
        if (mixture_preset == "paper_1d") cfg.mixture = synthdata::paper_mixture();
        else if (mixture_preset == "grid_2d") cfg.mixture = synthdata::grid_mixture_2d();
        else throw ConfigError("config: unknown mixture preset '" + mixture_preset + "'");
    } else if (mixture_explicit) {
        if (means.empty() || means.size() != stds.size())
            throw ConfigError("config: mixture means and stds must be same-length lists");
        if (!weights.empty() && weights.size() != means.size())
            throw ConfigError("config: mixture weights length does not match means");
        synthdata::MixtureSpec spec;
        spec.dimension = 1;
        for (std::size_t i = 0; i < means.size(); ++i)
            spec.components.push_back(
                {{means[i]}, {stds[i]}, weights.empty() ? 1.0 : weights[i]});
        spec.validate_and_normalize();
        cfg.mixture = spec;
    }
    cfg.net.data_dim = cfg.mixture.dimension;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_text(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "[gan]\n";
    os << "variant = " << gan::variant_name(cfg.gan.variant) << "\n";
    os << "p = " << fmt(cfg.gan.p) << "\n";
    os << "n_mc = " << cfg.gan.n_mc << "\n";
    os << "batch = " << cfg.gan.batch << "\n";
    os << "latent_dim = " << cfg.gan.latent_dim << "\n";
    os << "b1 = " << fmt(cfg.gan.b1) << "\n";
    os << "b2 = " << fmt(cfg.gan.b2) << "\n";
    os << "lambda_var = " << fmt(cfg.gan.lambda_var) << "\n";
    os << "n_projections = " << cfg.gan.n_projections << "\n";
    os << "m_slice = " << cfg.gan.m_slice << "\n";
    os << "optimizer = " << (cfg.gan.opt_kind == nn::OptKind::adam ? "adam" : "sgd") << "\n";
    os << "learning_rate = " << fmt(cfg.gan.learning_rate) << "\n";
    os << "weight_decay = " << fmt(cfg.gan.weight_decay) << "\n";
    os << "adam_beta1 = " << fmt(cfg.gan.adam_beta1) << "\n";
    os << "adam_beta2 = " << fmt(cfg.gan.adam_beta2) << "\n";
    os << "adam_eps = " << fmt(cfg.gan.adam_eps) << "\n";
    os << "latent_prior = "
       << (cfg.gan.latent_prior == synthdata::LatentPrior::uniform ? "uniform" : "gaussian")
       << "\n";
    if (!cfg.gan.p_per_layer.empty()) {
        os << "p_per_layer = ";
        for (std::size_t i = 0; i < cfg.gan.p_per_layer.size(); ++i)
            os << (i ? ", " : "") << fmt(cfg.gan.p_per_layer[i]);
        os << "\n";
    }
    os << "\n[net]\n";
    os << "hidden = " << cfg.net.hidden << "\n";
    os << "hidden_layers = " << cfg.net.hidden_layers << "\n";
    os << "leaky_slope = " << fmt(cfg.net.leaky_slope) << "\n";
    os << "\n[mixture]\n";
    os << "means = ";
    for (std::size_t i = 0; i < cfg.mixture.components.size(); ++i)
        os << (i ? ", " : "") << fmt(cfg.mixture.components[i].mean[0]);
    os << "\nstds = ";
    for (std::size_t i = 0; i < cfg.mixture.components.size(); ++i)
        os << (i ? ", " : "") << fmt(cfg.mixture.components[i].stddev[0]);
    os << "\nweights = ";
    for (std::size_t i = 0; i < cfg.mixture.components.size(); ++i)
        os << (i ? ", " : "") << fmt(cfg.mixture.components[i].weight);
    os << "\n\n[train]\n";
    os << "total_steps = " << cfg.schedule.total_steps << "\n";
    os << "disc_steps_per_gen_step = " << cfg.schedule.disc_steps_per_gen_step << "\n";
    os << "eval_every = " << cfg.schedule.eval_every << "\n";
    os << "sample_count_for_eval = " << cfg.schedule.sample_count_for_eval << "\n";
    os << "histogram_bins = " << cfg.histogram_bins << "\n";
    os << "tau = " << fmt(cfg.capture_tau) << "\n";
    os << "standardize_data = " << (cfg.standardize_data ? "true" : "false") << "\n";
    os << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? ", " : "") << cfg.seeds[i];
    os << "\nout_dir = " << cfg.out_dir << "\n";
    return os.str();
}

// --- training run -----------------------------------------------------------

namespace {

json step_record(long step, const gan::StepReport& disc, const gan::StepReport& gen,
                 const eval::ModeCoverageReport& cov) {
    json j;
    j["step"] = step;
    j["disc_loss"] = disc.disc_loss;
    j["gen_loss"] = gen.gen_loss;
    j["mean_logit_real"] = disc.mean_logit_real;
    j["mean_logit_fake"] = disc.mean_logit_fake;
    j["score_set_variance"] = disc.score_set_variance;
    j["uncertainty_mean"] = disc.uncertainty_mean;
    j["grad_norm_disc"] = disc.grad_norm_disc;
    j["grad_norm_gen"] = gen.grad_norm_gen;
    j["modes_captured"] = cov.modes_captured;
    j["high_quality_fraction"] = cov.high_quality_fraction;
    j["jsd"] = cov.jsd;
    return j;
}

} // namespace

SeedOutcome run_seed(const ExperimentConfig& cfg_in, std::uint64_t seed) {
    ExperimentConfig cfg = cfg_in;
    cfg.gan.seed = seed;
    cfg.net.data_dim = cfg.mixture.dimension;
    if (cfg.standardize_data && cfg.gan.data_shift.empty()) {
        synthdata::MixtureSpec mix = cfg.mixture;
        mix.validate_and_normalize();
        cfg.gan.data_shift.assign(mix.dimension, 0.0);
        cfg.gan.data_scale.assign(mix.dimension, 1.0);
        for (std::size_t d = 0; d < mix.dimension; ++d) {
            double mean = 0.0, second = 0.0;
            for (const auto& comp : mix.components) {
                mean += comp.weight * comp.mean[d];
                second += comp.weight *
                          (comp.mean[d] * comp.mean[d] + comp.stddev[d] * comp.stddev[d]);
            }
            cfg.gan.data_shift[d] = mean;
            cfg.gan.data_scale[d] = std::sqrt(std::max(second - mean * mean, 1e-12));
        }
    }
    cfg.validate();

    const fs::path dir = fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);

    gan::GanModel model = gan::GanModel::build(cfg.gan, cfg.net);

    auto ref_rng = rng::derive_stream(seed, {gan::stream_tag::real_ref});
    const Tensor real_ref =
        synthdata::sample(cfg.mixture, cfg.schedule.sample_count_for_eval, ref_rng);
    double lo = real_ref[0], hi = real_ref[0];
    for (std::size_t i = 0; i < real_ref.rows(); ++i) {
        lo = std::min(lo, real_ref.at(i, 0));
        hi = std::max(hi, real_ref.at(i, 0));
    }
    lo -= 5.0;
    hi += 5.0;
    const eval::Histogram real_hist =
        eval::histogram_column(real_ref, cfg.histogram_bins, lo, hi);
    eval::write_histogram_csv((dir / "hist_real.csv").string(), real_hist);

    std::ofstream metrics(dir / "metrics.jsonl");
    if (!metrics) throw ContractError("run_seed: cannot open metrics.jsonl under " + dir.string());

    Tensor last_fake;
    auto evaluate = [&](long step) {
        const Tensor fake =
            gan::generate(model, cfg.schedule.sample_count_for_eval,
                          rng::derive(seed, {gan::stream_tag::eval_noise,
                                             static_cast<std::uint64_t>(step)}));
        const eval::Histogram fake_hist =
            eval::histogram_column(fake, cfg.histogram_bins, lo, hi);
        eval::ModeCoverageReport cov = eval::mode_coverage(fake, cfg.mixture, cfg.capture_tau);
        cov.jsd = eval::js_divergence(real_hist, fake_hist);
        eval::write_histogram_csv((dir / ("hist_step_" + std::to_string(step) + ".csv")).string(),
                                  fake_hist);
        std::ofstream rep(dir / ("report_step_" + std::to_string(step) + ".txt"));
        rep << eval::report_text(cov);
        last_fake = fake;
        return cov;
    };

    SeedOutcome outcome;
    outcome.seed = seed;

    eval::ModeCoverageReport cov0 = evaluate(0);
    outcome.jsd_step0 = cov0.jsd;
    metrics << step_record(0, {}, {}, cov0).dump() << std::endl;

    gan::StepReport drep, grep;
    eval::ModeCoverageReport last_cov = cov0;
    try {
        for (long step = 1; step <= cfg.schedule.total_steps; ++step) {
            Tensor batch;
            for (int d = 0; d < cfg.schedule.disc_steps_per_gen_step; ++d) {
                auto batch_rng = rng::derive_stream(
                    seed, {gan::stream_tag::real_batch, static_cast<std::uint64_t>(step),
                           static_cast<std::uint64_t>(d)});
                batch = synthdata::sample(cfg.mixture, cfg.gan.batch, batch_rng);
                drep = gan::disc_step(model, batch, static_cast<std::uint64_t>(step),
                                      static_cast<std::uint64_t>(d));
            }
            grep = gan::gen_step(model, batch, static_cast<std::uint64_t>(step),
                                 static_cast<std::uint64_t>(cfg.schedule.disc_steps_per_gen_step - 1));
            outcome.steps_completed = step;
            if (step % cfg.schedule.eval_every == 0 || step == cfg.schedule.total_steps) {
                last_cov = evaluate(step);
                metrics << step_record(step, drep, grep, last_cov).dump() << std::endl;
            }
        }
    } catch (const NumericError& e) {
        outcome.aborted = true;
        outcome.error = e.what();
    }

    outcome.final_report = last_cov;
    outcome.jsd_final = last_cov.jsd;
    if (!last_fake.empty()) write_samples_csv((dir / "samples_final.csv").string(), last_fake);
    nn::save_params((dir / "gen.ckpt").string(), model.gen);
    nn::save_params((dir / "disc.ckpt").string(), model.disc);
    if (model.has_u_head()) nn::save_params((dir / "u_head.ckpt").string(), model.u_head);
    return outcome;
}

namespace {

int thread_budget(std::size_t n_seeds) {
    if (const char* env = std::getenv("PRBGAN_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return std::min<std::size_t>(v, n_seeds);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min<std::size_t>(hw ? hw : 1, n_seeds));
}

} // namespace

int run(const ExperimentConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    std::vector<SeedOutcome> outcomes(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.seeds.size()) return;
            try {
                outcomes[i] = run_seed(cfg, cfg.seeds[i]);
            } catch (const std::exception& e) {
                outcomes[i].seed = cfg.seeds[i];
                outcomes[i].aborted = true;
                outcomes[i].error = e.what();
            }
        }
    };
    const int n_threads = thread_budget(cfg.seeds.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<double> modes, jsd_final, jsd0;
    bool any_abort = false;
    json per_seed = json::array();
    for (const SeedOutcome& o : outcomes) {
        modes.push_back(o.final_report.modes_captured);
        jsd_final.push_back(o.jsd_final);
        jsd0.push_back(o.jsd_step0);
        any_abort = any_abort || o.aborted;
        json j;
        j["seed"] = o.seed;
        j["modes_captured"] = o.final_report.modes_captured;
        j["high_quality_fraction"] = o.final_report.high_quality_fraction;
        j["jsd_final"] = o.jsd_final;
        j["jsd_step0"] = o.jsd_step0;
        j["steps_completed"] = o.steps_completed;
        j["aborted"] = o.aborted;
        if (o.aborted) j["error"] = o.error;
        per_seed.push_back(j);
    }
    json summary;
    summary["variant"] = gan::variant_name(cfg.gan.variant);
    summary["median_modes_captured"] = median(modes);
    summary["iqr_modes_captured"] = iqr(modes);
    summary["median_jsd_final"] = median(jsd_final);
    summary["iqr_jsd_final"] = iqr(jsd_final);
    summary["median_jsd_step0"] = median(jsd0);
    summary["seeds"] = per_seed;
    std::ofstream os(fs::path(cfg.out_dir) / "summary.json");
    os << summary.dump(2) << "\n";
    return any_abort ? 3 : 0;
}

void write_samples_csv(const std::string& path, const Tensor& samples) {
    if (samples.rank() != 2)
        throw ContractError("write_samples_csv: samples must be [n x d], got " +
                            samples.shape_str());
    std::ofstream os(path);
    if (!os) throw ContractError("write_samples_csv: cannot open " + path);
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        for (std::size_t c = 0; c < samples.cols(); ++c)
            os << (c ? "," : "") << fmt(samples.at(r, c));
        os << "\n";
    }
}

Tensor read_samples_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractError("read_samples_csv: cannot open " + path);
    std::vector<double> values;
    std::size_t cols = 0;
    std::string line;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        const auto items = split_list(line);
        if (cols == 0) cols = items.size();
        if (items.size() != cols)
            throw ContractError("read_samples_csv: ragged row in " + path);
        for (const auto& item : items) values.push_back(std::stod(item));
        ++rows;
    }
    if (rows == 0) throw ContractError("read_samples_csv: no samples in " + path);
    return Tensor::from({rows, cols}, std::move(values));
}

std::vector<std::string> read_metrics_lines(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractError("read_metrics_lines: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json::parse(line); // validates
        lines.push_back(line);
    }
    return lines;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median: empty");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double iqr(std::vector<double> values) {
    if (values.empty()) throw ContractError("iqr: empty");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const std::size_t half = (n + 1) / 2; // Tukey hinges
    std::vector<double> lower(values.begin(), values.begin() + half);
    std::vector<double> upper(values.end() - half, values.end());
    return median(upper) - median(lower);
}

} // namespace prbgan::cli
