// multsl command-line experiment runner.
//
// Exit codes: 0 success, 2 configuration error, 3 data/input error,
// 4 protocol error, 5 internal error.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "multsl/channel.hpp"
#include "multsl/metrics.hpp"
#include "multsl/model.hpp"
#include "multsl/protocol.hpp"
#include "multsl/scenario.hpp"
#include "multsl/trainer.hpp"
#include "multsl/wire.hpp"

namespace fs = std::filesystem;
using namespace multsl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitProtocol = 4;
constexpr int kExitInternal = 5;

struct Experiment {
    ScenarioConfig scenario;
    ModelConfig model;
    ChannelParams channel;
    TrainParams train;
    SplitMode split_mode = SplitMode::Paper;
    bool auto_t_comp = true;  // derive T_comp from the variant unless set
    bool deterministic = false;

    Experiment() {
        // Desk-mode defaults: 16x16 frames, 8 lower channels, 2000 samples.
        scenario.N_H = scenario.N_W = 16;
        scenario.n_samples = 2000;
        model.N_H = model.N_W = 16;
        model.conv1_channels = 8;
        model.w_H = model.w_W = 4;
    }

    void finalize() {
        model.N_H = scenario.N_H;
        model.N_W = scenario.N_W;
        if (auto_t_comp) channel.t_comp_s = default_t_comp_s(model.variant);
        scenario.validate();
        model.validate();
        channel.validate();
    }
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
    }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    const double v = parse_real(key, value);
    if (v < 0.0 || v != std::floor(v)) {
        throw ConfigError("config key '" + key + "': not a non-negative integer: '" + value + "'");
    }
    return static_cast<std::size_t>(v);
}

SplitMode split_from_name(const std::string& name) {
    if (name == "paper") return SplitMode::Paper;
    if (name == "disjoint") return SplitMode::Disjoint;
    throw ConfigError("unknown split mode: '" + name + "' (expected paper|disjoint)");
}

WireDtype wire_from_name(const std::string& name) {
    if (name == "f32") return WireDtype::F32;
    if (name == "f64") return WireDtype::F64;
    throw ConfigError("unknown wire dtype: '" + name + "' (expected f32|f64)");
}

void apply_key(Experiment& exp, const std::string& key, const std::string& value) {
    if (key == "n_samples") exp.scenario.n_samples = parse_count(key, value);
    else if (key == "frame_h") exp.scenario.N_H = parse_count(key, value);
    else if (key == "frame_w") exp.scenario.N_W = parse_count(key, value);
    else if (key == "tau_ms") { exp.scenario.tau_ms = parse_real(key, value); }
    else if (key == "los_power_dbm") exp.scenario.los_power_dbm = parse_real(key, value);
    else if (key == "nlos_drop_db") exp.scenario.nlos_drop_db = parse_real(key, value);
    else if (key == "nlos_duration_ms_min") exp.scenario.nlos_duration_ms_min = parse_real(key, value);
    else if (key == "nlos_duration_ms_max") exp.scenario.nlos_duration_ms_max = parse_real(key, value);
    else if (key == "transition_ms_min") exp.scenario.transition_ms_min = parse_real(key, value);
    else if (key == "transition_ms_max") exp.scenario.transition_ms_max = parse_real(key, value);
    else if (key == "pedestrians") exp.scenario.pedestrians = parse_count(key, value);
    else if (key == "speed_min") exp.scenario.speed_min = parse_real(key, value);
    else if (key == "speed_max") exp.scenario.speed_max = parse_real(key, value);
    else if (key == "size_min") exp.scenario.size_min = parse_real(key, value);
    else if (key == "size_max") exp.scenario.size_max = parse_real(key, value);
    else if (key == "noise_std_db") exp.scenario.noise_std_db = parse_real(key, value);
    else if (key == "seed") {
        exp.scenario.seed = parse_count(key, value);
        exp.train.seed = exp.scenario.seed;
    }
    else if (key == "variant") exp.model.variant = variant_from_name(value);
    else if (key == "l") exp.model.L = parse_count(key, value);
    else if (key == "s") exp.model.S = parse_count(key, value);
    else if (key == "pool_h") exp.model.w_H = parse_count(key, value);
    else if (key == "pool_w") exp.model.w_W = parse_count(key, value);
    else if (key == "conv1_channels") exp.model.conv1_channels = parse_count(key, value);
    else if (key == "lstm_hidden_channels") exp.model.lstm_hidden_channels = parse_count(key, value);
    else if (key == "bandwidth_hz") exp.channel.bandwidth_hz = parse_real(key, value);
    else if (key == "noise_psd_dbm_per_hz") exp.channel.noise_psd_dbm_per_hz = parse_real(key, value);
    else if (key == "bits_per_pixel") exp.channel.bits_per_pixel = static_cast<std::uint32_t>(parse_count(key, value));
    else if (key == "bits_per_grad") exp.channel.bits_per_grad = static_cast<std::uint32_t>(parse_count(key, value));
    else if (key == "t_comp_ms") {
        if (value == "auto") {
            exp.auto_t_comp = true;
        } else {
            exp.channel.t_comp_s = parse_real(key, value) * 1e-3;
            exp.auto_t_comp = false;
        }
    }
    else if (key == "tau_prime_ms") exp.channel.tau_prime_s = parse_real(key, value) * 1e-3;
    else if (key == "batch_size") exp.train.batch_size = parse_count(key, value);
    else if (key == "epochs") exp.train.epochs = parse_count(key, value);
    else if (key == "wire") exp.train.wire = wire_from_name(value);
    else if (key == "split") exp.split_mode = split_from_name(value);
    else throw ConfigError("unknown config key: '" + key + "'");
}

void load_config_file(Experiment& exp, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value, got '" + stripped + "'");
        }
        apply_key(exp, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
}

void parse_pool(const std::string& text, std::size_t& h, std::size_t& w) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw ConfigError("--pool expects HxW, got '" + text + "'");
    h = parse_count("pool", text.substr(0, x));
    w = parse_count("pool", text.substr(x + 1));
    if (h == 0 || w == 0) throw ConfigError("--pool dimensions must be positive");
}

void write_resolved_config(const Experiment& exp, const fs::path& dir) {
    std::ofstream out(dir / "config.resolved");
    if (!out) throw IoError("cannot write " + (dir / "config.resolved").string());
    out.precision(17);
    out << "n_samples=" << exp.scenario.n_samples << '\n'
        << "frame_h=" << exp.scenario.N_H << '\n'
        << "frame_w=" << exp.scenario.N_W << '\n'
        << "tau_ms=" << exp.scenario.tau_ms << '\n'
        << "los_power_dbm=" << exp.scenario.los_power_dbm << '\n'
        << "nlos_drop_db=" << exp.scenario.nlos_drop_db << '\n'
        << "nlos_duration_ms_min=" << exp.scenario.nlos_duration_ms_min << '\n'
        << "nlos_duration_ms_max=" << exp.scenario.nlos_duration_ms_max << '\n'
        << "transition_ms_min=" << exp.scenario.transition_ms_min << '\n'
        << "transition_ms_max=" << exp.scenario.transition_ms_max << '\n'
        << "pedestrians=" << exp.scenario.pedestrians << '\n'
        << "speed_min=" << exp.scenario.speed_min << '\n'
        << "speed_max=" << exp.scenario.speed_max << '\n'
        << "size_min=" << exp.scenario.size_min << '\n'
        << "size_max=" << exp.scenario.size_max << '\n'
        << "noise_std_db=" << exp.scenario.noise_std_db << '\n'
        << "seed=" << exp.scenario.seed << '\n'
        << "variant=" << variant_name(exp.model.variant) << '\n'
        << "l=" << exp.model.L << '\n'
        << "s=" << exp.model.S << '\n'
        << "pool_h=" << exp.model.w_H << '\n'
        << "pool_w=" << exp.model.w_W << '\n'
        << "conv1_channels=" << exp.model.conv1_channels << '\n'
        << "lstm_hidden_channels=" << exp.model.lstm_hidden_channels << '\n'
        << "bandwidth_hz=" << exp.channel.bandwidth_hz << '\n'
        << "noise_psd_dbm_per_hz=" << exp.channel.noise_psd_dbm_per_hz << '\n'
        << "bits_per_pixel=" << exp.channel.bits_per_pixel << '\n'
        << "bits_per_grad=" << exp.channel.bits_per_grad << '\n'
        << "t_comp_ms=" << exp.channel.t_comp_s * 1e3 << '\n'
        << "tau_prime_ms=" << exp.channel.tau_prime_s * 1e3 << '\n'
        << "batch_size=" << exp.train.batch_size << '\n'
        << "epochs=" << exp.train.epochs << '\n'
        << "wire=" << (exp.train.wire == WireDtype::F32 ? "f32" : "f64") << '\n'
        << "split=" << (exp.split_mode == SplitMode::Paper ? "paper" : "disjoint") << '\n';
}

fs::path prepare_out(const std::string& out) {
    fs::path dir(out.empty() ? "." : out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir.string());
    return dir;
}

// ---- CSV + SVG helpers ------------------------------------------------------

struct Csv {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) {
            throw IoError("required column '" + name + "' not found in CSV");
        }
        return static_cast<std::size_t>(it - columns.begin());
    }
    std::vector<double> numeric(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& row : rows) out.push_back(parse_real(name, row[c]));
        return out;
    }
};

Csv read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV: " + path.string());
    Csv csv;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty CSV: " + path.string());
    std::istringstream header(trim(line));
    std::string field;
    while (std::getline(header, field, ',')) csv.columns.push_back(field);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> row;
        std::istringstream ss(line);
        while (std::getline(ss, field, ',')) row.push_back(field);
        row.resize(csv.columns.size());
        csv.rows.push_back(std::move(row));
    }
    if (csv.rows.empty()) throw IoError("CSV has no data rows: " + path.string());
    return csv;
}

struct Series {
    std::string name;
    std::vector<double> x, y;
};

// Fixed-layout deterministic SVG line plot.
void write_svg(const fs::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<Series>& series) {
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const Series& s : series) {
        for (double v : s.x) { x_lo = std::min(x_lo, v); x_hi = std::max(x_hi, v); }
        for (double v : s.y) { y_lo = std::min(y_lo, v); y_hi = std::max(y_hi, v); }
    }
    if (!(x_hi >= x_lo) || !(y_hi >= y_lo)) throw IoError("nothing to plot for " + path.string());
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;

    const double W = 640.0, H = 420.0, ml = 70.0, mr = 20.0, mt = 40.0, mb = 50.0;
    auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr); };
    auto sy = [&](double y) { return H - mb - (y - y_lo) / (y_hi - y_lo) * (H - mt - mb); };
    const char* colors[] = {"#1f6fb2", "#c8421f", "#3a8f3a", "#7a4fb2", "#b28c1f"};

    std::ofstream out(path);
    if (!out) throw IoError("cannot write SVG: " + path.string());
    char buf[256];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "viewBox=\"0 0 640 420\">\n";
    out << "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">%s</text>\n",
                  title.c_str());
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"320\" y=\"408\" text-anchor=\"middle\" font-size=\"12\">%s</text>\n",
                  x_label.c_str());
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"16\" y=\"210\" text-anchor=\"middle\" font-size=\"12\" "
                  "transform=\"rotate(-90 16 210)\">%s</text>\n",
                  y_label.c_str());
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" "
                  "stroke=\"#444444\"/>\n",
                  ml, mt, W - ml - mr, H - mt - mb);
    out << buf;
    // Axis extents as text labels (deterministic %.6g formatting).
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"start\">%.6g</text>\n",
                  ml, H - mb + 16.0, x_lo);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">%.6g</text>\n",
                  W - mr, H - mb + 16.0, x_hi);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">%.6g</text>\n",
                  ml - 6.0, H - mb, y_lo);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">%.6g</text>\n",
                  ml - 6.0, mt + 10.0, y_hi);
    out << buf;

    for (std::size_t i = 0; i < series.size(); ++i) {
        const Series& s = series[i];
        out << "<polyline fill=\"none\" stroke=\"" << colors[i % 5] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t j = 0; j < s.x.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(s.x[j]), sy(s.y[j]));
            out << buf;
        }
        out << "\"/>\n";
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" fill=\"%s\">%s</text>\n",
                      ml + 10.0, mt + 18.0 + 16.0 * static_cast<double>(i), colors[i % 5],
                      s.name.c_str());
        out << buf;
    }
    out << "</svg>\n";
    if (!out) throw IoError("write failed: " + path.string());
}

// ---- shared experiment steps --------------------------------------------------

Dataset make_dataset(const Experiment& exp) { return generate(exp.scenario); }

void write_test_metrics(const fs::path& path, const Experiment& exp,
                        const std::vector<PredictionRecord>& records, std::uint64_t bits,
                        double leakage, double t_fp_mean) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    const auto seg = segmented_rmse(records);
    auto seg_or_nan = [&](LinkLabel l) {
        return seg.count(l) ? std::to_string(seg.at(l)) : "nan";
    };
    out << "pool_w,pool_h,variant,rmse_test,rmse_los,rmse_nlos,rmse_transition,fp_bits,leakage,"
           "t_fp_mean_s\n";
    out << exp.model.w_W << ',' << exp.model.w_H << ',' << variant_name(exp.model.variant) << ','
        << rmse(records) << ',' << seg_or_nan(LinkLabel::LoS) << ','
        << seg_or_nan(LinkLabel::NLoS) << ',' << seg_or_nan(LinkLabel::Transition) << ',' << bits
        << ',' << leakage << ',' << t_fp_mean << '\n';
}

double mean_t_fp(const LatencyTimeline& tl) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : tl.t_fp_s) {
        if (std::isfinite(v)) {
            sum += v;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double leakage_or_sentinel(const Dataset& ds, const IndexRange& range, const UESegment& ue) {
    try {
        return privacy_leakage(raw_frames(ds, range), ue_outputs(ds, range, ue));
    } catch (const DegenerateLeakage&) {
        std::fprintf(stderr, "note: outputs identical to inputs; reporting maximal leakage\n");
        return std::numeric_limits<double>::infinity();
    }
}

// ---- subcommands ---------------------------------------------------------------

void cmd_generate(const Experiment& exp, const std::string& out) {
    const fs::path dir = prepare_out(out);
    Dataset ds = make_dataset(exp);
    export_dataset(ds, (dir / "frames.bin").string(), (dir / "trace.csv").string());
    write_resolved_config(exp, dir);
    std::printf("generated %zu samples, %zu blockage episodes -> %s\n", ds.size(),
                ds.episodes.size(), dir.string().c_str());
}

void cmd_train(Experiment exp, const std::string& out, bool capture) {
    const fs::path dir = prepare_out(out);
    exp.train.capture = capture;
    Dataset ds = make_dataset(exp);
    const SplitSpec split = split_dataset(ds.size(), exp.split_mode);
    TrainedModel model = train_model(ds, split, exp.model, exp.channel, exp.train);

    std::ofstream log(dir / "train_log.csv");
    if (!log) throw IoError("cannot write train_log.csv");
    log.precision(17);
    log << "epoch,step_n,t_n_s,val_rmse_db\n";
    for (const EpochLog& e : model.log) {
        log << e.epoch << ',' << e.step_n << ',' << e.t_n_s << ',' << e.val_rmse_db << '\n';
    }

    Checkpoint ckpt{model.config, model.ue, model.bs, model.std_spec.mean, model.std_spec.stddev};
    save_checkpoint((dir / "checkpoint.bin").string(), ckpt);

    const auto records = evaluate(ds, split.test, model.config, model.ue, model.bs, model.std_spec);
    const std::size_t n_layer2 = count_upper_layer_weights(model.ue);
    const LatencyTimeline tl = build_timeline(ds.powers_dbm, exp.model, n_layer2, exp.channel);
    const double leak = exp.model.variant == Variant::RF
                            ? 0.0
                            : leakage_or_sentinel(ds, split.valid, model.ue);
    write_test_metrics(dir / "test_metrics.csv", exp, records,
                       fp_payload_bits(exp.model, exp.channel.bits_per_pixel), leak,
                       mean_t_fp(tl));

    if (capture) {
        const fs::path msg_dir = dir / "messages";
        fs::create_directories(msg_dir);
        std::size_t step = 0;
        for (const MessageLog& step_log : model.captured) {
            std::size_t idx = 0;
            for (const std::vector<std::uint8_t>& bytes : step_log) {
                char name[64];
                std::snprintf(name, sizeof name, "step%06zu_%s.bin", step,
                              idx == 0 ? "fp" : "bp");
                std::ofstream mf(msg_dir / name, std::ios::binary);
                mf.write(reinterpret_cast<const char*>(bytes.data()),
                         static_cast<std::streamsize>(bytes.size()));
                ++idx;
            }
            ++step;
        }
    }

    write_resolved_config(exp, dir);
    std::printf("trained %s: test RMSE %.4f dB over %zu records -> %s\n",
                variant_name(exp.model.variant).c_str(), rmse(records), records.size(),
                dir.string().c_str());
}

void cmd_sweep_pool(Experiment exp, const std::string& out, const std::string& pools_text) {
    const fs::path dir = prepare_out(out);
    std::vector<std::pair<std::size_t, std::size_t>> pools;
    std::istringstream ss(pools_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t h = 0, w = 0;
        parse_pool(trim(item), h, w);
        pools.emplace_back(h, w);
    }
    if (pools.empty()) throw ConfigError("--pools: no pool dimensions given");

    Dataset ds = make_dataset(exp);
    const SplitSpec split = split_dataset(ds.size(), exp.split_mode);

    std::ofstream csv(dir / "sweep.csv");
    if (!csv) throw IoError("cannot write sweep.csv");
    csv.precision(17);
    csv << "pool_w,pool_h,variant,rmse_test,rmse_los,rmse_nlos,rmse_transition,fp_bits,leakage,"
           "t_fp_mean_s\n";
    for (const auto& [h, w] : pools) {
        exp.model.w_H = h;
        exp.model.w_W = w;
        exp.model.validate();
        TrainedModel model = train_model(ds, split, exp.model, exp.channel, exp.train);
        const auto records =
            evaluate(ds, split.test, model.config, model.ue, model.bs, model.std_spec);
        const auto seg = segmented_rmse(records);
        auto seg_or_nan = [&](LinkLabel l) {
            return seg.count(l) ? std::to_string(seg.at(l)) : "nan";
        };
        const LatencyTimeline tl =
            build_timeline(ds.powers_dbm, exp.model, count_upper_layer_weights(model.ue),
                           exp.channel);
        const double leak = exp.model.variant == Variant::RF
                                ? 0.0
                                : leakage_or_sentinel(ds, split.valid, model.ue);
        csv << w << ',' << h << ',' << variant_name(exp.model.variant) << ',' << rmse(records)
            << ',' << seg_or_nan(LinkLabel::LoS) << ',' << seg_or_nan(LinkLabel::NLoS) << ','
            << seg_or_nan(LinkLabel::Transition) << ','
            << fp_payload_bits(exp.model, exp.channel.bits_per_pixel) << ',' << leak << ','
            << mean_t_fp(tl) << '\n';
        std::printf("pool %zux%zu: test RMSE %.4f dB, fp_bits %llu, leakage %.5f\n", h, w,
                    rmse(records),
                    static_cast<unsigned long long>(
                        fp_payload_bits(exp.model, exp.channel.bits_per_pixel)),
                    leak);
    }
    write_resolved_config(exp, dir);
}

void cmd_latency_report(const Experiment& exp, const std::string& out) {
    const fs::path dir = prepare_out(out);
    Dataset ds = make_dataset(exp);

    ModelConfig probe = exp.model;
    UESegment ue = UESegment::init(probe, exp.train.seed);
    const std::size_t n_layer2 = count_upper_layer_weights(ue);
    const LatencyTimeline tl = build_timeline(ds.powers_dbm, probe, n_layer2, exp.channel);

    std::ofstream ic(dir / "latency_intervals.csv");
    if (!ic) throw IoError("cannot write latency_intervals.csv");
    ic.precision(17);
    ic << "k,P_k_dBm,T_FP,T_BP,T_step,N\n";
    for (std::size_t k = 0; k < tl.n_steps.size(); ++k) {
        ic << (k + 1) << ',' << ds.powers_dbm[k] << ',' << tl.t_fp_s[k] << ',' << tl.t_bp_s[k]
           << ',' << tl.t_step_s[k] << ',' << tl.n_steps[k] << '\n';
    }

    std::uint64_t total = 0;
    for (std::uint64_t b : tl.n_steps) total += b;
    if (total == 0) throw TraceError("latency-report: no interval admits a gradient step");
    const std::uint64_t n_max = std::min<std::uint64_t>(total > 1 ? total - 1 : 1, 2000);

    std::ofstream sc(dir / "latency_steps.csv");
    if (!sc) throw IoError("cannot write latency_steps.csv");
    sc.precision(17);
    sc << "n,k_n,T_n\n";
    for (std::uint64_t n = 1; n <= n_max; ++n) {
        const Elapsed e = elapsed_time(n, tl);
        sc << n << ',' << e.k_n << ',' << e.t_n_s << '\n';
    }
    write_resolved_config(exp, dir);
    std::printf("latency report: %zu intervals, %llu plotted steps -> %s\n", tl.n_steps.size(),
                static_cast<unsigned long long>(n_max), dir.string().c_str());
}

void cmd_privacy_report(Experiment exp, const std::string& out, const std::string& pools_text) {
    const fs::path dir = prepare_out(out);
    if (exp.model.variant == Variant::RF) {
        throw ConfigError("privacy-report: the rf variant sends no images");
    }
    std::vector<std::pair<std::size_t, std::size_t>> pools;
    std::istringstream ss(pools_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t h = 0, w = 0;
        parse_pool(trim(item), h, w);
        pools.emplace_back(h, w);
    }
    if (pools.empty()) throw ConfigError("--pools: no pool dimensions given");

    Dataset ds = make_dataset(exp);
    const SplitSpec split = split_dataset(ds.size(), exp.split_mode);

    std::ofstream csv(dir / "privacy.csv");
    if (!csv) throw IoError("cannot write privacy.csv");
    csv.precision(17);
    csv << "pool_w,pool_h,variant,leakage,fp_bits\n";
    for (const auto& [h, w] : pools) {
        exp.model.w_H = h;
        exp.model.w_W = w;
        exp.model.validate();
        TrainedModel model = train_model(ds, split, exp.model, exp.channel, exp.train);
        const double leak = leakage_or_sentinel(ds, split.valid, model.ue);
        csv << w << ',' << h << ',' << variant_name(exp.model.variant) << ',' << leak << ','
            << fp_payload_bits(exp.model, exp.channel.bits_per_pixel) << '\n';
        std::printf("pool %zux%zu: leakage %.5f\n", h, w, leak);
    }
    write_resolved_config(exp, dir);
}

void cmd_report(const std::string& out) {
    const fs::path dir(out.empty() ? "." : out);
    bool plotted = false;

    if (fs::exists(dir / "train_log.csv")) {
        const Csv csv = read_csv(dir / "train_log.csv");
        Series s{"validation RMSE", csv.numeric("t_n_s"), csv.numeric("val_rmse_db")};
        write_svg(dir / "train_rmse_vs_time.svg", "Validation RMSE over training time",
                  "elapsed training time T_n [s]", "validation RMSE [dB]", {s});
        plotted = true;
    }
    if (fs::exists(dir / "sweep.csv")) {
        const Csv csv = read_csv(dir / "sweep.csv");
        const std::vector<double> pw = csv.numeric("pool_w");
        const std::vector<double> ph = csv.numeric("pool_h");
        std::vector<double> area(pw.size());
        for (std::size_t i = 0; i < pw.size(); ++i) area[i] = pw[i] * ph[i];
        write_svg(dir / "sweep_rmse.svg", "Test RMSE vs pooling area", "pool area [px]",
                  "test RMSE [dB]", {Series{"test RMSE", area, csv.numeric("rmse_test")}});
        write_svg(dir / "sweep_payload.svg", "FP payload vs pooling area", "pool area [px]",
                  "FP payload [bits]", {Series{"fp_bits", area, csv.numeric("fp_bits")}});
        write_svg(dir / "sweep_leakage.svg", "Privacy leakage vs pooling area", "pool area [px]",
                  "leakage", {Series{"leakage", area, csv.numeric("leakage")}});
        plotted = true;
    }
    if (fs::exists(dir / "privacy.csv")) {
        const Csv csv = read_csv(dir / "privacy.csv");
        const std::vector<double> pw = csv.numeric("pool_w");
        const std::vector<double> ph = csv.numeric("pool_h");
        std::vector<double> area(pw.size());
        for (std::size_t i = 0; i < pw.size(); ++i) area[i] = pw[i] * ph[i];
        write_svg(dir / "privacy_leakage.svg", "Privacy leakage vs pooling area",
                  "pool area [px]", "leakage", {Series{"leakage", area, csv.numeric("leakage")}});
        plotted = true;
    }
    if (fs::exists(dir / "latency_steps.csv")) {
        const Csv csv = read_csv(dir / "latency_steps.csv");
        write_svg(dir / "latency_tn.svg", "Elapsed time per gradient step", "step n", "T_n [s]",
                  {Series{"T_n", csv.numeric("n"), csv.numeric("T_n")}});
        plotted = true;
    }
    if (!plotted) {
        throw IoError("report: no known CSV files (train_log/sweep/privacy/latency_steps) in " +
                      dir.string());
    }
    std::printf("report: SVG plots written to %s\n", dir.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multsl: deterministic multimodal split-learning simulator"};
    app.require_subcommand(1);

    std::string config_path, variant_text, pool_text, split_text, out_dir = "out";
    std::string pools_text = "1x1,2x2,4x4,8x8";
    std::uint64_t seed_flag = 0;
    bool seed_set = false, deterministic = false, capture = false;

    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--variant", variant_text, "rf|img|imgrf");
    app.add_option("--pool", pool_text, "pooling window HxW, e.g. 4x4");
    app.add_option("--seed", seed_flag, "seed for scenario and training")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--split", split_text, "paper|disjoint");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--deterministic", deterministic,
                 "strict single-threaded mode (the default engine is already deterministic)");

    CLI::App* c_generate = app.add_subcommand("generate", "write a synthetic dataset");
    CLI::App* c_train = app.add_subcommand("train", "train one variant, emit logs + checkpoint");
    c_train->add_flag("--capture", capture, "dump every FP/BP message to files");
    CLI::App* c_sweep = app.add_subcommand("sweep-pool", "train across pooling dimensions");
    c_sweep->add_option("--pools", pools_text, "comma list of HxW pool dims");
    CLI::App* c_report = app.add_subcommand("report", "render SVG plots from CSVs in --out");
    CLI::App* c_latency = app.add_subcommand("latency-report", "emit the latency timeline CSVs");
    CLI::App* c_privacy = app.add_subcommand("privacy-report", "leakage across pooling dimensions");
    c_privacy->add_option("--pools", pools_text, "comma list of HxW pool dims");

    // Let the shared flags (--seed, --out, ...) appear after the subcommand.
    for (CLI::App* sub : {c_generate, c_train, c_sweep, c_report, c_latency, c_privacy}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        Experiment exp;
        if (!config_path.empty()) load_config_file(exp, config_path);
        if (!variant_text.empty()) exp.model.variant = variant_from_name(variant_text);
        if (!pool_text.empty()) parse_pool(pool_text, exp.model.w_H, exp.model.w_W);
        if (!split_text.empty()) exp.split_mode = split_from_name(split_text);
        if (seed_set) {
            exp.scenario.seed = seed_flag;
            exp.train.seed = seed_flag;
        }
        exp.deterministic = deterministic;
        exp.finalize();

        if (c_generate->parsed()) cmd_generate(exp, out_dir);
        else if (c_train->parsed()) cmd_train(exp, out_dir, capture);
        else if (c_sweep->parsed()) cmd_sweep_pool(exp, out_dir, pools_text);
        else if (c_latency->parsed()) cmd_latency_report(exp, out_dir);
        else if (c_privacy->parsed()) cmd_privacy_report(exp, out_dir, pools_text);
        else if (c_report->parsed()) cmd_report(out_dir);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ProtocolError& e) {
        std::fprintf(stderr, "protocol error: %s\n", e.what());
        return kExitProtocol;
    } catch (const DecodeError& e) {
        std::fprintf(stderr, "protocol error: %s\n", e.what());
        return kExitProtocol;
    } catch (const IoError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const TraceError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const MetricError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInternal;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitInternal;
    }
}
