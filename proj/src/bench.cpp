#include "ambc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ambc/classical.hpp"
#include "ambc/errors.hpp"
#include "ambc/keyvalue.hpp"
#include "ambc/parallel.hpp"

namespace ambc {

std::string_view to_string(Axis a) {
    switch (a) {
        case Axis::snr_db: return "snr_db";
        case Axis::zeta_db: return "zeta_db";
        case Axis::antennas: return "antennas";
    }
    return "?";
}

Axis parse_axis(std::string_view s) {
    if (s == "snr_db" || s == "snr") return Axis::snr_db;
    if (s == "zeta_db" || s == "zeta") return Axis::zeta_db;
    if (s == "antennas" || s == "m") return Axis::antennas;
    throw ConfigError("unknown sweep axis '" + std::string(s) + "' (expected snr_db, zeta_db or antennas)");
}

std::string_view to_string(DetectorId d) {
    switch (d) {
        case DetectorId::lrt: return "lrt";
        case DetectorId::ed: return "ed";
        case DetectorId::cmnet: return "cmnet";
        case DetectorId::cmnet_pretrained: return "cmnet-pre";
    }
    return "?";
}

DetectorId parse_detector(std::string_view s) {
    if (s == "lrt") return DetectorId::lrt;
    if (s == "ed") return DetectorId::ed;
    if (s == "cmnet") return DetectorId::cmnet;
    if (s == "cmnet-pre") return DetectorId::cmnet_pretrained;
    throw ConfigError("unknown detector '" + std::string(s) + "' (expected lrt, ed, cmnet or cmnet-pre)");
}

std::vector<DetectorId> parse_detector_list(std::string_view s) {
    std::vector<DetectorId> out;
    for (const auto& name : split_list(std::string(s))) {
        const DetectorId d = parse_detector(name);
        if (std::find(out.begin(), out.end(), d) != out.end())
            throw ConfigError("detector '" + name + "' listed twice");
        out.push_back(d);
    }
    if (out.empty()) throw ConfigError("detector list is empty");
    return out;
}

double BerPoint::std_error() const {
    if (trials == 0) return 0.0;
    const double p = static_cast<double>(errors) / static_cast<double>(trials);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

namespace {

bool uses_network(DetectorId d) { return d == DetectorId::cmnet || d == DetectorId::cmnet_pretrained; }

TrainConfig train_config(const TrainBudget& b, int epochs, bool freeze, std::uint64_t seed) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = b.batch_size;
    c.learning_rate = b.learning_rate;
    c.freeze_conv = freeze;
    c.seed = seed;
    c.optimizer = b.optimizer;
    return c;
}

}  // namespace

PointResult run_point(const SystemParams& params, const PointConfig& config) {
    params.validate();
    if (config.detectors.empty()) throw ConfigError("run_point: no detectors selected");
    if (config.trials < 1) throw ConfigError("run_point: trials must be >= 1");
    const std::uint64_t seed = params.seed;
    const TrainBudget& budget = config.budget;

    PointResult result;
    const bool need_network = std::any_of(config.detectors.begin(), config.detectors.end(), uses_network);
    std::vector<double> seconds(config.detectors.size(), 0.0);
    if (need_network) {
        const auto t0 = std::chrono::steady_clock::now();
        if (config.pretrained) {
            if (config.pretrained->params.arch.input_dim != params.antennas)
                throw ConfigError("run_point: pretrained model was built for a different antenna count");
            if (config.pretrained->stage != Stage::pretrained)
                throw ConfigError("run_point: supplied offline model is not at the pretrained stage");
            result.pretrained = config.pretrained;
        } else {
            CmnetArch arch = CmnetArch::for_antennas(params.antennas);
            arch.dropout_as_keep = budget.dropout_as_keep;
            const Dataset d_s = build_source_dataset(params, budget.k_s, derive_seed(seed, {stream_tag::source_dataset}),
                                                     budget.normalize, config.workers);
            RandomStream init_rng = derive_stream(seed, {stream_tag::init});
            const CmnetParams initial = init_params(arch, init_rng);
            LearnResult lr =
                offline_learn(initial, d_s, train_config(budget, budget.i_s, false, derive_seed(seed, {stream_tag::train, 0})));
            result.offline_loss = lr.final_epoch_loss;
            result.pretrained = std::move(lr.model);
        }
        const double offline = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (std::size_t d = 0; d < config.detectors.size(); ++d)
            if (uses_network(config.detectors[d])) seconds[d] += offline;
    }

    const std::size_t per_frame = static_cast<std::size_t>(params.data_symbols());
    const std::size_t frames = (config.trials + per_frame - 1) / per_frame;
    result.frames.resize(frames);
    std::vector<std::vector<double>> frame_seconds(frames, std::vector<double>(config.detectors.size(), 0.0));

    parallel_for(frames, config.workers, [&](std::size_t f) {
        try {
            RandomStream rng = derive_stream(seed, {stream_tag::frame, f});
            const SimulatedFrame frame = simulate_frame(params, rng);
            const auto data = frame.data_symbols(params.pilots);
            FrameErrors& out = result.frames[f];
            out.symbols = data.size();
            out.errors.assign(config.detectors.size(), 0);

            for (std::size_t d = 0; d < config.detectors.size(); ++d) {
                const auto t0 = std::chrono::steady_clock::now();
                std::uint64_t errors = 0;
                switch (config.detectors[d]) {
                    case DetectorId::lrt: {
                        const LrtContext ctx = lrt_context(frame.channel);
                        for (const auto& s : data) errors += lrt_decide(lrt_statistic(s.x, ctx)) != s.label;
                        break;
                    }
                    case DetectorId::ed: {
                        const EdContext ctx = ed_context(frame.channel, params.samples_per_symbol);
                        for (const auto& s : data) errors += ed_decide(s.x, ctx) != s.label;
                        break;
                    }
                    case DetectorId::cmnet: {
                        RandomStream aug = derive_stream(seed, {stream_tag::target_dataset, f});
                        const Dataset d_t = build_target_dataset(frame.pilot_symbols(params.pilots), budget.k_t, aug,
                                                                 {budget.normalize, true});
                        const LearnResult tl = transfer_learn(
                            *result.pretrained, d_t,
                            train_config(budget, budget.i_t, true, derive_seed(seed, {stream_tag::train, 1, f})));
                        for (const auto& s : data) errors += detect_symbol(tl.model, s.x) != s.label;
                        break;
                    }
                    case DetectorId::cmnet_pretrained:
                        for (const auto& s : data) errors += detect_symbol(*result.pretrained, s.x) != s.label;
                        break;
                }
                out.errors[d] = errors;
                frame_seconds[f][d] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
        } catch (const std::exception& e) {
            throw NumericalError("run_point: frame " + std::to_string(f) + " at snr_db=" +
                                 std::to_string(params.snr_db) + " zeta_db=" + std::to_string(params.zeta_db) +
                                 " m=" + std::to_string(params.antennas) + " failed: " + e.what());
        }
    });

    for (std::size_t d = 0; d < config.detectors.size(); ++d) {
        BerPoint p;
        p.detector = config.detectors[d];
        p.axis = config.axis;
        p.axis_value = config.axis_value;
        p.seed = seed;
        for (std::size_t f = 0; f < frames; ++f) {
            p.errors += result.frames[f].errors[d];
            p.trials += result.frames[f].symbols;
            seconds[d] += frame_seconds[f][d];
        }
        p.ber = static_cast<double>(p.errors) / static_cast<double>(p.trials);
        p.seconds = seconds[d];
        result.points.push_back(p);
    }
    return result;
}

void SweepSpec::validate() const {
    fixed.validate();
    if (values.empty()) throw ConfigError("sweep: values must be nonempty");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1])) throw ConfigError("sweep: values must be strictly increasing");
    if (detectors.empty()) throw ConfigError("sweep: no detectors selected");
    if (trials < 1000) throw ConfigError("sweep: trials must be >= 1000");
    if (workers < 1) throw ConfigError("sweep: workers must be >= 1");
    for (double v : values) params_at(v).validate();
}

SystemParams SweepSpec::params_at(double value) const {
    SystemParams p = fixed;
    switch (axis) {
        case Axis::snr_db: p.snr_db = value; break;
        case Axis::zeta_db: p.zeta_db = value; break;
        case Axis::antennas:
            if (value != std::floor(value) || value < 1) throw ConfigError("sweep: antenna counts must be positive integers");
            p.antennas = static_cast<int>(value);
            break;
    }
    return p;
}

SweepSpec SweepSpec::from_keyvalue(const KeyValueFile& kv) {
    const std::vector<std::string> own{"axis",  "values",     "detectors",     "trials",    "workers",
                                       "k_s",   "k_t",        "i_s",           "i_t",       "batch_size",
                                       "learning_rate", "optimizer", "normalize", "dropout_as_keep"};
    SweepSpec s;
    s.fixed = SystemParams::from_keyvalue(kv, own);
    s.axis = parse_axis(kv.get_string("axis"));
    s.values = kv.get_double_list("values");
    if (kv.has("detectors")) s.detectors = parse_detector_list(kv.get_string("detectors"));
    if (kv.has("trials")) s.trials = kv.get_u64("trials");
    if (kv.has("workers")) s.workers = kv.get_u64("workers");
    TrainBudget& b = s.budget;
    if (kv.has("k_s")) b.k_s = kv.get_u64("k_s");
    if (kv.has("k_t")) b.k_t = kv.get_u64("k_t");
    if (kv.has("i_s")) b.i_s = static_cast<int>(kv.get_int("i_s"));
    if (kv.has("i_t")) b.i_t = static_cast<int>(kv.get_int("i_t"));
    if (kv.has("batch_size")) b.batch_size = static_cast<int>(kv.get_int("batch_size"));
    if (kv.has("learning_rate")) b.learning_rate = kv.get_double("learning_rate");
    if (kv.has("optimizer")) b.optimizer = parse_optimizer(kv.get_string("optimizer"));
    if (kv.has("normalize")) b.normalize = kv.get_bool("normalize");
    if (kv.has("dropout_as_keep")) b.dropout_as_keep = kv.get_bool("dropout_as_keep");
    s.validate();
    return s;
}

SweepSpec SweepSpec::load(const std::filesystem::path& path) { return from_keyvalue(KeyValueFile::load(path)); }

std::vector<BerPoint> run_sweep(const SweepSpec& spec) {
    spec.validate();
    std::vector<BerPoint> out;
    for (double v : spec.values) {
        PointConfig pc;
        pc.detectors = spec.detectors;
        pc.budget = spec.budget;
        pc.trials = spec.trials;
        pc.workers = spec.workers;
        pc.axis = spec.axis;
        pc.axis_value = v;
        auto r = run_point(spec.params_at(v), pc);
        out.insert(out.end(), r.points.begin(), r.points.end());
    }
    return out;
}

namespace {

std::string g10(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string format_csv(std::span<const BerPoint> points) {
    std::vector<BerPoint> sorted(points.begin(), points.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const BerPoint& a, const BerPoint& b) {
        if (a.detector != b.detector) return a.detector < b.detector;
        return a.axis_value < b.axis_value;
    });
    std::string out = "detector,axis,axis_value,ber,errors,trials,stderr,seed\n";
    for (const auto& p : sorted) {
        out += std::string(to_string(p.detector)) + ',' + std::string(to_string(p.axis)) + ',' + g10(p.axis_value) +
               ',' + g10(p.ber) + ',' + std::to_string(p.errors) + ',' + std::to_string(p.trials) + ',' +
               g10(p.std_error()) + ',' + std::to_string(p.seed) + '\n';
    }
    return out;
}

void emit_csv(std::span<const BerPoint> points, const std::filesystem::path& path) {
    const std::string text = format_csv(points);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_csv: cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("emit_csv: write failed for " + path.string());
}

std::vector<BerPoint> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "detector,axis,axis_value,ber,errors,trials,stderr,seed")
        throw FormatError("parse_csv: unexpected header");
    std::vector<BerPoint> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 8) throw FormatError("parse_csv: expected 8 fields in '" + line + "'");
        try {
            BerPoint p;
            p.detector = parse_detector(f[0]);
            p.axis = parse_axis(f[1]);
            p.axis_value = parse_double(f[2], "axis_value");
            p.ber = parse_double(f[3], "ber");
            p.errors = parse_u64(f[4], "errors");
            p.trials = parse_u64(f[5], "trials");
            p.seed = parse_u64(f[7], "seed");
            // The printed ber is rounded; errors/trials restores it exactly.
            if (p.trials > 0) {
                const double exact = static_cast<double>(p.errors) / static_cast<double>(p.trials);
                if (g10(exact) != f[3]) throw FormatError("parse_csv: ber disagrees with errors/trials in '" + line + "'");
                p.ber = exact;
            }
            out.push_back(p);
        } catch (const ConfigError& e) {
            throw FormatError(std::string("parse_csv: ") + e.what());
        }
    }
    return out;
}

}  // namespace ambc
