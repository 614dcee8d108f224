// Command-line front end: dataset generation, offline training, per-frame
// transfer and detection, and BER sweeps.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ambc/bench.hpp"
#include "ambc/dtl.hpp"
#include "ambc/errors.hpp"
#include "ambc/features.hpp"
#include "ambc/keyvalue.hpp"
#include "ambc/sysmodel.hpp"

namespace {

using namespace ambc;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    bool no_normalize = false;
};

SystemParams load_system(const std::string& path, const Globals& g) {
    SystemParams p = SystemParams::load(path);
    if (g.seed) p.seed = *g.seed;
    p.validate();
    return p;
}

TrainConfig make_train_config(int epochs, int batch_size, double lr, bool freeze, std::uint64_t seed) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = lr;
    c.freeze_conv = freeze;
    c.seed = seed;
    return c;
}

/// The frame seen by `transfer` and `detect` for a given frame seed.
SimulatedFrame frame_for(const SystemParams& p, std::uint64_t frame_seed) {
    RandomStream rng = derive_stream(frame_seed, {stream_tag::frame});
    return simulate_frame(p, rng);
}

void check_model_fits(const DetectorModel& m, const SystemParams& p, const Globals& g) {
    if (m.params.arch.input_dim != p.antennas)
        throw ConfigError("model expects M=" + std::to_string(m.params.arch.input_dim) + " but the config has M=" +
                          std::to_string(p.antennas));
    if (g.no_normalize && m.normalize)
        throw ConfigError("--no-normalize conflicts with a model trained on normalized SCMs");
}

struct GenDataset {
    std::string config, out;
    std::size_t k = 0;

    void run(const Globals& g) const {
        const SystemParams p = load_system(config, g);
        if (k < 1) throw ConfigError("--k must be >= 1");
        Dataset d = build_source_dataset(p, k, derive_seed(p.seed, {stream_tag::source_dataset}), !g.no_normalize,
                                         g.workers);
        save_dataset(d, out);
        std::printf("wrote %zu examples (%zu with c=1) to %s\n", d.size(), d.count_label(1), out.c_str());
    }
};

struct TrainOffline {
    std::string config, dataset, out;
    int epochs = 30;
    int batch_size = 128;
    double lr = 1e-3;

    void run(const Globals& g) const {
        const SystemParams p = load_system(config, g);
        const Dataset d = load_dataset(dataset);
        if (d.dim() != p.antennas)
            throw ConfigError("dataset holds " + std::to_string(d.dim()) + "x" + std::to_string(d.dim()) +
                              " SCMs but the config has M=" + std::to_string(p.antennas));
        if (g.no_normalize && d.normalized) throw ConfigError("--no-normalize conflicts with a normalized dataset");
        RandomStream init = derive_stream(p.seed, {stream_tag::init});
        const CmnetParams initial = init_params(CmnetArch::for_antennas(p.antennas), init);
        const LearnResult r = offline_learn(
            initial, d, make_train_config(epochs, batch_size, lr, false, derive_seed(p.seed, {stream_tag::train, 0})));
        save_model(r.model, out);
        std::printf("final epoch loss %.6f, model written to %s\n", r.final_epoch_loss, out.c_str());
    }
};

struct Transfer {
    std::string config, model, out;
    std::uint64_t frame_seed = 0;
    int epochs = 60;
    std::size_t k_t = 2000;
    int batch_size = 128;
    double lr = 1e-3;

    void run(const Globals& g) const {
        const SystemParams p = load_system(config, g);
        const DetectorModel pre = load_model(model);
        check_model_fits(pre, p, g);
        const SimulatedFrame frame = frame_for(p, frame_seed);
        RandomStream aug = derive_stream(frame_seed, {stream_tag::target_dataset});
        const Dataset d_t = build_target_dataset(frame.pilot_symbols(p.pilots), k_t, aug, {pre.normalize, true});
        const LearnResult r = transfer_learn(
            pre, d_t, make_train_config(epochs, batch_size, lr, true, derive_seed(frame_seed, {stream_tag::train, 1})));
        save_model(r.model, out);
        std::printf("final epoch loss %.6f, model written to %s\n", r.final_epoch_loss, out.c_str());
    }
};

struct Detect {
    std::string config, model, out;
    std::uint64_t frame_seed = 0;

    void run(const Globals& g) const {
        const SystemParams p = load_system(config, g);
        const DetectorModel m = load_model(model);
        check_model_fits(m, p, g);
        const SimulatedFrame frame = frame_for(p, frame_seed);
        const auto data = frame.data_symbols(p.pilots);
        std::vector<DecisionRecord> records;
        std::size_t errors = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const int decision = detect_symbol(m, data[i].x);
            errors += decision != data[i].label;
            records.push_back({frame_seed, static_cast<int>(i) + p.pilots, decision, data[i].label});
        }
        write_decisions_csv(records, out);
        std::printf("%zu/%zu data symbols in error (model stage %s)\n", errors, data.size(),
                    std::string(to_string(m.stage)).c_str());
    }
};

struct BerSweep {
    std::string spec, out, detectors;
    std::optional<std::size_t> trials;

    void run(const Globals& g, bool workers_given) const {
        SweepSpec s = SweepSpec::load(spec);
        if (g.seed) s.fixed.seed = *g.seed;
        if (workers_given) s.workers = g.workers;
        if (g.no_normalize) s.budget.normalize = false;
        if (!detectors.empty()) s.detectors = parse_detector_list(detectors);
        if (trials) s.trials = *trials;
        s.validate();

        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<BerPoint> points = run_sweep(s);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        emit_csv(points, out);
        write_meta(s, points, seconds);
        std::fputs(format_csv(points).c_str(), stdout);
    }

    /// Sidecar `<out>.meta.json`. Wall-clock figures live here so the CSV
    /// stays byte-identical across runs.
    void write_meta(const SweepSpec& s, const std::vector<BerPoint>& points, double seconds) const {
        nlohmann::json j;
        j["trials_unit"] = "decided data symbols; pilots excluded";
        j["trials_target"] = s.trials;
        j["frames_per_point"] = (s.trials + s.fixed.data_symbols() - 1) / s.fixed.data_symbols();
        j["seed"] = s.fixed.seed;
        j["axis"] = std::string(to_string(s.axis));
        j["values"] = s.values;
        j["system"] = {{"m", s.fixed.antennas},
                       {"n_str", s.fixed.samples_per_symbol},
                       {"p_pilots", s.fixed.pilots},
                       {"t_symbols", s.fixed.symbols_per_frame},
                       {"snr_db", s.fixed.snr_db},
                       {"zeta_db", std::isfinite(s.fixed.zeta_db) ? nlohmann::json(s.fixed.zeta_db) : "-inf"},
                       {"noise_power", s.fixed.noise_power}};
        const TrainBudget& b = s.budget;
        j["budget"] = {{"k_s", b.k_s},
                       {"k_t", b.k_t},
                       {"i_s", b.i_s},
                       {"i_t", b.i_t},
                       {"batch_size", b.batch_size},
                       {"learning_rate", b.learning_rate},
                       {"optimizer", std::string(to_string(b.optimizer))},
                       {"normalize", b.normalize},
                       {"dropout_as_keep", b.dropout_as_keep}};
        j["workers"] = s.workers;
        j["wallclock_seconds"] = seconds;
        nlohmann::json per = nlohmann::json::array();
        for (const auto& p : points)
            per.push_back({{"detector", std::string(to_string(p.detector))},
                           {"axis_value", p.axis_value},
                           {"seconds", p.seconds}});
        j["points"] = per;

        const std::string path = out + ".meta.json";
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot open " + path + " for writing");
        f << j.dump(2) << "\n";
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ambient backscatter detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config file)");
    auto* workers_opt = app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--no-normalize", g.no_normalize, "Disable SCM trace normalization");

    GenDataset gen;
    auto* c_gen = app.add_subcommand("gen-dataset", "Build and save the offline dataset");
    c_gen->add_option("--config", gen.config, "System parameter file")->required()->check(CLI::ExistingFile);
    c_gen->add_option("--k", gen.k, "Number of examples")->required();
    c_gen->add_option("--out", gen.out, "Output dataset path")->required();

    TrainOffline off;
    auto* c_off = app.add_subcommand("train-offline", "Train every layer on an offline dataset");
    c_off->add_option("--config", off.config)->required()->check(CLI::ExistingFile);
    c_off->add_option("--dataset", off.dataset)->required()->check(CLI::ExistingFile);
    c_off->add_option("--epochs", off.epochs)->required();
    c_off->add_option("--out", off.out)->required();
    c_off->add_option("--batch-size", off.batch_size)->capture_default_str();
    c_off->add_option("--lr", off.lr)->capture_default_str();

    Transfer tr;
    auto* c_tr = app.add_subcommand("transfer", "Fine-tune the dense layers on one frame's pilots");
    c_tr->add_option("--config", tr.config)->required()->check(CLI::ExistingFile);
    c_tr->add_option("--model", tr.model)->required()->check(CLI::ExistingFile);
    c_tr->add_option("--frame-seed", tr.frame_seed)->required();
    c_tr->add_option("--epochs", tr.epochs)->required();
    c_tr->add_option("--out", tr.out)->required();
    c_tr->add_option("--k-t", tr.k_t, "Augmented pilot examples")->capture_default_str();
    c_tr->add_option("--batch-size", tr.batch_size)->capture_default_str();
    c_tr->add_option("--lr", tr.lr)->capture_default_str();

    Detect det;
    auto* c_det = app.add_subcommand("detect", "Detect the data symbols of one frame");
    c_det->add_option("--config", det.config)->required()->check(CLI::ExistingFile);
    c_det->add_option("--model", det.model)->required()->check(CLI::ExistingFile);
    c_det->add_option("--frame-seed", det.frame_seed)->required();
    c_det->add_option("--out", det.out, "Decision CSV")->required();

    BerSweep sw;
    std::size_t trials = 0;
    auto* c_sw = app.add_subcommand("ber-sweep", "Run a BER sweep and write a CSV");
    c_sw->add_option("--spec", sw.spec, "Sweep file")->required()->check(CLI::ExistingFile);
    c_sw->add_option("--out", sw.out)->required();
    c_sw->add_option("--detectors", sw.detectors, "Comma-separated subset of lrt,ed,cmnet,cmnet-pre");
    auto* trials_opt = c_sw->add_option("--trials", trials, "Decided data symbols per point");
    auto* sub_seed = c_sw->add_option("--seed", seed, "Master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (*seed_opt || *sub_seed) g.seed = seed;
    if (*trials_opt) sw.trials = trials;

    try {
        if (*c_gen) gen.run(g);
        else if (*c_off) off.run(g);
        else if (*c_tr) tr.run(g);
        else if (*c_det) det.run(g);
        else if (*c_sw) sw.run(g, static_cast<bool>(*workers_opt));
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
