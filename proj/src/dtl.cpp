#include "ambc/dtl.hpp"

#include <fstream>

#include "ambc/errors.hpp"

namespace ambc {

std::string_view to_string(Stage s) { return s == Stage::pretrained ? "pretrained" : "transferred"; }

LearnResult offline_learn(const CmnetParams& initial, const Dataset& d_s, TrainConfig config) {
    if (config.freeze_conv) throw ConfigError("offline_learn: every layer trains offline, freeze_conv must be off");
    TrainResult r = train(initial, d_s, config);
    return {DetectorModel{std::move(r.params), Stage::pretrained, d_s.normalized}, r.final_epoch_loss};
}

LearnResult transfer_learn(const DetectorModel& pretrained, const Dataset& d_t, TrainConfig config) {
    if (pretrained.stage != Stage::pretrained) throw ConfigError("transfer_learn: model is already transferred");
    if (d_t.normalized != pretrained.normalize)
        throw ConfigError("transfer_learn: target dataset normalization differs from the pretrained model");
    if (d_t.count_label(0) == 0 || d_t.count_label(1) == 0)
        throw ConfigError("transfer_learn: target dataset holds a single class");
    config.freeze_conv = true;
    TrainResult r = train(pretrained.params, d_t, config);
    return {DetectorModel{std::move(r.params), Stage::transferred, pretrained.normalize}, r.final_epoch_loss};
}

double cmnet_lrt(const DetectorModel& model, const Scm& r) {
    const Scores s = forward(model.params, to_planes(r, model.normalize));
    return s.p1 / s.p0;
}

int detect_symbol(const DetectorModel& model, const CMatrix& x) { return cmnet_lrt(model, scm(x)) > 1.0 ? 1 : 0; }

void save_model(const DetectorModel& model, const std::filesystem::path& path) {
    save_params(model.params, path,
                {{"stage", std::string(to_string(model.stage))}, {"normalize", model.normalize ? "1" : "0"}});
}

DetectorModel load_model(const std::filesystem::path& path) {
    std::map<std::string, std::string> meta;
    DetectorModel m;
    m.params = load_params(path, &meta);
    const auto stage = meta.find("stage");
    if (stage == meta.end() || (stage->second != "pretrained" && stage->second != "transferred"))
        throw FormatError(path.string() + ": missing or invalid stage");
    m.stage = stage->second == "pretrained" ? Stage::pretrained : Stage::transferred;
    const auto norm = meta.find("normalize");
    m.normalize = norm == meta.end() || norm->second != "0";
    return m;
}

void write_decisions_csv(std::span<const DecisionRecord> records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "frame_id,symbol_index,decision,truth\n";
    for (const auto& r : records) out << r.frame_id << ',' << r.symbol_index << ',' << r.decision << ',' << r.truth << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace ambc
