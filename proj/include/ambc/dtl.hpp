#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "ambc/cmnet.hpp"
#include "ambc/features.hpp"

namespace ambc {

enum class Stage { pretrained, transferred };

std::string_view to_string(Stage s);

struct DetectorModel {
    CmnetParams params;
    Stage stage = Stage::pretrained;
    bool normalize = true;
};

struct LearnResult {
    DetectorModel model;
    double final_epoch_loss = 0;
};

/// Offline stage: trains every layer on the source dataset.
LearnResult offline_learn(const CmnetParams& initial, const Dataset& d_s, TrainConfig config);

/// Transfer stage: fine-tunes the dense layers on the pilot dataset with the
/// convolution layers frozen at their pretrained values.
LearnResult transfer_learn(const DetectorModel& pretrained, const Dataset& d_t, TrainConfig config);

/// Posterior ratio p1/p0 of the eval-mode network. With equal priors this is
/// the likelihood ratio of the two hypotheses.
double cmnet_lrt(const DetectorModel& model, const Scm& r);

/// 1 iff cmnet_lrt(scm(x)) > 1.
int detect_symbol(const DetectorModel& model, const CMatrix& x);

void save_model(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_model(const std::filesystem::path& path);

struct DecisionRecord {
    std::uint64_t frame_id;
    int symbol_index;
    int decision;
    int truth;
};

/// Header `frame_id,symbol_index,decision,truth`.
void write_decisions_csv(std::span<const DecisionRecord> records, const std::filesystem::path& path);

}  // namespace ambc
