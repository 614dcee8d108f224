#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ambc/cmnet.hpp"
#include "ambc/dtl.hpp"
#include "ambc/sysmodel.hpp"

namespace ambc {

class KeyValueFile;

enum class Axis { snr_db, zeta_db, antennas };

/// `cmnet_pretrained` detects with the offline model only (no transfer); it
/// exists for ablations.
enum class DetectorId { lrt, ed, cmnet, cmnet_pretrained };

std::string_view to_string(Axis a);
Axis parse_axis(std::string_view s);
std::string_view to_string(DetectorId d);
DetectorId parse_detector(std::string_view s);
/// Comma-separated list; throws ConfigError when empty or duplicated.
std::vector<DetectorId> parse_detector_list(std::string_view s);

/// Training budget of the CMNet detector at one operating point.
struct TrainBudget {
    std::size_t k_s = 20000;
    std::size_t k_t = 2000;
    int i_s = 30;
    int i_t = 60;
    int batch_size = 128;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    bool normalize = true;
    bool dropout_as_keep = false;
};

struct BerPoint {
    DetectorId detector = DetectorId::lrt;
    Axis axis = Axis::snr_db;
    double axis_value = 0;
    double ber = 0;
    std::uint64_t errors = 0;
    std::uint64_t trials = 0;
    double seconds = 0;
    std::uint64_t seed = 0;

    /// Binomial standard error sqrt(p (1 - p) / trials) with p = errors / trials.
    double std_error() const;
};

struct PointConfig {
    std::vector<DetectorId> detectors;
    TrainBudget budget;
    /// Minimum number of decided data symbols.
    std::size_t trials = 10000;
    std::size_t workers = 1;
    Axis axis = Axis::snr_db;
    double axis_value = 0;
    /// Reuse an offline model instead of training one.
    std::optional<DetectorModel> pretrained;
};

/// Per-frame error counts, indexed like PointConfig::detectors.
struct FrameErrors {
    std::vector<std::uint64_t> errors;
    std::uint64_t symbols = 0;
};

struct PointResult {
    std::vector<BerPoint> points;
    std::vector<FrameErrors> frames;
    std::optional<DetectorModel> pretrained;
    double offline_loss = 0;
};

/// Trains the offline model (if needed) from the point's seed, then simulates
/// ceil(trials / (T - P)) frames. Every frame uses its own sub-stream, so error
/// counts are identical for any worker count.
PointResult run_point(const SystemParams& params, const PointConfig& config);

struct SweepSpec {
    Axis axis = Axis::snr_db;
    std::vector<double> values;
    SystemParams fixed;
    std::vector<DetectorId> detectors{DetectorId::lrt, DetectorId::ed, DetectorId::cmnet};
    std::size_t trials = 10000;
    TrainBudget budget;
    std::size_t workers = 1;

    void validate() const;
    SystemParams params_at(double value) const;

    static SweepSpec from_keyvalue(const KeyValueFile& kv);
    static SweepSpec load(const std::filesystem::path& path);
};

std::vector<BerPoint> run_sweep(const SweepSpec& spec);

/// Sorted by detector, then axis value. Fixed header, 10 significant digits.
std::string format_csv(std::span<const BerPoint> points);
void emit_csv(std::span<const BerPoint> points, const std::filesystem::path& path);
/// Inverse of format_csv. ber is recomputed as errors/trials, so every field round-trips exactly.
std::vector<BerPoint> parse_csv(const std::string& text);

}  // namespace ambc
