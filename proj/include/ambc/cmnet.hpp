#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ambc/features.hpp"
#include "ambc/rng.hpp"
#include "ambc/types.hpp"

namespace ambc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Padding { valid, same };

std::string_view to_string(Padding p);
Padding parse_padding(std::string_view s);

/// Layer layout of the covariance-matrix network:
/// conv(3x3) -> ReLU -> conv(3x3) -> ReLU -> maxpool(2x2) -> flatten ->
/// dropout -> dense -> ReLU -> dropout -> dense(2) -> softmax.
struct CmnetArch {
    int input_dim = 16;
    int in_channels = 2;
    int conv1_filters = 64;
    int conv2_filters = 64;
    int kernel = 3;
    int pool = 2;
    int fc1_units = 128;
    int classes = 2;
    double dropout1 = 0.5;
    double dropout2 = 0.25;
    /// Read dropout1/dropout2 as keep probabilities instead of drop probabilities.
    bool dropout_as_keep = false;
    Padding padding = Padding::valid;

    int conv1_out() const;
    int conv2_out() const;
    int pooled_dim() const;
    int flatten_len() const;
    double drop_rate1() const { return dropout_as_keep ? 1.0 - dropout1 : dropout1; }
    double drop_rate2() const { return dropout_as_keep ? 1.0 - dropout2 : dropout2; }

    /// Throws ConfigError if the pipeline collapses (e.g. valid padding on M < 6).
    void validate() const;

    /// Default layout for an M x M input. Padding::valid unless it leaves no
    /// spatial extent, in which case same padding is used.
    static CmnetArch for_antennas(int m);

    bool operator==(const CmnetArch&) const = default;
};

/// Weight matrix (row-major, out x in) plus bias of one layer. Convolution
/// weights are flattened over (in_channel, ky, kx).
struct LayerParams {
    RowMatrix w;
    RVector b;
    bool operator==(const LayerParams& o) const { return w == o.w && b == o.b; }
};

struct CmnetParams {
    CmnetArch arch;
    LayerParams conv1, conv2, fc1, fc2;

    /// Zero tensors shaped for `arch`.
    static CmnetParams zeros(const CmnetArch& arch);

    bool conv_equal(const CmnetParams& o) const { return conv1 == o.conv1 && conv2 == o.conv2; }
    bool operator==(const CmnetParams& o) const {
        return arch == o.arch && conv_equal(o) && fc1 == o.fc1 && fc2 == o.fc2;
    }
    bool all_finite() const;
};

/// Flat view of one parameter tensor, used by the optimizer, the model file
/// and gradient checks. `shape` is the logical shape in row-major order.
struct TensorRef {
    std::string name;
    std::vector<int> shape;
    double* data;
    std::size_t size;
    bool conv;
};

std::vector<TensorRef> tensors(CmnetParams& p);

/// He-normal weights (variance 2/fan_in), zero biases.
CmnetParams init_params(const CmnetArch& arch, RandomStream& rng);

enum class Mode { train, eval };

struct Scores {
    double p1;
    double p0;
};

struct Logits {
    double z1;
    double z0;
};

/// Class scores of one input. Eval mode is deterministic and ignores `rng`;
/// train mode applies inverted dropout.
Scores forward(const CmnetParams& params, const ScmPlanes& input, Mode mode, RandomStream& rng);
Scores forward(const CmnetParams& params, const ScmPlanes& input);
Logits forward_logits(const CmnetParams& params, const ScmPlanes& input);

/// Output of the frozen part (conv1 .. flatten), length arch.flatten_len().
RVector conv_features(const CmnetParams& params, const ScmPlanes& input);

/// Mean cross-entropy -1/K sum [z ln p1 + (1 - z) ln p0], log argument clamped at 1e-12.
double loss(std::span<const Scores> scores, std::span<const int> labels);

struct Gradients {
    CmnetParams grad;
    double loss = 0;
};

/// Gradient of the mean batch loss. In train mode one set of dropout masks is
/// drawn from `rng` and shared by the forward and backward passes; eval mode
/// disables dropout.
Gradients backward(const CmnetParams& params, std::span<const ScmExample> batch, Mode mode, RandomStream& rng);

enum class Optimizer { adam, sgd };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 128;
    double learning_rate = 1e-3;
    bool freeze_conv = false;
    std::uint64_t seed = 1;
    Optimizer optimizer = Optimizer::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

struct TrainResult {
    CmnetParams params;
    /// Mean train-mode batch loss over the last epoch.
    double final_epoch_loss = 0;
    std::vector<double> epoch_losses;
};

/// Mini-batch training with a per-epoch shuffle drawn from config.seed. With
/// freeze_conv, conv1/conv2 are left untouched and only the dense layers move.
TrainResult train(CmnetParams params, const Dataset& data, const TrainConfig& config);

/// Versioned text model file; tensors are written with 17 significant digits.
/// `meta` entries are stored as extra header lines and returned by the loaders.
void save_params(const CmnetParams& params, const std::filesystem::path& path,
                 const std::map<std::string, std::string>& meta = {});
CmnetParams load_params(const std::filesystem::path& path, std::map<std::string, std::string>* meta = nullptr);
/// Same, and throws FormatError if the stored layout differs from `expected`.
CmnetParams load_params(const std::filesystem::path& path, const CmnetArch& expected);

std::string serialize_params(const CmnetParams& params, const std::map<std::string, std::string>& meta = {});
CmnetParams deserialize_params(const std::string& text, std::map<std::string, std::string>* meta = nullptr);

}  // namespace ambc
