#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ambc/rng.hpp"
#include "ambc/types.hpp"

namespace ambc {

class KeyValueFile;

/// Scenario constants for one operating point.
struct SystemParams {
    int antennas = 16;           ///< M
    int samples_per_symbol = 50; ///< N, the source-to-tag ratio
    int pilots = 10;             ///< P
    int symbols_per_frame = 100; ///< T (pilots included)
    double snr_db = 10.0;        ///< direct-link SNR
    double zeta_db = -20.0;      ///< backscatter/direct average gain ratio; -inf disables the backscatter path
    double noise_power = 1.0;    ///< per-antenna noise variance, linear
    std::uint64_t seed = 1;

    int data_symbols() const { return symbols_per_frame - pilots; }

    /// Throws ConfigError when an invariant is violated.
    void validate() const;

    /// Reads keys m, n_str, p_pilots, t_symbols, snr_db, zeta_db, noise_power,
    /// seed. Missing keys keep their defaults; unknown keys are rejected
    /// unless listed in `extra_keys`.
    static SystemParams from_keyvalue(const KeyValueFile& kv, const std::vector<std::string>& extra_keys = {});
    static SystemParams load(const std::filesystem::path& path);

    std::string to_keyvalue() const;

    bool operator==(const SystemParams&) const = default;
};

/// One frame's channel: direct link h, combined link w = h + b, and the
/// hypothesis covariances.
struct ChannelRealization {
    CVector h;
    CVector w;
    double sigma_s2 = 0.0;
    double noise_power = 0.0;
    CMatrix sigma_0;
    CMatrix sigma_1;

    int antennas() const { return static_cast<int>(h.size()); }

    /// Builds sigma_0/sigma_1 from the vectors.
    static ChannelRealization from_vectors(CVector h, CVector w, double sigma_s2, double noise_power);
};

/// Observation matrix of one tag symbol: M rows, N columns.
struct TagSymbolSample {
    CMatrix x;
    int label = 0;
};

/// Source power giving the configured direct-link SNR under unit-variance
/// Rayleigh entries: E||h s||^2 / E||u||^2 = sigma_s2 M / (sigma_u2 M).
double derive_signal_power(const SystemParams& params);

/// 10^(db/10); -inf maps to 0.
double db_to_linear(double db);

/// h ~ CN(0, I); lumped backscatter b ~ CN(0, zeta I); w = h + b.
ChannelRealization sample_channel(const SystemParams& params, RandomStream& rng);

TagSymbolSample generate_tag_symbol(const ChannelRealization& chan, int label, const SystemParams& params,
                                    RandomStream& rng);

/// Known pilot bits: 1, 0, 1, 0, ...
std::vector<int> pilot_pattern(int pilots);

/// P pilots followed by data_bits; the channel is fixed over the frame.
std::vector<TagSymbolSample> generate_frame(const ChannelRealization& chan, const SystemParams& params,
                                            std::span<const int> data_bits, RandomStream& rng);

/// A complete simulated frame: its channel, data bits and all T samples.
struct SimulatedFrame {
    ChannelRealization channel;
    std::vector<int> data_bits;
    std::vector<TagSymbolSample> symbols;

    std::span<const TagSymbolSample> pilot_symbols(int pilots) const { return {symbols.data(), std::size_t(pilots)}; }
    std::span<const TagSymbolSample> data_symbols(int pilots) const {
        return std::span<const TagSymbolSample>(symbols).subspan(std::size_t(pilots));
    }
};

/// Draws channel, equiprobable data bits and samples from one stream.
SimulatedFrame simulate_frame(const SystemParams& params, RandomStream& rng);

}  // namespace ambc
