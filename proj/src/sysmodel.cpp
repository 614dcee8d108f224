#include "ambc/sysmodel.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "ambc/errors.hpp"
#include "ambc/keyvalue.hpp"

namespace ambc {

void SystemParams::validate() const {
    if (antennas < 1) throw ConfigError("m must be >= 1");
    if (samples_per_symbol < 1) throw ConfigError("n_str must be >= 1");
    if (pilots < 2) throw ConfigError("p_pilots must be >= 2 so both labels appear among the pilots");
    if (symbols_per_frame <= pilots) throw ConfigError("t_symbols must exceed p_pilots");
    if (!(noise_power > 0) || !std::isfinite(noise_power)) throw ConfigError("noise_power must be positive");
    if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
    if (std::isnan(zeta_db) || zeta_db == std::numeric_limits<double>::infinity())
        throw ConfigError("zeta_db must be finite or -inf");
}

SystemParams SystemParams::from_keyvalue(const KeyValueFile& kv, const std::vector<std::string>& extra_keys) {
    std::set<std::string> allowed{"m", "n_str", "p_pilots", "t_symbols", "snr_db", "zeta_db", "noise_power", "seed"};
    allowed.insert(extra_keys.begin(), extra_keys.end());
    kv.reject_unknown(allowed);

    SystemParams p;
    if (kv.has("m")) p.antennas = static_cast<int>(kv.get_int("m"));
    if (kv.has("n_str")) p.samples_per_symbol = static_cast<int>(kv.get_int("n_str"));
    if (kv.has("p_pilots")) p.pilots = static_cast<int>(kv.get_int("p_pilots"));
    if (kv.has("t_symbols")) p.symbols_per_frame = static_cast<int>(kv.get_int("t_symbols"));
    if (kv.has("snr_db")) p.snr_db = kv.get_double("snr_db");
    if (kv.has("zeta_db")) p.zeta_db = kv.get_double("zeta_db");
    if (kv.has("noise_power")) p.noise_power = kv.get_double("noise_power");
    if (kv.has("seed")) p.seed = kv.get_u64("seed");
    p.validate();
    return p;
}

SystemParams SystemParams::load(const std::filesystem::path& path) { return from_keyvalue(KeyValueFile::load(path)); }

std::string SystemParams::to_keyvalue() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "m = " << antennas << "\n"
        << "n_str = " << samples_per_symbol << "\n"
        << "p_pilots = " << pilots << "\n"
        << "t_symbols = " << symbols_per_frame << "\n"
        << "snr_db = " << snr_db << "\n"
        << "zeta_db = " << zeta_db << "\n"
        << "noise_power = " << noise_power << "\n"
        << "seed = " << seed << "\n";
    return out.str();
}

namespace {

/// sigma_s2 v v^H + noise I, Hermitian to the bit (fused multiply-adds would
/// otherwise make the two triangles differ in the last place).
CMatrix hypothesis_covariance(const CVector& v, double sigma_s2, double noise_power) {
    const auto m = v.size();
    CMatrix s(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        s(j, j) = sigma_s2 * std::norm(v(j)) + noise_power;
        for (Eigen::Index i = j + 1; i < m; ++i) {
            s(i, j) = sigma_s2 * (v(i) * std::conj(v(j)));
            s(j, i) = std::conj(s(i, j));
        }
    }
    return s;
}

}  // namespace

ChannelRealization ChannelRealization::from_vectors(CVector h, CVector w, double sigma_s2, double noise_power) {
    ChannelRealization c;
    c.sigma_s2 = sigma_s2;
    c.noise_power = noise_power;
    c.sigma_0 = hypothesis_covariance(h, sigma_s2, noise_power);
    c.sigma_1 = hypothesis_covariance(w, sigma_s2, noise_power);
    c.h = std::move(h);
    c.w = std::move(w);
    return c;
}

double db_to_linear(double db) {
    if (db == -std::numeric_limits<double>::infinity()) return 0.0;
    return std::pow(10.0, db / 10.0);
}

double derive_signal_power(const SystemParams& params) { return db_to_linear(params.snr_db) * params.noise_power; }

ChannelRealization sample_channel(const SystemParams& params, RandomStream& rng) {
    const int m = params.antennas;
    const double zeta = db_to_linear(params.zeta_db);
    CVector h(m), b(m);
    for (int i = 0; i < m; ++i) h(i) = rng.complex_normal(1.0);
    for (int i = 0; i < m; ++i) b(i) = rng.complex_normal(zeta);
    CVector w = h + b;
    return ChannelRealization::from_vectors(std::move(h), std::move(w), derive_signal_power(params),
                                            params.noise_power);
}

TagSymbolSample generate_tag_symbol(const ChannelRealization& chan, int label, const SystemParams& params,
                                    RandomStream& rng) {
    const int m = chan.antennas();
    const int n = params.samples_per_symbol;
    const CVector& v = label ? chan.w : chan.h;
    TagSymbolSample out;
    out.label = label;
    out.x.resize(m, n);
    for (int col = 0; col < n; ++col) {
        const cdouble s = rng.complex_normal(chan.sigma_s2);
        for (int row = 0; row < m; ++row) out.x(row, col) = v(row) * s + rng.complex_normal(chan.noise_power);
    }
    return out;
}

std::vector<int> pilot_pattern(int pilots) {
    std::vector<int> bits(pilots);
    for (int i = 0; i < pilots; ++i) bits[i] = (i % 2 == 0) ? 1 : 0;
    return bits;
}

std::vector<TagSymbolSample> generate_frame(const ChannelRealization& chan, const SystemParams& params,
                                            std::span<const int> data_bits, RandomStream& rng) {
    if (static_cast<int>(data_bits.size()) != params.data_symbols())
        throw ConfigError("generate_frame: expected " + std::to_string(params.data_symbols()) + " data bits, got " +
                          std::to_string(data_bits.size()));
    std::vector<TagSymbolSample> frame;
    frame.reserve(params.symbols_per_frame);
    for (int bit : pilot_pattern(params.pilots)) frame.push_back(generate_tag_symbol(chan, bit, params, rng));
    for (int bit : data_bits) {
        if (bit != 0 && bit != 1) throw ConfigError("generate_frame: data bits must be 0 or 1");
        frame.push_back(generate_tag_symbol(chan, bit, params, rng));
    }
    return frame;
}

SimulatedFrame simulate_frame(const SystemParams& params, RandomStream& rng) {
    SimulatedFrame f;
    f.channel = sample_channel(params, rng);
    f.data_bits.resize(params.data_symbols());
    for (int& bit : f.data_bits) bit = rng.bernoulli() ? 1 : 0;
    f.symbols = generate_frame(f.channel, params, f.data_bits, rng);
    return f;
}

}  // namespace ambc
