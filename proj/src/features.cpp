#include "ambc/features.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "ambc/errors.hpp"
#include "ambc/parallel.hpp"

namespace ambc {
namespace {

constexpr std::array<char, 7> kMagic{'A', 'M', 'B', 'C', 'D', 'S', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
public:
    Reader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

    std::uint64_t u(int bytes) {
        unsigned char buf[8];
        if (!in_.read(reinterpret_cast<char*>(buf), bytes)) throw FormatError(origin_ + ": truncated dataset file");
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u(8)); }

private:
    std::istream& in_;
    std::string origin_;
};

}  // namespace

std::size_t Dataset::count_label(int label) const {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [&](const ScmExample& e) { return e.label == label; }));
}

Scm scm(const CMatrix& x) {
    if (x.cols() == 0) throw ConfigError("scm: input has no columns");
    CMatrix r = (x * x.adjoint()) / static_cast<double>(x.cols());
    const auto m = r.rows();
    for (Eigen::Index i = 0; i < m; ++i) {
        r(i, i) = cdouble(r(i, i).real(), 0.0);
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const cdouble avg = 0.5 * (r(i, j) + std::conj(r(j, i)));
            r(i, j) = avg;
            r(j, i) = std::conj(avg);
        }
    }
    return {std::move(r)};
}

ScmPlanes to_planes(const Scm& s, bool normalize) {
    double scale = 1.0;
    if (normalize) {
        const double trace = s.r.diagonal().real().sum();
        if (!(trace > 0)) throw NumericalError("to_planes: non-positive trace, cannot normalize");
        scale = static_cast<double>(s.r.rows()) / trace;
    }
    return {s.r.real() * scale, s.r.imag() * scale};
}

Dataset build_source_dataset(const SystemParams& params, std::size_t k_s, std::uint64_t seed, bool normalize,
                             std::size_t workers) {
    params.validate();
    if (k_s < 2) throw ConfigError("build_source_dataset: k_s must be >= 2");
    Dataset d;
    d.normalized = normalize;
    d.meta = params;
    d.examples.resize(k_s);
    parallel_for(k_s, workers, [&](std::size_t k) {
        RandomStream rng = derive_stream(seed, {stream_tag::source_dataset, k});
        const ChannelRealization chan = sample_channel(params, rng);
        const int label = rng.bernoulli() ? 1 : 0;
        const TagSymbolSample sample = generate_tag_symbol(chan, label, params, rng);
        d.examples[k] = {to_planes(scm(sample.x), normalize), label};
    });
    return d;
}

Dataset build_target_dataset(std::span<const TagSymbolSample> pilots, std::size_t k_t, RandomStream& rng,
                             TargetAugmentation options) {
    if (pilots.empty()) throw ConfigError("build_target_dataset: no pilots");
    if (k_t < pilots.size()) throw ConfigError("build_target_dataset: k_t must be >= the number of pilots");
    const bool has0 = std::any_of(pilots.begin(), pilots.end(), [](const auto& p) { return p.label == 0; });
    const bool has1 = std::any_of(pilots.begin(), pilots.end(), [](const auto& p) { return p.label == 1; });
    if (!has0 || !has1)
        throw ConfigError("build_target_dataset: pilots carry a single label; transfer needs both hypotheses");

    Dataset d;
    d.normalized = options.normalize;
    d.examples.reserve(k_t);
    for (std::size_t k = 0; k < k_t; ++k) {
        if (!options.resample) {
            const auto& p = pilots[k % pilots.size()];
            d.examples.push_back({to_planes(scm(p.x), options.normalize), p.label});
            continue;
        }
        const auto& p = pilots[rng.index(pilots.size())];
        const auto n = p.x.cols();
        CMatrix boot(p.x.rows(), n);
        for (Eigen::Index c = 0; c < n; ++c) boot.col(c) = p.x.col(static_cast<Eigen::Index>(rng.index(n)));
        d.examples.push_back({to_planes(scm(boot), options.normalize), p.label});
    }
    return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    if (data.examples.empty()) throw ConfigError("save_dataset: dataset is empty");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const int m = data.dim();
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, static_cast<std::uint32_t>(m));
    put_u64(out, data.examples.size());
    out.put(data.normalized ? 1 : 0);
    for (const auto& e : data.examples) {
        if (e.planes.dim() != m) throw ConfigError("save_dataset: examples differ in dimension");
        if (e.label != 0 && e.label != 1) throw ConfigError("save_dataset: labels must be 0 or 1");
        out.put(static_cast<char>(e.label));
        for (const RMatrix* plane : {&e.planes.re, &e.planes.im})
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) put_f64(out, (*plane)(i, j));
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open dataset " + path.string());
    std::array<char, 7> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic)
        throw FormatError(path.string() + ": not a dataset file (bad magic)");
    Reader r(in, path.string());
    const auto m = static_cast<int>(r.u(4));
    const std::uint64_t count = r.u(8);
    const auto flag = r.u(1);
    if (m < 1 || flag > 1 || count == 0) throw FormatError(path.string() + ": corrupt dataset header");

    Dataset d;
    d.normalized = flag == 1;
    // Size check up front so a corrupt count cannot trigger a huge allocation.
    const auto start = in.tellg();
    in.seekg(0, std::ios::end);
    const auto remaining = static_cast<std::uint64_t>(in.tellg() - start);
    in.seekg(start);
    const std::uint64_t per_example = 1 + 2ull * m * m * 8;
    if (remaining != count * per_example) throw FormatError(path.string() + ": truncated or padded dataset file");

    d.examples.resize(count);
    for (auto& e : d.examples) {
        const auto label = r.u(1);
        if (label > 1) throw FormatError(path.string() + ": label byte out of range");
        e.label = static_cast<int>(label);
        e.planes.re.resize(m, m);
        e.planes.im.resize(m, m);
        for (RMatrix* plane : {&e.planes.re, &e.planes.im})
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) (*plane)(i, j) = r.f64();
    }
    return d;
}

}  // namespace ambc
