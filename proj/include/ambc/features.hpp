#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ambc/rng.hpp"
#include "ambc/sysmodel.hpp"
#include "ambc/types.hpp"

namespace ambc {

/// Sample covariance matrix. Stored Hermitian to the bit.
struct Scm {
    CMatrix r;
};

/// Network input: real and imaginary planes of the (optionally normalized) SCM.
struct ScmPlanes {
    RMatrix re;
    RMatrix im;

    int dim() const { return static_cast<int>(re.rows()); }
    bool operator==(const ScmPlanes& o) const { return re == o.re && im == o.im; }
};

struct ScmExample {
    ScmPlanes planes;
    int label = 0;
};

struct Dataset {
    std::vector<ScmExample> examples;
    bool normalized = true;
    std::optional<SystemParams> meta;

    int dim() const { return examples.empty() ? 0 : examples.front().planes.dim(); }
    std::size_t size() const { return examples.size(); }
    std::size_t count_label(int label) const;
};

/// (1/N) X X^H, symmetrized. Throws ConfigError on a zero-column input.
Scm scm(const CMatrix& x);

/// Splits into real/imaginary planes; with `normalize`, divides by trace/M first.
ScmPlanes to_planes(const Scm& r, bool normalize);

/// k_s examples, each from a fresh channel with an equiprobable label.
/// Example k uses its own sub-stream of `seed`, so the result does not depend
/// on `workers`.
Dataset build_source_dataset(const SystemParams& params, std::size_t k_s, std::uint64_t seed, bool normalize = true,
                             std::size_t workers = 1);

struct TargetAugmentation {
    bool normalize = true;
    /// false: example k is pilot (k mod P) with its columns untouched.
    bool resample = true;
};

/// Column-bootstrap augmentation of the pilots into k_t labeled examples.
/// Throws ConfigError if the pilots do not cover both labels or k_t < P.
Dataset build_target_dataset(std::span<const TagSymbolSample> pilots, std::size_t k_t, RandomStream& rng,
                             TargetAugmentation options = {});

/// Binary dataset file ("AMBCDS1", little-endian).
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace ambc
