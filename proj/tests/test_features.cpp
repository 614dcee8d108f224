#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <numbers>

#include "ambc/errors.hpp"
#include "ambc/features.hpp"
#include "oracles.hpp"

using namespace ambc;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("ambc_features_" + name);
}

double max_rel_diff(const CMatrix& a, const CMatrix& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(a.cwiseAbs().maxCoeff(), 1e-300);
}

CMatrix rotate_columns(const CMatrix& x, RandomStream& rng) {
    CMatrix y = x;
    for (Eigen::Index c = 0; c < y.cols(); ++c) y.col(c) *= std::polar(1.0, 2 * std::numbers::pi * rng.uniform());
    return y;
}

std::vector<TagSymbolSample> make_pilots(int m, int n, int p, RandomStream& rng) {
    std::vector<TagSymbolSample> out;
    for (int i = 0; i < p; ++i) out.push_back({oracle::random_complex(m, n, rng, 1.0 + i), i % 2 == 0 ? 1 : 0});
    return out;
}

}  // namespace

TEST(Scm, RankOneOuterProduct) {
    CMatrix x(2, 1);
    x << 1.0, 0.0;
    const Scm s = scm(x);
    CMatrix expect(2, 2);
    expect << 1.0, 0.0, 0.0, 0.0;
    EXPECT_TRUE(s.r == expect);
}

TEST(Scm, OrthonormalColumnsGiveHalfIdentity) {
    const Scm s = scm(CMatrix::Identity(2, 2));
    EXPECT_TRUE(s.r == 0.5 * CMatrix::Identity(2, 2));
}

TEST(Scm, MatchesNaiveColumnAccumulation) {
    RandomStream rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const CMatrix x = oracle::random_complex(4, 8, rng);
        EXPECT_LT(max_rel_diff(scm(x).r, oracle::naive_scm(x)), 1e-12);
    }
}

TEST(Scm, RejectsEmptyInput) { EXPECT_THROW(scm(CMatrix(3, 0)), ConfigError); }

TEST(Scm, IsExactlyHermitianAndPsd) {
    RandomStream rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 1 + trial % 16, n = 1 + trial % 7;
        const Scm s = scm(oracle::random_complex(m, n, rng));
        ASSERT_TRUE(s.r == s.r.adjoint());
        const double trace = s.r.diagonal().real().sum();
        Eigen::SelfAdjointEigenSolver<CMatrix> es(s.r);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * trace / m);
    }
}

TEST(Scm, InvariantToPerColumnPhaseRotation) {
    RandomStream rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const CMatrix x = oracle::random_complex(6, 12, rng);
        EXPECT_LT(max_rel_diff(scm(x).r, scm(rotate_columns(x, rng)).r), 1e-12);
    }
}

TEST(ToPlanes, IdentityNormalized) {
    const ScmPlanes p = to_planes({CMatrix::Identity(3, 3)}, true);
    EXPECT_TRUE(p.re == RMatrix::Identity(3, 3));
    EXPECT_TRUE(p.im == RMatrix::Zero(3, 3));
}

TEST(ToPlanes, NormalizationRemovesScale) {
    RandomStream rng(4);
    const Scm s = scm(oracle::random_complex(5, 9, rng));
    const ScmPlanes a = to_planes(s, true);
    const ScmPlanes b = to_planes({s.r * 7.0}, true);
    EXPECT_LT((a.re - b.re).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((a.im - b.im).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(a.re.trace(), 5.0, 1e-12);
}

TEST(ToPlanes, UnnormalizedKeepsValues) {
    RandomStream rng(5);
    const Scm s = scm(oracle::random_complex(3, 4, rng));
    const ScmPlanes p = to_planes(s, false);
    EXPECT_TRUE(p.re == s.r.real());
    EXPECT_TRUE(p.im == s.r.imag());
}

TEST(ToPlanes, RealPlaneSymmetricImaginaryPlaneAntisymmetric) {
    RandomStream rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const ScmPlanes p = to_planes(scm(oracle::random_complex(8, 3, rng)), trial % 2 == 0);
        EXPECT_TRUE(p.re == p.re.transpose());
        EXPECT_TRUE(p.im == -p.im.transpose());
    }
}

TEST(ToPlanes, RejectsZeroTrace) { EXPECT_THROW(to_planes({CMatrix::Zero(2, 2)}, true), NumericalError); }

TEST(SourceDataset, SizeShapeAndDeterminism) {
    SystemParams p;
    p.antennas = 4;
    const Dataset a = build_source_dataset(p, 2, 17);
    const Dataset b = build_source_dataset(p, 2, 17);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a.dim(), 4);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(a.examples[k].label, b.examples[k].label);
        EXPECT_TRUE(a.examples[k].planes == b.examples[k].planes);
    }
    EXPECT_THROW(build_source_dataset(p, 1, 17), ConfigError);
}

TEST(SourceDataset, IndependentOfWorkerCount) {
    SystemParams p;
    p.antennas = 4;
    const Dataset a = build_source_dataset(p, 64, 5, true, 1);
    const Dataset b = build_source_dataset(p, 64, 5, true, 4);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a.examples[k].label, b.examples[k].label);
        EXPECT_TRUE(a.examples[k].planes == b.examples[k].planes);
    }
}

TEST(SourceDataset, ClassBalanceWithinBinomialBound) {
    SystemParams p;
    p.antennas = 2;
    p.samples_per_symbol = 4;
    const Dataset d = build_source_dataset(p, 10000, 23);
    const auto ones = static_cast<long>(d.count_label(1));
    EXPECT_LT(std::abs(ones - 5000), 250);
    EXPECT_EQ(d.count_label(0) + d.count_label(1), 10000u);
}

TEST(SourceDataset, EveryExampleDrawsItsOwnChannel) {
    // Under a fixed channel two unnormalized H0 SCMs share the dominant
    // eigenvector; with fresh channels they do not.
    SystemParams p;
    p.antennas = 8;
    p.snr_db = 30;
    const Dataset d = build_source_dataset(p, 40, 9, false);
    int aligned = 0;
    Eigen::VectorXcd prev;
    for (const auto& e : d.examples) {
        CMatrix r = e.planes.re.cast<cdouble>() + cdouble(0, 1) * e.planes.im.cast<cdouble>();
        Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
        const Eigen::VectorXcd v = es.eigenvectors().col(p.antennas - 1);
        if (prev.size() && std::abs(prev.dot(v)) > 0.9) ++aligned;
        prev = v;
    }
    EXPECT_LT(aligned, 3);
}

TEST(TargetDataset, SizeAndLabelsFromPilots) {
    RandomStream rng(30);
    const auto pilots = make_pilots(16, 50, 10, rng);
    RandomStream aug(31);
    const Dataset d = build_target_dataset(pilots, 2000, aug);
    EXPECT_EQ(d.size(), 2000u);
    EXPECT_EQ(d.dim(), 16);
    EXPECT_GT(d.count_label(0), 0u);
    EXPECT_GT(d.count_label(1), 0u);
    EXPECT_EQ(d.count_label(0) + d.count_label(1), 2000u);
}

TEST(TargetDataset, NoResamplingReturnsRawPilotScms) {
    RandomStream rng(32);
    const auto pilots = make_pilots(4, 6, 10, rng);
    RandomStream aug(33);
    const Dataset d = build_target_dataset(pilots, 10, aug, {true, false});
    ASSERT_EQ(d.size(), 10u);
    for (std::size_t k = 0; k < 10; ++k) {
        EXPECT_EQ(d.examples[k].label, pilots[k].label);
        EXPECT_TRUE(d.examples[k].planes == to_planes(scm(pilots[k].x), true));
    }
}

TEST(TargetDataset, BootstrapMatchesNaiveRecomputation) {
    RandomStream rng(34);
    const auto pilots = make_pilots(3, 8, 4, rng);
    RandomStream aug(35);
    RandomStream replay = aug;
    const Dataset d = build_target_dataset(pilots, 50, aug, {false, true});
    for (const auto& e : d.examples) {
        const auto& src = pilots[replay.index(pilots.size())];
        CMatrix boot(src.x.rows(), src.x.cols());
        for (int c = 0; c < src.x.cols(); ++c) boot.col(c) = src.x.col(static_cast<int>(replay.index(src.x.cols())));
        const CMatrix naive = oracle::naive_scm(boot);
        EXPECT_EQ(e.label, src.label);
        EXPECT_LT((e.planes.re - naive.real()).cwiseAbs().maxCoeff(), 1e-12 * naive.cwiseAbs().maxCoeff());
        EXPECT_LT((e.planes.im - naive.imag()).cwiseAbs().maxCoeff(), 1e-12 * naive.cwiseAbs().maxCoeff());
        // The trace is a mean of resampled column energies.
        const Eigen::VectorXd norms = src.x.colwise().squaredNorm().transpose();
        const double trace = e.planes.re.trace();
        EXPECT_GE(trace, norms.minCoeff() * (1 - 1e-12));
        EXPECT_LE(trace, norms.maxCoeff() * (1 + 1e-12));
    }
}

TEST(TargetDataset, RejectsSingleClassPilotsAndTooFewExamples) {
    RandomStream rng(36);
    auto pilots = make_pilots(2, 4, 4, rng);
    RandomStream aug(1);
    EXPECT_THROW(build_target_dataset(pilots, 3, aug), ConfigError);
    for (auto& p : pilots) p.label = 1;
    EXPECT_THROW(build_target_dataset(pilots, 10, aug), ConfigError);
}

TEST(TargetDataset, NeverEmitsAbsentLabel) {
    RandomStream rng(37);
    auto pilots = make_pilots(2, 4, 6, rng);
    RandomStream aug(2);
    const Dataset d = build_target_dataset(pilots, 500, aug);
    for (const auto& e : d.examples) EXPECT_TRUE(e.label == 0 || e.label == 1);
}

TEST(DatasetFile, BitExactRoundTrip) {
    SystemParams p;
    p.antennas = 5;
    const Dataset d = build_source_dataset(p, 37, 3, false);
    const auto path = temp_path("roundtrip.bin");
    save_dataset(d, path);
    EXPECT_EQ(std::filesystem::file_size(path), 7u + 4 + 8 + 1 + 37 * (1 + 2 * 25 * 8));
    const Dataset back = load_dataset(path);
    EXPECT_FALSE(back.normalized);
    ASSERT_EQ(back.size(), d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        EXPECT_EQ(back.examples[k].label, d.examples[k].label);
        EXPECT_EQ(std::memcmp(back.examples[k].planes.re.data(), d.examples[k].planes.re.data(), 25 * 8), 0);
        EXPECT_EQ(std::memcmp(back.examples[k].planes.im.data(), d.examples[k].planes.im.data(), 25 * 8), 0);
    }
    std::filesystem::remove(path);
}

TEST(DatasetFile, HeaderLayoutIsLittleEndian) {
    Dataset d;
    d.examples.push_back({{RMatrix::Constant(1, 1, 1.0), RMatrix::Zero(1, 1)}, 1});
    const auto path = temp_path("header.bin");
    save_dataset(d, path);
    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    const std::vector<unsigned char> expect{'A', 'M', 'B', 'C', 'D', 'S', '1', 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1,
                                            1, 0, 0, 0, 0, 0, 0, 0xf0, 0x3f, 0, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_EQ(bytes, expect);
    std::filesystem::remove(path);
}

TEST(DatasetFile, TruncatedAndCorruptFilesAreRejected) {
    SystemParams p;
    p.antennas = 3;
    const Dataset d = build_source_dataset(p, 4, 3);
    const auto path = temp_path("trunc.bin");
    save_dataset(d, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
    EXPECT_THROW(load_dataset(path), FormatError);
    std::filesystem::resize_file(path, 10);
    EXPECT_THROW(load_dataset(path), FormatError);
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTADATASET-------------------";
    }
    EXPECT_THROW(load_dataset(path), FormatError);
    EXPECT_THROW(load_dataset(temp_path("does_not_exist.bin")), FormatError);
    std::filesystem::remove(path);
}
