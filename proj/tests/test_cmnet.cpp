#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ambc/cmnet.hpp"
#include "ambc/errors.hpp"
#include "oracles.hpp"

using namespace ambc;

namespace {

ScmPlanes random_planes(int m, RandomStream& rng) {
    return to_planes(scm(oracle::random_complex(m, 2 * m, rng)), true);
}

/// Replaces every parameter with a small random value so biases are exercised too.
CmnetParams randomized(const CmnetArch& arch, RandomStream& rng, double scale = 0.2) {
    CmnetParams p = CmnetParams::zeros(arch);
    for (auto& t : tensors(p))
        for (std::size_t i = 0; i < t.size; ++i) t.data[i] = scale * rng.normal();
    return p;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("ambc_test_cmnet_" + name);
}

std::size_t pick(RandomStream& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

double eval_loss(const CmnetParams& p, std::span<const ScmExample> batch) {
    std::vector<Scores> s;
    std::vector<int> y;
    for (const auto& e : batch) {
        s.push_back(forward(p, e.planes));
        y.push_back(e.label);
    }
    return loss(s, y);
}

SystemParams point(int m, int n, double snr_db, double zeta_db) {
    SystemParams p;
    p.antennas = m;
    p.samples_per_symbol = n;
    p.snr_db = snr_db;
    p.zeta_db = zeta_db;
    return p;
}

}  // namespace

TEST(CmnetArch, LayoutForSixteenAntennas) {
    const CmnetArch a = CmnetArch::for_antennas(16);
    EXPECT_EQ(a.padding, Padding::valid);
    EXPECT_EQ(a.conv1_out(), 14);
    EXPECT_EQ(a.conv2_out(), 12);
    EXPECT_EQ(a.pooled_dim(), 6);
    EXPECT_EQ(a.flatten_len(), 64 * 36);
}

TEST(CmnetArch, SmallArraysFallBackToSamePadding) {
    const CmnetArch a = CmnetArch::for_antennas(4);
    EXPECT_EQ(a.padding, Padding::same);
    EXPECT_EQ(a.flatten_len(), 64 * 4);
    CmnetArch bad = a;
    bad.padding = Padding::valid;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(CmnetInit, HeVarianceAndZeroBiases) {
    const CmnetArch arch = CmnetArch::for_antennas(16);
    RandomStream rng(11);
    CmnetParams p = init_params(arch, rng);
    for (const auto& t : tensors(p)) {
        const bool bias = t.shape.size() == 1;
        if (bias) {
            for (std::size_t i = 0; i < t.size; ++i) EXPECT_EQ(t.data[i], 0.0) << t.name;
            continue;
        }
        const double fan_in = static_cast<double>(t.size) / t.shape[0];
        double s2 = 0;
        for (std::size_t i = 0; i < t.size; ++i) s2 += t.data[i] * t.data[i];
        const double var = s2 / t.size, want = 2.0 / fan_in;
        // Relative standard error of a sample variance is sqrt(2/n).
        EXPECT_NEAR(var / want, 1.0, 5 * std::sqrt(2.0 / t.size)) << t.name;
    }
    RandomStream again(11);
    EXPECT_TRUE(init_params(arch, again) == p);
}

TEST(CmnetForward, MatchesDirectConvolutionOracle) {
    RandomStream rng(12);
    for (int m : {16, 8}) {
        const CmnetArch arch = CmnetArch::for_antennas(m);
        for (int trial = 0; trial < 3; ++trial) {
            const CmnetParams p = randomized(arch, rng);
            const ScmPlanes x = random_planes(m, rng);
            const Scores got = forward(p, x);
            const auto [p1, p0] = oracle::naive_forward(p, x);
            EXPECT_NEAR(got.p1, p1, 1e-10);
            EXPECT_NEAR(got.p0, p0, 1e-10);
        }
    }
}

TEST(CmnetForward, SamePaddingMatchesOracle) {
    RandomStream rng(13);
    for (int m : {4, 16}) {
        CmnetArch arch = CmnetArch::for_antennas(m);
        arch.padding = Padding::same;
        const CmnetParams p = randomized(arch, rng);
        const ScmPlanes x = random_planes(m, rng);
        const Scores got = forward(p, x);
        const auto [p1, p0] = oracle::naive_forward(p, x);
        EXPECT_NEAR(got.p1, p1, 1e-10);
        EXPECT_NEAR(got.p0, p0, 1e-10);
    }
}

TEST(CmnetForward, ZeroOutputLayerIsUniform) {
    RandomStream rng(14);
    CmnetParams p = init_params(CmnetArch::for_antennas(16), rng);
    p.fc2.w.setZero();
    p.fc2.b.setZero();
    const Scores s = forward(p, random_planes(16, rng));
    EXPECT_EQ(s.p1, 0.5);
    EXPECT_EQ(s.p0, 0.5);
}

TEST(CmnetForward, ScoresArePositiveAndSumToOne) {
    RandomStream rng(15);
    const CmnetArch arch = CmnetArch::for_antennas(16);
    for (int trial = 0; trial < 20; ++trial) {
        const CmnetParams p = randomized(arch, rng, trial < 10 ? 0.1 : 0.3);
        const ScmPlanes x = random_planes(16, rng);
        for (Mode mode : {Mode::eval, Mode::train}) {
            const Scores s = forward(p, x, mode, rng);
            EXPECT_GT(s.p1, 0.0);
            EXPECT_GT(s.p0, 0.0);
            EXPECT_NEAR(s.p1 + s.p0, 1.0, 1e-12);
        }
    }
}

TEST(CmnetForward, EvalModeIsDeterministic) {
    RandomStream rng(16);
    const CmnetParams p = randomized(CmnetArch::for_antennas(16), rng);
    const ScmPlanes x = random_planes(16, rng);
    RandomStream a(1), b(2);
    const Scores s1 = forward(p, x, Mode::eval, a), s2 = forward(p, x, Mode::eval, b);
    EXPECT_EQ(s1.p1, s2.p1);
    EXPECT_EQ(s1.p0, s2.p0);
    const Logits z = forward_logits(p, x);
    EXPECT_NEAR(std::log(s1.p1 / s1.p0), z.z1 - z.z0, 1e-10);
}

TEST(CmnetForward, RejectsWrongInputSize) {
    RandomStream rng(17);
    const CmnetParams p = init_params(CmnetArch::for_antennas(16), rng);
    EXPECT_THROW(forward(p, random_planes(8, rng)), ConfigError);
}

TEST(CmnetForward, TrainModeMeanMatchesEvalForLinearNetwork) {
    // Positive inputs and positive weights up to fc1 keep every ReLU in its
    // linear regime, so the logit gap is linear in the dropout masks.
    const CmnetArch arch = CmnetArch::for_antennas(8);
    RandomStream rng(18);
    CmnetParams p = CmnetParams::zeros(arch);
    for (auto& t : tensors(p)) {
        const bool out_layer = t.name.rfind("fc2", 0) == 0;
        for (std::size_t i = 0; i < t.size; ++i)
            t.data[i] = out_layer ? rng.normal() * 0.05 : 0.05 * rng.uniform();
    }
    ScmPlanes x{RMatrix(8, 8), RMatrix(8, 8)};
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            x.re(i, j) = 0.5 + rng.uniform();
            x.im(i, j) = 0.5 + rng.uniform();
        }
    const Logits ev = forward_logits(p, x);
    const double want = ev.z1 - ev.z0;
    const int draws = 20000;
    double s = 0, s2 = 0;
    for (int d = 0; d < draws; ++d) {
        const Scores sc = forward(p, x, Mode::train, rng);
        const double g = std::log(sc.p1 / sc.p0);
        s += g;
        s2 += g * g;
    }
    const double mean = s / draws, se = std::sqrt((s2 / draws - mean * mean) / draws);
    EXPECT_NEAR(mean, want, 4 * se) << "se " << se;
}

TEST(CmnetLoss, Examples) {
    const double eps = 1e-6;
    const Scores confident[] = {{1 - eps, eps}};
    const int one[] = {1};
    EXPECT_NEAR(loss(confident, one), eps, 1e-11);
    const Scores uniform[] = {{0.5, 0.5}};
    const int zero[] = {0};
    EXPECT_NEAR(loss(uniform, one), std::numbers::ln2, 1e-15);
    EXPECT_NEAR(loss(uniform, zero), std::numbers::ln2, 1e-15);
}

TEST(CmnetLoss, MixedBatchMatchesHandSum) {
    const Scores s[] = {{0.9, 0.1}, {0.3, 0.7}, {0.6, 0.4}};
    const int y[] = {1, 0, 0};
    const double want = -(std::log(0.9) + std::log(0.7) + std::log(0.4)) / 3;
    EXPECT_NEAR(loss(s, y), want, 1e-12);
}

TEST(CmnetLoss, ClampsZeroProbability) {
    const Scores s[] = {{0.0, 1.0}};
    const int y[] = {1};
    EXPECT_NEAR(loss(s, y), -std::log(1e-12), 1e-9);
    const int y2[] = {1, 0};
    EXPECT_THROW(loss(s, y2), ConfigError);
}

TEST(CmnetBackward, MatchesCentralDifferences) {
    const CmnetArch arch = CmnetArch::for_antennas(8);
    RandomStream rng(19);
    CmnetParams p = init_params(arch, rng);
    for (auto& t : tensors(p))
        if (t.shape.size() == 1)
            for (std::size_t i = 0; i < t.size; ++i) t.data[i] = 0.1 * rng.normal();
    std::vector<ScmExample> batch;
    for (int k = 0; k < 4; ++k) batch.push_back({random_planes(8, rng), k % 2});
    const Gradients g = backward(p, batch, Mode::eval, rng);
    EXPECT_NEAR(g.loss, eval_loss(p, batch), 1e-12);

    auto pt = tensors(p);
    auto gt = tensors(const_cast<CmnetParams&>(g.grad));
    const double h = 1e-5;
    double worst = 0;
    for (int s = 0; s < 200; ++s) {
        const std::size_t ti = pick(rng, pt.size());
        const std::size_t i = pick(rng, pt[ti].size);
        double& w = pt[ti].data[i];
        const double orig = w;
        w = orig + h;
        const double up = eval_loss(p, batch);
        w = orig - h;
        const double down = eval_loss(p, batch);
        w = orig;
        const double fd = (up - down) / (2 * h);
        const double an = gt[ti].data[i];
        // Absolute floor keeps coordinates with vanishing gradient from dominating.
        const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, err);
        EXPECT_LE(err, 1e-4) << pt[ti].name << "[" << i << "] fd " << fd << " analytic " << an;
    }
    RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(CmnetBackward, OneHotScoresGiveZeroGradient) {
    const CmnetArch arch = CmnetArch::for_antennas(8);
    RandomStream rng(20);
    CmnetParams p = init_params(arch, rng);
    p.fc2.w.setZero();
    p.fc2.b << 0.0, 800.0;  // p1 rounds to exactly 1
    std::vector<ScmExample> batch;
    for (int k = 0; k < 3; ++k) batch.push_back({random_planes(8, rng), 1});
    const Gradients g = backward(p, batch, Mode::eval, rng);
    EXPECT_EQ(g.loss, 0.0);
    for (const auto& t : tensors(const_cast<CmnetParams&>(g.grad)))
        for (std::size_t i = 0; i < t.size; ++i) ASSERT_EQ(t.data[i], 0.0) << t.name;
}

TEST(CmnetTrain, OverfitsSmallDataset) {
    const Dataset d = build_source_dataset(point(16, 50, 10, 0), 32, 21);
    ASSERT_EQ(d.size(), 32u);
    RandomStream rng(22);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.seed = 23;
    const TrainResult r = train(init_params(CmnetArch::for_antennas(16), rng), d, cfg);
    ASSERT_EQ(r.epoch_losses.size(), 200u);
    EXPECT_EQ(r.final_epoch_loss, r.epoch_losses.back());
    // Dropout keeps the train-mode loss noisy; the fitted network itself is judged in eval mode.
    EXPECT_LT(eval_loss(r.params, d.examples), 0.01);
    EXPECT_LT(r.final_epoch_loss, r.epoch_losses.front());
}

TEST(CmnetTrain, ZeroLearningRateLeavesParamsUnchanged) {
    const Dataset d = build_source_dataset(point(8, 20, 10, 0), 16, 24);
    RandomStream rng(25);
    const CmnetParams p = init_params(CmnetArch::for_antennas(8), rng);
    for (Optimizer opt : {Optimizer::adam, Optimizer::sgd}) {
        TrainConfig cfg;
        cfg.epochs = 1;
        cfg.batch_size = 4;
        cfg.learning_rate = 0;
        cfg.optimizer = opt;
        EXPECT_TRUE(train(p, d, cfg).params == p);
    }
}

TEST(CmnetTrain, RejectsInvalidConfig) {
    const Dataset d = build_source_dataset(point(8, 20, 10, 0), 8, 26);
    RandomStream rng(27);
    const CmnetParams p = init_params(CmnetArch::for_antennas(8), rng);
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(train(p, d, cfg), ConfigError);
    cfg = {};
    cfg.batch_size = 0;
    EXPECT_THROW(train(p, d, cfg), ConfigError);
    cfg = {};
    cfg.learning_rate = -1;
    EXPECT_THROW(train(p, d, cfg), ConfigError);
    EXPECT_THROW(train(p, Dataset{}, TrainConfig{}), ConfigError);
}

TEST(CmnetTrain, FrozenConvolutionsStayBitwiseEqual) {
    const Dataset d = build_source_dataset(point(8, 20, 10, 0), 32, 28);
    RandomStream rng(29);
    const CmnetParams p = init_params(CmnetArch::for_antennas(8), rng);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.freeze_conv = true;
    const CmnetParams q = train(p, d, cfg).params;
    EXPECT_TRUE(q.conv_equal(p));
    EXPECT_FALSE(q.fc1 == p.fc1);
    EXPECT_FALSE(q.fc2 == p.fc2);
    cfg.freeze_conv = false;
    EXPECT_FALSE(train(p, d, cfg).params.conv_equal(p));
}

TEST(CmnetTrain, FixedSeedIsReproducible) {
    const Dataset d = build_source_dataset(point(8, 20, 10, 0), 32, 30);
    RandomStream rng(31);
    const CmnetParams p = init_params(CmnetArch::for_antennas(8), rng);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    const TrainResult a = train(p, d, cfg), b = train(p, d, cfg);
    EXPECT_TRUE(a.params == b.params);
    EXPECT_EQ(a.epoch_losses, b.epoch_losses);
}

TEST(CmnetFile, RoundTripIsBitwise) {
    RandomStream rng(32);
    const CmnetParams p = randomized(CmnetArch::for_antennas(16), rng, 1.0);
    const auto path = temp_file("roundtrip.txt");
    save_params(p, path, {{"stage", "pretrained"}});
    std::map<std::string, std::string> meta;
    const CmnetParams q = load_params(path, &meta);
    EXPECT_TRUE(q == p);
    EXPECT_EQ(meta.at("stage"), "pretrained");
    std::filesystem::remove(path);
}

TEST(CmnetFile, TruncatedFileIsRejected) {
    RandomStream rng(33);
    const std::string text = serialize_params(init_params(CmnetArch::for_antennas(8), rng));
    const auto path = temp_file("truncated.txt");
    std::ofstream(path) << text.substr(0, text.size() / 2);
    EXPECT_THROW(load_params(path), FormatError);
    std::ofstream(path) << "not a model";
    EXPECT_THROW(load_params(path), FormatError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_params(path), FormatError);
}

TEST(CmnetFile, ArchitectureMismatchIsRejected) {
    RandomStream rng(34);
    const auto path = temp_file("arch.txt");
    save_params(init_params(CmnetArch::for_antennas(16), rng), path);
    EXPECT_THROW(load_params(path, CmnetArch::for_antennas(8)), FormatError);
    EXPECT_NO_THROW(load_params(path, CmnetArch::for_antennas(16)));
    std::filesystem::remove(path);
}
