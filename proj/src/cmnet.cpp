#include "ambc/cmnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "ambc/errors.hpp"

namespace ambc {

std::string_view to_string(Padding p) { return p == Padding::valid ? "valid" : "same"; }

Padding parse_padding(std::string_view s) {
    if (s == "valid") return Padding::valid;
    if (s == "same") return Padding::same;
    throw ConfigError("unknown padding '" + std::string(s) + "' (expected valid or same)");
}

std::string_view to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view s) {
    if (s == "adam") return Optimizer::adam;
    if (s == "sgd") return Optimizer::sgd;
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected adam or sgd)");
}

namespace {

int conv_out(int in, int k, Padding p) { return p == Padding::same ? in : in - k + 1; }
int pad_of(int k, Padding p) { return p == Padding::same ? k / 2 : 0; }

}  // namespace

int CmnetArch::conv1_out() const { return conv_out(input_dim, kernel, padding); }
int CmnetArch::conv2_out() const { return conv_out(conv1_out(), kernel, padding); }
int CmnetArch::pooled_dim() const { return conv2_out() / pool; }
int CmnetArch::flatten_len() const { return conv2_filters * pooled_dim() * pooled_dim(); }

void CmnetArch::validate() const {
    if (input_dim < 1 || in_channels < 1 || conv1_filters < 1 || conv2_filters < 1 || fc1_units < 1)
        throw ConfigError("cmnet: layer sizes must be positive");
    if (kernel < 1 || pool < 1) throw ConfigError("cmnet: kernel and pool must be positive");
    if (padding == Padding::same && kernel % 2 == 0) throw ConfigError("cmnet: same padding needs an odd kernel");
    if (classes != 2) throw ConfigError("cmnet: the detector is binary, classes must be 2");
    if (conv2_out() < pool)
        throw ConfigError("cmnet: input " + std::to_string(input_dim) + "x" + std::to_string(input_dim) +
                          " leaves no spatial extent with " + std::string(to_string(padding)) + " padding");
    for (double d : {drop_rate1(), drop_rate2()})
        if (!(d >= 0.0 && d < 1.0)) throw ConfigError("cmnet: dropout drop rate must lie in [0, 1)");
}

CmnetArch CmnetArch::for_antennas(int m) {
    CmnetArch a;
    a.input_dim = m;
    a.padding = Padding::valid;
    if (a.conv2_out() < a.pool) a.padding = Padding::same;
    return a;
}

CmnetParams CmnetParams::zeros(const CmnetArch& arch) {
    arch.validate();
    const int k2 = arch.kernel * arch.kernel;
    CmnetParams p;
    p.arch = arch;
    p.conv1 = {RowMatrix::Zero(arch.conv1_filters, arch.in_channels * k2), RVector::Zero(arch.conv1_filters)};
    p.conv2 = {RowMatrix::Zero(arch.conv2_filters, arch.conv1_filters * k2), RVector::Zero(arch.conv2_filters)};
    p.fc1 = {RowMatrix::Zero(arch.fc1_units, arch.flatten_len()), RVector::Zero(arch.fc1_units)};
    p.fc2 = {RowMatrix::Zero(arch.classes, arch.fc1_units), RVector::Zero(arch.classes)};
    return p;
}

bool CmnetParams::all_finite() const {
    for (const LayerParams* l : {&conv1, &conv2, &fc1, &fc2})
        if (!l->w.allFinite() || !l->b.allFinite()) return false;
    return true;
}

std::vector<TensorRef> tensors(CmnetParams& p) {
    const CmnetArch& a = p.arch;
    auto ref = [](std::string name, std::vector<int> shape, auto& m, bool conv) {
        return TensorRef{std::move(name), std::move(shape), m.data(), static_cast<std::size_t>(m.size()), conv};
    };
    return {
        ref("conv1.weight", {a.conv1_filters, a.in_channels, a.kernel, a.kernel}, p.conv1.w, true),
        ref("conv1.bias", {a.conv1_filters}, p.conv1.b, true),
        ref("conv2.weight", {a.conv2_filters, a.conv1_filters, a.kernel, a.kernel}, p.conv2.w, true),
        ref("conv2.bias", {a.conv2_filters}, p.conv2.b, true),
        ref("fc1.weight", {a.fc1_units, a.flatten_len()}, p.fc1.w, false),
        ref("fc1.bias", {a.fc1_units}, p.fc1.b, false),
        ref("fc2.weight", {a.classes, a.fc1_units}, p.fc2.w, false),
        ref("fc2.bias", {a.classes}, p.fc2.b, false),
    };
}

CmnetParams init_params(const CmnetArch& arch, RandomStream& rng) {
    CmnetParams p = CmnetParams::zeros(arch);
    for (LayerParams* l : {&p.conv1, &p.conv2, &p.fc1, &p.fc2}) {
        const double sd = std::sqrt(2.0 / static_cast<double>(l->w.cols()));
        double* w = l->w.data();
        for (Eigen::Index i = 0; i < l->w.size(); ++i) w[i] = sd * rng.normal();
    }
    return p;
}

namespace {

/// Valid output range [lo, hi) along one axis for kernel offset `kk`.
struct Span {
    int lo, hi;
};

Span inside_range(int kk, int pad, int dim, int out_dim) {
    return {std::clamp(pad - kk, 0, out_dim), std::clamp(dim + pad - kk, 0, out_dim)};
}

/// Activations are channels x (row-major spatial index).
void im2col(const RowMatrix& in, int dim, int k, int pad, int out_dim, RowMatrix& cols) {
    const auto channels = static_cast<int>(in.rows());
    cols.resize(channels * k * k, out_dim * out_dim);
    for (int c = 0; c < channels; ++c) {
        const double* src = in.row(c).data();
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                double* dst = cols.row((c * k + ky) * k + kx).data();
                const Span xs = inside_range(kx, pad, dim, out_dim);
                for (int oy = 0; oy < out_dim; ++oy) {
                    double* out = dst + oy * out_dim;
                    const int iy = oy + ky - pad;
                    if (iy < 0 || iy >= dim) {
                        std::fill(out, out + out_dim, 0.0);
                        continue;
                    }
                    std::fill(out, out + xs.lo, 0.0);
                    std::copy_n(src + iy * dim + xs.lo + kx - pad, xs.hi - xs.lo, out + xs.lo);
                    std::fill(out + xs.hi, out + out_dim, 0.0);
                }
            }
    }
}

/// Adjoint of im2col: scatters column gradients back onto the input grid.
void col2im(const RowMatrix& cols, int channels, int dim, int k, int pad, int out_dim, RowMatrix& out) {
    out.setZero(channels, dim * dim);
    for (int c = 0; c < channels; ++c) {
        double* dst = out.row(c).data();
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const double* src = cols.row((c * k + ky) * k + kx).data();
                const Span xs = inside_range(kx, pad, dim, out_dim);
                for (int oy = 0; oy < out_dim; ++oy) {
                    const int iy = oy + ky - pad;
                    if (iy < 0 || iy >= dim) continue;
                    double* d = dst + iy * dim + kx - pad;
                    const double* s = src + oy * out_dim;
                    for (int ox = xs.lo; ox < xs.hi; ++ox) d[ox] += s[ox];
                }
            }
    }
}

void check_input(const CmnetArch& a, const ScmPlanes& in) {
    if (a.in_channels != 2) throw ConfigError("cmnet: SCM input has exactly two planes");
    if (in.dim() != a.input_dim || in.im.rows() != a.input_dim || in.re.cols() != a.input_dim ||
        in.im.cols() != a.input_dim)
        throw ConfigError("cmnet: input is " + std::to_string(in.dim()) + "x" + std::to_string(in.re.cols()) +
                          ", network expects " + std::to_string(a.input_dim) + "x" + std::to_string(a.input_dim));
}

/// Large per-call temporaries, kept per thread so the hot loops do not allocate.
struct ConvScratch {
    RowMatrix grid;
    RowMatrix cols1;  // conv1 patches
    RowMatrix cols2;  // conv2 patches
    RowMatrix dcols;
    RowMatrix dz1;
    RowMatrix dz2;
};

ConvScratch& scratch() {
    thread_local ConvScratch s;
    return s;
}

void fill_grid(const ScmPlanes& in, RowMatrix& g) {
    const int m = in.dim();
    g.resize(2, m * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            g(0, i * m + j) = in.re(i, j);
            g(1, i * m + j) = in.im(i, j);
        }
}

/// Per-example state kept between the forward and backward pass.
struct ConvCache {
    RowMatrix a1;  // conv1 post-ReLU
    RowMatrix a2;  // conv2 post-ReLU
    std::vector<int> argmax;
    RVector features;
};

void conv_forward(const CmnetParams& p, const ScmPlanes& input, ConvCache& cache) {
    const CmnetArch& a = p.arch;
    check_input(a, input);
    const int pad = pad_of(a.kernel, a.padding);
    const int d1 = a.conv1_out(), d2 = a.conv2_out(), pd = a.pooled_dim();

    ConvScratch& sc = scratch();
    fill_grid(input, sc.grid);
    im2col(sc.grid, a.input_dim, a.kernel, pad, d1, sc.cols1);
    cache.a1.resize(a.conv1_filters, d1 * d1);
    cache.a1.noalias() = p.conv1.w * sc.cols1;
    cache.a1.colwise() += p.conv1.b;
    cache.a1.array() = cache.a1.array().max(0.0);

    im2col(cache.a1, d1, a.kernel, pad, d2, sc.cols2);
    cache.a2.resize(a.conv2_filters, d2 * d2);
    cache.a2.noalias() = p.conv2.w * sc.cols2;
    cache.a2.colwise() += p.conv2.b;
    cache.a2.array() = cache.a2.array().max(0.0);

    const int s = a.pool;
    cache.features.resize(a.flatten_len());
    cache.argmax.resize(a.flatten_len());
    for (int c = 0; c < a.conv2_filters; ++c)
        for (int py = 0; py < pd; ++py)
            for (int px = 0; px < pd; ++px) {
                int best = (py * s) * d2 + px * s;
                double best_v = cache.a2(c, best);
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx) {
                        const int idx = (py * s + dy) * d2 + (px * s + dx);
                        if (cache.a2(c, idx) > best_v) {
                            best_v = cache.a2(c, idx);
                            best = idx;
                        }
                    }
                const int f = (c * pd + py) * pd + px;
                cache.features(f) = best_v;
                cache.argmax[f] = best;
            }
}

/// Accumulates conv gradients of one example given d(loss)/d(features).
void conv_backward(const CmnetParams& p, const ScmPlanes& input, const ConvCache& cache,
                   const Eigen::Ref<const RVector>& dfeat, CmnetParams& grad) {
    const CmnetArch& a = p.arch;
    const int pad = pad_of(a.kernel, a.padding);
    const int d1 = a.conv1_out(), d2 = a.conv2_out(), pd = a.pooled_dim();

    ConvScratch& sc = scratch();
    RowMatrix& dz2 = sc.dz2;
    dz2.setZero(a.conv2_filters, d2 * d2);
    for (int f = 0; f < a.flatten_len(); ++f) dz2(f / (pd * pd), cache.argmax[f]) += dfeat(f);
    dz2 = (cache.a2.array() > 0.0).select(dz2, 0.0);

    im2col(cache.a1, d1, a.kernel, pad, d2, sc.cols2);
    grad.conv2.w.noalias() += dz2 * sc.cols2.transpose();
    grad.conv2.b += dz2.rowwise().sum();

    sc.dcols.resize(p.conv2.w.cols(), dz2.cols());
    sc.dcols.noalias() = p.conv2.w.transpose() * dz2;
    RowMatrix& dz1 = sc.dz1;
    col2im(sc.dcols, a.conv1_filters, d1, a.kernel, pad, d2, dz1);
    dz1 = (cache.a1.array() > 0.0).select(dz1, 0.0);

    fill_grid(input, sc.grid);
    im2col(sc.grid, a.input_dim, a.kernel, pad, d1, sc.cols1);
    grad.conv1.w.noalias() += dz1 * sc.cols1.transpose();
    grad.conv1.b += dz1.rowwise().sum();
}

/// One stream draw keys a counter-based generator for the whole mask; each
/// 64-bit output yields two 32-bit uniforms. A unit is kept when its uniform
/// is at or above the drop rate. The select is done on bit patterns because
/// a branch here mispredicts half the time.
void fill_dropout_mask(RMatrix& mask, double drop, RandomStream& rng) {
    if (drop <= 0.0) {
        mask.setOnes();
        return;
    }
    const auto keep_bits = std::bit_cast<std::uint64_t>(1.0 / (1.0 - drop));
    const auto threshold = static_cast<std::uint64_t>(std::ceil(drop * 0x1.0p32));
    auto unit = [&](std::uint64_t u) {
        return std::bit_cast<double>(keep_bits & (std::uint64_t{0} - static_cast<std::uint64_t>(u >= threshold)));
    };
    const std::uint64_t key = rng.next_u64();
    double* m = mask.data();
    const auto n = static_cast<std::uint64_t>(mask.size());
    for (std::uint64_t i = 0; i < n / 2; ++i) {
        const std::uint64_t r = mix64(key + i);
        m[2 * i] = unit(r >> 32);
        m[2 * i + 1] = unit(r & 0xffffffffULL);
    }
    if (n % 2) m[n - 1] = unit(mix64(key + n / 2) >> 32);
}

/// Dense head over a batch of features (columns). Holds what backward needs.
struct HeadPass {
    RMatrix x;      // features after dropout1
    RMatrix mask1;  // empty in eval mode
    RMatrix z1;
    RMatrix h;      // ReLU(z1) after dropout2
    RMatrix mask2;
    RMatrix logits;
    RMatrix probs;
};

/// The batch is `columns` of `features`, or all of them when `columns` is empty.
void head_forward(const CmnetParams& p, const RMatrix& features, std::span<const Eigen::Index> columns, Mode mode,
                  RandomStream& rng, HeadPass& hp) {
    const auto batch = columns.empty() ? features.cols() : static_cast<Eigen::Index>(columns.size());
    auto source = [&](Eigen::Index b) { return features.col(columns.empty() ? b : columns[b]); };
    hp.x.resize(features.rows(), batch);
    if (mode == Mode::train) {
        hp.mask1.resize(features.rows(), batch);
        fill_dropout_mask(hp.mask1, p.arch.drop_rate1(), rng);
        hp.mask2.resize(p.arch.fc1_units, batch);
        fill_dropout_mask(hp.mask2, p.arch.drop_rate2(), rng);
        for (Eigen::Index b = 0; b < batch; ++b) hp.x.col(b) = source(b).cwiseProduct(hp.mask1.col(b));
    } else {
        hp.mask1.resize(0, 0);
        hp.mask2.resize(0, 0);
        for (Eigen::Index b = 0; b < batch; ++b) hp.x.col(b) = source(b);
    }
    hp.z1.resize(p.arch.fc1_units, batch);
    hp.z1.noalias() = p.fc1.w * hp.x;
    hp.z1.colwise() += p.fc1.b;
    hp.h.resize(p.arch.fc1_units, batch);
    hp.h.array() = hp.z1.array().max(0.0);
    if (mode == Mode::train) hp.h.array() *= hp.mask2.array();
    hp.logits.resize(p.arch.classes, batch);
    hp.logits.noalias() = p.fc2.w * hp.h;
    hp.logits.colwise() += p.fc2.b;
    hp.probs.resize(hp.logits.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const double mx = hp.logits.col(b).maxCoeff();
        hp.probs.col(b) = (hp.logits.col(b).array() - mx).exp();
        hp.probs.col(b) /= hp.probs.col(b).sum();
    }
}

constexpr double kLogClamp = 1e-12;

double example_loss(double p1, double p0, int label) {
    return -std::log(std::max(label == 1 ? p1 : p0, kLogClamp));
}

/// Buffers reused across mini-batches.
struct Workspace {
    std::vector<ConvCache> caches;
    RMatrix features;
    HeadPass head;
    RMatrix dlogits;
    RMatrix dz1;
    RMatrix dfeat;
};

/// Returns mean batch loss; `grad` must be zero on entry. When conv layers
/// need no gradient, `features` holds precomputed conv outputs and the batch
/// is its columns listed in `columns`.
double batch_gradient(const CmnetParams& p, std::span<const ScmPlanes* const> inputs, std::span<const int> labels,
                      const RMatrix* features, std::span<const Eigen::Index> columns, Mode mode, RandomStream& rng,
                      bool conv_grads, CmnetParams& grad, Workspace& ws) {
    const auto batch = static_cast<Eigen::Index>(inputs.size());
    if (!features) {
        columns = {};
        if (ws.caches.size() < inputs.size()) ws.caches.resize(inputs.size());
        ws.features.resize(p.arch.flatten_len(), batch);
        for (Eigen::Index b = 0; b < batch; ++b) {
            conv_forward(p, *inputs[b], ws.caches[b]);
            ws.features.col(b) = ws.caches[b].features;
        }
        features = &ws.features;
    }

    HeadPass& hp = ws.head;
    head_forward(p, *features, columns, mode, rng, hp);

    double total = 0;
    ws.dlogits = hp.probs;
    for (Eigen::Index b = 0; b < batch; ++b) {
        const int y = labels[b];
        total += example_loss(hp.probs(1, b), hp.probs(0, b), y);
        ws.dlogits(y, b) -= 1.0;
    }
    ws.dlogits /= static_cast<double>(batch);

    grad.fc2.w.noalias() += ws.dlogits * hp.h.transpose();
    grad.fc2.b += ws.dlogits.rowwise().sum();
    ws.dz1.resize(p.arch.fc1_units, batch);
    ws.dz1.noalias() = p.fc2.w.transpose() * ws.dlogits;
    if (mode == Mode::train) ws.dz1.array() *= hp.mask2.array();
    ws.dz1 = (hp.z1.array() > 0.0).select(ws.dz1, 0.0);
    grad.fc1.w.noalias() += ws.dz1 * hp.x.transpose();
    grad.fc1.b += ws.dz1.rowwise().sum();

    if (conv_grads) {
        if (features != &ws.features) throw std::logic_error("batch_gradient: conv gradients need the conv caches");
        ws.dfeat.resize(p.arch.flatten_len(), batch);
        ws.dfeat.noalias() = p.fc1.w.transpose() * ws.dz1;
        if (mode == Mode::train) ws.dfeat.array() *= hp.mask1.array();
        for (Eigen::Index b = 0; b < batch; ++b) conv_backward(p, *inputs[b], ws.caches[b], ws.dfeat.col(b), grad);
    }
    return total / static_cast<double>(batch);
}

}  // namespace

RVector conv_features(const CmnetParams& params, const ScmPlanes& input) {
    thread_local ConvCache cache;
    conv_forward(params, input, cache);
    return cache.features;
}

namespace {

HeadPass single_pass(const CmnetParams& params, const ScmPlanes& input, Mode mode, RandomStream& rng) {
    RMatrix feat = conv_features(params, input);
    HeadPass hp;
    head_forward(params, feat, {}, mode, rng, hp);
    return hp;
}

}  // namespace

Scores forward(const CmnetParams& params, const ScmPlanes& input, Mode mode, RandomStream& rng) {
    const HeadPass hp = single_pass(params, input, mode, rng);
    return {hp.probs(1, 0), hp.probs(0, 0)};
}

Scores forward(const CmnetParams& params, const ScmPlanes& input) {
    RandomStream unused(0);
    return forward(params, input, Mode::eval, unused);
}

Logits forward_logits(const CmnetParams& params, const ScmPlanes& input) {
    RandomStream unused(0);
    const HeadPass hp = single_pass(params, input, Mode::eval, unused);
    return {hp.logits(1, 0), hp.logits(0, 0)};
}

double loss(std::span<const Scores> scores, std::span<const int> labels) {
    if (scores.empty() || scores.size() != labels.size())
        throw ConfigError("loss: batch must be nonempty and match the label count");
    double total = 0;
    for (std::size_t k = 0; k < scores.size(); ++k) total += example_loss(scores[k].p1, scores[k].p0, labels[k]);
    return total / static_cast<double>(scores.size());
}

Gradients backward(const CmnetParams& params, std::span<const ScmExample> batch, Mode mode, RandomStream& rng) {
    if (batch.empty()) throw ConfigError("backward: empty batch");
    std::vector<const ScmPlanes*> inputs;
    std::vector<int> labels;
    for (const auto& e : batch) {
        if (e.label != 0 && e.label != 1) throw ConfigError("backward: labels must be 0 or 1");
        inputs.push_back(&e.planes);
        labels.push_back(e.label);
    }
    Gradients g{CmnetParams::zeros(params.arch), 0.0};
    Workspace ws;
    g.loss = batch_gradient(params, inputs, labels, nullptr, {}, mode, rng, true, g.grad, ws);
    return g;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
        throw ConfigError("train: learning_rate must be finite and non-negative");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0))
        throw ConfigError("train: invalid optimizer moments");
}

TrainResult train(CmnetParams params, const Dataset& data, const TrainConfig& config) {
    config.validate();
    params.arch.validate();
    if (data.examples.empty()) throw ConfigError("train: empty dataset");
    for (const auto& e : data.examples) {
        if (e.label != 0 && e.label != 1) throw ConfigError("train: labels must be 0 or 1");
        check_input(params.arch, e.planes);
    }

    RandomStream rng(config.seed);
    const std::size_t count = data.examples.size();
    const bool frozen = config.freeze_conv;

    // Frozen conv layers are a fixed map, so their output is computed once.
    RMatrix all_features;
    if (frozen) {
        all_features.resize(params.arch.flatten_len(), static_cast<Eigen::Index>(count));
        for (std::size_t k = 0; k < count; ++k)
            all_features.col(static_cast<Eigen::Index>(k)) = conv_features(params, data.examples[k].planes);
    }

    CmnetParams grad = CmnetParams::zeros(params.arch);
    CmnetParams m1 = grad, m2 = grad;
    auto ptensors = tensors(params);
    auto gtensors = tensors(grad);
    auto m1tensors = tensors(m1);
    auto m2tensors = tensors(m2);
    long step = 0;

    TrainResult result;
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const ScmPlanes*> inputs;
    std::vector<int> labels;
    std::vector<Eigen::Index> columns;
    Workspace ws;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < count; start += config.batch_size) {
            const std::size_t end = std::min(count, start + static_cast<std::size_t>(config.batch_size));
            inputs.clear();
            labels.clear();
            columns.clear();
            for (std::size_t j = start; j < end; ++j) {
                const auto& e = data.examples[order[j]];
                inputs.push_back(&e.planes);
                labels.push_back(e.label);
                columns.push_back(static_cast<Eigen::Index>(order[j]));
            }
            for (auto& t : gtensors) std::fill(t.data, t.data + t.size, 0.0);
            const double l = batch_gradient(params, inputs, labels, frozen ? &all_features : nullptr, columns,
                                            Mode::train, rng, !frozen, grad, ws);
            epoch_loss += l * static_cast<double>(end - start);

            ++step;
            const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t t = 0; t < ptensors.size(); ++t) {
                if (frozen && ptensors[t].conv) continue;
                const auto n = static_cast<Eigen::Index>(ptensors[t].size);
                if (config.optimizer == Optimizer::sgd) {
                    Eigen::Map<Eigen::ArrayXd>(ptensors[t].data, n) -=
                        config.learning_rate * Eigen::Map<const Eigen::ArrayXd>(gtensors[t].data, n);
                    continue;
                }
                Eigen::Map<Eigen::ArrayXd> w(ptensors[t].data, n);
                Eigen::Map<const Eigen::ArrayXd> g(gtensors[t].data, n);
                Eigen::Map<Eigen::ArrayXd> m(m1tensors[t].data, n);
                Eigen::Map<Eigen::ArrayXd> v(m2tensors[t].data, n);
                m = config.beta1 * m + (1.0 - config.beta1) * g;
                v = config.beta2 * v + (1.0 - config.beta2) * g.square();
                w -= (config.learning_rate / bc1) * m / ((v / bc2).sqrt() + config.epsilon);
            }
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(count));
    }
    if (!params.all_finite()) throw NumericalError("train: parameters diverged to non-finite values");
    result.final_epoch_loss = result.epoch_losses.back();
    result.params = std::move(params);
    return result;
}

}  // namespace ambc
