#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ambc/cmnet.hpp"
#include "ambc/errors.hpp"

namespace ambc {
namespace {

constexpr const char* kHeader = "ambc-cmnet-model";
constexpr int kVersion = 1;

void append_double(std::string& out, double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
}

class Tokens {
public:
    explicit Tokens(const std::string& text) : text_(text) {}

    std::string_view next(const char* what) {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ >= text_.size()) throw FormatError(std::string("model file truncated while reading ") + what);
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        return std::string_view(text_).substr(start, pos_ - start);
    }

    /// Rest of the current line, trimmed.
    std::string line() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
        std::string s = text_.substr(start, pos_ - start);
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
        return s;
    }

    long integer(const char* what) {
        const auto tok = next(what);
        long v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
            throw FormatError(std::string("model file: bad integer for ") + what);
        return v;
    }

    double real(const char* what) {
        const auto tok = next(what);
        double v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
            throw FormatError(std::string("model file: bad number for ") + what);
        return v;
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_params(const CmnetParams& params, const std::map<std::string, std::string>& meta) {
    const CmnetArch& a = params.arch;
    std::ostringstream head;
    head << kHeader << " " << kVersion << "\n"
         << "input_dim " << a.input_dim << "\n"
         << "in_channels " << a.in_channels << "\n"
         << "conv1_filters " << a.conv1_filters << "\n"
         << "conv2_filters " << a.conv2_filters << "\n"
         << "kernel " << a.kernel << "\n"
         << "pool " << a.pool << "\n"
         << "fc1_units " << a.fc1_units << "\n"
         << "classes " << a.classes << "\n";
    std::string out = head.str();
    out += "dropout1 ";
    append_double(out, a.dropout1);
    out += "\ndropout2 ";
    append_double(out, a.dropout2);
    out += "\ndropout_as_keep ";
    out += a.dropout_as_keep ? "1" : "0";
    out += "\npadding ";
    out += to_string(a.padding);
    out += "\n";
    for (const auto& [k, v] : meta) {
        if (k.empty() || k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw ConfigError("serialize_params: meta keys must be single tokens and values single lines");
        out += "meta " + k + " " + v + "\n";
    }

    CmnetParams copy = params;
    for (const auto& t : tensors(copy)) {
        out += "tensor " + t.name + " " + std::to_string(t.shape.size());
        for (int d : t.shape) out += " " + std::to_string(d);
        out += "\n";
        for (std::size_t i = 0; i < t.size; ++i) {
            if (i) out += ' ';
            append_double(out, t.data[i]);
        }
        out += "\n";
    }
    out += "end\n";
    return out;
}

CmnetParams deserialize_params(const std::string& text, std::map<std::string, std::string>* meta) {
    Tokens tok(text);
    if (tok.next("header") != kHeader) throw FormatError("not a cmnet model file");
    const long version = tok.integer("version");
    if (version != kVersion) throw FormatError("unsupported model file version " + std::to_string(version));

    CmnetArch a;
    auto expect = [&](const char* key) {
        if (tok.next(key) != key) throw FormatError(std::string("model file: expected field ") + key);
    };
    expect("input_dim");
    a.input_dim = static_cast<int>(tok.integer("input_dim"));
    expect("in_channels");
    a.in_channels = static_cast<int>(tok.integer("in_channels"));
    expect("conv1_filters");
    a.conv1_filters = static_cast<int>(tok.integer("conv1_filters"));
    expect("conv2_filters");
    a.conv2_filters = static_cast<int>(tok.integer("conv2_filters"));
    expect("kernel");
    a.kernel = static_cast<int>(tok.integer("kernel"));
    expect("pool");
    a.pool = static_cast<int>(tok.integer("pool"));
    expect("fc1_units");
    a.fc1_units = static_cast<int>(tok.integer("fc1_units"));
    expect("classes");
    a.classes = static_cast<int>(tok.integer("classes"));
    expect("dropout1");
    a.dropout1 = tok.real("dropout1");
    expect("dropout2");
    a.dropout2 = tok.real("dropout2");
    expect("dropout_as_keep");
    a.dropout_as_keep = tok.integer("dropout_as_keep") != 0;
    expect("padding");
    try {
        a.padding = parse_padding(tok.next("padding"));
        a.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("model file: invalid architecture: ") + e.what());
    }

    CmnetParams p = CmnetParams::zeros(a);
    auto refs = tensors(p);
    std::string_view word = tok.next("tensor");
    while (word == "meta") {
        std::string key(tok.next("meta key"));
        std::string value = tok.line();
        if (meta) (*meta)[key] = value;
        word = tok.next("tensor");
    }
    for (auto& t : refs) {
        if (word != "tensor") throw FormatError("model file: expected tensor " + t.name);
        if (tok.next("tensor name") != t.name) throw FormatError("model file: expected tensor " + t.name);
        const long rank = tok.integer("rank");
        if (rank != static_cast<long>(t.shape.size())) throw FormatError("model file: rank mismatch in " + t.name);
        for (int d : t.shape)
            if (tok.integer("shape") != d) throw FormatError("model file: shape mismatch in " + t.name);
        for (std::size_t i = 0; i < t.size; ++i) t.data[i] = tok.real(t.name.c_str());
        word = tok.next("tensor");
    }
    if (word != "end") throw FormatError("model file: missing end marker");
    if (!p.all_finite()) throw FormatError("model file: non-finite parameter values");
    return p;
}

void save_params(const CmnetParams& params, const std::filesystem::path& path,
                 const std::map<std::string, std::string>& meta) {
    const std::string text = serialize_params(params, meta);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

CmnetParams load_params(const std::filesystem::path& path, std::map<std::string, std::string>* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return deserialize_params(ss.str(), meta);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

CmnetParams load_params(const std::filesystem::path& path, const CmnetArch& expected) {
    CmnetParams p = load_params(path);
    if (!(p.arch == expected))
        throw FormatError(path.string() + ": architecture mismatch (file has input_dim " +
                          std::to_string(p.arch.input_dim) + ", run expects " + std::to_string(expected.input_dim) +
                          ")");
    return p;
}

}  // namespace ambc
