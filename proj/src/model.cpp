#include "filterloss/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "filterloss/error.hpp"
#include "filterloss/kernels.hpp"
#include "filterloss/random.hpp"

namespace filterloss {

void ModelSpec::validate() const {
  require(input_dim >= 1 && num_classes >= 1, ErrorKind::InvalidArgument,
          "model input_dim and num_classes must be >= 1");
  require(std::ranges::all_of(hidden, [](std::size_t w) { return w >= 1; }),
          ErrorKind::InvalidArgument, "hidden widths must be >= 1");
  if (conv_stem) {
    require(input_dim >= kConvKernel, ErrorKind::InvalidArgument,
            "conv stem needs input_dim >= " + std::to_string(kConvKernel));
    require(conv_channels >= 1, ErrorKind::InvalidArgument, "conv_channels must be >= 1");
  }
}

std::size_t ModelSpec::conv_length() const {
  return conv_stem ? (input_dim - kConvKernel) / kConvStride + 1 : 0;
}

std::size_t ModelSpec::trunk_input_dim() const {
  return conv_stem ? conv_channels * conv_length() : input_dim;
}

const ParamGroup& ModelParams::group(std::string_view name) const {
  for (const auto& g : groups) {
    if (g.name == name) return g;
  }
  fail(ErrorKind::InvalidArgument, "no parameter group named '" + std::string(name) + "'");
}

std::vector<bool> ModelParams::trainable_flags() const {
  std::vector<bool> out;
  for (const auto& g : groups) out.push_back(g.trainable);
  return out;
}

bool ModelParams::all_finite() const {
  return std::ranges::all_of(groups, [](const ParamGroup& g) {
    return g.weight.all_finite() &&
           std::ranges::all_of(g.bias, [](double v) { return std::isfinite(v); });
  });
}

namespace {

ParamGroup make_group(std::string name, std::size_t rows, std::size_t cols, std::size_t fan_in,
                      Rng& rng) {
  ParamGroup g{std::move(name), Matrix(rows, cols), std::vector<double>(cols, 0.0), true};
  const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> uniform(-scale, scale);
  for (double& w : g.weight.values()) w = uniform(rng);
  return g;
}

bool is_conv(const ParamGroup& g) { return g.name == "conv"; }
bool is_hidden(const ParamGroup& g) { return g.name.starts_with("hidden"); }

void relu_inplace(Matrix& m) {
  for (double& v : m.values()) v = std::max(v, 0.0);
}

Matrix dense(const Matrix& x, const ParamGroup& g) {
  Matrix out(x.rows(), g.weight.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto dst = out.row(r);
    std::ranges::copy(g.bias, dst.begin());
    const auto src = x.row(r);
    for (std::size_t k = 0; k < src.size(); ++k) {
      if (src[k] != 0.0) kernels::axpy(src[k], g.weight.row(k), dst);
    }
  }
  return out;
}

Matrix conv_pre(const Matrix& x, const ParamGroup& g, std::size_t length) {
  const std::size_t channels = g.weight.cols();
  Matrix out(x.rows(), channels * length);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      for (std::size_t t = 0; t < length; ++t) {
        double acc = g.bias[ch];
        for (std::size_t k = 0; k < kConvKernel; ++k) {
          acc += src[kConvStride * t + k] * g.weight(k, ch);
        }
        out(r, ch * length + t) = acc;
      }
    }
  }
  return out;
}

void check_width(const ModelParams& params, const Matrix& features) {
  require(features.cols() == params.spec.input_dim, ErrorKind::ShapeMismatch,
          "features have width " + std::to_string(features.cols()) + ", model expects " +
              std::to_string(params.spec.input_dim));
}

}  // namespace

ModelParams init_model(const ModelSpec& spec) {
  spec.validate();
  Rng rng(spec.init_seed);
  ModelParams params{spec, {}};
  if (spec.conv_stem) {
    params.groups.push_back(make_group("conv", kConvKernel, spec.conv_channels, kConvKernel, rng));
  }
  std::size_t width = spec.trunk_input_dim();
  for (std::size_t h = 0; h < spec.hidden.size(); ++h) {
    params.groups.push_back(
        make_group("hidden" + std::to_string(h), width, spec.hidden[h], width, rng));
    width = spec.hidden[h];
  }
  params.groups.push_back(make_group("output", width, spec.num_classes, width, rng));
  return params;
}

void reinitialize_head(ModelParams& params, std::size_t num_classes, std::uint64_t seed) {
  require(num_classes >= 1, ErrorKind::InvalidArgument, "head needs >= 1 class");
  require(!params.groups.empty() && params.groups.back().name == "output",
          ErrorKind::InvalidArgument, "model has no output group");
  const std::size_t width = params.groups.back().weight.rows();
  Rng rng(derive_seed(seed, "head"));
  params.groups.back() = make_group("output", width, num_classes, width, rng);
  params.spec.num_classes = num_classes;
}

ForwardResult forward(const ModelParams& params, const Matrix& features) {
  check_width(params, features);
  ForwardResult result;
  Matrix current = features;
  for (const ParamGroup& g : params.groups) {
    result.cache.inputs.push_back(current);
    Matrix pre = is_conv(g) ? conv_pre(current, g, params.spec.conv_length()) : dense(current, g);
    result.cache.pre.push_back(pre);
    if (is_conv(g)) {
      relu_inplace(pre);
      current = std::move(pre);
    } else if (is_hidden(g)) {
      relu_inplace(pre);
      if (params.spec.residual && g.weight.rows() == g.weight.cols()) {
        for (std::size_t i = 0; i < pre.size(); ++i) pre.values()[i] += current.values()[i];
      }
      current = std::move(pre);
    } else {
      current = std::move(pre);
    }
  }
  result.logits = std::move(current);
  return result;
}

Matrix predict_logits(const ModelParams& params, const Matrix& features) {
  return forward(params, features).logits;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Matrix& grad_logits) {
  const std::size_t n_groups = params.groups.size();
  require(cache.inputs.size() == n_groups && cache.pre.size() == n_groups,
          ErrorKind::ShapeMismatch, "forward cache does not match the model");
  require(grad_logits.rows() == cache.inputs.front().rows() &&
              grad_logits.cols() == params.groups.back().weight.cols(),
          ErrorKind::ShapeMismatch, "logit gradient shape does not match the forward batch");

  Gradients grads;
  grads.groups.resize(n_groups);
  Matrix upstream = grad_logits;  // d loss / d output of the current group
  for (std::size_t gi = n_groups; gi-- > 0;) {
    const ParamGroup& g = params.groups[gi];
    const Matrix& input = cache.inputs[gi];
    const Matrix& pre = cache.pre[gi];
    GroupGradient& out = grads.groups[gi];
    out.weight = Matrix(g.weight.rows(), g.weight.cols());
    out.bias.assign(g.bias.size(), 0.0);

    Matrix dpre = upstream;
    if (is_conv(g) || is_hidden(g)) {
      for (std::size_t i = 0; i < dpre.size(); ++i) {
        if (pre.values()[i] <= 0.0) dpre.values()[i] = 0.0;
      }
    }

    if (is_conv(g)) {
      const std::size_t length = params.spec.conv_length();
      for (std::size_t r = 0; r < input.rows(); ++r) {
        const auto src = input.row(r);
        for (std::size_t ch = 0; ch < g.weight.cols(); ++ch) {
          for (std::size_t t = 0; t < length; ++t) {
            const double d = dpre(r, ch * length + t);
            if (d == 0.0) continue;
            out.bias[ch] += d;
            for (std::size_t k = 0; k < kConvKernel; ++k) {
              out.weight(k, ch) += d * src[kConvStride * t + k];
            }
          }
        }
      }
      break;  // the stem is always the first group
    }

    for (std::size_t r = 0; r < input.rows(); ++r) {
      const auto d = dpre.row(r);
      kernels::axpy(1.0, d, out.bias);
      const auto src = input.row(r);
      for (std::size_t k = 0; k < src.size(); ++k) {
        if (src[k] != 0.0) kernels::axpy(src[k], d, out.weight.row(k));
      }
    }
    if (gi == 0) break;

    Matrix dinput(input.rows(), input.cols());
    for (std::size_t r = 0; r < input.rows(); ++r) {
      const auto d = dpre.row(r);
      for (std::size_t k = 0; k < input.cols(); ++k) dinput(r, k) = kernels::dot(d, g.weight.row(k));
    }
    if (is_hidden(g) && params.spec.residual && g.weight.rows() == g.weight.cols()) {
      for (std::size_t i = 0; i < dinput.size(); ++i) dinput.values()[i] += upstream.values()[i];
    }
    upstream = std::move(dinput);
  }
  return grads;
}

void sgd_step(ModelParams& params, const Gradients& grads, double learning_rate) {
  require(grads.groups.size() == params.groups.size(), ErrorKind::ShapeMismatch,
          "gradient structure does not match the model");
  require(std::isfinite(learning_rate) && learning_rate >= 0.0, ErrorKind::InvalidArgument,
          "learning rate must be finite and >= 0");
  for (std::size_t gi = 0; gi < params.groups.size(); ++gi) {
    const ParamGroup& g = params.groups[gi];
    const GroupGradient& d = grads.groups[gi];
    require(d.weight.rows() == g.weight.rows() && d.weight.cols() == g.weight.cols() &&
                d.bias.size() == g.bias.size(),
            ErrorKind::ShapeMismatch, "gradient shape mismatch in group '" + g.name + "'");
    if (!g.trainable) continue;
    require(d.weight.all_finite() &&
                std::ranges::all_of(d.bias, [](double v) { return std::isfinite(v); }),
            ErrorKind::NonFinite, "non-finite gradient in group '" + g.name + "'");
  }
  for (std::size_t gi = 0; gi < params.groups.size(); ++gi) {
    ParamGroup& g = params.groups[gi];
    if (!g.trainable) continue;
    kernels::axpy(-learning_rate, grads.groups[gi].weight.values(), g.weight.values());
    kernels::axpy(-learning_rate, grads.groups[gi].bias, g.bias);
  }
}

// ---- freezing --------------------------------------------------------------

namespace {

bool glob_match(std::string_view pattern, std::string_view text) {
  if (pattern.empty()) return text.empty();
  if (pattern.front() == '*') {
    for (std::size_t skip = 0; skip <= text.size(); ++skip) {
      if (glob_match(pattern.substr(1), text.substr(skip))) return true;
    }
    return false;
  }
  return !text.empty() && (pattern.front() == '?' || pattern.front() == text.front()) &&
         glob_match(pattern.substr(1), text.substr(1));
}

std::string_view trim_spaces(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

}  // namespace

void set_trainable(ModelParams& params, const std::function<bool(const ParamGroup&)>& predicate) {
  std::vector<bool> flags;
  for (const auto& g : params.groups) flags.push_back(predicate(g));
  require(std::ranges::any_of(flags, [](bool f) { return f; }), ErrorKind::InvalidArgument,
          "trainable pattern matches no parameter group");
  for (std::size_t i = 0; i < flags.size(); ++i) params.groups[i].trainable = flags[i];
}

void set_trainable(ModelParams& params, std::string_view pattern) {
  pattern = trim_spaces(pattern);
  if (pattern == "fine_tune") {
    std::string last;
    for (const auto& g : params.groups) {
      if (is_hidden(g) || (is_conv(g) && last.empty())) last = g.name;
    }
    set_trainable(params, [&](const ParamGroup& g) { return g.name == last || g.name == "output"; });
    return;
  }
  std::vector<std::string_view> globs;
  std::string_view rest = pattern;
  while (true) {
    const std::size_t comma = rest.find(',');
    globs.push_back(trim_spaces(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  try {
    set_trainable(params, [&](const ParamGroup& g) {
      return std::ranges::any_of(globs, [&](std::string_view p) { return glob_match(p, g.name); });
    });
  } catch (const Error& e) {
    throw e.with_context("pattern '" + std::string(pattern) + "'");
  }
}

// ---- persistence -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'F', 'L', 'M', 'O', 'D', 'E', 'L', '\0'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes_.append(s);
  }
  void raw(const char* data, std::size_t n) { bytes_.append(data, n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t count(std::size_t limit) {
    const std::uint64_t v = u64();
    require(v <= limit, ErrorKind::CorruptFile, "model file: implausible size field");
    return static_cast<std::size_t>(v);
  }
  std::string str() {
    const std::size_t len = count(remaining());
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    require(remaining() >= n, ErrorKind::CorruptFile, "model file is truncated");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u8(kModelFormatVersion);
  const ModelSpec& s = params.spec;
  w.u64(s.input_dim);
  w.u64(s.num_classes);
  w.u64(s.hidden.size());
  for (std::size_t width : s.hidden) w.u64(width);
  w.u8(s.residual ? 1 : 0);
  w.u8(s.conv_stem ? 1 : 0);
  w.u64(s.conv_channels);
  w.u64(s.init_seed);
  w.u64(params.groups.size());
  for (const ParamGroup& g : params.groups) {
    w.str(g.name);
    w.u64(g.weight.rows());
    w.u64(g.weight.cols());
    for (double v : g.weight.values()) w.f64(v);
    w.u64(g.bias.size());
    for (double v : g.bias) w.f64(v);
    w.u8(g.trainable ? 1 : 0);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    require(std::filesystem::exists(path), ErrorKind::MissingFile,
            "no such model file: " + path.string());
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  Reader r(buffer.str());

  require(r.raw(sizeof(kMagic)) == std::string(kMagic, sizeof(kMagic)), ErrorKind::CorruptFile,
          path.string() + " is not a model file");
  const std::uint8_t version = r.u8();
  require(version == kModelFormatVersion, ErrorKind::CorruptFile,
          "unsupported model format version " + std::to_string(version));

  const std::size_t limit = r.remaining();
  ModelParams params;
  ModelSpec& s = params.spec;
  s.input_dim = r.count(limit);
  s.num_classes = r.count(limit);
  s.hidden.resize(r.count(limit));
  for (std::size_t& width : s.hidden) width = r.count(limit);
  s.residual = r.u8() != 0;
  s.conv_stem = r.u8() != 0;
  s.conv_channels = r.count(limit);
  s.init_seed = r.u64();
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::CorruptFile, std::string("model header: ") + e.what());
  }

  // Shapes implied by the header.
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> expected;
  if (s.conv_stem) expected.push_back({"conv", {kConvKernel, s.conv_channels}});
  std::size_t width = s.trunk_input_dim();
  for (std::size_t h = 0; h < s.hidden.size(); ++h) {
    expected.push_back({"hidden" + std::to_string(h), {width, s.hidden[h]}});
    width = s.hidden[h];
  }
  expected.push_back({"output", {width, s.num_classes}});

  const std::size_t n_groups = r.count(limit);
  require(n_groups == expected.size(), ErrorKind::ShapeMismatch,
          "model file has " + std::to_string(n_groups) + " groups, header implies " +
              std::to_string(expected.size()));
  for (std::size_t gi = 0; gi < n_groups; ++gi) {
    ParamGroup g;
    g.name = r.str();
    const std::size_t rows = r.count(limit);
    const std::size_t cols = r.count(limit);
    const auto& [name, shape] = expected[gi];
    require(g.name == name && rows == shape.first && cols == shape.second,
            ErrorKind::ShapeMismatch,
            "group '" + g.name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                ", header implies '" + name + "' " + std::to_string(shape.first) + "x" +
                std::to_string(shape.second));
    require(rows * cols * 8 <= r.remaining(), ErrorKind::CorruptFile, "model file is truncated");
    std::vector<double> values(rows * cols);
    for (double& v : values) v = r.f64();
    g.weight = Matrix(rows, cols, std::move(values));
    const std::size_t bias_len = r.count(limit);
    require(bias_len == cols, ErrorKind::ShapeMismatch,
            "group '" + g.name + "' bias length does not match its width");
    g.bias.resize(bias_len);
    for (double& v : g.bias) v = r.f64();
    g.trainable = r.u8() != 0;
    params.groups.push_back(std::move(g));
  }
  require(r.remaining() == 0, ErrorKind::CorruptFile, "trailing bytes after model data");
  require(params.all_finite(), ErrorKind::CorruptFile, "model file holds non-finite values");
  return params;
}

}  // namespace filterloss
