#include "gancircle/models.hpp"

#include <cmath>
#include <stdexcept>

namespace gancircle {

using ad::Value;

Mode parse_mode(const std::string& s) {
  if (s == "supervised") return Mode::supervised;
  if (s == "semi") return Mode::semi;
  if (s == "unsupervised") return Mode::unsupervised;
  throw std::invalid_argument("unknown mode: " + s);
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::supervised: return "supervised";
    case Mode::semi: return "semi";
    case Mode::unsupervised: return "unsupervised";
  }
  return "?";
}

void GeneratorConfig::validate() const {
  for (int f : feature_filters)
    if (f <= 0) throw std::invalid_argument("GeneratorConfig: non-positive feature filter count");
  for (int f : {recon_filters.a1, recon_filters.b1, recon_filters.b2, recon_filters.c1,
                recon_filters.c2, recon_filters.output})
    if (f <= 0) throw std::invalid_argument("GeneratorConfig: non-positive recon filter count");
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0))
    throw std::invalid_argument("GeneratorConfig: dropout_keep must be in (0,1], got " +
                                std::to_string(dropout_keep));
  if (upscale_factor != 2)
    throw std::invalid_argument("GeneratorConfig: only x2 up-scaling is supported");
}

GeneratorConfig make_generator_config(Direction dir, Mode mode) {
  GeneratorConfig cfg;
  cfg.direction = dir;
  cfg.mode = mode;
  cfg.use_bicubic_skip = (dir == Direction::G && mode != Mode::unsupervised);
  return cfg;
}

std::array<int, 12> feature_strides(const GeneratorConfig& cfg) {
  std::array<int, 12> s;
  s.fill(1);
  if (cfg.mode == Mode::unsupervised) {
    s[0] = 2;  // both G and F
  } else if (cfg.direction == Direction::F) {
    s[0] = 2;
    s[1] = 2;
  }
  return s;
}

void DiscriminatorConfig::validate() const {
  for (int f : conv_filters)
    if (f <= 0) throw std::invalid_argument("DiscriminatorConfig: non-positive filter count");
  if (kernel_size <= 0 || fc_units <= 0)
    throw std::invalid_argument("DiscriminatorConfig: non-positive layer size");
  if (input_hw <= 0 || input_hw % 16 != 0)
    throw std::invalid_argument("DiscriminatorConfig: input_hw must be a positive multiple of 16");
}

// ------------------------------------------------------------------ ParamSet

Value ParamSet::add(std::string id, Shape shape, InitKind init, double init_std) {
  ParamEntry e;
  e.id = std::move(id);
  e.value = ad::leaf(Tensor::zeros(shape), /*requires_grad=*/true);
  e.init = init;
  e.init_std = init_std;
  entries_.push_back(e);
  return entries_.back().value;
}

Value ParamSet::find(const std::string& id) const {
  for (const auto& e : entries_)
    if (e.id == id) return e.value;
  throw std::out_of_range("no parameter named " + id);
}

std::int64_t ParamSet::total_parameters() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.value->val.numel();
  return n;
}

std::int64_t count_parameters(const ParamSet& params) { return params.total_parameters(); }

void init_weights(ParamSet& params, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& e : params.entries()) {
    auto& v = e.value->val.v;
    switch (e.init) {
      case InitKind::gaussian:
        for (double& x : v) x = rng.gaussian(0.0, e.init_std);
        break;
      case InitKind::zeros:
        for (double& x : v) x = 0.0;
        break;
      case InitKind::ones:
        for (double& x : v) x = 1.0;
        break;
    }
  }
}

namespace {

// std = sqrt(2/m), m = fs^2 * n_f with n_f the layer's filter count
double he_std(int fs, int n_filters) { return std::sqrt(2.0 / (fs * fs * n_filters)); }

std::string idx2(int i) { return (i < 10 ? "0" : "") + std::to_string(i); }

struct ConvLayer {
  Value w, b;
};

ConvLayer add_conv(ParamSet& ps, const std::string& base, int c_in, int c_out, int k) {
  ConvLayer l;
  l.w = ps.add(base + ".weight", Shape(c_out, c_in, k, k), InitKind::gaussian, he_std(k, c_out));
  l.b = ps.add(base + ".bias", Shape(1, c_out, 1, 1), InitKind::zeros, 0.0);
  return l;
}

Value conv_bias(const Value& x, const ConvLayer& l, ad::ConvGeom geom) {
  Value y = ad::conv2d(x, l.w, geom);
  return ad::add(y, ad::broadcast_to(l.b, y->shape()));
}

Value draw_dropout_mask(const Shape& s, double keep, Rng& rng) {
  Tensor m(s);
  double inv = 1.0 / keep;
  for (double& x : m.v) x = rng.uniform() < keep ? inv : 0.0;
  return ad::constant(std::move(m));
}

}  // namespace

// ----------------------------------------------------------------- Generator

Generator::Generator(GeneratorConfig cfg, std::uint64_t seed, std::string name)
    : cfg_(cfg), name_(std::move(name)) {
  cfg_.validate();
  int c_prev = 1;
  for (int i = 0; i < 12; ++i) {
    add_conv(params_, name_ + ".feat." + idx2(i + 1) + ".conv", c_prev, cfg_.feature_filters[i], 3);
    c_prev = cfg_.feature_filters[i];
  }
  int c_cat = 0;
  for (int f : cfg_.feature_filters) c_cat += f;
  const auto& rf = cfg_.recon_filters;
  add_conv(params_, name_ + ".recon.a1.conv", c_cat, rf.a1, 1);
  add_conv(params_, name_ + ".recon.b1.conv", c_cat, rf.b1, 1);
  add_conv(params_, name_ + ".recon.b2.conv", rf.b1, rf.b2, 3);
  add_conv(params_, name_ + ".recon.c1.conv", c_cat, rf.c1, 1);
  add_conv(params_, name_ + ".recon.c2.conv", rf.c1, rf.c2, 3);
  int c_merge = rf.a1 + rf.b2 + rf.c2;
  // transposed conv keeps the channel count; 4x4 stride 2 gives exactly x2
  params_.add(name_ + ".recon.up.weight", Shape(c_merge, c_merge, 4, 4), InitKind::gaussian,
              he_std(4, c_merge));
  params_.add(name_ + ".recon.up.bias", Shape(1, c_merge, 1, 1), InitKind::zeros, 0.0);
  add_conv(params_, name_ + ".recon.out.conv", c_merge, rf.output, 3);
  init_weights(params_, seed);
}

int Generator::downsample_divisor() const {
  int d = 1;
  for (int s : feature_strides(cfg_)) d *= s;
  return d;
}

std::pair<std::int64_t, std::int64_t> Generator::output_hw(std::int64_t h, std::int64_t w) const {
  int d = downsample_divisor();
  return {h / d * 2, w / d * 2};
}

void Generator::check_input(std::int64_t h, std::int64_t w) const {
  int d = downsample_divisor();
  if (h % d != 0)
    throw std::invalid_argument(name_ + ": input height " + std::to_string(h) +
                                " not divisible by stride product " + std::to_string(d));
  if (w % d != 0)
    throw std::invalid_argument(name_ + ": input width " + std::to_string(w) +
                                " not divisible by stride product " + std::to_string(d));
  if (h < 4 || w < 4)
    throw std::invalid_argument(name_ + ": input " + std::to_string(h) + "x" + std::to_string(w) +
                                " too small");
}

Value Generator::forward(const Value& input, bool training, Rng* rng) const {
  const Shape& in_shape = input->shape();
  if (in_shape.c() != 1)
    throw std::invalid_argument(name_ + ": expected 1 input channel, got " +
                                std::to_string(in_shape.c()));
  check_input(in_shape.h(), in_shape.w());
  bool use_dropout = training && cfg_.dropout_keep < 1.0;
  if (use_dropout && rng == nullptr)
    throw std::logic_error(name_ + ": training forward needs an RNG for dropout");

  auto strides = feature_strides(cfg_);
  ad::ConvGeom same1{1, 1, 1, 1, 1};
  Value x = input;
  std::vector<Value> taps;
  for (int i = 0; i < 12; ++i) {
    ad::ConvGeom g{strides[i], 1, 1, 1, 1};
    ConvLayer l{params_.entries()[2 * i].value, params_.entries()[2 * i + 1].value};
    x = conv_bias(x, l, g);
    x = ad::leaky_relu(x, cfg_.leaky_slope);
    if (use_dropout) x = ad::apply_mask(x, draw_dropout_mask(x->shape(), cfg_.dropout_keep, *rng));
    taps.push_back(x);
  }
  // blocks upstream of a later stride run at a larger resolution; pool them
  // down so the dense skip concat lines up
  std::int64_t hN = taps.back()->shape().h(), wN = taps.back()->shape().w();
  for (auto& t : taps)
    while (t->shape().h() > hN || t->shape().w() > wN) t = ad::avg_pool2(t);
  Value cat = ad::concat_ch(taps);

  auto layer = [&](const char* id) {
    return ConvLayer{params_.find(name_ + std::string(id) + ".weight"),
                     params_.find(name_ + std::string(id) + ".bias")};
  };
  ad::ConvGeom g1x1{1, 0, 0, 0, 0};
  Value a1 = ad::leaky_relu(conv_bias(cat, layer(".recon.a1.conv"), g1x1), cfg_.leaky_slope);
  Value b1 = ad::leaky_relu(conv_bias(cat, layer(".recon.b1.conv"), g1x1), cfg_.leaky_slope);
  Value b2 = ad::leaky_relu(conv_bias(b1, layer(".recon.b2.conv"), same1), cfg_.leaky_slope);
  Value c1 = ad::leaky_relu(conv_bias(cat, layer(".recon.c1.conv"), g1x1), cfg_.leaky_slope);
  Value c2 = ad::leaky_relu(conv_bias(c1, layer(".recon.c2.conv"), same1), cfg_.leaky_slope);
  Value merged = ad::concat_ch({a1, b2, c2});

  ad::ConvGeom gup{2, 1, 1, 1, 1};
  Value up = ad::conv2d_transpose(merged, params_.find(name_ + ".recon.up.weight"), gup,
                                  merged->shape().h() * 2, merged->shape().w() * 2);
  up = ad::add(up, ad::broadcast_to(params_.find(name_ + ".recon.up.bias"), up->shape()));
  up = ad::leaky_relu(up, cfg_.leaky_slope);

  Value out = conv_bias(up, layer(".recon.out.conv"), same1);  // residual, no activation
  if (cfg_.use_bicubic_skip) out = ad::add(out, ad::bicubic_up2(input));
  return out;
}

// -------------------------------------------------------------------- Critic

Critic::Critic(DiscriminatorConfig cfg, std::uint64_t seed, std::string name)
    : cfg_(cfg), name_(std::move(name)) {
  cfg_.validate();
  int c_prev = 1;
  std::int64_t hw = cfg_.input_hw;
  for (int i = 0; i < 8; ++i) {
    int c_out = cfg_.conv_filters[i];
    std::string base = name_ + ".conv." + idx2(i + 1);
    add_conv(params_, base, c_prev, c_out, cfg_.kernel_size);
    params_.add(base + ".inorm.gamma", Shape(1, c_out, 1, 1), InitKind::ones, 0.0);
    params_.add(base + ".inorm.beta", Shape(1, c_out, 1, 1), InitKind::zeros, 0.0);
    c_prev = c_out;
    if (i % 2 == 1) hw /= 2;  // stride alternates 1,2
  }
  flat_dim_ = c_prev * hw * hw;
  params_.add(name_ + ".fc1.weight", Shape(cfg_.fc_units, flat_dim_, 1, 1), InitKind::gaussian,
              he_std(1, cfg_.fc_units));
  params_.add(name_ + ".fc1.bias", Shape(1, cfg_.fc_units, 1, 1), InitKind::zeros, 0.0);
  params_.add(name_ + ".fc2.weight", Shape(1, cfg_.fc_units, 1, 1), InitKind::gaussian,
              he_std(1, 1));
  params_.add(name_ + ".fc2.bias", Shape(1, 1, 1, 1), InitKind::zeros, 0.0);
  init_weights(params_, seed);
}

void Critic::check_input(std::int64_t h, std::int64_t w) const {
  if (h != cfg_.input_hw)
    throw std::invalid_argument(name_ + ": input height " + std::to_string(h) +
                                " does not match the " + std::to_string(cfg_.input_hw) +
                                " the head was built for");
  if (w != cfg_.input_hw)
    throw std::invalid_argument(name_ + ": input width " + std::to_string(w) +
                                " does not match the " + std::to_string(cfg_.input_hw) +
                                " the head was built for");
}

Value Critic::forward(const Value& input) const {
  const Shape& in_shape = input->shape();
  if (in_shape.c() != 1)
    throw std::invalid_argument(name_ + ": expected 1 input channel, got " +
                                std::to_string(in_shape.c()));
  check_input(in_shape.h(), in_shape.w());

  Value x = input;
  int k = cfg_.kernel_size;
  for (int i = 0; i < 8; ++i) {
    int stride = (i % 2 == 0) ? 1 : 2;
    // tensorflow-style SAME padding: total k-1 at stride 1, k-2 at stride 2
    ad::ConvGeom g = stride == 1 ? ad::ConvGeom{1, (k - 1) / 2, k / 2, (k - 1) / 2, k / 2}
                                 : ad::ConvGeom{2, (k - 2) / 2, (k - 1) / 2, (k - 2) / 2, (k - 1) / 2};
    std::string base = name_ + ".conv." + idx2(i + 1);
    Value y = ad::conv2d(x, params_.find(base + ".weight"), g);
    y = ad::add(y, ad::broadcast_to(params_.find(base + ".bias"), y->shape()));
    y = ad::instance_norm(y, params_.find(base + ".inorm.gamma"), params_.find(base + ".inorm.beta"));
    x = ad::leaky_relu(y, cfg_.leaky_slope);
  }
  Value flat = ad::reshape(x, Shape(in_shape.n(), flat_dim_, 1, 1));
  ad::ConvGeom g1{1, 0, 0, 0, 0};
  Value h = ad::conv2d(flat, params_.find(name_ + ".fc1.weight"), g1);
  h = ad::add(h, ad::broadcast_to(params_.find(name_ + ".fc1.bias"), h->shape()));
  h = ad::leaky_relu(h, cfg_.leaky_slope);
  Value s = ad::conv2d(h, params_.find(name_ + ".fc2.weight"), g1);
  s = ad::add(s, ad::broadcast_to(params_.find(name_ + ".fc2.bias"), s->shape()));
  return s;  // (N,1,1,1), no squashing
}

}  // namespace gancircle
