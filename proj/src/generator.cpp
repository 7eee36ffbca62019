#include "pic/generator.h"

#include "le.h"
#include "pic/error.h"
#include "pic/rng.h"
#include "pic/tensor_io.h"

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

namespace pic {

namespace {

constexpr std::uint64_t StreamMapping = 0x6d6170;  // "map"
constexpr std::uint64_t StreamCalib = 0x63616c;    // "cal"
constexpr std::uint64_t StreamStats = 0x737461;    // "sta"
constexpr std::uint64_t StreamInvert = 0x696e76;   // "inv"
constexpr Index PhantomK = 8;
constexpr Index PhantomLayers = 4;
constexpr int StatsSamples = 10000;
constexpr int CalibSamples = 4096;

// Style values from the mapping network mostly fall in [-0.5, 2]; attribute ranges are
// pinned to that interval.
constexpr double SquashScale = 1.25;
constexpr double StyleLo = -0.5;
constexpr double StyleHi = 2.0;

struct AttributeRange
{
  double lo, hi;
  bool symmetric; // amplitude-like: value 0 at style 0, +-hi at the extremes
};

constexpr double HalfPi = std::numbers::pi / 2.0;

constexpr std::array<AttributeRange, slot::Count> Attributes{{
    // geometry
    {-0.04, 0.04, false},
    {-0.04, 0.04, false},
    {0.66, 0.78, false},
    {0.78, 0.90, false},
    {-0.12, 0.12, false},
    {0.07, 0.11, false},
    {0.08, 0.14, false},
    {-0.04, 0.04, false},
    // contrast
    {0.0, 0.08, false},
    {0.55, 0.95, false},
    {0.35, 0.75, false},
    {0.25, 0.85, false},
    {0.05, 0.95, false},
    {0.05, 0.95, false},
    {-0.25, 0.25, false},
    {0.5, 1.5, false},
    // structure
    {-0.40, -0.15, false},
    {-0.25, 0.20, false},
    {0.07, 0.16, false},
    {0.12, 0.28, false},
    {0.15, 0.40, false},
    {-0.25, 0.20, false},
    {0.07, 0.16, false},
    {0.12, 0.28, false},
    // texture
    {0.0, 0.06, true},
    {-0.5, 0.5, false},
    {1.0, 2.0, false},
    {-HalfPi, HalfPi, false},
    {0.0, 0.05, true},
    {1.07, 2.07, false},
    {1.5, 3.0, false},
    {-HalfPi, HalfPi, false},
}};

RangeEntry range_entry(AttributeRange const &a)
{
  if (a.symmetric) {
    return {0.0, a.hi, SquashScale};
  }
  double const tlo = std::tanh(StyleLo / SquashScale);
  double const thi = std::tanh(StyleHi / SquashScale);
  double const half = (a.hi - a.lo) / (thi - tlo);
  return {a.lo - half * tlo, half, SquashScale};
}

double leaky(double x, double slope) { return x >= 0.0 ? x : slope * x; }

double sigmoid(double z)
{
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double const e = std::exp(z);
  return e / (1.0 + e);
}

// pre-activations of the three mapping layers for a normalised input
std::array<std::vector<double>, 3> mapping_layers(GeneratorParams const &p, std::vector<double> const &zn)
{
  std::array<std::vector<double>, 3> pre;
  std::vector<double> h = zn;
  for (int l = 0; l < 3; l++) {
    pre[l].assign(static_cast<std::size_t>(p.k), 0.0);
    for (Index i = 0; i < p.k; i++) {
      double acc = p.biases[l][i];
      for (Index j = 0; j < p.k; j++) {
        acc += p.weights[l][i * p.k + j] * h[j];
      }
      pre[l][i] = acc;
    }
    h = pre[l];
    for (auto &x : h) {
      x = leaky(x, p.leak);
    }
  }
  return pre;
}

std::vector<double> normalise_rms(std::vector<double> z)
{
  double ss = 0.0;
  for (double x : z) {
    ss += x * x;
  }
  if (ss == 0.0) {
    return z;
  }
  double const rms = std::sqrt(ss / static_cast<double>(z.size()));
  for (auto &x : z) {
    x /= rms;
  }
  return z;
}

// Quantities shared by every pixel for one latent.
struct Frame
{
  PhantomLayout const &a;
  double C, S, s1, s2, gain;
  // per-region 1/tau in quadratic-form units: the edge is about tau wide in image coordinates
  double k0, k1, k2, ki1, ki2;
  double w1, c1, sn1, w2, c2, sn2; // texture angular frequency and direction
};

Frame make_frame(PhantomLayout const &a, double tau, double gain)
{
  using namespace slot;
  auto const &p = a.p;
  Frame f{a, std::cos(p[Theta]), std::sin(p[Theta]), 1.0 - p[Rim], 0.0, gain, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  f.s2 = f.s1 * (1.0 - p[Band]);
  // near the boundary 1 - q is about 2 d / r for distance d and radius r
  auto const mid = [](Index s) { return 0.5 * (Attributes[s].lo + Attributes[s].hi); };
  double const head = std::sqrt(mid(Ax) * mid(Ay));
  double const rim = head * (1.0 - mid(Rim));
  f.k0 = head / (2.0 * tau);
  f.k1 = rim / (2.0 * tau);
  f.k2 = rim * (1.0 - mid(Band)) / (2.0 * tau);
  f.ki1 = head * std::sqrt(mid(A1) * mid(B1)) / (2.0 * tau);
  f.ki2 = head * std::sqrt(mid(A2) * mid(B2)) / (2.0 * tau);
  f.w1 = std::numbers::pi * p[Freq1];
  f.c1 = std::cos(p[Orient1]);
  f.sn1 = std::sin(p[Orient1]);
  f.w2 = std::numbers::pi * p[Freq2];
  f.c2 = std::cos(p[Orient2]);
  f.sn2 = std::sin(p[Orient2]);
  return f;
}

struct PixelMasks
{
  double m0, m1, m2, mi1, mi2;
};

// Forward evaluation of one pixel at normalised coordinates (x, y). With Backward set,
// accumulates cot * d(out)/d(attribute) into grad.
template <bool Backward>
double pixel(Frame const &f, double x, double y, double cot, double *grad, PixelMasks *masks = nullptr)
{
  using namespace slot;
  auto const &p = f.a.p;
  double const dx = x - p[slot::Cx];
  double const dy = y - p[Cy];
  double const r1 = f.C * dx + f.S * dy;
  double const r2 = -f.S * dx + f.C * dy;
  double const u = r1 / p[Ax];
  double const v = r2 / p[Ay];
  double const vv = v - p[Offset];
  double const rho = u * u + vv * vv;

  double const q0 = u * u + v * v;
  double const q1 = rho / (f.s1 * f.s1);
  double const q2 = rho / (f.s2 * f.s2);
  double const eu1 = u - p[U1], ev1 = v - p[V1];
  double const eu2 = u - p[U2], ev2 = v - p[V2];
  double const qi1 = eu1 * eu1 / (p[A1] * p[A1]) + ev1 * ev1 / (p[B1] * p[B1]);
  double const qi2 = eu2 * eu2 / (p[A2] * p[A2]) + ev2 * ev2 / (p[B2] * p[B2]);

  double const m0 = sigmoid((1.0 - q0) * f.k0);
  double const m1 = sigmoid((1.0 - q1) * f.k1);
  double const m2 = sigmoid((1.0 - q2) * f.k2);
  double const mi1 = sigmoid((1.0 - qi1) * f.ki1);
  double const mi2 = sigmoid((1.0 - qi2) * f.ki2);
  if (masks) {
    *masks = {m0, m1, m2, mi1, mi2};
  }

  double const arg1 = f.w1 * (f.c1 * x + f.sn1 * y) + p[Phase1];
  double const arg2 = f.w2 * (f.c2 * x + f.sn2 * y) + p[Phase2];
  double const sin1 = std::sin(arg1);
  double const sin2 = std::sin(arg2);
  double const wave = p[Amp1] * sin1 + p[Amp2] * sin2;
  double const texture = p[TextureGain] * wave;
  double const e = p[Interior] + p[Shade] * rho + texture;

  double const v0 = p[Background];
  double const v1 = v0 + m0 * (p[RimLevel] - v0);
  double const v2 = v1 + m1 * (p[Cortex] - v1);
  double const v3 = v2 + m2 * (e - v2);
  double const v4 = v3 + mi1 * (p[Inclusion1] - v3);
  double const v5 = v4 + mi2 * (p[Inclusion2] - v4);
  double const out = sigmoid(f.gain * (v5 - 0.5));

  if constexpr (Backward) {
    double *g = grad;
    double const dv5 = cot * f.gain * out * (1.0 - out);
    g[Inclusion2] += dv5 * mi2;
    double const dmi2 = dv5 * (p[Inclusion2] - v4);
    double const dv4 = dv5 * (1.0 - mi2);
    g[Inclusion1] += dv4 * mi1;
    double const dmi1 = dv4 * (p[Inclusion1] - v3);
    double const dv3 = dv4 * (1.0 - mi1);
    double const de = dv3 * m2;
    double const dm2 = dv3 * (e - v2);
    double const dv2 = dv3 * (1.0 - m2);
    g[Cortex] += dv2 * m1;
    double const dm1 = dv2 * (p[Cortex] - v1);
    double const dv1 = dv2 * (1.0 - m1);
    g[RimLevel] += dv1 * m0;
    double const dm0 = dv1 * (p[RimLevel] - v0);
    g[Background] += dv1 * (1.0 - m0);

    g[Interior] += de;
    g[Shade] += de * rho;
    double drho = de * p[Shade];
    g[TextureGain] += de * wave;
    double const dwave = de * p[TextureGain];
    double const cos1 = std::cos(arg1);
    double const cos2 = std::cos(arg2);
    g[Amp1] += dwave * sin1;
    g[Amp2] += dwave * sin2;
    double const darg1 = dwave * p[Amp1] * cos1;
    double const darg2 = dwave * p[Amp2] * cos2;
    g[Phase1] += darg1;
    g[Phase2] += darg2;
    g[Freq1] += darg1 * std::numbers::pi * (f.c1 * x + f.sn1 * y);
    g[Freq2] += darg2 * std::numbers::pi * (f.c2 * x + f.sn2 * y);
    g[Orient1] += darg1 * f.w1 * (-f.sn1 * x + f.c1 * y);
    g[Orient2] += darg2 * f.w2 * (-f.sn2 * x + f.c2 * y);

    // d sigmoid((1 - q) k) / dq = -m (1 - m) k
    double const dq0 = -dm0 * m0 * (1.0 - m0) * f.k0;
    double const dq1 = -dm1 * m1 * (1.0 - m1) * f.k1;
    double const dq2 = -dm2 * m2 * (1.0 - m2) * f.k2;
    double const dqi1 = -dmi1 * mi1 * (1.0 - mi1) * f.ki1;
    double const dqi2 = -dmi2 * mi2 * (1.0 - mi2) * f.ki2;

    double du = 2.0 * u * dq0;
    double dv = 2.0 * v * dq0;
    drho += dq1 / (f.s1 * f.s1) + dq2 / (f.s2 * f.s2);
    double ds1 = -2.0 * rho / (f.s1 * f.s1 * f.s1) * dq1;
    double const ds2 = -2.0 * rho / (f.s2 * f.s2 * f.s2) * dq2;
    ds1 += ds2 * (1.0 - p[Band]);
    g[Band] += -ds2 * f.s1;
    g[Rim] += -ds1;

    double const a1sq = p[A1] * p[A1], b1sq = p[B1] * p[B1];
    double const a2sq = p[A2] * p[A2], b2sq = p[B2] * p[B2];
    double const tu1 = 2.0 * eu1 / a1sq * dqi1, tv1 = 2.0 * ev1 / b1sq * dqi1;
    double const tu2 = 2.0 * eu2 / a2sq * dqi2, tv2 = 2.0 * ev2 / b2sq * dqi2;
    du += tu1 + tu2;
    dv += tv1 + tv2;
    g[U1] -= tu1;
    g[V1] -= tv1;
    g[U2] -= tu2;
    g[V2] -= tv2;
    g[A1] += -2.0 * eu1 * eu1 / (a1sq * p[A1]) * dqi1;
    g[B1] += -2.0 * ev1 * ev1 / (b1sq * p[B1]) * dqi1;
    g[A2] += -2.0 * eu2 * eu2 / (a2sq * p[A2]) * dqi2;
    g[B2] += -2.0 * ev2 * ev2 / (b2sq * p[B2]) * dqi2;

    du += 2.0 * u * drho;
    double const dvv = 2.0 * vv * drho;
    dv += dvv;
    g[Offset] -= dvv;

    double const dr1 = du / p[Ax];
    double const dr2 = dv / p[Ay];
    g[Ax] += -u / p[Ax] * du;
    g[Ay] += -v / p[Ay] * dv;
    g[Theta] += dr1 * r2 - dr2 * r1;
    double const ddx = f.C * dr1 - f.S * dr2;
    double const ddy = f.S * dr1 + f.C * dr2;
    g[slot::Cx] -= ddx;
    g[Cy] -= ddy;
  }
  return out;
}

double coord_x(Index c, Index width) { return (2.0 * static_cast<double>(c) + 1.0) / static_cast<double>(width) - 1.0; }
double coord_y(Index r, Index height) { return (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(height) - 1.0; }

constexpr char SgenMagic[4] = {'S', 'G', 'E', 'N'};
constexpr std::uint32_t SgenVersion = 1;

} // namespace

// ---------------------------------------------------------------------------

ExtendedLatent::ExtendedLatent(Index k, Index layers, std::vector<double> values)
    : k_{k}
    , layers_{layers}
    , values_{std::move(values)}
{
  if (k <= 0 || layers < 2) {
    throw ContractError("extended latent needs k > 0 and at least two layers");
  }
  if (static_cast<Index>(values_.size()) != k * layers) {
    throw ContractError("extended latent length " + std::to_string(values_.size()) + " != k*L = " +
                        std::to_string(k * layers));
  }
  for (double x : values_) {
    if (!std::isfinite(x)) {
      throw ContractError("extended latent has a non-finite entry");
    }
  }
}

StyleBlock ExtendedLatent::block(Index l) const
{
  auto const b = values_.begin() + l * k_;
  return StyleBlock(b, b + k_);
}

void ExtendedLatent::set_block(Index l, StyleBlock const &b)
{
  if (static_cast<Index>(b.size()) != k_ || l < 0 || l >= layers_) {
    throw ContractError("set_block: bad block index or size");
  }
  std::copy(b.begin(), b.end(), values_.begin() + l * k_);
}

void validate_split(Index p1, Index p2, Index k, Index K)
{
  if (k <= 0 || K % k != 0) {
    throw ParameterError("latent size is not a multiple of the block size");
  }
  if (!(1 <= p1 && p1 < p2 && p2 <= K)) {
    throw ParameterError("style constraint needs 1 <= p1 < p2 <= K (p1=" + std::to_string(p1) +
                         ", p2=" + std::to_string(p2) + ", K=" + std::to_string(K) + ")");
  }
  if (p1 % k != 0 || (p2 - 1) % k != 0) {
    throw ParameterError("style constraint must split on block boundaries: p1 = a*k, p2 = b*k + 1 (k=" +
                         std::to_string(k) + ")");
  }
  if (p2 - p1 < 2) {
    throw ParameterError("style constraint leaves no free coordinates");
  }
}

void validate(StyleConstraint const &c)
{
  validate_split(c.p1, c.p2, c.w_pi.block_size(), c.w_pi.size());
}

std::vector<Index> StyleConstraint::free_indices() const
{
  std::vector<Index> idx;
  for (Index i = p1; i < p2 - 1; i++) {
    idx.push_back(i);
  }
  return idx;
}

std::vector<bool> StyleConstraint::constrained_mask() const
{
  std::vector<bool> mask(static_cast<std::size_t>(w_pi.size()), true);
  for (auto i : free_indices()) {
    mask[static_cast<std::size_t>(i)] = false;
  }
  return mask;
}

// ---------------------------------------------------------------------------

GeneratorParams make_generator(std::uint64_t master_seed, GeneratorShape const &shape)
{
  if (shape.k < PhantomK || shape.layers < PhantomLayers) {
    throw ParameterError("the procedural phantom needs k >= 8 and L >= 4");
  }
  if (shape.height < 8 || shape.width < 8) {
    throw ParameterError("phantom image must be at least 8x8");
  }
  if (!(shape.tau > 0.0)) {
    throw ParameterError("edge sharpness tau must be positive");
  }
  GeneratorParams p;
  p.k = shape.k;
  p.layers = shape.layers;
  p.height = shape.height;
  p.width = shape.width;
  p.tau = shape.tau;
  p.master_seed = master_seed;

  Index const k = p.k;
  double const gain = std::sqrt(2.0 / (1.0 + p.leak * p.leak)) / std::sqrt(static_cast<double>(k));
  Rng rng(derive_seed(master_seed, StreamMapping));
  for (int l = 0; l < 3; l++) {
    p.weights[l].resize(static_cast<std::size_t>(k * k));
    for (auto &x : p.weights[l]) {
      x = gain * rng.normal();
    }
    p.biases[l].assign(static_cast<std::size_t>(k), 0.0);
  }

  // Centre and standardise the output pre-activation so mapped styles straddle zero.
  std::vector<double> mean(static_cast<std::size_t>(k), 0.0), sq(static_cast<std::size_t>(k), 0.0);
  for (int s = 0; s < CalibSamples; s++) {
    auto const z = sample_z(p, derive_seed(master_seed, StreamCalib, static_cast<std::uint64_t>(s)));
    auto const pre = mapping_layers(p, normalise_rms(z.values));
    for (Index i = 0; i < k; i++) {
      mean[i] += pre[2][i];
      sq[i] += pre[2][i] * pre[2][i];
    }
  }
  for (Index i = 0; i < k; i++) {
    double const m = mean[i] / CalibSamples;
    double const sd = std::sqrt(std::max(sq[i] / CalibSamples - m * m, 1e-12));
    for (Index j = 0; j < k; j++) {
      p.weights[2][i * k + j] /= sd;
    }
    p.biases[2][i] = -m / sd;
  }

  p.ranges.assign(static_cast<std::size_t>(p.latent_size()), RangeEntry{});
  for (Index s = 0; s < slot::Count; s++) {
    Index const li = (s / PhantomK) * k + s % PhantomK;
    p.ranges[li] = range_entry(Attributes[s]);
  }

  p.stats.slope = 1.0 / p.leak;
  p.stats.mean.assign(static_cast<std::size_t>(k), 0.0);
  p.stats.variance.assign(static_cast<std::size_t>(k), 0.0);
  std::vector<double> acc(static_cast<std::size_t>(k), 0.0), acc2(static_cast<std::size_t>(k), 0.0);
  for (int s = 0; s < StatsSamples; s++) {
    auto const u = map_to_style(p, sample_z(p, derive_seed(master_seed, StreamStats, static_cast<std::uint64_t>(s))));
    for (Index i = 0; i < k; i++) {
      double const v = u[i] >= 0.0 ? u[i] : u[i] * p.stats.slope;
      acc[i] += v;
      acc2[i] += v * v;
    }
  }
  for (Index i = 0; i < k; i++) {
    double const m = acc[i] / StatsSamples;
    p.stats.mean[i] = m;
    p.stats.variance[i] = std::max(acc2[i] / StatsSamples - m * m, 1e-12);
  }
  return p;
}

void save_generator(std::filesystem::path const &path, GeneratorParams const &p)
{
  std::string out(SgenMagic, 4);
  le::put<std::uint32_t>(out, SgenVersion);
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.k));
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.layers));
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.height));
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.width));
  le::put<std::uint64_t>(out, p.master_seed);
  le::put<double>(out, p.tau);
  le::put<double>(out, p.leak);
  le::put<double>(out, p.output_gain);
  for (int l = 0; l < 3; l++) {
    for (double x : p.weights[l]) {
      le::put<double>(out, x);
    }
    for (double x : p.biases[l]) {
      le::put<double>(out, x);
    }
  }
  for (auto const &r : p.ranges) {
    le::put<double>(out, r.mid);
    le::put<double>(out, r.half);
    le::put<double>(out, r.scale);
  }
  for (double x : p.stats.mean) {
    le::put<double>(out, x);
  }
  for (double x : p.stats.variance) {
    le::put<double>(out, x);
  }
  le::put<double>(out, p.stats.slope);
  write_file(path, out);
}

GeneratorParams load_generator(std::filesystem::path const &path)
{
  auto const in = read_file(path);
  if (in.size() < 8 || std::memcmp(in.data(), SgenMagic, 4) != 0) {
    throw IoError(path.string() + ": not an SGEN file");
  }
  std::size_t pos = 4;
  try {
    auto const version = le::get<std::uint32_t>(in, pos);
    if (version != SgenVersion) {
      throw IoError("unsupported SGEN version " + std::to_string(version));
    }
    GeneratorParams p;
    p.k = le::get<std::uint32_t>(in, pos);
    p.layers = le::get<std::uint32_t>(in, pos);
    p.height = le::get<std::uint32_t>(in, pos);
    p.width = le::get<std::uint32_t>(in, pos);
    p.master_seed = le::get<std::uint64_t>(in, pos);
    p.tau = le::get<double>(in, pos);
    p.leak = le::get<double>(in, pos);
    p.output_gain = le::get<double>(in, pos);
    if (p.k < PhantomK || p.layers < PhantomLayers || p.k > 4096 || p.layers > 4096) {
      throw IoError("implausible generator shape");
    }
    for (int l = 0; l < 3; l++) {
      p.weights[l].resize(static_cast<std::size_t>(p.k * p.k));
      for (auto &x : p.weights[l]) {
        x = le::get<double>(in, pos);
      }
      p.biases[l].resize(static_cast<std::size_t>(p.k));
      for (auto &x : p.biases[l]) {
        x = le::get<double>(in, pos);
      }
    }
    p.ranges.resize(static_cast<std::size_t>(p.latent_size()));
    for (auto &r : p.ranges) {
      r.mid = le::get<double>(in, pos);
      r.half = le::get<double>(in, pos);
      r.scale = le::get<double>(in, pos);
    }
    p.stats.mean.resize(static_cast<std::size_t>(p.k));
    p.stats.variance.resize(static_cast<std::size_t>(p.k));
    for (auto &x : p.stats.mean) {
      x = le::get<double>(in, pos);
    }
    for (auto &x : p.stats.variance) {
      x = le::get<double>(in, pos);
    }
    p.stats.slope = le::get<double>(in, pos);
    if (pos != in.size()) {
      throw IoError("trailing bytes");
    }
    return p;
  } catch (IoError const &e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

LatentZ sample_z(GeneratorParams const &params, std::uint64_t seed)
{
  Rng rng(seed);
  LatentZ z;
  z.seed = seed;
  z.values.resize(static_cast<std::size_t>(params.k));
  for (auto &x : z.values) {
    x = rng.normal();
  }
  return z;
}

StyleBlock map_to_style(GeneratorParams const &params, LatentZ const &z)
{
  if (static_cast<Index>(z.values.size()) != params.k) {
    throw ContractError("map_to_style: z has length " + std::to_string(z.values.size()) + ", expected " +
                        std::to_string(params.k));
  }
  auto const pre = mapping_layers(params, normalise_rms(z.values));
  StyleBlock u(pre[2].size());
  for (std::size_t i = 0; i < u.size(); i++) {
    u[i] = leaky(pre[2][i], params.leak);
  }
  return u;
}

ExtendedLatent broadcast(StyleBlock const &u, Index layers)
{
  std::vector<double> values;
  values.reserve(u.size() * static_cast<std::size_t>(layers));
  for (Index l = 0; l < layers; l++) {
    values.insert(values.end(), u.begin(), u.end());
  }
  return ExtendedLatent(static_cast<Index>(u.size()), layers, std::move(values));
}

ExtendedLatent style_mix(ExtendedLatent const &a, ExtendedLatent const &b, Index p1, Index p2)
{
  if (a.block_size() != b.block_size() || a.layers() != b.layers()) {
    throw ContractError("style_mix: latents have different shapes");
  }
  validate_split(p1, p2, a.block_size(), a.size());
  ExtendedLatent out = a;
  for (Index i = p1; i < p2 - 1; i++) {
    out.values()[i] = b.values()[i];
  }
  return out;
}

double gaussianization_penalty(ExtendedLatent const &w, GaussianizationStats const &stats, std::span<double> grad)
{
  Index const k = w.block_size();
  if (static_cast<Index>(stats.mean.size()) != k || static_cast<Index>(stats.variance.size()) != k) {
    throw ContractError("gaussianization stats do not match the latent block size");
  }
  if (!grad.empty() && static_cast<Index>(grad.size()) != w.size()) {
    throw ContractError("gaussianization gradient buffer has the wrong length");
  }
  double phi = 0.0;
  auto const vals = w.values();
  for (Index i = 0; i < w.size(); i++) {
    Index const j = i % k;
    double const s = vals[i];
    double const dv = s >= 0.0 ? 1.0 : stats.slope;
    double const r = s * dv - stats.mean[j];
    phi += r * r / stats.variance[j];
    if (!grad.empty()) {
      grad[i] = 2.0 * r / stats.variance[j] * dv;
    }
  }
  return phi;
}

// ---------------------------------------------------------------------------

PhantomGenerator::PhantomGenerator(GeneratorParams params)
    : params_{std::move(params)}
{
  if (static_cast<Index>(params_.ranges.size()) != params_.latent_size() || params_.k < PhantomK ||
      params_.layers < PhantomLayers) {
    throw ContractError("generator params are inconsistent");
  }
}

void PhantomGenerator::check(ExtendedLatent const &w) const
{
  if (w.block_size() != params_.k || w.layers() != params_.layers) {
    throw ContractError("latent shape " + std::to_string(w.block_size()) + "x" + std::to_string(w.layers()) +
                        " does not match generator " + std::to_string(params_.k) + "x" +
                        std::to_string(params_.layers));
  }
}

Index PhantomGenerator::latent_index(Index s) const
{
  return (s / PhantomK) * params_.k + s % PhantomK;
}

PhantomLayout PhantomGenerator::decode(ExtendedLatent const &w) const
{
  check(w);
  PhantomLayout a;
  for (Index s = 0; s < slot::Count; s++) {
    Index const li = latent_index(s);
    auto const &r = params_.ranges[li];
    a.p[s] = r.mid + r.half * std::tanh(w.values()[li] / r.scale);
  }
  return a;
}

RealGrid PhantomGenerator::synthesize(ExtendedLatent const &w) const
{
  auto const a = decode(w);
  auto const frame = make_frame(a, params_.tau, params_.output_gain);
  RealGrid img(params_.height, params_.width);
  for (Index r = 0; r < params_.height; r++) {
    double const y = coord_y(r, params_.height);
    for (Index c = 0; c < params_.width; c++) {
      img(r, c) = pixel<false>(frame, coord_x(c, params_.width), y, 0.0, nullptr);
    }
  }
  return img;
}

std::vector<double> PhantomGenerator::synthesize_vjp(ExtendedLatent const &w, RealGrid const &cotangent) const
{
  if (cotangent.height() != params_.height || cotangent.width() != params_.width) {
    throw ContractError("synthesize_vjp: cotangent shape does not match the generator image");
  }
  auto const a = decode(w);
  auto const frame = make_frame(a, params_.tau, params_.output_gain);
  std::array<double, slot::Count> g{};
  for (Index r = 0; r < params_.height; r++) {
    double const y = coord_y(r, params_.height);
    for (Index c = 0; c < params_.width; c++) {
      double const cot = cotangent(r, c);
      if (cot != 0.0) {
        pixel<true>(frame, coord_x(c, params_.width), y, cot, g.data());
      }
    }
  }
  std::vector<double> out(static_cast<std::size_t>(w.size()), 0.0);
  for (Index s = 0; s < slot::Count; s++) {
    Index const li = latent_index(s);
    auto const &rg = params_.ranges[li];
    double const t = std::tanh(w.values()[li] / rg.scale);
    out[li] = g[s] * rg.half / rg.scale * (1.0 - t * t);
  }
  return out;
}

RegionMasks PhantomGenerator::region_masks(ExtendedLatent const &w) const
{
  auto const a = decode(w);
  auto const frame = make_frame(a, params_.tau, params_.output_gain);
  Index const h = params_.height, wd = params_.width;
  RegionMasks m{RealGrid(h, wd), RealGrid(h, wd), RealGrid(h, wd), RealGrid(h, wd), RealGrid(h, wd)};
  for (Index r = 0; r < h; r++) {
    double const y = coord_y(r, h);
    for (Index c = 0; c < wd; c++) {
      PixelMasks pm{};
      pixel<false>(frame, coord_x(c, wd), y, 0.0, nullptr, &pm);
      m.head(r, c) = pm.m0;
      m.brain(r, c) = pm.m1;
      m.deep(r, c) = pm.m2;
      m.inclusion1(r, c) = pm.mi1;
      m.inclusion2(r, c) = pm.mi2;
    }
  }
  return m;
}

ExtendedLatent PhantomGenerator::initial_latent(std::uint64_t seed) const
{
  return broadcast(map_to_style(params_, sample_z(params_, seed)), params_.layers);
}

LatentZ PhantomGenerator::sample_latent_z(std::uint64_t seed) const
{
  return sample_z(params_, seed);
}

StyleBlock PhantomGenerator::map_style(std::span<double const> z) const
{
  return map_to_style(params_, LatentZ{std::vector<double>(z.begin(), z.end()), 0});
}

std::vector<double> PhantomGenerator::map_style_vjp(std::span<double const> z, std::span<double const> cotangent) const
{
  Index const k = params_.k;
  if (static_cast<Index>(z.size()) != k || static_cast<Index>(cotangent.size()) != k) {
    throw ContractError("map_style_vjp: z and cotangent must have length k");
  }
  std::vector<double> const zv(z.begin(), z.end());
  auto const zn = normalise_rms(zv);
  auto const pre = mapping_layers(params_, zn);
  std::vector<double> dh(cotangent.begin(), cotangent.end());
  for (int l = 2; l >= 0; l--) {
    std::vector<double> dpre(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; i++) {
      dpre[i] = dh[i] * (pre[l][i] >= 0.0 ? 1.0 : params_.leak);
    }
    std::vector<double> dprev(static_cast<std::size_t>(k), 0.0);
    for (Index i = 0; i < k; i++) {
      for (Index j = 0; j < k; j++) {
        dprev[j] += params_.weights[l][i * k + j] * dpre[i];
      }
    }
    dh = std::move(dprev);
  }
  double ss = 0.0;
  for (double x : zv) {
    ss += x * x;
  }
  if (ss == 0.0) {
    return std::vector<double>(static_cast<std::size_t>(k), 0.0);
  }
  // zn = z / rms(z)
  double const rms = std::sqrt(ss / static_cast<double>(k));
  double const proj = dot(zn, dh) / static_cast<double>(k);
  std::vector<double> dz(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; i++) {
    dz[i] = (dh[i] - zn[i] * proj) / rms;
  }
  return dz;
}

// ---------------------------------------------------------------------------

InvertResult invert(Generator const &gen, RealGrid const &target, std::optional<StyleConstraint> const &constraint,
                    InvertOptions const &opt)
{
  if (target.height() != gen.height() || target.width() != gen.width()) {
    throw ContractError("invert: target shape does not match the generator");
  }
  if (constraint) {
    validate(*constraint);
    if (constraint->w_pi.size() != gen.latent_size()) {
      throw ContractError("invert: constraint latent does not match the generator");
    }
  }
  Index const k = gen.block_size();
  Index const L = gen.layers();
  auto const free = constraint ? constraint->free_indices() : all_indices(gen.latent_size());

  Objective objective = [&](std::span<double const> x, std::span<double> grad) {
    ExtendedLatent const w(k, L, std::vector<double>(x.begin(), x.end()));
    auto img = gen.synthesize(w);
    double fid = 0.0;
    for (Index i = 0; i < img.size(); i++) {
      double const r = img[i] - target[i];
      fid += r * r;
      img[i] = 2.0 * r;
    }
    auto const g = gen.synthesize_vjp(w, img);
    std::copy(g.begin(), g.end(), grad.begin());
    double pen = 0.0;
    if (opt.lambda_phi != 0.0) {
      std::vector<double> pg(grad.size());
      pen = gaussianization_penalty(w, gen.stats(), pg);
      for (std::size_t i = 0; i < grad.size(); i++) {
        grad[i] += opt.lambda_phi * pg[i];
      }
    }
    return ObjectiveValue{fid + opt.lambda_phi * pen, fid, opt.lambda_phi * pen};
  };

  AdamConfig cfg;
  cfg.step = opt.step;
  cfg.iters = opt.iters;
  cfg.restarts = opt.restarts;
  cfg.seed = opt.seed;
  cfg.validate();

  std::optional<InvertResult> best;
  for (int r = 0; r < opt.restarts; r++) {
    auto init = gen.initial_latent(derive_seed(opt.seed, StreamInvert, static_cast<std::uint64_t>(r)));
    if (constraint) {
      init = style_mix(constraint->w_pi, init, constraint->p1, constraint->p2);
    }
    auto run = run_adam(objective, init.vector(), cfg, free);
    ExtendedLatent w(k, L, std::move(run.x));
    double const residual = norm2((gen.synthesize(w) - target).values());
    if (!best || residual < best->residual) {
      best = InvertResult{std::move(w), residual, std::move(run.trace)};
    }
  }
  return *best;
}

} // namespace pic
