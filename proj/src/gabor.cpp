#include "fbtex/gabor.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include "fbtex/error.hpp"

namespace fbtex {

double GaborParams::sigma() const {
  const double two_b = std::exp2(bandwidth);
  return (wavelength / std::numbers::pi) * std::sqrt(std::numbers::ln2 / 2.0) * (two_b + 1.0) /
         (two_b - 1.0);
}

void GaborParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(wavelength)) throw ParameterError("gabor wavelength must be finite and > 0");
  if (!positive(aspect_ratio)) throw ParameterError("gabor aspect ratio must be finite and > 0");
  if (!positive(bandwidth)) throw ParameterError("gabor bandwidth must be finite and > 0");
  if (!std::isfinite(orientation_deg) || !std::isfinite(phase))
    throw ParameterError("gabor orientation and phase must be finite");
}

namespace {

// cos/sin of an angle in degrees, reduced so that θ and θ+180° return exact negatives.
std::pair<double, double> half_turn_cos_sin(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0.0) d += 360.0;
  bool flip = false;
  if (d >= 180.0) {
    d -= 180.0;
    flip = true;
  }
  const double rad = d * (std::numbers::pi / 180.0);
  double c = std::cos(rad);
  double s = std::sin(rad);
  return flip ? std::pair{-c, -s} : std::pair{c, s};
}

}  // namespace

Kernel make_kernel(const GaborParams& p) {
  p.validate();
  const double sigma = p.sigma();
  const double reach = 3.0 * sigma * std::max(1.0, 1.0 / p.aspect_ratio);
  const int radius = static_cast<int>(std::min<double>(std::ceil(reach), kMaxKernelRadius));

  const auto [c, s] = half_turn_cos_sin(p.orientation_deg);
  const double gamma2 = p.aspect_ratio * p.aspect_ratio;
  const double two_sigma2 = 2.0 * sigma * sigma;
  const double omega = 2.0 * std::numbers::pi;

  Kernel k;
  k.radius = radius;
  k.weights.resize(static_cast<std::size_t>(k.side()) * k.side());
  std::size_t i = 0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double xr = dx * c + dy * s;
      const double yr = -dx * s + dy * c;
      const double envelope = std::exp(-(xr * xr + gamma2 * yr * yr) / two_sigma2);
      const double arg = omega * xr / p.wavelength;
      const double carrier = p.phase == 0.0 ? std::cos(std::fabs(arg)) : std::cos(arg + p.phase);
      k.weights[i++] = envelope * carrier;
    }
  }
  return k;
}

BankConfig default_bank_config() {
  BankConfig cfg;
  const double r2 = std::numbers::sqrt2;
  cfg.wavelengths = {4.0, 4.0 * r2, 8.0, 8.0 * r2, 16.0};
  for (int i = 0; i < 8; ++i) cfg.orientations_deg.push_back(45.0 * i);
  return cfg;
}

int FilterBank::max_radius() const {
  int r = 0;
  for (const auto& e : entries_) r = std::max(r, e.kernel.radius);
  return r;
}

FilterBank make_filter_bank(const BankConfig& config) {
  if (config.wavelengths.empty() || config.orientations_deg.empty())
    throw ParameterError("filter bank needs at least one wavelength and one orientation");
  std::vector<FilterBankEntry> entries;
  entries.reserve(config.wavelengths.size() * config.orientations_deg.size());
  for (double lambda : config.wavelengths) {
    for (double theta : config.orientations_deg) {
      GaborParams p{lambda, theta, config.phase, config.aspect_ratio, config.bandwidth};
      entries.push_back({p, make_kernel(p)});
    }
  }
  return FilterBank(std::move(entries));
}

Padding parse_padding(std::string_view s) {
  if (s == "mirror") return Padding::Mirror;
  if (s == "zero") return Padding::Zero;
  throw ConfigError("unknown padding '" + std::string(s) + "' (expected mirror|zero)");
}

TextureMode parse_texture_mode(std::string_view s) {
  if (s == "magnitude") return TextureMode::Magnitude;
  if (s == "raw") return TextureMode::Raw;
  throw ConfigError("unknown texture_mode '" + std::string(s) + "' (expected magnitude|raw)");
}

ConvolutionBackend parse_backend(std::string_view s) {
  if (s == "direct") return ConvolutionBackend::Direct;
  if (s == "fft") return ConvolutionBackend::Fft;
  throw ConfigError("unknown convolution backend '" + std::string(s) + "' (expected direct|fft)");
}

std::string_view to_string(Padding p) { return p == Padding::Mirror ? "mirror" : "zero"; }
std::string_view to_string(TextureMode m) { return m == TextureMode::Magnitude ? "magnitude" : "raw"; }
std::string_view to_string(ConvolutionBackend b) {
  return b == ConvolutionBackend::Direct ? "direct" : "fft";
}

int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i >= n ? period - i : i;
}

namespace {

void check_kernel_fits(const GrayImage& im, const Kernel& k) {
  if (im.empty()) throw ShapeError("cannot convolve an empty image");
  if (k.side() > 2 * std::min(im.width(), im.height()))
    throw SizeError("kernel side " + std::to_string(k.side()) + " exceeds twice the image extent " +
                    std::to_string(im.width()) + "x" + std::to_string(im.height()));
}

// Image surrounded by `pad` pixels on each side, mirrored or zero.
std::vector<double> padded_copy(const GrayImage& im, int pad, Padding padding) {
  const int pw = im.width() + 2 * pad;
  const int ph = im.height() + 2 * pad;
  std::vector<double> out(static_cast<std::size_t>(pw) * ph, 0.0);
  for (int y = 0; y < ph; ++y) {
    const int sy = y - pad;
    const bool row_inside = sy >= 0 && sy < im.height();
    for (int x = 0; x < pw; ++x) {
      const int sx = x - pad;
      double v = 0.0;
      if (padding == Padding::Mirror)
        v = im(mirror_index(sx, im.width()), mirror_index(sy, im.height()));
      else if (row_inside && sx >= 0 && sx < im.width())
        v = im(sx, sy);
      out[static_cast<std::size_t>(y) * pw + x] = v;
    }
  }
  return out;
}

}  // namespace

ResponseImage convolve(const GrayImage& im, const Kernel& k, Padding padding) {
  check_kernel_fits(im, k);
  const int r = k.radius;
  const int pw = im.width() + 2 * r;
  const auto src = padded_copy(im, r, padding);

  ResponseImage out{im.width(), im.height(),
                    std::vector<double>(static_cast<std::size_t>(im.width()) * im.height())};
  for (int y = 0; y < im.height(); ++y) {
    for (int x = 0; x < im.width(); ++x) {
      double acc = 0.0;
      for (int v = -r; v <= r; ++v) {
        const double* row = &src[static_cast<std::size_t>(y - v + r) * pw + (x + r)];
        for (int u = -r; u <= r; ++u) acc += k.at(u, v) * row[-u];
      }
      out.values[static_cast<std::size_t>(y) * im.width() + x] = acc;
    }
  }
  return out;
}

// ---- FFT backend ----------------------------------------------------------

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (!p) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

}  // namespace

class FftConvolver::Spectrum {
 public:
  explicit Spectrum(std::size_t n) : data(fftw_buffer<fftw_complex>(n)) {}
  std::unique_ptr<fftw_complex[], FftwFree> data;
};

struct FftConvolver::Plans {
  int nw = 0;
  int nh = 0;
  std::size_t real_size = 0;
  std::size_t complex_size = 0;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  Plans(int w, int h) : nw(w), nh(h) {
    real_size = static_cast<std::size_t>(nw) * nh;
    complex_size = static_cast<std::size_t>(nh) * (nw / 2 + 1);
    auto real = fftw_buffer<double>(real_size);
    auto cplx = fftw_buffer<fftw_complex>(complex_size);
    std::lock_guard lock(planner_mutex());
    forward = fftw_plan_dft_r2c_2d(nh, nw, real.get(), cplx.get(), FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(nh, nw, cplx.get(), real.get(), FFTW_ESTIMATE);
    if (!forward || !backward) throw Error("FFTW planning failed");
  }

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }

  std::shared_ptr<const Spectrum> forward_of(std::span<const double> real_in) const {
    auto in = fftw_buffer<double>(real_size);
    std::copy(real_in.begin(), real_in.end(), in.get());
    auto spec = std::make_shared<Spectrum>(complex_size);
    fftw_execute_dft_r2c(forward, in.get(), spec->data.get());
    return spec;
  }
};

FftConvolver::FftConvolver(int width, int height, int pad, Padding padding)
    : width_(width), height_(height), pad_(pad), padding_(padding) {
  if (width < 1 || height < 1 || pad < 0) throw ParameterError("invalid FFT convolver geometry");
  plans_ = std::make_unique<Plans>(width + 2 * pad, height + 2 * pad);
}

FftConvolver::~FftConvolver() = default;

std::shared_ptr<const FftConvolver::Spectrum> FftConvolver::transform(const GrayImage& im) const {
  if (im.width() != width_ || im.height() != height_)
    throw ShapeError("image size does not match the FFT convolver");
  return plans_->forward_of(padded_copy(im, pad_, padding_));
}

std::shared_ptr<const FftConvolver::Spectrum> FftConvolver::transform(const Kernel& k) const {
  if (k.radius > pad_)
    throw SizeError("kernel radius " + std::to_string(k.radius) + " exceeds FFT padding " +
                    std::to_string(pad_));
  if (k.side() > 2 * std::min(width_, height_))
    throw SizeError("kernel side " + std::to_string(k.side()) + " exceeds twice the image extent");
  const int nw = plans_->nw;
  const int nh = plans_->nh;
  std::vector<double> wrapped(plans_->real_size, 0.0);
  for (int v = -k.radius; v <= k.radius; ++v) {
    const int row = (v + nh) % nh;
    for (int u = -k.radius; u <= k.radius; ++u) {
      const int col = (u + nw) % nw;
      wrapped[static_cast<std::size_t>(row) * nw + col] = k.at(u, v);
    }
  }
  return plans_->forward_of(wrapped);
}

ResponseImage FftConvolver::apply(const Spectrum& image, const Spectrum& kernel) const {
  const std::size_t n = plans_->complex_size;
  auto prod = fftw_buffer<fftw_complex>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = image.data[i][0], ai = image.data[i][1];
    const double br = kernel.data[i][0], bi = kernel.data[i][1];
    prod[i][0] = ar * br - ai * bi;
    prod[i][1] = ar * bi + ai * br;
  }
  auto real = fftw_buffer<double>(plans_->real_size);
  fftw_execute_dft_c2r(plans_->backward, prod.get(), real.get());

  const double scale = 1.0 / static_cast<double>(plans_->real_size);
  ResponseImage out{width_, height_,
                    std::vector<double>(static_cast<std::size_t>(width_) * height_)};
  for (int y = 0; y < height_; ++y) {
    const double* row = &real[static_cast<std::size_t>(y + pad_) * plans_->nw + pad_];
    for (int x = 0; x < width_; ++x)
      out.values[static_cast<std::size_t>(y) * width_ + x] = row[x] * scale;
  }
  return out;
}

ResponseImage FftConvolver::convolve(const GrayImage& im, const Kernel& k) const {
  return apply(*transform(im), *transform(k));
}

ResponseImage convolve(const GrayImage& im, const Kernel& k, const TextureOptions& opts) {
  if (opts.backend == ConvolutionBackend::Direct) return convolve(im, k, opts.padding);
  check_kernel_fits(im, k);
  FftConvolver conv(im.width(), im.height(), kMaxKernelRadius, opts.padding);
  return conv.convolve(im, k);
}

double texture_value(const ResponseImage& r, TextureMode mode) {
  double sum = 0.0;
  if (mode == TextureMode::Magnitude)
    for (double v : r.values) sum += std::fabs(v);
  else
    for (double v : r.values) sum += v;
  return sum / static_cast<double>(r.values.size());
}

double block_texture_value(const GrayImage& block, const FilterBank& bank,
                           const TextureOptions& opts) {
  if (bank.empty()) throw ParameterError("filter bank is empty");
  double sum = 0.0;
  if (opts.backend == ConvolutionBackend::Direct) {
    for (const auto& e : bank) sum += texture_value(convolve(block, e.kernel, opts.padding), opts.mode);
  } else {
    for (const auto& e : bank) check_kernel_fits(block, e.kernel);
    FftConvolver conv(block.width(), block.height(), kMaxKernelRadius, opts.padding);
    auto image = conv.transform(block);
    for (const auto& e : bank)
      sum += texture_value(conv.apply(*image, *conv.transform(e.kernel)), opts.mode);
  }
  return sum / static_cast<double>(bank.size());
}

}  // namespace fbtex
