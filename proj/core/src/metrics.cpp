#include "realism/metrics.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <vector>

#include "json_util.hpp"
#include "realism/error.hpp"

namespace realism {

double trait_dist(std::span<const double> p_generated, std::span<const double> p_real) {
  if (p_generated.size() != p_real.size()) {
    throw ShapeError("trait_dist: vectors have " + std::to_string(p_generated.size()) + " and " +
                     std::to_string(p_real.size()) + " entries");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p_real.size(); ++i) {
    const double d = p_generated[i] - p_real[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void Image::validate() const {
  if (channels != 1 && channels != 3) throw ValidationError("image must have 1 or 3 channels");
  if (width == 0 || height == 0) throw ValidationError("image is empty");
  if (data.size() != width * height * channels) throw ShapeError("image data length does not match its dimensions");
}

Image to_luma(const Image& image) {
  image.validate();
  if (image.channels == 1) return image;
  Image out{image.width, image.height, 1, Vector(image.width * image.height)};
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double* px = &image.data[3 * i];
    out.data[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return out;
}

std::string to_string(SsimWindow w) {
  switch (w) {
    case SsimWindow::gaussian: return "gaussian";
    case SsimWindow::uniform: return "uniform";
    case SsimWindow::global: return "global";
  }
  return "gaussian";
}

SsimWindow ssim_window_from_string(const std::string& name) {
  if (name == "gaussian") return SsimWindow::gaussian;
  if (name == "uniform") return SsimWindow::uniform;
  if (name == "global") return SsimWindow::global;
  throw ValidationError("unknown SSIM window '" + name + "' (gaussian, uniform, global)");
}

Vector gaussian_taps(std::size_t size, double sigma) {
  if (size == 0 || !(sigma > 0.0)) throw ValidationError("gaussian window needs size > 0 and sigma > 0");
  Vector taps(size);
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - centre;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace {

// Separable "valid" correlation of a w×h plane with taps ⊗ taps.
Vector filter_valid(const Vector& plane, std::size_t w, std::size_t h, const Vector& taps) {
  const std::size_t n = taps.size();
  const std::size_t ow = w - n + 1, oh = h - n + 1;
  Vector rows(ow * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += taps[k] * plane[y * w + x + k];
      rows[y * ow + x] = s;
    }
  Vector out(ow * oh);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += taps[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

double ssim_formula(double mx, double my, double sxx, double syy, double sxy, double c1, double c2) {
  return ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
}

}  // namespace

double ssim(const Image& x_in, const Image& y_in, const SsimConfig& config) {
  x_in.validate();
  y_in.validate();
  if (x_in.width != y_in.width || x_in.height != y_in.height) {
    throw ShapeError("ssim: images are " + std::to_string(x_in.width) + "x" + std::to_string(x_in.height) + " and " +
                     std::to_string(y_in.width) + "x" + std::to_string(y_in.height));
  }
  const Image x = to_luma(x_in);
  const Image y = to_luma(y_in);
  const std::size_t w = x.width, h = x.height;
  const double c1 = std::pow(config.k1 * config.dynamic_range, 2);
  const double c2 = std::pow(config.k2 * config.dynamic_range, 2);

  Vector xx(w * h), yy(w * h), xy(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    xx[i] = x.data[i] * x.data[i];
    yy[i] = y.data[i] * y.data[i];
    xy[i] = x.data[i] * y.data[i];
  }

  if (config.window == SsimWindow::global) {
    const double inv = 1.0 / static_cast<double>(w * h);
    double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
    for (std::size_t i = 0; i < w * h; ++i) {
      mx += x.data[i];
      my += y.data[i];
      exx += xx[i];
      eyy += yy[i];
      exy += xy[i];
    }
    mx *= inv, my *= inv, exx *= inv, eyy *= inv, exy *= inv;
    return ssim_formula(mx, my, exx - mx * mx, eyy - my * my, exy - mx * my, c1, c2);
  }

  const std::size_t n = config.window_size;
  if (n == 0) throw ValidationError("ssim window size must be positive");
  if (w < n || h < n) {
    throw ValidationError("image " + std::to_string(w) + "x" + std::to_string(h) + " is smaller than the " +
                          std::to_string(n) + "x" + std::to_string(n) + " SSIM window");
  }
  const Vector taps = config.window == SsimWindow::gaussian ? gaussian_taps(n, config.sigma)
                                                            : Vector(n, 1.0 / static_cast<double>(n));
  const Vector mu_x = filter_valid(x.data, w, h, taps);
  const Vector mu_y = filter_valid(y.data, w, h, taps);
  const Vector e_xx = filter_valid(xx, w, h, taps);
  const Vector e_yy = filter_valid(yy, w, h, taps);
  const Vector e_xy = filter_valid(xy, w, h, taps);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    total += ssim_formula(mx, my, e_xx[i] - mx * mx, e_yy[i] - my * my, e_xy[i] - mx * my, c1, c2);
  }
  return total / static_cast<double>(mu_x.size());
}

// ---------------------------------------------------------------------------
// Image IO

Image load_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGBA : PNG_FORMAT_GA;
  const std::size_t stride_px = color ? 4 : 2;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  Image out{img.width, img.height, color ? 3u : 1u, {}};
  out.data.resize(out.width * out.height * out.channels);
  for (std::size_t p = 0; p < out.width * out.height; ++p)
    for (std::size_t c = 0; c < out.channels; ++c)
      out.data[p * out.channels + c] = buffer[p * stride_px + c] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  image.validate();
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(image.data.size());
  for (std::size_t i = 0; i < buffer.size(); ++i)
    buffer[i] = static_cast<png_byte>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

namespace {

class PnmReader {
 public:
  explicit PnmReader(const std::string& b) : bytes_(b) {}

  std::size_t number() {
    skip_space();
    std::size_t v = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_++] - '0');
      any = true;
      if (v > (1u << 24)) throw ParseError("pnm: header value too large");
    }
    if (!any) throw ParseError("pnm: expected a number in the header at byte " + std::to_string(pos_));
    return v;
  }

  std::size_t pos_ = 0;

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
};

}  // namespace

Image decode_pnm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("pnm: only binary P5 (PGM) and P6 (PPM) are supported");
  }
  PnmReader r(bytes);
  r.pos_ = 2;
  Image img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  img.width = r.number();
  img.height = r.number();
  const std::size_t maxval = r.number();
  if (maxval == 0 || maxval > 255) throw ParseError("pnm: maxval must be in 1..255");
  if (r.pos_ >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[r.pos_]))) {
    throw ParseError("pnm: missing whitespace after header");
  }
  const std::size_t start = r.pos_ + 1;
  const std::size_t count = img.width * img.height * img.channels;
  if (bytes.size() - start < count) throw ParseError("pnm: truncated pixel data");
  img.data.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    img.data[i] = static_cast<unsigned char>(bytes[start + i]) / static_cast<double>(maxval);
  img.validate();
  return img;
}

std::string encode_pnm(const Image& image) {
  image.validate();
  std::string out = (image.channels == 3 ? "P6\n" : "P5\n") + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  for (double v : image.data) out += static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  return out;
}

Image load_pnm(const std::filesystem::path& path) { return decode_pnm(detail::read_text_file(path)); }

Image load_image(const std::filesystem::path& path) {
  const std::string bytes = detail::read_text_file(path);
  if (bytes.size() >= 4 && bytes.compare(1, 3, "PNG") == 0) return load_png(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return decode_pnm(bytes);
  throw ParseError("unrecognized image format: " + path.string());
}

}  // namespace realism
