#include "foodclf/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <string>

#include "foodclf/binio.hpp"
#include "foodclf/error.hpp"

namespace foodclf {

Image::Image(std::uint32_t width, std::uint32_t height, std::array<std::uint8_t, 3> fill)
    : width_(width), height_(height) {
  require(width >= 1 && height >= 1, ErrorCode::InvalidArgument, "image dims must be >= 1");
  pixels_.resize(static_cast<std::size_t>(width) * height * kChannels);
  for (std::size_t i = 0; i < pixels_.size(); i += kChannels) {
    std::copy(fill.begin(), fill.end(), pixels_.begin() + static_cast<std::ptrdiff_t>(i));
  }
}

Image::Image(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  require(width >= 1 && height >= 1, ErrorCode::InvalidArgument, "image dims must be >= 1");
  require(pixels_.size() == static_cast<std::size_t>(width) * height * kChannels,
          ErrorCode::InvalidArgument,
          "pixel buffer length " + std::to_string(pixels_.size()) + " != " +
              std::to_string(width) + "x" + std::to_string(height) + "x3");
}

void NormalizationSpec::validate() const {
  for (float m : channel_means) {
    require(std::isfinite(m) && m >= 0.0F && m <= 1.0F, ErrorCode::InvalidArgument,
            "channel means must lie in [0, 1]");
  }
}

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kPngSignature.size() &&
         std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin());
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

// ---- PNG -------------------------------------------------------------------

struct PngSource {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

struct PngErrorState {
  std::jmp_buf jump;
  char message[256] = {0};
};

void png_on_error(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  std::longjmp(state->jump, 1);
}

void png_on_warning(png_structp, png_const_charp) {}

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (length > src->data.size() - src->pos) png_error(png, "truncated PNG stream");
  std::memcpy(out, src->data.data() + src->pos, length);
  src->pos += length;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  PngErrorState state;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_on_error, png_on_warning);
  if (png == nullptr) fail(ErrorCode::MalformedImage, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorCode::MalformedImage, "libpng initialisation failed");
  }

  PngSource source{bytes, 0};
  // Everything that owns memory across the setjmp boundary lives in this
  // frame before setjmp is called.
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;

  if (setjmp(state.jump) != 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::MalformedImage, std::string("PNG decode failed: ") + state.message);
  }

  png_set_read_fn(png, &source, png_read_from_span);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_scale_16(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 3) {
    png_error(png, "unexpected row layout after transforms");
  }
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  return Image(width, height, std::move(pixels));
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

// ---- JPEG ------------------------------------------------------------------

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX] = {0};
};

void jpeg_on_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silence(j_common_ptr, int) {}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_on_error;
  err.base.emit_message = jpeg_silence;

  std::vector<std::uint8_t> pixels;

  if (setjmp(err.jump) != 0) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorCode::MalformedImage, std::string("JPEG decode failed: ") + err.message);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorCode::UnsupportedFormat, "CMYK JPEG is not supported");
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  const std::uint32_t width = cinfo.output_width;
  const std::uint32_t height = cinfo.output_height;
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return Image(width, height, std::move(pixels));
}

std::uint8_t round_half_up(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  fail(ErrorCode::UnsupportedFormat, "data is neither PNG nor JPEG");
}

Image read_image(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  require(!img.empty(), ErrorCode::InvalidArgument, "cannot encode an empty image");
  PngErrorState state;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, png_on_error, png_on_warning);
  if (png == nullptr) fail(ErrorCode::Io, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorCode::Io, "libpng initialisation failed");
  }

  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(img.height());

  if (setjmp(state.jump) != 0) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::Io, std::string("PNG encode failed: ") + state.message);
  }

  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  auto* base = const_cast<std::uint8_t*>(img.pixels().data());
  for (std::uint32_t y = 0; y < img.height(); ++y) {
    rows[y] = base + static_cast<std::size_t>(y) * img.width() * 3;
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  binio::write_file(path, encode_png(img));
}

Image resize_bilinear(const Image& img, std::uint32_t out_w, std::uint32_t out_h) {
  require(out_w >= 1 && out_h >= 1, ErrorCode::InvalidArgument, "resize target must be >= 1x1");
  require(!img.empty(), ErrorCode::InvalidArgument, "cannot resize an empty image");
  if (out_w == img.width() && out_h == img.height()) return img;

  const double scale_x = static_cast<double>(img.width()) / out_w;
  const double scale_y = static_cast<double>(img.height()) / out_h;
  const double max_x = img.width() - 1.0;
  const double max_y = img.height() - 1.0;

  struct Tap {
    std::uint32_t lo;
    std::uint32_t hi;
    double frac;
  };
  auto taps = [](std::uint32_t n_out, double scale, double max_src) {
    std::vector<Tap> out(n_out);
    for (std::uint32_t d = 0; d < n_out; ++d) {
      const double src = std::clamp((d + 0.5) * scale - 0.5, 0.0, max_src);
      const auto lo = static_cast<std::uint32_t>(std::floor(src));
      const auto hi = std::min(lo + 1, static_cast<std::uint32_t>(max_src));
      out[d] = {lo, hi, src - lo};
    }
    return out;
  };
  const auto xs = taps(out_w, scale_x, max_x);
  const auto ys = taps(out_h, scale_y, max_y);

  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_w) * out_h * 3);
  std::size_t k = 0;
  for (std::uint32_t y = 0; y < out_h; ++y) {
    const Tap& ty = ys[y];
    for (std::uint32_t x = 0; x < out_w; ++x) {
      const Tap& tx = xs[x];
      for (std::uint32_t c = 0; c < 3; ++c) {
        const double top = img.at(tx.lo, ty.lo, c) * (1.0 - tx.frac) + img.at(tx.hi, ty.lo, c) * tx.frac;
        const double bottom = img.at(tx.lo, ty.hi, c) * (1.0 - tx.frac) + img.at(tx.hi, ty.hi, c) * tx.frac;
        out[k++] = round_half_up(top * (1.0 - ty.frac) + bottom * ty.frac);
      }
    }
  }
  return Image(out_w, out_h, std::move(out));
}

Tensor image_to_tensor(const Image& img, const NormalizationSpec& norm) {
  require(!img.empty(), ErrorCode::InvalidArgument, "cannot convert an empty image");
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  Tensor out({3, h, w});
  for (std::uint32_t c = 0; c < 3; ++c) {
    const float offset = norm.mode == NormalizationMode::MeanSubtract ? norm.channel_means[c] : 0.0F;
    for (std::uint32_t y = 0; y < h; ++y) {
      for (std::uint32_t x = 0; x < w; ++x) {
        out.at(c, y, x) = static_cast<float>(img.at(x, y, c)) / 255.0F - offset;
      }
    }
  }
  return out;
}

}  // namespace foodclf
