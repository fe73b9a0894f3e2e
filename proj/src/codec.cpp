#include "navp/codec.hpp"

#include <algorithm>
#include <array>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "navp/error.hpp"

#ifdef NAVP_HAVE_JPEG
#include <jpeglib.h>
#endif

namespace navp {

std::string_view to_string(CodecId id) {
  switch (id) {
    case CodecId::kRaw: return "raw";
    case CodecId::kJpeg: return "jpeg";
    case CodecId::kQuant: return "quant";
  }
  return "unknown";
}

CodecId parse_codec(std::string_view name) {
  if (name == "raw") return CodecId::kRaw;
  if (name == "jpeg") return CodecId::kJpeg;
  if (name == "quant") return CodecId::kQuant;
  throw Error(ErrorCode::kUnknownCodec, "unknown codec '" + std::string(name) + "'");
}

CodecId codec_from_wire(std::uint8_t value) {
  if (value > 2)
    throw Error(ErrorCode::kUnknownCodec, "unknown codec id " + std::to_string(value));
  return static_cast<CodecId>(value);
}

std::pair<std::uint32_t, std::uint32_t> fitted_size(std::uint32_t width, std::uint32_t height,
                                                    std::uint32_t max_dim) {
  if (max_dim < 16) throw Error(ErrorCode::kInvalidArgument, "max_dim must be >= 16");
  const std::uint32_t longer = std::max(width, height);
  if (longer <= max_dim) return {width, height};
  const auto scale_round = [&](std::uint32_t side) {
    const std::uint64_t num = 2ULL * side * max_dim + longer;
    return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(num / (2ULL * longer)));
  };
  if (width >= height) return {max_dim, scale_round(height)};
  return {scale_round(width), max_dim};
}

Frame resize_max(const Frame& frame, std::uint32_t max_dim) {
  const auto [dw, dh] = fitted_size(frame.width(), frame.height(), max_dim);
  if (dw == frame.width() && dh == frame.height()) return frame;

  const std::uint32_t sw = frame.width();
  const std::uint32_t sh = frame.height();
  // Destination pixel (x, y) averages source columns
  // [floor(x*sw/dw), floor((x+1)*sw/dw)) and the matching row span.
  std::vector<std::uint32_t> x_lo(dw), x_hi(dw);
  for (std::uint32_t x = 0; x < dw; ++x) {
    x_lo[x] = static_cast<std::uint32_t>(static_cast<std::uint64_t>(x) * sw / dw);
    x_hi[x] = std::max(x_lo[x] + 1,
                       static_cast<std::uint32_t>(static_cast<std::uint64_t>(x + 1) * sw / dw));
  }
  const auto src = frame.pixels();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(dw) * dh * 3);
  std::vector<std::uint32_t> row_acc(static_cast<std::size_t>(sw) * 3);
  for (std::uint32_t y = 0; y < dh; ++y) {
    const auto y0 = static_cast<std::uint32_t>(static_cast<std::uint64_t>(y) * sh / dh);
    const auto y1 = std::max(
        y0 + 1, static_cast<std::uint32_t>(static_cast<std::uint64_t>(y + 1) * sh / dh));
    std::fill(row_acc.begin(), row_acc.end(), 0);
    for (std::uint32_t sy = y0; sy < y1; ++sy) {
      const std::uint8_t* row = src.data() + static_cast<std::size_t>(sy) * sw * 3;
      for (std::size_t i = 0; i < row_acc.size(); ++i) row_acc[i] += row[i];
    }
    const std::uint32_t rows = y1 - y0;
    for (std::uint32_t x = 0; x < dw; ++x) {
      const std::uint32_t count = (x_hi[x] - x_lo[x]) * rows;
      for (int c = 0; c < 3; ++c) {
        std::uint32_t sum = 0;
        for (std::uint32_t sx = x_lo[x]; sx < x_hi[x]; ++sx) sum += row_acc[sx * 3 + c];
        out[(static_cast<std::size_t>(y) * dw + x) * 3 + c] =
            static_cast<std::uint8_t>((sum + count / 2) / count);
      }
    }
  }
  return Frame(dw, dh, std::move(out), frame.frame_index());
}

std::uint32_t quant_step(int quality) {
  if (quality < 1 || quality > 100)
    throw Error(ErrorCode::kInvalidArgument, "quality must be in 1..100");
  return 1 + static_cast<std::uint32_t>((100 - quality) / 10);
}

std::uint8_t quantize(std::uint8_t value, std::uint32_t step) {
  const std::uint32_t index = (2U * value + step) / (2U * step);
  return static_cast<std::uint8_t>(std::min<std::uint32_t>(255, index * step));
}

namespace {

// QUANT payload: one byte holding the step, then runs of identical quantized
// pixels in raster order. A run is a LEB128 length followed by the three
// channel indices round(v / step), one byte each.
void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint64_t get_varint(std::span<const std::uint8_t> in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos >= in.size()) throw Error(ErrorCode::kCorruptPayload, "truncated run length");
    const std::uint8_t byte = in[pos++];
    v |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
    if ((byte & 0x80) == 0) return v;
  }
  throw Error(ErrorCode::kCorruptPayload, "run length overflows");
}

std::vector<std::uint8_t> quant_pack(const Frame& frame, std::uint32_t step) {
  std::array<std::uint8_t, 256> index{};
  for (std::uint32_t v = 0; v < 256; ++v)
    index[v] = static_cast<std::uint8_t>((2U * v + step) / (2U * step));

  const auto px = frame.pixels();
  std::vector<std::uint8_t> out;
  out.reserve(px.size() / 32 + 16);
  out.push_back(static_cast<std::uint8_t>(step));
  std::array<std::uint8_t, 3> current{index[px[0]], index[px[1]], index[px[2]]};
  std::uint64_t run = 1;
  for (std::size_t i = 3; i < px.size(); i += 3) {
    const std::array<std::uint8_t, 3> q{index[px[i]], index[px[i + 1]], index[px[i + 2]]};
    if (q == current) {
      ++run;
      continue;
    }
    put_varint(out, run);
    out.insert(out.end(), current.begin(), current.end());
    current = q;
    run = 1;
  }
  put_varint(out, run);
  out.insert(out.end(), current.begin(), current.end());
  return out;
}

Frame quant_unpack(const EncodedFrame& enc) {
  std::span<const std::uint8_t> in = enc.payload;
  const std::uint32_t step = in[0];
  if (step < 1 || step > 10) throw Error(ErrorCode::kCorruptPayload, "invalid QUANT step");
  const std::uint32_t max_index = (2U * 255 + step) / (2U * step);
  const std::size_t total = static_cast<std::size_t>(enc.width) * enc.height;
  std::vector<std::uint8_t> pixels(total * 3);
  std::size_t pos = 1;
  std::size_t filled = 0;
  while (pos < in.size()) {
    const std::uint64_t run = get_varint(in, pos);
    if (run == 0 || run > total - filled)
      throw Error(ErrorCode::kCorruptPayload, "QUANT run exceeds raster");
    if (in.size() - pos < 3) throw Error(ErrorCode::kCorruptPayload, "truncated QUANT run");
    std::array<std::uint8_t, 3> value{};
    for (int c = 0; c < 3; ++c) {
      const std::uint32_t idx = in[pos++];
      if (idx > max_index) throw Error(ErrorCode::kCorruptPayload, "QUANT index out of range");
      value[c] = static_cast<std::uint8_t>(std::min<std::uint32_t>(255, idx * step));
    }
    for (std::uint64_t k = 0; k < run; ++k, ++filled)
      std::memcpy(&pixels[filled * 3], value.data(), 3);
  }
  if (filled != total) throw Error(ErrorCode::kCorruptPayload, "QUANT payload too short");
  return Frame(enc.width, enc.height, std::move(pixels), enc.frame_index);
}

#ifdef NAVP_HAVE_JPEG

struct JpegErrorJump {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_silent(j_common_ptr) {}

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorJump*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// No C++ objects with destructors may live between setjmp and the libjpeg
// calls below; failures are reported through the return value.
bool jpeg_compress_raw(const Frame& frame, int quality, unsigned char** out,
                       unsigned long* out_size, char* message) {
  jpeg_compress_struct cinfo;
  JpegErrorJump err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    std::strncpy(message, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, out, out_size);
  cinfo.image_width = frame.width();
  cinfo.image_height = frame.height();
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::uint8_t* base = frame.pixels().data();
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(base + static_cast<std::size_t>(cinfo.next_scanline) *
                                                   frame.width() * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

bool jpeg_decompress_raw(const EncodedFrame& enc, std::uint8_t* pixels, char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorJump err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  err.mgr.output_message = jpeg_silent;
  if (setjmp(err.jump)) {
    std::strncpy(message, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, enc.payload.data(), enc.payload.size());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  if (cinfo.output_width != enc.width || cinfo.output_height != enc.height ||
      cinfo.output_components != 3) {
    std::strncpy(message, "JPEG dimensions disagree with frame header", JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels + static_cast<std::size_t>(cinfo.output_scanline) * enc.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  const bool clean = err.mgr.num_warnings == 0;
  jpeg_destroy_decompress(&cinfo);
  if (!clean) std::strncpy(message, "truncated or damaged JPEG data", JMSG_LENGTH_MAX);
  return clean;
}

#endif

}  // namespace

bool jpeg_available() {
#ifdef NAVP_HAVE_JPEG
  return true;
#else
  return false;
#endif
}

EncodedFrame encode(const Frame& frame, int quality, CodecId codec) {
  if (quality < 1 || quality > 100)
    throw Error(ErrorCode::kInvalidArgument, "quality must be in 1..100");
  EncodedFrame enc{frame.frame_index(), frame.width(), frame.height(), codec, {}};
  switch (codec) {
    case CodecId::kRaw:
      enc.payload.assign(frame.pixels().begin(), frame.pixels().end());
      break;
    case CodecId::kQuant:
      enc.payload = quant_pack(frame, quant_step(quality));
      break;
    case CodecId::kJpeg: {
#ifdef NAVP_HAVE_JPEG
      unsigned char* buffer = nullptr;
      unsigned long size = 0;
      char message[JMSG_LENGTH_MAX] = {};
      const bool ok = jpeg_compress_raw(frame, quality, &buffer, &size, message);
      if (ok) enc.payload.assign(buffer, buffer + size);
      std::free(buffer);
      if (!ok) throw Error(ErrorCode::kCorruptPayload, std::string("JPEG encode: ") + message);
#else
      throw Error(ErrorCode::kUnknownCodec, "built without JPEG support");
#endif
      break;
    }
    default:
      throw Error(ErrorCode::kUnknownCodec, "unknown codec id");
  }
  return enc;
}

Frame decode(const EncodedFrame& enc) {
  if (enc.width == 0 || enc.height == 0)
    throw Error(ErrorCode::kCorruptPayload, "encoded frame has zero dimension");
  if (enc.payload.empty()) throw Error(ErrorCode::kCorruptPayload, "empty payload");
  switch (enc.codec) {
    case CodecId::kRaw:
      if (enc.payload.size() != static_cast<std::size_t>(enc.width) * enc.height * 3)
        throw Error(ErrorCode::kCorruptPayload, "RAW payload length mismatch");
      return Frame(enc.width, enc.height, enc.payload, enc.frame_index);
    case CodecId::kQuant:
      return quant_unpack(enc);
    case CodecId::kJpeg: {
#ifdef NAVP_HAVE_JPEG
      std::vector<std::uint8_t> pixels(static_cast<std::size_t>(enc.width) * enc.height * 3);
      char message[JMSG_LENGTH_MAX] = {};
      if (!jpeg_decompress_raw(enc, pixels.data(), message))
        throw Error(ErrorCode::kCorruptPayload, std::string("JPEG decode: ") + message);
      return Frame(enc.width, enc.height, std::move(pixels), enc.frame_index);
#else
      throw Error(ErrorCode::kUnknownCodec, "built without JPEG support");
#endif
    }
  }
  throw Error(ErrorCode::kUnknownCodec, "unknown codec id");
}

}  // namespace navp
