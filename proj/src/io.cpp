#include "xvseg/io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace xvseg {
namespace {

constexpr char kMagic[4] = {'X', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits >> (8 * i)));
  }
}

// Little-endian cursor over a loaded blob; every read is bounds-checked so
// a truncated file fails with a message instead of running off the end.
class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(bytes_[pos_ + i]))
              << (8 * i);
    }
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw IoError("checkpoint: '" + path_ + "' is truncated");
    }
  }

  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("io: cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("io: short write to '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("io: cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochStats>& log) {
  std::string out = "# metrics-schema: v1\n";
  out +=
      "epoch,miou,mfdr,mfnr,loss_total,loss_seg,loss_cls,"
      "loss_reg_mask,loss_reg_fact\n";
  for (const EpochStats& row : log) {
    out += std::to_string(row.epoch);
    for (const double v :
         {row.val.miou, row.val.mfdr, row.val.mfnr, row.loss_total,
          row.loss_seg, row.loss_cls, row.loss_reg_mask, row.loss_reg_fact}) {
      out += ',';
      out += fmt_double(v);
    }
    out += '\n';
  }
  write_file(path, out);
}

void write_png_gray(const std::string& path, int h, int w,
                    const std::vector<std::uint8_t>& pixels) {
  if (h <= 0 || w <= 0) throw ParamError("png: dimensions must be positive");
  if (pixels.size() != static_cast<std::size_t>(h) * w) {
    throw ParamError("png: pixel buffer does not match dimensions");
  }
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("io: cannot open '" + path + "' for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("png: encoding '" + path + "' failed");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() +
                                             static_cast<std::size_t>(y) * w));
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("io: short write to '" + path + "'");
}

void save_checkpoint(const std::string& path, const ToyNetParams& net) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(net.d_model));
  put_u32(out, static_cast<std::uint32_t>(net.cvlr.d));
  put_u32(out, static_cast<std::uint32_t>(net.k));
  const std::vector<Tensor> params = net.parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Tensor& p : params) {
    const Shape& shape = p.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (const int dim : shape) put_u32(out, static_cast<std::uint32_t>(dim));
    for (std::size_t i = 0; i < p.size(); ++i) put_f64(out, p.data()[i]);
  }
  write_file(path, out);
}

ToyNetParams load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  Reader in(bytes, path);
  char magic[4];
  in.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint: '" + path + "' has no checkpoint header");
  }
  const std::uint32_t version = in.u32();
  if (version != kVersion) {
    throw IoError("checkpoint: '" + path + "' has unsupported version " +
                  std::to_string(version));
  }
  const int d_model = static_cast<int>(in.u32());
  const int d = static_cast<int>(in.u32());
  const int k = static_cast<int>(in.u32());
  if (d_model <= 0 || d <= 0 || k <= 0) {
    throw IoError("checkpoint: '" + path + "' records non-positive sizes");
  }

  Rng rng(0);  // every value is overwritten below
  ToyNetParams net = make_toynet(d_model, d, k, rng);
  std::vector<Tensor> params = net.parameters();
  const std::uint32_t count = in.u32();
  if (count != params.size()) {
    throw IoError("checkpoint: '" + path + "' holds " + std::to_string(count) +
                  " tensors, expected " + std::to_string(params.size()));
  }
  for (Tensor& p : params) {
    const Shape& shape = p.shape();
    const std::uint32_t ndim = in.u32();
    bool match = ndim == shape.size();
    Shape stored;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      stored.push_back(static_cast<int>(in.u32()));
      match = match && stored.back() == shape[i];
    }
    if (!match) {
      throw IoError("checkpoint: '" + path +
                    "' tensor shape does not match the recorded sizes");
    }
    for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = in.f64();
  }
  if (!in.exhausted()) {
    throw IoError("checkpoint: '" + path + "' has trailing bytes");
  }
  return net;
}

}  // namespace xvseg
