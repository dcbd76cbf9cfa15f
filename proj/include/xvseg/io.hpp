#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xvseg/net.hpp"
#include "xvseg/train.hpp"

namespace xvseg {

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// Per-epoch metric log, one row per epoch. First line carries the schema
// version so downstream plotting can refuse files it does not understand;
// doubles are printed with %.17g, which round-trips exactly, so identical
// runs produce byte-identical files.
void write_metrics_csv(const std::string& path,
                       const std::vector<EpochStats>& log);

// Minimal 8-bit grayscale PNG (one IDAT, filter 0 on every scanline).
// `pixels` is row-major h*w. Mask exports use class indices as pixel
// values with 255 for ignore.
void write_png_gray(const std::string& path, int h, int w,
                    const std::vector<std::uint8_t>& pixels);

// Versioned binary parameter dump: magic + version + (d_model, d, k) +
// shape table + raw little-endian doubles in parameters() order. Loading
// rebuilds the architecture from the recorded sizes and fails loudly on a
// shape mismatch rather than reinterpreting bytes.
void save_checkpoint(const std::string& path, const ToyNetParams& net);
ToyNetParams load_checkpoint(const std::string& path);

}  // namespace xvseg
