#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fpm/acquisition.hpp"
#include "fpm/image.hpp"
#include "fpm/noise.hpp"

namespace fpm {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// PGM (binary P5). 16-bit samples are big-endian per the Netpbm convention.
// ---------------------------------------------------------------------------

inline void write_pgm(const fs::path& path, const RealImage& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("write_pgm: bad bit depth");
  const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
  out << "P5\n" << img.width() << " " << img.height() << "\n" << maxval << "\n";
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double clipped = std::min(std::max(std::round(img(x, y)), 0.0), double(maxval));
      const auto v = static_cast<unsigned>(clipped);
      if (bit_depth == 8) {
        const unsigned char b = static_cast<unsigned char>(v);
        out.write(reinterpret_cast<const char*>(&b), 1);
      } else {
        const unsigned char hi = static_cast<unsigned char>(v >> 8);
        const unsigned char lo = static_cast<unsigned char>(v & 0xff);
        out.write(reinterpret_cast<const char*>(&hi), 1);
        out.write(reinterpret_cast<const char*>(&lo), 1);
      }
    }
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& token) {
  token.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!token.empty()) return 0;
    } else {
      token.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return token.empty() ? -1 : 0;
}

}  // namespace detail

struct PgmImage {
  RealImage pixels;
  unsigned maxval = 0;
  int bit_depth() const { return maxval > 255 ? 16 : 8; }
};

inline PgmImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path.string());
  std::string tok;
  if (detail::pgm_next_token(in, tok) || tok != "P5")
    throw std::runtime_error("read_pgm: not a binary PGM: " + path.string());
  std::size_t dims[3];
  for (std::size_t& d : dims) {
    if (detail::pgm_next_token(in, tok)) throw std::runtime_error("read_pgm: truncated header");
    d = static_cast<std::size_t>(std::stoull(tok));
  }
  PgmImage img;
  img.maxval = static_cast<unsigned>(dims[2]);
  img.pixels = RealImage(dims[0], dims[1]);
  const bool wide = img.maxval > 255;
  for (std::size_t y = 0; y < dims[1]; ++y)
    for (std::size_t x = 0; x < dims[0]; ++x) {
      int b0 = in.get();
      if (b0 == EOF) throw std::runtime_error("read_pgm: truncated pixel data");
      if (wide) {
        int b1 = in.get();
        if (b1 == EOF) throw std::runtime_error("read_pgm: truncated pixel data");
        img.pixels(x, y) = static_cast<double>((b0 << 8) | b1);
      } else {
        img.pixels(x, y) = static_cast<double>(b0);
      }
    }
  return img;
}

// ---------------------------------------------------------------------------
// Flat 32-bit float rasters with a plain-text header sidecar.
// ---------------------------------------------------------------------------

inline std::string img_format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void write_float_raster(const fs::path& path, const RealImage& img, double pitch_um) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_float_raster: cannot open " + path.string());
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const float v = static_cast<float>(img(x, y));
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  fs::path hdr = path;
  hdr += ".hdr";
  std::ofstream side(hdr);
  side << "width=" << img.width() << "\n"
       << "height=" << img.height() << "\n"
       << "pitch_um=" << img_format_double(pitch_um) << "\n"
       << "dtype=float32\n"
       << "endianness=little\n";
}

inline RealImage read_float_raster(const fs::path& path) {
  fs::path hdr = path;
  hdr += ".hdr";
  std::ifstream side(hdr);
  if (!side) throw std::runtime_error("read_float_raster: missing sidecar " + hdr.string());
  std::size_t width = 0, height = 0;
  std::string line;
  while (std::getline(side, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "width") width = std::stoull(value);
    if (key == "height") height = std::stoull(value);
  }
  if (width == 0 || height == 0) throw std::runtime_error("read_float_raster: bad sidecar");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_float_raster: cannot open " + path.string());
  RealImage img(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      float v = 0.0f;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      if (!in) throw std::runtime_error("read_float_raster: truncated data");
      img(x, y) = v;
    }
  return img;
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string psnr_to_csv(const PsnrScore& score) {
  switch (score.cls) {
    case PsnrClass::PlusInfinity: return "+inf";
    case PsnrClass::MinusInfinity: return "-inf";
    case PsnrClass::Finite: break;
  }
  return csv_double(score.db);
}

/// Per-LED estimator dump; scored entries only (trend-skipped LEDs were
/// never captured, so they have no estimate to report).
inline void write_snr_report_csv(const fs::path& path, const AcquisitionPlan& plan) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_snr_report_csv: cannot open " + path.string());
  out << "row,col,illum_na,psnr_db,i_max,i_n,sigma_p,sigma_g,background,method,decision\n";
  for (const PlanEntry& e : plan.entries) {
    if (!e.score) continue;
    const SnrRecord& r = *e.score;
    out << r.led.row << "," << r.led.col << "," << csv_double(r.illum_na) << ","
        << psnr_to_csv(r.psnr) << "," << csv_double(r.i_max) << "," << csv_double(r.noise.chosen)
        << "," << (r.noise.poisson_sigma ? csv_double(*r.noise.poisson_sigma) : std::string())
        << "," << (r.noise.gaussian_sigma ? csv_double(*r.noise.gaussian_sigma) : std::string())
        << "," << csv_double(r.noise.background_level) << ","
        << (r.noise.method == NoiseMethod::Mle ? "MLE" : "Background") << ","
        << to_string(e.decision) << "\n";
  }
}

inline void write_plan_csv(const fs::path& path, const AcquisitionPlan& plan) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_plan_csv: cannot open " + path.string());
  out << "row,col,order,psnr_db,decision\n";
  std::size_t order = 0;
  for (const PlanEntry& e : plan.entries) {
    out << e.led.row << "," << e.led.col << "," << order++ << ","
        << (e.score ? psnr_to_csv(e.score->psnr) : std::string()) << "," << to_string(e.decision)
        << "\n";
  }
}

inline void write_error_trace_csv(const fs::path& path, const std::vector<double>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_error_trace_csv: cannot open " + path.string());
  out << "iteration,error\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << (i + 1) << "," << img_format_double(trace[i]) << "\n";
}

// ---------------------------------------------------------------------------
// Directory-backed frame source (PGM files + JSON manifest)
// ---------------------------------------------------------------------------

inline std::string frame_file_name(LedIndex led) {
  return "frame_r" + std::to_string(led.row) + "_c" + std::to_string(led.col) + ".pgm";
}

/// Frames captured earlier (or produced by another tool) served from disk.
class DirectoryFrameSource : public FrameSource {
 public:
  explicit DirectoryFrameSource(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::exists(dir_ / "manifest.json"))
      throw std::runtime_error("DirectoryFrameSource: no manifest.json in " + dir_.string());
  }

  RawFrame capture(LedIndex led) override {
    const fs::path file = dir_ / frame_file_name(led);
    if (!fs::exists(file))
      throw std::runtime_error("DirectoryFrameSource: missing frame " + file.string());
    RawFrame frame;
    frame.pixels = read_pgm(file).pixels;
    frame.led = led;
    frame.exposure_id = file.filename().string();
    return frame;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
};

}  // namespace fpm
