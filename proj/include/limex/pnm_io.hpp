#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "limex/error.hpp"
#include "limex/image.hpp"

namespace limex {

namespace detail {

/// Reads the next header token of a PNM file, skipping whitespace and
/// '#' comments (which run to end of line).
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    if (std::isspace(c)) continue;
    break;
  }
  if (c == EOF) throw InvalidInput("unexpected end of PNM header");
  while (c != EOF && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c == '#') in.unget();
  return tok;
}

inline int pnm_int(std::istream& in) {
  const std::string tok = pnm_token(in);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw InvalidInput("malformed PNM header token '" + tok + "'");
  }
}

}  // namespace detail

/// Reads P2/P5 (grayscale) and P3/P6 (color) portable pixmaps with
/// maxval up to 255. Samples map linearly to [0,1] as value/maxval.
inline Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open image file: " + path);
  const std::string magic = detail::pnm_token(in);
  bool ascii, color;
  if (magic == "P2") { ascii = true; color = false; }
  else if (magic == "P3") { ascii = true; color = true; }
  else if (magic == "P5") { ascii = false; color = false; }
  else if (magic == "P6") { ascii = false; color = true; }
  else throw InvalidInput("unsupported PNM magic '" + magic + "' in " + path);

  const int width = detail::pnm_int(in);
  const int height = detail::pnm_int(in);
  const int maxval = detail::pnm_int(in);
  if (width <= 0 || height <= 0)
    throw InvalidInput("non-positive PNM dimensions in " + path);
  if (maxval < 1 || maxval > 255)
    throw InvalidInput("unsupported PNM maxval " + std::to_string(maxval) +
                       " (expected 1..255) in " + path);

  Image img(height, width, color ? 3 : 1);
  const std::size_t n = img.sample_count();
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = detail::pnm_int(in);
      if (v < 0 || v > maxval)
        throw InvalidInput("PNM sample out of range in " + path);
      img.pixels[i] = static_cast<double>(v) / maxval;
    }
  } else {
    in.get();  // single whitespace byte after maxval
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw InvalidInput("truncated PNM payload in " + path);
    for (std::size_t i = 0; i < n; ++i) {
      if (raw[i] > maxval)
        throw InvalidInput("PNM sample out of range in " + path);
      img.pixels[i] = static_cast<double>(raw[i]) / maxval;
    }
  }
  return img;
}

/// Writes PGM for single-channel images, PPM for 3-channel images, with
/// maxval 255. `binary` selects P5/P6 over P2/P3.
inline void write_pnm(const Image& img, const std::string& path,
                      bool binary = true) {
  validate_image(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write image file: " + path);
  const bool color = img.channels == 3;
  const std::string magic = binary ? (color ? "P6" : "P5") : (color ? "P3" : "P2");
  out << magic << "\n" << img.width << " " << img.height << "\n255\n";
  const std::size_t n = img.sample_count();
  if (binary) {
    std::vector<unsigned char> raw(n);
    for (std::size_t i = 0; i < n; ++i)
      raw[i] = static_cast<unsigned char>(std::lround(img.pixels[i] * 255.0));
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(n));
  } else {
    const std::size_t per_row = static_cast<std::size_t>(img.width) * img.channels;
    for (std::size_t i = 0; i < n; ++i) {
      out << std::lround(img.pixels[i] * 255.0);
      out << (((i + 1) % per_row == 0) ? '\n' : ' ');
    }
  }
  if (!out) throw InvalidInput("failed writing image file: " + path);
}

/// Reads either a PNM image or a CSV image depending on the leading byte.
inline Image read_image(const std::string& path, int csv_channels = 1);

/// CSV image: one line per image row, width*channels comma-separated values.
/// Multi-channel samples are interleaved within the row.
inline void write_image_csv(const Image& img, const std::string& path) {
  validate_image(img);
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write image file: " + path);
  char buf[40];
  const int per_row = img.width * img.channels;
  for (int y = 0; y < img.height; ++y) {
    for (int i = 0; i < per_row; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g",
                    img.pixels[static_cast<std::size_t>(y) * per_row + i]);
      out << buf << (i + 1 == per_row ? "" : ",");
    }
    out << "\n";
  }
}

inline Image read_image_csv(const std::string& path, int channels = 1) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open image file: " + path);
  std::vector<double> values;
  int height = 0, width = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidInput("malformed CSV value '" + cell + "' in " + path);
      }
      ++cols;
    }
    if (width < 0) width = cols;
    else if (cols != width)
      throw InvalidInput("ragged CSV rows in " + path);
    ++height;
  }
  if (height == 0 || width <= 0) throw InvalidInput("empty CSV image: " + path);
  if (width % channels != 0)
    throw InvalidInput("CSV row length not divisible by channel count in " + path);
  Image img;
  img.height = height;
  img.width = width / channels;
  img.channels = channels;
  img.pixels = std::move(values);
  validate_image(img);
  return img;
}

inline Image read_image(const std::string& path, int csv_channels) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw InvalidInput("cannot open image file: " + path);
  const int first = probe.peek();
  probe.close();
  if (first == 'P') return read_pnm(path);
  return read_image_csv(path, csv_channels);
}

/// Partition files: CSV of 1-based labels (one line per image row) plus a
/// JSON sidecar `<path>.json` holding {"d":..., "height":..., "width":...}.
inline void write_partition(const SuperpixelPartition& part,
                            const std::string& csv_path) {
  validate_partition(part);
  std::ofstream out(csv_path);
  if (!out) throw InvalidInput("cannot write partition file: " + csv_path);
  for (int y = 0; y < part.height; ++y) {
    for (int x = 0; x < part.width; ++x)
      out << (part.labels[static_cast<std::size_t>(y) * part.width + x] + 1)
          << (x + 1 == part.width ? "" : ",");
    out << "\n";
  }
  nlohmann::ordered_json sidecar;
  sidecar["d"] = part.d;
  sidecar["height"] = part.height;
  sidecar["width"] = part.width;
  std::ofstream side(csv_path + ".json");
  if (!side) throw InvalidInput("cannot write partition sidecar: " + csv_path + ".json");
  side << sidecar.dump(2) << "\n";
}

inline SuperpixelPartition read_partition(const std::string& csv_path) {
  std::ifstream side(csv_path + ".json");
  if (!side) throw InvalidInput("cannot open partition sidecar: " + csv_path + ".json");
  nlohmann::json sidecar;
  try {
    side >> sidecar;
  } catch (const std::exception& e) {
    throw InvalidInput("malformed partition sidecar: " + std::string(e.what()));
  }
  SuperpixelPartition part;
  part.d = sidecar.at("d").get<int>();
  part.height = sidecar.at("height").get<int>();
  part.width = sidecar.at("width").get<int>();

  std::ifstream in(csv_path);
  if (!in) throw InvalidInput("cannot open partition file: " + csv_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        part.labels.push_back(std::stoi(cell) - 1);
      } catch (const std::exception&) {
        throw InvalidInput("malformed partition label '" + cell + "' in " + csv_path);
      }
    }
  }
  validate_partition(part);
  return part;
}

}  // namespace limex
