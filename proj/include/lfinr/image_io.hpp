#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lfinr/lightfield.hpp"

namespace lfinr {

namespace detail {

inline void skip_ppm_whitespace(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_ppm_int(std::istream& in, const std::string& path) {
  skip_ppm_whitespace(in);
  int value = 0;
  if (!(in >> value) || value < 0) throw IoError("malformed PPM header in " + path);
  return value;
}

}  // namespace detail

// Binary PPM (P6) reader. Accepts 8-bit (maxval <= 255) and 16-bit
// (big-endian sample pairs) files; samples are normalized by maxval.
template <typename S>
Sai<S> read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw IoError("not a binary PPM (P6): " + path);
  const int w = detail::read_ppm_int(in, path);
  const int h = detail::read_ppm_int(in, path);
  const int maxval = detail::read_ppm_int(in, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    throw IoError("bad PPM dimensions/maxval in " + path);
  in.get();  // single whitespace byte after maxval

  const bool wide = maxval > 255;
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  std::vector<std::uint8_t> raw(n * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw IoError("truncated PPM payload in " + path);

  Sai<S> img(h, w);
  const double inv = 1.0 / maxval;
  std::size_t i = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c, ++i) {
        int v = wide ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
        img.planes[c](y, x) = static_cast<S>(v * inv);
      }
    }
  }
  return img;
}

template <typename S>
void write_ppm(const std::string& path, const Sai<S>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  const int h = img.height(), w = img.width();
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
  std::size_t i = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c, ++i) {
        double v = std::clamp(static_cast<double>(img.planes[c](y, x)), 0.0, 1.0);
        raw[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("short write to " + path);
}

// Raw float container: "LFRW" magic, u16 H, u16 W (little-endian), then one
// or more frames of H*W*3 little-endian 32-bit floats, row-major with
// interleaved RGB per pixel.
inline constexpr char kRawMagic[4] = {'L', 'F', 'R', 'W'};

template <typename S>
void write_raw_frames(const std::string& path, const std::vector<const Sai<S>*>& frames) {
  if (frames.empty()) throw IoError("write_raw_frames: no frames");
  const int h = frames[0]->height(), w = frames[0]->width();
  if (h > 65535 || w > 65535) throw IoError("raw container caps dimensions at 65535");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out.write(kRawMagic, 4);
  const std::uint16_t hw[2] = {static_cast<std::uint16_t>(h), static_cast<std::uint16_t>(w)};
  out.write(reinterpret_cast<const char*>(hw), 4);
  std::vector<float> buf(static_cast<std::size_t>(h) * w * 3);
  for (const Sai<S>* f : frames) {
    if (f->height() != h || f->width() != w)
      throw IoError("write_raw_frames: inconsistent frame sizes");
    std::size_t i = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c, ++i) buf[i] = static_cast<float>(f->planes[c](y, x));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write to " + path);
}

template <typename S>
std::vector<Sai<S>> read_raw_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kRawMagic, 4) != 0)
    throw IoError("not an LFRW container: " + path);
  std::uint16_t hw[2];
  in.read(reinterpret_cast<char*>(hw), 4);
  if (in.gcount() != 4) throw IoError("truncated LFRW header in " + path);
  const int h = hw[0], w = hw[1];
  if (h < 1 || w < 1) throw IoError("bad LFRW dimensions in " + path);
  const std::size_t frame_floats = static_cast<std::size_t>(h) * w * 3;
  std::vector<float> buf(frame_floats);
  std::vector<Sai<S>> frames;
  for (;;) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(frame_floats * sizeof(float)));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    if (got != frame_floats * sizeof(float))
      throw IoError("truncated LFRW frame in " + path);
    Sai<S> img(h, w);
    std::size_t i = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c, ++i) img.planes[c](y, x) = static_cast<S>(buf[i]);
    frames.push_back(std::move(img));
  }
  if (frames.empty()) throw IoError("LFRW container holds no frames: " + path);
  return frames;
}

// Reads a single view image; dispatches on extension (.ppm or .lfrw).
template <typename S>
Sai<S> read_view_image(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".lfrw") {
    auto frames = read_raw_frames<S>(path);
    if (frames.size() != 1) throw IoError("expected a single frame in " + path);
    return std::move(frames.front());
  }
  return read_ppm<S>(path);
}

inline std::string view_filename(int u, int v, const std::string& ext = ".ppm") {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%02d_%02d", u, v);
  return std::string(buf) + ext;
}

// Loads a directory of view_{u:02}_{v:02}.ppm (or .lfrw) files. The grid
// extent is inferred from the largest present coordinate; every view of the
// implied grid must exist and all views must share one resolution.
template <typename S>
LightField<S> load_lightfield(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);

  struct Found {
    int u, v;
    std::string path;
  };
  std::vector<Found> found;
  int max_u = -1, max_v = -1;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    int u = 0, v = 0;
    char ext[8] = {0};
    if (std::sscanf(name.c_str(), "view_%2d_%2d%7s", &u, &v, ext) == 3 &&
        (std::strcmp(ext, ".ppm") == 0 || std::strcmp(ext, ".lfrw") == 0)) {
      found.push_back({u, v, entry.path().string()});
      max_u = std::max(max_u, u);
      max_v = std::max(max_v, v);
    }
  }
  if (found.empty()) throw IoError("no view_UU_VV images found in " + dir);

  const int u_views = max_u + 1, v_views = max_v + 1;
  std::vector<const Found*> grid(static_cast<std::size_t>(u_views) * v_views, nullptr);
  for (const auto& f : found) grid[static_cast<std::size_t>(f.u) * v_views + f.v] = &f;

  LightField<S> lf;
  lf.u_views = u_views;
  lf.v_views = v_views;
  lf.views.resize(grid.size());
  int h = -1, w = -1;
  for (int u = 0; u < u_views; ++u) {
    for (int v = 0; v < v_views; ++v) {
      const Found* f = grid[static_cast<std::size_t>(u) * v_views + v];
      if (!f)
        throw IoError("missing view (" + std::to_string(u) + "," + std::to_string(v) +
                      ") in " + dir);
      Sai<S> img;
      try {
        img = read_view_image<S>(f->path);
      } catch (const IoError& e) {
        throw IoError("view (" + std::to_string(u) + "," + std::to_string(v) +
                      "): " + e.what());
      }
      if (h < 0) {
        h = img.height();
        w = img.width();
      } else if (img.height() != h || img.width() != w) {
        throw IoError("view (" + std::to_string(u) + "," + std::to_string(v) +
                      ") has inconsistent dimensions");
      }
      lf.view(u, v) = std::move(img);
    }
  }
  return lf;
}

template <typename S>
void save_lightfield(const std::string& dir, const LightField<S>& lf,
                     const std::string& ext = ".ppm") {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (int u = 0; u < lf.u_views; ++u)
    for (int v = 0; v < lf.v_views; ++v) {
      const std::string path = (fs::path(dir) / view_filename(u, v, ext)).string();
      if (ext == ".lfrw") {
        std::vector<const Sai<S>*> one{&lf.view(u, v)};
        write_raw_frames(path, one);
      } else {
        write_ppm(path, lf.view(u, v));
      }
    }
}

}  // namespace lfinr
