// Binary PGM/PPM image files and class palette text files.
#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "segprop/common.hpp"
#include "segprop/core.hpp"

namespace segprop {

/// 8-bit image, 1 (gray) or 3 (RGB) interleaved channels.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<uint8_t> data;

    Image8() = default;
    Image8(int w, int h, int ch, uint8_t fill = 0)
        : width(w), height(h), channels(ch),
          data(static_cast<size_t>(w) * h * ch, fill) {}

    uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

namespace detail {
// Reads one whitespace-delimited PNM header token, skipping # comments.
inline std::string pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok += static_cast<char>(c);
    }
    if (tok.empty()) throw TruncatedFile("unexpected end of PNM header");
    return tok;
}
}  // namespace detail

inline Image8 read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::string magic = detail::pnm_token(in);
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw BadMagic("not a binary PGM/PPM: " + path);
    int w = std::stoi(detail::pnm_token(in));
    int h = std::stoi(detail::pnm_token(in));
    int maxval = std::stoi(detail::pnm_token(in));
    if (w < 0 || h < 0 || maxval <= 0 || maxval > 255)
        throw Error("unsupported PNM header in " + path);
    Image8 img(w, h, channels);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (static_cast<size_t>(in.gcount()) != img.data.size())
        throw TruncatedFile("short pixel data in " + path);
    return img;
}

inline void write_pgm(const std::string& path, const Image8& img) {
    if (img.channels != 1) throw DimensionMismatch("write_pgm: expected 1 channel");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
}

inline void write_ppm(const std::string& path, const Image8& img) {
    if (img.channels != 3) throw DimensionMismatch("write_ppm: expected 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
}

/// Label maps travel as plain PGM: pixel value = class index.
inline LabelMap read_label_pgm(const std::string& path, int num_classes = 0) {
    Image8 img = read_pnm(path);
    if (img.channels != 1) throw Error("label PGM must be single channel: " + path);
    LabelMap m(img.width, img.height, 1);
    m.data = std::move(img.data);
    int max_idx = 0;
    for (uint8_t v : m.data) max_idx = std::max(max_idx, static_cast<int>(v));
    m.num_classes = num_classes > 0 ? num_classes : max_idx + 1;
    if (max_idx >= m.num_classes) throw Error("label index exceeds num_classes in " + path);
    return m;
}

inline void write_label_pgm(const std::string& path, const LabelMap& labels) {
    Image8 img(labels.width, labels.height, 1);
    img.data = labels.data;
    write_pgm(path, img);
}

// Palette file: one line per class, "<index> <name> <r> <g> <b>".
inline ClassPalette read_palette(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    ClassPalette p;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream ss(t);
        PaletteEntry e;
        int r, g, b;
        if (!(ss >> e.index >> e.name >> r >> g >> b))
            throw Error("bad palette line: " + t);
        e.r = static_cast<uint8_t>(r);
        e.g = static_cast<uint8_t>(g);
        e.b = static_cast<uint8_t>(b);
        p.entries.push_back(e);
    }
    p.validate();
    return p;
}

inline void write_palette(const std::string& path, const ClassPalette& p) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& e : p.entries)
        out << e.index << " " << e.name << " " << int(e.r) << " " << int(e.g) << " "
            << int(e.b) << "\n";
}

/// 0.5/0.5 alpha blend of a gray frame with palette colors.
inline Image8 overlay_labels(const Image8& frame, const LabelMap& labels,
                             const ClassPalette& palette, double alpha = 0.5) {
    if (frame.width != labels.width || frame.height != labels.height)
        throw DimensionMismatch("overlay: frame/labels size mismatch");
    Image8 out(frame.width, frame.height, 3);
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            uint8_t cls = labels.at(x, y);
            const PaletteEntry& e = palette.entries.at(cls);
            double g = frame.channels == 1
                           ? frame.at(x, y)
                           : (frame.at(x, y, 0) + frame.at(x, y, 1) + frame.at(x, y, 2)) / 3.0;
            out.at(x, y, 0) = static_cast<uint8_t>((1 - alpha) * g + alpha * e.r + 0.5);
            out.at(x, y, 1) = static_cast<uint8_t>((1 - alpha) * g + alpha * e.g + 0.5);
            out.at(x, y, 2) = static_cast<uint8_t>((1 - alpha) * g + alpha * e.b + 0.5);
        }
    }
    return out;
}

}  // namespace segprop
