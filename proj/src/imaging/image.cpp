#include "grounder/imaging/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>

namespace grounder::imaging {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

std::uint32_t read_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
    append_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + crc_start, static_cast<uInt>(4 + data.size()));
    append_u32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t size,
                                       std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    uLongf dest_len = static_cast<uLongf>(expected);
    const int rc = uncompress(out.data(), &dest_len, data, static_cast<uLong>(size));
    if (rc != Z_OK || dest_len != expected) throw ImageError("PNG inflate failed");
    return out;
}

/// zlib stream with stored (uncompressed) deflate blocks only.
std::vector<std::uint8_t> zlib_store(const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> out;
    out.push_back(0x78);  // 32K window, deflate
    out.push_back(0x01);  // no dict, fastest
    std::size_t pos = 0;
    do {
        const std::size_t n = std::min<std::size_t>(data.size() - pos, 65535);
        const bool last = pos + n == data.size();
        out.push_back(last ? 1 : 0);
        out.push_back(static_cast<std::uint8_t>(n & 0xFF));
        out.push_back(static_cast<std::uint8_t>(n >> 8));
        out.push_back(static_cast<std::uint8_t>(~n & 0xFF));
        out.push_back(static_cast<std::uint8_t>((~n >> 8) & 0xFF));
        out.insert(out.end(), data.begin() + pos, data.begin() + pos + n);
        pos += n;
    } while (pos < data.size());
    const uLong adler = adler32(adler32(0L, Z_NULL, 0), data.data(),
                                static_cast<uInt>(data.size()));
    append_u32(out, static_cast<std::uint32_t>(adler));
    return out;
}

std::uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

}  // namespace

Image Image::filled(int w, int h, Rgb color) {
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) img.set(x, y, color);
    }
    return img;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0) {
        throw ImageError("not a PNG file");
    }
    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t length = read_u32(bytes.data() + pos);
        if (pos + 12 + length > bytes.size()) throw ImageError("truncated PNG chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* data = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (length != 13) throw ImageError("bad IHDR");
            width = static_cast<int>(read_u32(data));
            height = static_cast<int>(read_u32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (data[12] != 0) throw ImageError("interlaced PNG not supported");
            if (bit_depth != 8 || (color_type != 0 && color_type != 2 && color_type != 6)) {
                throw ImageError("only 8-bit gray/RGB/RGBA PNG supported");
            }
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + length);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + length;
    }
    if (width <= 0 || height <= 0 || idat.empty()) throw ImageError("incomplete PNG");

    const int channels = color_type == 2 ? 3 : (color_type == 6 ? 4 : 1);
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    const std::size_t raw_size = (stride + 1) * height;
    std::vector<std::uint8_t> raw = zlib_inflate(idat.data(), idat.size(), raw_size);

    Image img;
    img.width = width;
    img.height = height;
    img.pixels.resize(static_cast<std::size_t>(width) * height * 3);
    std::vector<std::uint8_t> prev(stride, 0);
    std::vector<std::uint8_t> cur(stride, 0);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* line = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
        const std::uint8_t filter = line[0];
        for (std::size_t i = 0; i < stride; ++i) {
            const int x = line[1 + i];
            const int a = i >= static_cast<std::size_t>(channels) ? cur[i - channels] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
            int v = 0;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + a; break;
                case 2: v = x + b; break;
                case 3: v = x + (a + b) / 2; break;
                case 4: v = x + paeth(a, b, c); break;
                default: throw ImageError("unknown PNG filter");
            }
            cur[i] = static_cast<std::uint8_t>(v & 0xFF);
        }
        for (int x = 0; x < width; ++x) {
            Rgb px;
            if (channels == 1) {
                px = {cur[x], cur[x], cur[x]};
            } else {
                const std::size_t i = static_cast<std::size_t>(x) * channels;
                px = {cur[i], cur[i + 1], cur[i + 2]};
            }
            img.set(x, y, px);
        }
        std::swap(prev, cur);
    }
    return img;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    std::vector<std::uint8_t> raw;
    raw.reserve((static_cast<std::size_t>(image.width) * 3 + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);  // filter: none
        const std::size_t row = static_cast<std::size_t>(y) * image.width * 3;
        raw.insert(raw.end(), image.pixels.begin() + row,
                   image.pixels.begin() + row + static_cast<std::size_t>(image.width) * 3);
    }

    std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
    std::vector<std::uint8_t> ihdr;
    append_u32(ihdr, static_cast<std::uint32_t>(image.width));
    append_u32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", zlib_store(raw));
    append_chunk(out, "IEND", {});
    return out;
}

void fill_rect(Image& image, const spatial::BoundingBox& box, Rgb color) {
    const int x1 = std::clamp(box.x1, 0, image.width);
    const int x2 = std::clamp(box.x2, 0, image.width);
    const int y1 = std::clamp(box.y1, 0, image.height);
    const int y2 = std::clamp(box.y2, 0, image.height);
    for (int y = y1; y < y2; ++y) {
        for (int x = x1; x < x2; ++x) image.set(x, y, color);
    }
}

Image crop(const Image& image, const spatial::BoundingBox& box) {
    if (!box.valid() || box.x2 > image.width || box.y2 > image.height) {
        throw ImageError("crop box outside image");
    }
    Image out;
    out.width = box.x2 - box.x1;
    out.height = box.y2 - box.y1;
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            out.set(x, y, image.at(box.x1 + x, box.y1 + y));
        }
    }
    return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ImageError("cannot write file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace grounder::imaging
