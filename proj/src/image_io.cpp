#include "eagle/image_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "eagle/errors.hpp"

namespace eagle {

namespace {

uint32_t be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_be32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x >> 24));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x));
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expected) {
    std::vector<uint8_t> out(expected);
    uLongf out_len = out.size();
    const int rc = uncompress(out.data(), &out_len, in.data(), in.size());
    if (rc != Z_OK || out_len != expected)
        throw format_error("png: inflate failed or produced wrong length");
    return out;
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& in) {
    uLongf bound = compressBound(in.size());
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, in.data(), in.size(), 6) != Z_OK)
        throw format_error("png: deflate failed");
    out.resize(bound);
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

image_u8 png_decode(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw format_error("png: bad signature", 0);

    uint32_t w = 0, h = 0;
    int color_type = -1, channels = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool done = false;
    while (!done) {
        if (pos + 8 > bytes.size()) throw format_error("png: truncated chunk header", int64_t(pos));
        const uint32_t len = be32(&bytes[pos]);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        if (pos + 12 + len > bytes.size()) throw format_error("png: truncated chunk", int64_t(pos));
        const uint8_t* data = &bytes[pos + 8];
        if (!std::memcmp(type, "IHDR", 4)) {
            if (len != 13) throw format_error("png: bad IHDR length", int64_t(pos));
            w = be32(data);
            h = be32(data + 4);
            const int bit_depth = data[8];
            color_type = data[9];
            if (bit_depth != 8) throw format_error("png: only 8-bit depth supported");
            if (color_type != 0 && color_type != 2 && color_type != 6)
                throw format_error("png: only gray/RGB/RGBA color types supported");
            if (data[12] != 0) throw format_error("png: interlaced images not supported");
            channels = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
        } else if (!std::memcmp(type, "IDAT", 4)) {
            idat.insert(idat.end(), data, data + len);
        } else if (!std::memcmp(type, "IEND", 4)) {
            done = true;
        }
        pos += 12 + len;
    }
    if (w == 0 || h == 0 || channels == 0) throw format_error("png: missing IHDR");

    const size_t stride = size_t(w) * channels;
    const auto raw = zlib_inflate(idat, (stride + 1) * h);

    image_u8 img(int(h), int(w));
    std::vector<uint8_t> prev(stride, 0), cur(stride, 0);
    for (uint32_t y = 0; y < h; ++y) {
        const uint8_t filter = raw[(stride + 1) * y];
        const uint8_t* src = &raw[(stride + 1) * y + 1];
        for (size_t x = 0; x < stride; ++x) {
            const int a = x >= size_t(channels) ? cur[x - channels] : 0;
            const int b = prev[x];
            const int c = x >= size_t(channels) ? prev[x - channels] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw format_error("png: unknown filter type");
            }
            cur[x] = uint8_t(v);
        }
        for (uint32_t x = 0; x < w; ++x) {
            uint8_t* px = img.px(int(y), int(x));
            if (channels == 1) {
                px[0] = px[1] = px[2] = cur[x];
            } else {
                std::memcpy(px, &cur[size_t(x) * channels], 3);
            }
        }
        std::swap(prev, cur);
    }
    return img;
}

std::vector<uint8_t> png_encode(const image_u8& img) {
    std::vector<uint8_t> raw;
    raw.reserve((size_t(img.w) * 3 + 1) * img.h);
    for (int y = 0; y < img.h; ++y) {
        raw.push_back(0); // filter: none
        raw.insert(raw.end(), img.px(y, 0), img.px(y, 0) + size_t(img.w) * 3);
    }
    const auto compressed = zlib_deflate(raw);

    std::vector<uint8_t> out;
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);
    auto chunk = [&](const char* type, const std::vector<uint8_t>& data) {
        put_be32(out, uint32_t(data.size()));
        const size_t start = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), data.begin(), data.end());
        const uint32_t crc = crc32(0, out.data() + start, uInt(out.size() - start));
        put_be32(out, crc);
    };
    std::vector<uint8_t> ihdr;
    put_be32(ihdr, uint32_t(img.w));
    put_be32(ihdr, uint32_t(img.h));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk("IHDR", ihdr);
    chunk("IDAT", compressed);
    chunk("IEND", {});
    return out;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw format_error("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    const auto len = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(len));
    f.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!f) throw format_error("short read: " + path);
    return bytes;
}

void write_file_atomic(const std::string& path, const void* data, size_t len) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw format_error("cannot open file for writing: " + tmp);
        f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        if (!f) throw format_error("short write: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw format_error("rename failed: " + tmp + " -> " + path);
    }
}

image_u8 read_image_file(const std::string& path) { return png_decode(read_file_bytes(path)); }

image_u8 read_raw_rgb_file(const std::string& path, int h, int w) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() != size_t(h) * w * 3)
        throw format_error("raw rgb file " + path + " has " + std::to_string(bytes.size()) +
                           " bytes, expected " + std::to_string(size_t(h) * w * 3));
    image_u8 img(h, w);
    img.rgb = bytes;
    return img;
}

void write_png_file(const std::string& path, const image_u8& img) {
    const auto bytes = png_encode(img);
    write_file_atomic(path, bytes.data(), bytes.size());
}

std::vector<float> read_pcm16_file(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() % 2 != 0) throw format_error("pcm16 file has odd byte count: " + path);
    std::vector<float> samples(bytes.size() / 2);
    for (size_t i = 0; i < samples.size(); ++i) {
        const int16_t v = static_cast<int16_t>(uint16_t(bytes[2 * i]) | (uint16_t(bytes[2 * i + 1]) << 8));
        samples[i] = static_cast<float>(v) / 32768.0f;
    }
    return samples;
}

void write_pcm16_file(const std::string& path, const std::vector<float>& samples) {
    std::vector<uint8_t> bytes(samples.size() * 2);
    for (size_t i = 0; i < samples.size(); ++i) {
        float v = samples[i];
        v = std::max(-1.0f, std::min(1.0f, v));
        const int16_t q = static_cast<int16_t>(std::lrint(v * 32767.0f));
        bytes[2 * i] = uint8_t(uint16_t(q) & 0xFF);
        bytes[2 * i + 1] = uint8_t(uint16_t(q) >> 8);
    }
    write_file_atomic(path, bytes.data(), bytes.size());
}

}  // namespace eagle
