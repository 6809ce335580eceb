#include <cstdio>

#include "doctest.h"
#include "eagle/errors.hpp"
#include "eagle/image_io.hpp"
#include "eagle/rng.hpp"

using namespace eagle;

TEST_CASE("png encode/decode round-trips random images bit-exactly") {
    for (uint64_t seed = 0; seed < 4; ++seed) {
        rng r(seed);
        image_u8 img(17 + static_cast<int>(seed) * 13, 23 + static_cast<int>(seed) * 7);
        for (uint8_t& b : img.rgb) b = static_cast<uint8_t>(r.next_u32());
        const auto bytes = png_encode(img);
        const image_u8 back = png_decode(bytes);
        CHECK(back.h == img.h);
        CHECK(back.w == img.w);
        CHECK(back.rgb == img.rgb);
    }
}

TEST_CASE("png decode rejects garbage and truncation") {
    CHECK_THROWS_AS(png_decode({1, 2, 3}), format_error);
    image_u8 img(8, 8);
    auto bytes = png_encode(img);
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(png_decode(bytes), format_error);
}

TEST_CASE("pcm16 file round-trip preserves int16-representable samples") {
    const std::string path = "/tmp/eagle_test_pcm16.pcm";
    std::vector<float> samples;
    for (int i = -5; i <= 5; ++i) samples.push_back(static_cast<float>(i * 1000) / 32768.0f);
    write_pcm16_file(path, samples);
    const auto back = read_pcm16_file(path);
    CHECK(back == samples);
    std::remove(path.c_str());
}

TEST_CASE("atomic writes leave no temp file behind") {
    const std::string path = "/tmp/eagle_test_atomic.bin";
    const char payload[] = "abc";
    write_file_atomic(path, payload, 3);
    CHECK(read_file_bytes(path).size() == 3);
    FILE* tmp = std::fopen((path + ".tmp").c_str(), "rb");
    CHECK(tmp == nullptr);
    std::remove(path.c_str());
}
