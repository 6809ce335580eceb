#include <cstring>

#include "doctest.h"
#include "eagle/packing.hpp"
#include "eagle/rng.hpp"

using namespace eagle;

namespace {

// independent ceiling-formula oracle, written against integer arithmetic only
int64_t token_oracle(int h, int w) {
    const int64_t rows = (h + 335) / 336;
    const int64_t cols = (w + 335) / 336;
    return rows * cols * 128;
}

tensor random_rows(int64_t n, int64_t d, uint64_t seed) {
    tensor t({n, d});
    rng r(seed);
    for (float& v : t.data) v = r.next_uniform(-1.0f, 1.0f);
    return t;
}

}  // namespace

TEST_CASE("image token count examples") {
    CHECK(image_token_count(336, 336) == 128);
    CHECK(image_token_count(672, 1000) == 2 * 3 * 128);
    CHECK(image_token_count(1, 1) == 128);
    CHECK_THROWS_AS(image_token_count(0, 10), std::invalid_argument);
    CHECK_THROWS_AS(image_token_count(10, -1), std::invalid_argument);
}

TEST_CASE("image token count matches the ceiling-formula oracle on 10k random sizes") {
    rng r(2024);
    for (int i = 0; i < 10000; ++i) {
        const int h = 1 + static_cast<int>(r.next_range(5000));
        const int w = 1 + static_cast<int>(r.next_range(5000));
        CHECK(image_token_count(h, w) == token_oracle(h, w));
    }
}

TEST_CASE("plan_crops covers every pixel exactly once") {
    for (auto [h, w] : std::vector<std::pair<int, int>>{{336, 336}, {400, 700}, {1, 1}, {337, 335}}) {
        const crop_grid g = plan_crops(h, w);
        CHECK(static_cast<int64_t>(g.crops.size()) * 128 == image_token_count(h, w));
        std::vector<int> cover(static_cast<size_t>(h) * w, 0);
        for (const auto& rect : g.crops)
            for (int y = rect.y0; y < rect.y0 + rect.h; ++y)
                for (int x = rect.x0; x < rect.x0 + rect.w; ++x) ++cover[static_cast<size_t>(y) * w + x];
        for (int c : cover) CHECK(c == 1);
    }
}

TEST_CASE("plan_crops 400x700 grid arithmetic") {
    const crop_grid g = plan_crops(400, 700);
    CHECK(g.rows == 2);
    CHECK(g.cols == 3);
    CHECK(g.crops.size() == 6);
    // rightmost column covers the 700 - 2*336 = 28 remaining pixels
    CHECK(g.crops[2].w == 700 - 2 * 336);
    // bottom row covers 400 - 336 = 64 pixels
    CHECK(g.crops[3].h == 400 - 336);
}

TEST_CASE("extract_block replicates edges for partial blocks") {
    image_u8 img(2, 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) {
            img.px(y, x)[0] = static_cast<uint8_t>(10 * y + x);
            img.px(y, x)[1] = 7;
            img.px(y, x)[2] = 9;
        }
    const crop_grid g = plan_crops(2, 3);
    const image_u8 block = extract_block(img, g.crops[0]);
    CHECK(block.h == 336);
    CHECK(block.w == 336);
    CHECK(block.px(0, 0)[0] == 0);
    CHECK(block.px(1, 2)[0] == 12);
    // rows past the source replicate the last source row, columns likewise
    CHECK(block.px(300, 0)[0] == 10);
    CHECK(block.px(0, 300)[0] == 2);
    CHECK(block.px(335, 335)[0] == 12);
}

TEST_CASE("audio token count examples and band") {
    CHECK(audio_token_count(10.0) == 32); // ceil(31.25)
    CHECK(audio_token_count(0.1) == 1);
    CHECK_THROWS_AS(audio_token_count(0.0), std::invalid_argument);
    CHECK_THROWS_AS(audio_token_count(-2.0), std::invalid_argument);

    rng r(7);
    for (int i = 0; i < 500; ++i) {
        const double d = 2.0 + 118.0 * r.next_float();
        const double rate = static_cast<double>(audio_token_count(d)) / d;
        CHECK(rate >= 2.5);
        CHECK(rate <= 3.5);
    }
    CHECK(static_cast<double>(audio_token_count(2.0)) / 2.0 <= 3.5);
}

TEST_CASE("interleave single text segment needs no sentinels") {
    sentinel_rows sent{random_rows(4, 8, 1)};
    std::vector<segment_embedding> segs;
    segs.push_back({modality::text, random_rows(5, 8, 2)});
    const packed_sequence seq = interleave(segs, sent);
    CHECK(seq.total_len() == 5);
    CHECK(seq.sentinel_count == 0);
    CHECK(seq.spans.size() == 1);
    CHECK(seq.spans[0].start == 0);
    CHECK(seq.spans[0].length == 5);
}

TEST_CASE("interleave text-image-text length accounting") {
    sentinel_rows sent{random_rows(4, 8, 3)};
    std::vector<segment_embedding> segs;
    segs.push_back({modality::text, random_rows(3, 8, 4)});
    segs.push_back({modality::image, random_rows(128, 8, 5)});
    segs.push_back({modality::text, random_rows(2, 8, 6)});
    const packed_sequence seq = interleave(segs, sent);
    CHECK(seq.total_len() == 3 + 1 + 128 + 1 + 2);
    CHECK(seq.sentinel_count == 2);
    REQUIRE(seq.spans.size() == 3);
    CHECK(seq.spans[0].start == 0);
    CHECK(seq.spans[1].start == 4);
    CHECK(seq.spans[1].length == 128);
    CHECK(seq.spans[2].start == 134);

    // sentinel rows sit at the boundaries
    CHECK(std::memcmp(seq.embeddings.row(3), sent.rows.row(0), 8 * 4) == 0);
    CHECK(std::memcmp(seq.embeddings.row(132), sent.rows.row(1), 8 * 4) == 0);
}

TEST_CASE("interleave re-extraction reproduces inputs bit-exactly") {
    sentinel_rows sent{random_rows(4, 16, 10)};
    std::vector<segment_embedding> segs;
    segs.push_back({modality::audio, random_rows(7, 16, 11)});
    segs.push_back({modality::text, random_rows(4, 16, 12)});
    segs.push_back({modality::image, random_rows(128, 16, 13)});
    const packed_sequence seq = interleave(segs, sent);
    REQUIRE(seq.spans.size() == 3);
    for (size_t i = 0; i < segs.size(); ++i) {
        const tensor got = extract_span(seq, seq.spans[i]);
        CHECK(got.shape == segs[i].embeddings.shape);
        CHECK(std::memcmp(got.data.data(), segs[i].embeddings.data.data(),
                          got.data.size() * 4) == 0);
        CHECK(seq.spans[i].source_id == static_cast<int>(i));
    }
}

TEST_CASE("interleave: permuting adjacent segments keeps the total length") {
    sentinel_rows sent{random_rows(4, 8, 20)};
    std::vector<segment_embedding> segs;
    segs.push_back({modality::text, random_rows(6, 8, 21)});
    segs.push_back({modality::audio, random_rows(9, 8, 22)});
    const int64_t len_a = interleave(segs, sent).total_len();
    std::swap(segs[0], segs[1]);
    const packed_sequence swapped = interleave(segs, sent);
    CHECK(swapped.total_len() == len_a);
    CHECK(swapped.spans[0].kind == modality::audio);
}

TEST_CASE("interleave errors") {
    sentinel_rows sent{random_rows(4, 8, 30)};
    CHECK_THROWS_AS(interleave({}, sent), std::invalid_argument);
    std::vector<segment_embedding> bad;
    bad.push_back({modality::text, random_rows(2, 9, 31)});
    CHECK_THROWS_AS(interleave(bad, sent), shape_error);
}
