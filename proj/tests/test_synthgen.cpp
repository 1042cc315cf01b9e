#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "isp/cascade_cluster.hpp"
#include "isp/common.hpp"
#include "isp/synthgen.hpp"

using namespace isp;

namespace {

SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.n_id = 3;
    s.imgs_per_id = 4;
    s.c = 8;
    s.h = 32;
    s.w = 16;
    s.parts = 4;
    return s;
}

}  // namespace

TEST_CASE("default layout and metadata") {
    const SyntheticSpec spec;
    const auto data = generate(spec);
    REQUIRE(data.set.n() == 48);
    CHECK(data.truth.K == 6);
    CHECK(data.truth.maps.size() == 48);
    CHECK(data.signatures.size() == 8);
    for (std::size_t i = 0; i < 48; ++i) {
        const auto& m = data.set.maps[i];
        CHECK(m.c == 16);
        CHECK(m.h == 64);
        CHECK(m.w == 32);
        CHECK(m.image_id == i);
        CHECK(m.person_id == i / 6);
        CHECK(m.camera_id == (i % 6) % 2);
        CHECK(data.truth.maps[i].image_id == m.image_id);
        CHECK(data.truth.maps[i].person_id == m.person_id);
    }
}

TEST_CASE("bands are ordered and cover the silhouette") {
    for (std::size_t parts : {1u, 3u, 5u, 8u}) {
        auto spec = small_spec();
        spec.parts = parts;
        const auto layout = band_layout(spec);
        REQUIRE(layout.band_start.size() == parts + 1);
        CHECK(layout.band_start.front() == layout.top);
        CHECK(layout.band_start.back() == layout.bottom + 1);
        for (std::size_t p = 0; p < parts; ++p) CHECK(layout.band_start[p] < layout.band_start[p + 1]);
        for (std::size_t r = 0; r < spec.h; ++r) {
            bool any = false;
            for (std::size_t col = 0; col < spec.w; ++col) any = any || layout.silhouette[r * spec.w + col];
            CHECK(any == (r >= layout.top && r <= layout.bottom));
        }
    }
    auto tall = small_spec();
    tall.h = 8;
    tall.parts = 10;
    CHECK_THROWS_AS(band_layout(tall), ValidationError);
    CHECK_THROWS_AS(generate(tall), ValidationError);
}

TEST_CASE("truth labels follow the bands without occlusion") {
    const auto spec = small_spec();
    const auto layout = band_layout(spec);
    const auto data = generate(spec);
    for (const auto& t : data.truth.maps) {
        for (std::size_t r = 0; r < spec.h; ++r) {
            for (std::size_t col = 0; col < spec.w; ++col) {
                std::uint8_t expect = 0;
                if (layout.silhouette[r * spec.w + col]) {
                    for (std::size_t p = 0; p < spec.parts; ++p) {
                        if (r >= layout.band_start[p] && r < layout.band_start[p + 1]) {
                            expect = static_cast<std::uint8_t>(p + 1);
                        }
                    }
                }
                CHECK(t.labels[r * spec.w + col] == expect);
            }
        }
    }
    for (const auto& o : data.occluded) CHECK(o == std::vector<std::uint8_t>(spec.parts, 0));
}

TEST_CASE("occluded parts are erased from the truth") {
    auto spec = small_spec();
    spec.occlusion_prob = 0.4;
    spec.n_id = 6;
    const auto data = generate(spec);
    std::size_t occluded = 0;
    for (std::size_t i = 0; i < data.set.n(); ++i) {
        std::vector<bool> present(spec.parts + 1, false);
        for (auto l : data.truth.maps[i].labels) present[l] = true;
        for (std::size_t p = 1; p <= spec.parts; ++p) {
            CHECK(present[p] == !data.occluded[i][p - 1]);
            occluded += data.occluded[i][p - 1];
        }
    }
    CHECK(occluded > 0);
    CHECK(occluded < spec.n_id * spec.imgs_per_id * spec.parts);
}

TEST_CASE("noise-free maps hold the scaled signatures") {
    auto spec = small_spec();
    spec.noise_sigma = 0.0;
    spec.fg_gain = 3.0;
    const auto data = generate(spec);
    for (std::size_t i = 0; i < data.set.n(); ++i) {
        const auto& m = data.set.maps[i];
        const auto& sig = data.signatures[m.person_id];
        for (std::size_t px = 0; px < m.h * m.w; ++px) {
            const auto l = data.truth.maps[i].labels[px];
            for (std::size_t ch = 0; ch < spec.c; ++ch) {
                const double expect = l == 0 ? 0.0 : spec.fg_gain * sig[(l - 1) * spec.c + ch];
                CHECK(m.data[px * spec.c + ch] == static_cast<float>(expect));
            }
        }
    }
    for (const auto& sig : data.signatures) {
        for (std::size_t p = 0; p < spec.parts; ++p) {
            double n = 0.0;
            for (std::size_t ch = 0; ch < spec.c; ++ch) n += sig[p * spec.c + ch] * sig[p * spec.c + ch];
            CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("identity spread") {
    auto spec = small_spec();
    spec.identity_spread = 0.0;
    auto data = generate(spec);
    for (const auto& sig : data.signatures) CHECK(sig == data.signatures[0]);

    spec.identity_spread = 0.5;
    data = generate(spec);
    CHECK(data.signatures[0] != data.signatures[1]);
}

TEST_CASE("background noise has the requested RMS norm") {
    auto spec = small_spec();
    spec.n_id = 4;
    spec.noise_sigma = 0.7;
    const auto data = generate(spec);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < data.set.n(); ++i) {
        const auto& m = data.set.maps[i];
        for (std::size_t px = 0; px < m.h * m.w; ++px) {
            if (data.truth.maps[i].labels[px] != 0) continue;
            double n = 0.0;
            for (auto v : m.pixel(px)) n += static_cast<double>(v) * v;
            sum += n;
            ++count;
        }
    }
    CHECK(count > 1000);
    CHECK(std::sqrt(sum / static_cast<double>(count)) == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("generation is deterministic in the seed") {
    auto spec = small_spec();
    spec.occlusion_prob = 0.2;
    const auto a = generate(spec);
    const auto b = generate(spec);
    for (std::size_t i = 0; i < a.set.n(); ++i) {
        CHECK(a.set.maps[i].data == b.set.maps[i].data);
        CHECK(a.truth.maps[i].labels == b.truth.maps[i].labels);
    }
    spec.seed = 1;
    const auto c = generate(spec);
    CHECK(a.set.maps[0].data != c.set.maps[0].data);
}

TEST_CASE("strong noise-free foreground is separated exactly") {
    auto spec = small_spec();
    spec.noise_sigma = 0.0;
    spec.fg_gain = 10.0;
    const auto data = generate(spec);
    for (std::uint32_t pid = 0; pid < spec.n_id; ++pid) {
        const auto fg = stage1_foreground_split(data.set, pid, 5);
        CHECK_FALSE(fg.uniform);
        for (std::size_t s = 0; s < fg.images.size(); ++s) {
            const auto& truth = data.truth.maps[fg.images[s]].labels;
            for (std::size_t px = 0; px < truth.size(); ++px) {
                CHECK(fg.masks[s][px] == (truth[px] > 0 ? 1 : 0));
            }
        }
    }
}

TEST_CASE("spec validation") {
    auto bad = small_spec();
    bad.fg_gain = 1.0;
    CHECK_THROWS_AS(generate(bad), ValidationError);
    bad = small_spec();
    bad.occlusion_prob = 1.0;
    CHECK_THROWS_AS(generate(bad), ValidationError);
    bad = small_spec();
    bad.cameras = 0;
    CHECK_THROWS_AS(generate(bad), ValidationError);
    bad = small_spec();
    bad.noise_sigma = -0.1;
    CHECK_THROWS_AS(generate(bad), ValidationError);
}
