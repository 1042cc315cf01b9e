#include "isp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "isp/binary_io.hpp"
#include "isp/common.hpp"

namespace isp {

namespace {

constexpr std::uint32_t kVersion = 1;

void require(bool cond, const std::string& what) {
    if (!cond) {
        throw ValidationError(what);
    }
}

}  // namespace

void FeatureMap::validate() const {
    require(c >= 1 && h >= 1 && w >= 1, "feature map " + std::to_string(image_id) +
                                            ": c, h, w must all be >= 1");
    require(data.size() == h * w * c,
            "feature map " + std::to_string(image_id) + ": data length " +
                std::to_string(data.size()) + " != h*w*c = " + std::to_string(h * w * c));
    for (float v : data) {
        require(std::isfinite(v),
                "feature map " + std::to_string(image_id) + ": non-finite element");
    }
}

std::size_t FeatureMapSet::n_id() const { return person_ids().size(); }

std::vector<std::uint32_t> FeatureMapSet::person_ids() const {
    std::set<std::uint32_t> ids;
    for (const auto& m : maps) {
        ids.insert(m.person_id);
    }
    return {ids.begin(), ids.end()};
}

std::vector<std::size_t> FeatureMapSet::images_of(std::uint32_t person_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps[i].person_id == person_id) {
            out.push_back(i);
        }
    }
    return out;
}

void FeatureMapSet::validate() const {
    require(!maps.empty(), "feature set must contain at least one map");
    std::set<std::uint32_t> seen;
    const auto& first = maps.front();
    for (const auto& m : maps) {
        m.validate();
        require(m.c == first.c && m.h == first.h && m.w == first.w,
                "feature map " + std::to_string(m.image_id) +
                    ": dimensions differ from the rest of the set");
        require(seen.insert(m.image_id).second,
                "duplicate image_id " + std::to_string(m.image_id));
    }
}

double pixel_norm(std::span<const float> v) {
    double sq = 0.0;
    for (float x : v) {
        sq += static_cast<double>(x) * static_cast<double>(x);
    }
    return std::sqrt(sq);
}

ActivationMap activation_map(const FeatureMap& m) {
    ActivationMap out{m.h, m.w, std::vector<double>(m.pixels())};
    double max_norm = 0.0;
    for (std::size_t i = 0; i < m.pixels(); ++i) {
        out.values[i] = pixel_norm(m.pixel(i));
        max_norm = std::max(max_norm, out.values[i]);
    }
    if (max_norm == 0.0) {
        throw DegenerateInputError("activation_map: every pixel of image " +
                                   std::to_string(m.image_id) + " is zero");
    }
    for (double& v : out.values) {
        v /= max_norm;
    }
    return out;
}

DirectionMap direction_map(const FeatureMap& m) {
    DirectionMap out{m.h, m.w, m.c, std::vector<double>(m.pixels() * m.c, 0.0),
                     std::vector<std::uint8_t>(m.pixels(), 0)};
    for (std::size_t i = 0; i < m.pixels(); ++i) {
        const auto px = m.pixel(i);
        const double norm = pixel_norm(px);
        if (norm == 0.0) {
            out.degenerate[i] = 1;
            continue;
        }
        for (std::size_t ch = 0; ch < m.c; ++ch) {
            out.vectors[i * m.c + ch] = static_cast<double>(px[ch]) / norm;
        }
    }
    return out;
}

void LabelSet::validate() const {
    require(K >= 1 && K < kUnlabeled, "label set: K must be in [1, 254]");
    require(!maps.empty(), "label set must contain at least one map");
    for (const auto& m : maps) {
        require(m.h == maps.front().h && m.w == maps.front().w,
                "label map " + std::to_string(m.image_id) + ": dimensions differ");
        require(m.labels.size() == m.h * m.w,
                "label map " + std::to_string(m.image_id) + ": label count != h*w");
        for (auto l : m.labels) {
            require(l < K || l == kUnlabeled,
                    "label map " + std::to_string(m.image_id) + ": label out of range");
        }
    }
}

FeatureMapSet load_feature_set(const std::filesystem::path& path) {
    binary::Reader in(path);
    in.expect_magic("ISPF");
    if (const auto v = in.u32(); v != kVersion) {
        throw FormatError("unsupported ISPF version " + std::to_string(v));
    }
    const std::size_t n = in.u32();
    const std::size_t c = in.u32();
    const std::size_t h = in.u32();
    const std::size_t w = in.u32();
    require(n >= 1, "ISPF: n must be >= 1");
    require(c >= 1 && h >= 1 && w >= 1, "ISPF: c, h, w must all be >= 1");
    const std::uint64_t record = 12 + 4ULL * c * h * w;
    const std::uint64_t left = in.remaining();
    require(left == record * n, "ISPF: payload is " + std::to_string(left) + " bytes, expected " +
                                    std::to_string(record * n));

    FeatureMapSet set;
    set.maps.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        FeatureMap m;
        m.image_id = in.u32();
        m.person_id = in.u32();
        m.camera_id = in.u32();
        m.c = c;
        m.h = h;
        m.w = w;
        m.data.resize(c * h * w);
        for (float& x : m.data) {
            x = in.f32();
        }
        set.maps.push_back(std::move(m));
    }
    set.validate();
    return set;
}

void save_feature_set(const FeatureMapSet& set, const std::filesystem::path& path) {
    set.validate();
    binary::Writer out(path);
    out.magic("ISPF");
    out.u32(kVersion);
    out.u32(static_cast<std::uint32_t>(set.n()));
    out.u32(static_cast<std::uint32_t>(set.c()));
    out.u32(static_cast<std::uint32_t>(set.h()));
    out.u32(static_cast<std::uint32_t>(set.w()));
    for (const auto& m : set.maps) {
        out.u32(m.image_id);
        out.u32(m.person_id);
        out.u32(m.camera_id);
        for (float x : m.data) {
            out.f32(x);
        }
    }
    out.close();
}

LabelSet load_label_set(const std::filesystem::path& path) {
    binary::Reader in(path);
    in.expect_magic("ISPL");
    if (const auto v = in.u32(); v != kVersion) {
        throw FormatError("unsupported ISPL version " + std::to_string(v));
    }
    const std::size_t n = in.u32();
    const std::size_t h = in.u32();
    const std::size_t w = in.u32();
    const std::size_t K = in.u32();
    require(n >= 1 && h >= 1 && w >= 1, "ISPL: n, h, w must all be >= 1");
    const std::uint64_t record = 8 + static_cast<std::uint64_t>(h) * w;
    const std::uint64_t left = in.remaining();
    require(left == record * n, "ISPL: payload is " + std::to_string(left) + " bytes, expected " +
                                    std::to_string(record * n));

    LabelSet set;
    set.K = K;
    set.maps.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        LabelMap m;
        m.image_id = in.u32();
        m.person_id = in.u32();
        m.h = h;
        m.w = w;
        m.labels.resize(h * w);
        for (auto& l : m.labels) {
            l = in.u8();
        }
        set.maps.push_back(std::move(m));
    }
    set.validate();
    return set;
}

void save_label_set(const LabelSet& set, const std::filesystem::path& path) {
    set.validate();
    binary::Writer out(path);
    out.magic("ISPL");
    out.u32(kVersion);
    out.u32(static_cast<std::uint32_t>(set.maps.size()));
    out.u32(static_cast<std::uint32_t>(set.maps.front().h));
    out.u32(static_cast<std::uint32_t>(set.maps.front().w));
    out.u32(static_cast<std::uint32_t>(set.K));
    for (const auto& m : set.maps) {
        out.u32(m.image_id);
        out.u32(m.person_id);
        for (auto l : m.labels) {
            out.u8(l);
        }
    }
    out.close();
}

}  // namespace isp
