#include "isp/synthgen.hpp"

#include <cmath>
#include <string>

#include "isp/common.hpp"

namespace isp {

namespace {

constexpr std::uint64_t kPrototypeStream = 0x70726f746fULL;
constexpr std::uint64_t kIdentityStream = 0x6964ULL;
constexpr std::uint64_t kImageStream = 0x696d67ULL;

std::vector<double> random_unit(Rng& rng, std::size_t c) {
    std::vector<double> v(c);
    double norm = 0.0;
    while (norm == 0.0) {
        norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
    }
    for (auto& x : v) x /= norm;
    return v;
}

void normalize(std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (auto& x : v) x /= norm;
    }
}

// Random unit prototypes, orthogonalized when they fit in c dimensions.
std::vector<std::vector<double>> prototypes(const SyntheticSpec& spec) {
    Rng rng(mix_seed(spec.seed, kPrototypeStream));
    std::vector<std::vector<double>> protos;
    for (std::size_t p = 0; p < spec.parts; ++p) {
        auto v = random_unit(rng, spec.c);
        if (spec.parts <= spec.c) {
            for (const auto& q : protos) {
                double dot = 0.0;
                for (std::size_t i = 0; i < spec.c; ++i) dot += v[i] * q[i];
                for (std::size_t i = 0; i < spec.c; ++i) v[i] -= dot * q[i];
            }
            normalize(v);
        }
        protos.push_back(std::move(v));
    }
    return protos;
}

}  // namespace

void SyntheticSpec::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ValidationError(std::string("synthetic spec: ") + what);
    };
    require(n_id >= 1 && imgs_per_id >= 1, "n_id and imgs_per_id must be >= 1");
    require(c >= 1 && h >= 1 && w >= 1, "c, h, w must be >= 1");
    require(parts >= 1 && parts < kUnlabeled - 1, "parts must be in [1, 253]");
    require(occlusion_prob >= 0.0 && occlusion_prob < 1.0, "occlusion_prob must be in [0, 1)");
    require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
    require(fg_gain > 1.0, "fg_gain must be > 1");
    require(identity_spread >= 0.0, "identity_spread must be >= 0");
    require(cameras >= 1, "cameras must be >= 1");
}

BandLayout band_layout(const SyntheticSpec& spec) {
    spec.validate();
    const double cy = (static_cast<double>(spec.h) - 1.0) / 2.0;
    const double cx = (static_cast<double>(spec.w) - 1.0) / 2.0;
    const double ry = 0.45 * static_cast<double>(spec.h);
    const double rx = 0.35 * static_cast<double>(spec.w);

    BandLayout layout;
    layout.silhouette.assign(spec.h * spec.w, 0);
    bool any = false;
    for (std::size_t r = 0; r < spec.h; ++r) {
        for (std::size_t col = 0; col < spec.w; ++col) {
            const double dy = (static_cast<double>(r) - cy) / ry;
            const double dx = (static_cast<double>(col) - cx) / rx;
            if (dy * dy + dx * dx <= 1.0) {
                layout.silhouette[r * spec.w + col] = 1;
                if (!any) layout.top = r;
                layout.bottom = r;
                any = true;
            }
        }
    }
    const std::size_t rows = any ? layout.bottom - layout.top + 1 : 0;
    if (rows < spec.parts) {
        throw ValidationError("synthetic spec: " + std::to_string(spec.parts) +
                              " part bands do not fit in " + std::to_string(rows) +
                              " silhouette rows (h=" + std::to_string(spec.h) + ")");
    }
    for (std::size_t p = 0; p <= spec.parts; ++p) {
        layout.band_start.push_back(layout.top + p * rows / spec.parts);
    }
    return layout;
}

SyntheticData generate(const SyntheticSpec& spec) {
    const auto layout = band_layout(spec);
    const auto protos = prototypes(spec);
    const std::size_t hw = spec.h * spec.w;

    // Band index (1-based part label) of each silhouette pixel, 0 outside.
    std::vector<std::uint8_t> band_of(hw, 0);
    for (std::size_t p = 0; p < spec.parts; ++p) {
        for (std::size_t r = layout.band_start[p]; r < layout.band_start[p + 1]; ++r) {
            for (std::size_t col = 0; col < spec.w; ++col) {
                if (layout.silhouette[r * spec.w + col]) {
                    band_of[r * spec.w + col] = static_cast<std::uint8_t>(p + 1);
                }
            }
        }
    }

    SyntheticData data;
    data.truth.K = spec.parts + 1;
    for (std::size_t id = 0; id < spec.n_id; ++id) {
        Rng id_rng(mix_seed(spec.seed, kIdentityStream + id));
        std::vector<double> sig(spec.parts * spec.c);
        for (std::size_t p = 0; p < spec.parts; ++p) {
            const auto u = random_unit(id_rng, spec.c);
            std::vector<double> s(spec.c);
            for (std::size_t i = 0; i < spec.c; ++i) {
                s[i] = protos[p][i] + spec.identity_spread * u[i];
            }
            normalize(s);
            std::copy(s.begin(), s.end(), sig.begin() + static_cast<std::ptrdiff_t>(p * spec.c));
        }

        for (std::size_t j = 0; j < spec.imgs_per_id; ++j) {
            Rng rng(mix_seed(mix_seed(spec.seed, kImageStream + id), j));
            FeatureMap m;
            m.image_id = static_cast<std::uint32_t>(id * spec.imgs_per_id + j);
            m.person_id = static_cast<std::uint32_t>(id);
            m.camera_id = static_cast<std::uint32_t>(j % spec.cameras);
            m.c = spec.c;
            m.h = spec.h;
            m.w = spec.w;
            m.data.resize(hw * spec.c);

            std::vector<std::uint8_t> occluded(spec.parts);
            for (auto& o : occluded) {
                o = rng.uniform() < spec.occlusion_prob ? 1 : 0;
            }

            LabelMap truth{m.image_id, m.person_id, spec.h, spec.w, std::vector<std::uint8_t>(hw, 0)};
            const double per_channel = spec.noise_sigma / std::sqrt(static_cast<double>(spec.c));
            for (std::size_t px = 0; px < hw; ++px) {
                const std::uint8_t band = band_of[px];
                const bool visible = band > 0 && !occluded[band - 1];
                for (std::size_t ch = 0; ch < spec.c; ++ch) {
                    double v = per_channel * rng.normal();
                    if (visible) {
                        v += spec.fg_gain * sig[(band - 1) * spec.c + ch];
                    }
                    m.data[px * spec.c + ch] = static_cast<float>(v);
                }
                truth.labels[px] = visible ? band : 0;
            }
            data.set.maps.push_back(std::move(m));
            data.truth.maps.push_back(std::move(truth));
            data.occluded.push_back(std::move(occluded));
        }
        data.signatures.push_back(std::move(sig));
    }
    return data;
}

}  // namespace isp
