#include "isp/matching.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <string>

#include "isp/binary_io.hpp"
#include "isp/common.hpp"

namespace isp {

std::vector<std::uint8_t> visibility_labels(const ConfidenceMaps& conf) {
    std::vector<std::uint8_t> vis(conf.K > 0 ? conf.K - 1 : 0, 0);
    for (std::size_t p = 0; p < conf.pixels(); ++p) {
        if (const auto k = conf.argmax(p); k > 0) {
            vis[k - 1] = 1;
        }
    }
    return vis;
}

CosineResult cosine_distance_checked(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw ValidationError("cosine_distance: dimension mismatch");
    }
    double dot = 0.0;
    double uu = 0.0;
    double vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) {
        return {1.0, true};
    }
    return {1.0 - dot / (std::sqrt(uu) * std::sqrt(vv)), false};
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    return cosine_distance_checked(u, v).distance;
}

double aligned_distance(const Descriptor& q, const Descriptor& g) {
    double num = cosine_distance(q.global_feat, g.global_feat) +
                 cosine_distance(q.fg_feat, g.fg_feat);
    double den = 2.0;
    for (std::size_t k = 1; k <= q.parts; ++k) {
        if (q.visibility[k - 1] && g.visibility[k - 1]) {
            num += cosine_distance(q.part(k), g.part(k));
            den += 1.0;
        }
    }
    return num / den;
}

namespace {

void check_config(std::span<const Descriptor> descs, std::size_t parts, std::size_t c) {
    for (const auto& d : descs) {
        if (d.parts != parts || d.c != c || d.visibility.size() != parts ||
            d.part_feats.size() != parts * c || d.fg_feat.size() != c ||
            d.global_feat.size() != c) {
            throw ValidationError("descriptor " + std::to_string(d.image_id) +
                                  ": configuration differs from the rest");
        }
    }
}

EntryMeta meta_of(const Descriptor& d) { return {d.image_id, d.person_id, d.camera_id}; }

}  // namespace

DistanceMatrix distance_matrix(std::span<const Descriptor> queries,
                               std::span<const Descriptor> gallery) {
    if (queries.empty() || gallery.empty()) {
        throw ValidationError("distance_matrix: empty query or gallery list");
    }
    const std::size_t parts = queries.front().parts;
    const std::size_t c = queries.front().c;
    check_config(queries, parts, c);
    check_config(gallery, parts, c);

    DistanceMatrix dm;
    dm.q = queries.size();
    dm.g = gallery.size();
    dm.values.resize(dm.q * dm.g);
    for (const auto& d : queries) dm.query.push_back(meta_of(d));
    for (const auto& d : gallery) dm.gallery.push_back(meta_of(d));
    parallel_for(dm.q, [&](std::size_t i) {
        for (std::size_t j = 0; j < dm.g; ++j) {
            dm.values[i * dm.g + j] = aligned_distance(queries[i], gallery[j]);
        }
    });
    return dm;
}

void save_distance_matrix(const DistanceMatrix& dm, const std::filesystem::path& path) {
    binary::Writer out(path);
    out.magic("ISPD");
    out.u32(1);
    out.u32(static_cast<std::uint32_t>(dm.q));
    out.u32(static_cast<std::uint32_t>(dm.g));
    for (double v : dm.values) {
        out.f32(static_cast<float>(v));
    }
    out.close();
}

DistanceMatrix load_distance_matrix(const std::filesystem::path& path) {
    binary::Reader in(path);
    in.expect_magic("ISPD");
    if (const auto v = in.u32(); v != 1) {
        throw FormatError("unsupported ISPD version " + std::to_string(v));
    }
    DistanceMatrix dm;
    dm.q = in.u32();
    dm.g = in.u32();
    if (in.remaining() != 4ULL * dm.q * dm.g) {
        throw ValidationError("ISPD: payload size does not match q and g");
    }
    dm.values.resize(dm.q * dm.g);
    for (double& v : dm.values) {
        v = in.f32();
        if (!std::isfinite(v)) {
            throw ValidationError("ISPD: non-finite distance");
        }
    }
    return dm;
}

void save_distance_tsv(const DistanceMatrix& dm, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << std::setprecision(9);
    for (std::size_t i = 0; i < dm.q; ++i) {
        for (std::size_t j = 0; j < dm.g; ++j) {
            out << (j ? "\t" : "") << dm.at(i, j);
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

void save_descriptors(std::span<const Descriptor> descs, const std::filesystem::path& path) {
    if (descs.empty()) {
        throw ValidationError("save_descriptors: nothing to write");
    }
    const std::size_t parts = descs.front().parts;
    const std::size_t c = descs.front().c;
    check_config(descs, parts, c);
    binary::Writer out(path);
    out.magic("ISPR");
    out.u32(1);
    out.u32(static_cast<std::uint32_t>(descs.size()));
    out.u32(static_cast<std::uint32_t>(parts));
    out.u32(static_cast<std::uint32_t>(c));
    for (const auto& d : descs) {
        out.u32(d.image_id);
        out.u32(d.person_id);
        out.u32(d.camera_id);
        for (auto v : d.visibility) out.u8(v ? 1 : 0);
        for (double v : d.part_feats) out.f32(static_cast<float>(v));
        for (double v : d.fg_feat) out.f32(static_cast<float>(v));
        for (double v : d.global_feat) out.f32(static_cast<float>(v));
    }
    out.close();
}

std::vector<Descriptor> load_descriptors(const std::filesystem::path& path) {
    binary::Reader in(path);
    in.expect_magic("ISPR");
    if (const auto v = in.u32(); v != 1) {
        throw FormatError("unsupported ISPR version " + std::to_string(v));
    }
    const std::size_t n = in.u32();
    const std::size_t parts = in.u32();
    const std::size_t c = in.u32();
    const std::uint64_t record = 12 + parts + 4ULL * (parts * c + 2 * c);
    if (n == 0 || in.remaining() != record * n) {
        throw ValidationError("ISPR: payload size does not match the header");
    }
    std::vector<Descriptor> out(n);
    for (auto& d : out) {
        d.image_id = in.u32();
        d.person_id = in.u32();
        d.camera_id = in.u32();
        d.parts = parts;
        d.c = c;
        d.visibility.resize(parts);
        for (auto& v : d.visibility) v = in.u8() ? 1 : 0;
        d.part_feats.resize(parts * c);
        for (auto& v : d.part_feats) v = in.f32();
        d.fg_feat.resize(c);
        for (auto& v : d.fg_feat) v = in.f32();
        d.global_feat.resize(c);
        for (auto& v : d.global_feat) v = in.f32();
    }
    return out;
}

QueryGallerySplit split_query_gallery(std::span<const Descriptor> descs) {
    QueryGallerySplit split;
    std::set<std::uint32_t> seen;
    for (const auto& d : descs) {
        (seen.insert(d.person_id).second ? split.query : split.gallery).push_back(d);
    }
    return split;
}

}  // namespace isp
