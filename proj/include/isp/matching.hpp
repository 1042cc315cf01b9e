#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "isp/parsing_head.hpp"

namespace isp {

struct EntryMeta {
    std::uint32_t image_id = 0;
    std::uint32_t person_id = 0;
    std::uint32_t camera_id = 0;
};

struct DistanceMatrix {
    std::size_t q = 0;
    std::size_t g = 0;
    std::vector<double> values;  // q×g row-major
    std::vector<EntryMeta> query;
    std::vector<EntryMeta> gallery;

    double at(std::size_t i, std::size_t j) const { return values[i * g + j]; }
};

/// l_k = 1 iff some pixel's most confident part is k (ties to the lower
/// index), for k = 1..K-1.
std::vector<std::uint8_t> visibility_labels(const ConfidenceMaps& conf);

struct CosineResult {
    double distance = 1.0;
    bool degenerate = false;  // a zero vector was involved
};

/// 1 - cos(u, v); a zero vector yields distance 1 with the degenerate flag.
CosineResult cosine_distance_checked(std::span<const double> u, std::span<const double> v);
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Average of the global, foreground and shared-visible part distances.
/// Parts not visible in both descriptors are skipped entirely.
double aligned_distance(const Descriptor& q, const Descriptor& g);

/// Rows in parallel; throws ValidationError on empty input or mixed
/// (parts, c) configurations.
DistanceMatrix distance_matrix(std::span<const Descriptor> queries,
                               std::span<const Descriptor> gallery);

// ISPD: magic, version u32 = 1, q u32, g u32, q·g f32.
void save_distance_matrix(const DistanceMatrix& dm, const std::filesystem::path& path);
/// Metadata is not part of ISPD; the returned matrix has empty meta vectors.
DistanceMatrix load_distance_matrix(const std::filesystem::path& path);
void save_distance_tsv(const DistanceMatrix& dm, const std::filesystem::path& path);

// ISPR descriptor store: magic, version u32 = 1, n u32, parts u32, c u32, then
// n records of [image_id, person_id, camera_id u32, parts u8 visibility,
// parts·c f32 part features, c f32 foreground, c f32 global].
void save_descriptors(std::span<const Descriptor> descs, const std::filesystem::path& path);
std::vector<Descriptor> load_descriptors(const std::filesystem::path& path);

/// First image of each identity (in input order) is a query, the rest
/// gallery.
struct QueryGallerySplit {
    std::vector<Descriptor> query;
    std::vector<Descriptor> gallery;
};
QueryGallerySplit split_query_gallery(std::span<const Descriptor> descs);

}  // namespace isp
