#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace isp {

/// Row-major n×dim sample matrix.
struct SampleMatrix {
    std::size_t dim = 0;
    std::vector<double> values;

    SampleMatrix() = default;
    explicit SampleMatrix(std::size_t d) : dim(d) {}
    SampleMatrix(std::size_t d, std::vector<double> v) : dim(d), values(std::move(v)) {}

    std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
    void push(std::span<const double> v) { values.insert(values.end(), v.begin(), v.end()); }
};

struct ClusterModel {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids;  // k×dim
    double inertia = 0.0;

    std::span<const double> centroid(std::size_t j) const {
        return {centroids.data() + j * dim, dim};
    }
};

struct KMeansOptions {
    std::size_t k = 2;
    std::uint64_t seed = 0;
    std::size_t max_iter = 100;
    double tol = 1e-4;
    // Independent k-means++ restarts; the lowest final inertia wins (ties go
    // to the earlier restart). Restart 0 uses `seed` itself.
    std::size_t n_init = 1;
};

struct KMeansResult {
    ClusterModel model;
    std::vector<std::size_t> assignments;
    std::size_t requested_k = 0;
    // Set when k exceeded the number of distinct samples; model.k is then the
    // distinct count.
    bool reduced_k = false;
    bool converged = false;
    std::size_t iterations = 0;
    // Inertia after every assignment step, starting with the seeding.
    std::vector<double> inertia_history;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

std::size_t count_distinct(const SampleMatrix& samples);

/// k-means++ seeding. Requires k <= count_distinct(samples).
std::vector<double> kmeans_pp_init(const SampleMatrix& samples, std::size_t k,
                                   std::uint64_t seed);

/// Lloyd iterations from the given k×dim initial centroids. Nearest-centroid
/// ties go to the lowest index; an emptied cluster is re-seeded at the sample
/// farthest from its own (updated) centroid. Stops when the largest centroid
/// displacement drops below tol, or after max_iter updates.
KMeansResult lloyd(const SampleMatrix& samples, std::vector<double> centroids,
                   std::size_t max_iter, double tol);

/// k-means++ seeding followed by Lloyd, repeated n_init times. Reduces k to the distinct sample
/// count when necessary (flagged via reduced_k).
KMeansResult kmeans(const SampleMatrix& samples, const KMeansOptions& opts);

}  // namespace isp
