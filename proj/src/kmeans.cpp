#include "isp/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "isp/common.hpp"

namespace isp {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::size_t count_distinct(const SampleMatrix& samples) {
    const std::size_t n = samples.size();
    if (n == 0) {
        return 0;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        const auto ra = samples.row(a);
        const auto rb = samples.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    };
    std::sort(order.begin(), order.end(), less);
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < n; ++i) {
        const auto prev = samples.row(order[i - 1]);
        const auto cur = samples.row(order[i]);
        if (!std::equal(prev.begin(), prev.end(), cur.begin())) {
            ++distinct;
        }
    }
    return distinct;
}

std::vector<double> kmeans_pp_init(const SampleMatrix& samples, std::size_t k,
                                   std::uint64_t seed) {
    const std::size_t n = samples.size();
    const std::size_t dim = samples.dim;
    if (n == 0 || k == 0) {
        throw ValidationError("kmeans_pp_init: need samples and k >= 1");
    }
    Rng rng(seed);
    std::vector<double> centroids;
    centroids.reserve(k * dim);

    const auto first = samples.row(rng.index(n));
    centroids.insert(centroids.end(), first.begin(), first.end());

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        d2[i] = squared_distance(samples.row(i), first);
    }
    for (std::size_t j = 1; j < k; ++j) {
        double total = 0.0;
        for (double v : d2) {
            total += v;
        }
        if (!(total > 0.0)) {
            throw ValidationError("kmeans_pp_init: k exceeds the number of distinct samples");
        }
        const double target = rng.uniform() * total;
        std::size_t pick = n;
        double cum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) {
                continue;
            }
            cum += d2[i];
            pick = i;
            if (cum > target) {
                break;
            }
        }
        const auto chosen = samples.row(pick);
        centroids.insert(centroids.end(), chosen.begin(), chosen.end());
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(samples.row(i), chosen));
        }
    }
    return centroids;
}

namespace {

// Nearest-centroid assignment; returns inertia.
double assign(const SampleMatrix& samples, const std::vector<double>& centroids, std::size_t k,
              std::vector<std::size_t>& assignments) {
    const std::size_t dim = samples.dim;
    double inertia = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto x = samples.row(i);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            const double d = squared_distance(x, {centroids.data() + j * dim, dim});
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        assignments[i] = best;
        inertia += best_d;
    }
    return inertia;
}

}  // namespace

KMeansResult lloyd(const SampleMatrix& samples, std::vector<double> centroids,
                   std::size_t max_iter, double tol) {
    const std::size_t n = samples.size();
    const std::size_t dim = samples.dim;
    if (n == 0 || dim == 0 || centroids.empty() || centroids.size() % dim != 0) {
        throw ValidationError("lloyd: empty samples or malformed centroids");
    }
    const std::size_t k = centroids.size() / dim;

    KMeansResult result;
    result.requested_k = k;
    result.assignments.assign(n, 0);
    result.inertia_history.push_back(assign(samples, centroids, k, result.assignments));

    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    std::vector<double> own_d2(n);
    for (std::size_t it = 0; it < max_iter; ++it) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = result.assignments[i];
            const auto x = samples.row(i);
            for (std::size_t d = 0; d < dim; ++d) {
                sums[j * dim + d] += x[d];
            }
            ++counts[j];
        }

        std::vector<double> next(k * dim);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t d = 0; d < dim; ++d) {
                next[j * dim + d] = counts[j] > 0
                                        ? sums[j * dim + d] / static_cast<double>(counts[j])
                                        : centroids[j * dim + d];
            }
        }

        if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = result.assignments[i];
                own_d2[i] = squared_distance(samples.row(i), {next.data() + j * dim, dim});
            }
            for (std::size_t j = 0; j < k; ++j) {
                if (counts[j] > 0) {
                    continue;
                }
                const auto far = static_cast<std::size_t>(
                    std::max_element(own_d2.begin(), own_d2.end()) - own_d2.begin());
                const auto x = samples.row(far);
                std::copy(x.begin(), x.end(), next.begin() + static_cast<std::ptrdiff_t>(j * dim));
                --counts[result.assignments[far]];
                result.assignments[far] = j;
                counts[j] = 1;
                own_d2[far] = 0.0;
            }
        }

        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            shift = std::max(shift, std::sqrt(squared_distance({centroids.data() + j * dim, dim},
                                                               {next.data() + j * dim, dim})));
        }
        centroids = std::move(next);
        result.inertia_history.push_back(assign(samples, centroids, k, result.assignments));
        ++result.iterations;
        if (shift < tol) {
            result.converged = true;
            break;
        }
    }

    result.model.k = k;
    result.model.dim = dim;
    result.model.centroids = std::move(centroids);
    result.model.inertia = result.inertia_history.back();
    return result;
}

KMeansResult kmeans(const SampleMatrix& samples, const KMeansOptions& opts) {
    if (samples.size() == 0) {
        throw ValidationError("kmeans: no samples");
    }
    if (opts.k == 0) {
        throw ValidationError("kmeans: k must be >= 1");
    }
    const std::size_t distinct = count_distinct(samples);
    const std::size_t k = std::min(opts.k, distinct);
    if (opts.n_init == 0) {
        throw ValidationError("kmeans: n_init must be >= 1");
    }
    KMeansResult result;
    for (std::size_t r = 0; r < opts.n_init; ++r) {
        const std::uint64_t seed = r == 0 ? opts.seed : mix_seed(opts.seed, r);
        auto run = lloyd(samples, kmeans_pp_init(samples, k, seed), opts.max_iter, opts.tol);
        if (r == 0 || run.model.inertia < result.model.inertia) {
            result = std::move(run);
        }
    }
    result.requested_k = opts.k;
    result.reduced_k = k < opts.k;
    return result;
}

}  // namespace isp
