#pragma once

#include "metaage/metalearner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace metaage {

struct RetrievalResult {
    std::size_t query_index = 0;
    std::vector<std::size_t> ranked_indices;  // gallery indices, nearest first
    std::vector<double> distances;            // ascending
};

/// Row-major flattening of the generated K x D estimator.
inline Vector weight_embedding(const MetaLearnerParams& params, const Vector& h) {
    const PersonalizedWeights w = generate_weights(params, h);
    return Eigen::Map<const Vector>(w.W.data(), w.W.size());
}

/// Embeddings for every row of `identity`, one per row of the result.
inline Matrix weight_embeddings(const MetaLearnerParams& params, const Matrix& identity) {
    const Matrix rows = generate_rows(params, identity);
    const Eigen::Index K = params.dims.K, D = params.dims.D;
    Matrix out(identity.rows(), K * D);
    for (Eigen::Index b = 0; b < identity.rows(); ++b) {
        const Matrix block = rows.block(b * K, 0, K, D);
        out.row(b) = Eigen::Map<const RowVector>(block.data(), K * D);
    }
    return out;
}

/// Gallery rows sorted by Euclidean distance to the query; ties keep gallery order.
inline RetrievalResult retrieve(const Vector& query, const Matrix& gallery, std::size_t query_index = 0) {
    if (gallery.rows() == 0) {
        throw std::invalid_argument("retrieve: empty gallery");
    }
    if (gallery.cols() != query.size()) {
        throw ShapeError("retrieve: query length " + std::to_string(query.size()) + " vs gallery width " +
                         std::to_string(gallery.cols()));
    }
    const auto n = static_cast<std::size_t>(gallery.rows());
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        dist[i] = (gallery.row(static_cast<Eigen::Index>(i)).transpose() - query).norm();
    }
    RetrievalResult r;
    r.query_index = query_index;
    r.ranked_indices.resize(n);
    std::iota(r.ranked_indices.begin(), r.ranked_indices.end(), std::size_t{0});
    std::stable_sort(r.ranked_indices.begin(), r.ranked_indices.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    r.distances.reserve(n);
    for (std::size_t i : r.ranked_indices) {
        r.distances.push_back(dist[i]);
    }
    return r;
}

/// Number of items in a top/bottom p% slice of n (at least one).
inline std::size_t slice_size(std::size_t n, double percent) {
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * percent / 100.0));
    return std::clamp<std::size_t>(k, 1, n);
}

/// Fraction of the top and bottom p% of `ranked` for which `match(index)` holds.
template <typename Pred>
std::pair<double, double> slice_match_rates(const std::vector<std::size_t>& ranked, double percent, Pred match) {
    const std::size_t k = slice_size(ranked.size(), percent);
    std::size_t top = 0, bottom = 0;
    for (std::size_t i = 0; i < k; ++i) {
        top += match(ranked[i]) ? 1 : 0;
        bottom += match(ranked[ranked.size() - 1 - i]) ? 1 : 0;
    }
    return {static_cast<double>(top) / static_cast<double>(k), static_cast<double>(bottom) / static_cast<double>(k)};
}

}  // namespace metaage
