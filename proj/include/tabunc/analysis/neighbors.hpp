#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "tabunc/data/dataset.hpp"
#include "tabunc/models/model.hpp"

namespace tabunc {

// curve[k-1] = mean over queries of (y_query - y_(k))^2 where y_(k) is the
// target of the k-th closest reference row (Euclidean distance; ties by
// lower row id).
inline std::vector<double> knn_target_curve(const Matrix& ref, const std::vector<double>& ref_y, const Matrix& query,
                                            const std::vector<double>& query_y, std::size_t k_max) {
    if (ref.cols() != query.cols()) throw DimensionError("knn: reference " + ref.shape() + " vs query " + query.shape());
    if (k_max < 1 || k_max > ref.rows()) {
        throw UsageError("neighbor consistency: k_max " + std::to_string(k_max) + " out of range [1, " +
                         std::to_string(ref.rows()) + "]");
    }
    if (query.rows() == 0) throw UsageError("neighbor consistency: no query rows");
    std::vector<double> curve(k_max, 0.0);
    std::vector<double> dist(ref.rows());
    std::vector<std::size_t> idx(ref.rows());
    auto closer = [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
    for (std::size_t q = 0; q < query.rows(); ++q) {
        auto qr = query.row(q);
        for (std::size_t r = 0; r < ref.rows(); ++r) {
            auto rr = ref.row(r);
            double s = 0.0;
            for (std::size_t c = 0; c < qr.size(); ++c) s += (qr[c] - rr[c]) * (qr[c] - rr[c]);
            dist[r] = s;
        }
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(k_max), idx.end(), closer);
        for (std::size_t k = 0; k < k_max; ++k) {
            const double d = query_y[q] - ref_y[idx[k]];
            curve[k] += d * d;
        }
    }
    for (double& v : curve) v /= double(query.rows());
    return curve;
}

// Neighbourhood target consistency in the latent space after the model's
// first block: train rows are the references, `queries` (default: the test
// split) the queries.
inline std::vector<double> neighbor_consistency(const Model& model, const Dataset& ds, std::size_t k_max,
                                                std::vector<std::size_t> queries = {}) {
    const auto train = ds.rows(Split::train);
    if (queries.empty()) queries = ds.rows(Split::test);
    return knn_target_curve(model.first_block(ds.x_rows(train)), ds.y_rows(train), model.first_block(ds.x_rows(queries)),
                            ds.y_rows(queries), k_max);
}

} // namespace tabunc
