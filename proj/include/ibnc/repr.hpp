#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ibnc/error.hpp"
#include "ibnc/rng.hpp"

namespace ibnc {

/**
 * An N x d feature matrix with one integer class label per row.
 *
 * Immutable by convention after construction/validation; labels are always
 * dense in [0, class_count). The raw material of every analysis here.
 */
struct RepresentationSet {
    Eigen::MatrixXd features;          // N x d
    std::vector<std::int64_t> labels;  // length N, values in [0, class_count)
    int class_count = 0;
    std::string name;

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

inline std::vector<Eigen::Index> class_counts(const RepresentationSet& set) {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(set.class_count), 0);
    for (auto l : set.labels) {
        if (l < 0 || l >= set.class_count)
            throw validation_error("class_counts: label out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    return counts;
}

/**
 * Check the representation invariants: finite features, matching label
 * length, dense labels, and at least two samples per class (anything less
 * makes class covariances meaningless).
 */
inline void validate(const RepresentationSet& set) {
    if (set.features.rows() == 0 || set.features.cols() == 0)
        throw validation_error("representation is empty");
    if (static_cast<Eigen::Index>(set.labels.size()) != set.features.rows())
        throw validation_error("label count (" + std::to_string(set.labels.size()) +
                               ") does not match feature rows (" +
                               std::to_string(set.features.rows()) + ")");
    if (set.class_count < 1) throw validation_error("class_count must be positive");
    if (!set.features.allFinite())
        throw validation_error("features contain NaN or infinite entries");
    const auto counts = class_counts(set);
    for (int k = 0; k < set.class_count; ++k)
        if (counts[static_cast<std::size_t>(k)] < 2)
            throw validation_error("class " + std::to_string(k) + " has " +
                                   std::to_string(counts[static_cast<std::size_t>(k)]) +
                                   " samples; need at least 2");
}

/**
 * Build a validated set from raw labels. Labels are remapped to a dense
 * [0, K) range (sorted order of the distinct raw values); a non-identity
 * remapping is recorded in the returned name.
 */
inline RepresentationSet make_representation(Eigen::MatrixXd features,
                                             std::vector<std::int64_t> raw_labels,
                                             std::string name) {
    std::map<std::int64_t, std::int64_t> remap;
    for (auto l : raw_labels) remap.emplace(l, 0);
    std::int64_t next = 0;
    bool identity = true;
    for (auto& [raw, dense] : remap) {
        dense = next++;
        if (raw != dense) identity = false;
    }
    RepresentationSet set;
    set.features = std::move(features);
    set.labels.reserve(raw_labels.size());
    for (auto l : raw_labels) set.labels.push_back(remap.at(l));
    set.class_count = static_cast<int>(remap.size());
    set.name = std::move(name);
    if (!identity) {
        std::string note = " [labels remapped:";
        for (const auto& [raw, dense] : remap)
            note += " " + std::to_string(raw) + "->" + std::to_string(dense);
        set.name += note + "]";
    }
    validate(set);
    return set;
}

namespace detail {
inline RepresentationSet take_rows(const RepresentationSet& set,
                                   const std::vector<Eigen::Index>& rows,
                                   const std::string& suffix) {
    RepresentationSet out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), set.dim());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = set.features.row(rows[i]);
        out.labels.push_back(set.labels[static_cast<std::size_t>(rows[i])]);
    }
    out.class_count = set.class_count;
    out.name = set.name + suffix;
    return out;
}
}  // namespace detail

/**
 * Deterministic stratified split. Per class, indices are shuffled with the
 * seeded generator and the first round(fraction * n_k) go to the train side;
 * both sides keep the original row order. Errors out if any class would end
 * up with fewer than two samples on either side.
 */
inline std::pair<RepresentationSet, RepresentationSet> split_train_test(
    const RepresentationSet& set, double fraction, std::uint64_t seed) {
    validate(set);
    if (!(fraction > 0.0 && fraction < 1.0))
        throw validation_error("split fraction must be in (0, 1)");

    std::vector<std::vector<Eigen::Index>> by_class(
        static_cast<std::size_t>(set.class_count));
    for (Eigen::Index i = 0; i < set.n(); ++i)
        by_class[static_cast<std::size_t>(set.labels[static_cast<std::size_t>(i)])].push_back(i);

    rng gen(seed);
    std::vector<Eigen::Index> train_rows, test_rows;
    for (int k = 0; k < set.class_count; ++k) {
        auto& idx = by_class[static_cast<std::size_t>(k)];
        gen.shuffle(idx);
        const auto n_k = static_cast<Eigen::Index>(idx.size());
        const auto n_train = static_cast<Eigen::Index>(
            std::llround(fraction * static_cast<double>(n_k)));
        if (n_train < 2 || n_k - n_train < 2)
            throw validation_error("split leaves class " + std::to_string(k) +
                                   " with fewer than 2 samples on one side");
        train_rows.insert(train_rows.end(), idx.begin(), idx.begin() + n_train);
        test_rows.insert(test_rows.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {detail::take_rows(set, train_rows, " [train]"),
            detail::take_rows(set, test_rows, " [test]")};
}

}  // namespace ibnc
