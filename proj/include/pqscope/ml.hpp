/*
 * Copyright 2026 The pqscope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
 * implied.  See the License for the specific language governing
 * permissions and limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqscope/errors.hpp"
#include "pqscope/features.hpp"

// Classification pipeline: chi-square feature scoring over raw non-negative
// feature mass, stratified splitting, one-vs-rest logistic regression and a
// bagged Gini-split tree ensemble, per-class metrics, JSON persistence.
// Everything is deterministic for a fixed seed.

namespace pqscope::ml {

using features::Dataset;
using features::FeatureVector;
using features::kNumFeatures;

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 step over seed ^ stream keeps per-tree generators independent
    std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ull) ^ 0xD1B54A32D192ED03ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// rejection-sampled bounded draw; std::uniform_int_distribution is
// implementation-defined and would break cross-platform determinism
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

template <typename T>
inline void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[bounded(rng, i)]);
}

} // namespace detail

// --- chi-square feature scoring -------------------------------------------

// Per feature: observed class mass O_c (sum of the feature over class rows)
// against expectation E_c = prior_c * total mass; score = sum (O-E)^2 / E.
inline std::vector<double> chi2_scores(const Dataset& ds) {
    std::size_t n_classes = ds.classes.size();
    std::vector<double> scores(kNumFeatures, 0.0);
    if (ds.rows.empty() || n_classes == 0) return scores;

    std::vector<std::size_t> class_counts(n_classes, 0);
    std::vector<std::vector<double>> observed(n_classes, std::vector<double>(kNumFeatures, 0.0));
    for (const auto& r : ds.rows) {
        std::size_t c = ds.class_index(r.label);
        ++class_counts[c];
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            if (r.values[f] < 0)
                raise(Errc::negative_feature,
                      "feature " + features::feature_names()[f] + " is negative");
            observed[c][f] += r.values[f];
        }
    }
    double n = static_cast<double>(ds.rows.size());
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        double total = 0;
        for (std::size_t c = 0; c < n_classes; ++c) total += observed[c][f];
        double score = 0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            double expected = (static_cast<double>(class_counts[c]) / n) * total;
            if (expected > 0) {
                double d = observed[c][f] - expected;
                score += d * d / expected;
            }
        }
        scores[f] = score;
    }
    return scores;
}

struct FeatureSelector {
    std::vector<double> scores;
    std::vector<std::size_t> selected; // by descending score, ties by ascending index
};

inline FeatureSelector select_top_k(const std::vector<double>& scores, std::size_t k) {
    if (k == 0 || k > scores.size())
        raise(Errc::invalid_k, "k=" + std::to_string(k) + " with " +
                                   std::to_string(scores.size()) + " features");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    order.resize(k);
    return FeatureSelector{scores, std::move(order)};
}

inline FeatureSelector select_all(std::size_t n = kNumFeatures) {
    FeatureSelector s;
    s.selected.resize(n);
    std::iota(s.selected.begin(), s.selected.end(), 0);
    return s;
}

// --- stratified split -------------------------------------------------------

// Seeded shuffle within each class; round(train_fraction * n_c) rows go to
// train. A single-member class goes entirely to train with a warning.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
    Dataset train, test;
    std::mt19937_64 rng(detail::mix_seed(seed, 0x5354524154ull));
    for (std::size_t c = 0; c < ds.classes.size(); ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.rows.size(); ++i)
            if (ds.rows[i].label == ds.classes[c]) idx.push_back(i);
        detail::shuffle(idx, rng);
        std::size_t train_n = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        if (idx.size() == 1) {
            train_n = 1;
            train.warnings.push_back("class '" + ds.classes[c] +
                                     "' has a single row; kept in train");
        }
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < train_n ? train : test).rows.push_back(ds.rows[idx[i]]);
    }
    train.rebuild_classes();
    test.rebuild_classes();
    return {std::move(train), std::move(test)};
}

// --- trained model -----------------------------------------------------------

struct TreeNode {
    int feature = -1; // index into feature_indices; -1 marks a leaf
    double threshold = 0;
    int left = -1, right = -1;
    std::vector<std::size_t> class_counts; // leaf only
};

struct Tree {
    std::vector<TreeNode> nodes; // node 0 is the root
};

struct LogregParams {
    double learning_rate = 0.1;
    std::size_t iterations = 2000;
    double l2 = 1e-4;
};

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 0; // 0 = unlimited
    std::size_t min_leaf = 1;
    std::size_t feature_subsample = 0; // 0 = floor(sqrt(d))
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct TrainedModel {
    enum class Kind { logreg, forest };
    Kind kind = Kind::logreg;
    std::vector<std::string> classes;
    std::vector<std::size_t> feature_indices;
    std::uint64_t seed = 0;

    // logreg: one-vs-rest weights over min-max-normalized selected features
    std::vector<std::vector<double>> weights;
    std::vector<double> bias;
    std::vector<double> feature_min, feature_range;

    // forest
    std::vector<Tree> trees;
};

// --- logistic regression ------------------------------------------------------

inline TrainedModel fit_logreg(const Dataset& train, const FeatureSelector& selector,
                               const LogregParams& params = {}) {
    if (train.classes.size() < 2)
        raise(Errc::single_class, "training data has " + std::to_string(train.classes.size()) +
                                      " class(es)");
    const auto& feats = selector.selected;
    std::size_t d = feats.size(), n = train.rows.size();

    TrainedModel m;
    m.kind = TrainedModel::Kind::logreg;
    m.classes = train.classes;
    m.feature_indices = feats;
    m.feature_min.assign(d, 0.0);
    m.feature_range.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = train.rows[0].values[feats[j]], hi = lo;
        for (const auto& r : train.rows) {
            lo = std::min(lo, r.values[feats[j]]);
            hi = std::max(hi, r.values[feats[j]]);
        }
        m.feature_min[j] = lo;
        m.feature_range[j] = hi > lo ? hi - lo : 1.0;
    }
    // normalized design matrix
    std::vector<std::vector<double>> x(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            x[i][j] = (train.rows[i].values[feats[j]] - m.feature_min[j]) / m.feature_range[j];

    m.weights.assign(m.classes.size(), std::vector<double>(d, 0.0));
    m.bias.assign(m.classes.size(), 0.0);
    std::vector<double> grad(d);
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        auto& w = m.weights[c];
        double& b = m.bias[c];
        for (std::size_t it = 0; it < params.iterations; ++it) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double grad_b = 0;
            for (std::size_t i = 0; i < n; ++i) {
                double z = b;
                for (std::size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
                double p = 1.0 / (1.0 + std::exp(-z));
                double err = p - (train.rows[i].label == m.classes[c] ? 1.0 : 0.0);
                for (std::size_t j = 0; j < d; ++j) grad[j] += err * x[i][j];
                grad_b += err;
            }
            double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t j = 0; j < d; ++j)
                w[j] -= params.learning_rate * (grad[j] * inv_n + 2.0 * params.l2 * w[j]);
            b -= params.learning_rate * grad_b * inv_n;
        }
    }
    return m;
}

// --- decision forest -----------------------------------------------------------

namespace detail {

struct SplitChoice {
    double impurity = std::numeric_limits<double>::infinity();
    std::size_t feature = 0; // original feature index
    double threshold = 0;
    bool valid = false;
};

inline double gini_of(const std::vector<std::size_t>& counts, double n) {
    if (n <= 0) return 0;
    double g = 1.0;
    for (std::size_t c : counts) {
        double p = static_cast<double>(c) / n;
        g -= p * p;
    }
    return g;
}

struct TreeBuilder {
    const Dataset& data;
    const std::vector<std::size_t>& feats; // selected original feature indices
    const ForestParams& params;
    std::mt19937_64& rng;
    Tree tree;

    // Find the Gini-best (feature, midpoint threshold) over the candidate
    // features; ties break toward the lower feature index, then the lower
    // threshold.
    SplitChoice best_split(const std::vector<std::size_t>& rows,
                           const std::vector<std::size_t>& candidates) {
        SplitChoice best;
        double n = static_cast<double>(rows.size());
        std::size_t n_classes = data.classes.size();
        std::vector<std::pair<double, std::size_t>> vals(rows.size()); // (value, class)
        for (std::size_t f : candidates) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                vals[i] = {data.rows[rows[i]].values[f],
                           data.class_index(data.rows[rows[i]].label)};
            std::sort(vals.begin(), vals.end());
            std::vector<std::size_t> left(n_classes, 0), right(n_classes, 0);
            for (const auto& [v, c] : vals) ++right[c];
            std::size_t n_left = 0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                ++left[vals[i].second];
                --right[vals[i].second];
                ++n_left;
                if (vals[i].first == vals[i + 1].first) continue; // same value, no boundary
                std::size_t n_right = vals.size() - n_left;
                if (n_left < params.min_leaf || n_right < params.min_leaf) continue;
                double threshold = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
                double impurity =
                    (static_cast<double>(n_left) * gini_of(left, static_cast<double>(n_left)) +
                     static_cast<double>(n_right) * gini_of(right, static_cast<double>(n_right))) /
                    n;
                bool better = impurity < best.impurity ||
                              (impurity == best.impurity &&
                               (f < best.feature ||
                                (f == best.feature && threshold < best.threshold)));
                if (!best.valid || better) {
                    best = {impurity, f, threshold, true};
                }
            }
        }
        return best;
    }

    int build(std::vector<std::size_t> rows, std::size_t depth) {
        std::size_t n_classes = data.classes.size();
        std::vector<std::size_t> counts(n_classes, 0);
        for (std::size_t i : rows) ++counts[data.class_index(data.rows[i].label)];
        bool pure = std::count_if(counts.begin(), counts.end(),
                                  [](std::size_t c) { return c > 0; }) <= 1;
        bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
        if (pure || depth_capped || rows.size() < 2 * params.min_leaf)
            return make_leaf(std::move(counts));

        // candidate features, ascending for deterministic tie-breaks
        std::size_t want = params.feature_subsample == 0
                               ? std::max<std::size_t>(
                                     1, static_cast<std::size_t>(
                                            std::floor(std::sqrt(static_cast<double>(feats.size())))))
                               : std::min(params.feature_subsample, feats.size());
        std::vector<std::size_t> candidates = feats;
        if (want < feats.size()) {
            for (std::size_t i = 0; i < want; ++i)
                std::swap(candidates[i], candidates[i + bounded(rng, candidates.size() - i)]);
            candidates.resize(want);
        }
        std::sort(candidates.begin(), candidates.end());

        SplitChoice choice = best_split(rows, candidates);
        if (!choice.valid) return make_leaf(std::move(counts));

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t i : rows)
            (data.rows[i].values[choice.feature] <= choice.threshold ? left_rows : right_rows)
                .push_back(i);
        rows.clear();
        rows.shrink_to_fit();

        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_id].feature = static_cast<int>(choice.feature);
        tree.nodes[node_id].threshold = choice.threshold;
        int l = build(std::move(left_rows), depth + 1);
        int r = build(std::move(right_rows), depth + 1);
        tree.nodes[node_id].left = l;
        tree.nodes[node_id].right = r;
        return node_id;
    }

    int make_leaf(std::vector<std::size_t> counts) {
        int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[id].class_counts = std::move(counts);
        return id;
    }
};

inline std::size_t leaf_majority(const TreeNode& leaf) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < leaf.class_counts.size(); ++c)
        if (leaf.class_counts[c] > leaf.class_counts[best]) best = c;
    return best;
}

inline std::size_t tree_predict(const Tree& tree, const FeatureVector& row) {
    int at = 0;
    while (tree.nodes[at].feature >= 0) {
        const auto& n = tree.nodes[at];
        at = row.values[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return leaf_majority(tree.nodes[at]);
}

} // namespace detail

inline TrainedModel fit_forest(const Dataset& train, const FeatureSelector& selector,
                               const ForestParams& params) {
    if (train.classes.size() < 2)
        raise(Errc::single_class, "training data has " + std::to_string(train.classes.size()) +
                                      " class(es)");
    TrainedModel m;
    m.kind = TrainedModel::Kind::forest;
    m.classes = train.classes;
    m.feature_indices = selector.selected;
    m.seed = params.seed;
    m.trees.reserve(params.n_trees);
    std::size_t n = train.rows.size();
    // per-tree generators are derived from (seed, tree index) so trees could
    // be grown concurrently and still match sequential training
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        std::mt19937_64 rng(detail::mix_seed(params.seed, t));
        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            for (std::size_t i = 0; i < n; ++i)
                rows[i] = static_cast<std::size_t>(detail::bounded(rng, n));
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        detail::TreeBuilder builder{train, m.feature_indices, params, rng, {}};
        builder.build(std::move(rows), 0);
        m.trees.push_back(std::move(builder.tree));
    }
    return m;
}

// --- prediction ---------------------------------------------------------------

inline std::string predict_one(const TrainedModel& m, const FeatureVector& row) {
    if (m.kind == TrainedModel::Kind::logreg) {
        std::size_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < m.classes.size(); ++c) {
            double z = m.bias[c];
            for (std::size_t j = 0; j < m.feature_indices.size(); ++j) {
                double v = (row.values[m.feature_indices[j]] - m.feature_min[j]) /
                           m.feature_range[j];
                z += m.weights[c][j] * v;
            }
            if (z > best_score) { // strict: ties keep the first class
                best_score = z;
                best = c;
            }
        }
        return m.classes[best];
    }
    std::vector<std::size_t> votes(m.classes.size(), 0);
    for (const auto& tree : m.trees) ++votes[detail::tree_predict(tree, row)];
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best]) best = c;
    return m.classes[best];
}

inline std::vector<std::string> predict(const TrainedModel& m,
                                        const std::vector<FeatureVector>& rows) {
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(predict_one(m, r));
    return out;
}

// --- metrics --------------------------------------------------------------------

struct ClassMetrics {
    double precision = 0, recall = 0, f1 = 0;
};

struct MetricsReport {
    double overall_accuracy = 0;
    std::vector<std::string> labels; // confusion axis: model classes + extras
    std::map<std::string, ClassMetrics> per_class;
    std::vector<std::vector<std::size_t>> confusion; // [actual][predicted]
    std::vector<std::string> notes;

    nlohmann::json to_json() const {
        nlohmann::json pc;
        for (const auto& [label, m] : per_class)
            pc[label] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
        return nlohmann::json{{"overall_accuracy", overall_accuracy},
                              {"per_class", std::move(pc)},
                              {"confusion", {{"labels", labels}, {"counts", confusion}}},
                              {"notes", notes}};
    }
};

inline MetricsReport evaluate(const TrainedModel& m, const Dataset& test) {
    MetricsReport report;
    report.labels = m.classes;
    for (const auto& r : test.rows)
        if (std::find(report.labels.begin(), report.labels.end(), r.label) == report.labels.end())
            report.labels.push_back(r.label);
    std::size_t k = report.labels.size();
    report.confusion.assign(k, std::vector<std::size_t>(k, 0));
    auto index_of = [&](const std::string& label) {
        return static_cast<std::size_t>(
            std::find(report.labels.begin(), report.labels.end(), label) - report.labels.begin());
    };
    std::size_t correct = 0;
    for (const auto& r : test.rows) {
        std::string predicted = predict_one(m, r);
        ++report.confusion[index_of(r.label)][index_of(predicted)];
        if (predicted == r.label) ++correct;
    }
    report.overall_accuracy =
        test.rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.rows.size());
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = report.confusion[c][c], fp = 0, fn = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += report.confusion[o][c];
            fn += report.confusion[c][o];
        }
        ClassMetrics cm;
        cm.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        cm.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        cm.f1 = (cm.precision + cm.recall) > 0
                    ? 2 * cm.precision * cm.recall / (cm.precision + cm.recall)
                    : 0.0;
        if (tp + fn == 0)
            report.notes.push_back("class '" + report.labels[c] + "' absent from test set");
        report.per_class[report.labels[c]] = cm;
    }
    return report;
}

// --- persistence -------------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

inline nlohmann::json save_model(const TrainedModel& m) {
    nlohmann::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["kind"] = m.kind == TrainedModel::Kind::logreg ? "logreg" : "forest";
    j["classes"] = m.classes;
    j["feature_indices"] = m.feature_indices;
    j["seed"] = m.seed;
    if (m.kind == TrainedModel::Kind::logreg) {
        j["logreg"] = {{"weights", m.weights},
                       {"bias", m.bias},
                       {"feature_min", m.feature_min},
                       {"feature_range", m.feature_range}};
    } else {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : m.trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : t.nodes) {
                if (n.feature < 0) nodes.push_back({{"c", n.class_counts}});
                else
                    nodes.push_back({{"f", n.feature},
                                     {"t", n.threshold},
                                     {"l", n.left},
                                     {"r", n.right}});
            }
            trees.push_back({{"nodes", std::move(nodes)}});
        }
        j["forest"] = {{"trees", std::move(trees)}};
    }
    return j;
}

inline TrainedModel load_model(const nlohmann::json& j) {
    try {
        if (!j.is_object() || !j.contains("schema_version"))
            raise(Errc::malformed_model, "missing schema_version");
        int version = j["schema_version"].get<int>();
        if (version != kModelSchemaVersion)
            raise(Errc::unsupported_model_version,
                  "schema_version " + std::to_string(version) + ", supported: " +
                      std::to_string(kModelSchemaVersion));
        TrainedModel m;
        std::string kind = j.at("kind").get<std::string>();
        m.classes = j.at("classes").get<std::vector<std::string>>();
        m.feature_indices = j.at("feature_indices").get<std::vector<std::size_t>>();
        m.seed = j.value("seed", 0ull);
        if (m.classes.empty()) raise(Errc::malformed_model, "empty class list");
        for (std::size_t f : m.feature_indices)
            if (f >= kNumFeatures) raise(Errc::malformed_model, "feature index out of range");
        if (kind == "logreg") {
            m.kind = TrainedModel::Kind::logreg;
            const auto& lr = j.at("logreg");
            m.weights = lr.at("weights").get<std::vector<std::vector<double>>>();
            m.bias = lr.at("bias").get<std::vector<double>>();
            m.feature_min = lr.at("feature_min").get<std::vector<double>>();
            m.feature_range = lr.at("feature_range").get<std::vector<double>>();
            if (m.weights.size() != m.classes.size() || m.bias.size() != m.classes.size())
                raise(Errc::malformed_model, "weight shape mismatch");
        } else if (kind == "forest") {
            m.kind = TrainedModel::Kind::forest;
            for (const auto& tj : j.at("forest").at("trees")) {
                Tree t;
                for (const auto& nj : tj.at("nodes")) {
                    TreeNode n;
                    if (nj.contains("c")) {
                        n.class_counts = nj["c"].get<std::vector<std::size_t>>();
                        if (n.class_counts.size() != m.classes.size())
                            raise(Errc::malformed_model, "leaf count shape mismatch");
                    } else {
                        n.feature = nj.at("f").get<int>();
                        n.threshold = nj.at("t").get<double>();
                        n.left = nj.at("l").get<int>();
                        n.right = nj.at("r").get<int>();
                    }
                    t.nodes.push_back(std::move(n));
                }
                if (t.nodes.empty()) raise(Errc::malformed_model, "empty tree");
                for (const auto& n : t.nodes) {
                    if (n.feature < 0) continue;
                    if (n.left < 0 || n.right < 0 ||
                        n.left >= static_cast<int>(t.nodes.size()) ||
                        n.right >= static_cast<int>(t.nodes.size()))
                        raise(Errc::malformed_model, "node child out of range");
                }
                m.trees.push_back(std::move(t));
            }
        } else {
            raise(Errc::malformed_model, "unknown kind '" + kind + "'");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::malformed_model, e.what());
    }
}

inline void save_model_file(const TrainedModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out.good()) raise(Errc::parse_error, "cannot write '" + path + "'");
    out << save_model(m).dump(2) << "\n";
}

inline TrainedModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) raise(Errc::malformed_model, "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::malformed_model, e.what());
    }
    return load_model(j);
}

} // namespace pqscope::ml
