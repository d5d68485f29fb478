#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbn/tensor.hpp"

namespace tbn::metrics {

/// Score matrix [n, C]; larger is better. Ties always favour the lower class index.
using Scores = Tensor<double>;
using Matrix = std::vector<std::vector<long>>;

inline constexpr double kDominanceThreshold = 0.15;

int argmax_row(std::span<const double> row);

/// Fraction of rows whose label ranks among the k best classes.
double top_k(const Scores& scores, std::span<const int> labels, int k);

/// Fraction of rows where verb and noun top-1 are both correct.
double action_accuracy(const Scores& verb, const Scores& noun, std::span<const int> verb_labels,
                       std::span<const int> noun_labels);

/// Top-k over (verb, noun) pairs scored by the product of the two (non-negative) scores.
double action_top_k(const Scores& verb, const Scores& noun, std::span<const int> verb_labels,
                    std::span<const int> noun_labels, int k);

/// confusion[true][predicted], predictions by top-1.
Matrix confusion_matrix(const Scores& scores, std::span<const int> labels);

struct ClassPR {
    std::vector<std::optional<double>> precision;  ///< nullopt where the class is never predicted
    std::vector<std::optional<double>> recall;     ///< nullopt where the class has no support
    double macro_precision = 0.0;                  ///< mean over defined entries
    double macro_recall = 0.0;
};

ClassPR per_class_pr(const Scores& scores, std::span<const int> labels);

struct TailSplit {
    std::vector<int> head_classes;  ///< top ceil(0.1 C) by training count
    double head_mean = 0.0;
    double tail_mean = 0.0;
};

/// Classes ranked by training count (descending, ties to lower id); per-class accuracies
/// that are undefined (nullopt) are left out of the group means.
TailSplit tail_split(std::span<const std::size_t> train_counts, std::span<const std::optional<double>> per_class_acc);

/// Indices of modalities whose accuracy is within `threshold` of the best.
std::vector<std::size_t> modality_dominance(std::span<const double> accuracies, double threshold = kDominanceThreshold);
/// Venn-region name such as "flow+audio".
std::string dominance_category(std::span<const double> accuracies, std::span<const std::string> names,
                               double threshold = kDominanceThreshold);

struct TaskMetrics {
    double top1 = 0.0;
    double top5 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    std::vector<std::optional<double>> per_class_accuracy;
    Matrix confusion;
};

struct EvalResult {
    std::size_t n = 0;
    TaskMetrics verb;
    TaskMetrics noun;
    double action_top1 = 0.0;
    double action_top5 = 0.0;
};

struct Labels {
    std::vector<int> verb;
    std::vector<int> noun;
};

/// Scores are expected to be class probabilities (rows of non-negative values).
EvalResult evaluate(const Scores& verb, const Scores& noun, const Labels& labels);

struct SubsetResult {
    std::string tag;
    EvalResult subset;
    std::optional<EvalResult> complement;  ///< absent when every row carries the tag
};

/// Metrics over rows carrying `tag` and over the rest. Throws InvalidArgument naming the tag
/// when no row carries it.
SubsetResult subset_eval(const Scores& verb, const Scores& noun, const Labels& labels,
                         std::span<const std::set<std::string>> tags, const std::string& tag);

/// Rows of `scores` listed in `rows`.
Scores select_rows(const Scores& scores, std::span<const std::size_t> rows);

nlohmann::json to_json(const EvalResult& r);
nlohmann::json to_json(const SubsetResult& r);
std::string confusion_csv(const Matrix& m);

}  // namespace tbn::metrics
