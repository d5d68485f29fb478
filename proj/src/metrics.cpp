#include "tbn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "tbn/error.hpp"

namespace tbn::metrics {

namespace {

void check_labels(const Scores& scores, std::span<const int> labels, const char* what) {
    if (scores.rank() != 2) throw ShapeError(std::string(what) + ": scores must be [n, C]");
    if (labels.size() != scores.dim(0)) {
        throw ShapeError(std::string(what) + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(scores.dim(0)) + " rows");
    }
    const auto C = static_cast<int>(scores.dim(1));
    for (int y : labels) {
        if (y < 0 || y >= C) {
            throw InvalidArgument(std::string(what) + ": label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(C) + ")");
        }
    }
}

/// Number of classes ranked strictly ahead of class y in this row.
std::size_t rank_of(std::span<const double> row, int y) {
    std::size_t ahead = 0;
    const double s = row[static_cast<std::size_t>(y)];
    for (std::size_t c = 0; c < row.size(); ++c) {
        if (row[c] > s || (row[c] == s && c < static_cast<std::size_t>(y))) ++ahead;
    }
    return ahead;
}

double mean_defined(const std::vector<std::optional<double>>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& x : v) {
        if (x) {
            sum += *x;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

nlohmann::json optional_list(const std::vector<std::optional<double>>& v) {
    auto out = nlohmann::json::array();
    for (const auto& x : v) out.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
    return out;
}

TaskMetrics task_metrics(const Scores& scores, std::span<const int> labels) {
    TaskMetrics t;
    t.top1 = top_k(scores, labels, 1);
    t.top5 = top_k(scores, labels, std::min<int>(5, static_cast<int>(scores.dim(1))));
    const auto pr = per_class_pr(scores, labels);
    t.macro_precision = pr.macro_precision;
    t.macro_recall = pr.macro_recall;
    t.per_class_accuracy = pr.recall;
    t.confusion = confusion_matrix(scores, labels);
    return t;
}

}  // namespace

int argmax_row(std::span<const double> row) {
    if (row.empty()) throw InvalidArgument("argmax of an empty row");
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

double top_k(const Scores& scores, std::span<const int> labels, int k) {
    check_labels(scores, labels, "top_k");
    if (k < 1 || k > static_cast<int>(scores.dim(1))) {
        throw InvalidArgument("top_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(scores.dim(1)) + "]");
    }
    if (labels.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (rank_of(scores.row(r), labels[r]) < static_cast<std::size_t>(k)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double action_accuracy(const Scores& verb, const Scores& noun, std::span<const int> verb_labels,
                       std::span<const int> noun_labels) {
    check_labels(verb, verb_labels, "action_accuracy");
    check_labels(noun, noun_labels, "action_accuracy");
    if (verb_labels.size() != noun_labels.size()) throw ShapeError("action_accuracy: verb/noun rows differ");
    if (verb_labels.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < verb_labels.size(); ++r) {
        if (argmax_row(verb.row(r)) == verb_labels[r] && argmax_row(noun.row(r)) == noun_labels[r]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(verb_labels.size());
}

double action_top_k(const Scores& verb, const Scores& noun, std::span<const int> verb_labels,
                    std::span<const int> noun_labels, int k) {
    check_labels(verb, verb_labels, "action_top_k");
    check_labels(noun, noun_labels, "action_top_k");
    if (verb_labels.size() != noun_labels.size()) throw ShapeError("action_top_k: verb/noun rows differ");
    const std::size_t V = verb.dim(1), N = noun.dim(1);
    if (k < 1 || static_cast<std::size_t>(k) > V * N) throw InvalidArgument("action_top_k: k out of range");
    if (verb_labels.empty()) return 0.0;
    std::size_t hits = 0;
    std::vector<double> pair(V * N);
    for (std::size_t r = 0; r < verb_labels.size(); ++r) {
        for (std::size_t v = 0; v < V; ++v)
            for (std::size_t n = 0; n < N; ++n) pair[v * N + n] = verb.at(r, v) * noun.at(r, n);
        const auto y = static_cast<int>(static_cast<std::size_t>(verb_labels[r]) * N +
                                        static_cast<std::size_t>(noun_labels[r]));
        if (rank_of(pair, y) < static_cast<std::size_t>(k)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(verb_labels.size());
}

Matrix confusion_matrix(const Scores& scores, std::span<const int> labels) {
    check_labels(scores, labels, "confusion_matrix");
    const std::size_t C = scores.dim(1);
    Matrix m(C, std::vector<long>(C, 0));
    for (std::size_t r = 0; r < labels.size(); ++r) {
        ++m[static_cast<std::size_t>(labels[r])][static_cast<std::size_t>(argmax_row(scores.row(r)))];
    }
    return m;
}

ClassPR per_class_pr(const Scores& scores, std::span<const int> labels) {
    const Matrix m = confusion_matrix(scores, labels);
    const std::size_t C = m.size();
    ClassPR pr;
    pr.precision.resize(C);
    pr.recall.resize(C);
    for (std::size_t c = 0; c < C; ++c) {
        long support = 0, predicted = 0;
        for (std::size_t j = 0; j < C; ++j) {
            support += m[c][j];
            predicted += m[j][c];
        }
        const auto tp = static_cast<double>(m[c][c]);
        if (predicted > 0) pr.precision[c] = tp / static_cast<double>(predicted);
        if (support > 0) pr.recall[c] = tp / static_cast<double>(support);
    }
    pr.macro_precision = mean_defined(pr.precision);
    pr.macro_recall = mean_defined(pr.recall);
    return pr;
}

TailSplit tail_split(std::span<const std::size_t> train_counts, std::span<const std::optional<double>> per_class_acc) {
    if (train_counts.size() != per_class_acc.size()) throw ShapeError("tail_split: counts and accuracies differ in length");
    const std::size_t C = train_counts.size();
    std::vector<int> order(C);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return train_counts[static_cast<std::size_t>(a)] > train_counts[static_cast<std::size_t>(b)]; });
    const std::size_t head = (C + 9) / 10;
    TailSplit out;
    std::vector<std::optional<double>> head_acc, tail_acc;
    for (std::size_t i = 0; i < C; ++i) {
        const auto c = static_cast<std::size_t>(order[i]);
        if (i < head) {
            out.head_classes.push_back(order[i]);
            head_acc.push_back(per_class_acc[c]);
        } else {
            tail_acc.push_back(per_class_acc[c]);
        }
    }
    std::sort(out.head_classes.begin(), out.head_classes.end());
    out.head_mean = mean_defined(head_acc);
    out.tail_mean = mean_defined(tail_acc);
    return out;
}

std::vector<std::size_t> modality_dominance(std::span<const double> accuracies, double threshold) {
    if (accuracies.empty()) throw InvalidArgument("modality_dominance: no accuracies");
    const double best = *std::max_element(accuracies.begin(), accuracies.end());
    std::vector<std::size_t> set;
    for (std::size_t m = 0; m < accuracies.size(); ++m) {
        if (best - accuracies[m] <= threshold) set.push_back(m);
    }
    return set;
}

std::string dominance_category(std::span<const double> accuracies, std::span<const std::string> names,
                               double threshold) {
    if (names.size() != accuracies.size()) throw ShapeError("dominance_category: one name per modality required");
    std::string out;
    for (auto m : modality_dominance(accuracies, threshold)) out += (out.empty() ? "" : "+") + names[m];
    return out;
}

EvalResult evaluate(const Scores& verb, const Scores& noun, const Labels& labels) {
    EvalResult r;
    r.n = labels.verb.size();
    r.verb = task_metrics(verb, labels.verb);
    r.noun = task_metrics(noun, labels.noun);
    r.action_top1 = action_accuracy(verb, noun, labels.verb, labels.noun);
    r.action_top5 = action_top_k(verb, noun, labels.verb, labels.noun,
                                 static_cast<int>(std::min<std::size_t>(5, verb.dim(1) * noun.dim(1))));
    return r;
}

Scores select_rows(const Scores& scores, std::span<const std::size_t> rows) {
    Scores out({rows.size(), scores.dim(1)});
    for (std::size_t i = 0; i < rows.size(); ++i) std::ranges::copy(scores.row(rows[i]), out.row(i).begin());
    return out;
}

SubsetResult subset_eval(const Scores& verb, const Scores& noun, const Labels& labels,
                         std::span<const std::set<std::string>> tags, const std::string& tag) {
    if (tags.size() != labels.verb.size()) throw ShapeError("subset_eval: one tag set per row required");
    std::vector<std::size_t> in, out;
    for (std::size_t r = 0; r < tags.size(); ++r) (tags[r].contains(tag) ? in : out).push_back(r);
    if (in.empty()) throw InvalidArgument("subset_eval: no segment carries tag '" + tag + "'");
    auto pick = [&](const std::vector<std::size_t>& rows) {
        Labels l;
        for (auto r : rows) {
            l.verb.push_back(labels.verb[r]);
            l.noun.push_back(labels.noun[r]);
        }
        return evaluate(select_rows(verb, rows), select_rows(noun, rows), l);
    };
    SubsetResult res;
    res.tag = tag;
    res.subset = pick(in);
    if (!out.empty()) res.complement = pick(out);
    return res;
}

nlohmann::json to_json(const EvalResult& r) {
    auto task = [](const TaskMetrics& t) {
        return nlohmann::json{{"top1", t.top1},
                              {"top5", t.top5},
                              {"macro_precision", t.macro_precision},
                              {"macro_recall", t.macro_recall},
                              {"per_class_accuracy", optional_list(t.per_class_accuracy)},
                              {"confusion", t.confusion}};
    };
    return {{"n", r.n},
            {"verb", task(r.verb)},
            {"noun", task(r.noun)},
            {"action", {{"top1", r.action_top1}, {"top5", r.action_top5}}}};
}

nlohmann::json to_json(const SubsetResult& r) {
    return {{"tag", r.tag},
            {"subset", to_json(r.subset)},
            {"rest", r.complement ? to_json(*r.complement) : nlohmann::json(nullptr)}};
}

std::string confusion_csv(const Matrix& m) {
    std::ostringstream os;
    os << "true\\pred";
    for (std::size_t c = 0; c < m.size(); ++c) os << ',' << c;
    os << '\n';
    for (std::size_t r = 0; r < m.size(); ++r) {
        os << r;
        for (long v : m[r]) os << ',' << v;
        os << '\n';
    }
    return os.str();
}

}  // namespace tbn::metrics
