#include "tbn/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "tbn/audio.hpp"
#include "tbn/error.hpp"
#include "tbn/optim.hpp"

namespace tbn {

void TrainOptions::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (decay_epoch < 0) throw ConfigError("decay_epoch must be >= 0");
    if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be > 0");
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
}

std::vector<std::size_t> resolve_modalities(const Dataset& ds, const ModelConfig& cfg) {
    std::vector<std::size_t> cols;
    for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
        const auto& want = cfg.modalities[m];
        const std::size_t c = ds.modality_index(want.id);
        const auto& have = ds.modalities[c];
        if (have.kind != want.kind || have.rate != want.rate ||
            (want.kind == ModalityKind::vector_frame && ds.frame_dims[c] != cfg.input_dims[m])) {
            throw ConfigError("modality '" + want.id + "' of the model does not match the dataset (rate/kind/width)");
        }
        cols.push_back(c);
    }
    return cols;
}

ModelConfig model_config_for(const Dataset& ds, const std::vector<std::string>& modality_ids) {
    ModelConfig cfg;
    std::vector<std::string> ids = modality_ids;
    if (ids.empty()) {
        for (const auto& m : ds.modalities) ids.push_back(m.id);
    }
    for (const auto& id : ids) {
        const std::size_t c = ds.modality_index(id);
        cfg.modalities.push_back(ds.modalities[c]);
        cfg.input_dims.push_back(ds.frame_dims[c]);
    }
    cfg.n_verbs = ds.n_verbs;
    cfg.n_nouns = ds.n_nouns;
    return cfg;
}

template <typename T>
std::vector<Tensor<T>> gather_inputs(const Dataset& ds, const ModelConfig& cfg, std::span<const std::size_t> columns,
                                     std::span<const std::size_t> records,
                                     const std::vector<std::vector<SampleTuple>>& tuples) {
    if (tuples.size() != records.size() || records.empty()) throw InvalidArgument("gather_inputs: one tuple list per record");
    const std::size_t K = tuples[0].size();
    const std::size_t rows = records.size() * K;
    std::vector<Tensor<T>> out;
    for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
        const std::size_t col = columns[m];
        const auto& spec = cfg.modalities[m];
        Tensor<T> x({rows, cfg.raw_input_dim(m)});
        for (std::size_t r = 0; r < records.size(); ++r) {
            const Record& rec = ds.records[records[r]];
            const StreamData& stream = rec.streams[col];
            if (tuples[r].size() != K) throw InvalidArgument("gather_inputs: ragged tuple lists");
            for (std::size_t k = 0; k < K; ++k) {
                const long idx = tuples[r][k].index[m];
                auto dst = x.row(r * K + k);
                if (spec.kind == ModalityKind::audio_waveform) {
                    const double centre = rec.segment.start + static_cast<double>(idx) / spec.rate;
                    const auto window = audio::extract_window(audio::prepare_waveform(stream.wave), centre);
                    const auto spec_values = audio::log_spectrogram(window).values;
                    std::copy(spec_values.values().begin(), spec_values.values().end(), dst.begin());
                } else {
                    const long len = static_cast<long>(stream.frames.dim(0));
                    const long abs = std::clamp(idx + floor_tolerant(rec.segment.start * spec.rate), 0L, len - 1);
                    const auto src = stream.frames.row(static_cast<std::size_t>(abs));
                    std::copy(src.begin(), src.end(), dst.begin());
                }
            }
        }
        out.push_back(std::move(x));
    }
    return out;
}

template std::vector<Tensor<float>> gather_inputs<float>(const Dataset&, const ModelConfig&, std::span<const std::size_t>,
                                                         std::span<const std::size_t>,
                                                         const std::vector<std::vector<SampleTuple>>&);
template std::vector<Tensor<double>> gather_inputs<double>(const Dataset&, const ModelConfig&,
                                                           std::span<const std::size_t>, std::span<const std::size_t>,
                                                           const std::vector<std::vector<SampleTuple>>&);

namespace {

struct Labelled {
    std::vector<int> verbs, nouns;
};

Labelled labels_of(const Dataset& ds, std::span<const std::size_t> records) {
    Labelled l;
    for (auto i : records) {
        l.verbs.push_back(ds.records[i].segment.verb_class);
        l.nouns.push_back(ds.records[i].segment.noun_class);
    }
    return l;
}

TBWConfig train_tbw(const ModelConfig& cfg) {
    TBWConfig t = cfg.tbw;
    t.mode = SamplingMode::train_random;
    return t;
}

template <typename T>
int argmax(std::span<const T> row) {
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

template <typename T>
double forward_loss(Model<T>& model, const Dataset& ds, std::span<const std::size_t> records, Rng& sampler_rng,
                    Rng* dropout_rng, bool with_backward) {
    const auto& cfg = model.config();
    const auto columns = resolve_modalities(ds, cfg);
    const TBWConfig tbw = train_tbw(cfg);
    std::vector<std::vector<SampleTuple>> tuples;
    for (auto i : records) tuples.push_back(sample_training_tuples(ds.records[i].segment, cfg.modalities, tbw, sampler_rng));
    const auto inputs = gather_inputs<T>(ds, cfg, columns, records, tuples);
    const auto labels = labels_of(ds, records);
    Tape<T> tape;
    const auto out = model.forward(tape, inputs, static_cast<std::size_t>(tbw.segments), dropout_rng != nullptr,
                                   dropout_rng);
    const Var loss = model.loss(tape, out, labels.verbs, labels.nouns);
    const double value = static_cast<double>(tape.value(loss)[0]);
    if (with_backward) tape.backward(loss);
    return value;
}

template double forward_loss<float>(Model<float>&, const Dataset&, std::span<const std::size_t>, Rng&, Rng*, bool);
template double forward_loss<double>(Model<double>&, const Dataset&, std::span<const std::size_t>, Rng&, Rng*, bool);

TrainResult train(const ModelConfig& config, const Dataset& ds, const TrainOptions& options) {
    options.validate();
    TrainResult result{Model<float>(config, options.seed), {}};
    Model<float>& model = result.model;
    const auto& cfg = model.config();
    const auto columns = resolve_modalities(ds, cfg);
    const TBWConfig tbw = train_tbw(cfg);
    const auto K = static_cast<std::size_t>(tbw.segments);

    auto order = ds.split_indices(options.train_split);
    if (order.empty()) throw ConfigError("no records in split '" + options.train_split + "'");
    const auto eval_records = options.eval_split.empty() ? std::vector<std::size_t>{} : ds.split_indices(options.eval_split);

    Rng shuffle_rng = substream(options.seed, "shuffle");
    Rng sampler_rng = substream(options.seed, "sampler");
    Rng dropout_rng = substream(options.seed, "dropout");
    const StepSchedule schedule{options.lr, options.decay_epoch, options.decay_factor};
    auto params = model.parameters();

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const double lr = schedule.at(epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(shuffle_rng)]);
        }
        double loss_sum = 0.0;
        std::size_t verb_hits = 0, noun_hits = 0, action_hits = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            std::vector<std::vector<SampleTuple>> tuples;
            for (auto i : batch) tuples.push_back(sample_training_tuples(ds.records[i].segment, cfg.modalities, tbw, sampler_rng));
            const auto inputs = gather_inputs<float>(ds, cfg, columns, batch, tuples);
            const auto labels = labels_of(ds, batch);

            Tape<float> tape;
            const auto out = model.forward(tape, inputs, K, true, &dropout_rng);
            const Var loss = model.loss(tape, out, labels.verbs, labels.nouns);
            loss_sum += static_cast<double>(tape.value(loss)[0]) * static_cast<double>(batch.size());
            for (std::size_t b = 0; b < batch.size(); ++b) {
                const bool v = argmax(tape.value(out.verb).row(b)) == labels.verbs[b];
                const bool n = argmax(tape.value(out.noun).row(b)) == labels.nouns[b];
                verb_hits += v;
                noun_hits += n;
                action_hits += v && n;
            }
            tape.backward(loss);
            sgd_step(params, lr, options.momentum);
        }
        const auto n = static_cast<double>(order.size());
        result.log.push_back({epoch + 1, options.train_split, loss_sum / n, static_cast<double>(verb_hits) / n,
                              static_cast<double>(noun_hits) / n, static_cast<double>(action_hits) / n});

        const bool last = epoch + 1 == options.epochs;
        if (!eval_records.empty() && (last || (options.eval_every > 0 && (epoch + 1) % options.eval_every == 0))) {
            PredictOptions po;
            po.placement = options.eval_placement;
            const auto p = predict(model, ds, eval_records, po);
            const auto r = metrics::evaluate(p.verb, p.noun, p.labels);
            result.log.push_back({epoch + 1, options.eval_split, p.loss, r.verb.top1, r.noun.top1, r.action_top1});
        }
    }
    return result;
}

namespace {

/// Per-record class probabilities from `group` consecutive rows of per-TBW logits.
void aggregate_rows(const Tensor<float>& logits, std::size_t group, TestAggregation mode, metrics::Scores& out,
                    std::size_t first_row) {
    const std::size_t C = logits.cols();
    const std::size_t records = logits.rows() / group;
    for (std::size_t r = 0; r < records; ++r) {
        auto dst = out.row(first_row + r);
        std::fill(dst.begin(), dst.end(), 0.0);
        if (mode == TestAggregation::logits) {
            Tensor<double> mean({1, C});
            for (std::size_t k = 0; k < group; ++k)
                for (std::size_t c = 0; c < C; ++c) mean[c] += logits.at(r * group + k, c);
            for (std::size_t c = 0; c < C; ++c) mean[c] /= static_cast<double>(group);
            const auto p = softmax_rows(mean);
            std::copy(p.values().begin(), p.values().end(), dst.begin());
        } else {
            Tensor<double> rows({group, C});
            for (std::size_t k = 0; k < group; ++k)
                for (std::size_t c = 0; c < C; ++c) rows.at(k, c) = logits.at(r * group + k, c);
            const auto p = softmax_rows(rows);
            for (std::size_t k = 0; k < group; ++k)
                for (std::size_t c = 0; c < C; ++c) dst[c] += p.at(k, c) / static_cast<double>(group);
        }
    }
}

double mean_loss(const metrics::Scores& verb, const metrics::Scores& noun, const metrics::Labels& labels) {
    if (labels.verb.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t r = 0; r < labels.verb.size(); ++r) {
        sum -= std::log(std::max(verb.at(r, static_cast<std::size_t>(labels.verb[r])), 1e-300));
        sum -= std::log(std::max(noun.at(r, static_cast<std::size_t>(labels.noun[r])), 1e-300));
    }
    return sum / static_cast<double>(labels.verb.size());
}

}  // namespace

Predictions predict(Model<float>& model, const Dataset& ds, std::span<const std::size_t> records,
                    const PredictOptions& options) {
    const auto& cfg = model.config();
    const auto columns = resolve_modalities(ds, cfg);
    TBWConfig tbw = cfg.tbw;
    tbw.mode = SamplingMode::test_deterministic;
    tbw.n_test_anchors = options.n_test_anchors;
    tbw.test_placement = options.placement;
    if (options.b_rel >= 0.0) tbw.b_rel = options.b_rel;
    const auto group = static_cast<std::size_t>(options.n_test_anchors);

    Predictions p;
    p.verb = metrics::Scores({records.size(), static_cast<std::size_t>(cfg.n_verbs)});
    p.noun = metrics::Scores({records.size(), static_cast<std::size_t>(cfg.n_nouns)});
    const auto labels = labels_of(ds, records);
    p.labels = {labels.verbs, labels.nouns};
    const std::size_t chunk = std::max<std::size_t>(1, options.records_per_chunk);
    for (std::size_t start = 0; start < records.size(); start += chunk) {
        const std::span<const std::size_t> part = records.subspan(start, std::min(chunk, records.size() - start));
        std::vector<std::vector<SampleTuple>> tuples;
        for (auto i : part) tuples.push_back(sample_test_tuples(ds.records[i].segment, cfg.modalities, tbw));
        const auto inputs = gather_inputs<float>(ds, cfg, columns, part, tuples);
        Tape<float> tape;
        const auto out = model.forward(tape, inputs, 1, false, nullptr);
        aggregate_rows(tape.value(out.verb), group, options.aggregation, p.verb, start);
        aggregate_rows(tape.value(out.noun), group, options.aggregation, p.noun, start);
    }
    p.loss = mean_loss(p.verb, p.noun, p.labels);
    return p;
}

Predictions ensemble_predict(std::span<Model<float>* const> models, const Dataset& ds,
                             std::span<const std::size_t> records, const PredictOptions& options) {
    if (models.empty()) throw InvalidArgument("ensemble_predict: no models");
    Predictions sum;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto& c = models[i]->config();
        const auto& c0 = models[0]->config();
        if (c.n_verbs != c0.n_verbs || c.n_nouns != c0.n_nouns) {
            throw InvalidArgument("ensemble_predict: member " + std::to_string(i) + " has different class counts");
        }
        auto p = predict(*models[i], ds, records, options);
        if (i == 0) {
            sum = std::move(p);
            continue;
        }
        for (std::size_t j = 0; j < sum.verb.size(); ++j) sum.verb[j] += p.verb[j];
        for (std::size_t j = 0; j < sum.noun.size(); ++j) sum.noun[j] += p.noun[j];
    }
    const auto n = static_cast<double>(models.size());
    for (auto& v : sum.verb.values()) v /= n;
    for (auto& v : sum.noun.values()) v /= n;
    sum.loss = mean_loss(sum.verb, sum.noun, sum.labels);
    return sum;
}

metrics::EvalResult evaluate_model(Model<float>& model, const Dataset& ds, std::span<const std::size_t> records,
                                   const PredictOptions& options) {
    const auto p = predict(model, ds, records, options);
    return metrics::evaluate(p.verb, p.noun, p.labels);
}

std::vector<SweepWidth> default_sweep_widths() {
    return {{"sync", 0.0},          {"T/60", 1.0 / 60}, {"T/30", 1.0 / 30}, {"T/25", 1.0 / 25}, {"T/15", 1.0 / 15},
            {"T/10", 1.0 / 10},     {"T/5", 1.0 / 5},   {"T/3", 1.0 / 3},   {"T", 1.0}};
}

std::vector<SweepPoint> sweep_single_tbw(Model<float>& model, const Dataset& ds, std::span<const std::size_t> records,
                                         const std::vector<SweepWidth>& widths, int runs, std::uint64_t seed) {
    if (widths.empty()) throw InvalidArgument("sweep: empty widths list");
    if (runs < 1) throw InvalidArgument("sweep: runs must be >= 1");
    if (records.empty()) throw InvalidArgument("sweep: no records");
    const auto& cfg = model.config();
    const auto columns = resolve_modalities(ds, cfg);
    const auto labels = labels_of(ds, records);
    std::vector<SweepPoint> points;
    for (std::size_t w = 0; w < widths.size(); ++w) {
        if (!(widths[w].b_rel >= 0.0)) throw InvalidArgument("sweep: widths must be >= 0");
        Rng rng = substream(seed, "sweep", w);
        std::vector<double> acc[3];
        for (int run = 0; run < runs; ++run) {
            std::vector<std::vector<SampleTuple>> tuples;
            for (auto i : records) {
                const auto& seg = ds.records[i].segment;
                tuples.push_back({sample_single_tbw(seg, cfg.modalities, widths[w].b_rel * seg.duration(), rng)});
            }
            const auto inputs = gather_inputs<float>(ds, cfg, columns, records, tuples);
            Tape<float> tape;
            const auto out = model.forward(tape, inputs, 1, false, nullptr);
            std::size_t hits[3] = {0, 0, 0};
            for (std::size_t r = 0; r < records.size(); ++r) {
                const bool v = argmax(tape.value(out.verb).row(r)) == labels.verbs[r];
                const bool n = argmax(tape.value(out.noun).row(r)) == labels.nouns[r];
                hits[0] += v;
                hits[1] += n;
                hits[2] += v && n;
            }
            for (int t = 0; t < 3; ++t) acc[t].push_back(static_cast<double>(hits[t]) / static_cast<double>(records.size()));
        }
        auto stats = [](const std::vector<double>& v) {
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            return std::pair{mean, std::sqrt(var / static_cast<double>(v.size()))};
        };
        SweepPoint p{widths[w].label, widths[w].b_rel};
        std::tie(p.verb_mean, p.verb_std) = stats(acc[0]);
        std::tie(p.noun_mean, p.noun_std) = stats(acc[1]);
        std::tie(p.action_mean, p.action_std) = stats(acc[2]);
        points.push_back(p);
    }
    return points;
}

std::string log_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,split,loss,verb_top1,noun_top1,action_top1\n";
    for (const auto& e : log) {
        os << e.epoch << ',' << e.split << ',' << e.loss << ',' << e.verb_top1 << ',' << e.noun_top1 << ','
           << e.action_top1 << '\n';
    }
    return os.str();
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream os;
    os.precision(9);
    os << "width,b_rel,verb_mean,verb_std,noun_mean,noun_std,action_mean,action_std\n";
    for (const auto& p : points) {
        os << p.label << ',' << p.b_rel << ',' << p.verb_mean << ',' << p.verb_std << ',' << p.noun_mean << ','
           << p.noun_std << ',' << p.action_mean << ',' << p.action_std << '\n';
    }
    return os.str();
}

}  // namespace tbn
