#include "tbn/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tbn/checkpoint.hpp"
#include "tbn/error.hpp"
#include "tbn/gradcheck.hpp"
#include "tbn/io.hpp"
#include "tbn/plot.hpp"

namespace fs = std::filesystem;

namespace tbn::cli {

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.output_dir) / name).string(); }

void write_effective_config(const RunConfig& cfg, const std::string& command) {
    ensure_directory(cfg.output_dir);
    write_json_file(out_path(cfg, "effective_config." + command + ".json"), to_json(cfg));
}

Dataset load_data(const RunConfig& cfg) {
    if (cfg.data.manifest.empty()) throw ConfigError("data.manifest is required (--manifest)");
    return load_dataset(cfg.data.manifest);
}

Model<float> load_model(const std::string& path, const Dataset& ds) {
    auto model = Model<float>::from_checkpoint(read_checkpoint(path));
    const auto& c = model.config();
    if (c.n_verbs != ds.n_verbs || c.n_nouns != ds.n_nouns) {
        throw ConfigError(path + ": checkpoint has " + std::to_string(c.n_verbs) + " verb / " +
                          std::to_string(c.n_nouns) + " noun classes, manifest has " + std::to_string(ds.n_verbs) +
                          " / " + std::to_string(ds.n_nouns));
    }
    resolve_modalities(ds, c);
    return model;
}

std::vector<std::size_t> records_of(const Dataset& ds, const std::string& split) {
    auto r = ds.split_indices(split);
    if (r.empty()) throw ConfigError("no records in split '" + split + "'");
    return r;
}

std::string pct(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * v;
    return os.str();
}

}  // namespace

void cmd_gen(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const Dataset ds = generate_dataset(cfg.synth, cfg.seed);
    write_dataset(cfg.output_dir, ds);
    write_effective_config(cfg, "gen");
    out << "wrote " << ds.records.size() << " segments (" << ds.split_indices("train").size() << " train, "
        << ds.split_indices("test").size() << " test) to " << out_path(cfg, "manifest.jsonl") << '\n';
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const Dataset ds = load_data(cfg);
    const ModelConfig mc = cfg.model_config(ds);
    const auto result = train(mc, ds, cfg.train_options());
    Checkpoint ck = result.model.to_checkpoint();
    const auto o = cfg.train_options();
    ck.hyperparameters["train"] = {{"epochs", o.epochs},     {"batch_size", o.batch_size}, {"lr", o.lr},
                                   {"momentum", o.momentum}, {"decay_epoch", o.decay_epoch},
                                   {"decay_factor", o.decay_factor}, {"seed", o.seed}};
    ensure_directory(cfg.output_dir);
    write_checkpoint(out_path(cfg, "model.ckpt"), ck);
    write_text_file(out_path(cfg, "train_log.csv"), log_csv(result.log));
    write_effective_config(cfg, "train");
    for (const auto& e : result.log) {
        if (e.epoch == cfg.train.epochs || e.split != "train") {
            out << "epoch " << e.epoch << " [" << e.split << "] loss " << e.loss << " verb " << pct(e.verb_top1)
                << "% noun " << pct(e.noun_top1) << "% action " << pct(e.action_top1) << "%\n";
        }
    }
    out << "checkpoint: " << out_path(cfg, "model.ckpt") << '\n';
}

void cmd_eval(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    std::vector<std::string> paths = cfg.eval.ensemble;
    if (paths.empty()) {
        if (cfg.eval.checkpoint.empty()) throw ConfigError("eval needs --checkpoint or --ensemble");
        paths.push_back(cfg.eval.checkpoint);
    }
    const Dataset ds = load_data(cfg);
    std::vector<Model<float>> models;
    for (const auto& p : paths) models.push_back(load_model(p, ds));
    std::vector<Model<float>*> ptrs;
    for (auto& m : models) ptrs.push_back(&m);

    const auto records = records_of(ds, cfg.eval.split);
    const auto pred = ensemble_predict(ptrs, ds, records, cfg.predict_options());
    const auto result = metrics::evaluate(pred.verb, pred.noun, pred.labels);

    nlohmann::json report = metrics::to_json(result);
    report["checkpoints"] = paths;
    report["split"] = cfg.eval.split;
    report["test_placement"] = cfg.tbw.test_placement;
    report["aggregation"] = cfg.eval.aggregation;
    if (!cfg.eval.subset_tag.empty()) {
        std::vector<std::set<std::string>> tags;
        for (auto i : records) tags.push_back(ds.records[i].segment.tags);
        const auto sub = metrics::subset_eval(pred.verb, pred.noun, pred.labels, tags, cfg.eval.subset_tag);
        report["subset_eval"] = metrics::to_json(sub);
        out << "subset '" << sub.tag << "': n " << sub.subset.n << " verb " << pct(sub.subset.verb.top1) << "% action "
            << pct(sub.subset.action_top1) << "%\n";
        if (sub.complement) {
            out << "rest: n " << sub.complement->n << " verb " << pct(sub.complement->verb.top1) << "% action "
                << pct(sub.complement->action_top1) << "%\n";
        }
    }
    ensure_directory(cfg.output_dir);
    write_json_file(out_path(cfg, "eval.json"), report);
    write_text_file(out_path(cfg, "confusion_verb.csv"), metrics::confusion_csv(result.verb.confusion));
    write_text_file(out_path(cfg, "confusion_noun.csv"), metrics::confusion_csv(result.noun.confusion));
    write_effective_config(cfg, "eval");
    out << "n " << result.n << " verb top1 " << pct(result.verb.top1) << "% top5 " << pct(result.verb.top5)
        << "% | noun top1 " << pct(result.noun.top1) << "% | action top1 " << pct(result.action_top1) << "%\n";
}

void cmd_sweep_b(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    if (cfg.sweep.checkpoint.empty()) throw ConfigError("sweep-b needs --checkpoint");
    const Dataset ds = load_data(cfg);
    auto model = load_model(cfg.sweep.checkpoint, ds);
    const auto records = records_of(ds, cfg.sweep.split);
    const auto points = sweep_single_tbw(model, ds, records, cfg.sweep_widths(), cfg.sweep.runs, cfg.seed);

    ensure_directory(cfg.output_dir);
    write_text_file(out_path(cfg, "sweep.csv"), sweep_csv(points));
    if (cfg.sweep.plot) {
        std::vector<std::string> labels;
        PlotSeries verb{"verb", {}, {}, "#1f77b4"}, action{"action", {}, {}, "#d62728"};
        for (const auto& p : points) {
            labels.push_back(p.label);
            verb.y.push_back(p.verb_mean);
            verb.err.push_back(p.verb_std);
            action.y.push_back(p.action_mean);
            action.err.push_back(p.action_std);
        }
        write_text_file(out_path(cfg, "sweep.svg"),
                        svg_line_chart("Single-TBW accuracy vs window width (" + std::to_string(cfg.sweep.runs) + " runs)",
                                       labels, {verb, action}, "top-1 accuracy"));
    }
    write_effective_config(cfg, "sweep-b");
    out << "width      verb mean +- std   action mean +- std\n";
    for (const auto& p : points) {
        out << std::left << std::setw(10) << p.label << ' ' << pct(p.verb_mean) << " +- " << pct(p.verb_std) << "   "
            << pct(p.action_mean) << " +- " << pct(p.action_std) << '\n';
    }
}

bool cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    GradCheckSuiteOptions o;
    o.seed = cfg.seed;
    o.tolerance = cfg.gradcheck.tolerance;
    o.linear_tolerance = cfg.gradcheck.linear_tolerance;
    o.inject_fault = cfg.gradcheck.inject_fault;
    o.include_audio = cfg.gradcheck.include_audio;
    bool ok = true;
    out << std::left << std::setw(34) << "check" << std::setw(14) << "max_rel_err" << std::setw(10) << "tol"
        << "result\n";
    for (const auto& r : gradcheck_suite(o)) {
        ok = ok && r.passed();
        std::ostringstream err, tol;
        err << std::scientific << std::setprecision(3) << r.max_rel_error;
        tol << std::scientific << std::setprecision(0) << r.tolerance;
        out << std::setw(34) << r.name << std::setw(14) << err.str() << std::setw(10) << tol.str()
            << (r.passed() ? "PASS" : "FAIL") << '\n';
    }
    out << (ok ? "all gradient checks passed\n" : "gradient check FAILED\n");
    return ok;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Temporal binding network lab: dataset generation, training, evaluation and diagnostics"};
    app.require_subcommand(1);

    std::string config_path, output_dir, manifest, fusion, modalities, tbw_width, checkpoint, subset_tag,
        aggregation, placement, split, widths;
    std::uint64_t seed = 0;
    int epochs = 0, segments = 0, runs = 0, batch = 0, samples = 0, classes = 0;
    double lr = 0, dropout = 0, offset = 0, distractors = 0;
    std::vector<std::string> ensemble;
    bool inject_fault = false, no_plot = false, no_audio = false;

    std::vector<std::pair<CLI::App*, std::string>> subs;
    auto common = [&](CLI::App* s) {
        s->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        s->add_option("--seed", seed, "Run seed");
        s->add_option("--output-dir", output_dir, "Output directory (env TBNLAB_OUTPUT_DIR also accepted)");
    };
    auto* gen = app.add_subcommand("gen", "Generate a synthetic multimodal dataset");
    auto* trn = app.add_subcommand("train", "Train a TBN model");
    auto* evl = app.add_subcommand("eval", "Evaluate checkpoints on a manifest");
    auto* swp = app.add_subcommand("sweep-b", "Single-TBW accuracy across window widths");
    auto* gck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    for (auto* s : {gen, trn, evl, swp, gck}) common(s);

    gen->add_option("--samples-per-class", samples, "Segments per class");
    gen->add_option("--classes", classes, "Number of classes");
    gen->add_option("--offset-frac", offset, "Cross-modal evidence offset as a fraction of T");
    gen->add_option("--distractor-rate", distractors, "Distractor events per second");

    for (auto* s : {trn, evl, swp}) s->add_option("--manifest", manifest, "manifest.jsonl or its directory");
    trn->add_option("--fusion", fusion, "concat | context-gate | gating");
    trn->add_option("--modalities", modalities, "Comma-separated modality ids, anchor first");
    trn->add_option("--segments", segments, "K");
    trn->add_option("--tbw-width", tbw_width, "Half-width b as a fraction of T (e.g. 1, T/3, 0.2, sync)");
    trn->add_option("--epochs", epochs, "Training epochs");
    trn->add_option("--lr", lr, "Base learning rate");
    trn->add_option("--batch-size", batch, "Segments per batch");
    trn->add_option("--dropout", dropout, "Dropout on the fused representation");

    evl->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
    evl->add_option("--ensemble", ensemble, "Checkpoints whose softmax scores are averaged")->expected(1, -1);
    evl->add_option("--subset-tag", subset_tag, "Also report the tagged subset and the rest");
    evl->add_option("--aggregation", aggregation, "Per-TBW aggregation at test time: logits | softmax");
    for (auto* s : {evl, swp}) s->add_option("--split", split, "Manifest split to use (empty: all)");
    for (auto* s : {trn, evl}) {
        s->add_option("--test-placement", placement, "Test companions: spread (inside the training window) | sync");
    }

    swp->add_option("--checkpoint", checkpoint, "Checkpoint to sweep");
    swp->add_option("--widths", widths, "Comma-separated widths, e.g. sync,T/60,T/30,T");
    swp->add_option("--runs", runs, "Repetitions per width");
    swp->add_flag("--no-plot", no_plot, "Skip the SVG plot");

    gck->add_flag("--inject-fault", inject_fault, "Corrupt one backward pass (mutation check)");
    gck->add_flag("--no-audio", no_audio, "Skip the spectrogram-input model check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }

    auto given = [](CLI::App* s, const char* name) {
        const CLI::Option* opt = s->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    auto split_list = [](const std::string& s) {
        std::vector<std::string> items;
        std::stringstream ss(s);
        for (std::string item; std::getline(ss, item, ',');) {
            if (!item.empty()) items.push_back(item);
        }
        return items;
    };

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        CLI::App* cmd = app.get_subcommands().front();
        if (given(cmd, "--seed")) cfg.seed = seed;
        if (const char* env = std::getenv("TBNLAB_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
        if (given(cmd, "--output-dir")) cfg.output_dir = output_dir;
        if (given(cmd, "--manifest")) cfg.data.manifest = manifest;
        if (given(cmd, "--samples-per-class")) cfg.synth.samples_per_class = samples;
        if (given(cmd, "--classes")) cfg.synth.n_classes = classes;
        if (given(cmd, "--offset-frac")) cfg.synth.offset_frac = offset;
        if (given(cmd, "--distractor-rate")) cfg.synth.distractor_rate = distractors;
        if (given(cmd, "--fusion")) cfg.model.fusion = parse_fusion(fusion);
        if (given(cmd, "--modalities")) cfg.model.modalities = split_list(modalities);
        if (given(cmd, "--segments")) cfg.tbw.segments = segments;
        if (given(cmd, "--tbw-width")) cfg.tbw.b_rel = parse_width(tbw_width).b_rel;
        if (given(cmd, "--epochs")) cfg.train.epochs = epochs;
        if (given(cmd, "--lr")) cfg.train.lr = lr;
        if (given(cmd, "--batch-size")) cfg.train.batch_size = batch;
        if (given(cmd, "--dropout")) cfg.model.dropout = dropout;
        if (given(cmd, "--test-placement")) cfg.tbw.test_placement = placement;
        if (given(cmd, "--checkpoint")) (cmd == swp ? cfg.sweep.checkpoint : cfg.eval.checkpoint) = checkpoint;
        if (given(cmd, "--ensemble")) cfg.eval.ensemble = ensemble;
        if (given(cmd, "--subset-tag")) cfg.eval.subset_tag = subset_tag;
        if (given(cmd, "--aggregation")) cfg.eval.aggregation = aggregation;
        if (given(cmd, "--split")) (cmd == swp ? cfg.sweep.split : cfg.eval.split) = split;
        if (given(cmd, "--widths")) {
            cfg.sweep.widths = split_list(widths);
            if (cfg.sweep.widths.empty()) throw InvalidArgument("--widths lists no widths");
        }
        if (given(cmd, "--runs")) cfg.sweep.runs = runs;
        if (no_plot) cfg.sweep.plot = false;
        if (inject_fault) cfg.gradcheck.inject_fault = true;
        if (no_audio) cfg.gradcheck.include_audio = false;

        if (cmd == gen) cmd_gen(cfg, out);
        else if (cmd == trn) cmd_train(cfg, out);
        else if (cmd == evl) cmd_eval(cfg, out);
        else if (cmd == swp) cmd_sweep_b(cfg, out);
        else if (!cmd_gradcheck(cfg, out)) return kValidation;
        return kOk;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntime;
    }
}

}  // namespace tbn::cli
