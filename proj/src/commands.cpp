#include "kge/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "kge/checkpoint.hpp"
#include "kge/config.hpp"
#include "kge/text.hpp"
#include "kge/training.hpp"

namespace kge {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr RelationCategory all_categories[] = {RelationCategory::one_to_one, RelationCategory::one_to_many,
                                               RelationCategory::many_to_one, RelationCategory::many_to_many};

json hits_json(const std::map<std::size_t, double>& hits) {
    json j = json::object();
    for (const auto& [n, v] : hits) j[std::to_string(n)] = v;
    return j;
}

json group_json(const GroupMetrics& g, bool raw, bool filter) {
    json j;
    j["queries"] = g.queries;
    if (raw) j["raw"] = hits_json(g.raw_hits);
    if (filter) j["filter"] = hits_json(g.filter_hits);
    return j;
}

void write_text(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f) throw std::runtime_error("failed writing " + path);
}

void write_json(const json& j, const std::string& path, std::ostream& out) { write_text(j.dump(2) + "\n", path, out); }

struct LoadedData {
    Vocabulary vocab;
    TripleSet train;
    TripleSet valid;
    TripleSet test;
};

TripleSet load_optional(const std::string& path, Vocabulary& vocab, LoadOptions options) {
    if (path.empty()) {
        TripleSet empty;
        empty.split = options.split;
        return empty;
    }
    return load_triples_file(path, vocab, options);
}

LoadedData load_splits(const std::string& train, const std::string& valid, const std::string& test) {
    LoadedData d;
    d.train = load_optional(train, d.vocab, {Split::train, false, VocabPolicy::extend});
    d.valid = load_optional(valid, d.vocab, {Split::valid, false, VocabPolicy::extend});
    d.test = load_optional(test, d.vocab, {Split::test, false, VocabPolicy::extend});
    return d;
}

TripleSet load_against(const std::string& path, Vocabulary& vocab, Split split, bool labeled) {
    try {
        return load_triples_file(path, vocab, {split, labeled, VocabPolicy::frozen});
    } catch (const UnknownNameError& e) {
        throw UnknownNameError(path + ": " + e.what() + " of the checkpoint");
    }
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigurationError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::invalid_input;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::invalid_input;
    } catch (const UnknownNameError& e) {
        err << "error: vocabulary mismatch: " << e.what() << '\n';
        return exit_code::invalid_input;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::runtime_failure;
    }
}

int cmd_train(const std::string& config_path, std::size_t log_every, std::ostream& out, std::ostream& err) {
    RunConfig config = parse_config_file(config_path);
    config.check_paths();

    auto data = load_splits(config.train_path, config.valid_path, config.test_path);
    if (data.train.empty()) throw ConfigurationError("training file has no triples: " + config.train_path);
    const auto stats = compute_relation_stats(data.train, data.vocab.relation_count(), config.category_cutoff);
    const TripleSet* train_only[] = {&data.train};
    const FilterIndex known(train_only);

    const fs::path out_dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

    Checkpoint cp;
    cp.vocab = data.vocab;
    cp.config = config.to_map();
    cp.model = init_model(data.vocab, config.train);

    const auto start = std::chrono::steady_clock::now();
    const std::size_t total = config.train.epochs;
    auto log = train(cp.model, data.train, stats, known, config.train, [&](const EpochLog& e) {
        if (log_every > 0 && ((e.epoch + 1) % log_every == 0 || e.epoch + 1 == total)) {
            err << "epoch " << (e.epoch + 1) << "/" << total << "  loss " << e.mean_loss << "  " << e.seconds
                << "s\n";
        }
    });
    const double total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    save_checkpoint(cp, out_dir / "checkpoint");

    json j;
    j["epochs"] = json::array();
    for (const auto& e : log.epochs) {
        j["epochs"].push_back(
            {{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"seconds", e.seconds}, {"violations", e.violations}});
    }
    j["sampler_warnings"] = log.sampler_warnings;
    j["total_seconds"] = total_seconds;
    j["dataset"] = {{"entities", data.vocab.entity_count()},
                    {"relations", data.vocab.relation_count()},
                    {"train", data.train.size()}};
    j["config"] = config.to_map();
    write_json(j, (out_dir / "training_log.json").string(), out);
    out << "checkpoint written to " << (out_dir / "checkpoint").string() << '\n';
    return exit_code::ok;
}

struct EvalLpArgs {
    std::string checkpoint;
    std::string train;
    std::string valid;
    std::string test;
    std::string hits = "1,10";
    bool no_filter = false;
    bool no_raw = false;
    bool omit_timing = false;
    std::size_t workers = 1;
    double cutoff = default_category_cutoff;
    std::string out;
};

int cmd_eval_lp(const EvalLpArgs& a, std::ostream& out) {
    LinkPredictionOptions options;
    options.hits_at = parse_hits_list(a.hits);
    options.filter = !a.no_filter;
    options.raw = !a.no_raw;
    options.workers = a.workers;
    if (options.workers < 1) throw ConfigurationError("--workers must be >= 1");

    auto cp = load_checkpoint(a.checkpoint);
    auto test = load_against(a.test, cp.vocab, Split::test, false);
    if (test.empty()) throw ConfigurationError("test file has no triples: " + a.test);
    TripleSet train, valid;
    if (!a.train.empty()) train = load_against(a.train, cp.vocab, Split::train, false);
    if (!a.valid.empty()) valid = load_against(a.valid, cp.vocab, Split::valid, false);

    const auto known = build_filter_index(train, valid, test);
    std::optional<RelationStats> stats;
    if (!train.empty()) stats = compute_relation_stats(train, cp.vocab.relation_count(), a.cutoff);

    auto report = link_prediction_eval(test, cp.model, known, stats ? &*stats : nullptr, options);
    write_json(metrics_to_json(report, !a.omit_timing), a.out, out);
    return exit_code::ok;
}

int cmd_eval_tc(const std::string& checkpoint, const std::string& valid_path, const std::string& test_path,
                const std::string& out_path, std::ostream& out) {
    auto cp = load_checkpoint(checkpoint);
    auto valid = load_against(valid_path, cp.vocab, Split::valid, true);
    auto test = load_against(test_path, cp.vocab, Split::test, true);
    if (valid.empty()) throw ConfigurationError("validation file has no triples: " + valid_path);
    const auto thresholds = tune_thresholds(valid, cp.model);
    const auto report = classify(test, cp.model, thresholds);
    write_json(classification_to_json(thresholds, report, cp.vocab), out_path, out);
    return exit_code::ok;
}

int cmd_export_scores(const std::string& checkpoint, const std::string& triples_path, const std::string& out_path,
                      std::ostream& out) {
    auto cp = load_checkpoint(checkpoint);
    auto triples = load_against(triples_path, cp.vocab, Split::test, true);
    std::ofstream sink(out_path, std::ios::binary | std::ios::trunc);
    if (!sink) throw std::runtime_error("cannot write " + out_path);
    const auto rows = export_scores(triples, cp.vocab, cp.model, sink);
    out << rows << " rows written to " << out_path << '\n';
    return exit_code::ok;
}

int cmd_stats(const std::string& train_path, const std::string& valid_path, const std::string& test_path,
              double cutoff, bool as_json, std::ostream& out) {
    for (const auto* p : {&train_path, &valid_path, &test_path}) {
        if (!p->empty() && !fs::is_regular_file(*p)) throw ConfigurationError("dataset file does not exist: " + *p);
    }
    auto data = load_splits(train_path, valid_path, test_path);
    if (data.train.empty()) throw ConfigurationError("training file has no triples: " + train_path);
    const auto stats = compute_relation_stats(data.train, data.vocab.relation_count(), cutoff);
    const auto summary = summarize(data.vocab, data.train, data.valid, data.test, stats);
    if (as_json) {
        out << summary_to_json(summary, stats, data.vocab).dump(2) << '\n';
        return exit_code::ok;
    }
    std::ostringstream table;
    table << "#Rel     " << summary.relations << '\n'
          << "#Ent     " << summary.entities << '\n'
          << "#Train   " << summary.train << '\n'
          << "#Valid   " << summary.valid << '\n'
          << "#Test    " << summary.test << '\n'
          << "T/(E+R)  " << std::fixed << std::setprecision(4) << summary.illposedness << '\n'
          << "relations by category (cutoff " << std::setprecision(2) << cutoff << "):";
    for (auto c : all_categories) table << "  " << to_string(c) << " " << summary.category_counts[static_cast<int>(c)];
    table << '\n';
    out << table.str();
    return exit_code::ok;
}

}  // namespace

json metrics_to_json(const MetricsReport& report, bool include_timing) {
    json j;
    j["queries"] = report.overall.queries;
    j["hits"] = json::object();
    if (report.raw) j["hits"]["raw"] = hits_json(report.overall.raw_hits);
    if (report.filter) j["hits"]["filter"] = hits_json(report.overall.filter_hits);
    j["mean_rank"] = json::object();
    if (report.raw) j["mean_rank"]["raw"] = report.overall.raw_mean_rank;
    if (report.filter) j["mean_rank"]["filter"] = report.overall.filter_mean_rank;
    if (!report.by_category.empty()) {
        json cats = json::object();
        for (Direction d : {Direction::head, Direction::tail}) {
            json dir = json::object();
            for (auto c : all_categories) {
                auto it = report.by_category.find({d, c});
                if (it != report.by_category.end()) dir[std::string(to_string(c))] = group_json(it->second, report.raw, report.filter);
            }
            cats[std::string(to_string(d))] = dir;
        }
        j["by_category"] = cats;
        j["uncategorized_triples"] = report.uncategorized;
    }
    json unreported = json::array();
    if (report.raw && std::find(report.hits_at.begin(), report.hits_at.end(), 1) != report.hits_at.end()) {
        unreported.push_back("raw@1");
    }
    j["unreported"] = unreported;
    if (include_timing) j["wall_seconds"] = report.wall_seconds;
    return j;
}

json classification_to_json(const ThresholdTable& thresholds, const ClassificationReport& report,
                            const Vocabulary& vocab) {
    json j;
    j["accuracy"] = report.accuracy;
    j["test_triples"] = report.total;
    json th = json::object();
    th["global"] = thresholds.global;
    json per = json::object();
    for (index_t r = 0; r < vocab.relation_count(); ++r) {
        per[vocab.relation_name(r)] = {{"threshold", thresholds.threshold(r)},
                                       {"source", thresholds.has_own(r) ? "tuned" : "global"}};
    }
    th["per_relation"] = per;
    j["thresholds"] = th;
    json acc = json::object();
    for (const auto& [r, a] : report.per_relation) {
        acc[vocab.relation_name(r)] = {{"accuracy", a.accuracy()}, {"correct", a.correct}, {"total", a.total}};
    }
    j["per_relation"] = acc;
    return j;
}

json summary_to_json(const DatasetSummary& s, const RelationStats& stats, const Vocabulary& vocab) {
    json j;
    j["relations"] = s.relations;
    j["entities"] = s.entities;
    j["train"] = s.train;
    j["valid"] = s.valid;
    j["test"] = s.test;
    j["illposedness_ratio"] = s.illposedness;
    j["category_cutoff"] = stats.cutoff();
    json counts = json::object();
    for (auto c : all_categories) counts[std::string(to_string(c))] = s.category_counts[static_cast<int>(c)];
    j["category_counts"] = counts;
    json per = json::object();
    for (index_t r = 0; r < vocab.relation_count(); ++r) {
        if (const auto* rs = stats.find(r)) {
            per[vocab.relation_name(r)] = {{"triples", rs->triple_count},
                                           {"tph", rs->tph},
                                           {"hpt", rs->hpt},
                                           {"category", std::string(to_string(rs->category))}};
        }
    }
    j["per_relation"] = per;
    return j;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Manifold-based knowledge graph embedding: training and evaluation"};
    app.name(args.empty() ? "kge" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);

    std::string config_path;
    std::size_t log_every = 100;
    auto* train_cmd = app.add_subcommand("train", "Train a model from a key=value config file");
    train_cmd->add_option("--config,-c", config_path, "Run configuration")->required();
    train_cmd->add_option("--log-every", log_every, "Report progress every N epochs (0 = silent)");

    EvalLpArgs lp;
    auto* lp_cmd = app.add_subcommand("eval-lp", "Link prediction: HITS@N raw/filter with category breakdown");
    lp_cmd->add_option("--checkpoint", lp.checkpoint, "Checkpoint directory")->required();
    lp_cmd->add_option("--test", lp.test, "Test triples")->required();
    lp_cmd->add_option("--train", lp.train, "Training triples (filter setting and relation categories)");
    lp_cmd->add_option("--valid", lp.valid, "Validation triples (filter setting)");
    lp_cmd->add_option("--hits", lp.hits, "Comma-separated N values")->capture_default_str();
    lp_cmd->add_flag("--no-filter", lp.no_filter, "Skip the filter setting");
    lp_cmd->add_flag("--no-raw", lp.no_raw, "Skip the raw setting");
    lp_cmd->add_flag("--omit-timing", lp.omit_timing, "Leave wall-clock fields out of the report");
    lp_cmd->add_option("--workers", lp.workers, "Evaluation threads")->capture_default_str();
    lp_cmd->add_option("--cutoff", lp.cutoff, "Relation category cutoff")->capture_default_str();
    lp_cmd->add_option("--out,-o", lp.out, "Metrics JSON path (default stdout)");

    std::string tc_checkpoint, tc_valid, tc_test, tc_out;
    auto* tc_cmd = app.add_subcommand("eval-tc", "Triple classification with per-relation thresholds");
    tc_cmd->add_option("--checkpoint", tc_checkpoint, "Checkpoint directory")->required();
    tc_cmd->add_option("--valid", tc_valid, "Labeled validation triples")->required();
    tc_cmd->add_option("--test", tc_test, "Labeled test triples")->required();
    tc_cmd->add_option("--out,-o", tc_out, "Report JSON path (default stdout)");

    std::string ex_checkpoint, ex_triples, ex_out;
    auto* ex_cmd = app.add_subcommand("export-scores", "Write head,relation,tail,label,score CSV");
    ex_cmd->add_option("--checkpoint", ex_checkpoint, "Checkpoint directory")->required();
    ex_cmd->add_option("--triples", ex_triples, "Labeled triples")->required();
    ex_cmd->add_option("--out,-o", ex_out, "CSV path")->required();

    std::string st_train, st_valid, st_test;
    double st_cutoff = default_category_cutoff;
    bool st_json = false;
    auto* st_cmd = app.add_subcommand("stats", "Dataset statistics and the ill-posedness ratio");
    st_cmd->add_option("--train", st_train, "Training triples")->required();
    st_cmd->add_option("--valid", st_valid, "Validation triples");
    st_cmd->add_option("--test", st_test, "Test triples");
    st_cmd->add_option("--cutoff", st_cutoff, "Relation category cutoff")->capture_default_str();
    st_cmd->add_flag("--json", st_json, "Emit JSON");

    std::vector<const char*> argv;
    const std::string fallback_name = "kge";
    if (args.empty()) argv.push_back(fallback_name.c_str());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_code::ok : exit_code::invalid_input;
    }

    if (*train_cmd) return guarded(err, [&] { return cmd_train(config_path, log_every, out, err); });
    if (*lp_cmd) return guarded(err, [&] { return cmd_eval_lp(lp, out); });
    if (*tc_cmd) return guarded(err, [&] { return cmd_eval_tc(tc_checkpoint, tc_valid, tc_test, tc_out, out); });
    if (*ex_cmd) return guarded(err, [&] { return cmd_export_scores(ex_checkpoint, ex_triples, ex_out, out); });
    if (*st_cmd) {
        return guarded(err, [&] {
            if (!(st_cutoff > 0.0)) throw ConfigurationError("--cutoff must be positive");
            return cmd_stats(st_train, st_valid, st_test, st_cutoff, st_json, out);
        });
    }
    return exit_code::invalid_input;
}

}  // namespace kge
