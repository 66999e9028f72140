#include "kge/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "kge/text.hpp"

namespace kge {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "dataset.train", "dataset.valid", "dataset.test",   "model.manifold", "model.kernel",
        "model.dim",     "model.absolute", "model.baseline", "train.lr",       "train.margin",
        "train.epochs",  "train.seed",    "train.neg_sampling", "train.workers", "train.batch",
        "train.project", "eval.hits",     "eval.raw",       "eval.filter",    "eval.workers",
        "stats.cutoff",  "output.dir",
    };
    return keys;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

class Reader {
public:
    explicit Reader(const std::map<std::string, std::string>& values) : values_(values) {}

    const std::string* get(const std::string& key) const {
        auto it = values_.find(key);
        return it == values_.end() ? nullptr : &it->second;
    }

    std::string text(const std::string& key, std::string fallback) const {
        const auto* v = get(key);
        return v ? *v : fallback;
    }

    double real(const std::string& key, double fallback) const {
        const auto* v = get(key);
        if (!v) return fallback;
        if (auto d = parse_double(*v)) return *d;
        throw ConfigurationError(key + ": expected a number, got '" + *v + "'");
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        const auto* v = get(key);
        if (!v) return fallback;
        if (auto n = parse_uint(*v)) return *n;
        throw ConfigurationError(key + ": expected a non-negative integer, got '" + *v + "'");
    }

    bool flag(const std::string& key, bool fallback) const {
        const auto* v = get(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1") return true;
        if (*v == "false" || *v == "0") return false;
        throw ConfigurationError(key + ": expected true or false, got '" + *v + "'");
    }

private:
    const std::map<std::string, std::string>& values_;
};

}  // namespace

std::vector<std::size_t> parse_hits_list(const std::string& text) {
    std::vector<std::size_t> out;
    for (auto part : split(text, ',')) {
        auto n = parse_int(trim(part));
        if (!n || *n < 1) throw ConfigurationError("hits list entries must be positive integers: '" + text + "'");
        out.push_back(static_cast<std::size_t>(*n));
    }
    return out;
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> m;
    m["dataset.train"] = train_path;
    m["dataset.valid"] = valid_path;
    m["dataset.test"] = test_path;
    m["model.manifold"] = std::string(to_string(train.manifold.kind));
    m["model.kernel"] = to_string(train.manifold.kernel);
    m["model.dim"] = std::to_string(train.dim);
    m["model.absolute"] = bool_text(train.manifold.absolute);
    m["model.baseline"] = bool_text(train.transe_baseline);
    m["train.lr"] = format_double(train.learning_rate);
    m["train.margin"] = format_double(train.margin);
    m["train.epochs"] = std::to_string(train.epochs);
    m["train.seed"] = std::to_string(train.seed);
    m["train.neg_sampling"] = std::string(to_string(train.sampling));
    m["train.workers"] = std::to_string(train.workers);
    m["train.batch"] = std::to_string(train.batch_size);
    m["train.project"] = bool_text(train.project_entities);
    std::string hits;
    for (std::size_t i = 0; i < hits_at.size(); ++i) hits += (i ? "," : "") + std::to_string(hits_at[i]);
    m["eval.hits"] = hits;
    m["eval.raw"] = bool_text(eval_raw);
    m["eval.filter"] = bool_text(eval_filter);
    m["eval.workers"] = std::to_string(eval_workers);
    m["stats.cutoff"] = format_double(category_cutoff);
    m["output.dir"] = output_dir;
    return m;
}

void RunConfig::validate() const {
    if (train_path.empty()) throw ConfigurationError("dataset.train is required");
    train.validate();
    if (hits_at.empty()) throw ConfigurationError("eval.hits must list at least one N");
    if (eval_workers < 1) throw ConfigurationError("eval.workers must be >= 1");
    if (!(category_cutoff > 0.0)) throw ConfigurationError("stats.cutoff must be positive");
    if (output_dir.empty()) throw ConfigurationError("output.dir must not be empty");
}

void RunConfig::check_paths() const {
    for (const auto* p : {&train_path, &valid_path, &test_path}) {
        if (!p->empty() && !std::filesystem::is_regular_file(*p)) {
            throw ConfigurationError("dataset file does not exist: " + *p);
        }
    }
}

RunConfig parse_config_map(const std::map<std::string, std::string>& values) {
    for (const auto& [k, v] : values) {
        if (!known_keys().contains(k)) throw ConfigurationError("unknown config key '" + k + "'");
    }
    Reader in(values);
    RunConfig c;
    c.train_path = in.text("dataset.train", "");
    c.valid_path = in.text("dataset.valid", "");
    c.test_path = in.text("dataset.test", "");

    const auto manifold = in.text("model.manifold", "sphere");
    if (manifold == "sphere") {
        c.train.manifold.kind = ManifoldKind::sphere;
    } else if (manifold == "hyperplane") {
        c.train.manifold.kind = ManifoldKind::hyperplane;
    } else {
        throw ConfigurationError("model.manifold: expected sphere or hyperplane, got '" + manifold + "'");
    }
    c.train.manifold.kernel = parse_kernel(in.text("model.kernel", "linear"));
    c.train.manifold.absolute = in.flag("model.absolute", false);
    c.train.transe_baseline = in.flag("model.baseline", false);
    c.train.dim = in.count("model.dim", c.train.dim);

    c.train.learning_rate = in.real("train.lr", c.train.learning_rate);
    c.train.margin = in.real("train.margin", c.train.margin);
    c.train.epochs = in.count("train.epochs", c.train.epochs);
    c.train.seed = in.count("train.seed", c.train.seed);
    const auto sampling = in.text("train.neg_sampling", "bern");
    if (sampling == "bern") {
        c.train.sampling = SamplingMode::bern;
    } else if (sampling == "unif") {
        c.train.sampling = SamplingMode::unif;
    } else {
        throw ConfigurationError("train.neg_sampling: expected bern or unif, got '" + sampling + "'");
    }
    c.train.workers = in.count("train.workers", c.train.workers);
    c.train.batch_size = in.count("train.batch", c.train.batch_size);
    c.train.project_entities =
        in.flag("train.project", default_projection(c.train.manifold, c.train.transe_baseline));

    if (const auto* h = in.get("eval.hits")) c.hits_at = parse_hits_list(*h);
    c.eval_raw = in.flag("eval.raw", c.eval_raw);
    c.eval_filter = in.flag("eval.filter", c.eval_filter);
    c.eval_workers = in.count("eval.workers", c.eval_workers);
    c.category_cutoff = in.real("stats.cutoff", c.category_cutoff);
    c.output_dir = in.text("output.dir", c.output_dir);

    c.validate();
    return c;
}

RunConfig parse_config(std::istream& in) {
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigurationError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        std::string key(trim(view.substr(0, eq)));
        std::string value(trim(view.substr(eq + 1)));
        if (key.empty()) throw ConfigurationError("config line " + std::to_string(line_no) + ": empty key");
        if (!values.emplace(key, value).second) {
            throw ConfigurationError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    return parse_config_map(values);
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open config file: " + path);
    return parse_config(in);
}

}  // namespace kge
