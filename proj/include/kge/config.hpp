#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "kge/core.hpp"
#include "kge/training.hpp"

namespace kge {

// Flat key=value run configuration. Recognized keys:
//   dataset.train dataset.valid dataset.test
//   model.manifold (sphere|hyperplane) model.kernel (linear|gaussian:s|poly:p:c) model.dim
//   model.absolute model.baseline
//   train.lr train.margin train.epochs train.seed train.neg_sampling (bern|unif) train.workers
//   train.batch train.project
//   eval.hits (comma list) eval.raw eval.filter eval.workers
//   stats.cutoff
//   output.dir
struct RunConfig {
    std::string train_path;
    std::string valid_path;
    std::string test_path;

    TrainConfig train;

    std::vector<std::size_t> hits_at = {1, 10};
    bool eval_raw = true;
    bool eval_filter = true;
    std::size_t eval_workers = 1;
    double category_cutoff = default_category_cutoff;

    std::string output_dir = "run";

    // Echo with every key present; parse_config_map(to_map()) == *this.
    std::map<std::string, std::string> to_map() const;

    // Numeric constraints only; path existence is checked by check_paths.
    void validate() const;
    void check_paths() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config_map(const std::map<std::string, std::string>& values);
RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);

std::vector<std::size_t> parse_hits_list(const std::string& text);

}  // namespace kge
