#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "kge/core.hpp"
#include "kge/scoring.hpp"

namespace kge {

enum class Direction { head, tail };

std::string_view to_string(Direction d);

struct RankResult {
    Triple query;
    Direction direction = Direction::tail;
    std::size_t raw_rank = 1;
    std::size_t filtered_rank = 1;
};

// Replaces the head (or tail) with every entity. Ties count against the gold triple. The filtered rank
// skips corruptions present in `known`; the gold triple itself is never skipped.
RankResult rank_entity(const Triple& query, Direction direction, const EmbeddingModel& model, const FilterIndex& known);

struct GroupMetrics {
    std::size_t queries = 0;
    std::map<std::size_t, double> raw_hits;
    std::map<std::size_t, double> filter_hits;
    double raw_mean_rank = 0.0;
    double filter_mean_rank = 0.0;
};

struct LinkPredictionOptions {
    std::vector<std::size_t> hits_at = {1, 10};
    bool raw = true;
    bool filter = true;
    std::size_t workers = 1;
};

struct MetricsReport {
    std::vector<std::size_t> hits_at;
    bool raw = true;
    bool filter = true;
    GroupMetrics overall;
    std::map<std::pair<Direction, RelationCategory>, GroupMetrics> by_category;
    // Test queries whose relation has no training statistics; counted overall only.
    std::size_t uncategorized = 0;
    double wall_seconds = 0.0;
    std::vector<RankResult> ranks;  // head then tail query per test triple, in test order
};

// HITS@N and mean rank over precomputed ranks.
GroupMetrics aggregate(std::span<const RankResult> ranks, std::span<const std::size_t> hits_at);

MetricsReport link_prediction_eval(const TripleSet& test, const EmbeddingModel& model, const FilterIndex& known,
                                   const RelationStats* stats, const LinkPredictionOptions& options = {});

struct LabeledScore {
    double score = 0.0;
    bool positive = false;
};

struct ThresholdChoice {
    double threshold = 0.0;
    double accuracy = 0.0;
};

// Threshold maximizing accuracy of (score < threshold -> positive), taken at a midpoint between
// consecutive distinct scores or max(1, |score|) beyond the extremes; ties go to the smaller threshold.
ThresholdChoice best_threshold(std::vector<LabeledScore> samples);

struct ThresholdTable {
    std::vector<std::optional<double>> per_relation;
    double global = 0.0;

    double threshold(index_t relation) const {
        if (relation < per_relation.size() && per_relation[relation]) return *per_relation[relation];
        return global;
    }
    bool has_own(index_t relation) const { return relation < per_relation.size() && per_relation[relation]; }
};

ThresholdTable tune_thresholds(const TripleSet& valid, const EmbeddingModel& model);

struct RelationAccuracy {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct ClassificationReport {
    double accuracy = 0.0;
    std::size_t total = 0;
    std::map<index_t, RelationAccuracy> per_relation;
};

ClassificationReport classify(const TripleSet& test, const EmbeddingModel& model, const ThresholdTable& thresholds);

// CSV with header head,relation,tail,label,score; returns data rows written.
std::size_t export_scores(const TripleSet& triples, const Vocabulary& vocab, const EmbeddingModel& model,
                          std::ostream& sink);

}  // namespace kge
