#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kge/core.hpp"
#include "kge/scoring.hpp"

namespace kge {

enum class SamplingMode { bern, unif };

std::string_view to_string(SamplingMode m);

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t dim = 100;
    double margin = 3.0;
    std::size_t epochs = 2000;
    ManifoldSpec manifold;
    bool transe_baseline = false;
    SamplingMode sampling = SamplingMode::bern;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    std::size_t batch_size = 1;
    // Rescale entity vectors to norm <= 1 after each batch.
    bool project_entities = true;

    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// On for sphere and TransE, off for hyperplane.
bool default_projection(const ManifoldSpec& manifold, bool transe_baseline);

class TrainingError : public std::runtime_error {
public:
    TrainingError(std::size_t epoch, std::size_t triple_index, const std::string& what)
        : std::runtime_error("epoch " + std::to_string(epoch) + ", triple " + std::to_string(triple_index) + ": " +
                             what),
          epoch_(epoch),
          triple_index_(triple_index) {}
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t triple_index() const noexcept { return triple_index_; }

private:
    std::size_t epoch_;
    std::size_t triple_index_;
};

class NegativeSampler {
public:
    static constexpr int max_attempts = 100;

    NegativeSampler(const RelationStats& stats, std::size_t relation_count, std::size_t entity_count,
                    SamplingMode mode, std::uint64_t seed);

    // Probability of corrupting the head for this relation.
    double head_probability(index_t relation) const { return head_prob_.at(relation); }

    // Replaces exactly one of head/tail with a different uniformly drawn entity, resampling while the
    // candidate is a known (training) triple. Gives up after max_attempts and counts a warning.
    Triple sample(const Triple& positive, const FilterIndex& known);

    std::size_t warnings() const noexcept { return warnings_; }
    void reseed(std::uint64_t seed) { rng_.seed(seed); }

private:
    std::vector<double> head_prob_;
    std::size_t entity_count_;
    std::mt19937_64 rng_;
    std::size_t warnings_ = 0;
};

inline Triple sample_negative(const Triple& positive, NegativeSampler& sampler, const FilterIndex& known) {
    return sampler.sample(positive, known);
}

// max(0, margin + pos - neg): scores are distances, so the positive should sit lower by the margin.
inline double hinge_loss(double pos_score, double neg_score, double margin) {
    const double v = margin + pos_score - neg_score;
    return v > 0.0 ? v : 0.0;
}

// Bound of the uniform initializer for dimension d: sqrt(6 / (2d)).
double init_bound(std::size_t dim);

EmbeddingModel init_model(std::size_t entity_count, std::size_t relation_count, const TrainConfig& config);
inline EmbeddingModel init_model(const Vocabulary& vocab, const TrainConfig& config) {
    return init_model(vocab.entity_count(), vocab.relation_count(), config);
}

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double seconds = 0.0;
    std::size_t violations = 0;  // pairs with positive loss
};

struct TrainingLog {
    std::vector<EpochLog> epochs;
    std::size_t sampler_warnings = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains in place. `known` is the membership structure negatives are checked against (the training
// split). workers > 1 runs lock-free over shared parameters and is not bitwise reproducible.
TrainingLog train(EmbeddingModel& model, const TripleSet& data, const RelationStats& stats, const FilterIndex& known,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Rescales rows with L2 norm > 1 to unit norm.
void project_to_unit_ball(Matrix& m);

}  // namespace kge
