#include "kge/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace kge {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

constexpr std::uint64_t shuffle_stream = 0xffffffffULL;
constexpr std::uint64_t init_stream = 0xfffffffeULL;

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void project_row(std::span<double> row) {
    double n2 = 0.0;
    for (double x : row) n2 += x * x;
    if (n2 <= 1.0 + 1e-12) return;
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : row) x *= inv;
}

void step(std::span<double> params, std::span<const double> grad, double scale) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= scale * grad[i];
}

struct WorkerResult {
    double loss_sum = 0.0;
    std::size_t violations = 0;
    std::exception_ptr error;
};

class Worker {
public:
    Worker(EmbeddingModel& model, const TripleSet& data, const FilterIndex& known, const TrainConfig& config,
           NegativeSampler& sampler)
        : model_(model), data_(data), known_(known), config_(config), sampler_(sampler) {}

    void run(std::size_t epoch, std::span<const std::size_t> order, WorkerResult& result) {
        try {
            std::size_t in_batch = 0;
            for (std::size_t idx : order) {
                process(epoch, idx, result);
                if (++in_batch == config_.batch_size) {
                    flush_projection();
                    in_batch = 0;
                }
            }
            flush_projection();
        } catch (...) {
            result.error = std::current_exception();
        }
    }

private:
    void process(std::size_t epoch, std::size_t idx, WorkerResult& result) {
        const Triple& pos = data_.triples[idx];
        const Triple neg = sampler_.sample(pos, known_);

        const double pos_score = score(pos, model_);
        const double neg_score = score(neg, model_);
        const double loss = hinge_loss(pos_score, neg_score, config_.margin);
        if (!std::isfinite(loss)) throw TrainingError(epoch, idx, "non-finite loss");
        result.loss_sum += loss;
        if (loss <= 0.0) return;
        ++result.violations;

        // Both gradients are taken at the same parameter state before either step is applied.
        score_gradients(pos, model_, pos_grad_);
        score_gradients(neg, model_, neg_grad_);
        apply(pos, pos_grad_, config_.learning_rate);
        apply(neg, neg_grad_, -config_.learning_rate);

        if (!finite_rows(pos) || !finite_rows(neg)) throw TrainingError(epoch, idx, "non-finite parameter");
        if (config_.project_entities) {
            touched_.push_back(pos.head);
            touched_.push_back(pos.tail);
            touched_.push_back(neg.head);
            touched_.push_back(neg.tail);
        }
    }

    void apply(const Triple& t, const GradientBundle& g, double scale) {
        step(model_.entities.row(t.head), g.head, scale);
        step(model_.entities.row(t.tail), g.tail, scale);
        step(model_.relations.row(t.relation), g.relation, scale);
        if (model_.uses_tail_relations()) step(model_.relations_tail.row(t.relation), g.relation_tail, scale);
        if (!model_.transe_baseline) model_.manifold_params[t.relation] -= scale * g.manifold_param;
    }

    bool finite_rows(const Triple& t) const {
        if (!all_finite(model_.entities.row(t.head)) || !all_finite(model_.entities.row(t.tail)) ||
            !all_finite(model_.relations.row(t.relation))) {
            return false;
        }
        if (model_.uses_tail_relations() && !all_finite(model_.relations_tail.row(t.relation))) return false;
        return std::isfinite(model_.manifold_params[t.relation]);
    }

    void flush_projection() {
        for (index_t e : touched_) project_row(model_.entities.row(e));
        touched_.clear();
    }

    EmbeddingModel& model_;
    const TripleSet& data_;
    const FilterIndex& known_;
    const TrainConfig& config_;
    NegativeSampler& sampler_;
    GradientBundle pos_grad_;
    GradientBundle neg_grad_;
    std::vector<index_t> touched_;
};

}  // namespace

std::string_view to_string(SamplingMode m) { return m == SamplingMode::bern ? "bern" : "unif"; }

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigurationError("learning rate must be a finite non-negative number");
    }
    if (dim < 1) throw ConfigurationError("dimension must be >= 1");
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigurationError("margin must be positive");
    if (workers < 1) throw ConfigurationError("workers must be >= 1");
    if (batch_size < 1) throw ConfigurationError("batch size must be >= 1");
    manifold.validate();
}

bool default_projection(const ManifoldSpec& manifold, bool transe_baseline) {
    return transe_baseline || manifold.kind == ManifoldKind::sphere;
}

NegativeSampler::NegativeSampler(const RelationStats& stats, std::size_t relation_count, std::size_t entity_count,
                                 SamplingMode mode, std::uint64_t seed)
    : head_prob_(relation_count, 0.5), entity_count_(entity_count), rng_(seed) {
    if (entity_count < 2) throw std::invalid_argument("negative sampling needs at least two entities");
    if (mode == SamplingMode::bern) {
        for (index_t r = 0; r < relation_count; ++r) {
            if (const auto* s = stats.find(r)) head_prob_[r] = s->tph / (s->tph + s->hpt);
        }
    }
}

Triple NegativeSampler::sample(const Triple& positive, const FilterIndex& known) {
    std::bernoulli_distribution corrupt_head(head_prob_.at(positive.relation));
    std::uniform_int_distribution<index_t> other(0, static_cast<index_t>(entity_count_ - 2));
    Triple candidate = positive;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        candidate = positive;
        const bool head = corrupt_head(rng_);
        const index_t original = head ? positive.head : positive.tail;
        index_t e = other(rng_);
        if (e >= original) ++e;
        (head ? candidate.head : candidate.tail) = e;
        if (!known.contains(candidate)) return candidate;
    }
    ++warnings_;
    return candidate;
}

double init_bound(std::size_t dim) { return std::sqrt(6.0 / (2.0 * static_cast<double>(dim))); }

EmbeddingModel init_model(std::size_t entity_count, std::size_t relation_count, const TrainConfig& config) {
    config.validate();
    auto model =
        EmbeddingModel::allocate(entity_count, relation_count, config.dim, config.manifold, config.transe_baseline);
    const double bound = init_bound(config.dim);
    std::mt19937_64 rng(derive_seed(config.seed, init_stream));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : model.entities.values()) x = dist(rng);
    for (double& x : model.relations.values()) x = dist(rng);
    for (double& x : model.relations_tail.values()) x = dist(rng);
    if (config.project_entities) project_to_unit_ball(model.entities);
    return model;
}

void project_to_unit_ball(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) project_row(m.row(i));
}

TrainingLog train(EmbeddingModel& model, const TripleSet& data, const RelationStats& stats, const FilterIndex& known,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (data.empty()) throw std::invalid_argument("training set is empty");
    if (model.entities.cols() != model.dim || model.relations.cols() != model.dim ||
        model.manifold_params.size() != model.relation_count()) {
        throw std::invalid_argument("model parameter shapes are inconsistent");
    }
    for (const auto& t : data.triples) {
        if (t.head >= model.entity_count() || t.tail >= model.entity_count() || t.relation >= model.relation_count()) {
            throw std::out_of_range("training triple outside model vocabulary");
        }
    }
    if (config.project_entities) project_to_unit_ball(model.entities);

    const std::size_t workers = std::min(config.workers, data.size());
    std::vector<NegativeSampler> samplers;
    samplers.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        samplers.emplace_back(stats, model.relation_count(), model.entity_count(), config.sampling,
                              derive_seed(config.seed, w));
    }
    std::vector<Worker> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(model, data, known, config, samplers[w]);

    std::mt19937_64 shuffle_rng(derive_seed(config.seed, shuffle_stream));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainingLog log;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        std::vector<WorkerResult> results(workers);
        const std::size_t chunk = (order.size() + workers - 1) / workers;
        auto slice = [&](std::size_t w) {
            const std::size_t b = std::min(order.size(), w * chunk);
            const std::size_t e = std::min(order.size(), b + chunk);
            return std::span<const std::size_t>(order).subspan(b, e - b);
        };
        if (workers == 1) {
            pool[0].run(epoch, slice(0), results[0]);
        } else {
            std::vector<std::jthread> threads;
            threads.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) {
                threads.emplace_back([&, w] { pool[w].run(epoch, slice(w), results[w]); });
            }
        }

        EpochLog entry;
        entry.epoch = epoch;
        double loss_sum = 0.0;
        for (const auto& r : results) {
            if (r.error) std::rethrow_exception(r.error);
            loss_sum += r.loss_sum;
            entry.violations += r.violations;
        }
        entry.mean_loss = loss_sum / static_cast<double>(data.size());
        entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.epochs.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    for (const auto& s : samplers) log.sampler_warnings += s.warnings();
    return log;
}

}  // namespace kge
