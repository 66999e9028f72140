#include "kge/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "kge/text.hpp"

namespace kge {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// A cut strictly outside the score range, at least one unit away.
double beyond(double extreme, double direction) {
    return extreme + direction * std::max(1.0, std::abs(extreme));
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::head ? "head" : "tail"; }

RankResult rank_entity(const Triple& query, Direction direction, const EmbeddingModel& model, const FilterIndex& known) {
    RankResult result;
    result.query = query;
    result.direction = direction;

    const double gold = score(query, model);
    const index_t gold_entity = direction == Direction::head ? query.head : query.tail;
    std::size_t raw_ahead = 0;
    std::size_t filtered_ahead = 0;
    Triple candidate = query;
    for (index_t e = 0; e < model.entity_count(); ++e) {
        if (e == gold_entity) continue;
        (direction == Direction::head ? candidate.head : candidate.tail) = e;
        if (!(score(candidate, model) <= gold)) continue;
        ++raw_ahead;
        if (!known.contains(candidate)) ++filtered_ahead;
    }
    result.raw_rank = raw_ahead + 1;
    result.filtered_rank = filtered_ahead + 1;
    return result;
}

GroupMetrics aggregate(std::span<const RankResult> ranks, std::span<const std::size_t> hits_at) {
    GroupMetrics g;
    g.queries = ranks.size();
    for (std::size_t n : hits_at) {
        g.raw_hits[n] = 0.0;
        g.filter_hits[n] = 0.0;
    }
    if (ranks.empty()) return g;
    double raw_sum = 0.0;
    double filter_sum = 0.0;
    for (const auto& r : ranks) {
        raw_sum += static_cast<double>(r.raw_rank);
        filter_sum += static_cast<double>(r.filtered_rank);
        for (std::size_t n : hits_at) {
            if (r.raw_rank <= n) g.raw_hits[n] += 1.0;
            if (r.filtered_rank <= n) g.filter_hits[n] += 1.0;
        }
    }
    const double q = static_cast<double>(ranks.size());
    for (auto& [n, v] : g.raw_hits) v /= q;
    for (auto& [n, v] : g.filter_hits) v /= q;
    g.raw_mean_rank = raw_sum / q;
    g.filter_mean_rank = filter_sum / q;
    return g;
}

MetricsReport link_prediction_eval(const TripleSet& test, const EmbeddingModel& model, const FilterIndex& known,
                                   const RelationStats* stats, const LinkPredictionOptions& options) {
    if (test.empty()) throw std::invalid_argument("link prediction needs a nonempty test set");
    const auto start = std::chrono::steady_clock::now();

    MetricsReport report;
    report.hits_at = options.hits_at;
    std::sort(report.hits_at.begin(), report.hits_at.end());
    report.hits_at.erase(std::unique(report.hits_at.begin(), report.hits_at.end()), report.hits_at.end());
    report.raw = options.raw;
    report.filter = options.filter;

    static const FilterIndex empty;
    const FilterIndex& filter = options.filter ? known : empty;

    report.ranks.resize(2 * test.size());
    parallel_for(report.ranks.size(), options.workers, [&](std::size_t i) {
        const Direction dir = (i % 2 == 0) ? Direction::head : Direction::tail;
        report.ranks[i] = rank_entity(test.triples[i / 2], dir, model, filter);
    });

    report.overall = aggregate(report.ranks, report.hits_at);

    if (stats != nullptr) {
        std::map<std::pair<Direction, RelationCategory>, std::vector<RankResult>> groups;
        for (const auto& r : report.ranks) {
            const auto* rs = stats->find(r.query.relation);
            if (rs == nullptr) {
                if (r.direction == Direction::head) ++report.uncategorized;
                continue;
            }
            groups[{r.direction, rs->category}].push_back(r);
        }
        for (Direction d : {Direction::head, Direction::tail}) {
            for (auto c : {RelationCategory::one_to_one, RelationCategory::one_to_many, RelationCategory::many_to_one,
                           RelationCategory::many_to_many}) {
                report.by_category[{d, c}] = aggregate(groups[{d, c}], report.hits_at);
            }
        }
    }

    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

ThresholdChoice best_threshold(std::vector<LabeledScore> samples) {
    if (samples.empty()) throw std::invalid_argument("threshold tuning needs at least one sample");
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.score < b.score; });

    const std::size_t n = samples.size();
    std::size_t negatives = 0;
    for (const auto& s : samples) negatives += s.positive ? 0 : 1;

    // Threshold below every score: everything predicted negative.
    std::size_t correct = negatives;
    ThresholdChoice best{beyond(samples.front().score, -1.0), static_cast<double>(correct) / static_cast<double>(n)};
    std::size_t best_correct = correct;

    std::size_t i = 0;
    while (i < n) {
        // Move the threshold past the whole group of equal scores starting at i.
        std::size_t j = i;
        while (j < n && samples[j].score == samples[i].score) {
            correct += samples[j].positive ? 1 : 0;
            correct -= samples[j].positive ? 0 : 1;
            ++j;
        }
        double cut = beyond(samples[i].score, 1.0);
        if (j < n) {
            cut = 0.5 * samples[i].score + 0.5 * samples[j].score;
            if (!(cut > samples[i].score)) cut = samples[j].score;
        }
        if (correct > best_correct) {
            best_correct = correct;
            best = {cut, static_cast<double>(correct) / static_cast<double>(n)};
        }
        i = j;
    }
    return best;
}

ThresholdTable tune_thresholds(const TripleSet& valid, const EmbeddingModel& model) {
    if (valid.empty()) throw std::invalid_argument("threshold tuning needs a nonempty validation set");
    if (!valid.labeled()) throw std::invalid_argument("threshold tuning needs a labeled validation set");

    std::vector<std::vector<LabeledScore>> by_relation(model.relation_count());
    std::vector<LabeledScore> pooled;
    pooled.reserve(valid.size());
    for (std::size_t i = 0; i < valid.size(); ++i) {
        const auto& t = valid.triples[i];
        LabeledScore s{score(t, model), (*valid.labels)[i]};
        by_relation.at(t.relation).push_back(s);
        pooled.push_back(s);
    }

    ThresholdTable table;
    table.per_relation.resize(model.relation_count());
    table.global = best_threshold(pooled).threshold;
    for (std::size_t r = 0; r < by_relation.size(); ++r) {
        const auto& samples = by_relation[r];
        const bool has_pos = std::any_of(samples.begin(), samples.end(), [](const auto& s) { return s.positive; });
        const bool has_neg = std::any_of(samples.begin(), samples.end(), [](const auto& s) { return !s.positive; });
        if (has_pos && has_neg) table.per_relation[r] = best_threshold(samples).threshold;
    }
    return table;
}

ClassificationReport classify(const TripleSet& test, const EmbeddingModel& model, const ThresholdTable& thresholds) {
    if (!test.labeled()) throw std::invalid_argument("classification needs a labeled test set");
    ClassificationReport report;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& t = test.triples[i];
        const bool predicted = score(t, model) < thresholds.threshold(t.relation);
        const bool ok = predicted == (*test.labels)[i];
        auto& rel = report.per_relation[t.relation];
        ++rel.total;
        if (ok) {
            ++rel.correct;
            ++correct;
        }
    }
    report.total = test.size();
    report.accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
    return report;
}

std::size_t export_scores(const TripleSet& triples, const Vocabulary& vocab, const EmbeddingModel& model,
                          std::ostream& sink) {
    if (!triples.labeled()) throw std::invalid_argument("score export needs a labeled triple set");
    sink << "head,relation,tail,label,score\n";
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& t = triples.triples[i];
        sink << csv_field(vocab.entity_name(t.head)) << ',' << csv_field(vocab.relation_name(t.relation)) << ','
             << csv_field(vocab.entity_name(t.tail)) << ',' << ((*triples.labels)[i] ? "1" : "-1") << ','
             << format_double(score(t, model)) << '\n';
    }
    sink.flush();
    if (!sink) throw std::runtime_error("failed writing score export");
    return triples.size();
}

}  // namespace kge
