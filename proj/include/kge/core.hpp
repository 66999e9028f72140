#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kge {

using index_t = std::uint32_t;

struct Triple {
    index_t head = 0;
    index_t relation = 0;
    index_t tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t k = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
        k ^= static_cast<std::uint64_t>(t.relation) * 0x9e3779b97f4a7c15ULL;
        k ^= k >> 29;
        k *= 0xbf58476d1ce4e5b9ULL;
        k ^= k >> 32;
        return static_cast<std::size_t>(k);
    }
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& detail, const std::string& source = {})
        : std::runtime_error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " + detail),
          line_(line),
          detail_(detail) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

class UnknownNameError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownRelationError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Dense, insertion-ordered name <-> index maps for entities and relations.
class Vocabulary {
public:
    index_t add_entity(std::string_view name);
    index_t add_relation(std::string_view name);

    std::optional<index_t> find_entity(std::string_view name) const;
    std::optional<index_t> find_relation(std::string_view name) const;

    const std::string& entity_name(index_t i) const { return entities_.at(i); }
    const std::string& relation_name(index_t i) const { return relations_.at(i); }

    std::size_t entity_count() const noexcept { return entities_.size(); }
    std::size_t relation_count() const noexcept { return relations_.size(); }

    const std::vector<std::string>& entities() const noexcept { return entities_; }
    const std::vector<std::string>& relations() const noexcept { return relations_; }

    static Vocabulary from_names(std::vector<std::string> entities, std::vector<std::string> relations);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.entities_ == b.entities_ && a.relations_ == b.relations_;
    }

private:
    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, index_t> entity_index_;
    std::unordered_map<std::string, index_t> relation_index_;
};

enum class Split { train, valid, test };

std::string_view to_string(Split s);

struct TripleSet {
    std::vector<Triple> triples;
    Split split = Split::train;
    // Present only for labeled (classification) files; same length as triples.
    std::optional<std::vector<bool>> labels;

    std::size_t size() const noexcept { return triples.size(); }
    bool empty() const noexcept { return triples.empty(); }
    bool labeled() const noexcept { return labels.has_value(); }
};

enum class VocabPolicy {
    extend,  // unseen names are appended
    frozen,  // unseen names raise UnknownNameError
};

struct LoadOptions {
    Split split = Split::train;
    bool labeled = false;
    VocabPolicy policy = VocabPolicy::extend;
};

// One triple per nonempty line: head TAB relation TAB tail [TAB label], label in {1, -1}.
TripleSet load_triples(std::istream& in, Vocabulary& vocab, const LoadOptions& options);
TripleSet load_triples_file(const std::string& path, Vocabulary& vocab, const LoadOptions& options);

enum class RelationCategory { one_to_one, one_to_many, many_to_one, many_to_many };

std::string_view to_string(RelationCategory c);
RelationCategory categorize(double tph, double hpt, double cutoff);

struct RelationStat {
    std::size_t triple_count = 0;
    double tph = 0.0;  // triples / distinct heads
    double hpt = 0.0;  // triples / distinct tails
    RelationCategory category = RelationCategory::one_to_one;
};

class RelationStats {
public:
    RelationStats() = default;
    RelationStats(std::vector<std::optional<RelationStat>> per_relation, double cutoff)
        : per_relation_(std::move(per_relation)), cutoff_(cutoff) {}

    // Throws UnknownRelationError for relations without training triples.
    const RelationStat& at(index_t relation) const;
    const RelationStat* find(index_t relation) const;

    std::size_t relation_count() const noexcept { return per_relation_.size(); }
    double cutoff() const noexcept { return cutoff_; }

private:
    std::vector<std::optional<RelationStat>> per_relation_;
    double cutoff_ = 1.5;
};

inline constexpr double default_category_cutoff = 1.5;

// relation_count sizes the table; relations without triples are left out.
RelationStats compute_relation_stats(const TripleSet& train, std::size_t relation_count,
                                     double cutoff = default_category_cutoff);

class FilterIndex {
public:
    FilterIndex() = default;
    explicit FilterIndex(std::span<const TripleSet* const> splits);

    bool contains(const Triple& t) const { return members_.contains(t); }
    std::size_t size() const noexcept { return members_.size(); }

    // Sorted, duplicate-free.
    std::span<const index_t> tails(index_t head, index_t relation) const;
    std::span<const index_t> heads(index_t relation, index_t tail) const;

private:
    static std::uint64_t key(index_t a, index_t b) noexcept {
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    std::unordered_set<Triple, TripleHash> members_;
    std::unordered_map<std::uint64_t, std::vector<index_t>> tails_;
    std::unordered_map<std::uint64_t, std::vector<index_t>> heads_;
};

FilterIndex build_filter_index(const TripleSet& train, const TripleSet& valid, const TripleSet& test);

// Triples per free-parameter row, T / (E + R). Throws std::domain_error when E + R = 0.
double illposedness_ratio(std::size_t triples, std::size_t entities, std::size_t relations);

struct DatasetSummary {
    std::size_t entities = 0;
    std::size_t relations = 0;
    std::size_t train = 0;
    std::size_t valid = 0;
    std::size_t test = 0;
    double illposedness = 0.0;
    std::size_t category_counts[4] = {0, 0, 0, 0};
};

DatasetSummary summarize(const Vocabulary& vocab, const TripleSet& train, const TripleSet& valid,
                         const TripleSet& test, const RelationStats& stats);

}  // namespace kge
