#include "kge/core.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace kge {

namespace {

index_t intern(std::string_view name, std::vector<std::string>& names,
               std::unordered_map<std::string, index_t>& index) {
    std::string key(name);
    if (auto it = index.find(key); it != index.end()) return it->second;
    auto id = static_cast<index_t>(names.size());
    index.emplace(key, id);
    names.push_back(std::move(key));
    return id;
}

std::optional<index_t> lookup(std::string_view name, const std::unordered_map<std::string, index_t>& index) {
    if (auto it = index.find(std::string(name)); it != index.end()) return it->second;
    return std::nullopt;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

}  // namespace

index_t Vocabulary::add_entity(std::string_view name) { return intern(name, entities_, entity_index_); }
index_t Vocabulary::add_relation(std::string_view name) { return intern(name, relations_, relation_index_); }

std::optional<index_t> Vocabulary::find_entity(std::string_view name) const { return lookup(name, entity_index_); }
std::optional<index_t> Vocabulary::find_relation(std::string_view name) const { return lookup(name, relation_index_); }

Vocabulary Vocabulary::from_names(std::vector<std::string> entities, std::vector<std::string> relations) {
    Vocabulary v;
    for (const auto& e : entities) {
        if (v.find_entity(e)) throw std::invalid_argument("duplicate entity name: " + e);
        v.add_entity(e);
    }
    for (const auto& r : relations) {
        if (v.find_relation(r)) throw std::invalid_argument("duplicate relation name: " + r);
        v.add_relation(r);
    }
    return v;
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "?";
}

TripleSet load_triples(std::istream& in, Vocabulary& vocab, const LoadOptions& options) {
    TripleSet set;
    set.split = options.split;
    if (options.labeled) set.labels.emplace();

    auto resolve_entity = [&](std::string_view name, std::size_t line_no) {
        if (options.policy == VocabPolicy::extend) return vocab.add_entity(name);
        if (auto id = vocab.find_entity(name)) return *id;
        throw UnknownNameError("line " + std::to_string(line_no) + ": entity '" + std::string(name) +
                               "' is not in the vocabulary");
    };
    auto resolve_relation = [&](std::string_view name, std::size_t line_no) {
        if (options.policy == VocabPolicy::extend) return vocab.add_relation(name);
        if (auto id = vocab.find_relation(name)) return *id;
        throw UnknownNameError("line " + std::to_string(line_no) + ": relation '" + std::string(name) +
                               "' is not in the vocabulary");
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
        if (view.empty()) continue;

        auto fields = split_tabs(view);
        const std::size_t expected = options.labeled ? 4 : 3;
        if (options.labeled && fields.size() == 3) throw ParseError(line_no, "missing label field");
        if (fields.size() != expected) {
            throw ParseError(line_no, "expected " + std::to_string(expected) + " tab-separated fields, found " +
                                          std::to_string(fields.size()));
        }
        for (std::size_t i = 0; i < 3; ++i) {
            if (fields[i].empty()) throw ParseError(line_no, "empty name field");
        }

        Triple t;
        t.head = resolve_entity(fields[0], line_no);
        t.relation = resolve_relation(fields[1], line_no);
        t.tail = resolve_entity(fields[2], line_no);
        set.triples.push_back(t);

        if (options.labeled) {
            if (fields[3] == "1") {
                set.labels->push_back(true);
            } else if (fields[3] == "-1") {
                set.labels->push_back(false);
            } else {
                throw ParseError(line_no, "label must be 1 or -1, found '" + std::string(fields[3]) + "'");
            }
        }
    }
    return set;
}

TripleSet load_triples_file(const std::string& path, Vocabulary& vocab, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open triple file: " + path);
    try {
        return load_triples(in, vocab, options);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.detail(), path);
    }
}

std::string_view to_string(RelationCategory c) {
    switch (c) {
        case RelationCategory::one_to_one: return "1-1";
        case RelationCategory::one_to_many: return "1-N";
        case RelationCategory::many_to_one: return "N-1";
        case RelationCategory::many_to_many: return "N-N";
    }
    return "?";
}

RelationCategory categorize(double tph, double hpt, double cutoff) {
    const bool many_tails = tph >= cutoff;
    const bool many_heads = hpt >= cutoff;
    if (!many_tails && !many_heads) return RelationCategory::one_to_one;
    if (many_tails && !many_heads) return RelationCategory::one_to_many;
    if (!many_tails && many_heads) return RelationCategory::many_to_one;
    return RelationCategory::many_to_many;
}

const RelationStat& RelationStats::at(index_t relation) const {
    if (const auto* s = find(relation)) return *s;
    throw UnknownRelationError("unknown relation index " + std::to_string(relation) + " (no training triples)");
}

const RelationStat* RelationStats::find(index_t relation) const {
    if (relation >= per_relation_.size() || !per_relation_[relation]) return nullptr;
    return &*per_relation_[relation];
}

RelationStats compute_relation_stats(const TripleSet& train, std::size_t relation_count, double cutoff) {
    if (train.empty()) throw std::invalid_argument("relation statistics need a nonempty training set");
    if (!(cutoff > 0.0)) throw std::invalid_argument("category cutoff must be positive");

    std::vector<std::size_t> counts(relation_count, 0);
    std::vector<std::unordered_set<index_t>> heads(relation_count);
    std::vector<std::unordered_set<index_t>> tails(relation_count);
    for (const auto& t : train.triples) {
        if (t.relation >= relation_count) throw std::out_of_range("relation index outside vocabulary");
        ++counts[t.relation];
        heads[t.relation].insert(t.head);
        tails[t.relation].insert(t.tail);
    }

    std::vector<std::optional<RelationStat>> out(relation_count);
    for (std::size_t r = 0; r < relation_count; ++r) {
        if (counts[r] == 0) continue;
        RelationStat s;
        s.triple_count = counts[r];
        s.tph = static_cast<double>(counts[r]) / static_cast<double>(heads[r].size());
        s.hpt = static_cast<double>(counts[r]) / static_cast<double>(tails[r].size());
        s.category = categorize(s.tph, s.hpt, cutoff);
        out[r] = s;
    }
    return RelationStats(std::move(out), cutoff);
}

FilterIndex::FilterIndex(std::span<const TripleSet* const> splits) {
    for (const auto* set : splits) {
        if (set == nullptr) continue;
        for (const auto& t : set->triples) {
            if (!members_.insert(t).second) continue;
            tails_[key(t.head, t.relation)].push_back(t.tail);
            heads_[key(t.relation, t.tail)].push_back(t.head);
        }
    }
    for (auto& [k, v] : tails_) std::sort(v.begin(), v.end());
    for (auto& [k, v] : heads_) std::sort(v.begin(), v.end());
}

std::span<const index_t> FilterIndex::tails(index_t head, index_t relation) const {
    if (auto it = tails_.find(key(head, relation)); it != tails_.end()) return it->second;
    return {};
}

std::span<const index_t> FilterIndex::heads(index_t relation, index_t tail) const {
    if (auto it = heads_.find(key(relation, tail)); it != heads_.end()) return it->second;
    return {};
}

FilterIndex build_filter_index(const TripleSet& train, const TripleSet& valid, const TripleSet& test) {
    const TripleSet* splits[] = {&train, &valid, &test};
    return FilterIndex(splits);
}

double illposedness_ratio(std::size_t triples, std::size_t entities, std::size_t relations) {
    if (entities + relations == 0) throw std::domain_error("ill-posedness ratio undefined for E + R = 0");
    return static_cast<double>(triples) / static_cast<double>(entities + relations);
}

DatasetSummary summarize(const Vocabulary& vocab, const TripleSet& train, const TripleSet& valid,
                         const TripleSet& test, const RelationStats& stats) {
    DatasetSummary s;
    s.entities = vocab.entity_count();
    s.relations = vocab.relation_count();
    s.train = train.size();
    s.valid = valid.size();
    s.test = test.size();
    s.illposedness = illposedness_ratio(s.train, s.entities, s.relations);
    for (index_t r = 0; r < stats.relation_count(); ++r) {
        if (const auto* rs = stats.find(r)) ++s.category_counts[static_cast<int>(rs->category)];
    }
    return s;
}

}  // namespace kge
