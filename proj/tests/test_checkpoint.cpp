#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>

#include "json.hpp"
#include "kge/checkpoint.hpp"
#include "support/oracles.hpp"

using namespace kge;
using testing::TempDir;

namespace {

Vocabulary names_for(std::size_t entities, std::size_t relations) {
    std::vector<std::string> e, r;
    for (std::size_t i = 0; i < entities; ++i) e.push_back("ent " + std::to_string(i));
    for (std::size_t i = 0; i < relations; ++i) r.push_back("/rel/" + std::to_string(i));
    return Vocabulary::from_names(e, r);
}

Checkpoint sample_checkpoint(const ManifoldSpec& spec, bool baseline, std::size_t dim = 6, std::uint64_t seed = 1) {
    Checkpoint cp;
    cp.model = testing::random_model(9, 3, dim, spec, baseline, seed);
    cp.vocab = names_for(9, 3);
    cp.config = {{"model.dim", std::to_string(dim)}, {"train.seed", "1"}};
    return cp;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

CheckpointErrorKind load_error(const std::filesystem::path& dir) {
    try {
        load_checkpoint(dir);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    FAIL("expected CheckpointError");
    return CheckpointErrorKind::io;
}

void edit_metadata(const std::filesystem::path& dir, const std::function<void(nlohmann::json&)>& edit) {
    auto j = nlohmann::json::parse(testing::read_file(dir / "metadata.json"));
    edit(j);
    testing::write_file(dir / "metadata.json", j.dump(2));
}

}  // namespace

TEST_CASE("round trip preserves every variant bit for bit") {
    TempDir tmp("ckpt");
    struct Variant {
        ManifoldSpec spec;
        bool baseline;
    };
    const Variant variants[] = {
        {ManifoldSpec{}, false},
        {ManifoldSpec{}, true},
        {{ManifoldKind::sphere, false, KernelSpec::gaussian(0.75)}, false},
        {{ManifoldKind::sphere, false, KernelSpec::polynomial(3, 1.25)}, false},
        {{ManifoldKind::hyperplane, false, KernelSpec::linear()}, false},
        {{ManifoldKind::hyperplane, true, KernelSpec::linear()}, false},
        {{ManifoldKind::hyperplane, false, KernelSpec::gaussian(2.0)}, false},
        {{ManifoldKind::hyperplane, false, KernelSpec::polynomial(2, 0.5)}, true},
    };
    int i = 0;
    for (const auto& v : variants) {
        auto cp = sample_checkpoint(v.spec, v.baseline, 6, 100 + i);
        const auto dir = tmp / ("v" + std::to_string(i++));
        save_checkpoint(cp, dir);
        auto back = load_checkpoint(dir);
        CHECK(back == cp);
        CHECK(bitwise_equal(back.model.entities.values(), cp.model.entities.values()));
        CHECK(bitwise_equal(back.model.relations.values(), cp.model.relations.values()));
        CHECK(bitwise_equal(back.model.relations_tail.values(), cp.model.relations_tail.values()));
        CHECK(bitwise_equal(back.model.manifold_params, cp.model.manifold_params));
        std::mt19937_64 rng(i);
        for (const auto& t : testing::random_triples(rng, 9, 3, 20).triples) {
            CHECK(score(t, back.model) == score(t, cp.model));
        }
    }
}

TEST_CASE("awkward doubles survive the round trip") {
    TempDir tmp("ckpt");
    auto cp = sample_checkpoint(ManifoldSpec{}, false);
    auto vals = cp.model.entities.values();
    vals[0] = -0.0;
    vals[1] = std::numeric_limits<double>::denorm_min();
    vals[2] = std::numeric_limits<double>::max();
    vals[3] = 0.1;
    save_checkpoint(cp, tmp.path);
    auto back = load_checkpoint(tmp.path);
    CHECK(bitwise_equal(back.model.entities.values(), cp.model.entities.values()));
    CHECK(std::signbit(back.model.entities.values()[0]));
}

TEST_CASE("tensors.bin layout") {
    TempDir tmp("ckpt");
    auto cp = sample_checkpoint({ManifoldKind::hyperplane, false, KernelSpec::linear()}, false, 4);
    save_checkpoint(cp, tmp.path);
    const auto bytes = testing::read_file(tmp / "tensors.bin");
    REQUIRE(bytes.size() >= 16);
    CHECK(bytes.substr(0, 12) == std::string("KGE-TENSORS\0", 12));
    CHECK(bytes.substr(12, 4) == std::string("\x01\x00\x00\x00", 4));
    CHECK(static_cast<unsigned char>(bytes[16]) == 4);  // entities, relations, relations_tail, D_r
    const std::size_t header = 16 + 8 + 4 * 16;
    const std::size_t values = 9 * 4 + 3 * 4 + 3 * 4 + 3;
    CHECK(bytes.size() == header + 8 * values);
    double first = 0.0;
    std::memcpy(&first, bytes.data() + header, 8);  // host is little-endian in this test environment
    CHECK(first == cp.model.entities.values()[0]);

    auto meta = nlohmann::json::parse(testing::read_file(tmp / "metadata.json"));
    CHECK(meta["format_version"] == 1);
    CHECK(meta["manifold"] == "hyperplane");
    CHECK(meta["dim"] == 4);
    CHECK(meta["tensors"].size() == 4);
    CHECK(meta["tensors"][3]["name"] == "manifold_params");
    CHECK(meta["entities"][0] == "ent 0");
}

TEST_CASE("saving twice produces identical bytes") {
    TempDir tmp("ckpt");
    auto cp = sample_checkpoint(ManifoldSpec{}, false);
    save_checkpoint(cp, tmp / "a");
    save_checkpoint(load_checkpoint(tmp / "a"), tmp / "b");
    CHECK(testing::read_file(tmp / "a" / "tensors.bin") == testing::read_file(tmp / "b" / "tensors.bin"));
    CHECK(testing::read_file(tmp / "a" / "metadata.json") == testing::read_file(tmp / "b" / "metadata.json"));
}

TEST_CASE("truncated tensor file") {
    TempDir tmp("ckpt");
    save_checkpoint(sample_checkpoint(ManifoldSpec{}, false), tmp.path);
    auto bytes = testing::read_file(tmp / "tensors.bin");
    for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{20}, std::size_t{14}, std::size_t{3}}) {
        testing::write_file(tmp / "tensors.bin", bytes.substr(0, cut));
        CHECK(load_error(tmp.path) == CheckpointErrorKind::truncated);
    }
}

TEST_CASE("trailing bytes are rejected") {
    TempDir tmp("ckpt");
    save_checkpoint(sample_checkpoint(ManifoldSpec{}, false), tmp.path);
    testing::write_file(tmp / "tensors.bin", testing::read_file(tmp / "tensors.bin") + "x");
    CHECK(load_error(tmp.path) == CheckpointErrorKind::malformed);
}

TEST_CASE("dimension disagreement between metadata and tensors") {
    TempDir tmp("ckpt");
    save_checkpoint(sample_checkpoint(ManifoldSpec{}, false, 100), tmp.path);
    edit_metadata(tmp.path, [](nlohmann::json& j) { j["dim"] = 99; });
    CHECK(load_error(tmp.path) == CheckpointErrorKind::shape_mismatch);
}

TEST_CASE("entity count disagreement") {
    TempDir tmp("ckpt");
    save_checkpoint(sample_checkpoint(ManifoldSpec{}, false), tmp.path);
    edit_metadata(tmp.path, [](nlohmann::json& j) { j["entity_count"] = 8; });
    CHECK(load_error(tmp.path) == CheckpointErrorKind::shape_mismatch);
}

TEST_CASE("manifold kind disagreement changes the tensor count") {
    TempDir tmp("ckpt");
    save_checkpoint(sample_checkpoint(ManifoldSpec{}, false), tmp.path);
    edit_metadata(tmp.path, [](nlohmann::json& j) { j["manifold"] = "hyperplane"; });
    CHECK(load_error(tmp.path) == CheckpointErrorKind::shape_mismatch);
}

TEST_CASE("version mismatch") {
    TempDir tmp("ckpt");
    save_checkpoint(sample_checkpoint(ManifoldSpec{}, false), tmp.path);
    SUBCASE("metadata") {
        edit_metadata(tmp.path, [](nlohmann::json& j) { j["format_version"] = 2; });
        CHECK(load_error(tmp.path) == CheckpointErrorKind::version_mismatch);
    }
    SUBCASE("tensor header") {
        auto bytes = testing::read_file(tmp / "tensors.bin");
        bytes[12] = 7;
        testing::write_file(tmp / "tensors.bin", bytes);
        CHECK(load_error(tmp.path) == CheckpointErrorKind::version_mismatch);
    }
}

TEST_CASE("bad magic and malformed metadata") {
    TempDir tmp("ckpt");
    save_checkpoint(sample_checkpoint(ManifoldSpec{}, false), tmp.path);
    SUBCASE("magic") {
        auto bytes = testing::read_file(tmp / "tensors.bin");
        bytes[0] = 'X';
        testing::write_file(tmp / "tensors.bin", bytes);
        CHECK(load_error(tmp.path) == CheckpointErrorKind::malformed);
    }
    SUBCASE("not json") {
        testing::write_file(tmp / "metadata.json", "{ nope");
        CHECK(load_error(tmp.path) == CheckpointErrorKind::malformed);
    }
    SUBCASE("missing field") {
        edit_metadata(tmp.path, [](nlohmann::json& j) { j.erase("kernel"); });
        CHECK(load_error(tmp.path) == CheckpointErrorKind::malformed);
    }
    SUBCASE("absolute with a gaussian kernel") {
        edit_metadata(tmp.path, [](nlohmann::json& j) {
            j["manifold"] = "hyperplane";
            j["absolute"] = true;
            j["kernel"] = {{"kind", "gaussian"}, {"sigma", 1.0}};
        });
        CHECK(load_error(tmp.path) == CheckpointErrorKind::malformed);
    }
}

TEST_CASE("missing files are io errors") {
    TempDir tmp("ckpt");
    CHECK(load_error(tmp / "absent") == CheckpointErrorKind::io);
    save_checkpoint(sample_checkpoint(ManifoldSpec{}, false), tmp.path);
    std::filesystem::remove(tmp / "tensors.bin");
    CHECK(load_error(tmp.path) == CheckpointErrorKind::io);
}

TEST_CASE("vocabulary must match the model on save") {
    TempDir tmp("ckpt");
    auto cp = sample_checkpoint(ManifoldSpec{}, false);
    cp.vocab = names_for(8, 3);
    CHECK_THROWS_AS(save_checkpoint(cp, tmp.path), CheckpointError);
}
