#include "kge/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "json.hpp"

namespace kge {

namespace {

using json = nlohmann::json;

constexpr std::array<char, 12> magic = {'K', 'G', 'E', '-', 'T', 'E', 'N', 'S', 'O', 'R', 'S', '\0'};
constexpr std::uint32_t tensor_version = 1;

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    auto bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

    template <typename T>
    T get(const char* what) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        if (remaining() < sizeof(U)) {
            throw CheckpointError(CheckpointErrorKind::truncated, std::string("tensors.bin ends inside ") + what);
        }
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return std::bit_cast<T>(bits);
    }

    void read_magic() {
        if (remaining() < magic.size()) throw CheckpointError(CheckpointErrorKind::truncated, "tensors.bin header");
        if (std::memcmp(bytes_.data(), magic.data(), magic.size()) != 0) {
            throw CheckpointError(CheckpointErrorKind::malformed, "tensors.bin has a bad magic header");
        }
        pos_ += magic.size();
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::vector<unsigned char> bytes_;
    std::size_t pos_ = 0;
};

struct TensorRef {
    const char* name;
    std::size_t rows;
    std::size_t cols;
};

std::vector<TensorRef> expected_tensors(const EmbeddingModel& m) {
    std::vector<TensorRef> t{{"entities", m.entity_count(), m.dim}, {"relations", m.relation_count(), m.dim}};
    if (m.uses_tail_relations()) t.push_back({"relations_tail", m.relation_count(), m.dim});
    t.push_back({"manifold_params", m.relation_count(), 1});
    return t;
}

template <typename Model>
auto tensor_views(Model& m) {
    using Span = decltype(m.entities.values());
    std::vector<Span> v{m.entities.values(), m.relations.values()};
    if (m.uses_tail_relations()) v.push_back(m.relations_tail.values());
    v.push_back(Span(m.manifold_params));
    return v;
}

json kernel_json(const KernelSpec& k) {
    json j;
    j["spec"] = to_string(k);
    switch (k.kind) {
        case KernelKind::linear: j["kind"] = "linear"; break;
        case KernelKind::gaussian:
            j["kind"] = "gaussian";
            j["sigma"] = k.sigma;
            break;
        case KernelKind::polynomial:
            j["kind"] = "polynomial";
            j["degree"] = k.degree;
            j["offset"] = k.offset;
            break;
    }
    return j;
}

KernelSpec kernel_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear") return KernelSpec::linear();
    if (kind == "gaussian") return KernelSpec::gaussian(j.at("sigma").get<double>());
    if (kind == "polynomial") return KernelSpec::polynomial(j.at("degree").get<int>(), j.at("offset").get<double>());
    throw CheckpointError(CheckpointErrorKind::malformed, "unknown kernel kind '" + kind + "'");
}

std::vector<unsigned char> read_all(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointErrorKind::io, "cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string_view to_string(CheckpointErrorKind k) {
    switch (k) {
        case CheckpointErrorKind::io: return "io error";
        case CheckpointErrorKind::version_mismatch: return "version mismatch";
        case CheckpointErrorKind::truncated: return "truncated file";
        case CheckpointErrorKind::shape_mismatch: return "shape mismatch";
        case CheckpointErrorKind::malformed: return "malformed checkpoint";
    }
    return "?";
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir) {
    const auto& m = checkpoint.model;
    if (checkpoint.vocab.entity_count() != m.entity_count() ||
        checkpoint.vocab.relation_count() != m.relation_count()) {
        throw CheckpointError(CheckpointErrorKind::shape_mismatch, "vocabulary and model sizes disagree");
    }

    json meta;
    meta["format_version"] = checkpoint_format_version;
    meta["manifold"] = std::string(to_string(m.manifold.kind));
    meta["absolute"] = m.manifold.absolute;
    meta["kernel"] = kernel_json(m.manifold.kernel);
    meta["dim"] = m.dim;
    meta["entity_count"] = m.entity_count();
    meta["relation_count"] = m.relation_count();
    meta["baseline"] = m.transe_baseline;
    json tensors = json::array();
    for (const auto& t : expected_tensors(m)) tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
    meta["tensors"] = tensors;
    meta["config"] = checkpoint.config;
    meta["entities"] = checkpoint.vocab.entities();
    meta["relations"] = checkpoint.vocab.relations();

    std::vector<unsigned char> bytes(magic.begin(), magic.end());
    put_le(bytes, tensor_version);
    const auto shapes = expected_tensors(m);
    put_le(bytes, static_cast<std::uint64_t>(shapes.size()));
    for (const auto& t : shapes) {
        put_le(bytes, static_cast<std::uint64_t>(t.rows));
        put_le(bytes, static_cast<std::uint64_t>(t.cols));
    }
    for (auto view : tensor_views(m)) {
        for (double x : view) put_le(bytes, x);
    }

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw CheckpointError(CheckpointErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());

    std::ofstream meta_out(dir / "metadata.json", std::ios::binary | std::ios::trunc);
    meta_out << meta.dump(2) << '\n';
    std::ofstream bin_out(dir / "tensors.bin", std::ios::binary | std::ios::trunc);
    bin_out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!meta_out || !bin_out) throw CheckpointError(CheckpointErrorKind::io, "failed writing " + dir.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    json meta;
    {
        std::ifstream in(dir / "metadata.json");
        if (!in) throw CheckpointError(CheckpointErrorKind::io, "cannot open " + (dir / "metadata.json").string());
        try {
            meta = json::parse(in);
        } catch (const json::exception& e) {
            throw CheckpointError(CheckpointErrorKind::malformed, std::string("metadata.json: ") + e.what());
        }
    }

    Checkpoint cp;
    try {
        const int version = meta.at("format_version").get<int>();
        if (version != checkpoint_format_version) {
            throw CheckpointError(CheckpointErrorKind::version_mismatch,
                                  "metadata format_version " + std::to_string(version) + ", expected " +
                                      std::to_string(checkpoint_format_version));
        }
        ManifoldSpec spec;
        const auto kind = meta.at("manifold").get<std::string>();
        if (kind == "sphere") {
            spec.kind = ManifoldKind::sphere;
        } else if (kind == "hyperplane") {
            spec.kind = ManifoldKind::hyperplane;
        } else {
            throw CheckpointError(CheckpointErrorKind::malformed, "unknown manifold '" + kind + "'");
        }
        spec.absolute = meta.at("absolute").get<bool>();
        spec.kernel = kernel_from_json(meta.at("kernel"));

        cp.model = EmbeddingModel::allocate(meta.at("entity_count").get<std::size_t>(),
                                            meta.at("relation_count").get<std::size_t>(),
                                            meta.at("dim").get<std::size_t>(), spec, meta.at("baseline").get<bool>());
        cp.config = meta.at("config").get<std::map<std::string, std::string>>();
        cp.vocab = Vocabulary::from_names(meta.at("entities").get<std::vector<std::string>>(),
                                          meta.at("relations").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
        throw CheckpointError(CheckpointErrorKind::malformed, std::string("metadata.json: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(CheckpointErrorKind::malformed, std::string("metadata.json: ") + e.what());
    }
    if (cp.vocab.entity_count() != cp.model.entity_count() ||
        cp.vocab.relation_count() != cp.model.relation_count()) {
        throw CheckpointError(CheckpointErrorKind::shape_mismatch, "vocabulary size disagrees with entity/relation count");
    }

    Reader reader(read_all(dir / "tensors.bin"));
    reader.read_magic();
    const auto version = reader.get<std::uint32_t>("header");
    if (version != tensor_version) {
        throw CheckpointError(CheckpointErrorKind::version_mismatch,
                              "tensors.bin version " + std::to_string(version) + ", expected " +
                                  std::to_string(tensor_version));
    }
    const auto shapes = expected_tensors(cp.model);
    const auto count = reader.get<std::uint64_t>("tensor table");
    if (count != shapes.size()) {
        throw CheckpointError(CheckpointErrorKind::shape_mismatch, "tensors.bin holds " + std::to_string(count) +
                                                                       " tensors, metadata implies " +
                                                                       std::to_string(shapes.size()));
    }
    for (const auto& t : shapes) {
        const auto rows = reader.get<std::uint64_t>("tensor table");
        const auto cols = reader.get<std::uint64_t>("tensor table");
        if (rows != t.rows || cols != t.cols) {
            throw CheckpointError(CheckpointErrorKind::shape_mismatch,
                                  std::string(t.name) + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                                      ", metadata implies " + std::to_string(t.rows) + "x" + std::to_string(t.cols));
        }
    }
    for (auto view : tensor_views(cp.model)) {
        for (double& x : view) x = reader.get<double>("tensor data");
    }
    if (reader.remaining() != 0) {
        throw CheckpointError(CheckpointErrorKind::malformed, "trailing bytes after tensor data");
    }
    return cp;
}

}  // namespace kge
