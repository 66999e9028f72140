#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "kge/core.hpp"
#include "kge/scoring.hpp"

namespace kge {

// Directory layout:
//   metadata.json  format_version, manifold, kernel, dim, counts, baseline flag, config echo, vocabulary
//   tensors.bin    16-byte header ("KGE-TENSORS\0" + u32 version), u64 tensor count, (u64 rows, u64 cols)
//                  per tensor, then every tensor's values row-major as little-endian IEEE-754 doubles.
//                  Order: entities, relations (r or r_head), relations_tail (hyperplane only), D_r (R x 1).
inline constexpr int checkpoint_format_version = 1;

enum class CheckpointErrorKind { io, version_mismatch, truncated, shape_mismatch, malformed };

std::string_view to_string(CheckpointErrorKind k);

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(CheckpointErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    CheckpointErrorKind kind() const noexcept { return kind_; }

private:
    CheckpointErrorKind kind_;
};

struct Checkpoint {
    EmbeddingModel model;
    Vocabulary vocab;
    std::map<std::string, std::string> config;  // echo of the run configuration, key=value

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace kge
