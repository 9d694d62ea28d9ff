#pragma once

#include <filesystem>
#include <iosfwd>

#include "orient/model.hpp"

namespace orient {

inline constexpr int kCheckpointFormatVersion = 1;

// JSON document: format_version, num_classes, a layer-shape manifest and one
// named array per parameter segment, every value printed with 17 significant
// digits so a reload reproduces the parameters bit for bit.
void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

/// A trained pair lives in a directory as student.json and teacher.json.
void save_model_pair(const std::filesystem::path& dir, const ModelParams& student,
                     const ModelParams& teacher);

}  // namespace orient
