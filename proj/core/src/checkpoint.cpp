#include "orient/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace orient {

void write_checkpoint(std::ostream& out, const ModelParams& params) {
  out << "{\n";
  out << fmt::format("  \"format_version\": {},\n", kCheckpointFormatVersion);
  out << fmt::format("  \"num_classes\": {},\n", params.num_classes());
  out << "  \"layers\": [\n";
  const auto& segs = params.segments();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    out << fmt::format("    {{\"name\": \"{}\", \"shape\": [{}, {}]}}{}\n", segs[i].name,
                       segs[i].rows, segs[i].cols, i + 1 < segs.size() ? "," : "");
  }
  out << "  ],\n";
  out << "  \"arrays\": {\n";
  const auto values = params.values();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    out << fmt::format("    \"{}\": [", segs[i].name);
    for (std::size_t k = 0; k < segs[i].size(); ++k) {
      out << fmt::format("{}{:.17g}", k == 0 ? "" : ", ", values[segs[i].offset + k]);
    }
    out << (i + 1 < segs.size() ? "],\n" : "]\n");
  }
  out << "  }\n}\n";
}

ModelParams read_checkpoint(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw std::runtime_error("unsupported checkpoint format_version " + std::to_string(version));
    }
    ModelParams params(doc.at("num_classes").get<int>());
    const auto& layers = doc.at("layers");
    const auto& segs = params.segments();
    if (layers.size() != segs.size()) {
      throw std::runtime_error("checkpoint layer manifest has " + std::to_string(layers.size()) +
                               " entries, expected " + std::to_string(segs.size()));
    }
    auto values = params.mutable_values();
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& entry = layers[i];
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<long>>();
      if (name != segs[i].name || shape.size() != 2 || shape[0] != segs[i].rows ||
          shape[1] != segs[i].cols) {
        throw std::runtime_error("checkpoint layer " + std::to_string(i) + " (" + name +
                                 ") does not match the network layout");
      }
      const auto& arr = doc.at("arrays").at(name);
      if (arr.size() != segs[i].size()) {
        throw std::runtime_error("checkpoint array " + name + " has " +
                                 std::to_string(arr.size()) + " values, expected " +
                                 std::to_string(segs[i].size()));
      }
      for (std::size_t k = 0; k < segs[i].size(); ++k) {
        values[segs[i].offset + k] = arr[k].get<double>();
      }
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, params);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void save_model_pair(const std::filesystem::path& dir, const ModelParams& student,
                     const ModelParams& teacher) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "student.json", student);
  save_checkpoint(dir / "teacher.json", teacher);
}

}  // namespace orient
