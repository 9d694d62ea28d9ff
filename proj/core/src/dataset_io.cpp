#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include <fmt/format.h>

#include "orient/synthetic.hpp"

namespace orient {
namespace {

namespace fs = std::filesystem;

constexpr const char* kManifestHeader = "id,domain,split,class,path";

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view text) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Points read_xyz(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing point file " + path.string());
  std::vector<double> coords;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c, extra;
    if (!(ss >> a >> b >> c) || (ss >> extra)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected three coordinates");
    }
    try {
      coords.push_back(parse_double(a));
      coords.push_back(parse_double(b));
      coords.push_back(parse_double(c));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (coords.empty()) throw std::runtime_error("point file " + path.string() + " is empty");
  const auto n = static_cast<Eigen::Index>(coords.size() / 3);
  return Eigen::Map<const Points>(coords.data(), n, 3);
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "clouds");
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.csv").string());
  manifest << kManifestHeader << '\n';
  for (const auto& s : dataset.samples) {
    const std::string rel = fmt::format("clouds/{:06d}.xyz", s.cloud.id);
    manifest << fmt::format("{},{},{},{},{}\n", s.cloud.id, s.domain, split_name(s.split),
                            s.cloud.label, rel);
    std::ofstream xyz(dir / rel);
    if (!xyz) throw std::runtime_error("cannot write " + (dir / rel).string());
    for (Eigen::Index i = 0; i < s.cloud.points.rows(); ++i) {
      xyz << fmt::format("{:.17g} {:.17g} {:.17g}\n", s.cloud.points(i, 0), s.cloud.points(i, 1),
                         s.cloud.points(i, 2));
    }
    if (!xyz) throw std::runtime_error("failed writing " + (dir / rel).string());
  }
  if (!manifest) throw std::runtime_error("failed writing " + (dir / "manifest.csv").string());
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir.string());
  const fs::path manifest_path = dir / "manifest.csv";
  if (!fs::exists(manifest_path)) {
    if (fs::is_empty(dir)) throw std::runtime_error("empty dataset: " + dir.string() + " has no files");
    throw std::runtime_error("missing manifest: " + manifest_path.string());
  }
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open " + manifest_path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw std::runtime_error(manifest_path.string() + ":1: expected header '" + kManifestHeader + "'");
  }

  Dataset ds;
  int max_label = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    Sample s;
    try {
      if (f.size() != 5) throw std::invalid_argument("expected 5 fields, got " + std::to_string(f.size()));
      s.cloud.id = parse_int<SampleId>(f[0]);
      s.domain = f[1];
      if (f[2] == "train") {
        s.split = Split::train;
      } else if (f[2] == "test") {
        s.split = Split::test;
      } else {
        throw std::invalid_argument("unknown split '" + f[2] + "'");
      }
      s.cloud.label = parse_int<int>(f[3]);
      if (s.cloud.label < 0) throw std::invalid_argument("negative class label");
      if (f[4].empty()) throw std::invalid_argument("empty path");
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(manifest_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    s.cloud.points = read_xyz(dir / f[4]);
    max_label = std::max(max_label, s.cloud.label);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw std::runtime_error("empty dataset: " + manifest_path.string() + " lists no clouds");
  for (int c = 0; c <= max_label; ++c) {
    ds.class_names.emplace_back(c < kPrimitiveCount ? std::string(primitive_name(c))
                                                    : "class" + std::to_string(c));
  }
  return ds;
}

}  // namespace orient
