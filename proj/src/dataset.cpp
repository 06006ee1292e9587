#include "gdaflow/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gdaflow {

namespace fs = std::filesystem;

int LabeledDataset::class_count() const {
  int c = 0;
  for (int y : labels) c = std::max(c, y);
  return c;
}

void LabeledDataset::validate() const {
  if (features.rows < 1) throw std::invalid_argument("LabeledDataset: empty");
  if (static_cast<int>(labels.size()) != features.rows)
    throw std::invalid_argument("LabeledDataset: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(features.rows) + " rows");
  if (!features.all_finite()) throw std::invalid_argument("LabeledDataset: non-finite feature");
  for (int y : labels)
    if (y < 1) throw std::invalid_argument("LabeledDataset: label " + std::to_string(y) + " < 1");
}

DomainSequence::DomainSequence(LabeledDataset source, std::vector<Mat> unlabeled,
                               std::vector<double> time_indices)
    : source_(std::move(source)), unlabeled_(std::move(unlabeled)),
      time_indices_(std::move(time_indices)) {
  source_.validate();
  if (unlabeled_.empty() || unlabeled_.size() != time_indices_.size())
    throw std::invalid_argument("DomainSequence: domain/index count mismatch");
  if (time_indices_.front() != 1.0)
    throw std::invalid_argument("DomainSequence: source time index must be 1");
  for (size_t i = 1; i < time_indices_.size(); ++i)
    if (time_indices_[i] <= time_indices_[i - 1])
      throw std::invalid_argument("DomainSequence: time indices must ascend");
  for (const Mat& u : unlabeled_) {
    if (u.cols != source_.dim())
      throw std::invalid_argument("DomainSequence: dimension mismatch across domains");
    if (u.rows < 1 || !u.all_finite())
      throw std::invalid_argument("DomainSequence: empty or non-finite domain");
  }
}

LabeledDataset make_two_moons(int n, double noise_sd, uint64_t seed) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("make_two_moons: n must be even and >= 2, got " +
                                std::to_string(n));
  if (noise_sd < 0.0) throw std::invalid_argument("make_two_moons: noise_sd must be >= 0");
  const int half = n / 2;
  const double pi = 3.14159265358979323846;
  RngStream rng = RngStream(seed).fork("two_moons");
  LabeledDataset d;
  d.features = Mat(n, 2);
  d.labels.resize(n);
  for (int i = 0; i < half; ++i) {
    const double t = half == 1 ? 0.0 : pi * i / (half - 1);
    d.features.at(i, 0) = std::cos(t);
    d.features.at(i, 1) = std::sin(t);
    d.labels[i] = 1;
    d.features.at(half + i, 0) = 1.0 - std::cos(t);
    d.features.at(half + i, 1) = 0.5 - std::sin(t);
    d.labels[half + i] = 2;
  }
  if (noise_sd > 0.0) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 2; ++k) d.features.at(i, k) += noise_sd * rng.normal();
  }
  d.time_index = 1.0;
  return d;
}

Mat rotate_features(const Mat& features, double angle_rad) {
  if (features.cols != 2)
    throw std::invalid_argument("rotate: features must be 2-D, got " + features.shape_str());
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  Mat out(features.rows, 2);
  for (int i = 0; i < features.rows; ++i) {
    const double x = features.at(i, 0), y = features.at(i, 1);
    out.at(i, 0) = c * x - s * y;
    out.at(i, 1) = s * x + c * y;
  }
  return out;
}

LabeledDataset rotate(const LabeledDataset& dataset, double angle_rad) {
  LabeledDataset out = dataset;
  out.features = rotate_features(dataset.features, angle_rad);
  return out;
}

RotatingSequence make_rotating_sequence(int n, double noise_sd,
                                        const std::vector<double>& angles_rad, uint64_t seed,
                                        bool shared_cloud) {
  if (angles_rad.empty()) throw std::invalid_argument("make_rotating_sequence: no angles");
  if (angles_rad.front() != 0.0)
    throw std::invalid_argument("make_rotating_sequence: first angle must be 0");
  for (size_t i = 1; i < angles_rad.size(); ++i)
    if (angles_rad[i] <= angles_rad[i - 1])
      throw std::invalid_argument("make_rotating_sequence: angles must ascend");

  std::vector<Mat> unlabeled;
  std::vector<double> indices;
  HeldOutLabels held;
  LabeledDataset source;
  for (size_t j = 0; j < angles_rad.size(); ++j) {
    const uint64_t domain_seed = shared_cloud ? seed : RngStream(seed).fork("domain", j).next_u64();
    LabeledDataset base = make_two_moons(n, noise_sd, domain_seed);
    LabeledDataset rotated = rotate(base, angles_rad[j]);
    rotated.time_index = static_cast<double>(j + 1);
    if (j == 0) source = rotated;
    unlabeled.push_back(rotated.features);
    indices.push_back(rotated.time_index);
    held.per_domain.push_back(rotated.labels);
  }
  return RotatingSequence{DomainSequence(std::move(source), std::move(unlabeled), std::move(indices)),
                          std::move(held)};
}

// ---------------------------------------------------------------------------
// CSV / manifest IO
// ---------------------------------------------------------------------------

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const Mat& features, const std::vector<std::optional<int>>& labels,
               double time_index, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (int k = 0; k < features.cols; ++k) out << "x_" << k << ",";
  out << "label,time_index\n";
  for (int i = 0; i < features.rows; ++i) {
    for (int k = 0; k < features.cols; ++k) out << fmt17(features.at(i, k)) << ",";
    if (labels[i].has_value()) out << *labels[i];
    out << "," << fmt17(time_index) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void save_dataset(const LabeledDataset& dataset, const std::string& path) {
  dataset.validate();
  std::vector<std::optional<int>> labels(dataset.labels.begin(), dataset.labels.end());
  write_csv(dataset.features, labels, dataset.time_index, path);
}

void save_unlabeled(const Mat& features, double time_index, const std::string& path) {
  std::vector<std::optional<int>> labels(features.rows, std::nullopt);
  write_csv(features, labels, time_index, path);
}

bool LoadedCsv::fully_labeled() const {
  return std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
}

LabeledDataset LoadedCsv::as_labeled() const {
  if (!fully_labeled()) throw std::invalid_argument("as_labeled: dataset has unlabeled rows");
  LabeledDataset d;
  d.features = features;
  for (const auto& l : labels) d.labels.push_back(*l);
  d.time_index = time_index;
  d.validate();
  return d;
}

LoadedCsv load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header[header.size() - 2] != "label" ||
      header.back() != "time_index")
    throw std::runtime_error(path + ": unexpected header");
  const int dim = static_cast<int>(header.size()) - 2;

  std::vector<double> values;
  std::vector<std::optional<int>> labels;
  double time_index = 1.0;
  int line_no = 1;
  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    {
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (!line.empty() && line.back() == ',') cells.push_back("");
    }
    if (static_cast<int>(cells.size()) != dim + 2)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(dim + 2) + " cells, got " +
                               std::to_string(cells.size()));
    auto parse_double = [&](const std::string& s) {
      size_t pos = 0;
      double v;
      try {
        v = std::stod(s, &pos);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
      }
      if (pos != s.size())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
      if (!std::isfinite(v))
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-finite value");
      return v;
    };
    for (int k = 0; k < dim; ++k) values.push_back(parse_double(cells[k]));
    const std::string& lab = cells[dim];
    if (lab.empty()) {
      labels.push_back(std::nullopt);
    } else {
      try {
        labels.push_back(std::stoi(lab));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad label '" + lab + "'");
      }
    }
    time_index = parse_double(cells[dim + 1]);
    ++rows;
  }
  LoadedCsv out;
  out.features = Mat(rows, dim, std::move(values));
  out.labels = std::move(labels);
  out.time_index = time_index;
  return out;
}

void save_sequence(const DomainSequence& domains, const HeldOutLabels& held_out,
                   const std::string& dir, SequenceManifest meta) {
  fs::create_directories(dir);
  meta.files.clear();
  meta.time_indices.clear();
  for (int j = 0; j < domains.domain_count(); ++j) {
    const std::string name = "domain_" + std::to_string(j + 1) + ".csv";
    const std::string path = (fs::path(dir) / name).string();
    const bool have_labels = j < static_cast<int>(held_out.per_domain.size()) &&
                             !held_out.per_domain[j].empty();
    if (j == 0) {
      save_dataset(domains.source(), path);
    } else if (have_labels) {
      LabeledDataset d;
      d.features = domains.unlabeled(j);
      d.labels = held_out.per_domain[j];
      d.time_index = domains.time_index(j);
      save_dataset(d, path);
    } else {
      save_unlabeled(domains.unlabeled(j), domains.time_index(j), path);
    }
    meta.files.push_back(name);
    meta.time_indices.push_back(domains.time_index(j));
  }
  nlohmann::json j;
  j["files"] = meta.files;
  j["time_indices"] = meta.time_indices;
  j["seed"] = meta.seed;
  j["generator"] = meta.generator;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << j.dump(2) << "\n";
}

SequenceManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  in >> j;
  SequenceManifest m;
  m.files = j.at("files").get<std::vector<std::string>>();
  m.time_indices = j.at("time_indices").get<std::vector<double>>();
  m.seed = j.value("seed", 0ull);
  m.generator = j.value("generator", "");
  return m;
}

RotatingSequence load_sequence(const std::string& manifest_path) {
  const SequenceManifest m = load_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  if (m.files.empty()) throw std::runtime_error(manifest_path + ": no domains listed");

  LabeledDataset source;
  std::vector<Mat> unlabeled;
  HeldOutLabels held;
  for (size_t j = 0; j < m.files.size(); ++j) {
    LoadedCsv csv = load_dataset((base / m.files[j]).string());
    if (j == 0) {
      source = csv.as_labeled();
      source.time_index = m.time_indices[0];
    }
    unlabeled.push_back(csv.features);
    if (csv.fully_labeled()) {
      std::vector<int> labels;
      for (const auto& l : csv.labels) labels.push_back(*l);
      held.per_domain.push_back(std::move(labels));
    } else {
      held.per_domain.push_back({});
    }
  }
  return RotatingSequence{DomainSequence(std::move(source), std::move(unlabeled),
                                         std::vector<double>(m.time_indices)),
                          std::move(held)};
}

}  // namespace gdaflow
