#include "cfmaps/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "cfmaps/error.hpp"

namespace cfmaps {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("csv line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

// Label strings ordered numerically when they all parse, else lexically.
std::vector<std::string> order_classes(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  const bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& s) {
    double v;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
  });
  if (numeric) {
    std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      return std::stod(a) < std::stod(b);
    });
  }
  return labels;
}

void infer_domains(Dataset& d) {
  for (std::size_t k = 0; k < d.schema.size(); ++k) {
    Feature& f = d.schema.features[k];
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    bool binary = true;
    for (const auto& row : d.rows) {
      lo = std::min(lo, row[k]);
      hi = std::max(hi, row[k]);
      binary = binary && (row[k] == 0.0 || row[k] == 1.0);
    }
    if (d.rows.empty()) lo = 0.0, hi = 1.0;
    if (binary) {
      f.kind = FeatureKind::kBinary;
      lo = 0.0;
      hi = 1.0;
    }
    if (!(lo < hi)) hi = lo + 1.0;
    f.lo = lo;
    f.hi = hi;
  }
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.name = name;
  out.schema = schema;
  out.classes = classes;
  for (std::size_t i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

Dataset parse_csv(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("csv '" + name + "' is empty");
  const std::vector<std::string> header = split_line(line);
  if (header.size() < 2) throw FormatError("csv '" + name + "' needs features and a label");
  Dataset d;
  d.name = name;
  for (std::size_t k = 0; k + 1 < header.size(); ++k) {
    d.schema.features.push_back(Feature{header[k], FeatureKind::kContinuous, 0.0, 1.0});
  }
  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw FormatError("csv '" + name + "' line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells");
    }
    std::vector<double> row;
    for (std::size_t k = 0; k + 1 < cells.size(); ++k) row.push_back(parse_double(cells[k], line_no));
    d.rows.push_back(std::move(row));
    raw_labels.push_back(cells.back());
  }
  d.classes = order_classes(raw_labels);
  std::map<std::string, ClassIndex> index;
  for (std::size_t c = 0; c < d.classes.size(); ++c) index[d.classes[c]] = static_cast<ClassIndex>(c);
  for (const std::string& l : raw_labels) d.labels.push_back(index.at(l));
  infer_domains(d);
  d.schema.validate();
  return d;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open dataset '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), std::filesystem::path(path).stem().string());
}

Dataset make_blobs(std::size_t n_samples, int n_classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> centre(-10.0, 10.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::array<double, 2>> centres(n_classes);
  for (auto& c : centres) c = {centre(rng), centre(rng)};
  Dataset d;
  d.name = "blobs";
  d.schema.features = {Feature{"x0", FeatureKind::kContinuous, 0, 1},
                       Feature{"x1", FeatureKind::kContinuous, 0, 1}};
  for (int c = 0; c < n_classes; ++c) d.classes.push_back(std::to_string(c));
  for (std::size_t i = 0; i < n_samples; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(n_classes));
    d.rows.push_back({centres[c][0] + noise(rng), centres[c][1] + noise(rng)});
    d.labels.push_back(c);
  }
  infer_domains(d);
  return d;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             std::uint64_t seed) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(d.size()));
  std::vector<std::size_t> test(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> train(order.begin() + n_test, order.end());
  return {d.subset(train), d.subset(test)};
}

Dataset resolve_dataset(const std::string& ref, const std::string& data_dir) {
  if (ref == "blobs") return make_blobs(300, 3, 0);
  namespace fs = std::filesystem;
  if (!data_dir.empty()) {
    const fs::path candidate = fs::path(data_dir) / (ref + ".csv");
    if (fs::exists(candidate)) return load_csv(candidate.string());
  }
  if (fs::exists(ref)) return load_csv(ref);
  throw NotFoundError("dataset '" + ref + "' not found");
}

}  // namespace cfmaps
