#include "xpd/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace xpd {

Dataset::Dataset(Matrix x, std::vector<int> y, std::vector<FeatureMeta> meta)
    : x_(std::move(x)), y_(std::move(y)), meta_(std::move(meta)) {
  if (x_.rows() != y_.size()) {
    throw DataError("dataset: " + std::to_string(x_.rows()) + " rows but " +
                    std::to_string(y_.size()) + " labels");
  }
  if (meta_.size() != x_.cols()) {
    throw DataError("dataset: feature metadata count does not match column count");
  }
  std::unordered_set<std::string> names;
  for (const auto& m : meta_) {
    if (!names.insert(m.name).second) throw DataError("dataset: duplicate feature name '" + m.name + "'");
  }
  for (int label : y_) {
    if (label != 0 && label != 1) throw DataError("dataset: labels must be 0 or 1");
  }
  for (std::size_t r = 0; r < x_.rows(); ++r) {
    for (std::size_t c = 0; c < x_.cols(); ++c) {
      const double v = x_(r, c);
      if (!std::isfinite(v)) {
        throw DataError("dataset: non-finite value at row " + std::to_string(r) + ", column '" +
                        meta_[c].name + "'");
      }
      if (meta_[c].kind == FeatureKind::Binary && v != 0.0 && v != 1.0) {
        throw DataError("dataset: binary feature '" + meta_[c].name + "' has value outside {0,1}");
      }
    }
  }
}

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(std::count(y_.begin(), y_.end(), 1));
}

bool Dataset::has_both_classes() const {
  const auto pos = positives();
  return pos > 0 && pos < y_.size();
}

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> names;
  names.reserve(meta_.size());
  for (const auto& m : meta_) names.push_back(m.name);
  return names;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> values;
  values.reserve(indices.size() * cols());
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= rows()) throw std::out_of_range("dataset subset index out of range");
    const auto r = row(i);
    values.insert(values.end(), r.begin(), r.end());
    labels.push_back(y_[i]);
  }
  Dataset out;
  out.x_ = Matrix(indices.size(), cols(), std::move(values));
  out.y_ = std::move(labels);
  out.meta_ = meta_;
  return out;
}

Dataset Dataset::with_labels(std::vector<int> y) const { return Dataset(x_, std::move(y), meta_); }

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::vector<std::string>& actionable_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty (no header)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header;
  for (auto cell : split_line(line)) header.emplace_back(trim(cell));
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : header) {
      if (h.empty()) throw DataError("empty column name in header of '" + path.string() + "'");
      if (!seen.insert(h).second) throw DataError("duplicate header name '" + h + "'");
    }
  }
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw DataError("label column '" + label_column + "' not found in '" + path.string() + "'");
  }
  const auto label_idx = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t n_features = header.size() - 1;

  std::vector<double> values;
  std::vector<double> raw_labels;
  std::size_t line_no = 1;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++data_row;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(data_row) + " (line " + std::to_string(line_no) + "): expected " +
                      std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto cell = trim(cells[c]);
      if (!parse_double(cell, v) || !std::isfinite(v)) {
        throw DataError("row " + std::to_string(data_row) + " (line " + std::to_string(line_no) + "), column '" +
                        header[c] + "': cannot parse '" + std::string(cell) + "' as a number");
      }
      if (c == label_idx) {
        raw_labels.push_back(v);
      } else {
        values.push_back(v);
      }
    }
  }

  std::set<double> label_values(raw_labels.begin(), raw_labels.end());
  const bool zero_one = std::all_of(label_values.begin(), label_values.end(), [](double v) { return v == 0 || v == 1; });
  const bool minus_one = std::all_of(label_values.begin(), label_values.end(), [](double v) { return v == -1 || v == 1; });
  if (!zero_one && !minus_one) {
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
      const double v = raw_labels[i];
      if (v != 0 && v != 1 && v != -1) {
        throw DataError("row " + std::to_string(i + 1) + ": label value " + format_double(v) + " is not binary");
      }
    }
    throw DataError("labels mix 0 and -1 encodings");
  }
  std::vector<int> y;
  y.reserve(raw_labels.size());
  for (double v : raw_labels) y.push_back(v == 1 ? 1 : 0);

  Matrix x(raw_labels.size(), n_features, std::move(values));
  std::vector<FeatureMeta> meta;
  meta.reserve(n_features);
  const std::unordered_set<std::string> actionable(actionable_columns.begin(), actionable_columns.end());
  for (std::size_t c = 0, f = 0; c < header.size(); ++c) {
    if (c == label_idx) continue;
    bool binary = x.rows() > 0;
    for (std::size_t r = 0; r < x.rows() && binary; ++r) {
      const double v = x(r, f);
      binary = v == 0.0 || v == 1.0;
    }
    meta.push_back({header[c], binary ? FeatureKind::Binary : FeatureKind::Numeric, actionable.contains(header[c])});
    ++f;
  }
  for (const auto& name : actionable_columns) {
    if (name != label_column && std::find(header.begin(), header.end(), name) == header.end()) {
      throw DataError("actionable column '" + name + "' not found in header");
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(meta));
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& m : ds.meta()) out << m.name << ',';
  out << label_column << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (double v : ds.row(r)) out << format_double(v) << ',';
    out << ds.y()[r] << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

namespace {

// Largest-remainder apportionment of `count` items over the three ratios.
std::array<std::size_t, 3> apportion(std::size_t count, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(count) * ratios[k];
    const double floored = std::floor(exact + 1e-9);
    sizes[k] = static_cast<std::size_t>(floored);
    remainders[k] = exact - floored;
    assigned += sizes[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < count; i = (i + 1) % 3) {
    ++sizes[order[i]];
    ++assigned;
  }
  return sizes;
}

}  // namespace

SplitIndices stratified_split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.valid, ratios.test};
  for (double v : r) {
    if (!(v > 0.0)) throw ConfigError("split ratios must all be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (!ds.has_both_classes()) throw DataError("stratified split needs at least one instance of each class");

  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      if (ds.y()[i] == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto sizes = apportion(members.size(), r);
    if (sizes[0] == 0) {
      throw DataError("class " + std::to_string(cls) + " would receive no training instances");
    }
    auto it = members.begin();
    out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(sizes[0]));
    it += static_cast<std::ptrdiff_t>(sizes[0]);
    out.valid.insert(out.valid.end(), it, it + static_cast<std::ptrdiff_t>(sizes[1]));
    it += static_cast<std::ptrdiff_t>(sizes[1]);
    out.test.insert(out.test.end(), it, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.valid.begin(), out.valid.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Dataset synthesize(std::size_t n, std::size_t d, std::uint64_t seed, double noise) {
  if (n < 20) throw ConfigError("synthesize: n must be at least 20");
  if (d < 2) throw ConfigError("synthesize: d must be at least 2");
  if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("synthesize: noise must lie in [0, 1)");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> w(d);
  for (auto& wi : w) wi = normal(rng);

  const auto n_binary = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(d) + 0.5));
  const std::size_t first_binary = d - n_binary;
  const std::size_t n_actionable = (d + 2) / 3;

  Matrix x(n, d);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double z = normal(rng);
      row[j] = j >= first_binary ? (z > 0.0 ? 1.0 : 0.0) : z;
    }
    double margin = row[0] * row[1];
    for (std::size_t j = 0; j < d; ++j) margin += w[j] * row[j];
    int label = unit(rng) < sigmoid(margin) ? 1 : 0;
    if (unit(rng) < noise) label = 1 - label;
    y[i] = label;
  }

  std::vector<FeatureMeta> meta(d);
  for (std::size_t j = 0; j < d; ++j) {
    meta[j].name = "f" + std::to_string(j);
    meta[j].kind = j >= first_binary ? FeatureKind::Binary : FeatureKind::Numeric;
    meta[j].actionable = j < n_actionable;
  }
  return Dataset(std::move(x), std::move(y), std::move(meta));
}

const std::vector<DatasetRegistryEntry>& registry() {
  static const std::vector<DatasetRegistryEntry> entries{
      {"ds_100K20", 100077, 20},     {"ds_10K18", 10000, 18},     {"ds_10K50", 10000, 49},
      {"ds_11055_rev", 11055, 32},   {"ds_11055", 11055, 31},     {"ds_11K89", 11481, 89},
      {"ds_129K112", 129698, 112},   {"ds_235795_54", 235795, 55}, {"ds_247950", 247950, 42},
      {"ds_600K11", 662591, 10},     {"ds_88K112", 88647, 112},   {"ds_90K32", 90000, 34},
  };
  return entries;
}

const DatasetRegistryEntry& registry_entry(const std::string& name) {
  for (const auto& e : registry()) {
    if (e.name == name) return e;
  }
  throw ConfigError("unknown registry dataset '" + name + "'");
}

std::vector<double> column_means(const Matrix& x) {
  std::vector<double> mean(x.cols(), 0.0);
  if (x.rows() == 0) return mean;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) mean[c] += x(r, c);
  }
  for (auto& m : mean) m /= static_cast<double>(x.rows());
  return mean;
}

std::vector<double> column_stds(const Matrix& x) {
  const auto mean = column_means(x);
  std::vector<double> var(x.cols(), 0.0);
  if (x.rows() == 0) return var;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = x(r, c) - mean[c];
      var[c] += d * d;
    }
  }
  for (auto& v : var) v = std::sqrt(v / static_cast<double>(x.rows()));
  return var;
}

}  // namespace xpd
