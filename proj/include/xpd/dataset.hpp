#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xpd/common.hpp"

namespace xpd {

enum class FeatureKind { Numeric, Binary };

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  bool actionable = false;

  bool operator==(const FeatureMeta&) const = default;
};

/// Immutable numeric feature table with binary labels.
class Dataset {
 public:
  Dataset() = default;
  /// Validates shape, finiteness, label domain, unique names and binary kinds.
  Dataset(Matrix x, std::vector<int> y, std::vector<FeatureMeta> meta);

  const Matrix& x() const { return x_; }
  const std::vector<int>& y() const { return y_; }
  const std::vector<FeatureMeta>& meta() const { return meta_; }

  std::size_t rows() const { return x_.rows(); }
  std::size_t cols() const { return x_.cols(); }
  std::span<const double> row(std::size_t i) const { return x_.row(i); }

  std::size_t positives() const;
  bool has_both_classes() const;
  std::vector<std::string> feature_names() const;

  /// Rows selected by index, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Same features, labels replaced.
  Dataset with_labels(std::vector<int> y) const;

  bool operator==(const Dataset&) const = default;

 private:
  Matrix x_;
  std::vector<int> y_;
  std::vector<FeatureMeta> meta_;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;

  bool operator==(const SplitIndices&) const = default;
};

struct SplitRatios {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

struct DatasetRegistryEntry {
  std::string name;
  std::size_t n_instances = 0;
  std::size_t n_features = 0;
};

/// Reads a headered comma-separated file. Labels in {0,1} or {-1,1}; -1 maps
/// to 0. A column is Binary iff every observed value is 0 or 1.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::vector<std::string>& actionable_columns = {});

/// Writes features in column order followed by the label column. Values use
/// the shortest decimal form that reads back to the same double.
void write_csv(const Dataset& ds, const std::filesystem::path& path,
               const std::string& label_column = "label");

/// Stratified shuffle split. Per class, part sizes are the largest-remainder
/// rounding of count * ratio; each part's indices are returned ascending.
SplitIndices stratified_split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed);

/// Synthetic phishing-like table: Gaussian rows, the last round(0.2 d) columns
/// thresholded at 0, label ~ Bernoulli(sigmoid(w.x + x0*x1)) with w ~ N(0,1),
/// then each label flipped with probability `noise`.
Dataset synthesize(std::size_t n, std::size_t d, std::uint64_t seed, double noise);

/// Shapes of the twelve public phishing tables used in the original comparison.
const std::vector<DatasetRegistryEntry>& registry();
const DatasetRegistryEntry& registry_entry(const std::string& name);

/// Per-column mean and (population) standard deviation.
std::vector<double> column_means(const Matrix& x);
std::vector<double> column_stds(const Matrix& x);

}  // namespace xpd
