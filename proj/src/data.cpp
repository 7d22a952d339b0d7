#include "pairlab/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pairlab {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_real(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_label(std::string_view s, Label& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

VectorDataset::VectorDataset(Matrix inputs, std::vector<Label> labels)
    : inputs_(std::move(inputs)), labels_(std::move(labels)) {
  if (static_cast<std::size_t>(inputs_.rows()) != labels_.size()) {
    throw std::invalid_argument("dataset: input and label counts differ");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0) throw std::invalid_argument("dataset: negative label " + std::to_string(labels_[i]));
    class_index_[labels_[i]].push_back(i);
  }
  for (const auto& [label, idx] : class_index_) {
    if (idx.size() < 2) {
      throw std::invalid_argument("dataset: label " + std::to_string(label) + " has a single sample");
    }
  }
}

std::vector<Label> VectorDataset::class_labels() const {
  std::vector<Label> out;
  out.reserve(class_index_.size());
  for (const auto& entry : class_index_) out.push_back(entry.first);
  return out;
}

Matrix VectorDataset::gather(std::span<const std::size_t> indices) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), inputs_.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = inputs_.row(static_cast<Eigen::Index>(indices[k]));
  }
  return out;
}

VectorDataset VectorDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Label> labels;
  labels.reserve(indices.size());
  for (auto i : indices) labels.push_back(labels_[i]);
  return VectorDataset(gather(indices), std::move(labels));
}

VectorDataset generate_clusters(const ClusterSpec& spec) {
  if (spec.num_classes < 2 || spec.per_class < 2) {
    throw std::invalid_argument("generate_clusters: need at least 2 classes with 2 samples each");
  }
  if (spec.input_dim == 0) throw std::invalid_argument("generate_clusters: input_dim must be positive");
  if (!(spec.center_scale >= 0.0) || !(spec.noise_sigma >= 0.0)) {
    throw std::invalid_argument("generate_clusters: scales must be non-negative");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.input_dim);
  Matrix inputs(static_cast<Eigen::Index>(spec.num_classes * spec.per_class), d);
  std::vector<Label> labels;
  labels.reserve(spec.num_classes * spec.per_class);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    Vector center(d);
    for (Eigen::Index k = 0; k < d; ++k) center(k) = spec.center_scale * unit(rng);
    for (std::size_t s = 0; s < spec.per_class; ++s, ++row) {
      for (Eigen::Index k = 0; k < d; ++k) inputs(row, k) = center(k) + spec.noise_sigma * unit(rng);
      labels.push_back(static_cast<Label>(c));
    }
  }
  return VectorDataset(std::move(inputs), std::move(labels));
}

std::pair<VectorDataset, VectorDataset> split_by_class(const VectorDataset& dataset, double train_fraction,
                                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_by_class: train_fraction must lie in (0, 1)");
  }
  auto classes = dataset.class_labels();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(classes.size()) * train_fraction));
  if (n_train == 0 || n_train >= classes.size()) {
    throw std::invalid_argument("split_by_class: one side of the split would be empty");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(classes.begin(), classes.end(), rng);
  std::sort(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(classes.begin() + static_cast<std::ptrdiff_t>(n_train), classes.end());

  auto collect = [&](auto first, auto last) {
    std::vector<std::size_t> idx;
    for (auto it = first; it != last; ++it) {
      const auto& members = dataset.class_index().at(*it);
      idx.insert(idx.end(), members.begin(), members.end());
    }
    std::sort(idx.begin(), idx.end());
    return dataset.subset(idx);
  };
  const auto mid = classes.begin() + static_cast<std::ptrdiff_t>(n_train);
  return {collect(classes.begin(), mid), collect(mid, classes.end())};
}

VectorDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  std::map<Label, std::vector<std::size_t>> label_lines;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split_commas(text);
    double probe = 0.0;
    if (rows.empty() && labels.empty() && width == 0 && !parse_real(fields.front(), probe)) {
      width = fields.size();  // header row
      continue;
    }
    if (fields.size() < 2) fail("expected at least one value and a label");
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      fail("expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> values(fields.size() - 1);
    for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
      if (!parse_real(fields[k], values[k])) fail("non-numeric field '" + std::string(fields[k]) + "'");
    }
    Label label = 0;
    if (!parse_label(fields.back(), label) || label < 0) {
      fail("label must be a non-negative integer, found '" + std::string(fields.back()) + "'");
    }
    rows.push_back(std::move(values));
    labels.push_back(label);
    label_lines[label].push_back(line_no);
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no samples");
  for (const auto& [label, lines] : label_lines) {
    if (lines.size() < 2) {
      line_no = lines.front();
      fail("label " + std::to_string(label) + " has a single sample");
    }
  }

  Matrix inputs(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < rows[r].size(); ++k) {
      inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
    }
  }
  return VectorDataset(std::move(inputs), std::move(labels));
}

void save_csv(const VectorDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (Eigen::Index k = 0; k < dataset.inputs().cols(); ++k) {
      out << dataset.inputs()(static_cast<Eigen::Index>(i), k) << ',';
    }
    out << dataset.labels()[i] << '\n';
  }
}

}  // namespace pairlab
