#include "srcgeo/embedding.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace srcgeo {

namespace {

constexpr double kZeroColumnTol = 1e-12;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? std::string{}
                                                : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

[[noreturn]] void parse_fail(std::size_t row, const std::string& msg) {
  throw Error(ErrorCode::parse, "row " + std::to_string(row) + ": " + msg);
}

long parse_label(const std::string& s, std::size_t row) {
  if (s.empty()) parse_fail(row, "missing label");
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) parse_fail(row, "non-integer label '" + s + "'");
  return v;
}

double parse_value(const std::string& s, std::size_t row) {
  if (s.empty()) parse_fail(row, "empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (errno == ERANGE || end != s.c_str() + s.size()) parse_fail(row, "malformed value '" + s + "'");
  return v;
}

}  // namespace

LabeledEmbeddingSet::LabeledEmbeddingSet(Mat embeddings, const std::vector<long>& raw_labels)
    : embeddings_(std::move(embeddings)) {
  if (embeddings_.rows() < 1 || embeddings_.cols() < 1)
    throw Error(ErrorCode::empty_input, "embedding set needs p >= 1 and N >= 1");
  if (static_cast<Index>(raw_labels.size()) != embeddings_.cols())
    throw Error(ErrorCode::dimension_mismatch, "one label per column required");

  label_ids_ = raw_labels;
  std::sort(label_ids_.begin(), label_ids_.end());
  label_ids_.erase(std::unique(label_ids_.begin(), label_ids_.end()), label_ids_.end());

  labels_.reserve(raw_labels.size());
  for (long raw : raw_labels) {
    const auto it = std::lower_bound(label_ids_.begin(), label_ids_.end(), raw);
    labels_.push_back(static_cast<int>(it - label_ids_.begin()) + 1);
  }
}

std::vector<long> LabeledEmbeddingSet::original_labels() const {
  std::vector<long> out;
  out.reserve(labels_.size());
  for (int k : labels_) out.push_back(label_ids_[k - 1]);
  return out;
}

LabeledEmbeddingSet parse_embedding_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;

  // header
  bool have_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    have_header = true;
    break;
  }
  if (!have_header) throw Error(ErrorCode::empty_input, "empty embedding file");

  std::vector<long> labels;
  std::vector<double> values;
  std::size_t width = 0;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++data_row;
    const auto fields = split_fields(line);
    if (fields.size() < 2) parse_fail(data_row, "expected a label and at least one value");
    if (width == 0) {
      width = fields.size();
    } else if (fields.size() != width) {
      parse_fail(data_row, "width " + std::to_string(fields.size()) + " differs from " +
                               std::to_string(width));
    }
    labels.push_back(parse_label(fields[0], data_row));
    for (std::size_t j = 1; j < fields.size(); ++j) values.push_back(parse_value(fields[j], data_row));
  }
  if (labels.empty()) throw Error(ErrorCode::empty_input, "embedding file has no data rows");

  const Index p = static_cast<Index>(width - 1);
  const Index n = static_cast<Index>(labels.size());
  // rows of the file are columns of the dictionary
  Mat embeddings = Eigen::Map<const Mat>(values.data(), p, n);
  return LabeledEmbeddingSet(std::move(embeddings), labels);
}

LabeledEmbeddingSet load_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_embedding_csv(buf.str());
}

std::string format_embedding_csv(const LabeledEmbeddingSet& set) {
  std::string out = "label";
  for (Index j = 0; j < set.dim(); ++j) out += ",v" + std::to_string(j + 1);
  out += '\n';
  char buf[40];
  const auto raw = set.original_labels();
  for (Index i = 0; i < set.size(); ++i) {
    out += std::to_string(raw[i]);
    for (Index j = 0; j < set.dim(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", set.embeddings()(j, i));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void save_embedding_csv(const LabeledEmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << format_embedding_csv(set);
}

Mat l2_normalize_columns(const Mat& columns) {
  Mat out = columns;
  for (Index i = 0; i < out.cols(); ++i) {
    const double norm = out.col(i).norm();
    if (!(norm > kZeroColumnTol))
      throw Error(ErrorCode::degenerate_embedding,
                  "column " + std::to_string(i + 1) + " has (near-)zero norm");
    out.col(i) /= norm;
  }
  return out;
}

LabeledEmbeddingSet l2_normalize(const LabeledEmbeddingSet& set) {
  return LabeledEmbeddingSet(l2_normalize_columns(set.embeddings()), set.original_labels());
}

ClassPartition partition_labels(const std::vector<int>& labels, int class_count) {
  ClassPartition part;
  part.index_sets.resize(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int k = labels[i];
    if (k < 1 || k > class_count)
      throw Error(ErrorCode::invalid_argument, "label " + std::to_string(k) + " outside 1..K");
    part.index_sets[k - 1].push_back(static_cast<Index>(i));
  }
  return part;
}

ClassPartition partition_by_class(const LabeledEmbeddingSet& set) {
  return partition_labels(set.labels(), set.class_count());
}

Mat gather_columns(const Mat& matrix, const std::vector<Index>& indices) {
  Mat out(matrix.rows(), static_cast<Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) out.col(static_cast<Index>(j)) = matrix.col(indices[j]);
  return out;
}

}  // namespace srcgeo
