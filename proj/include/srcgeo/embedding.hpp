#pragma once

#include "srcgeo/common.hpp"

#include <filesystem>
#include <vector>

namespace srcgeo {

/// Embedding dictionary: one sample per column, labels remapped to 1..K.
///
/// Construction remaps arbitrary integer labels to contiguous class ids in
/// ascending order of the original values; `label_ids()[k - 1]` is the
/// original label of class k. The matrix is stored as given; use
/// l2_normalize() to obtain unit-norm columns.
class LabeledEmbeddingSet {
 public:
  LabeledEmbeddingSet(Mat embeddings, const std::vector<long>& raw_labels);

  const Mat& embeddings() const noexcept { return embeddings_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<long>& label_ids() const noexcept { return label_ids_; }
  int class_count() const noexcept { return static_cast<int>(label_ids_.size()); }
  Index dim() const noexcept { return embeddings_.rows(); }
  Index size() const noexcept { return embeddings_.cols(); }

  /// Original label for a contiguous class id.
  long original_label(int class_id) const { return label_ids_.at(class_id - 1); }
  /// Original label values, one per column.
  std::vector<long> original_labels() const;

 private:
  Mat embeddings_;
  std::vector<int> labels_;
  std::vector<long> label_ids_;
};

/// Column indices of each class, in dictionary order. `index_sets[k - 1]`
/// holds class k.
struct ClassPartition {
  std::vector<std::vector<Index>> index_sets;

  int class_count() const noexcept { return static_cast<int>(index_sets.size()); }
  const std::vector<Index>& of(int class_id) const { return index_sets.at(class_id - 1); }
};

/// Reads `label, v_1, ..., v_p` rows after a header line. Does not normalize.
LabeledEmbeddingSet load_embedding_csv(const std::filesystem::path& path);
LabeledEmbeddingSet parse_embedding_csv(const std::string& text);

/// Writes the original labels and full-precision values; load() of the result
/// reproduces the matrix bit for bit.
void save_embedding_csv(const LabeledEmbeddingSet& set, const std::filesystem::path& path);
std::string format_embedding_csv(const LabeledEmbeddingSet& set);

/// Scales each column to unit norm. Throws degenerate_embedding for a column
/// with norm <= 1e-12.
LabeledEmbeddingSet l2_normalize(const LabeledEmbeddingSet& set);
Mat l2_normalize_columns(const Mat& columns);

ClassPartition partition_by_class(const LabeledEmbeddingSet& set);
ClassPartition partition_labels(const std::vector<int>& labels, int class_count);

/// Columns of `matrix` at `indices`, in order.
Mat gather_columns(const Mat& matrix, const std::vector<Index>& indices);

}  // namespace srcgeo
