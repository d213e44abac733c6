#pragma once

#include <span>
#include <vector>

#include "pfmix/common.hpp"

namespace pfmix {

/// Flat data: N x D observations with optional 0-based class labels.
struct Dataset {
  Matrix X;
  std::vector<int> y;  // empty when unlabeled
  int n_classes = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(X.rows()); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(X.cols()); }
  bool labeled() const noexcept { return !y.empty(); }
  std::span<const int> labels() const noexcept { return y; }

  /// Throws DataError on shape, label-range, or non-finite input problems.
  void validate() const;
};

/// Variable-length sequences stored back to back: rows offsets[n] .. offsets[n+1]
/// of X (and entries of y) belong to sequence n.
struct SequenceDataset {
  Matrix X;
  std::vector<int> y;
  std::vector<std::size_t> offsets{0};
  int n_classes = 0;

  std::size_t num_sequences() const noexcept { return offsets.size() - 1; }
  std::size_t total_steps() const noexcept { return offsets.back(); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(X.cols()); }
  std::size_t length(std::size_t n) const { return offsets[n + 1] - offsets[n]; }
  bool labeled() const noexcept { return !y.empty(); }

  auto rows(std::size_t n) const {
    return X.middleRows(static_cast<Eigen::Index>(offsets[n]), static_cast<Eigen::Index>(length(n)));
  }
  std::span<const int> labels(std::size_t n) const {
    if (y.empty()) return {};
    return std::span<const int>(y).subspan(offsets[n], length(n));
  }

  /// Appends one sequence; X and y must agree on length and dimension.
  /// Copies the whole store, so prefer assemble() for bulk construction.
  void append(const Matrix& seq_x, std::span<const int> seq_y);

  static SequenceDataset assemble(const std::vector<Matrix>& xs, const std::vector<std::vector<int>>& ys,
                                  int n_classes);

  void validate() const;

  /// Pooled view: every time step as one flat datum.
  Dataset flatten() const { return Dataset{X, y, n_classes}; }
};

/// Sorted index sets of a seeded random split of n items; the first part gets
/// round(first_fraction * n) items, clamped to [1, n - 1].
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double first_fraction,
                                                                          std::uint64_t seed);

/// Seeded random split; `first_fraction` of the items go to the first part.
std::pair<Dataset, Dataset> split(const Dataset& data, double first_fraction, std::uint64_t seed);
std::pair<SequenceDataset, SequenceDataset> split(const SequenceDataset& data, double first_fraction,
                                                  std::uint64_t seed);

Dataset subset(const Dataset& data, std::span<const std::size_t> rows);
SequenceDataset subset(const SequenceDataset& data, std::span<const std::size_t> seqs);

/// Number of classes implied by the labels (max + 1), at least 2.
int infer_num_classes(std::span<const int> y);

}  // namespace pfmix
