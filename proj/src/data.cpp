#include "pfmix/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pfmix/rng.hpp"

namespace pfmix {

namespace {

constexpr std::uint64_t kSplitStream = 0x53504c4954ULL;  // "SPLIT"

void check_labels(std::span<const int> y, int n_classes) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= n_classes)
      throw DataError("label out of range at row " + std::to_string(i) + ": " + std::to_string(y[i]));
  }
}

void check_finite(const Matrix& X) {
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    for (Eigen::Index c = 0; c < X.cols(); ++c)
      if (!std::isfinite(X(r, c)))
        throw DataError("non-finite value at row " + std::to_string(r) + ", column " + std::to_string(c));
}

std::size_t first_part_size(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("split fraction must be in (0, 1)");
  if (n < 2) throw DataError("need at least two items to split");
  auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

}  // namespace

void Dataset::validate() const {
  if (X.rows() == 0 || X.cols() == 0) throw DataError("dataset is empty");
  if (!y.empty() && y.size() != size()) throw DataError("label count does not match row count");
  check_finite(X);
  if (!y.empty()) check_labels(y, n_classes);
}

void SequenceDataset::append(const Matrix& seq_x, std::span<const int> seq_y) {
  if (seq_x.rows() == 0) throw DataError("sequences must have at least one step");
  if (X.rows() > 0 && seq_x.cols() != X.cols()) throw DataError("sequence dimension mismatch");
  if (!seq_y.empty() && static_cast<Eigen::Index>(seq_y.size()) != seq_x.rows())
    throw DataError("sequence label count does not match its length");
  if (num_sequences() > 0 && (seq_y.empty() != y.empty())) throw DataError("mixed labeled/unlabeled sequences");
  Matrix grown(X.rows() + seq_x.rows(), seq_x.cols());
  if (X.rows() > 0) grown.topRows(X.rows()) = X;
  grown.bottomRows(seq_x.rows()) = seq_x;
  X = std::move(grown);
  y.insert(y.end(), seq_y.begin(), seq_y.end());
  offsets.push_back(offsets.back() + static_cast<std::size_t>(seq_x.rows()));
}

SequenceDataset SequenceDataset::assemble(const std::vector<Matrix>& xs, const std::vector<std::vector<int>>& ys,
                                          int n_classes) {
  if (xs.empty()) throw DataError("no sequences");
  if (!ys.empty() && ys.size() != xs.size()) throw DataError("label sequence count mismatch");
  SequenceDataset out;
  out.n_classes = n_classes;
  std::size_t total = 0;
  for (const auto& x : xs) total += static_cast<std::size_t>(x.rows());
  out.X.resize(static_cast<Eigen::Index>(total), xs.front().cols());
  std::size_t at = 0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    if (xs[n].rows() == 0) throw DataError("sequences must have at least one step");
    if (xs[n].cols() != out.X.cols()) throw DataError("sequence dimension mismatch");
    out.X.middleRows(static_cast<Eigen::Index>(at), xs[n].rows()) = xs[n];
    if (!ys.empty()) {
      if (static_cast<Eigen::Index>(ys[n].size()) != xs[n].rows())
        throw DataError("sequence label count does not match its length");
      out.y.insert(out.y.end(), ys[n].begin(), ys[n].end());
    }
    at += static_cast<std::size_t>(xs[n].rows());
    out.offsets.push_back(at);
  }
  return out;
}

void SequenceDataset::validate() const {
  if (num_sequences() == 0 || X.cols() == 0) throw DataError("sequence dataset is empty");
  if (offsets.front() != 0 || offsets.back() != static_cast<std::size_t>(X.rows()))
    throw DataError("sequence offsets do not cover the data");
  for (std::size_t n = 0; n < num_sequences(); ++n)
    if (offsets[n + 1] <= offsets[n]) throw DataError("sequence " + std::to_string(n) + " is empty");
  if (!y.empty() && y.size() != total_steps()) throw DataError("label count does not match step count");
  check_finite(X);
  if (!y.empty()) check_labels(y, n_classes);
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  out.n_classes = data.n_classes;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(static_cast<Eigen::Index>(rows[i]));
    if (data.labeled()) out.y.push_back(data.y[rows[i]]);
  }
  return out;
}

SequenceDataset subset(const SequenceDataset& data, std::span<const std::size_t> seqs) {
  SequenceDataset out;
  out.n_classes = data.n_classes;
  std::size_t total = 0;
  for (auto s : seqs) total += data.length(s);
  out.X.resize(static_cast<Eigen::Index>(total), data.X.cols());
  std::size_t at = 0;
  for (auto s : seqs) {
    const auto len = data.length(s);
    out.X.middleRows(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(len)) = data.rows(s);
    if (data.labeled()) {
      auto ys = data.labels(s);
      out.y.insert(out.y.end(), ys.begin(), ys.end());
    }
    at += len;
    out.offsets.push_back(at);
  }
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double first_fraction,
                                                                          std::uint64_t seed) {
  const std::size_t k = first_part_size(n, first_fraction);
  Rng rng(seed, kSplitStream);
  auto perm = rng.permutation(n);
  std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(k), perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {std::move(a), std::move(b)};
}

std::pair<Dataset, Dataset> split(const Dataset& data, double first_fraction, std::uint64_t seed) {
  const auto [a, b] = split_indices(data.size(), first_fraction, seed);
  return {subset(data, a), subset(data, b)};
}

std::pair<SequenceDataset, SequenceDataset> split(const SequenceDataset& data, double first_fraction,
                                                  std::uint64_t seed) {
  const auto [a, b] = split_indices(data.num_sequences(), first_fraction, seed);
  return {subset(data, a), subset(data, b)};
}

int infer_num_classes(std::span<const int> y) {
  int m = 1;
  for (int v : y) {
    if (v < 0) throw DataError("labels must be nonnegative");
    m = std::max(m, v);
  }
  return m + 1;
}

}  // namespace pfmix
