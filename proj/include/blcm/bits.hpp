#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "blcm/error.hpp"

namespace blcm {

/// Index of a binary latent configuration h in {0,1}^K.
///
/// Configurations are numbered h -> sum_k h_k 2^(k-1), so bit (k-1) of the
/// index holds H_k. Every table with a 2^K axis in this library uses this order.
using Config = std::uint32_t;

inline std::size_t num_configs(int k) { return std::size_t{1} << k; }

/// Value of latent coordinate `k` (0-based) in configuration `h`.
inline int config_bit(Config h, int k) { return static_cast<int>((h >> k) & 1u); }

inline Config flip_bit(Config h, int k) { return h ^ (Config{1} << k); }

inline Config config_from_bits(std::span<const int> bits) {
  Config h = 0;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (bits[k] != 0) h |= Config{1} << k;
  }
  return h;
}

inline std::vector<int> config_to_bits(Config h, int k) {
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = config_bit(h, i);
  return out;
}

/// Restrict configuration `h` to the coordinates listed in `coords`; the result
/// indexes {0,1}^|coords| with coords[0] as the lowest bit.
inline Config project_config(Config h, std::span<const int> coords) {
  Config out = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (config_bit(h, coords[i]) != 0) out |= Config{1} << i;
  }
  return out;
}

/// Dense row-major matrix of bits.
class BitMatrix {
 public:
  BitMatrix() = default;

  BitMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw DimensionError("BitMatrix: negative dimension");
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0);
  }

  BitMatrix(std::initializer_list<std::initializer_list<int>> rows) {
    std::vector<std::vector<int>> tmp;
    for (const auto& r : rows) tmp.emplace_back(r);
    *this = from_rows(tmp);
  }

  static BitMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r == 0 ? 0 : static_cast<int>(rows.front().size());
    BitMatrix m(r, c);
    for (int i = 0; i < r; ++i) {
      if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != c)
        throw DimensionError("BitMatrix: ragged rows");
      for (int j = 0; j < c; ++j) {
        const int v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (v != 0 && v != 1) throw ParamError("BitMatrix: entries must be 0 or 1");
        m.set(i, j, v == 1);
      }
    }
    return m;
  }

  static BitMatrix identity(int n) {
    BitMatrix m(n, n);
    for (int i = 0; i < n; ++i) m.set(i, i, true);
    return m;
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  int operator()(int r, int c) const { return data_[index(r, c)]; }
  void set(int r, int c, bool v) { data_[index(r, c)] = v ? 1 : 0; }

  int row_sum(int r) const {
    int s = 0;
    for (int c = 0; c < cols_; ++c) s += (*this)(r, c);
    return s;
  }
  int col_sum(int c) const {
    int s = 0;
    for (int r = 0; r < rows_; ++r) s += (*this)(r, c);
    return s;
  }
  int count_ones() const {
    int s = 0;
    for (auto v : data_) s += v;
    return s;
  }

  /// Rows selected in the given order.
  BitMatrix select_rows(std::span<const int> idx) const {
    BitMatrix out(static_cast<int>(idx.size()), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int c = 0; c < cols_; ++c) out.set(static_cast<int>(i), c, (*this)(idx[i], c));
    return out;
  }

  /// Output column k is input column perm[k].
  BitMatrix permute_cols(std::span<const int> perm) const {
    if (static_cast<int>(perm.size()) != cols_) throw DimensionError("permute_cols: size mismatch");
    BitMatrix out(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) out.set(r, c, (*this)(r, perm[static_cast<std::size_t>(c)]));
    return out;
  }

  std::vector<std::vector<int>> to_rows() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(rows_),
                                      std::vector<int>(static_cast<std::size_t>(cols_)));
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c)
        out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = (*this)(r, c);
    return out;
  }

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

 private:
  std::size_t index(int r, int c) const {
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_) throw DimensionError("BitMatrix: index out of range");
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace blcm
