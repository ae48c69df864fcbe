#pragma once

// Tiled storage for square real matrices, ownership maps from block indices
// to ranks, and distribution-agnostic scatter/gather/copy.

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "taskeig/dense.hpp"

namespace taskeig {

namespace detail {
inline std::uint64_t next_object_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

struct TileIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const TileIndex&, const TileIndex&) = default;
};

/// Dense square matrix stored as a grid of column-major tiles. Interior
/// tiles are b x b; the last tile row/column holds the remainder.
class TiledMatrix {
public:
  TiledMatrix() = default;

  TiledMatrix(std::size_t n, std::size_t tile_size) : id_(detail::next_object_id()), n_(n), b_(tile_size) {
    if (n == 0) throw std::invalid_argument("TiledMatrix: order must be positive");
    if (tile_size == 0 || tile_size > n) throw std::invalid_argument("TiledMatrix: tile size must be in [1, n]");
    grid_ = (n + b_ - 1) / b_;
    tiles_.resize(grid_ * grid_);
    for (std::size_t j = 0; j < grid_; ++j)
      for (std::size_t i = 0; i < grid_; ++i)
        tiles_[j * grid_ + i].assign(tile_extent(i) * tile_extent(j), 0.0);
    generation_.assign(grid_ * grid_, 0);
  }

  // A copy is a distinct object for dependency tracking: fresh id, fresh counters.
  TiledMatrix(const TiledMatrix& o)
      : id_(detail::next_object_id()), n_(o.n_), b_(o.b_), grid_(o.grid_), tiles_(o.tiles_),
        generation_(o.generation_.size(), 0) {}
  TiledMatrix& operator=(const TiledMatrix& o) {
    if (this != &o) {
      id_ = detail::next_object_id();
      n_ = o.n_;
      b_ = o.b_;
      grid_ = o.grid_;
      tiles_ = o.tiles_;
      generation_.assign(o.generation_.size(), 0);
    }
    return *this;
  }
  TiledMatrix(TiledMatrix&&) noexcept = default;
  TiledMatrix& operator=(TiledMatrix&&) noexcept = default;

  static TiledMatrix identity(std::size_t n, std::size_t tile_size) {
    TiledMatrix m(n, tile_size);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
  }

  std::uint64_t id() const noexcept { return id_; }
  std::size_t order() const noexcept { return n_; }
  std::size_t tile_size() const noexcept { return b_; }
  std::size_t grid() const noexcept { return grid_; }

  /// Rows (or columns) of tile row (column) i.
  std::size_t tile_extent(std::size_t i) const noexcept {
    return i + 1 < grid_ ? b_ : n_ - b_ * (grid_ - 1);
  }
  std::size_t tile_of(std::size_t index) const noexcept { return index / b_; }

  std::span<double> tile(std::size_t i, std::size_t j) {
    check_tile(i, j);
    return tiles_[j * grid_ + i];
  }
  std::span<const double> tile(std::size_t i, std::size_t j) const {
    check_tile(i, j);
    return tiles_[j * grid_ + i];
  }

  std::uint64_t& generation(std::size_t i, std::size_t j) {
    check_tile(i, j);
    return generation_[j * grid_ + i];
  }
  std::uint64_t generation(std::size_t i, std::size_t j) const {
    check_tile(i, j);
    return generation_[j * grid_ + i];
  }

  double operator()(std::size_t r, std::size_t c) const noexcept {
    const std::size_t ti = r / b_, tj = c / b_;
    return tiles_[tj * grid_ + ti][(c - tj * b_) * tile_extent(ti) + (r - ti * b_)];
  }
  void set(std::size_t r, std::size_t c, double v) noexcept {
    const std::size_t ti = r / b_, tj = c / b_;
    tiles_[tj * grid_ + ti][(c - tj * b_) * tile_extent(ti) + (r - ti * b_)] = v;
  }

  /// Materialize a rectangular region into contiguous scratch.
  Matrix read_block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
    check_region(r0, c0, rows, cols);
    Matrix out(rows, cols);
    for_each_segment(r0, c0, rows, cols, [&](std::size_t ti, std::size_t tj, std::size_t lr, std::size_t lc,
                                            std::size_t orow, std::size_t ocol, std::size_t len) {
      const double* src = tiles_[tj * grid_ + ti].data() + lc * tile_extent(ti) + lr;
      std::copy_n(src, len, out.col(ocol) + orow);
    });
    return out;
  }

  void write_block(std::size_t r0, std::size_t c0, const Matrix& src) {
    check_region(r0, c0, src.rows(), src.cols());
    for_each_segment(r0, c0, src.rows(), src.cols(),
                     [&](std::size_t ti, std::size_t tj, std::size_t lr, std::size_t lc, std::size_t orow,
                         std::size_t ocol, std::size_t len) {
                       double* dst = tiles_[tj * grid_ + ti].data() + lc * tile_extent(ti) + lr;
                       std::copy_n(src.col(ocol) + orow, len, dst);
                     });
  }

  /// Tiles intersecting the region, column-major order of the tile grid.
  std::vector<TileIndex> tiles_covering(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
    std::vector<TileIndex> out;
    if (rows == 0 || cols == 0) return out;
    check_region(r0, c0, rows, cols);
    for (std::size_t tj = c0 / b_; tj <= (c0 + cols - 1) / b_; ++tj)
      for (std::size_t ti = r0 / b_; ti <= (r0 + rows - 1) / b_; ++ti) out.push_back({ti, tj});
    return out;
  }

private:
  void check_tile(std::size_t i, std::size_t j) const {
    if (i >= grid_ || j >= grid_) throw std::out_of_range("TiledMatrix: tile index out of range");
  }
  void check_region(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
    if (r0 + rows > n_ || c0 + cols > n_) throw std::out_of_range("TiledMatrix: region out of range");
  }

  // Visits maximal contiguous column segments of the region, tile by tile.
  template <typename F>
  void for_each_segment(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols, F&& f) const {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t gc = c0 + c;
      const std::size_t tj = gc / b_;
      std::size_t r = 0;
      while (r < rows) {
        const std::size_t gr = r0 + r;
        const std::size_t ti = gr / b_;
        const std::size_t lr = gr - ti * b_;
        const std::size_t len = std::min(rows - r, tile_extent(ti) - lr);
        f(ti, tj, lr, gc - tj * b_, r, c, len);
        r += len;
      }
    }
  }

  std::uint64_t id_ = 0;
  std::size_t n_ = 0;
  std::size_t b_ = 0;
  std::size_t grid_ = 0;
  std::vector<std::vector<double>> tiles_;
  std::vector<std::uint64_t> generation_;
};

inline TiledMatrix from_dense(const Matrix& a, std::size_t tile_size) {
  if (a.rows() == 0 || a.rows() != a.cols()) throw std::invalid_argument("from_dense: need a nonempty square matrix");
  TiledMatrix m(a.rows(), tile_size);
  m.write_block(0, 0, a);
  return m;
}

/// Row-major flat input, as read from matrix files.
inline TiledMatrix from_dense(std::span<const double> row_major, std::size_t n, std::size_t tile_size) {
  if (n == 0) throw std::invalid_argument("from_dense: order must be positive");
  return from_dense(Matrix::from_row_major(n, n, row_major), tile_size);
}

inline Matrix to_dense(const TiledMatrix& m) { return m.read_block(0, 0, m.order(), m.order()); }

/// Copies a region between two matrices of equal order; tile sizes may differ.
inline void copy_region(const TiledMatrix& src, TiledMatrix& dst, std::size_t r0, std::size_t c0, std::size_t rows,
                        std::size_t cols) {
  if (src.order() != dst.order()) throw std::invalid_argument("copy: dimension mismatch");
  if (rows == 0 || cols == 0) return;
  dst.write_block(r0, c0, src.read_block(r0, c0, rows, cols));
}

inline void copy(const TiledMatrix& src, TiledMatrix& dst) { copy_region(src, dst, 0, 0, src.order(), src.order()); }

// ---------------------------------------------------------------------------
// Distribution maps

enum class RankOrdering { row_major, col_major };

class DistributionMap {
public:
  using Function = std::function<std::size_t(std::size_t, std::size_t)>;
  enum class Kind { default_map, block_cyclic, custom };

  static DistributionMap block_cyclic(std::size_t grid_rows, std::size_t grid_cols, std::size_t p, std::size_t q,
                                      RankOrdering ordering = RankOrdering::row_major) {
    if (p == 0 || q == 0) throw std::invalid_argument("block_cyclic: mesh dimensions must be positive");
    DistributionMap m(Kind::block_cyclic, grid_rows, grid_cols);
    m.p_ = p;
    m.q_ = q;
    m.ordering_ = ordering;
    return m;
  }

  /// floor(sqrt(P)) mesh rows, P / rows mesh columns, row-major ranks.
  static DistributionMap default_map(std::size_t grid_rows, std::size_t grid_cols, std::size_t ranks) {
    if (ranks == 0) throw std::invalid_argument("default_map: need at least one rank");
    std::size_t p = static_cast<std::size_t>(std::sqrt(static_cast<double>(ranks)));
    while (p * p > ranks) --p;
    while ((p + 1) * (p + 1) <= ranks) ++p;
    auto m = block_cyclic(grid_rows, grid_cols, p, ranks / p);
    m.kind_ = Kind::default_map;
    return m;
  }

  static DistributionMap custom(std::size_t grid_rows, std::size_t grid_cols, Function f) {
    DistributionMap m(Kind::custom, grid_rows, grid_cols);
    m.fn_ = std::move(f);
    return m;
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t grid_rows() const noexcept { return rows_; }
  std::size_t grid_cols() const noexcept { return cols_; }

  std::size_t owner(std::size_t i, std::size_t j) const {
    if (i >= rows_ || j >= cols_) throw std::out_of_range("DistributionMap: block index out of range");
    if (kind_ == Kind::custom) return fn_(i, j);
    const std::size_t pi = i % p_, qj = j % q_;
    return ordering_ == RankOrdering::row_major ? pi * q_ + qj : qj * p_ + pi;
  }

  std::size_t rank_count() const {
    std::size_t r = 0;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r = std::max(r, owner(i, j) + 1);
    return r;
  }

private:
  DistributionMap(Kind k, std::size_t r, std::size_t c) : kind_(k), rows_(r), cols_(c) {}

  Kind kind_;
  std::size_t rows_, cols_;
  std::size_t p_ = 1, q_ = 1;
  RankOrdering ordering_ = RankOrdering::row_major;
  Function fn_;
};

inline std::size_t owner(const DistributionMap& map, std::size_t i, std::size_t j) { return map.owner(i, j); }

struct DistributedBlock {
  TileIndex index;
  Matrix values;
};

/// Per-rank block collections; element r holds the blocks owned by rank r.
using BlockCollections = std::vector<std::vector<DistributedBlock>>;

/// Split a dense matrix into uniform blocks and hand each to its owner.
inline BlockCollections scatter(const Matrix& source, std::size_t block_size, const DistributionMap& map) {
  if (source.rows() != source.cols() || source.rows() == 0) throw std::invalid_argument("scatter: need a square matrix");
  if (block_size == 0) throw std::invalid_argument("scatter: block size must be positive");
  const std::size_t n = source.rows();
  const std::size_t g = (n + block_size - 1) / block_size;
  if (map.grid_rows() != g || map.grid_cols() != g) throw std::invalid_argument("scatter: map does not match block grid");
  BlockCollections out(map.rank_count());
  for (std::size_t j = 0; j < g; ++j) {
    for (std::size_t i = 0; i < g; ++i) {
      const std::size_t r0 = i * block_size, c0 = j * block_size;
      const std::size_t rows = std::min(block_size, n - r0), cols = std::min(block_size, n - c0);
      out[map.owner(i, j)].push_back({{i, j}, source.block(r0, c0, rows, cols)});
    }
  }
  return out;
}

inline Matrix gather(const BlockCollections& blocks, std::size_t n, std::size_t block_size) {
  if (n == 0 || block_size == 0) throw std::invalid_argument("gather: dimensions must be positive");
  const std::size_t g = (n + block_size - 1) / block_size;
  Matrix out(n, n);
  std::vector<char> seen(g * g, 0);
  for (const auto& rank_blocks : blocks) {
    for (const auto& blk : rank_blocks) {
      const std::size_t r0 = blk.index.row * block_size, c0 = blk.index.col * block_size;
      if (blk.index.row >= g || blk.index.col >= g) throw std::invalid_argument("gather: block index out of range");
      if (blk.values.rows() != std::min(block_size, n - r0) || blk.values.cols() != std::min(block_size, n - c0))
        throw std::invalid_argument("gather: block dimension mismatch");
      out.set_block(r0, c0, blk.values);
      seen[blk.index.col * g + blk.index.row] = 1;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw std::invalid_argument("gather: missing blocks");
  return out;
}

// ---------------------------------------------------------------------------
// Matrix files

/// Text format: first line n, then n rows of n whitespace-separated values.
inline Matrix read_matrix_text(std::istream& in) {
  std::size_t n = 0;
  if (!(in >> n) || n == 0) throw std::runtime_error("matrix text: bad order line");
  std::vector<double> values(n * n);
  for (auto& v : values)
    if (!(in >> v)) throw std::runtime_error("matrix text: truncated data");
  return Matrix::from_row_major(n, n, values);
}

inline void write_matrix_text(std::ostream& out, const Matrix& a) {
  out << a.rows() << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out << (c ? " " : "") << a(r, c);
    out << '\n';
  }
}

inline constexpr char binary_magic[8] = {'T', 'E', 'I', 'G', 'M', 'A', 'T', '1'};

// Binary golden files: magic, uint64 n, n*n doubles, little-endian, row-major.
static_assert(std::endian::native == std::endian::little, "binary matrix files assume a little-endian host");

inline void write_matrix_binary(std::ostream& out, const Matrix& a) {
  out.write(binary_magic, 8);
  const std::uint64_t n = a.rows();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double v = a(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

inline Matrix read_matrix_binary(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, binary_magic, 8) != 0) throw std::runtime_error("matrix binary: bad magic");
  std::uint64_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n) || n == 0) throw std::runtime_error("matrix binary: bad order");
  Matrix a(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      double v;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("matrix binary: truncated data");
      a(r, c) = v;
    }
  return a;
}

inline Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char probe[8] = {};
  in.read(probe, 8);
  in.clear();
  in.seekg(0);
  if (std::memcmp(probe, binary_magic, 8) == 0) return read_matrix_binary(in);
  return read_matrix_text(in);
}

}  // namespace taskeig
