#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "oracles.hpp"
#include "taskeig/tile_core.hpp"

using namespace taskeig;

namespace {

// Rank 0 holds the blocks listed for it in the reference figure; the other
// blocks go round-robin over ranks 1..3.
DistributionMap figure_map(std::size_t g) {
  static const std::set<std::pair<std::size_t, std::size_t>> rank0 = {{0, 1}, {1, 2}, {1, 5}, {1, 6},
                                                                      {2, 6}, {3, 0}, {3, 5}};
  return DistributionMap::custom(g, g, [](std::size_t i, std::size_t j) -> std::size_t {
    if (rank0.count({i, j})) return 0;
    return 1 + (i + j) % 3;
  });
}

}  // namespace

TEST(TiledMatrix, SingleEntry) {
  Matrix a(1, 1);
  a(0, 0) = 5.0;
  auto t = from_dense(a, 1);
  EXPECT_EQ(t.grid(), 1u);
  ASSERT_EQ(t.tile(0, 0).size(), 1u);
  EXPECT_EQ(t.tile(0, 0)[0], 5.0);
  EXPECT_EQ(to_dense(t)(0, 0), 5.0);
}

TEST(TiledMatrix, RaggedLastTile) {
  TiledMatrix t(5, 2);
  EXPECT_EQ(t.grid(), 3u);
  EXPECT_EQ(t.tile_extent(0), 2u);
  EXPECT_EQ(t.tile_extent(2), 1u);
  EXPECT_EQ(t.tile(2, 2).size(), 1u);
  EXPECT_EQ(t.tile(0, 2).size(), 2u);
  EXPECT_EQ(t.tile(1, 1).size(), 4u);
}

TEST(TiledMatrix, EntryPlacement) {
  const Matrix a = oracle::random_matrix(11, 3);
  const std::size_t b = 4;
  auto t = from_dense(a, b);
  for (std::size_t r = 0; r < 11; ++r)
    for (std::size_t c = 0; c < 11; ++c) {
      const std::size_t ti = r / b, tj = c / b;
      const auto tile = t.tile(ti, tj);
      EXPECT_EQ(tile[(c % b) * t.tile_extent(ti) + r % b], a(r, c));
    }
  for (std::size_t i = 0; i < t.grid(); ++i)
    for (std::size_t j = 0; j < t.grid(); ++j) EXPECT_EQ(t.generation(i, j), 0u);
}

TEST(TiledMatrix, RoundTripIsBitwise) {
  for (auto [n, b] : {std::pair<std::size_t, std::size_t>{100, 17}, {64, 10}, {7, 7}, {33, 1}}) {
    const Matrix a = oracle::random_matrix(n, static_cast<unsigned>(n * 31 + b), -1e3, 1e3);
    EXPECT_TRUE(to_dense(from_dense(a, b)) == a) << n << " " << b;
  }
}

TEST(TiledMatrix, IdentityFlattens) {
  EXPECT_TRUE(to_dense(TiledMatrix::identity(10, 3)) == Matrix::identity(10));
}

TEST(TiledMatrix, RejectsBadDimensions) {
  EXPECT_THROW(TiledMatrix(0, 1), std::invalid_argument);
  EXPECT_THROW(TiledMatrix(4, 0), std::invalid_argument);
  EXPECT_THROW(TiledMatrix(4, 5), std::invalid_argument);
  EXPECT_THROW(from_dense(Matrix(3, 4), 2), std::invalid_argument);
}

TEST(TiledMatrix, BlockIo) {
  const Matrix a = oracle::random_matrix(13, 5);
  auto t = from_dense(a, 4);
  EXPECT_TRUE(t.read_block(3, 2, 7, 9) == a.block(3, 2, 7, 9));
  Matrix patch = oracle::random_matrix(5, 6);
  t.write_block(6, 5, patch);
  EXPECT_TRUE(t.read_block(6, 5, 5, 5) == patch);
  EXPECT_EQ(t(0, 0), a(0, 0));
  auto tiles = t.tiles_covering(3, 3, 2, 2);
  ASSERT_EQ(tiles.size(), 4u);
}

TEST(TiledMatrix, CopyPreservesEntries) {
  const Matrix a = oracle::random_matrix(9, 8);
  auto src = from_dense(a, 4);
  TiledMatrix dst(9, 3);
  copy(src, dst);
  EXPECT_TRUE(to_dense(dst) == a);
  auto before = to_dense(dst);
  copy_region(src, dst, 2, 2, 0, 0);
  EXPECT_TRUE(to_dense(dst) == before);
  TiledMatrix wrong(8, 4);
  EXPECT_THROW(copy(src, wrong), std::invalid_argument);
}

TEST(TiledMatrix, CopyGetsFreshIdentity) {
  TiledMatrix a(4, 2);
  a.generation(0, 0) = 3;
  TiledMatrix b = a;
  EXPECT_NE(a.id(), b.id());
  EXPECT_EQ(b.generation(0, 0), 0u);
}

TEST(DistributionMap, FigureMap) {
  auto m = figure_map(7);
  EXPECT_EQ(owner(m, 0, 1), 0u);
  EXPECT_EQ(owner(m, 1, 2), 0u);
  EXPECT_EQ(owner(m, 3, 5), 0u);
  EXPECT_NE(owner(m, 0, 0), 0u);
}

TEST(DistributionMap, BlockCyclic) {
  auto m = DistributionMap::block_cyclic(4, 6, 2, 3);
  EXPECT_EQ(owner(m, 0, 0), 0u);
  EXPECT_EQ(owner(m, 0, 3), 0u);
  EXPECT_EQ(owner(m, 1, 1), 4u);
  EXPECT_EQ(m.rank_count(), 6u);
}

TEST(DistributionMap, BlockCyclicIsPeriodic) {
  auto m = DistributionMap::block_cyclic(6, 6, 3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(m.owner(i, j), m.owner(i + 3, j));
      EXPECT_EQ(m.owner(i, j), m.owner(i, j + 3));
      EXPECT_EQ(m.owner(i, j), m.owner(i + 3, j + 3));
    }
}

TEST(DistributionMap, BlockCyclicMatchesMeshEnumeration) {
  for (auto ord : {RankOrdering::row_major, RankOrdering::col_major})
    for (std::size_t p = 1; p <= 4; ++p)
      for (std::size_t q = 1; q <= 4; ++q) {
        // lay the mesh out explicitly and tile it over the grid
        std::vector<std::vector<std::size_t>> mesh(p, std::vector<std::size_t>(q));
        std::size_t rank = 0;
        if (ord == RankOrdering::row_major) {
          for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < q; ++b) mesh[a][b] = rank++;
        } else {
          for (std::size_t b = 0; b < q; ++b)
            for (std::size_t a = 0; a < p; ++a) mesh[a][b] = rank++;
        }
        auto m = DistributionMap::block_cyclic(10, 10, p, q, ord);
        for (std::size_t i = 0; i < 10; ++i)
          for (std::size_t j = 0; j < 10; ++j) ASSERT_EQ(m.owner(i, j), mesh[i % p][j % q]);
      }
}

TEST(DistributionMap, DefaultMapIsTotal) {
  for (std::size_t ranks : {1, 2, 3, 4, 6, 9, 10}) {
    auto m = DistributionMap::default_map(8, 8, ranks);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_LT(m.owner(i, j), ranks);
  }
  EXPECT_THROW(DistributionMap::default_map(2, 2, 0), std::invalid_argument);
}

TEST(DistributionMap, RejectsOutOfRange) {
  auto m = DistributionMap::block_cyclic(3, 3, 2, 2);
  EXPECT_THROW(m.owner(3, 0), std::out_of_range);
  EXPECT_THROW(m.owner(0, 3), std::out_of_range);
  EXPECT_THROW(DistributionMap::block_cyclic(3, 3, 0, 2), std::invalid_argument);
}

TEST(Scatter, RoundTripUnderFigureMap) {
  const Matrix a = oracle::random_matrix(40, 11);
  auto parts = scatter(a, 6, figure_map(7));
  EXPECT_EQ(parts.size(), 4u);
  EXPECT_TRUE(gather(parts, 40, 6) == a);
}

TEST(Scatter, SingleRank) {
  const Matrix a = oracle::random_matrix(10, 2);
  auto parts = scatter(a, 3, DistributionMap::default_map(4, 4, 1));
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0].size(), 16u);
  EXPECT_TRUE(gather(parts, 10, 3) == a);
}

TEST(Scatter, RejectsMismatch) {
  const Matrix a = oracle::random_matrix(10, 2);
  EXPECT_THROW(scatter(a, 3, DistributionMap::default_map(3, 3, 2)), std::invalid_argument);
  EXPECT_THROW(scatter(Matrix(3, 4), 2, DistributionMap::default_map(2, 2, 1)), std::invalid_argument);
}

TEST(MatrixFiles, TextRoundTrip) {
  const Matrix a = oracle::random_matrix(6, 4);
  std::stringstream s;
  write_matrix_text(s, a);
  const Matrix b = read_matrix_text(s);
  EXPECT_LE(oracle::fro_diff(a, b), 1e-15);
}

TEST(MatrixFiles, BinaryRoundTripIsBitwise) {
  const Matrix a = oracle::random_matrix(9, 5, -1e200, 1e200);
  std::stringstream s;
  write_matrix_binary(s, a);
  EXPECT_EQ(s.str().substr(0, 8), "TEIGMAT1");
  EXPECT_EQ(s.str().size(), 16u + 81u * 8u);
  EXPECT_TRUE(read_matrix_binary(s) == a);
}

TEST(MatrixFiles, TextLayoutIsRowMajor) {
  std::stringstream s("2\n1 2\n3 4\n");
  const Matrix a = read_matrix_text(s);
  EXPECT_EQ(a(0, 1), 2.0);
  EXPECT_EQ(a(1, 0), 3.0);
}

TEST(MatrixFiles, Malformed) {
  std::stringstream trunc("3\n1 2 3\n4 5\n");
  EXPECT_THROW(read_matrix_text(trunc), std::runtime_error);
  std::stringstream bad("TEIGMATX");
  EXPECT_THROW(read_matrix_binary(bad), std::runtime_error);
}
