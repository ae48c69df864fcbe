#pragma once

// Diagonal block structure of a real Schur form and the 2x2 standardization
// that keeps complex pairs in the form [a b; c a] with b*c < 0.

#include <complex>

#include "taskeig/tile_core.hpp"
#include "taskeig/transform_kernels.hpp"

namespace taskeig {

struct DiagBlock {
  std::size_t start = 0;
  std::size_t size = 1;  // 1 or 2
  friend bool operator==(const DiagBlock&, const DiagBlock&) = default;
};

/// Eigenvalue of a block: real when im == 0, otherwise the pair re +- i*im, im > 0.
struct BlockEigenvalue {
  double re = 0.0;
  double im = 0.0;
};

struct SchurStructure {
  std::vector<DiagBlock> blocks;
  std::vector<BlockEigenvalue> eigen;  // aligned with blocks

  std::size_t order() const { return blocks.empty() ? 0 : blocks.back().start + blocks.back().size; }
};

/// Eigenvalue(s) of the 2x2 block [p q; r s].
inline BlockEigenvalue block_eigenvalue(double p, double q, double r, double s) {
  const double mean = 0.5 * (p + s);
  if (p == s) {
    if ((q < 0) != (r < 0) && q != 0.0 && r != 0.0) return {mean, std::sqrt(std::abs(q)) * std::sqrt(std::abs(r))};
    return {mean, 0.0};
  }
  const double half = 0.5 * (p - s);
  const double disc = half * half + q * r;
  if (disc < 0.0) return {mean, std::sqrt(-disc)};
  return {mean, 0.0};  // real pair: not a valid standardized block
}

/// Expanded list with one entry per eigenvalue, pairs as (+im, -im).
inline std::vector<std::complex<double>> eigenvalues(const SchurStructure& s) {
  std::vector<std::complex<double>> out;
  for (std::size_t i = 0; i < s.blocks.size(); ++i) {
    const auto& e = s.eigen[i];
    if (s.blocks[i].size == 1) {
      out.emplace_back(e.re, 0.0);
    } else {
      out.emplace_back(e.re, e.im);
      out.emplace_back(e.re, -e.im);
    }
  }
  return out;
}

template <typename Mat>
SchurStructure structure_of(const Mat& s, std::size_t n) {
  SchurStructure st;
  for (std::size_t i = 0; i < n;) {
    if (i + 1 < n && s(i + 1, i) != 0.0) {
      st.blocks.push_back({i, 2});
      st.eigen.push_back(block_eigenvalue(s(i, i), s(i, i + 1), s(i + 1, i), s(i + 1, i + 1)));
      i += 2;
    } else {
      st.blocks.push_back({i, 1});
      st.eigen.push_back({s(i, i), 0.0});
      i += 1;
    }
  }
  return st;
}

inline SchurStructure structure_of(const Matrix& s) { return structure_of(s, s.rows()); }
inline SchurStructure structure_of(const TiledMatrix& s) { return structure_of(s, s.order()); }

/// True when s is quasi-triangular with every 2x2 block carrying a complex pair.
template <typename Mat>
bool is_quasi_triangular(const Mat& s, std::size_t n) {
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = c + 2; r < n; ++r)
      if (s(r, c) != 0.0) return false;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (s(i + 1, i) == 0.0) continue;
    if (i + 2 < n && s(i + 2, i + 1) != 0.0) return false;
    if (block_eigenvalue(s(i, i), s(i, i + 1), s(i + 1, i), s(i + 1, i + 1)).im == 0.0) return false;
    ++i;
  }
  return true;
}

/// Standardizes [a b; c d] in place. Returns the rotation G such that
/// new = G^T old G, as a GivensRotation on indices (0, 1).
inline GivensRotation standardize_2x2(double& a, double& b, double& c, double& d) {
  constexpr double multpl = 4.0;
  const double safmn2 = std::ldexp(1.0, -485);
  const double safmx2 = 1.0 / safmn2;
  double cs = 1.0, sn = 0.0;
  auto sign = [](double x, double y) { return std::copysign(std::abs(x), y); };

  if (c == 0.0) {
  } else if (b == 0.0) {
    cs = 0.0;
    sn = 1.0;
    std::swap(a, d);
    b = -c;
    c = 0.0;
  } else if (a - d == 0.0 && std::signbit(b) != std::signbit(c)) {
  } else {
    double temp = a - d;
    double p = 0.5 * temp;
    const double bcmax = std::max(std::abs(b), std::abs(c));
    const double bcmis = std::min(std::abs(b), std::abs(c)) * sign(1.0, b) * sign(1.0, c);
    double scale = std::max(std::abs(p), bcmax);
    double z = (p / scale) * p + (bcmax / scale) * bcmis;
    if (z >= multpl * eps) {
      // real eigenvalues
      z = p + sign(std::sqrt(scale) * std::sqrt(z), p);
      a = d + z;
      d = d - (bcmax / z) * bcmis;
      const double tau = std::hypot(c, z);
      cs = z / tau;
      sn = c / tau;
      b = b - c;
      c = 0.0;
    } else {
      double sigma = b + c;
      for (int count = 0; count < 20; ++count) {
        scale = std::max(std::abs(temp), std::abs(sigma));
        if (scale >= safmx2) {
          sigma *= safmn2;
          temp *= safmn2;
        } else if (scale <= safmn2) {
          sigma *= safmx2;
          temp *= safmx2;
        } else {
          break;
        }
      }
      p = 0.5 * temp;
      double tau = std::hypot(sigma, temp);
      cs = std::sqrt(0.5 * (1.0 + std::abs(sigma) / tau));
      sn = -(p / (tau * cs)) * sign(1.0, sigma);

      const double aa = a * cs + b * sn, bb = -a * sn + b * cs;
      const double cc = c * cs + d * sn, dd = -c * sn + d * cs;
      a = aa * cs + cc * sn;
      b = bb * cs + dd * sn;
      c = -aa * sn + cc * cs;
      d = -bb * sn + dd * cs;

      temp = 0.5 * (a + d);
      a = temp;
      d = temp;
      if (c != 0.0) {
        if (b != 0.0) {
          if (std::signbit(b) == std::signbit(c)) {
            // real eigenvalues after all: triangularize
            const double sab = std::sqrt(std::abs(b)), sac = std::sqrt(std::abs(c));
            p = sign(sab * sac, c);
            tau = 1.0 / std::sqrt(std::abs(b + c));
            a = temp + p;
            d = temp - p;
            b = b - c;
            c = 0.0;
            const double cs1 = sab * tau, sn1 = sac * tau;
            temp = cs * cs1 - sn * sn1;
            sn = cs * sn1 + sn * cs1;
            cs = temp;
          }
        } else {
          b = -c;
          c = 0.0;
          temp = cs;
          cs = -sn;
          sn = temp;
        }
      }
    }
  }
  return {cs, sn, 0, 1};
}

/// Standardizes the 2x2 block at `i` of a dense quasi-triangular matrix,
/// updating rows/columns within [lo, hi) and accumulating into z columns.
/// Returns true when the block stays a complex pair.
inline bool standardize_block(Matrix& t, std::size_t i, std::size_t lo, std::size_t hi, Matrix* z) {
  double a = t(i, i), b = t(i, i + 1), c = t(i + 1, i), d = t(i + 1, i + 1);
  GivensRotation g = standardize_2x2(a, b, c, d);
  g.i = i;
  g.j = i + 1;
  t(i, i) = a;
  t(i, i + 1) = b;
  t(i + 1, i) = c;
  t(i + 1, i + 1) = d;
  if (g.c != 1.0 || g.s != 0.0) {
    apply_left(g, t, i + 2, hi);
    apply_right(g, t, lo, i);
    if (z) apply_right(g, *z, 0, z->rows());
  }
  return c != 0.0;
}

}  // namespace taskeig
