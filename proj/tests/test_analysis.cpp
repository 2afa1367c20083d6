#include <doctest.h>

#include <cmath>

#include "dskd/analysis.hpp"
#include "dskd/rng.hpp"
#include "test_support.hpp"

using namespace dskd;

namespace {

// Double-loop oracle for both structure kinds.
Matrix structure_oracle(const Matrix& h, StructureKind kind) {
  const std::size_t n = h.rows(), d = h.cols();
  Matrix out(n, n);
  auto dot = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += h(i, c) * h(j, c);
    return s;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (kind == StructureKind::cosine) {
      for (std::size_t j = 0; j < n; ++j)
        out(i, j) = dot(i, j) / (std::sqrt(dot(i, i)) * std::sqrt(dot(j, j)));
    } else {
      double row_sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) row_sum += dot(i, k);
      for (std::size_t j = 0; j < n; ++j) out(i, j) = dot(i, j) / row_sum;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("structure matrices match the double-loop oracle") {
  Rng rng(61);
  Matrix h = gaussian_matrix(rng, 12, 5);
  for (StructureKind kind : {StructureKind::cosine, StructureKind::inner_product}) {
    auto sm = structure_matrix(h, kind);
    CHECK(sm.kind == kind);
    CHECK(max_abs_diff(sm.values, structure_oracle(h, kind)) < 1e-12);
  }
}

TEST_CASE("cosine structure has unit diagonal and values in [-1, 1]") {
  Rng rng(62);
  Matrix h = gaussian_matrix(rng, 9, 4);
  auto sm = structure_matrix(h, StructureKind::cosine);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(sm.values(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 9; ++j) {
      CHECK(sm.values(i, j) <= 1.0 + 1e-12);
      CHECK(sm.values(i, j) >= -1.0 - 1e-12);
      CHECK(sm.values(i, j) == doctest::Approx(sm.values(j, i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("inner-product structure rows sum to one") {
  Rng rng(63);
  Matrix h = gaussian_matrix(rng, 7, 3);
  auto sm = structure_matrix(h, StructureKind::inner_product);
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) s += sm.values(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cosine structure is invariant to per-row rescaling") {
  Rng rng(64);
  Matrix h = gaussian_matrix(rng, 6, 4);
  Matrix scaled = h;
  for (std::size_t i = 0; i < 6; ++i) {
    const double s = 0.5 + rng.next_uniform() * 5.0;
    for (std::size_t j = 0; j < 4; ++j) scaled(i, j) *= s;
  }
  CHECK(max_abs_diff(structure_matrix(h, StructureKind::cosine).values,
                     structure_matrix(scaled, StructureKind::cosine).values) < 1e-12);
}

TEST_CASE("structure distance is an L1 metric on the entries") {
  Rng rng(65);
  Matrix a = gaussian_matrix(rng, 5, 3);
  Matrix b = gaussian_matrix(rng, 5, 3);
  Matrix c = gaussian_matrix(rng, 5, 3);
  auto sa = structure_matrix(a, StructureKind::cosine);
  auto sb = structure_matrix(b, StructureKind::cosine);
  auto sc = structure_matrix(c, StructureKind::cosine);
  CHECK(structure_distance(sa, sa) == 0.0);
  CHECK(structure_distance(sa, sb) == doctest::Approx(structure_distance(sb, sa)));
  CHECK(structure_distance(sa, sc) <=
        structure_distance(sa, sb) + structure_distance(sb, sc) + 1e-12);

  // Hand value on 1x1 structures.
  StructureMatrix x{Matrix::from_rows({{1.0}}), StructureKind::cosine};
  StructureMatrix y{Matrix::from_rows({{-0.25}}), StructureKind::cosine};
  CHECK(structure_distance(x, y) == doctest::Approx(1.25));
}

TEST_CASE("structure error paths name the offending row") {
  Matrix with_zero_row = Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}});
  CHECK_THROWS_WITH_AS(structure_matrix(with_zero_row, StructureKind::cosine),
                       doctest::Contains("row 1"), NumericError);
  CHECK_THROWS_AS(structure_matrix(Matrix(), StructureKind::cosine), DimensionError);

  StructureMatrix a{Matrix(2, 2), StructureKind::cosine};
  StructureMatrix b{Matrix(2, 2), StructureKind::inner_product};
  CHECK_THROWS_AS(structure_distance(a, b), DimensionError);
  StructureMatrix c{Matrix(3, 3), StructureKind::cosine};
  CHECK_THROWS_AS(structure_distance(a, c), DimensionError);
}
