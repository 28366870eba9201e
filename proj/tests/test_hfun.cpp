#include "doctest.h"

#include <cmath>

#include "peelkit/hfun.hpp"

using namespace peelkit;

TEST_CASE("small values") {
  ExactHCache half(mpq_class(1, 2), 12);
  CHECK(h_eval(half, 0, 1) == mpq_class(1, 4));
  ExactHCache zero(mpq_class(0), 12);
  CHECK(h_eval(zero, 0, 2) == mpq_class(3, 8));
  ExactHCache one(mpq_class(1), 12);
  CHECK(h_eval(one, 1, 4) == mpq_class(3, 2));
  ExactHCache neg(mpq_class(-2, 5), 12);
  CHECK(h_eval(neg, 3, 3) == 1);
  // series coefficient of (1-u)^{-5/2}(1+u/2)^{-1/2} at u^3
  CHECK(h_eval(half, 2, 5) == mpq_class(725, 128));
}

TEST_CASE("h(0, l) closed form in r") {
  for (auto r : {mpq_class(1, 2), mpq_class(0), mpq_class(-1, 3), mpq_class(1)}) {
    ExactHCache h(r, 4);
    CHECK(h_eval(h, 0, 1) == (1 - r) / 2);
    CHECK(h_eval(h, 0, 2) == (3 - 2 * r + 3 * r * r) / 8);
  }
}

TEST_CASE("batch") {
  ExactHCache one(mpq_class(1), 8);
  auto b = h_batch(one, 0, 2);
  REQUIRE(b.size() == 3);
  CHECK(b[0] == 1);
  CHECK(b[1] == 0);
  CHECK(b[2] == mpq_class(1, 2));
  CHECK(h_batch(ExactHCache(mpq_class(3, 7), 4), 1, 1) == std::vector<mpq_class>{1});
  ExactHCache third(mpq_class(1, 3), 8);
  auto c = h_batch(third, 0, 4);
  for (int l = 0; l <= 4; ++l) CHECK(c[l] == h_eval(third, 0, l));
}

TEST_CASE("vanishing below the order and unit diagonal") {
  FloatHCache h(0.3, 40);
  for (int k = kMinHOrder; k <= kMaxHOrder; ++k) {
    CHECK(h.at(k, k) == 1.0);
    CHECK(h.at(k, k - 1) == 0.0);
    CHECK(h.at(k, k - 5) == 0.0);
  }
  CHECK_THROWS_AS(h_eval(h, 5, 6), UnsupportedOrder);
  CHECK_THROWS_AS(h_eval(h, -5, 6), UnsupportedOrder);
}

TEST_CASE("difference relation, exact") {
  for (auto r : {mpq_class(1), mpq_class(1, 2), mpq_class(-3, 4), mpq_class(0)}) {
    ExactHCache h(r, 30);
    for (int k = kMinHOrder; k < kMaxHOrder; ++k)
      for (int l = k - 2; l < 30; ++l) CHECK(h.at(k, l) == h.at(k + 1, l + 1) - h.at(k + 1, l));
  }
}

TEST_CASE("float mode agrees with exact mode") {
  for (auto [num, den] : {std::pair{1, 1}, {1, 2}, {-9, 10}, {0, 1}, {99, 100}, {-1, 3}}) {
    mpq_class rq(num, den);
    ExactHCache ex(rq, 200);
    FloatHCache fl(rq.get_d(), 200);
    for (int k = kMinHOrder; k <= kMaxHOrder; ++k)
      for (int l = k; l <= 200; ++l) {
        const double e = ex.at(k, l).get_d();
        CHECK(std::abs(fl.at(k, l) - e) <= 1e-12 * std::max(std::abs(e), 1e-300) + 1e-300);
      }
  }
}

TEST_CASE("bipartite values") {
  ExactHCache h(mpq_class(1), 61);
  mpz_class binom;
  for (int l = 0; l <= 30; ++l) {
    mpz_bin_uiui(binom.get_mpz_t(), 2 * l, l);
    mpq_class want(binom, 1);
    want /= mpz_class(1) << (2 * l);
    CHECK(h.at(0, 2 * l) == want);
    CHECK(h.at(0, 2 * l + 1) == 0);
    if (l >= 1) CHECK(h.at(1, 2 * l) == mpq_class(2 * l) * want);
  }
}

TEST_CASE("h(0, 3) is a cubic in r") {
  // Lagrange interpolation through r = 0, 1/2, 1 and -1/2, evaluated at 1/3
  std::vector<mpq_class> xs{0, mpq_class(1, 2), 1, mpq_class(-1, 2)};
  std::vector<mpq_class> ys;
  for (auto& x : xs) ys.push_back(ExactHCache(x, 3).at(0, 3));
  mpq_class x0(1, 3), p = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mpq_class term = ys[i];
    for (std::size_t j = 0; j < xs.size(); ++j)
      if (j != i) term *= (x0 - xs[j]) / (xs[i] - xs[j]);
    p += term;
  }
  CHECK(p == ExactHCache(x0, 3).at(0, 3));
}

TEST_CASE("h(0) decreases along parity classes") {
  for (double r : {1.0, 0.5, 0.0, -0.7}) {
    FloatHCache h(r, 300);
    for (int l = 0; l + 2 <= 300; ++l) CHECK(h.at(0, l + 2) <= h.at(0, l) + 1e-15);
  }
}

TEST_CASE("asymptotics") {
  FloatHCache h0(0.0, 401), h1(1.0, 401), hm(0.5, 401);
  const double a = h0.at(0, 400) / h_asymptote(0, 400, 0.0);
  CHECK(a >= 0.995);
  CHECK(a <= 1.005);
  const double b = 0.5 * (h1.at(1, 400) + h1.at(1, 401)) / h_asymptote(1, 400, 1.0);
  CHECK(b >= 0.995);
  CHECK(b <= 1.005);
  const double c = hm.at(-2, 400) / h_asymptote(-2, 400, 0.5);
  CHECK(c >= 0.99);
  CHECK(c <= 1.01);
}

TEST_CASE("domain") {
  CHECK_THROWS(FloatHCache(-1.0, 4));
  CHECK_THROWS(FloatHCache(1.5, 4));
  FloatHCache h(0.2, 10);
  CHECK_THROWS_AS(h.at(0, 11), std::out_of_range);
}
