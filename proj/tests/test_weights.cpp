#include "doctest.h"

#include <cmath>

#include "peelkit/hfun.hpp"
#include "peelkit/weights.hpp"

using namespace peelkit;

TEST_CASE("validate") {
  auto quad = validate(WeightSequence::exact({{4, mpq_class(1, 12)}}));
  CHECK(quad.valid());
  CHECK(quad.bipartite);
  CHECK(quad.lattice_span == 1);
  auto tri = validate(WeightSequence::numeric({{3, 0.2}}));
  CHECK(tri.valid());
  CHECK_FALSE(tri.bipartite);
  auto two = validate(WeightSequence::numeric({{2, 0.5}}));
  CHECK_FALSE(two.non_degenerate);
  CHECK_FALSE(two.valid());
  CHECK_FALSE(validate(WeightSequence::numeric({})).valid());
  CHECK_FALSE(validate(WeightSequence::numeric({{3, -0.1}, {4, 0.1}})).valid());
  // hexangulations: vertex counts move in steps of 2, still a valid sequence
  auto hex = validate(WeightSequence::numeric({{6, 0.01}}));
  CHECK(hex.valid());
  CHECK(hex.lattice_span == 2);
}

TEST_CASE("nu_from_q and back") {
  const double c = 2.0 * std::sqrt(2.0);
  auto pos = nu_from_q(WeightSequence::exact({{4, mpq_class(1, 12)}}), c, 1.0);
  CHECK(pos.at(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(pos.at(-2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(pos.at(-1) == 0.0);
  CHECK(nu_from_q(WeightSequence::numeric({{3, 0.01}}), 10.0, 0.0).nu_m2 == doctest::Approx(0.02));
  CHECK_THROWS(nu_from_q(WeightSequence::numeric({{3, 0.01}}), 2.0, 0.0));

  auto tri = preset_odd_angulation(1);
  const auto& cf = *tri.closed_form;
  auto tpos = nu_from_q(tri.q, cf.c_plus, cf.r);
  const auto h1 = h_coefficients(cf.r, 1, 3);
  CHECK(tpos.at(1) == doctest::Approx(1.0 / h1[1]).epsilon(1e-10));
  auto back = q_from_nu(tpos);
  CHECK(std::abs(back.q(3) - tri.q.q(3)) <= 1e-14);

  StepLawPositive s;
  s.nu = {0.0, 0.0, 0.0, 2.0 / 3.0};
  s.nu_m2 = 0.25;
  s.r = 1.0;
  s.c_plus = c;
  CHECK(q_from_nu(s).q(4) == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("exact dictionary round trip") {
  std::map<int, mpq_class> q{{4, mpq_class(1, 12)}, {6, mpq_class(1, 500)}, {2, mpq_class(1, 7)}};
  mpq_class c2(8);
  auto nu = nu_from_q_exact(q, c2);
  CHECK(nu.at(2) == mpq_class(2, 3));
  auto back = q_from_nu_exact(nu, 2 / c2);
  CHECK(back == q);
}

TEST_CASE("geometric presets") {
  auto g3 = preset_geometric(3.0);
  const double b = 1.0 / (2.0 * std::sqrt(3.0));
  for (int k = 1; k <= 8; ++k) CHECK(g3.q.q(k) == doctest::Approx(std::pow(b, k)).epsilon(1e-14));
  CHECK(g3.closed_form->r == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(g3.closed_form->L_nu == doctest::Approx(5.0).epsilon(1e-15));
  CHECK_THROWS_AS(preset_geometric(1.0), std::domain_error);
  CHECK_THROWS_AS(preset_geometric(0.5), std::domain_error);
}

TEST_CASE("geometric duality") {
  // H -> (H+3)/(H-1) maps q_k to q_k A(H)^{k/2-2}, A(H) = 16H/((H+3)(H-1)^3)
  for (double H : {2.0, 5.0, 1.5, 9.0}) {
    const double Hd = (H + 3.0) / (H - 1.0);
    const double A = 16.0 * H / ((H + 3.0) * std::pow(H - 1.0, 3));
    auto q = preset_geometric(H).q, qd = preset_geometric(Hd).q;
    for (int k = 1; k <= 8; ++k)
      CHECK(qd.q(k) == doctest::Approx(q.q(k) * std::pow(A, 0.5 * k - 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("two_p_angulation closed forms") {
  auto quad = preset_two_p_angulation(2);
  CHECK(quad.q.exact_values().at(4) == mpq_class(1, 12));
  CHECK(quad.closed_form->c_plus == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(quad.closed_form->L_nu == doctest::Approx(4.0 / 3.0));
  CHECK(preset_two_p_angulation(3).q.exact_values().at(6) == mpq_class(2, 135));
  CHECK_THROWS(preset_two_p_angulation(1));
}

TEST_CASE("odd angulations") {
  auto tri = preset_odd_angulation(1);
  CHECK(tri.closed_form->r == doctest::Approx(2.0 * std::sqrt(3.0) - 3.0).epsilon(1e-15));
  for (int p = 2; p <= 4; ++p) {
    auto pre = preset_odd_angulation(p);
    CHECK(pre.q.max_degree() == 2 * p + 1);
    CHECK(pre.closed_form->r > -1.0);
    CHECK(pre.closed_form->r < 1.0);
  }
  CHECK_THROWS(preset_odd_angulation(0));
}

TEST_CASE("pointed disk") {
  CHECK(pointed_disk(0, 3.1, 0.2) == 1.0);
  CHECK(pointed_disk(2, 2.0 * std::sqrt(2.0), 1.0) == doctest::Approx(4.0).epsilon(1e-15));
  for (double H : {3.0, 5.0}) {
    auto cf = *preset_geometric(H).closed_form;
    const double zp = std::pow((1 + cf.r) * cf.c_plus / 4.0, 2), zd = (1 - cf.r) * cf.c_plus / 2.0;
    for (int l = 0; l <= 12; ++l)
      CHECK(pointed_disk_mobile(l, zp, zd) == doctest::Approx(pointed_disk(l, cf.c_plus, cf.r)).epsilon(1e-13));
  }
  auto quad = *preset_two_p_angulation(2).closed_form;
  const double zp = std::pow(2 * quad.c_plus / 4.0, 2);
  for (int l = 0; l <= 12; ++l)
    CHECK(pointed_disk_mobile(l, zp, 0.0) == doctest::Approx(pointed_disk(l, quad.c_plus, 1.0)).epsilon(1e-13));
}

TEST_CASE("deformation and scaling") {
  auto q = WeightSequence::numeric({{3, 0.1}, {4, 0.2}});
  auto qg = q.deformed(0.25);
  CHECK(qg.q(3) == doctest::Approx(0.1 * 0.5));
  CHECK(qg.q(4) == doctest::Approx(0.2 * 0.25));
  CHECK(q.scaled(3.0).q(4) == doctest::Approx(0.6));
  CHECK_THROWS(q.deformed(0.0));
  CHECK_THROWS(q.deformed(1.5));
  auto geo = preset_geometric(3.0).q.deformed(0.5);
  CHECK(geo.q(5) == doctest::Approx(std::pow(0.5, 1.5) * preset_geometric(3.0).q.q(5)));
}

TEST_CASE("log-space weights keep deep terms representable") {
  auto g = preset_geometric(9.0).q;
  const double v = g.q_scaled(3000, 2.09, 2998);
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);
  CHECK(g.log_q(10) == doctest::Approx(std::log(g.q(10))));
}

TEST_CASE("parse_rational") {
  bool inexact = true;
  CHECK(parse_rational("1/12", &inexact) == mpq_class(1, 12));
  CHECK_FALSE(inexact);
  CHECK(parse_rational(" -3 ", &inexact) == -3);
  CHECK(parse_rational("6/8", &inexact) == mpq_class(3, 4));
  CHECK(parse_rational("0.25", &inexact) == mpq_class(1, 4));
  CHECK(inexact);
  CHECK_THROWS(parse_rational("abc", &inexact));
  CHECK_THROWS(parse_rational("1/0", &inexact));
}
