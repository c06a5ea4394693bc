#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fowler/errors.hpp"
#include "fowler/invariants.hpp"
#include "fowler/dynamics.hpp"
#include "oracle.hpp"

using namespace fowler;
using oracle::mp;
using oracle::to_d;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

IntegratorSettings span(double lo, double hi, IntegrationMode mode = IntegrationMode::Positive) {
  IntegratorSettings s;
  s.t_min = lo;
  s.t_max = hi;
  s.mode = mode;
  return s;
}

double max_diff(const FowlerState& a, const FowlerState& b) {
  return std::max({std::abs(a.w1 - b.w1), std::abs(a.w2 - b.w2), std::abs(a.dw1 - b.dw1),
                   std::abs(a.dw2 - b.dw2)});
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("rhs vanishes at the cylinder") {
  for (int N = 3; N <= 6; ++N) {
    auto sp = make_params(N, 1, 1.7, 0.6);
    auto d = rhs(sp, cylinder_state(sp).state);
    for (double x : d) CHECK(std::abs(x) < 1e-14);
  }
}

TEST_CASE("rhs example: N=3, w=(0.5,0.5), w'=0 gives w1''=0.0625") {
  auto sp = make_params(3, 1, 1, 1);
  auto d = rhs(sp, {0, 0.5, 0.5, 0, 0});
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
  CHECK(std::abs(d[2] - 0.0625) < 1e-16);
  CHECK(std::abs(d[3] - 0.0625) < 1e-16);
}

TEST_CASE("rhs signed extension is zero-continuous at w_i = 0") {
  for (int N : {3, 4, 5, 6, 8}) {
    auto sp = make_params(N, 1, 1, 1);
    auto d = rhs(sp, {0, 0.0, 0.7, 0, 0});
    CHECK(d[2] == 0.0);
    auto d2 = rhs(sp, {0, -0.0, -0.3, 0.1, 0.2});
    CHECK(d2[2] == 0.0);
    CHECK(std::isfinite(d2[3]));
  }
}

TEST_CASE("property: rhs against the arbitrary-precision field on signed states") {
  oracle::Gen g(11);
  for (int i = 0; i < 500; ++i) {
    const int N = g.integer(3, 8);
    auto sp = make_params(N, g.log_uniform(0.1, 10), g.log_uniform(0.1, 10), g.log_uniform(0.1, 10));
    FowlerState s{0, g.uniform(-2, 2), g.uniform(-2, 2), g.uniform(-2, 2), g.uniform(-2, 2)};
    auto d = rhs(sp, s);
    auto a = oracle::accel(N, sp.mu1, sp.mu2, sp.beta, {s.w1, s.w2, s.dw1, s.dw2});
    CHECK(d[0] == s.dw1);
    CHECK(d[1] == s.dw2);
    const double scale = 1 + std::abs(to_d(a[0])) + std::pow(2.0, 2 * sp.p);
    CHECK(std::abs(d[2] - to_d(a[0])) < 1e-14 * scale);
    CHECK(std::abs(d[3] - to_d(a[1])) < 1e-14 * scale);
  }
}

TEST_CASE("property: radial/Fowler transforms invert each other to 1e-13") {
  oracle::Gen g(12);
  for (int i = 0; i < 1000; ++i) {
    auto sp = make_params(g.integer(3, 8), 1, 1, 1);
    const double r = g.log_uniform(1e-3, 1e3);
    const double u = g.log_uniform(1e-2, 1e2), v = g.log_uniform(1e-2, 1e2);
    const double du = g.uniform(-10, 10), dv = g.uniform(-10, 10);
    auto s = to_fowler(sp, r, u, v, du, dv);
    auto back = to_radial(sp, s);
    CHECK(rel(back.r, r) < 1e-13);
    CHECK(rel(back.u, u) < 1e-13);
    CHECK(rel(back.v, v) < 1e-13);
    const double dscale = std::abs(du) + sp.delta * u / r;
    CHECK(std::abs(back.du - du) < 1e-13 * dscale);
    CHECK(std::abs(back.dv - dv) < 1e-13 * (std::abs(dv) + sp.delta * v / r));

    FowlerState f{g.uniform(-6, 6), g.log_uniform(1e-2, 1e2), g.log_uniform(1e-2, 1e2),
                  g.uniform(-3, 3), g.uniform(-3, 3)};
    auto rp = to_radial(sp, f);
    auto again = to_fowler(sp, rp.r, rp.u, rp.v, rp.du, rp.dv);
    CHECK(std::abs(again.t - f.t) < 1e-13 * std::max(1.0, std::abs(f.t)));
    CHECK(rel(again.w1, f.w1) < 1e-13);
    CHECK(rel(again.w2, f.w2) < 1e-13);
    CHECK(std::abs(again.dw1 - f.dw1) < 1e-13 * (std::abs(f.dw1) + sp.delta * f.w1));
    CHECK(std::abs(again.dw2 - f.dw2) < 1e-13 * (std::abs(f.dw2) + sp.delta * f.w2));
  }
}

TEST_CASE("unit-amplitude cylinder profile maps to w = 1, w' = 0") {
  for (int N = 3; N <= 6; ++N) {
    auto sp = make_params(N, 1, 1, 1);
    for (double r : {0.01, 1.0, 50.0}) {
      const double u = std::pow(r, -sp.delta), du = -sp.delta * std::pow(r, -sp.delta - 1);
      auto s = to_fowler(sp, r, u, u, du, du);
      CHECK(std::abs(s.w1 - 1) < 1e-14);
      CHECK(std::abs(s.dw1) < 1e-14);
      CHECK(s.t == doctest::Approx(-std::log(r)));
    }
  }
}

TEST_CASE("bubble profile at r=1 has w' = 0 (finite-difference radial derivative)") {
  auto sp = make_params(3, 1, 1, 1);
  const mp h("1e-20");
  const mp du = (oracle::standard_bubble(3, 1, 1 + h) - oracle::standard_bubble(3, 1, 1 - h)) / (2 * h);
  auto s = to_fowler(sp, 1.0, to_d(oracle::standard_bubble(3, 1, 1)), 0.5, to_d(du), 0.0);
  CHECK(std::abs(s.dw1) < 1e-15);
  CHECK(s.t == 0.0);
}

TEST_CASE("to_fowler rejects r <= 0") {
  auto sp = make_params(3, 1, 1, 1);
  CHECK_THROWS_AS(to_fowler(sp, 0.0, 1, 1, 0, 0), DomainError);
  CHECK_THROWS_AS(to_fowler(sp, -1.0, 1, 1, 0, 0), DomainError);
}

TEST_CASE("settings validation") {
  auto sp = make_params(3, 1, 1, 1);
  IntegratorSettings s;
  s.rel_tol = 0;
  CHECK_THROWS_AS(integrate(sp, {0, 0.5, 0.5, 0, 0}, s), DomainError);
  s = {};
  s.t_min = 1;
  s.t_max = 1;
  CHECK_THROWS_AS(integrate(sp, {1, 0.5, 0.5, 0, 0}, s), DomainError);
  s = {};
  CHECK_THROWS_AS(integrate(sp, {40, 0.5, 0.5, 0, 0}, s), DomainError);
  CHECK_THROWS_AS(integrate(sp, {0, NAN, 0.5, 0, 0}, {}), DomainError);
}

// Symmetric cylinders with beta < (p - 1) mu are centres in the transverse
// direction; a saddle one would amplify roundoff and leave the equilibrium.
TEST_CASE("stable cylinder orbit stays at the equilibrium") {
  for (int N = 3; N <= 6; ++N) {
    auto sp = make_params(N, 1, 1, 0.3);
    auto c = cylinder_state(sp).state;
    auto tr = integrate(sp, c, {});
    CHECK(tr.certified);
    CHECK(tr.drift < 1e-12);
    for (const auto& n : tr.nodes) CHECK(max_diff(n, c) < 1e-12);
    CHECK(tr.events.empty());
  }
}

TEST_CASE("bubble orbit N=3 over [-20, 20] tracks the closed form") {
  auto sp = make_params(3, 1, 1, 1);
  const double k = solve_coupling(sp).k;
  auto tr = integrate(sp, bubble_fowler(sp, 1.0, 0.0), span(-20, 20));
  CHECK(tr.certified);
  CHECK(tr.drift < 1e-9);
  CHECK(tr.events.empty());
  const double w0 = tr.initial.w1;
  for (const auto& n : tr.nodes) {
    if (std::abs(n.t) < 10) continue;
    const double exact = to_d(oracle::bubble_fowler(3, mp(k), 1, mp(n.t))[0]);
    CHECK(std::abs(n.w1 / exact - 1) < 0.1);
    // Far-field shape w(0) 2^delta e^{-delta |t|}.
    CHECK(n.w1 / (w0 * std::exp(-sp.delta * std::abs(n.t))) ==
          doctest::Approx(std::pow(2.0, sp.delta)).epsilon(0.1));
  }
}

TEST_CASE("sign change example: psi0 = 0.0379167 in signed mode") {
  auto sp = make_params(3, 1, 1, 1);
  FowlerState s{0, 0.5, 0.5, 0.3, -0.3};
  CHECK(psi(sp, s) == doctest::Approx(0.0379167).epsilon(1e-6));
  auto st = span(-50, 50, IntegrationMode::Signed);
  auto tr = integrate(sp, s, st);
  auto it = std::find_if(tr.events.begin(), tr.events.end(),
                         [](const Event& e) { return e.kind == EventKind::SignChange; });
  REQUIRE(it != tr.events.end());
  CHECK(std::abs(it->state.w(it->component)) < 1e-9);
  CHECK(it->t >= st.t_min);
  CHECK(it->t <= st.t_max);
}

TEST_CASE("property: nodes strictly ordered and interpolant continuous at joins") {
  oracle::Gen g(13);
  for (int i = 0; i < 20; ++i) {
    auto sp = make_params(g.integer(3, 6), 1, g.uniform(0.5, 2), g.uniform(0.2, 2));
    FowlerState s{0, g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1)};
    auto tr = integrate(sp, s, span(-10, 10, IntegrationMode::Signed));
    for (std::size_t j = 1; j < tr.nodes.size(); ++j) CHECK(tr.nodes[j].t > tr.nodes[j - 1].t);
    for (std::size_t j = 1; j < tr.segments.size(); ++j) {
      const auto& a = tr.segments[j - 1];
      const auto& b = tr.segments[j];
      CHECK(a.t_hi == b.t_lo);
      auto ya = a.eval(a.t_hi), yb = b.eval(b.t_lo);
      for (int c = 0; c < 4; ++c) CHECK(std::abs(ya[c] - yb[c]) < 1e-12 * (1 + std::abs(ya[c])));
    }
    for (std::size_t j = 0; j < tr.nodes.size(); ++j)
      CHECK(max_diff(tr.state_at(tr.nodes[j].t), tr.nodes[j]) < 1e-12);
  }
}

TEST_CASE("property: energy drift below 1e-8 max(1, |psi0|) on [-20, 20]") {
  oracle::Gen g(14);
  int certified = 0;
  for (int i = 0; i < 30; ++i) {
    auto sp = make_params(g.integer(3, 6), g.uniform(0.5, 2), g.uniform(0.5, 2), g.uniform(0.2, 2));
    FowlerState s{0, g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1)};
    auto tr = integrate(sp, s, span(-20, 20, IntegrationMode::Signed));
    // N = 6 orbits crossing zero many times may honestly miss the bound.
    if (sp.N <= 5) CHECK(tr.certified);
    if (!tr.certified) {
      CHECK(tr.drift > drift_bound(tr.psi0));
      continue;
    }
    ++certified;
    CHECK(tr.drift < 1e-8 * std::max(1.0, std::abs(tr.psi0)));
  }
  CHECK(certified >= 20);
}

TEST_CASE("property: time reversal returns the start with negated velocity") {
  oracle::Gen g(15);
  for (int i = 0; i < 30; ++i) {
    auto sp = make_params(g.integer(3, 6), g.uniform(0.5, 2), g.uniform(0.5, 2), g.uniform(0.2, 2));
    FowlerState s{0, g.uniform(0.2, 1), g.uniform(0.2, 1), g.uniform(-0.5, 0.5), g.uniform(-0.5, 0.5)};
    const double T = 3.0;
    auto fwd = integrate(sp, s, span(0, T, IntegrationMode::Signed));
    REQUIRE(fwd.t_end() == T);
    auto e = fwd.nodes.back();
    FowlerState rev{0, e.w1, e.w2, -e.dw1, -e.dw2};
    auto back = integrate(sp, rev, span(0, T, IntegrationMode::Signed));
    auto f = back.nodes.back();
    const double bound = fwd.error_estimate + back.error_estimate;
    CHECK(std::abs(f.w1 - s.w1) < bound);
    CHECK(std::abs(f.w2 - s.w2) < bound);
    CHECK(std::abs(f.dw1 + s.dw1) < bound);
    CHECK(std::abs(f.dw2 + s.dw2) < bound);
  }
}

TEST_CASE("property: halving tolerances moves the endpoint by less than 10x the error estimate") {
  oracle::Gen g(16);
  for (int i = 0; i < 20; ++i) {
    auto sp = make_params(g.integer(3, 6), 1, 1, g.uniform(0.2, 0.5));
    auto c = cylinder_state(sp).state;
    FowlerState s{0, c.w1 * g.uniform(0.8, 1.2), c.w2 * g.uniform(0.8, 1.2), g.uniform(-0.05, 0.05), 0};
    auto st = span(0, 10);
    auto a = integrate(sp, s, st);
    st.rel_tol /= 2;
    st.abs_tol /= 2;
    auto b = integrate(sp, s, st);
    REQUIRE(a.t_end() == 10);
    REQUIRE(b.t_end() == 10);
    CHECK(max_diff(a.nodes.back(), b.nodes.back()) < 10 * a.error_estimate);
  }
}

TEST_CASE("property: positive mode keeps every node positive before PositivityLoss") {
  oracle::Gen g(17);
  int losses = 0;
  for (int i = 0; i < 40; ++i) {
    auto sp = make_params(g.integer(3, 6), 1, 1, g.uniform(0.2, 2));
    FowlerState s{0, g.uniform(0.05, 1.5), g.uniform(0.05, 1.5), g.uniform(-1, 1), g.uniform(-1, 1)};
    auto tr = integrate(sp, s, {});
    double loss_lo = -INFINITY, loss_hi = INFINITY;
    for (const auto& e : tr.events) {
      if (e.kind != EventKind::PositivityLoss) continue;
      ++losses;
      if (e.t > 0) loss_hi = std::min(loss_hi, e.t);
      else loss_lo = std::max(loss_lo, e.t);
    }
    for (const auto& n : tr.nodes) {
      if (n.t > loss_lo && n.t < loss_hi) {
        CHECK(n.w1 > 0);
        CHECK(n.w2 > 0);
      }
    }
  }
  CHECK(losses > 0);
}

TEST_CASE("blow-up threshold and immediate terminal states") {
  auto sp = make_params(3, 1, 1, 1);
  auto tr = integrate(sp, {0, 2000, 1, 0, 0}, {});
  REQUIRE(!tr.events.empty());
  CHECK(tr.events.front().kind == EventKind::BlowUp);
  CHECK(tr.has_terminal_event());

  auto st = span(-5, 5);
  st.blowup_threshold = 1.2;
  auto tr2 = integrate(sp, {0, 1.0, 0.1, 2.0, 0}, st);
  bool blow = false;
  for (const auto& e : tr2.events) blow = blow || e.kind == EventKind::BlowUp;
  CHECK(blow);
}

TEST_CASE("step limit leaves the trajectory uncertified") {
  auto sp = make_params(3, 1, 1, 1);
  IntegratorSettings st;
  st.max_steps = 5;
  auto tr = integrate(sp, {0, 0.5, 0.4, 0.1, 0}, st);
  CHECK(tr.forward_status == RunStatus::StepLimit);
  CHECK_FALSE(tr.certified);
}

TEST_CASE("extrema: cylinder has none") {
  auto sp = make_params(3, 1, 1, 1);
  auto tr = integrate(sp, cylinder_state(sp).state, {});
  CHECK(detect_extrema(tr).empty());
}

TEST_CASE("extrema: bubble has one LocalMax per component at t = 0") {
  for (int N : {3, 4}) {
    auto sp = make_params(N, 1, 1, 1);
    auto tr = integrate(sp, bubble_fowler(sp, 1.0, 0.0), span(-8, 8));
    auto ev = detect_extrema(tr);
    REQUIRE(ev.size() == 2);
    for (const auto& e : ev) {
      CHECK(e.kind == EventKind::LocalMax);
      CHECK(std::abs(e.t) < 1e-9);
    }
    CHECK(ev[0].component != ev[1].component);
  }
}

TEST_CASE("extrema: perturbed cylinder alternates, matching a dense sign scan") {
  auto sp = make_params(3, 1, 1, 1);
  auto c = cylinder_state(sp).state;
  c.w1 += 1e-3;
  auto tr = integrate(sp, c, span(-20, 20));
  auto ev = detect_extrema(tr);
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<Event> mine;
    for (const auto& e : ev)
      if (e.component == comp) mine.push_back(e);
    CHECK(mine.size() > 4);
    for (std::size_t j = 1; j < mine.size(); ++j) CHECK(mine[j].kind != mine[j - 1].kind);
    // Oracle: sign changes of w' on 10^4 uniform samples.
    int changes = 0;
    double prev = tr.state_at(tr.t_begin()).dw(comp);
    for (int j = 1; j <= 10000; ++j) {
      const double t = tr.t_begin() + (tr.t_end() - tr.t_begin()) * j / 10000;
      const double d = tr.state_at(t).dw(comp);
      changes += (d > 0) != (prev > 0);
      prev = d;
    }
    CHECK(static_cast<int>(mine.size()) == changes);
  }
}

TEST_CASE("event kinds and statuses round-trip through their names") {
  for (auto k : {EventKind::SignChange, EventKind::BlowUp, EventKind::PositivityLoss,
                 EventKind::LocalMin, EventKind::LocalMax, EventKind::DegenerateCritical})
    CHECK(event_kind_from_string(to_string(k)) == k);
  for (auto s : {RunStatus::Completed, RunStatus::TerminalEvent, RunStatus::StepSizeUnderflow,
                 RunStatus::StepLimit})
    CHECK(run_status_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(event_kind_from_string("Nope"), DomainError);
}

}  // TEST_SUITE
