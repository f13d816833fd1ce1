#include <doctest.h>

#include <cmath>
#include <string>

#include "mivkoz/errors.hpp"
#include "mivkoz/process_model.hpp"

using namespace mivkoz;

TEST_CASE("corner ranges") {
  CHECK_NOTHROW(validate_corner(ProcessCorner::nominal()));
  ProcessCorner c;
  c.t_ox = 0.1;
  try {
    validate_corner(c);
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(e.field() == "t_ox");
    CHECK(std::string(e.what()).find("0.25") != std::string::npos);
  }
  c = {};
  c.n_sub = 1e19;
  CHECK_THROWS_AS(validate_corner(c), RangeError);
  c.n_src = 1e21;
  CHECK_NOTHROW(validate_corner(c, CornerLimits::koz_study()));
  c = {};
  c.n_src = 1e17;
  c.n_sub = 1e17;
  CHECK_THROWS_AS(validate_corner(c), RangeError);
}

TEST_CASE("gaussian spread puts the junction at the source depth") {
  // sigma = d / sqrt(ln(n_src / n_sub)), d = 7 nm, nominal corner.
  const ProcessCorner c;
  CHECK(c.gaussian_sigma(7.0) == doctest::Approx(3.2619342124925925).epsilon(1e-12));
  const auto prof = DopingProfile::gaussian_donor(c.n_src, c.gaussian_sigma(7.0), c.n_sub);
  CHECK(std::abs(prof.net_at(7.0)) < 1e-6 * c.n_sub);
  CHECK(prof.donor_at(0.0) == c.n_src);
}

TEST_CASE("placement validity") {
  const DeviceGeometry g;
  const ProcessCorner c;
  PlacementScenario s;
  for (double d : {0.0, -5.0}) {
    s.d_sep = d;
    CHECK_THROWS_AS(build_layout(g, c, s), GeometryError);
  }
  s.d_sep = 1.0;
  CHECK_NOTHROW(build_layout(g, c, s));
  // Horizontal: the MIV faces the source end.
  s.orientation = Orientation::Horizontal;
  s.d_sep = 20.0;
  const DeviceLayout h = build_layout(g, c, s);
  const ContactSpec* miv = h.contact("miv");
  REQUIRE(miv != nullptr);
  CHECK(miv->patch.hi[0] <= -20.0 + 1e-12);
  // Vertical MIV too large to clear the guard ring is still legal on the far side.
  s = {};
  s.d_offset = 200.0;
  CHECK_NOTHROW(build_layout(g, c, s));
}

TEST_CASE("vertical MIV sits d_sep beyond the active edge, liner included") {
  const DeviceGeometry g;
  ProcessCorner c;
  c.t_miv = 40.0;
  c.t_ox = 2.0;
  PlacementScenario s;
  s.d_sep = 30.0;
  const DeviceLayout l = build_layout(g, c, s);
  double liner_lo = 1e300;
  for (const auto& b : l.boxes) {
    if (b.region == Region::MivLiner) liner_lo = std::min(liner_lo, b.box.lo[1]);
  }
  CHECK(liner_lo == doctest::Approx(g.width + 30.0));
  CHECK(l.count(Region::MivMetal) == 1);
}

TEST_CASE("layout boxes tile the bounds") {
  PlacementScenario s;
  s.d_offset = 30.0;
  const DeviceLayout l = build_layout(DeviceGeometry{}, ProcessCorner{}, s);
  double vol = 0.0;
  for (std::size_t i = 0; i < l.boxes.size(); ++i) {
    vol += l.boxes[i].box.volume();
    for (std::size_t j = i + 1; j < l.boxes.size(); ++j) {
      CHECK_FALSE(l.boxes[i].box.overlaps(l.boxes[j].box));
    }
  }
  CHECK(vol == doctest::Approx(l.bounds.volume()).epsilon(1e-12));
}

TEST_CASE("mirrored offsets give mirrored layouts") {
  const DeviceGeometry g;
  const ProcessCorner c;
  PlacementScenario a, b;
  a.d_offset = 50.0;
  b.d_offset = -50.0;
  const DeviceLayout la = build_layout(g, c, a);
  const DeviceLayout lb = build_layout(g, c, b);
  const double xc = g.channel_center_x();
  CHECK(la.bounds.lo[0] == doctest::Approx(2 * xc - lb.bounds.hi[0]));
  const auto* ma = la.contact("miv");
  const auto* mb = lb.contact("miv");
  CHECK(ma->patch.lo[0] - xc == doctest::Approx(xc - mb->patch.hi[0]));
}

TEST_CASE("layout fingerprints") {
  const DeviceGeometry g;
  ProcessCorner c;
  PlacementScenario s;
  const auto f1 = build_layout(g, c, s).fingerprint();
  CHECK(f1 == build_layout(g, c, s).fingerprint());
  s.d_sep = 60.0;
  CHECK(f1 != build_layout(g, c, s).fingerprint());
  // Without the MIV the domain still encloses its footprint, so placements
  // that keep the bounds share a baseline and others do not.
  ProcessCorner c2 = c;
  PlacementScenario s2 = s;
  s2.d_offset = 10.0;  // footprint stays inside the x extent of the active region
  CHECK(build_layout(g, c, s.without_miv()).fingerprint() ==
        build_layout(g, c2, s2.without_miv()).fingerprint());
  s2.d_sep = 20.0;
  CHECK(build_layout(g, c, s.without_miv()).fingerprint() !=
        build_layout(g, c2, s2.without_miv()).fingerprint());
  CHECK(build_layout(g, c, s.without_miv()).count(Region::MivMetal) == 0);
  c2.n_sub = 1e16;
  CHECK(build_layout(g, c, s.without_miv()).fingerprint() !=
        build_layout(g, c2, s.without_miv()).fingerprint());
}

TEST_CASE("corner enumeration") {
  CornerAxes axes;
  axes.n_src = {1e20, 1e19};
  axes.n_sub_ratios = {100.0, 1000.0};
  axes.h_sub = {50.0, 25.0};
  const auto corners = enumerate_corners(axes, CornerLimits::koz_study());
  CHECK(corners.size() == 8);
  for (std::size_t i = 1; i < corners.size(); ++i) {
    CHECK(corner_less(corners[i - 1], corners[i]));
  }
  for (const auto& c : corners) {
    const double r = c.n_src / c.n_sub;
    CHECK((std::abs(r - 100.0) < 1e-9 || std::abs(r - 1000.0) < 1e-9));
  }
}

TEST_CASE("bias magnitude limit") {
  CHECK_NOTHROW(validate_bias({1.0, 1.0, 0.0, 1.0}));
  CHECK_THROWS_AS(validate_bias({2.5, 1.0, 0.0, 1.0}), RangeError);
}
