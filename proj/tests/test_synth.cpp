#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fixture.hpp"
#include "sewkit/losses.hpp"
#include "sewkit/random.hpp"
#include "sewkit/synth.hpp"

using namespace sewkit;

namespace {

double angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

}  // namespace

TEST(GenPattern, SkirtWaistWidth) {
  SkirtSpec s;
  s.waist_girth = 80.0;
  s.flare = 0.2;
  const SewingPattern p = gen_pattern({s, 1});
  for (const char* id : {"waistband-front", "waistband-back"}) {
    EXPECT_NEAR(p.panel(id).edges[2].length(), 40.0, 0.01) << id;
  }
}

TEST(GenPattern, Deterministic) {
  for (const auto& c : garment_categories()) {
    const GarmentSpec spec = sample_spec(c, 99);
    EXPECT_EQ(gen_pattern(spec), gen_pattern(spec)) << c;
  }
}

TEST(GenPattern, OutOfRangeSpec) {
  SkirtSpec s;
  s.flare = 0.5;
  try {
    gen_pattern({s, 0});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), "out-of-range");
  }
}

TEST(GenPattern, FuzzedSpecsValidate) {
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& c = garment_categories()[i % 4];
    const SewingPattern p = gen_pattern(sample_spec(c, derive_seed(2024, i)));
    bad += !validate(p, default_registry()).empty();
    // and the text format takes it back unchanged
    if (i % 50 == 0) EXPECT_EQ(parse_pattern(serialize_pattern(p)), p);
  }
  EXPECT_EQ(bad, 0);
}

TEST(AnalyticDrape, CylinderIsometry) {
  SkirtSpec s;
  s.flare = 0.0;
  s.waist_girth = 72.0;
  const GarmentSpec spec{s, 3};
  const SewingPattern p = gen_pattern(spec);
  const AnalyticDrape drape = analytic_drape(spec, p);
  const double r = 72.0 / (2 * std::numbers::pi);
  // Two points on one horizontal line of the front panel.
  const SeamedEdge& bottom = p.panel("skirt-front").edges[0];
  const Vec2 a = bottom.start + Vec2(2.0, 10.0);
  for (double d : {1.0, 5.0, 20.0, 30.0}) {
    const Vec2 b = a + Vec2(d, 0);
    const Vec3 pa = *drape.position("skirt-front", a), pb = *drape.position("skirt-front", b);
    EXPECT_LE((pa - pb).norm(), d + 1e-9);
    EXPECT_NEAR(std::abs(pa.y() - pb.y()), 0.0, 1e-9);
    const Vec3 ra(pa.x(), 0, pa.z()), rb(pb.x(), 0, pb.z());
    EXPECT_NEAR(ra.norm(), r, 1e-9);
    EXPECT_NEAR(r * angle(ra, rb), d, 1e-9);
  }
}

TEST(AnalyticDrape, BakedMapsAreIsometricAndSewn) {
  for (const auto& c : garment_categories()) {
    const Sample s = make_sample(sample_spec(c, 5), c);
    std::vector<MaskMap> masks;
    std::vector<PositionMap> maps;
    for (const auto& b : s.maps) {
      masks.push_back(b.mask);
      maps.push_back(b.positions);
    }
    const StitchSampler st(s.outline, masks);
    EXPECT_LT(loss_inn(maps, masks).value, 1e-3 * kPixelPitch) << c;
    EXPECT_LT(loss_int(maps, st).value, 1e-3 * kPixelPitch) << c;
  }
}

TEST(AnalyticDrape, ConeNormals) {
  SkirtSpec s;
  s.flare = 0.3;
  const GarmentSpec spec{s, 4};
  const Sample smp = make_sample(spec, "cone");
  const AnalyticDrape drape = analytic_drape(spec, smp.pattern);
  const double r = s.waist_girth / (2 * std::numbers::pi);  // smallest radius
  double worst = 0.0;
  int checked = 0;
  for (std::size_t t = 0; t < smp.maps.size(); ++t) {
    const BakedPanel& b = smp.maps[t];
    const std::string& id = smp.outline.panels[t].id;
    for (int i = 1; i + 1 < b.mask.rows(); ++i) {
      for (int j = 1; j + 1 < b.mask.cols(); ++j) {
        // central stencils only
        if (!b.mask.inside(i, j) || !b.mask.inside(i - 1, j) || !b.mask.inside(i + 1, j) ||
            !b.mask.inside(i, j - 1) || !b.mask.inside(i, j + 1))
          continue;
        const auto n = drape.normal(id, b.mask.frame.pixel_center(i, j));
        ASSERT_TRUE(n.has_value());
        worst = std::max(worst, angle(*n, b.normals.point(b.normals.index(i, j))));
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000);
  EXPECT_LT(worst, 2 * kPixelPitch / r);
}

TEST(GenDataset, ByteIdenticalRuns) {
  const auto& cats = garment_categories();
  const auto a = gen_dataset(10, cats, 7);
  const auto b = gen_dataset(10, cats, 7);
  const auto da = fixture::scratch("gen-a"), db = fixture::scratch("gen-b");
  write_dataset(da, a);
  write_dataset(db, b);
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(da)) {
    const auto name = entry.path().filename();
    EXPECT_EQ(fixture::read(entry.path()), fixture::read(db / name)) << name;
    ++files;
  }
  EXPECT_EQ(files, 31);
  const auto manifest = read_manifest(da / "manifest.json");
  ASSERT_EQ(manifest.size(), 10u);
  EXPECT_EQ(manifest[3].category, cats[3]);
}

TEST(GenDataset, Stratified) {
  const auto& cats = garment_categories();
  const auto data = gen_dataset(100, cats, 1);
  std::map<std::string, int> got;
  for (const auto& s : data) got[s.pattern.category]++;
  for (const auto& c : cats) EXPECT_LE(std::abs(got[c] - 25), 1) << c;
}

TEST(GenDataset, PcaRoundtripAtH12) {
  // 200 outlines are enough here; baking is not needed for contours.
  std::vector<GarmentOutline> outlines;
  std::vector<std::vector<std::optional<GroupTensor>>> tensors;
  for (int i = 0; i < 200; ++i) {
    const GarmentSpec spec = sample_spec(garment_categories()[i % 4], derive_seed(8, i));
    outlines.push_back(outline_of(gen_pattern(spec)));
    tensors.push_back(group_tensors(outlines.back(), default_registry()));
  }
  const BasisRegistry bases = fit_bases(default_registry(), tensors, 12);
  double total = 0.0;
  for (int i = 0; i < 200; ++i) {
    Embedding e = zero_embedding(bases.size(), 12);
    for (int g = 0; g < bases.size(); ++g) {
      if (!tensors[i][g]) continue;
      e.presence(g) = true;
      e.coefficients.row(g) = bases.bases[g]->project(*tensors[i][g]).transpose();
    }
    const auto rec = decode_contours(e, bases);
    double sum = 0.0;
    int n = 0;
    for (int g = 0; g < bases.size(); ++g) {
      if (!tensors[i][g]) continue;
      for (int k = 0; k < tensors[i][g]->size() / 2; ++k) {
        sum += (rec[g]->values.segment<2>(2 * k) - tensors[i][g]->values.segment<2>(2 * k)).norm();
        ++n;
      }
    }
    total += sum / n;
  }
  EXPECT_LT(total / 200, 0.5);
}
