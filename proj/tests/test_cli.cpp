#include <gtest/gtest.h>

#include <cstdlib>
#include <initializer_list>

#include "cli.hpp"
#include "fixture.hpp"
#include "sewkit/mesh.hpp"
#include "sewkit/synth.hpp"

namespace fs = std::filesystem;

namespace {

int run(std::initializer_list<std::string> args) {
  std::vector<std::string> a{"sewkit"};
  a.insert(a.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : a) argv.push_back(s.c_str());
  return sewkit_main(static_cast<int>(argv.size()), argv.data());
}

// Dataset, registry and a one-epoch checkpoint shared by the tests below.
struct Workspace {
  fs::path dir;
  fs::path manifest;
  fs::path registry;
  fs::path checkpoint;
  std::vector<sewkit::ManifestEntry> entries;
};

const Workspace& workspace() {
  static const Workspace w = [] {
    Workspace w;
    w.dir = fixture::scratch("cli");
    const fs::path data = w.dir / "data";
    w.manifest = data / "manifest.json";
    w.registry = w.dir / "bases.swkb";
    w.checkpoint = w.dir / "decoder.swkc";
    EXPECT_EQ(run({"gen-data", "--n", "4", "--categories", "skirt", "--seed", "3", "--out", data.string()}), 0);
    EXPECT_EQ(run({"fit-pca", w.manifest.string(), "--out", w.registry.string()}), 0);
    EXPECT_EQ(run({"train", w.manifest.string(), "--registry", w.registry.string(), "--epochs", "1", "--batch", "2",
                   "--out", w.checkpoint.string()}),
              0);
    w.entries = sewkit::read_manifest(w.manifest);
    return w;
  }();
  return w;
}

}  // namespace

TEST(Cli, TrainWritesHistory) {
  const Workspace& w = workspace();
  EXPECT_TRUE(fs::exists(w.checkpoint));
  const std::string h = fixture::read(w.checkpoint.string() + ".history.csv");
  EXPECT_EQ(h.rfind("step,total,rec,inn,int,nor\n", 0), 0u);
  EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 3);
}

TEST(Cli, ReconstructFixture) {
  const Workspace& w = workspace();
  const fs::path out = w.dir / "g.obj";
  EXPECT_EQ(run({"reconstruct", fixture::data("skirt.pattern.json").string(), "--registry", w.registry.string(),
                 "--checkpoint", w.checkpoint.string(), "--out", out.string()}),
            0);
  const sewkit::TriMesh m = sewkit::parse_mesh(fixture::read(out));
  EXPECT_GT(m.face_count(), 0);
}

TEST(Cli, RegistryFromEnvironment) {
  const Workspace& w = workspace();
  const fs::path out = w.dir / "env.obj";
  setenv("SEWKIT_REGISTRY", w.registry.c_str(), 1);
  EXPECT_EQ(run({"reconstruct", w.entries[0].pattern.string(), "--checkpoint", w.checkpoint.string(), "--out",
                 out.string()}),
            0);
  unsetenv("SEWKIT_REGISTRY");
  EXPECT_EQ(run({"reconstruct", w.entries[0].pattern.string(), "--checkpoint", w.checkpoint.string(), "--out",
                 out.string()}),
            1);
}

TEST(Cli, InterpAlphaOneIsReconstruction) {
  const Workspace& w = workspace();
  const fs::path a = w.dir / "rec.obj", b = w.dir / "interp.obj";
  const std::string reg = w.registry.string(), ck = w.checkpoint.string();
  ASSERT_EQ(run({"reconstruct", w.entries[0].pattern.string(), "--registry", reg, "--checkpoint", ck, "--out",
                 a.string()}),
            0);
  ASSERT_EQ(run({"interp", w.entries[0].pattern.string(), w.entries[1].pattern.string(), "--alpha", "1.0",
                 "--registry", reg, "--checkpoint", ck, "--out", b.string()}),
            0);
  const auto ma = sewkit::parse_mesh(fixture::read(a)), mb = sewkit::parse_mesh(fixture::read(b));
  ASSERT_EQ(ma.vertex_count(), mb.vertex_count());
  for (int i = 0; i < ma.vertex_count(); ++i) EXPECT_LE((ma.vertices[i] - mb.vertices[i]).norm(), 1e-9);
}

TEST(Cli, EvalTable) {
  const Workspace& w = workspace();
  const fs::path out = w.dir / "eval.csv";
  ASSERT_EQ(run({"eval", w.manifest.string(), "--registry", w.registry.string(), "--checkpoint",
                 w.checkpoint.string(), "--samples", "500", "--out", out.string()}),
            0);
  const std::string csv = fixture::read(out);
  EXPECT_EQ(csv.rfind("id,chamfer,p2s,mgle\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Cli, EditEmbedding) {
  const Workspace& w = workspace();
  const fs::path out = w.dir / "edited.json";
  ASSERT_EQ(run({"edit", w.entries[0].pattern.string(), "--registry", w.registry.string(), "--set",
                 "skirt-body:0=1.5", "--out", out.string()}),
            0);
  const auto doc = nlohmann::json::parse(fixture::read(out));
  EXPECT_EQ(doc.at("coefficients")[1][0], 1.5);
  // editing an absent group
  EXPECT_EQ(run({"edit", w.entries[0].pattern.string(), "--registry", w.registry.string(), "--set", "torso:0=1",
                 "--out", out.string()}),
            1);
}

TEST(Cli, Sew) {
  const fs::path dir = fixture::scratch("cli-sew");
  EXPECT_EQ(run({"sew", fixture::data("skirt.pattern.json").string(), "--steps", "20", "--out",
                 (dir / "sewn.obj").string(), "--maps-out", (dir / "sewn.maps").string()}),
            0);
  EXPECT_TRUE(fs::exists(dir / "sewn.obj"));
  EXPECT_TRUE(fs::exists(dir / "sewn.maps"));
  EXPECT_EQ(run({"sew", fixture::data("skirt.pattern.json").string(), "--init", "sideways", "--out",
                 (dir / "x.obj").string()}),
            2);
}

TEST(Cli, Gradcheck) {
  const fs::path out = fixture::scratch("cli-grad") / "grad.csv";
  EXPECT_EQ(run({"gradcheck", "--sets", "2", "--out", out.string()}), 0);
  EXPECT_EQ(fixture::read(out).rfind("loss,max_relative_error,limit,pass\n", 0), 0u);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = fixture::scratch("cli-exit");
  EXPECT_EQ(run({"frobnicate"}), 64);
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"reconstruct", "--out", "x.obj"}), 1);
  EXPECT_EQ(run({"sew", (dir / "missing.json").string(), "--out", (dir / "x.obj").string()}), 1);
  auto bad = nlohmann::json::parse(fixture::skirt_text());
  bad["stitches"][0]["b"][0] = "ghost";
  const fs::path p = dir / "bad.json";
  std::ofstream(p) << bad.dump();
  EXPECT_EQ(run({"sew", p.string(), "--out", (dir / "x.obj").string()}), 2);
}
