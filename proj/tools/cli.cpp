#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sewkit/metrics.hpp"
#include "sewkit/random.hpp"
#include "sewkit/service.hpp"
#include "sewkit/solver.hpp"

namespace fs = std::filesystem;
using namespace sewkit;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("missing-file", "cannot open " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("io", "cannot write " + p.string());
  f << text;
}

SewingPattern load_pattern(const fs::path& p) { return parse_pattern(read_text(p)); }

BasisRegistry load_registry(const std::string& path) {
  std::string p = path;
  if (p.empty()) {
    if (const char* env = std::getenv("SEWKIT_REGISTRY")) p = env;
  }
  if (p.empty()) throw Error("missing-file", "no registry given (--registry or SEWKIT_REGISTRY)");
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("missing-file", "cannot open registry " + p);
  return read_basis_registry(f);
}

DecoderParams load_checkpoint(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("missing-file", "cannot open checkpoint " + p.string());
  return read_checkpoint(f);
}

MapContainer load_maps(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("missing-file", "cannot open maps " + p.string());
  return read_map_container(f);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int group_arg(const std::string& g, const GroupRegistry& reg) {
  if (const auto i = reg.group_index(g)) return *i;
  try {
    std::size_t used = 0;
    const int i = std::stoi(g, &used);
    if (used == g.size() && i >= 0 && i < reg.size()) return i;
  } catch (const std::exception&) {
  }
  throw Error("index-out-of-range", "unknown group '" + g + "'");
}

// Pattern file or embedding document.
Embedding load_embedding(const fs::path& p, const BasisRegistry& bases) {
  const json doc = json::parse(read_text(p));
  if (doc.value("format", "") == "sewkit-embedding/1") return embedding_from_json(doc, bases.groups);
  return encode(pattern_from_json(doc, bases.groups), bases);
}

void write_mesh(const fs::path& out, const TriMesh& mesh) { write_text(out, export_mesh(mesh)); }

// --- subcommands -------------------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* c, Common& o, bool out_required) {
  c->add_option("--seed", o.seed, "random seed");
  auto* opt = c->add_option("--out", o.out, "output path");
  if (out_required) opt->required();
}

int gen_data(const Common& o, int n, const std::string& categories, int points) {
  const std::vector<std::string> cats = split(categories, ',');
  const auto samples = gen_dataset(n, cats, o.seed, points);
  write_dataset(o.out, samples);
  std::printf("wrote %d samples to %s\n", n, o.out.c_str());
  return 0;
}

int fit_pca(const Common& o, const std::string& manifest, int h) {
  std::vector<std::vector<std::optional<GroupTensor>>> tensors;
  for (const ManifestEntry& e : read_manifest(manifest)) {
    tensors.push_back(group_tensors(outline_of(load_pattern(e.pattern)), default_registry()));
  }
  const BasisRegistry bases = fit_bases(default_registry(), tensors, h);
  std::ostringstream out;
  write_basis_registry(out, bases);
  write_text(o.out, out.str());
  std::printf("fitted %d groups on %zu patterns\n", bases.size(), tensors.size());
  return 0;
}

int train_cmd(const Common& o, const std::string& manifest, const std::string& registry, TrainConfig cfg,
              std::string history) {
  const BasisRegistry bases = load_registry(registry);
  const DecoderShape shape = decoder_shape_for(bases);
  std::vector<TrainItem> items;
  for (const ManifestEntry& e : read_manifest(manifest)) {
    items.push_back(make_train_item(e.id, load_pattern(e.pattern), load_maps(e.maps), bases, shape));
  }
  cfg.seed = o.seed;
  const TrainResult r = train(items, shape, cfg);
  std::ostringstream ck;
  write_checkpoint(ck, r.params);
  write_text(o.out, ck.str());
  if (history.empty()) history = o.out + ".history.csv";
  std::ostringstream h;
  write_history_csv(h, r.history);
  write_text(history, h.str());
  std::printf("trained %zu steps, final %s\n", r.history.size(), r.history.back().to_text().c_str());
  return 0;
}

int sew_cmd(const Common& o, const std::string& pattern, const std::string& targets, bool use_positions,
            SewConfig cfg, const std::string& init, const std::string& maps_out) {
  const SewingPattern p = load_pattern(pattern);
  const GarmentOutline outline = outline_of(p);
  std::vector<MaskMap> masks = rasterize_outline(outline);
  SewTargets t;
  if (!targets.empty()) {
    const MapContainer c = load_maps(targets);
    if (c.masks.size() != masks.size()) throw Error("shape-mismatch", "target maps do not match the pattern");
    masks = c.masks;
    for (std::size_t i = 0; i < c.masks.size(); ++i) t.normals.push_back(compute_normals(c.positions[i], c.masks[i]));
    if (use_positions) t.positions = c.positions;
  }
  if (init == "placement") {
    cfg.init = SewInit::placement;
  } else if (init == "flat") {
    cfg.init = SewInit::flat;
  } else {
    throw ValidationError(std::vector<Violation>{{"bad-init", "init must be placement or flat"}});
  }
  const SewResult r = sew_direct(outline, masks, t, cfg);
  write_mesh(o.out, readout_mesh(r.maps, masks, outline, kDefaultEdgePoints));
  if (!maps_out.empty()) {
    std::ostringstream m;
    write_map_container(m, MapContainer{masks, r.maps});
    write_text(maps_out, m.str());
  }
  std::printf("sewed %d steps, final %s\n", cfg.steps, r.history.back().to_text().c_str());
  return 0;
}

int reconstruct_cmd(const Common& o, const std::string& input, const std::string& registry,
                    const std::string& checkpoint) {
  const BasisRegistry bases = load_registry(registry);
  const DecoderParams params = load_checkpoint(checkpoint);
  write_mesh(o.out, reconstruct(load_embedding(input, bases), bases, params).mesh);
  return 0;
}

int interp_cmd(const Common& o, const std::string& a, const std::string& b, double alpha,
               const std::string& registry, const std::string& checkpoint) {
  const BasisRegistry bases = load_registry(registry);
  const DecoderParams params = load_checkpoint(checkpoint);
  const Embedding e = interpolate(load_embedding(a, bases), load_embedding(b, bases), alpha);
  write_mesh(o.out, reconstruct(e, bases, params).mesh);
  return 0;
}

int edit_cmd(const Common& o, const std::string& input, const std::vector<std::string>& sets,
             const std::vector<std::string>& swaps, const std::string& registry, const std::string& checkpoint,
             const std::string& mesh_out) {
  const BasisRegistry bases = load_registry(registry);
  const Embedding e = load_embedding(input, bases);
  std::vector<EmbeddingEdit> edits;
  for (const std::string& s : sets) {
    // group:component=value
    const auto colon = s.find(':');
    const auto eq = s.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
      throw ValidationError(std::vector<Violation>{{"bad-edit", "expected group:component=value, got '" + s + "'"}});
    }
    edits.push_back(CoefficientEdit{group_arg(s.substr(0, colon), bases.groups),
                                    std::stoi(s.substr(colon + 1, eq - colon - 1)), std::stod(s.substr(eq + 1))});
  }
  for (const std::string& s : swaps) {
    // group=donor file
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ValidationError(std::vector<Violation>{{"bad-edit", "expected group=donor, got '" + s + "'"}});
    const int g = group_arg(s.substr(0, eq), bases.groups);
    edits.push_back(GroupSwap::from(load_embedding(s.substr(eq + 1), bases), g));
  }
  const Embedding out = edit_embedding(e, edits);
  write_text(o.out, embedding_to_json(out, bases.groups).dump(2) + "\n");
  if (!mesh_out.empty()) {
    if (checkpoint.empty()) throw Error("missing-file", "--mesh needs --checkpoint");
    write_mesh(mesh_out, reconstruct(out, bases, load_checkpoint(checkpoint)).mesh);
  }
  return 0;
}

int eval_cmd(const Common& o, const std::string& manifest, const std::string& registry,
             const std::string& checkpoint, int samples) {
  const BasisRegistry bases = load_registry(registry);
  const DecoderParams params = load_checkpoint(checkpoint);
  std::ostringstream csv;
  csv << "id,chamfer,p2s,mgle\n";
  char line[256];
  for (const ManifestEntry& e : read_manifest(manifest)) {
    const TriMesh gt = parse_mesh(read_text(e.mesh));
    const TriMesh pred = reconstruct(encode(load_pattern(e.pattern), bases), bases, params).mesh;
    const GarmentMetrics m = evaluate_meshes(gt, pred, o.seed, samples);
    std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f\n", e.id.c_str(), m.chamfer, m.p2s, m.mgle);
    csv << line;
  }
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(o.out, csv.str());
  }
  return 0;
}

// Central differences of every loss on random 16 x 16 map sets.
int gradcheck_cmd(const Common& o, int sets) {
  const int n = 16;
  MaskMap mask;
  mask.frame.rows = mask.frame.cols = n;
  mask.occupied.setZero(n, n);
  mask.occupied.block(1, 1, n - 2, n - 2).setOnes();
  std::vector<MaskMap> masks{mask};

  GarmentOutline pair;
  for (const char* id : {"a", "b"}) {
    PanelOutline p;
    p.id = id;
    const double w = 15.0;
    p.edges = {resample_polyline({Vec2(0, 0), Vec2(w, 0)}, 8), resample_polyline({Vec2(w, 0), Vec2(w, w)}, 8),
               resample_polyline({Vec2(w, w), Vec2(0, w)}, 8), resample_polyline({Vec2(0, w), Vec2(0, 0)}, 8)};
    pair.panels.push_back(p);
  }
  pair.stitches = {{{"a", 1}, {"b", 3}, true}};
  std::vector<MaskMap> pair_masks;
  for (const auto& p : pair.panels) {
    const Polyline2 c = p.contour();
    pair_masks.push_back(rasterize_mask(c, centered_frame(c, kPixelPitch, n, n), p.id));
  }
  const StitchSampler stitches(pair, pair_masks);

  double worst[4] = {0, 0, 0, 0};
  for (int s = 0; s < sets; ++s) {
    Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(s)));
    auto random_map = [&] {
      PositionMap y(n, n);
      for (Eigen::Index p = 0; p < y.pixels(); ++p)
        for (int c = 0; c < 3; ++c) y.values(p, c) = 3.0 * rng.normal();
      return y;
    };
    auto smooth_map = [&] {
      const double a = rng.uniform(0.5, 1.5), fx = rng.uniform(0.1, 0.4), fy = rng.uniform(0.1, 0.4);
      PositionMap y(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) y.at(i, j) << 1.5 * j, 1.5 * i, a * std::sin(fx * j) * std::cos(fy * i);
      return y;
    };
    const FiniteDiffOptions fd{1e-3, 200, derive_seed(o.seed ^ 0x5eed, static_cast<std::uint64_t>(s))};

    std::vector<PositionMap> y{random_map()};
    std::vector<PositionMap> t{random_map()};
    worst[0] = std::max(worst[0], finite_diff_check([&](auto m) { return loss_rec(m, t, masks); }, y,
                                                    masked_pixels(masks), fd, kink_distance_rec(t))
                                      .max_relative_error);
    worst[1] = std::max(worst[1], finite_diff_check([&](auto m) { return loss_inn(m, masks); }, y,
                                                    masked_pixels(masks), fd, kink_distance_inn(masks))
                                      .max_relative_error);
    std::vector<PositionMap> yp{random_map(), random_map()};
    worst[2] = std::max(worst[2], finite_diff_check([&](auto m) { return loss_int(m, stitches); }, yp,
                                                    stitches.support(), fd, kink_distance_int(stitches))
                                      .max_relative_error);
    std::vector<PositionMap> ys{smooth_map()};
    std::vector<NormalMap> normals{compute_normals(smooth_map(), mask)};
    worst[3] = std::max(worst[3], finite_diff_check([&](auto m) { return loss_nor(m, normals, masks); }, ys,
                                                    masked_pixels(masks), fd)
                                      .max_relative_error);
  }
  const char* names[4] = {"rec", "inn", "int", "nor"};
  const double limits[4] = {1e-4, 1e-4, 1e-4, 1e-3};
  std::ostringstream report;
  report << "loss,max_relative_error,limit,pass\n";
  bool ok = true;
  for (int k = 0; k < 4; ++k) {
    char line[128];
    std::snprintf(line, sizeof line, "%s,%.3e,%.0e,%d\n", names[k], worst[k], limits[k], worst[k] < limits[k]);
    report << line;
    ok = ok && worst[k] < limits[k];
  }
  if (o.out.empty()) {
    std::cout << report.str();
  } else {
    write_text(o.out, report.str());
  }
  return ok ? 0 : 1;
}

int serve_cmd(const std::string& registry, const std::string& checkpoint, const std::string& host, int port) {
  std::string reg = registry;
  if (reg.empty()) {
    if (const char* env = std::getenv("SEWKIT_REGISTRY")) reg = env;
  }
  Service service(load_service_state(reg, checkpoint));
  HttpServer server(service);
  const int bound = server.bind(host, port);
  std::printf("listening on %s:%d\n", host.c_str(), bound);
  std::fflush(stdout);
  server.listen();
  return 0;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"gen-data", "fit-pca", "train",     "sew",  "reconstruct",
                                          "interp",   "edit",    "eval",      "gradcheck", "serve"};
  return s;
}

}  // namespace

int sewkit_main(int argc, const char* const* argv) {
  if (argc >= 2) {
    const std::string first = argv[1];
    const bool is_flag = !first.empty() && first[0] == '-';
    if (!is_flag && std::find(subcommands().begin(), subcommands().end(), first) == subcommands().end()) {
      std::fprintf(stderr, "sewkit: unknown subcommand '%s'\n", first.c_str());
      return 64;
    }
  }

  CLI::App app{"sewkit: sewing-pattern embeddings, UV-position maps and garment meshes"};
  app.require_subcommand(1);

  Common o;
  std::string registry, checkpoint, manifest, input, input_b, history, targets, init = "placement", maps_out,
                                                                  categories, host = "127.0.0.1", mesh_out;
  int n = 32, points = kDefaultEdgePoints, h = kDefaultComponents, samples = kMetricSamples, sets = 20, port = 8080;
  double alpha = 0.5;
  bool use_positions = false;
  std::vector<std::string> sets_edit, swaps;
  TrainConfig tcfg;
  SewConfig scfg;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, o, true);
  gen->add_option("--n", n, "number of garments")->check(CLI::PositiveNumber);
  gen->add_option("--categories", categories, "comma separated categories (default: all)");
  gen->add_option("--points", points, "points per edge")->check(CLI::Range(2, 1000));

  auto* fit = app.add_subcommand("fit-pca", "fit per-group PCA bases from a manifest");
  add_common(fit, o, true);
  fit->add_option("manifest", manifest)->required();
  fit->add_option("--components", h, "components per group")->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train", "train the decoder on a manifest");
  add_common(tr, o, true);
  tr->add_option("manifest", manifest)->required();
  tr->add_option("--registry", registry);
  tr->add_option("--epochs", tcfg.epochs)->check(CLI::PositiveNumber);
  tr->add_option("--batch", tcfg.batch_size)->check(CLI::PositiveNumber);
  tr->add_option("--lr", tcfg.learning_rate)->check(CLI::PositiveNumber);
  tr->add_option("--w-rec", tcfg.weights.rec);
  tr->add_option("--w-inn", tcfg.weights.inn);
  tr->add_option("--w-int", tcfg.weights.inter);
  tr->add_option("--w-nor", tcfg.weights.nor);
  tr->add_option("--history", history, "loss history CSV (default: <out>.history.csv)");

  auto* sew = app.add_subcommand("sew", "solve UV-position maps directly under the structure losses");
  add_common(sew, o, true);
  sew->add_option("pattern", input)->required();
  sew->add_option("--targets", targets, "baked maps supplying normal targets");
  sew->add_flag("--with-positions", use_positions, "also use target positions");
  sew->add_option("--steps", scfg.steps)->check(CLI::PositiveNumber);
  sew->add_option("--step-size", scfg.step_size)->check(CLI::PositiveNumber);
  sew->add_option("--init", init, "placement | flat");
  sew->add_option("--maps-out", maps_out);

  auto* rec = app.add_subcommand("reconstruct", "pattern -> embedding -> maps -> mesh");
  add_common(rec, o, true);
  rec->add_option("pattern", input)->required();
  rec->add_option("--registry", registry);
  rec->add_option("--checkpoint", checkpoint)->required();

  auto* in = app.add_subcommand("interp", "mesh of alpha * a + (1 - alpha) * b");
  add_common(in, o, true);
  in->add_option("a", input)->required();
  in->add_option("b", input_b)->required();
  in->add_option("--alpha", alpha);
  in->add_option("--registry", registry);
  in->add_option("--checkpoint", checkpoint)->required();

  auto* ed = app.add_subcommand("edit", "edit an embedding");
  add_common(ed, o, true);
  ed->add_option("input", input, "pattern or embedding document")->required();
  ed->add_option("--set", sets_edit, "group:component=value");
  ed->add_option("--swap", swaps, "group=donor");
  ed->add_option("--registry", registry);
  ed->add_option("--checkpoint", checkpoint);
  ed->add_option("--mesh", mesh_out, "also write the edited garment mesh");

  auto* ev = app.add_subcommand("eval", "metrics of reconstructions over a manifest");
  add_common(ev, o, false);
  ev->add_option("manifest", manifest)->required();
  ev->add_option("--registry", registry);
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--samples", samples, "surface samples per mesh")->check(CLI::PositiveNumber);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  add_common(gc, o, false);
  gc->add_option("--sets", sets, "random map sets per loss")->check(CLI::PositiveNumber);

  auto* sv = app.add_subcommand("serve", "HTTP JSON service");
  add_common(sv, o, false);
  sv->add_option("--registry", registry);
  sv->add_option("--checkpoint", checkpoint)->required();
  sv->add_option("--host", host);
  sv->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return gen_data(o, n, categories, points);
    if (*fit) return fit_pca(o, manifest, h);
    if (*tr) return train_cmd(o, manifest, registry, tcfg, history);
    if (*sew) return sew_cmd(o, input, targets, use_positions, scfg, init, maps_out);
    if (*rec) return reconstruct_cmd(o, input, registry, checkpoint);
    if (*in) return interp_cmd(o, input, input_b, alpha, registry, checkpoint);
    if (*ed) return edit_cmd(o, input, sets_edit, swaps, registry, checkpoint, mesh_out);
    if (*ev) return eval_cmd(o, manifest, registry, checkpoint, samples);
    if (*gc) return gradcheck_cmd(o, sets);
    if (*sv) return serve_cmd(registry, checkpoint, host, port);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "sewkit: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sewkit: %s\n", e.what());
    return 1;
  }
  return 1;
}
