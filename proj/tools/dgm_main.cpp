#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dgm/field_io.hpp"
#include "dgm/goad.hpp"
#include "dgm/gradcheck.hpp"
#include "dgm/losses.hpp"
#include "dgm/metrics.hpp"
#include "dgm/priors.hpp"
#include "dgm/scan.hpp"
#include "dgm/toy.hpp"

namespace fs = std::filesystem;
using dgm::ConfigError;
using dgm::IoError;
using json = nlohmann::ordered_json;

namespace {

// Shortest round-trip formatting, '.' decimal separator, locale-independent.
std::string fmt(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_fixed(double v, int precision = 6) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

void enforce_thread_budget_env() {
  const char* env = std::getenv("DGM_THREADS");
  if (env == nullptr) return;
  const std::string s(env);
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v < 1)
    throw ConfigError("DGM_THREADS must be an integer >= 1, got \"" + s + "\"");
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError(path.string() + ": write failed");
}

void make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory (" + ec.message() + ")");
}

dgm::FeatureMap as_feature(const dgm::ScalarField& s) {
  dgm::FeatureMap f(1, s.height, s.width);
  f.data = s.data;
  return f;
}

dgm::ScalarField as_scalar(const dgm::FeatureMap& f, const std::string& name) {
  if (f.channels != 1) throw IoError(name + ": expected a single-channel field");
  dgm::ScalarField s(f.height, f.width);
  s.data = f.data;
  return s;
}

dgm::LabelMask load_mask_any(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() < 2) throw IoError(path + ": truncated file", 0);
  in.close();
  if (magic[0] == 'P' && magic[1] == '5') return dgm::read_pgm(path);
  return dgm::read_mask(path);
}

void print_field_stats(const std::string& name, const std::vector<double>& data) {
  double lo = data[0], hi = data[0], sum = 0.0;
  for (double v : data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  std::cout << name << " min=" << fmt(lo) << " max=" << fmt(hi)
            << " mean=" << fmt(sum / static_cast<double>(data.size())) << "\n";
}

// ---- priors ---------------------------------------------------------------

struct PriorsArgs {
  std::string mask;
  std::string out;
  bool soften = false;
};

int cmd_priors(const PriorsArgs& a) {
  const dgm::LabelMask mask = load_mask_any(a.mask);
  const dgm::GeometricPriors p = dgm::make_priors(mask, a.soften);
  dgm::validate_priors(p);
  make_out_dir(a.out);
  const fs::path dir(a.out);
  dgm::write_field((dir / "vmap.dgmf").string(), as_feature(p.vmap));
  dgm::write_field((dir / "flow.dgmf").string(), dgm::flow_as_features(p.flow));
  dgm::write_field((dir / "curv.dgmf").string(), as_feature(p.curv));
  dgm::write_field((dir / "dcoarse.dgmf").string(), as_feature(p.d_coarse));

  json cfg;
  cfg["command"] = "priors";
  cfg["mask"] = fs::path(a.mask).filename().string();
  cfg["height"] = mask.height;
  cfg["width"] = mask.width;
  cfg["soften"] = a.soften;
  write_json(dir / "run_config.json", cfg);

  print_field_stats("vmap", p.vmap.data);
  print_field_stats("flow_y", p.flow.y.data);
  print_field_stats("flow_x", p.flow.x.data);
  print_field_stats("curv", p.curv.data);
  print_field_stats("dcoarse", p.d_coarse.data);
  return 0;
}

// ---- scan -----------------------------------------------------------------

struct ScanArgs {
  std::string features;
  std::string priors;
  std::string mode = "geo";
  std::string out;
  uint64_t seed = 0;
  int state_size = 4;
};

dgm::GeometricPriors load_priors_dir(const std::string& dir) {
  const fs::path p(dir);
  dgm::GeometricPriors out;
  out.vmap = as_scalar(dgm::read_field((p / "vmap.dgmf").string()), "vmap");
  const dgm::FeatureMap flow = dgm::read_field((p / "flow.dgmf").string());
  if (flow.channels != 2) throw IoError("flow.dgmf: expected two channels");
  out.flow = dgm::VectorField2(flow.height, flow.width);
  for (std::size_t i = 0; i < out.flow.y.size(); ++i) {
    out.flow.y.data[i] = flow.plane(0)[i];
    out.flow.x.data[i] = flow.plane(1)[i];
  }
  out.curv = as_scalar(dgm::read_field((p / "curv.dgmf").string()), "curv");
  out.d_coarse = as_scalar(dgm::read_field((p / "dcoarse.dgmf").string()), "dcoarse");
  dgm::validate_priors(out);
  return out;
}

int cmd_scan(const ScanArgs& a) {
  if (a.mode != "iso" && a.mode != "geo")
    throw ConfigError("scan: mode must be iso or geo, got \"" + a.mode + "\"");
  const dgm::FeatureMap features = dgm::read_field(a.features);
  dgm::GeometricPriors priors;
  const dgm::GeometricPriors* use = nullptr;
  if (a.mode == "geo") {
    if (a.priors.empty()) throw ConfigError("scan: mode geo needs --priors");
    priors = load_priors_dir(a.priors);
    dgm::check_same_shape(features.height, features.width, priors.d_coarse.height,
                          priors.d_coarse.width, "scan");
    use = &priors;
  }
  dgm::Rng rng(a.seed);
  const dgm::CascadeConfig cfg = dgm::make_cascade_config(features.channels, a.state_size, rng);
  dgm::CascadeResult res = dgm::cascade_forward<double>(features, cfg, use);

  make_out_dir(a.out);
  const fs::path dir(a.out);
  dgm::FeatureMap context(res.context.channels, res.context.height, res.context.width);
  context.data = res.context.data;
  dgm::write_field((dir / "context.dgmf").string(), context);
  dgm::write_field((dir / "delta_d.dgmf").string(), as_feature(res.delta_d));

  json cfg_json;
  cfg_json["command"] = "scan";
  cfg_json["mode"] = a.mode;
  cfg_json["seed"] = a.seed;
  cfg_json["channels"] = features.channels;
  cfg_json["state_size"] = a.state_size;
  cfg_json["height"] = features.height;
  cfg_json["width"] = features.width;
  write_json(dir / "run_config.json", cfg_json);

  std::cout << "madds=" << res.madds << "\n";
  return 0;
}

// ---- leakage --------------------------------------------------------------

struct LeakageArgs {
  uint64_t seed = 0;
  int size = 32;
  int channels = 8;
  int state_size = 4;
  std::string out;
};

int cmd_leakage(const LeakageArgs& a) {
  const dgm::LeakagePair pair = dgm::run_leakage(a.seed, a.size, a.channels, a.state_size);
  const double ratio = pair.guided / pair.isotropic;
  const std::string csv = "guided,isotropic,ratio\n" + fmt(pair.guided) + "," +
                          fmt(pair.isotropic) + "," + fmt(ratio) + "\n";
  std::cout << csv;
  if (!a.out.empty()) {
    make_out_dir(a.out);
    const fs::path dir(a.out);
    std::ofstream f(dir / "leakage.csv", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError((dir / "leakage.csv").string() + ": cannot open for writing");
    f << csv;
    json cfg;
    cfg["command"] = "leakage";
    cfg["seed"] = a.seed;
    cfg["size"] = a.size;
    cfg["channels"] = a.channels;
    cfg["state_size"] = a.state_size;
    write_json(dir / "run_config.json", cfg);
  }
  return 0;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string sizes = "32x32,32x64,64x64,64x128,128x128";
  uint64_t seed = 0;
  int channels = 8;
  int state_size = 4;
  int repeats = 5;
};

std::vector<std::pair<int, int>> parse_sizes(const std::string& spec) {
  std::vector<std::pair<int, int>> out;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t comma = spec.find(',', pos);
    if (comma == std::string::npos) comma = spec.size();
    const std::string tok = spec.substr(pos, comma - pos);
    const std::size_t x = tok.find('x');
    if (x == std::string::npos || x == 0 || x + 1 == tok.size())
      throw ConfigError("bench: size must look like HxW, got \"" + tok + "\"");
    int h = 0, w = 0;
    auto rh = std::from_chars(tok.data(), tok.data() + x, h);
    auto rw = std::from_chars(tok.data() + x + 1, tok.data() + tok.size(), w);
    if (rh.ec != std::errc{} || rh.ptr != tok.data() + x || rw.ec != std::errc{} ||
        rw.ptr != tok.data() + tok.size() || h < 1 || w < 1)
      throw ConfigError("bench: size must look like HxW, got \"" + tok + "\"");
    out.emplace_back(h, w);
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("bench: no sizes given");
  return out;
}

int cmd_bench(const BenchArgs& a) {
  const auto sizes = parse_sizes(a.sizes);
  dgm::Rng rng(a.seed);
  const dgm::CascadeConfig cfg = dgm::make_cascade_config(a.channels, a.state_size, rng);
  const auto reports = dgm::measure_scan_cost(cfg, sizes, a.seed + 1, a.repeats);
  std::cout << "h,w,pixels,madds,seconds\n";
  for (const auto& r : reports) {
    std::cout << r.height << "," << r.width << "," << r.pixels << "," << r.madds << ","
              << fmt_fixed(r.seconds) << "\n";
  }
  return 0;
}

// ---- gradcheck ------------------------------------------------------------

struct GradArgs {
  std::string scope = "all";
  uint64_t seed = 1;
  int instances = 20;
  bool corrupt = false;
};

int cmd_gradcheck(const GradArgs& a) {
  dgm::GradScope scope;
  if (a.scope == "scan") {
    scope = dgm::GradScope::Scan;
  } else if (a.scope == "goad") {
    scope = dgm::GradScope::Goad;
  } else if (a.scope == "losses") {
    scope = dgm::GradScope::Losses;
  } else if (a.scope == "all") {
    scope = dgm::GradScope::All;
  } else {
    throw ConfigError("gradcheck: scope must be scan|goad|losses|all, got \"" + a.scope + "\"");
  }
  const auto reports = dgm::run_gradcheck(scope, a.seed, a.instances, a.corrupt);
  std::cout << "op,instances,max_rel_err,worst\n";
  double worst = 0.0;
  for (const auto& r : reports) {
    std::cout << r.op << "," << r.instances << "," << fmt(r.max_rel_err) << "," << r.worst_arg
              << "\n";
    worst = std::max(worst, r.max_rel_err);
  }
  const bool pass = worst < dgm::kGradTol;
  std::cout << "max_rel_err=" << fmt(worst) << " tol=" << fmt(dgm::kGradTol) << " "
            << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

// ---- overfit --------------------------------------------------------------

struct OverfitArgs {
  uint64_t seed = 0;
  int steps = 200;
  double lr = 5e-4;
  int size = 32;
  int channels = 8;
  int state_size = 4;
  std::string out;
};

int cmd_overfit(const OverfitArgs& a) {
  dgm::OverfitOptions opt;
  opt.seed = a.seed;
  opt.steps = a.steps;
  opt.lr = a.lr;
  opt.size = a.size;
  opt.channels = a.channels;
  opt.state_size = a.state_size;
  const dgm::OverfitResult res = dgm::run_overfit(opt);

  std::string csv = "step,total,seg,ce,lovasz,boundary,vg,tv,d,aux,gamma\n";
  for (const auto& row : res.rows) {
    const dgm::LossReport& r = row.report;
    csv += std::to_string(row.step) + "," + fmt(r.total) + "," + fmt(r.seg) + "," +
           fmt(r.ce_ohem) + "," + fmt(r.lovasz) + "," + fmt(r.boundary) + "," + fmt(r.vg) + "," +
           fmt(r.tv) + "," + fmt(r.d) + "," + fmt(r.aux) + "," + fmt(r.gamma_geo) + "\n";
  }
  const double first = res.rows.front().report.total;
  const double last = res.rows.back().report.total;
  std::cout << "total_start=" << fmt(first) << " total_end=" << fmt(last)
            << " reduction=" << fmt(1.0 - last / first) << " miou=" << fmt(res.final_miou)
            << "\n";

  if (!a.out.empty()) {
    make_out_dir(a.out);
    const fs::path dir(a.out);
    std::ofstream f(dir / "losses.csv", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError((dir / "losses.csv").string() + ": cannot open for writing");
    f << csv;
    dgm::write_mask((dir / "pred.dgmf").string(), res.prediction);
    json cfg;
    cfg["command"] = "overfit";
    cfg["seed"] = a.seed;
    cfg["steps"] = a.steps;
    cfg["lr"] = a.lr;
    cfg["size"] = a.size;
    cfg["channels"] = a.channels;
    cfg["state_size"] = a.state_size;
    cfg["ohem_threshold"] = opt.loss.ohem_threshold;
    cfg["min_kept_fraction"] = opt.loss.min_kept_fraction;
    cfg["pos_weight"] = opt.loss.pos_weight;
    write_json(dir / "run_config.json", cfg);
  }
  return 0;
}

// ---- miou -----------------------------------------------------------------

struct MiouArgs {
  std::string pred;
  std::string gt;
  int classes = 0;
  int ignore = -1;
};

int cmd_miou(const MiouArgs& a) {
  const dgm::LabelMask pred = dgm::read_mask(a.pred);
  const dgm::LabelMask gt = dgm::read_mask(a.gt);
  const dgm::IouResult r = dgm::miou(pred, gt, a.classes, a.ignore);
  std::cout << "class,iou,included\n";
  for (int c = 0; c < a.classes; ++c) {
    std::cout << c << "," << fmt(r.per_class[static_cast<std::size_t>(c)]) << ","
              << (r.included[static_cast<std::size_t>(c)] ? 1 : 0) << "\n";
  }
  std::cout << "miou=" << fmt(r.miou) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-guided linear-time scanning stack"};
  app.require_subcommand(1);

  PriorsArgs priors_args;
  auto* priors = app.add_subcommand("priors", "Extract geometric prior fields from a label mask");
  priors->add_option("mask", priors_args.mask, "Label mask (P5 PGM or u16 field file)")
      ->required();
  priors->add_option("--out", priors_args.out, "Output directory")->required();
  priors->add_flag("--soften", priors_args.soften, "Apply one 3x3 box pass to the boundary map");

  ScanArgs scan_args;
  auto* scan = app.add_subcommand("scan", "Run the context cascade over a feature field");
  scan->add_option("features", scan_args.features, "Input features (.dgmf)")->required();
  scan->add_option("--priors", scan_args.priors, "Directory written by the priors command");
  scan->add_option("--mode", scan_args.mode, "iso or geo (default geo)");
  scan->add_option("--out", scan_args.out, "Output directory")->required();
  scan->add_option("--seed", scan_args.seed, "Parameter seed");
  scan->add_option("--state-size", scan_args.state_size, "States per channel");

  LeakageArgs leakage_args;
  auto* leakage =
      app.add_subcommand("leakage", "Cross-boundary transport on the two-region scene");
  leakage->add_option("--seed", leakage_args.seed, "Scene and parameter seed");
  leakage->add_option("--size", leakage_args.size, "Scene side length");
  leakage->add_option("--channels", leakage_args.channels, "Feature channels");
  leakage->add_option("--state-size", leakage_args.state_size, "States per channel");
  leakage->add_option("--out", leakage_args.out, "Optional output directory");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Operation counts and wall time across sizes");
  bench->add_option("--sizes", bench_args.sizes, "Comma-separated HxW list");
  bench->add_option("--seed", bench_args.seed, "Parameter/feature seed");
  bench->add_option("--channels", bench_args.channels, "Feature channels");
  bench->add_option("--state-size", bench_args.state_size, "States per channel");
  bench->add_option("--repeats", bench_args.repeats, "Timed repeats per size");

  GradArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck", "Reverse-mode gradients vs finite differences");
  grad->add_option("--scope", grad_args.scope, "scan, goad, losses, or all");
  grad->add_option("--seed", grad_args.seed, "Sampling seed");
  grad->add_option("--instances", grad_args.instances, "Random instances per operator");
  grad->add_flag("--corrupt", grad_args.corrupt)->group("");  // failure-path hook

  OverfitArgs overfit_args;
  auto* overfit = app.add_subcommand("overfit", "Gradient-descent fit of the toy scene");
  overfit->add_option("--seed", overfit_args.seed, "Model/scene seed");
  overfit->add_option("--steps", overfit_args.steps, "Descent steps");
  overfit->add_option("--lr", overfit_args.lr, "Learning rate");
  overfit->add_option("--size", overfit_args.size, "Scene side length");
  overfit->add_option("--channels", overfit_args.channels, "Feature channels");
  overfit->add_option("--state-size", overfit_args.state_size, "States per channel");
  overfit->add_option("--out", overfit_args.out, "Optional output directory");

  MiouArgs miou_args;
  auto* miou_cmd = app.add_subcommand("miou", "Intersection-over-union between two label masks");
  miou_cmd->add_option("pred", miou_args.pred, "Predicted mask (u16 field file)")->required();
  miou_cmd->add_option("gt", miou_args.gt, "Ground-truth mask (u16 field file)")->required();
  miou_cmd->add_option("--classes", miou_args.classes, "Number of classes")->required();
  miou_cmd->add_option("--ignore", miou_args.ignore, "Ignored label (default -1: none)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    enforce_thread_budget_env();
    if (priors->parsed()) return cmd_priors(priors_args);
    if (scan->parsed()) return cmd_scan(scan_args);
    if (leakage->parsed()) return cmd_leakage(leakage_args);
    if (bench->parsed()) return cmd_bench(bench_args);
    if (grad->parsed()) return cmd_gradcheck(grad_args);
    if (overfit->parsed()) return cmd_overfit(overfit_args);
    if (miou_cmd->parsed()) return cmd_miou(miou_args);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dgm::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dgm::RangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dgm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
