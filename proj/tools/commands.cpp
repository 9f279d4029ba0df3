#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "sess/errors.hpp"
#include "sess/geometry.hpp"
#include "sess/image_io.hpp"
#include "sess/pipeline.hpp"
#include "sess/render.hpp"

namespace sess::cli {

namespace {

std::string model_ref(const std::string& model) {
  if (model.rfind("mock:", 0) == 0) return model;
  return fs::absolute(model).lexically_normal().string();
}

json timings_json(const StageTimings& t) {
  return {{"scaling", t.scaling_ms},       {"scoring", t.scoring_ms},
          {"extraction", t.extraction_ms}, {"fusion", t.fusion_ms},
          {"smoothing", t.smoothing_ms},   {"total", t.total_ms}};
}

json patch_table(const SessRun& run) {
  std::vector<bool> kept(run.patches.size(), false);
  for (auto k : run.kept) kept[k] = true;
  json rows = json::array();
  for (std::size_t i = 0; i < run.patches.size(); ++i) {
    const auto& p = run.patches[i];
    rows.push_back({{"index", i},
                    {"scale", p.scale_index},
                    {"scaled_h", p.scaled_h},
                    {"scaled_w", p.scaled_w},
                    {"x", p.x},
                    {"y", p.y},
                    {"w", p.w},
                    {"h", p.h},
                    {"score", run.scores[i]},
                    {"kept", static_cast<bool>(kept[i])}});
  }
  return rows;
}

/// Inputs that fully determine an image-level command.
struct ImageJob {
  std::string command;
  fs::path image;
  std::string model;
  std::string meta;
  std::string method;
  RunConfig cfg;
  fs::path out;
};

json job_manifest(const ImageJob& job, const RasterImage& img, const LoadedModel& m) {
  return {{"command", job.command},
          {"image", fs::absolute(job.image).lexically_normal().string()},
          {"image_sha256", sha256_file(job.image)},
          {"image_height", img.height()},
          {"image_width", img.width()},
          {"model", model_ref(job.model)},
          {"meta", job.meta.empty() ? "" : fs::absolute(job.meta).lexically_normal().string()},
          {"model_identity", m.identity},
          {"method", job.method},
          {"seed", job.cfg.rise.seed},
          {"config", job.cfg}};
}

int do_saliency(const ImageJob& job) {
  set_stage("load-image");
  const auto img = load_image(job.image);
  const auto model = load_backend(job.model, job.meta);
  set_stage("configure");
  const auto base = make_base_method(job.cfg);
  fs::create_directories(job.out);

  set_stage("saliency");
  json manifest = job_manifest(job, img, model);
  GrayMap sal;
  if (job.method == "sess") {
    const auto run = run_sess_detailed(img, *model.backend, *base, job.cfg.sess);
    sal = run.saliency;
    manifest["patches"] = patch_table(run);
    manifest["kept_count"] = run.kept.size();
    manifest["timings_ms"] = timings_json(run.timings);
  } else {
    job.cfg.sess.validate(*model.backend);
    sal = explain(job.method, img, *model.backend, *base, job.cfg.sess);
  }

  set_stage("write-outputs");
  write_f32(sal, job.out / "saliency.f32");
  save_png(sal, job.out / "saliency.png");
  save_png(overlay(img, sal), job.out / "overlay.png");
  manifest["outputs"] = {
      {"saliency_f32",
       {{"path", "saliency.f32"},
        {"height", sal.height()},
        {"width", sal.width()},
        {"dtype", "float32"},
        {"byte_order", "little"},
        {"layout", "row-major"}}},
      {"saliency_png", "saliency.png"},
      {"overlay_png", "overlay.png"},
      {"manifest", "manifest.json"}};
  write_json(job.out / "manifest.json", manifest);
  std::cout << "wrote " << (job.out / "saliency.f32").string() << " (" << sal.height() << "x"
            << sal.width() << ")\n";
  return kOk;
}

int do_inspect(const ImageJob& job) {
  set_stage("load-image");
  const auto img = load_image(job.image);
  const auto model = load_backend(job.model, job.meta);
  set_stage("configure");
  const auto base = make_base_method(job.cfg);
  fs::create_directories(job.out);

  set_stage("saliency");
  const auto run = run_sess_detailed(img, *model.backend, *base, job.cfg.sess, true);
  std::vector<PatchSpec> kept;
  for (auto k : run.kept) kept.push_back(run.patches[k]);

  set_stage("montage");
  const auto grid = dump_patch_grid(*run.stack, kept);

  set_stage("write-outputs");
  save_png(grid.montage, job.out / "montage.png");
  {
    std::ofstream csv(job.out / "scores.csv");
    csv << "patch_index,scale,scaled_w,scaled_h,x,y,w,h,"
           "footprint_x0,footprint_y0,footprint_x1,footprint_y1,score,weight,tile_row,tile_col\n";
    csv << std::setprecision(10);
    for (const auto& tile : grid.tiles) {
      const auto& s = kept[tile.layer];
      const auto fp = original_footprint(s, img.height(), img.width());
      csv << run.kept[tile.layer] << ',' << s.scale_index << ',' << s.scaled_w << ','
          << s.scaled_h << ',' << s.x << ',' << s.y << ',' << s.w << ',' << s.h << ',' << fp.x0
          << ',' << fp.y0 << ',' << fp.x1 << ',' << fp.y1 << ','
          << run.scores[run.kept[tile.layer]] << ',' << run.stack->weights[tile.layer] << ','
          << tile.row << ',' << tile.col << '\n';
    }
  }
  json manifest = job_manifest(job, img, model);
  manifest["patches"] = patch_table(run);
  manifest["kept_count"] = run.kept.size();
  manifest["timings_ms"] = timings_json(run.timings);
  manifest["montage"] = {{"rows", grid.rows},
                         {"cols", grid.cols},
                         {"tile_w", grid.tile_w},
                         {"tile_h", grid.tile_h}};
  manifest["outputs"] = {
      {"montage_png", "montage.png"}, {"scores_csv", "scores.csv"}, {"manifest", "manifest.json"}};
  write_json(job.out / "manifest.json", manifest);
  std::cout << "wrote " << (job.out / "montage.png").string() << " (" << grid.rows
            << " scale rows, " << grid.tiles.size() << " tiles)\n";
  return kOk;
}

struct CurveFlags {
  CurveOptions opts;
  std::string fill = "zero";
  CLI::App* app = nullptr;

  void attach(CLI::App& a) {
    app = &a;
    a.add_option("--step-frac", opts.step_frac, "fraction of pixels per curve step")
        ->capture_default_str();
    a.add_option("--blur-kernel", opts.blur_kernel, "insertion baseline blur kernel")
        ->capture_default_str();
    a.add_option("--blur-sigma", opts.blur_sigma, "insertion baseline blur sigma")
        ->capture_default_str();
    a.add_option("--deletion-fill", fill, "zero or mean")
        ->check(CLI::IsMember({"zero", "mean"}))
        ->capture_default_str();
  }
  bool given(const char* name) const {
    const auto* o = app ? app->get_option_no_throw(name) : nullptr;
    return o != nullptr && o->count() > 0;
  }
  // Flags given on the command line override the config file.
  CurveOptions resolve(CurveOptions o, std::size_t max_batch) const {
    if (given("--step-frac")) o.step_frac = opts.step_frac;
    if (given("--blur-kernel")) o.blur_kernel = opts.blur_kernel;
    if (given("--blur-sigma")) o.blur_sigma = opts.blur_sigma;
    if (given("--deletion-fill")) {
      o.deletion_fill = fill == "mean" ? DeletionFill::kMean : DeletionFill::kZero;
    }
    o.max_batch = max_batch;
    return o;
  }
};

int parallel_jobs(RunConfig& cfg) {
  const int jobs = resolve_worker_count(cfg.sess.num_workers);
  // Parallelism goes to images; each pipeline then runs single-threaded.
  if (jobs > 1) cfg.sess.num_workers = 1;
  return jobs;
}

struct InsdelScores {
  double insertion = 0;
  double deletion = 0;
  double overall = 0;
};

InsdelScores score_image(const fs::path& image, int target, const std::string& method,
                         const ClassifierBackend& backend, const BaseSaliencyMethod& base,
                         SessConfig cfg, const CurveOptions& curves) {
  const auto img = load_image(image);
  cfg.target_class = target;
  const auto sal = explain(method, img, backend, base, cfg);
  const auto ins = insertion_curve(img, sal, backend, target, curves);
  const auto del = deletion_curve(img, sal, backend, target, curves);
  return {ins.auc, del.auc, overall_score(ins, del)};
}

int image_class(const DatasetItem& item) {
  const auto it = item.record.find("class");
  if (it == item.record.end() || !it->is_number_integer()) {
    throw InvalidArgument("dataset line " + std::to_string(item.index + 1) +
                          ": missing integer \"class\"");
  }
  return it->get<int>();
}

json means_block(double ins, double del, double overall) {
  return {{"insertion", ins}, {"deletion", del}, {"overall", overall}};
}

json percent_block(double ins, double del, double overall) {
  return {{"insertion", round_to(100 * ins, 1)},
          {"deletion", round_to(100 * del, 1)},
          {"overall", round_to(100 * overall, 1)}};
}

// ---------------------------------------------------------------------------

int cmd_eval_insdel(const fs::path& dataset, const fs::path& out, const PipelineFlags& flags,
                    const CurveFlags& curve_flags, std::size_t max_images) {
  set_stage("configure");
  RunConfig defaults;
  defaults.sess = SessConfig::quantitative();
  auto cfg = flags.resolve(defaults);
  cfg.curves = curve_flags.resolve(cfg.curves, cfg.sess.max_batch);
  set_stage("read-dataset");
  const auto items = read_dataset(dataset);
  for (const auto& item : items) image_class(item);
  const auto model = load_backend(flags.model, flags.meta);
  set_stage("configure");
  const auto base = make_base_method(cfg);
  cfg.sess.validate(*model.backend);
  const int jobs = parallel_jobs(cfg);
  fs::create_directories(out);

  const json header = {{"command", "eval-insdel"},
                       {"dataset", fs::absolute(dataset).lexically_normal().string()},
                       {"model_identity", model.identity},
                       {"method", flags.method},
                       {"config", cfg}};
  set_stage("evaluate");
  const auto records = run_resumable(
      items, out / "checkpoint.jsonl", header, max_images, jobs, [&](const DatasetItem& item) {
        const int target = image_class(item);
        const auto s = score_image(item.image, target, flags.method, *model.backend, *base,
                                   cfg.sess, cfg.curves);
        return json{{"image", item.record["image"]},
                    {"class", target},
                    {"status", "ok"},
                    {"insertion", s.insertion},
                    {"deletion", s.deletion},
                    {"overall", s.overall}};
      });

  set_stage("report");
  double si = 0, sd = 0, so = 0;
  std::size_t ok = 0;
  for (const auto& r : records) {
    if (r["status"] != "ok") continue;
    si += r["insertion"].get<double>();
    sd += r["deletion"].get<double>();
    so += r["overall"].get<double>();
    ++ok;
  }
  const double n = ok ? static_cast<double>(ok) : 1.0;
  const bool complete = records.size() == items.size();
  json report = header;
  report["images"] = records;
  report["counts"] = {{"total", items.size()},
                      {"evaluated", records.size()},
                      {"ok", ok},
                      {"failed", records.size() - ok}};
  report["complete"] = complete;
  report["means"] = means_block(si / n, sd / n, so / n);
  report["percent"] = percent_block(si / n, sd / n, so / n);
  write_json(out / "report.json", report);

  std::ofstream csv(out / "summary.csv");
  csv << std::setprecision(10) << "image,class,status,insertion,deletion,overall\n";
  for (const auto& r : records) {
    csv << r["image"].get<std::string>() << ',' << r["class"] << ',' << r["status"].get<std::string>();
    if (r["status"] == "ok") {
      csv << ',' << r["insertion"].get<double>() << ',' << r["deletion"].get<double>() << ','
          << r["overall"].get<double>();
    } else {
      csv << ",,,";
    }
    csv << '\n';
  }
  csv << std::setprecision(4) << "mean,,," << si / n << ',' << sd / n << ',' << so / n << '\n';

  std::cout << std::fixed << std::setprecision(1) << flags.method << ": insertion "
            << 100 * si / n << "  deletion " << 100 * sd / n << "  overall " << 100 * so / n
            << "  (" << ok << " ok, " << records.size() - ok << " failed";
  if (!complete) std::cout << ", " << items.size() - records.size() << " pending; rerun to resume";
  std::cout << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct GroundTruth {
  bool difficult = false;
  std::map<int, std::vector<Box>> boxes;
};

GroundTruth read_ground_truth(const DatasetItem& item, const fs::path& dataset) {
  GroundTruth gt;
  gt.difficult = item.record.value("difficult", false);
  json objects;
  if (item.record.contains("objects")) {
    objects = item.record["objects"];
  } else if (item.record.contains("annotation")) {
    fs::path ann = item.record["annotation"].get<std::string>();
    if (ann.is_relative()) ann = dataset.parent_path() / ann;
    if (!fs::exists(ann)) throw FileNotFound("bounding-box file not found: " + ann.string());
    const auto j = read_json(ann);
    objects = j.contains("objects") ? j["objects"] : j;
  } else {
    throw InvalidArgument("dataset line " + std::to_string(item.index + 1) +
                          ": needs \"objects\" or \"annotation\"");
  }
  if (!objects.is_array() || objects.empty()) {
    throw InvalidArgument("dataset line " + std::to_string(item.index + 1) + ": no objects");
  }
  for (const auto& o : objects) {
    const auto b = o.at("bbox").get<std::vector<double>>();
    if (b.size() != 4 || b[2] < b[0] || b[3] < b[1]) {
      throw InvalidArgument("dataset line " + std::to_string(item.index + 1) +
                            ": bbox must be [x0, y0, x1, y1]");
    }
    gt.boxes[o.at("class").get<int>()].push_back({b[0], b[1], b[2], b[3]});
  }
  return gt;
}

json pointing_block(const std::vector<PointingRecord>& recs) {
  const auto agg = aggregate_pointing(recs);
  json per = json::object();
  for (const auto& [c, a] : agg.per_class) {
    per[std::to_string(c)] = {{"hits", a.hits}, {"misses", a.misses}, {"acc", a.acc}};
  }
  return {{"per_class", per},
          {"mean_acc", agg.mean_acc},
          {"mean_acc_percent", round_to(100 * agg.mean_acc, 1)},
          {"records", recs.size()}};
}

int cmd_eval_pointing(const fs::path& dataset, const fs::path& out, const PipelineFlags& flags,
                      double tolerance, std::size_t max_images) {
  set_stage("configure");
  RunConfig defaults;
  defaults.sess = SessConfig::quantitative();
  defaults.sess.prefilter_ratio = 99;
  auto cfg = flags.resolve(defaults);
  set_stage("read-dataset");
  const auto items = read_dataset(dataset);
  std::vector<GroundTruth> truth;
  for (const auto& item : items) truth.push_back(read_ground_truth(item, dataset));
  const auto model = load_backend(flags.model, flags.meta);
  set_stage("configure");
  const auto base = make_base_method(cfg);
  cfg.sess.validate(*model.backend);
  const int jobs = parallel_jobs(cfg);
  fs::create_directories(out);

  const json header = {{"command", "eval-pointing"},
                       {"dataset", fs::absolute(dataset).lexically_normal().string()},
                       {"model_identity", model.identity},
                       {"method", flags.method},
                       {"tolerance", tolerance},
                       {"config", cfg}};
  set_stage("evaluate");
  const auto records = run_resumable(
      items, out / "checkpoint.jsonl", header, max_images, jobs, [&](const DatasetItem& item) {
        const auto& gt = truth[item.index];
        const auto img = load_image(item.image);
        json hits = json::array();
        for (const auto& [c, boxes] : gt.boxes) {
          auto scfg = cfg.sess;
          scfg.target_class = c;
          const auto sal = explain(flags.method, img, *model.backend, *base, scfg);
          if (sal.height() != img.height() || sal.width() != img.width()) {
            throw InternalConsistencyError("saliency does not match the annotation frame");
          }
          const auto peak = saliency_peak(sal);
          hits.push_back({{"class", c},
                          {"hit", pointing_game(sal, boxes, tolerance)},
                          {"peak", {peak.x, peak.y}}});
        }
        return json{{"image", item.record["image"]},
                    {"difficult", gt.difficult},
                    {"status", "ok"},
                    {"results", hits}};
      });

  set_stage("report");
  std::vector<PointingRecord> all, diff;
  std::size_t ok = 0, n_diff = 0;
  for (const auto& r : records) {
    if (r["status"] != "ok") continue;
    ++ok;
    const bool d = r["difficult"].get<bool>();
    n_diff += d;
    for (const auto& h : r["results"]) {
      const PointingRecord pr{h["class"].get<int>(), h["hit"].get<bool>()};
      all.push_back(pr);
      if (d) diff.push_back(pr);
    }
  }
  json report = header;
  report["images"] = records;
  report["counts"] = {{"total", items.size()},
                      {"evaluated", records.size()},
                      {"ok", ok},
                      {"failed", records.size() - ok},
                      {"difficult", n_diff}};
  report["complete"] = records.size() == items.size();
  report["all"] = pointing_block(all);
  if (n_diff > 0) report["difficult"] = pointing_block(diff);
  write_json(out / "report.json", report);

  std::cout << std::fixed << std::setprecision(1) << "pointing game (" << flags.method
            << "): all " << report["all"]["mean_acc_percent"].get<double>();
  if (n_diff > 0) std::cout << " / diff " << report["difficult"]["mean_acc_percent"].get<double>();
  std::cout << "  (" << ok << " images ok, " << records.size() - ok << " failed)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

std::vector<double> parse_values(const std::string& spec) {
  std::vector<double> out;
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const int lo = std::stoi(spec.substr(0, dots));
    const int hi = std::stoi(spec.substr(dots + 2));
    if (hi < lo) throw InvalidArgument("empty range " + spec);
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument("bad sweep value '" + tok + "'");
    }
  }
  if (out.empty()) throw InvalidArgument("no sweep values");
  return out;
}

int cmd_sweep(const fs::path& dataset, const fs::path& out, const PipelineFlags& flags,
              const CurveFlags& curve_flags, const std::string& axis,
              const std::string& values_spec) {
  set_stage("configure");
  RunConfig defaults;
  defaults.sess = SessConfig::quantitative();
  auto cfg = flags.resolve(defaults);
  cfg.curves = curve_flags.resolve(cfg.curves, cfg.sess.max_batch);
  const auto values = parse_values(values_spec);
  set_stage("read-dataset");
  const auto items = read_dataset(dataset);
  for (const auto& item : items) image_class(item);
  const auto model = load_backend(flags.model, flags.meta);
  set_stage("configure");
  const auto base = make_base_method(cfg);
  fs::create_directories(out);

  std::ofstream csv(out / "sweep.csv");
  csv << axis << ",insertion,deletion,overall,images,failed\n" << std::setprecision(10);
  csv.flush();
  std::vector<double> xs, ins, del, ovr;
  int status = kOk;
  for (double v : values) {
    try {
      set_stage("sweep " + axis + "=" + CLI::detail::to_string(v));
      auto point = cfg;
      if (axis == "scales") {
        if (v != std::floor(v)) throw InvalidArgument("scales must be integers");
        point.sess.n_scales = static_cast<int>(v);
      } else {
        point.sess.prefilter_ratio = v;
      }
      point.sess.validate(*model.backend);
      double si = 0, sd = 0, so = 0;
      std::size_t ok = 0;
      for (const auto& item : items) {
        try {
          const auto s = score_image(item.image, image_class(item), flags.method, *model.backend,
                                     *base, point.sess, point.curves);
          si += s.insertion;
          sd += s.deletion;
          so += s.overall;
          ++ok;
        } catch (const Error& e) {
          std::cerr << "sess: skipping " << item.image.string() << ": " << e.what() << '\n';
        }
      }
      if (ok == 0) throw InternalConsistencyError("every image failed at this grid point");
      const double n = static_cast<double>(ok);
      csv << v << ',' << si / n << ',' << sd / n << ',' << so / n << ',' << ok << ','
          << items.size() - ok << '\n';
      csv.flush();
      xs.push_back(v);
      ins.push_back(si / n);
      del.push_back(sd / n);
      ovr.push_back(so / n);
      std::ostringstream line;
      line << axis << "=" << v << ": overall " << std::fixed << std::setprecision(1)
           << 100 * so / n << '\n';
      std::cout << line.str();
    } catch (const Error& e) {
      std::cerr << "sess: warning: sweep stopped at " << axis << "=" << v << " ("
                << e.category() << ": " << e.what() << "); sweep.csv is partial\n";
      status = exit_code_for(e.category());
      break;
    }
  }
  set_stage("plot");
  if (!xs.empty()) {
    save_png(line_plot(axis, xs, {{"insertion", ins}, {"deletion", del}, {"overall", ovr}}),
             out / "curves.png");
  }
  return status;
}

}  // namespace

// ---------------------------------------------------------------------------

namespace {

struct ImageCommandState {
  PipelineFlags flags;
  std::string image;
  std::string out = "sess_out";
};

ImageJob make_job(const std::string& command, const ImageCommandState& st, RunConfig defaults) {
  set_stage("configure");
  ImageJob job;
  job.command = command;
  job.image = st.image;
  job.model = st.flags.model;
  job.meta = st.flags.meta;
  job.method = st.flags.method;
  job.cfg = st.flags.resolve(std::move(defaults));
  job.out = st.out;
  return job;
}

}  // namespace

void add_saliency(CLI::App& app, std::function<int()>& run) {
  auto* sub = app.add_subcommand("saliency", "saliency map for one image");
  auto st = std::make_shared<ImageCommandState>();
  sub->add_option("image", st->image, "input image (PNG or JPEG)")->required();
  sub->add_option("--out", st->out, "output directory")->capture_default_str();
  st->flags.attach(*sub);
  sub->callback([st, &run] {
    run = [st] { return do_saliency(make_job("saliency", *st, {})); };
  });
}

void add_inspect(CLI::App& app, std::function<int()>& run) {
  auto* sub = app.add_subcommand("inspect-patches", "per-patch montage and score table");
  auto st = std::make_shared<ImageCommandState>();
  sub->add_option("image", st->image, "input image (PNG or JPEG)")->required();
  sub->add_option("--out", st->out, "output directory")->capture_default_str();
  st->flags.attach(*sub);
  sub->callback([st, &run] {
    run = [st] {
      RunConfig defaults;
      defaults.sess.n_scales = 5;
      return do_inspect(make_job("inspect-patches", *st, defaults));
    };
  });
}

void add_rerun(CLI::App& app, std::function<int()>& run) {
  auto* sub = app.add_subcommand("rerun", "repeat a saliency or inspect-patches run");
  auto manifest = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  sub->add_option("manifest", *manifest, "manifest.json of the earlier run")->required();
  sub->add_option("--out", *out, "output directory")->required();
  sub->callback([manifest, out, &run] {
    run = [manifest, out] {
      set_stage("read-manifest");
      const auto m = read_json(*manifest);
      ImageJob job;
      try {
        job.command = m.at("command").get<std::string>();
        job.image = m.at("image").get<std::string>();
        job.model = m.at("model").get<std::string>();
        job.meta = m.value("meta", "");
        job.method = m.value("method", "sess");
        job.cfg = m.at("config").get<RunConfig>();
      } catch (const json::exception& e) {
        throw InvalidArgument("manifest " + *manifest + ": " + e.what());
      }
      job.out = *out;
      if (fs::exists(job.image) && sha256_file(job.image) != m.value("image_sha256", "")) {
        throw InvalidArgument("image " + job.image.string() + " changed since the manifest");
      }
      const auto id = open_backend(job.model, job.meta)->identity();
      if (id != m.value("model_identity", "")) {
        throw ModelError("model identity " + id + " differs from the manifest's " +
                         m.value("model_identity", "?"));
      }
      if (job.command == "saliency") return do_saliency(job);
      if (job.command == "inspect-patches") return do_inspect(job);
      throw InvalidArgument("cannot rerun command '" + job.command + "'");
    };
  });
}

void add_eval_insdel(CLI::App& app, std::function<int()>& run) {
  auto* sub = app.add_subcommand("eval-insdel", "insertion/deletion evaluation over a dataset");
  struct State {
    PipelineFlags flags;
    CurveFlags curves;
    std::string dataset;
    std::string out = "insdel_out";
    std::size_t max_images = 0;
  };
  auto st = std::make_shared<State>();
  sub->add_option("dataset", st->dataset, "JSON-lines manifest of {image, class}")->required();
  sub->add_option("--out", st->out, "output directory (holds the checkpoint)")
      ->capture_default_str();
  sub->add_option("--max-images", st->max_images, "stop after this many new images (0: all)");
  st->flags.attach(*sub, false);
  st->curves.attach(*sub);
  sub->callback([st, &run] {
    run = [st] {
      return cmd_eval_insdel(st->dataset, st->out, st->flags, st->curves, st->max_images);
    };
  });
}

void add_eval_pointing(CLI::App& app, std::function<int()>& run) {
  auto* sub = app.add_subcommand("eval-pointing", "Pointing Game over a dataset with boxes");
  struct State {
    PipelineFlags flags;
    std::string dataset;
    std::string out = "pointing_out";
    double tolerance = 0;
    std::size_t max_images = 0;
  };
  auto st = std::make_shared<State>();
  sub->add_option("dataset", st->dataset, "JSON-lines manifest of {image, objects|annotation}")
      ->required();
  sub->add_option("--out", st->out, "output directory")->capture_default_str();
  sub->add_option("--tolerance", st->tolerance, "grow boxes by this many pixels")
      ->capture_default_str();
  sub->add_option("--max-images", st->max_images, "stop after this many new images (0: all)");
  st->flags.attach(*sub, false);
  sub->callback([st, &run] {
    run = [st] {
      return cmd_eval_pointing(st->dataset, st->out, st->flags, st->tolerance, st->max_images);
    };
  });
}

void add_sweep(CLI::App& app, std::function<int()>& run) {
  auto* sub = app.add_subcommand("sweep", "insertion/deletion over a grid of scales or ratios");
  struct State {
    PipelineFlags flags;
    CurveFlags curves;
    std::string dataset;
    std::string out = "sweep_out";
    std::string axis;
    std::string values;
  };
  auto st = std::make_shared<State>();
  sub->add_option("dataset", st->dataset, "JSON-lines manifest of {image, class}")->required();
  sub->add_option("--axis", st->axis, "scales or prefilter")
      ->required()
      ->check(CLI::IsMember({"scales", "prefilter"}));
  sub->add_option("--values", st->values, "A..B (integers) or a comma list, e.g. 0,50,90")
      ->required();
  sub->add_option("--out", st->out, "output directory")->capture_default_str();
  st->flags.attach(*sub, false);
  st->curves.attach(*sub);
  sub->callback([st, &run] {
    run = [st] {
      return cmd_sweep(st->dataset, st->out, st->flags, st->curves, st->axis, st->values);
    };
  });
}

}  // namespace sess::cli
