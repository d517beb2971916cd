#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "lamod/error.hpp"
#include "lamod/io/files.hpp"
#include "lamod/io/lmf1.hpp"
#include "lamod/io/pgm.hpp"
#include "lamod/io/serialize.hpp"
#include "lamod/parallel.hpp"
#include "lamod/pipeline.hpp"
#include "lamod/strain.hpp"

namespace lamod::cli {

namespace {

using json = nlohmann::json;

// Round-trip precision, same text on every run.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string stem(const std::string& file) { return fs::path(file).stem().string(); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

PhantomSample load_sample(const fs::path& path) { return io::sample_from_container(io::read_container(path)); }

std::vector<VectorField> load_fields(const fs::path& path, std::string_view name) {
  return io::fields_from_container(io::read_container(path), name);
}

void save_fields(const fs::path& path, const std::vector<VectorField>& f, std::string_view name) {
  io::write_container(path, io::fields_to_container(f, name));
}

nn::RegistrationNetwork load_registration_network(const io::RunConfig& cfg, const fs::path& path) {
  nn::RegistrationNetwork net(cfg.make_unet());
  io::load_store(net.parameters(), "reg", io::read_container(path));
  return net;
}

std::vector<std::string> selected(const Manifest& m, const std::string& split) {
  return split == "all" ? m.all() : m.split(split);
}

void write_pgm_masked(const fs::path& path, const Grid2& g, const std::vector<double>& values, const Mask* mask,
                      double lo, double hi) {
  std::vector<double> v = values;
  if (mask) {
    for (std::size_t k = 0; k < v.size(); ++k)
      if (!mask->labels[k]) v[k] = lo;
  }
  io::write_pgm(path, v, g.height, g.width, lo, hi);
}

std::string frame_tag(std::size_t t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", t);
  return buf;
}

// Shared by direct and apply: v0 and displacement files per sequence plus the
// energy table.
void write_registration_outputs(const fs::path& out_dir, const std::vector<std::string>& files,
                                const std::vector<std::vector<VectorField>>& v0,
                                const std::vector<std::vector<VectorField>>& disp,
                                const std::vector<std::vector<std::pair<double, double>>>& energies,
                                const std::vector<std::vector<std::size_t>>& steps) {
  std::ostringstream csv;
  csv << "sequence,frame,initial_energy,final_energy,steps\n";
  for (std::size_t s = 0; s < files.size(); ++s) {
    save_fields(out_dir / (stem(files[s]) + "_v0.lmf1"), v0[s], "velocities");
    save_fields(out_dir / (stem(files[s]) + "_disp.lmf1"), disp[s], "displacements");
    for (std::size_t t = 0; t < energies[s].size(); ++t) {
      csv << stem(files[s]) << ',' << t + 1 << ',' << num(energies[s][t].first) << ',' << num(energies[s][t].second)
          << ',' << steps[s][t] << '\n';
    }
  }
  io::write_atomic(out_dir / "energy.csv", csv.str());
}

}  // namespace

io::RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed) {
  io::RunConfig cfg = path.empty() ? io::RunConfig{} : io::load_config(path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

std::string config_reference(const io::RunConfig& cfg) { return io::dump_config(cfg); }

std::vector<std::string> Manifest::all() const {
  std::vector<std::string> out = train;
  out.insert(out.end(), validation.begin(), validation.end());
  out.insert(out.end(), test.begin(), test.end());
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<std::string>& Manifest::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "validation") return validation;
  if (name == "test") return test;
  throw UsageError("unknown split '" + name + "' (expected train, validation, test or all)");
}

Manifest read_manifest(const fs::path& dataset_dir) {
  const fs::path p = dataset_dir / "manifest.json";
  Manifest m;
  try {
    const json j = json::parse(io::read_text(p));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train = j.at("train").get<std::vector<std::string>>();
    m.validation = j.at("validation").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw IoError(p.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

void make_phantom_dataset(const io::RunConfig& cfg, const fs::path& out_dir, std::size_t n) {
  ensure_dir(out_dir);
  const std::vector<PhantomConfig> configs = dataset_configs(n, cfg.make_phantom(), cfg.phantom.ranges, cfg.seed);
  const DatasetSplit split = split_dataset(n, cfg.seed);
  std::vector<std::string> names(n);
  parallel_for(n, [&](std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "seq_%03zu.lmf1", k);
    names[k] = buf;
    io::write_container(out_dir / names[k], io::sample_to_container(generate(configs[k])));
  });
  json j;
  j["seed"] = cfg.seed;
  auto pick = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::string> v;
    for (auto i : ids) v.push_back(names[i]);
    return v;
  };
  j["train"] = pick(split.train);
  j["validation"] = pick(split.validation);
  j["test"] = pick(split.test);
  io::write_atomic(out_dir / "manifest.json", j.dump(2) + "\n");
}

void register_direct(const io::RunConfig& cfg, const fs::path& dataset_dir, const std::string& split,
                     const fs::path& out_dir) {
  const Manifest m = read_manifest(dataset_dir);
  const std::vector<std::string> files = selected(m, split);
  const RegistrationConfig rc = cfg.make_registration();
  ensure_dir(out_dir);

  std::vector<std::vector<ImagePair>> pairs;
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t s = 0; s < files.size(); ++s) {
    pairs.push_back(build_pairs(load_sample(dataset_dir / files[s]).images));
    for (std::size_t t = 0; t < pairs.back().size(); ++t) jobs.emplace_back(s, t);
  }
  std::vector<std::vector<VectorField>> v0(files.size()), disp(files.size());
  std::vector<std::vector<std::pair<double, double>>> energies(files.size());
  std::vector<std::vector<std::size_t>> steps(files.size());
  for (std::size_t s = 0; s < files.size(); ++s) {
    v0[s].resize(pairs[s].size());
    disp[s].resize(pairs[s].size());
    energies[s].resize(pairs[s].size());
    steps[s].resize(pairs[s].size());
  }
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto [s, t] = jobs[j];
    const RegistrationResult r = register_pair(rc, pairs[s][t].first, pairs[s][t].second);
    v0[s][t] = r.v0;
    disp[s][t] = r.path.forward_map.displacement();
    energies[s][t] = {r.energy_trace.front(), r.energy_trace.back()};
    steps[s][t] = r.energy_trace.size() - 1;
  });
  write_registration_outputs(out_dir, files, v0, disp, energies, steps);
}

void register_train(const io::RunConfig& cfg, const fs::path& dataset_dir, const fs::path& model_out,
                    std::optional<int> epochs) {
  const Manifest m = read_manifest(dataset_dir);
  std::vector<FieldSequence<ScalarField>> seqs;
  for (const auto& f : m.train) seqs.push_back(load_sample(dataset_dir / f).images);
  nn::RegistrationNetwork net(cfg.make_unet());
  const int n = epochs.value_or(cfg.registration.network_epochs);
  if (n < 1) throw UsageError("--epochs must be >= 1");
  const auto log = train_registration_network(cfg.make_registration(), net, seqs, n, cfg.registration.learning_rate,
                                              cfg.seed);
  io::Container c;
  io::store_to_container(net.parameters(), "reg", c);
  c.add(io::Record::text("config", io::dump_config(cfg)));
  if (model_out.has_parent_path()) ensure_dir(model_out.parent_path());
  io::write_container(model_out, c);
  std::ostringstream csv;
  csv << "epoch,mean_energy\n";
  for (const auto& e : log) csv << e.epoch << ',' << num(e.mean_energy) << '\n';
  io::write_atomic(fs::path(model_out.string() + ".csv"), csv.str());
}

void register_apply(const io::RunConfig& cfg, const fs::path& dataset_dir, const std::string& split,
                    const fs::path& model, const fs::path& out_dir) {
  if (!fs::exists(model)) throw IoError("model " + model.string() + " does not exist; run `lamod register train` first");
  const Manifest m = read_manifest(dataset_dir);
  const std::vector<std::string> files = selected(m, split);
  const RegistrationConfig rc = cfg.make_registration();
  const nn::RegistrationNetwork net = load_registration_network(cfg, model);
  ensure_dir(out_dir);
  std::vector<std::vector<VectorField>> v0, disp;
  std::vector<std::vector<std::pair<double, double>>> energies;
  std::vector<std::vector<std::size_t>> steps;
  for (const auto& f : files) {
    const PhantomSample s = load_sample(dataset_dir / f);
    const auto pairs = build_pairs(s.images);
    v0.push_back(predict_velocities(net, s.images));
    disp.push_back(displacements_from_velocities(rc.shooting, v0.back()));
    energies.emplace_back();
    for (std::size_t t = 0; t < pairs.size(); ++t) {
      const double e = energy(rc, v0.back()[t], pairs[t].first, pairs[t].second).total;
      energies.back().emplace_back(e, e);
    }
    steps.emplace_back(pairs.size(), 0);
  }
  write_registration_outputs(out_dir, files, v0, disp, energies, steps);
}

void train_diffusion(const io::RunConfig& cfg, const fs::path& dataset_dir, const fs::path& reg_model,
                     const fs::path& model_out, std::optional<int> epochs, bool resume) {
  const Manifest m = read_manifest(dataset_dir);
  const nn::RegistrationNetwork net = load_registration_network(cfg, reg_model);

  auto load_split = [&](const std::vector<std::string>& files) {
    std::vector<PhantomSample> out;
    for (const auto& f : files) out.push_back(load_sample(dataset_dir / f));
    return out;
  };
  const std::vector<PhantomSample> train_s = load_split(m.train), val_s = load_split(m.validation);
  if (train_s.empty() || val_s.empty()) throw UsageError("dataset needs non-empty train and validation splits");
  const std::size_t frames = train_s.front().motions.size();

  std::vector<nn::Tensor> train_lat;
  for (const auto& s : train_s) train_lat.push_back(encode_latents(net, s.images));
  double scale = cfg.diffusion.normalize_latents ? latent_scale(train_lat) : 1.0;

  nn::NoisePredictor eps(cfg.make_unet(), frames, cfg.diffusion.steps);
  nn::MotionDecoder dec(cfg.make_unet(), frames);
  TrainState state;
  std::string log_text = "epoch,split,l_diffusion,l_motion,l_total\n";
  if (resume) {
    const io::Container old = io::read_container(model_out);
    io::load_store(eps.parameters(), "eps", old);
    io::load_store(dec.parameters(), "dec", old);
    state = io::train_state_from_container(old);
    scale = old.get("latent_scale").f64.at(0);
    const fs::path old_log(model_out.string() + ".csv");
    if (fs::exists(old_log)) log_text = io::read_text(old_log);
  }

  std::vector<TrainingItem> train_items, val_items;
  for (std::size_t k = 0; k < train_s.size(); ++k) {
    nn::Tensor z = train_lat[k];
    for (auto& v : z.values()) v *= scale;
    train_items.push_back(make_training_item(z, train_s[k]));
  }
  for (const auto& s : val_s) val_items.push_back(make_training_item(encode_latents(net, s.images, scale), s));

  DiffusionConfig dc = cfg.make_diffusion();
  if (epochs) {
    if (*epochs < 1) throw UsageError("--epochs must be >= 1");
    dc.max_epochs = state.epoch + *epochs;
  }
  std::ostringstream log;
  log << log_text;
  train(train_items, val_items, dc, eps, dec, state, [&](const EpochLog& e) {
    log << e.epoch << ',' << e.split << ',' << num(e.l_diffusion) << ',' << num(e.l_motion) << ','
        << num(e.l_total) << '\n';
  });

  io::Container c;
  io::store_to_container(eps.parameters(), "eps", c);
  io::store_to_container(dec.parameters(), "dec", c);
  io::train_state_to_container(state, c);
  c.add(io::Record::doubles("latent_scale", {1}, {scale}));
  c.add(io::Record::text("config", io::dump_config(cfg)));
  if (model_out.has_parent_path()) ensure_dir(model_out.parent_path());
  io::write_container(model_out, c);
  io::write_atomic(fs::path(model_out.string() + ".csv"), log.str());
}

void infer_sequence(const io::RunConfig& cfg, const fs::path& sequence, const fs::path& reg_model,
                    const fs::path& model, const fs::path& out) {
  const PhantomSample s = load_sample(sequence);
  const nn::RegistrationNetwork net = load_registration_network(cfg, reg_model);
  const io::Container c = io::read_container(model);
  const std::size_t frames = s.motions.size();
  nn::NoisePredictor eps(cfg.make_unet(), frames, cfg.diffusion.steps);
  nn::MotionDecoder dec(cfg.make_unet(), frames);
  io::load_store(eps.parameters(), "eps", c);
  io::load_store(dec.parameters(), "dec", c);
  const double scale = c.get("latent_scale").f64.at(0);
  const DiffusionConfig dc = cfg.make_diffusion();
  std::mt19937_64 rng(cfg.seed);
  const auto phi = lamod_infer(net, scale, eps, dec, dc.schedule, dc.kernel, s.images, rng);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  save_fields(out, phi, "displacements");
}

void strain_report(const fs::path& motion, const fs::path& sequence, const fs::path& out_dir) {
  const PhantomSample s = load_sample(sequence);
  const auto u = load_fields(motion, "displacements");
  if (u.empty() || !(u.front().grid == s.mask.grid)) {
    throw DimensionError(motion.string() + ": motion grid does not match the sequence grid");
  }
  ensure_dir(out_dir);
  // LV center: mask centroid, as for data without a known center
  const Point2 center = s.mask.centroid();
  const SegmentMap seg = segment_mask(s.mask, center, s.insertion_angle);
  std::ostringstream csv;
  csv << "frame,segment,mean_ecc\n";
  for (std::size_t t = 0; t < u.size(); ++t) {
    const StrainMap st = strain_from_displacement(u[t], center);
    const SegmentValues v = segmental_strain(st, seg);
    for (std::size_t q = 0; q < 6; ++q) csv << t + 1 << ',' << q + 1 << ',' << opt_num(v[q]) << '\n';
    write_pgm_masked(out_dir / ("ecc_" + frame_tag(t + 1) + ".pgm"), st.grid, st.ecc, &s.mask, -0.25, 0.25);
  }
  io::write_atomic(out_dir / "strain.csv", csv.str());
}

void eval_report(const fs::path& pred, const fs::path& sequence, const fs::path& out_dir) {
  const PhantomSample s = load_sample(sequence);
  const auto u = load_fields(pred, "displacements");
  if (u.size() != s.motions.size()) {
    throw DimensionError(pred.string() + ": " + std::to_string(u.size()) + " frames, the sequence has " +
                         std::to_string(s.motions.size()));
  }
  ensure_dir(out_dir);
  const Point2 center = s.mask.centroid();
  const SegmentMap seg = segment_mask(s.mask, center, s.insertion_angle);
  std::ostringstream frames;
  frames << "frame,epe_mm,err_seg1,err_seg2,err_seg3,err_seg4,err_seg5,err_seg6\n";
  double epe_sum = 0.0;
  std::array<double, 6> err_sum{};
  std::array<std::size_t, 6> err_n{};
  for (std::size_t t = 0; t < u.size(); ++t) {
    const double e = epe(u[t], s.motions[t], s.mask);
    epe_sum += e;
    const SegmentValues err = segmental_strain_error(strain_from_displacement(u[t], center),
                                                     strain_from_displacement(s.motions[t], center), seg);
    frames << t + 1 << ',' << num(e);
    for (std::size_t q = 0; q < 6; ++q) {
      frames << ',' << opt_num(err[q]);
      if (err[q]) {
        err_sum[q] += *err[q];
        ++err_n[q];
      }
    }
    frames << '\n';
    std::vector<double> mag(u[t].x.size());
    for (std::size_t k = 0; k < mag.size(); ++k)
      mag[k] = std::hypot(u[t].x[k] - s.motions[t].x[k], u[t].y[k] - s.motions[t].y[k]);
    write_pgm_masked(out_dir / ("epe_" + frame_tag(t + 1) + ".pgm"), s.mask.grid, mag, &s.mask, 0.0, 3.0);
  }
  std::ostringstream summary;
  summary << "metric,segment,value\n";
  summary << "epe_mm,," << num(epe_sum / static_cast<double>(u.size())) << '\n';
  for (std::size_t q = 0; q < 6; ++q) {
    summary << "strain_error," << q + 1 << ','
            << (err_n[q] ? num(err_sum[q] / static_cast<double>(err_n[q])) : std::string()) << '\n';
  }
  io::write_atomic(out_dir / "eval_frames.csv", frames.str());
  io::write_atomic(out_dir / "eval.csv", summary.str());
}

}  // namespace lamod::cli
