#include "lamod/io/serialize.hpp"

#include <cmath>

#include "json.hpp"
#include "lamod/error.hpp"

namespace lamod::io {

using nlohmann::json;

namespace {

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

const Record& expect(const Container& c, std::string_view name, DType dtype, std::size_t rank) {
  const Record& r = c.get(name);
  if (r.dtype != dtype || r.dims.size() != rank) {
    throw FormatError("record '" + std::string(name) + "' has unexpected dtype or rank", 0);
  }
  return r;
}

Grid2 grid_from(std::uint32_t h, std::uint32_t w, double spacing) {
  try {
    return Grid2::make(static_cast<int>(h), static_cast<int>(w), spacing);
  } catch (const Error& e) {
    throw FormatError(std::string("invalid grid in container: ") + e.what(), 0);
  }
}

}  // namespace

Container sample_to_container(const PhantomSample& s) {
  const Grid2& g = s.config.grid;
  const std::size_t hw = g.size();
  Container c;
  std::vector<double> img;
  img.reserve(s.images.size() * hw);
  for (const auto& f : s.images) img.insert(img.end(), f.values.begin(), f.values.end());
  c.add(Record::doubles("images", {u32(s.images.size()), u32(g.height), u32(g.width)}, std::move(img)));
  Container m = fields_to_container(s.motions, "motions");
  for (auto& r : m.records) c.add(std::move(r));
  c.add(Record::bytes("mask", {u32(g.height), u32(g.width)}, s.mask.labels));
  const PhantomConfig& p = s.config;
  json meta = {{"frames", p.frames},
               {"r_inner", p.r_inner},
               {"r_outer", p.r_outer},
               {"contraction_amp", p.contraction_amp},
               {"twist_amp", p.twist_amp},
               {"center_jitter", p.center_jitter},
               {"intensity_std", p.intensity_std},
               {"supersample", p.supersample},
               {"seed", p.seed},
               {"insertion_angle", s.insertion_angle},
               {"center_x", s.center.x},
               {"center_y", s.center.y}};
  c.add(Record::text("metadata", meta.dump()));
  return c;
}

PhantomSample sample_from_container(const Container& c) {
  PhantomSample s;
  s.motions = fields_from_container(c, "motions");
  const Grid2 g = s.motions.front().grid;
  const Record& img = expect(c, "images", DType::F64, 3);
  if (img.dims[1] != u32(g.height) || img.dims[2] != u32(g.width) || img.dims[0] != s.motions.size() + 1) {
    throw FormatError("images record does not match motions", 0);
  }
  for (std::size_t t = 0; t < img.dims[0]; ++t) {
    ScalarField f(g);
    std::copy(img.f64.begin() + static_cast<std::ptrdiff_t>(t * g.size()),
              img.f64.begin() + static_cast<std::ptrdiff_t>((t + 1) * g.size()), f.values.begin());
    s.images.push_back(std::move(f));
  }
  const Record& mask = expect(c, "mask", DType::U8, 2);
  if (mask.dims[0] != u32(g.height) || mask.dims[1] != u32(g.width)) throw FormatError("mask does not match grid", 0);
  s.mask = Mask(g);
  s.mask.labels = mask.u8;
  json meta;
  try {
    meta = json::parse(c.get("metadata").as_text());
    PhantomConfig& p = s.config;
    p.grid = g;
    p.frames = meta.at("frames").get<int>();
    p.r_inner = meta.at("r_inner").get<double>();
    p.r_outer = meta.at("r_outer").get<double>();
    p.contraction_amp = meta.at("contraction_amp").get<double>();
    p.twist_amp = meta.at("twist_amp").get<double>();
    p.center_jitter = meta.at("center_jitter").get<double>();
    p.intensity_std = meta.at("intensity_std").get<double>();
    p.supersample = meta.at("supersample").get<int>();
    p.seed = meta.at("seed").get<std::uint64_t>();
    s.insertion_angle = meta.at("insertion_angle").get<double>();
    s.center = {meta.at("center_x").get<double>(), meta.at("center_y").get<double>()};
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad metadata record: ") + e.what(), 0);
  }
  return s;
}

Container fields_to_container(const std::vector<VectorField>& fields, std::string_view name) {
  if (fields.empty()) throw UsageError("fields_to_container: no fields");
  const Grid2& g = fields.front().grid;
  std::vector<double> v;
  v.reserve(fields.size() * 2 * g.size());
  for (const auto& f : fields) {
    if (!(f.grid == g)) throw DimensionError("fields_to_container: fields do not share a grid");
    v.insert(v.end(), f.x.begin(), f.x.end());
    v.insert(v.end(), f.y.begin(), f.y.end());
  }
  Container c;
  c.add(Record::doubles(std::string(name), {u32(fields.size()), 2, u32(g.height), u32(g.width)}, std::move(v)));
  c.add(Record::doubles("spacing", {1}, {g.spacing}));
  return c;
}

std::vector<VectorField> fields_from_container(const Container& c, std::string_view name) {
  const Record& r = expect(c, name, DType::F64, 4);
  if (r.dims[1] != 2 || r.dims[0] == 0) throw FormatError("record '" + std::string(name) + "' is not (T, 2, H, W)", 0);
  const double spacing = expect(c, "spacing", DType::F64, 1).f64.at(0);
  const Grid2 g = grid_from(r.dims[2], r.dims[3], spacing);
  const std::size_t hw = g.size();
  std::vector<VectorField> out(r.dims[0], VectorField(g));
  for (std::size_t t = 0; t < out.size(); ++t) {
    auto base = r.f64.begin() + static_cast<std::ptrdiff_t>(2 * t * hw);
    std::copy(base, base + static_cast<std::ptrdiff_t>(hw), out[t].x.begin());
    std::copy(base + static_cast<std::ptrdiff_t>(hw), base + static_cast<std::ptrdiff_t>(2 * hw), out[t].y.begin());
  }
  return out;
}

Record tensor_record(std::string name, const nn::Tensor& t) {
  std::vector<std::uint32_t> dims;
  for (auto d : t.shape()) dims.push_back(u32(d));
  return Record::doubles(std::move(name), std::move(dims), std::vector<double>(t.values().begin(), t.values().end()));
}

nn::Tensor tensor_from_record(const Record& r) {
  if (r.dtype != DType::F64) throw FormatError("record '" + r.name + "' is not a float record", 0);
  nn::Shape shape(r.dims.begin(), r.dims.end());
  try {
    return nn::Tensor::from(std::move(shape), r.f64);
  } catch (const Error& e) {
    throw FormatError("record '" + r.name + "': " + e.what(), 0);
  }
}

void store_to_container(const nn::ParameterStore& store, std::string_view prefix, Container& c) {
  const std::string p(prefix);
  for (const auto& e : store.entries()) {
    c.add(tensor_record(p + "/param/" + e.name, e.tensor));
    std::vector<std::uint32_t> dims;
    for (auto d : e.tensor.shape()) dims.push_back(u32(d));
    c.add(Record::doubles(p + "/adam_m/" + e.name, dims, e.adam.m));
    c.add(Record::doubles(p + "/adam_v/" + e.name, dims, e.adam.v));
    c.add(Record::doubles(p + "/adam_step/" + e.name, {1}, {static_cast<double>(e.adam.step)}));
  }
}

void load_store(nn::ParameterStore& store, std::string_view prefix, const Container& c) {
  const std::string p(prefix);
  for (auto& e : store.entries()) {
    const Record& r = c.get(p + "/param/" + e.name);
    const Record& m = c.get(p + "/adam_m/" + e.name);
    const Record& v = c.get(p + "/adam_v/" + e.name);
    const Record& s = c.get(p + "/adam_step/" + e.name);
    const std::size_t n = e.tensor.numel();
    if (r.dtype != DType::F64 || r.f64.size() != n || m.f64.size() != n || v.f64.size() != n || s.f64.size() != 1) {
      throw FormatError("checkpoint entry '" + e.name + "' does not match the model shape " +
                            nn::shape_string(e.tensor.shape()),
                        0);
    }
    std::copy(r.f64.begin(), r.f64.end(), e.tensor.values().begin());
    e.adam.m = m.f64;
    e.adam.v = v.f64;
    e.adam.step = static_cast<std::int64_t>(s.f64[0]);
  }
}

void train_state_to_container(const TrainState& st, Container& c) {
  c.add(Record::doubles("train/state", {4},
                        {static_cast<double>(st.epoch), st.best_validation, st.has_best ? 1.0 : 0.0,
                         static_cast<double>(st.epochs_since_best)}));
}

TrainState train_state_from_container(const Container& c) {
  const Record& r = expect(c, "train/state", DType::F64, 1);
  if (r.f64.size() != 4) throw FormatError("train/state must hold 4 values", 0);
  TrainState st;
  st.epoch = static_cast<int>(r.f64[0]);
  st.best_validation = r.f64[1];
  st.has_best = r.f64[2] != 0.0;
  st.epochs_since_best = static_cast<int>(r.f64[3]);
  return st;
}

}  // namespace lamod::io
