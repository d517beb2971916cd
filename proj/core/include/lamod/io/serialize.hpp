#pragma once

// Mapping between library objects and LMF1 records.

#include <string>
#include <string_view>
#include <vector>

#include "lamod/diffusion.hpp"
#include "lamod/io/lmf1.hpp"
#include "lamod/nn/parameters.hpp"
#include "lamod/phantom.hpp"

namespace lamod::io {

// images (T+1, H, W), motions (T, 2, H, W), mask (H, W) u8, metadata (JSON text).
Container sample_to_container(const PhantomSample& s);
PhantomSample sample_from_container(const Container& c);

// (T, 2, H, W) under `name`, plus a "spacing" record.
Container fields_to_container(const std::vector<VectorField>& fields, std::string_view name = "motions");
std::vector<VectorField> fields_from_container(const Container& c, std::string_view name = "motions");

// Tensor under `name` with its shape as dims.
Record tensor_record(std::string name, const nn::Tensor& t);
nn::Tensor tensor_from_record(const Record& r);

// Parameters and Adam state under "<prefix>/param/<name>", ".../adam_m/...",
// ".../adam_v/..." and ".../adam_step/...".
void store_to_container(const nn::ParameterStore& store, std::string_view prefix, Container& c);
// Overwrites values and Adam state of every parameter in `store`; shapes must match.
void load_store(nn::ParameterStore& store, std::string_view prefix, const Container& c);

void train_state_to_container(const TrainState& st, Container& c);
TrainState train_state_from_container(const Container& c);

}  // namespace lamod::io
