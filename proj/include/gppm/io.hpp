#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gppm/data.hpp"
#include "gppm/inference.hpp"
#include "gppm/model.hpp"

namespace gppm {

// CSV panel exchange. Events files carry one row per (customer, day) with
// columns customer_id, day, spend; spend is 0 or 1 and zero rows are
// ignored. Customers files carry customer_id, install_day, first_spend_day,
// channel. Both need the exact header row. Malformed rows are fatal with
// their line number; duplicate spend rows for the same (customer, day)
// collapse to a single incidence and are counted into *duplicate_events
// when the pointer is given.
//
// horizon 0 means "last observed spend day"; pass the true observation end
// when the panel was watched beyond its final event.
SpendPanel load_panel(const std::string& events_path, const std::string& customers_path,
                      int horizon = 0, int* duplicate_events = nullptr);
void save_panel(const SpendPanel& panel, const std::string& events_path,
                const std::string& customers_path);

// Everything needed to reuse draws without refitting: the model structure
// they were sampled under plus the sampler seed.
struct DrawsMeta {
  ModelSpec spec;
  ModelDims dims;
  std::uint64_t seed = 0;
};

struct LoadedDraws {
  PosteriorDraws draws;
  DrawsMeta meta;
};

// Binary draws container: magic, format version, a JSON header naming every
// parameter once and recording the meta block plus chain layout, the
// float64 payload in chain-major order, and a trailing FNV-1a checksum over
// all preceding bytes. Loading verifies magic, version, and checksum, so a
// truncated or edited file fails loudly; a round trip reproduces the draws
// bit for bit.
void save_draws(const PosteriorDraws& draws, const DrawsMeta& meta, const std::string& path);
LoadedDraws load_draws(const std::string& path);

// FNV-1a 64-bit over a byte range. Exposed for the file-format tests.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace gppm
