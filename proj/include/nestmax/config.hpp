#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nestmax/dataset.hpp"
#include "nestmax/gev.hpp"
#include "nestmax/inference.hpp"
#include "nestmax/kernel.hpp"
#include "nestmax/tree.hpp"

namespace nestmax {

struct GridSpec {
  Rect bounds{0, 1, 0, 1};
  int nx = 1, ny = 1;

  KnotGrid make() const { return make_regular_grid(bounds, nx, ny); }
};

struct SiteList {
  std::vector<std::string> ids;
  std::vector<Site> sites;
};

struct SimulateConfig {
  int replicates = 1;
  SampleScale scale = SampleScale::frechet;
  std::optional<GevParams> gev;  // constant margins when scale == gev
};

struct PredictConfig {
  std::vector<double> p_grid;
  std::vector<std::pair<double, std::string>> labels;
  int n_sim = 50;
  int max_draws = 200;
  std::vector<std::string> leaves;    // empty: all
  std::vector<std::string> site_ids;  // empty: all
};

// One JSON file drives every command; unknown keys are rejected so typos
// fail fast instead of silently using defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  TreeSpec tree;
  GridSpec grid;                       // knot grid
  std::optional<GridSpec> sites_grid;  // simulation sites
  std::optional<SiteList> sites_list;
  std::optional<Projection> projection;  // lon/lat data ingest
  SimulateConfig simulate;
  McmcConfig mcmc;
  bool unit_frechet = false;
  std::vector<std::pair<std::string, std::string>> extremal_pairs;
  PredictConfig predict;

  // Sites for simulation/extremal work when no dataset is given.
  SiteList resolve_sites() const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

// FNV-1a digest of the raw config bytes, for provenance.
std::uint64_t config_digest(const std::string& raw);

}  // namespace nestmax
