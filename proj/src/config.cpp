#include "nestmax/config.hpp"

#include <fstream>
#include <sstream>

#include "nestmax/util.hpp"

namespace nestmax {

namespace {

void reject_unknown(const nlohmann::json& j,
                    std::initializer_list<const char*> keys,
                    const char* section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) known = true;
    if (!known)
      throw std::invalid_argument(std::string("config: unknown key \"") +
                                  it.key() + "\" in " + section);
  }
}

GridSpec parse_grid(const nlohmann::json& j, const char* section) {
  reject_unknown(j, {"bounds", "nx", "ny"}, section);
  if (!j.contains("bounds") || !j.contains("nx") || !j.contains("ny"))
    throw std::invalid_argument(std::string("config: ") + section +
                                " needs bounds, nx, ny");
  const auto& b = j.at("bounds");
  if (!b.is_array() || b.size() != 4)
    throw std::invalid_argument(std::string("config: ") + section +
                                " bounds must be [xmin, xmax, ymin, ymax]");
  GridSpec g;
  g.bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
              b[3].get<double>()};
  g.nx = j.at("nx").get<int>();
  g.ny = j.at("ny").get<int>();
  return g;
}

SiteList parse_site_list(const nlohmann::json& j) {
  SiteList out;
  for (const auto& e : j) {
    reject_unknown(e, {"id", "x", "y"}, "sites.list entry");
    out.ids.push_back(e.at("id").get<std::string>());
    out.sites.push_back({e.at("x").get<double>(), e.at("y").get<double>()});
  }
  return out;
}

}  // namespace

SiteList RunConfig::resolve_sites() const {
  if (sites_list) return *sites_list;
  if (sites_grid) {
    SiteList out;
    const KnotGrid g = sites_grid->make();
    out.sites = g.knots;
    for (std::size_t i = 0; i < out.sites.size(); ++i)
      out.ids.push_back("s" + std::to_string(i + 1));
    return out;
  }
  throw std::invalid_argument("config: no \"sites\" section");
}

RunConfig parse_config(const nlohmann::json& j) {
  reject_unknown(j,
                 {"seed", "output_dir", "tree", "grid", "sites", "projection",
                  "simulate", "mcmc", "unit_frechet", "extremal", "predict"},
                 "top level");
  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir"))
    cfg.output_dir = j.at("output_dir").get<std::string>();
  if (!j.contains("tree"))
    throw std::invalid_argument("config: missing \"tree\"");
  cfg.tree = tree_spec_from_json(j.at("tree"));
  if (j.contains("grid")) cfg.grid = parse_grid(j.at("grid"), "grid");

  if (j.contains("sites")) {
    const auto& s = j.at("sites");
    reject_unknown(s, {"grid", "list"}, "sites");
    if (s.contains("grid") == s.contains("list"))
      throw std::invalid_argument(
          "config: sites needs exactly one of \"grid\" or \"list\"");
    if (s.contains("grid"))
      cfg.sites_grid = parse_grid(s.at("grid"), "sites.grid");
    else
      cfg.sites_list = parse_site_list(s.at("list"));
  }

  if (j.contains("projection")) {
    const auto& p = j.at("projection");
    reject_unknown(p, {"type", "lon0", "lat0"}, "projection");
    if (p.at("type").get<std::string>() != "equirectangular")
      throw std::invalid_argument(
          "config: only the equirectangular projection is supported");
    cfg.projection = Projection{p.at("lon0").get<double>(),
                                p.at("lat0").get<double>()};
  }

  if (j.contains("simulate")) {
    const auto& s = j.at("simulate");
    reject_unknown(s, {"replicates", "scale", "gev"}, "simulate");
    if (s.contains("replicates"))
      cfg.simulate.replicates = s.at("replicates").get<int>();
    if (s.contains("scale")) {
      const std::string sc = s.at("scale").get<std::string>();
      if (sc == "frechet") cfg.simulate.scale = SampleScale::frechet;
      else if (sc == "gev") cfg.simulate.scale = SampleScale::gev;
      else
        throw std::invalid_argument(
            "config: simulate.scale must be \"frechet\" or \"gev\"");
    }
    if (s.contains("gev")) {
      const auto& g = s.at("gev");
      reject_unknown(g, {"mu", "sigma", "xi"}, "simulate.gev");
      cfg.simulate.gev = GevParams{g.at("mu").get<double>(),
                                   g.at("sigma").get<double>(),
                                   g.at("xi").get<double>()};
    }
    if (cfg.simulate.scale == SampleScale::gev && !cfg.simulate.gev)
      throw std::invalid_argument(
          "config: simulate.scale \"gev\" needs simulate.gev parameters");
  }

  if (j.contains("mcmc")) {
    const auto& m = j.at("mcmc");
    reject_unknown(m,
                   {"iterations", "burn_in", "thinning", "fix_taus",
                    "target_acceptance"},
                   "mcmc");
    if (m.contains("iterations"))
      cfg.mcmc.iterations = m.at("iterations").get<long>();
    if (m.contains("burn_in")) cfg.mcmc.burn_in = m.at("burn_in").get<long>();
    if (m.contains("thinning"))
      cfg.mcmc.thinning = m.at("thinning").get<long>();
    if (m.contains("fix_taus"))
      cfg.mcmc.fix_taus = m.at("fix_taus").get<bool>();
    if (m.contains("target_acceptance"))
      cfg.mcmc.target_acceptance = m.at("target_acceptance").get<double>();
  }
  if (j.contains("unit_frechet"))
    cfg.unit_frechet = j.at("unit_frechet").get<bool>();

  if (j.contains("extremal")) {
    const auto& e = j.at("extremal");
    reject_unknown(e, {"pairs"}, "extremal");
    if (e.contains("pairs"))
      for (const auto& p : e.at("pairs")) {
        if (!p.is_array() || p.size() != 2)
          throw std::invalid_argument(
              "config: extremal.pairs entries must be [leaf_a, leaf_b]");
        cfg.extremal_pairs.emplace_back(p[0].get<std::string>(),
                                        p[1].get<std::string>());
      }
  }

  if (j.contains("predict")) {
    const auto& p = j.at("predict");
    reject_unknown(p, {"p", "labels", "n_sim", "max_draws", "leaves", "sites"},
                   "predict");
    if (p.contains("p"))
      for (const auto& v : p.at("p"))
        cfg.predict.p_grid.push_back(v.get<double>());
    if (p.contains("labels"))
      for (auto it = p.at("labels").begin(); it != p.at("labels").end(); ++it)
        cfg.predict.labels.emplace_back(it.value().get<double>(), it.key());
    if (p.contains("n_sim")) cfg.predict.n_sim = p.at("n_sim").get<int>();
    if (p.contains("max_draws"))
      cfg.predict.max_draws = p.at("max_draws").get<int>();
    if (p.contains("leaves"))
      for (const auto& v : p.at("leaves"))
        cfg.predict.leaves.push_back(v.get<std::string>());
    if (p.contains("sites"))
      for (const auto& v : p.at("sites"))
        cfg.predict.site_ids.push_back(v.get<std::string>());
  }

  // Tree validation happens here so a bad config never reaches compute.
  (void)DependenceTree::build(cfg.tree);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") +
                                e.what());
  }
  return parse_config(j);
}

std::uint64_t config_digest(const std::string& raw) { return fnv1a(raw); }

}  // namespace nestmax
