#include "nestmax/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"
#include "nestmax/config.hpp"
#include "nestmax/dataset.hpp"
#include "nestmax/dependence.hpp"
#include "nestmax/diagnostics.hpp"
#include "nestmax/inference.hpp"
#include "nestmax/simulate.hpp"
#include "nestmax/util.hpp"

namespace nestmax {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

// Outputs are buffered and written only after the command finished, so a
// failed run leaves no partial files behind.
struct OutputSet {
  std::string dir;
  std::vector<std::pair<std::string, std::string>> files;

  void add(const std::string& name, std::string content) {
    files.emplace_back(name, std::move(content));
  }

  void flush(nlohmann::json provenance) {
    provenance["outputs"] = nlohmann::json::array();
    for (const auto& [name, content] : files) {
      (void)content;
      provenance["outputs"].push_back(name);
    }
    add("provenance.json", provenance.dump(2) + "\n");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir);
    for (const auto& [name, content] : files) {
      const std::string path = dir + "/" + name;
      std::ofstream os(path, std::ios::binary);
      if (!os) throw IoError("cannot write " + path);
      os << content;
      if (!os) throw IoError("failed writing " + path);
    }
  }
};

struct Loaded {
  RunConfig cfg;
  std::uint64_t digest = 0;
};

Loaded load(const CommandIo& io) {
  if (io.config_path.empty())
    throw std::invalid_argument("--config is required");
  const std::string raw = read_file(io.config_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") +
                                e.what());
  }
  Loaded out{parse_config(j), config_digest(raw)};
  if (io.seed) out.cfg.seed = *io.seed;
  if (!io.out_dir.empty()) out.cfg.output_dir = io.out_dir;
  if (io.unit_frechet) out.cfg.unit_frechet = true;
  return out;
}

void apply_workers(int workers) {
#ifdef _OPENMP
  if (workers > 0) omp_set_num_threads(workers);
#else
  (void)workers;
#endif
}

nlohmann::json base_provenance(const std::string& command, const Loaded& in) {
  nlohmann::json p;
  p["command"] = command;
  p["version"] = kVersion;
  p["seed"] = in.cfg.seed;
  p["config_digest"] = hex64(in.digest);
  return p;
}

std::vector<KernelBasis> leaf_bases(const DependenceTree& tree,
                                    const KnotGrid& grid) {
  std::vector<KernelBasis> bases;
  for (const auto& leaf : tree.leaves()) bases.push_back({grid, leaf.tau});
  return bases;
}

void warn_spacing(const std::vector<KernelBasis>& bases,
                  const DependenceTree& tree) {
  for (std::size_t k = 0; k < bases.size(); ++k) {
    if (bases[k].grid.size() < 2) continue;
    const SpacingAdvice advice = check_grid_spacing(bases[k]);
    if (advice.warn)
      std::cerr << "warning: leaf " << tree.leaves()[k].id << ": "
                << advice.message << "\n";
  }
}

MaximaDataset load_data(const CommandIo& io, const RunConfig& cfg) {
  if (io.data_path.empty())
    throw std::invalid_argument("--data is required for this command");
  std::ifstream is(io.data_path);
  if (!is) throw IoError("cannot open " + io.data_path);
  return read_maxima_csv(is, cfg.projection);
}

// ---- chain CSV -------------------------------------------------------------

std::string chain_to_csv(const PosteriorChain& chain) {
  std::ostringstream os;
  os << "iteration,parameter_name,value\n";
  for (std::size_t i = 0; i < chain.iterations.size(); ++i)
    for (std::size_t p = 0; p < chain.names.size(); ++p)
      os << chain.iterations[i] << ',' << chain.names[p] << ','
         << format_double(chain.draws[p][i]) << '\n';
  return os.str();
}

struct StoredChain {
  std::vector<std::string> names;
  std::vector<int> iterations;
  std::vector<std::vector<double>> draws;

  const std::vector<double>& param(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return draws[i];
    throw std::invalid_argument("chain file has no parameter \"" + name +
                                "\"");
  }
};

StoredChain read_chain_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) ||
      line.rfind("iteration,parameter_name,value", 0) != 0)
    throw IoError("chain file " + path +
                  " must start with iteration,parameter_name,value");
  StoredChain chain;
  std::map<std::string, std::size_t> index;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw IoError("chain file: bad row at line " + std::to_string(line_no));
    const int it = std::stoi(line.substr(0, c1));
    const std::string name = line.substr(c1 + 1, c2 - c1 - 1);
    const double value = std::stod(line.substr(c2 + 1));
    auto [pos, fresh] = index.try_emplace(name, chain.names.size());
    if (fresh) {
      chain.names.push_back(name);
      chain.draws.emplace_back();
    }
    if (pos->second == 0) chain.iterations.push_back(it);
    chain.draws[pos->second].push_back(value);
  }
  if (chain.names.empty()) throw IoError("chain file " + path + " is empty");
  const std::size_t len = chain.draws[0].size();
  for (const auto& d : chain.draws)
    if (d.size() != len)
      throw IoError("chain file " + path + " has ragged parameters");
  return chain;
}

// Posterior parameter draws matched to the tree by name.
std::vector<ParameterDraw> chain_draws(const StoredChain& chain,
                                       const DependenceTree& tree,
                                       int max_draws) {
  std::vector<const std::vector<double>*> acol, tcol;
  for (int v = 0; v < tree.node_count(); ++v)
    acol.push_back(&chain.param(tree.node_label(v)));
  for (const auto& leaf : tree.leaves())
    tcol.push_back(&chain.param("tau_" + leaf.id));
  const std::size_t n = acol[0]->size();
  std::vector<std::size_t> pick;
  if (max_draws > 0 && static_cast<std::size_t>(max_draws) < n) {
    for (int i = 0; i < max_draws; ++i)
      pick.push_back(i * n / max_draws);
  } else {
    for (std::size_t i = 0; i < n; ++i) pick.push_back(i);
  }
  std::vector<ParameterDraw> draws;
  draws.reserve(pick.size());
  for (std::size_t i : pick) {
    ParameterDraw d;
    for (const auto* col : acol) d.alphas.push_back((*col)[i]);
    for (const auto* col : tcol) d.taus.push_back((*col)[i]);
    draws.push_back(std::move(d));
  }
  return draws;
}

nlohmann::json summarize_chain(const PosteriorChain& chain) {
  nlohmann::json out;
  out["iterations"] = chain.R;
  out["burn_in"] = chain.burn_in;
  out["thinning"] = chain.thinning;
  out["retained"] = chain.length();
  out["seed"] = chain.seed;
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t p = 0; p < chain.names.size(); ++p) {
    const auto& v = chain.draws[p];
    nlohmann::json e;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    e["mean"] = mean;
    e["median"] = median(v);
    e["q025"] = quantile(v, 0.025);
    e["q975"] = quantile(v, 0.975);
    if (v.size() >= 10) {
      const EssResult r = ess(v);
      e["ess"] = r.ess;
    }
    params[chain.names[p]] = e;
  }
  out["parameters"] = params;
  nlohmann::json blocks = nlohmann::json::object();
  for (const auto& b : chain.blocks) {
    nlohmann::json e;
    e["acceptance_rate"] = b.rate();
    e["proposals"] = b.proposals;
    e["proposal_scale"] = b.scale;
    blocks[b.name] = e;
  }
  out["blocks"] = blocks;
  return out;
}

std::string margins_to_csv(const MarginsFit& fit, const DependenceTree& tree,
                           const MaximaDataset& data) {
  std::ostringstream os;
  os << "leaf,site_id,x,y,mu,sigma,xi,converged,n\n";
  for (const MarginCell& c : fit.cells)
    os << tree.leaves()[c.leaf].id << ',' << data.site_ids[c.site] << ','
       << format_double(data.sites[c.site].x) << ','
       << format_double(data.sites[c.site].y) << ','
       << format_double(c.params.mu) << ',' << format_double(c.params.sigma)
       << ',' << format_double(c.params.xi) << ','
       << (c.converged ? 1 : 0) << ',' << c.n << '\n';
  return os.str();
}

struct MarginsTable {
  // (leaf, site_id) -> params
  std::map<std::pair<std::string, std::string>, GevParams> cells;
};

MarginsTable read_margins_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) ||
      line.rfind("leaf,site_id,x,y,mu,sigma,xi", 0) != 0)
    throw IoError("margins file " + path + " has an unexpected header");
  MarginsTable table;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f;
    std::string field;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(field);
        field.clear();
      } else if (ch != '\r') {
        field += ch;
      }
    }
    f.push_back(field);
    if (f.size() < 7) throw IoError("margins file: short row");
    table.cells[{f[0], f[1]}] =
        GevParams{std::stod(f[4]), std::stod(f[5]), std::stod(f[6])};
  }
  return table;
}

}  // namespace

// ---- commands ---------------------------------------------------------------

int cmd_simulate(const CommandIo& io) {
  const Loaded in = load(io);
  apply_workers(io.workers);
  const RunConfig& cfg = in.cfg;
  if (cfg.simulate.replicates < 1)
    throw std::invalid_argument("config: simulate.replicates must be >= 1");

  const DependenceTree tree = DependenceTree::build(cfg.tree);
  const KnotGrid grid = cfg.grid.make();
  const std::vector<KernelBasis> bases = leaf_bases(tree, grid);
  warn_spacing(bases, tree);
  const SiteList sites = cfg.resolve_sites();

  MaxStableSample sample = simulate(tree, bases, sites.sites,
                                    cfg.simulate.replicates, cfg.seed);
  sample.site_ids = sites.ids;
  if (cfg.simulate.scale == SampleScale::gev) {
    const std::vector<GevParams> margins(
        sample.leaves.size() * sample.sites.size(), *cfg.simulate.gev);
    sample = to_gev(sample, margins);
  }

  OutputSet out;
  out.dir = cfg.output_dir;
  std::ostringstream csv;
  write_sample_csv(csv, sample);
  out.add("sample.csv", csv.str());
  out.flush(base_provenance("simulate", in));
  return kExitOk;
}

int cmd_fit(const CommandIo& io) {
  const Loaded in = load(io);
  apply_workers(io.workers);
  const RunConfig& cfg = in.cfg;
  if (cfg.mcmc.iterations < 1)
    throw std::invalid_argument("config: mcmc.iterations must be >= 1");
  if (io.chains < 1) throw std::invalid_argument("--chains must be >= 1");

  const DependenceTree tree = DependenceTree::build(cfg.tree);
  const KnotGrid grid = cfg.grid.make();
  warn_spacing(leaf_bases(tree, grid), tree);
  if (io.data_path.empty())
    throw std::invalid_argument("--data is required for fit");
  const std::string raw_data = read_file(io.data_path);
  std::istringstream data_is(raw_data);
  const MaximaDataset data = read_maxima_csv(data_is, cfg.projection);
  FitData fit = make_fit_data(data, tree);
  if (data.missing_count > 0)
    std::cerr << "note: " << data.missing_count
              << " missing cells dropped from the likelihood\n";

  OutputSet out;
  out.dir = cfg.output_dir;

  if (!cfg.unit_frechet) {
    const MarginsFit margins = fit_margins_gev(fit);
    for (const auto& w : margins.warnings)
      std::cerr << "warning: " << w << "\n";
    out.add("margins.csv", margins_to_csv(margins, tree, data));
    fit = margins.frechet;
  }

  const Prior prior = Prior::from_sites(fit.sites);
  McmcConfig mc = cfg.mcmc;
  mc.seed = cfg.seed;

  for (int c = 0; c < io.chains; ++c) {
    const PosteriorChain chain = run_chain(fit, tree, grid, prior, mc, c);
    out.add("chain_" + std::to_string(c) + ".csv", chain_to_csv(chain));
    out.add("summary_" + std::to_string(c) + ".json",
            summarize_chain(chain).dump(2) + "\n");
  }

  nlohmann::json prov = base_provenance("fit", in);
  prov["data_digest"] = hex64(fnv1a(raw_data));
  prov["chains"] = io.chains;
  out.flush(std::move(prov));
  return kExitOk;
}

int cmd_extremal(const CommandIo& io) {
  const Loaded in = load(io);
  apply_workers(io.workers);
  const RunConfig& cfg = in.cfg;
  DependenceTree tree = DependenceTree::build(cfg.tree);
  const KnotGrid grid = cfg.grid.make();

  // Parameters: posterior medians when a chain is given, else the tree's.
  if (!io.chain_path.empty()) {
    const StoredChain chain = read_chain_csv(io.chain_path);
    std::vector<double> alphas, taus;
    for (int v = 0; v < tree.node_count(); ++v)
      alphas.push_back(median(chain.param(tree.node_label(v))));
    for (const auto& leaf : tree.leaves())
      taus.push_back(median(chain.param("tau_" + leaf.id)));
    tree = DependenceTree::build(assign_parameters(tree, alphas, taus));
  }
  const std::vector<KernelBasis> bases = leaf_bases(tree, grid);

  // Sites: from the dataset when given, else from the config.
  std::optional<MaximaDataset> data;
  SiteList sites;
  if (!io.data_path.empty()) {
    data = load_data(io, cfg);
    sites.ids = data->site_ids;
    sites.sites = data->sites;
  } else {
    sites = cfg.resolve_sites();
  }

  // Deduplicate leaf pairs (theta is symmetric).
  std::vector<std::pair<std::string, std::string>> pairs;
  std::set<std::pair<std::string, std::string>> seen;
  for (auto [a, b] : cfg.extremal_pairs) {
    auto key = a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (!seen.insert(key).second) {
      std::cerr << "warning: duplicate extremal pair (" << a << ", " << b
                << ") ignored\n";
      continue;
    }
    pairs.emplace_back(a, b);
  }

  std::ostringstream csv;
  csv << "leaf_a,leaf_b,site_i,site_j,distance,theta,source,ci_low,ci_high\n";
  const int D = static_cast<int>(sites.sites.size());
  for (const auto& [a, b] : pairs) {
    (void)tree.leaf_index(a);
    (void)tree.leaf_index(b);
    for (int i = 0; i < D; ++i)
      for (int j = i; j < D; ++j) {
        // i == j rows give the coincident-site limits (a nugget row for
        // a == b).
        const ExtremalCoefficient theta = extremal_coefficient(
            tree, bases, a, sites.sites[i], b, sites.sites[j]);
        csv << a << ',' << b << ',' << sites.ids[i] << ',' << sites.ids[j]
            << ',' << format_double(distance(sites.sites[i], sites.sites[j]))
            << ',' << format_double(theta.value) << ",model,,\n";
      }
    if (data) {
      const int ka = static_cast<int>(std::find(data->leaves.begin(),
                                                data->leaves.end(), a) -
                                      data->leaves.begin());
      const int kb = static_cast<int>(std::find(data->leaves.begin(),
                                                data->leaves.end(), b) -
                                      data->leaves.begin());
      if (ka >= static_cast<int>(data->leaves.size()) ||
          kb >= static_cast<int>(data->leaves.size()))
        throw std::invalid_argument("extremal: data lacks leaf " + a + " or " +
                                    b);
      std::vector<double> va(data->n_rep), vb(data->n_rep);
      for (int i = 0; i < D; ++i)
        for (int j = (a == b ? i + 1 : i); j < D; ++j) {
          int n = 0;
          for (int r = 0; r < data->n_rep; ++r) {
            const double xa = data->value(ka, i, r);
            const double xb = data->value(kb, j, r);
            if (std::isnan(xa) || std::isnan(xb)) continue;
            va[n] = xa;
            vb[n] = xb;
            ++n;
          }
          if (n < 20) continue;  // too few complete pairs
          const EmpiricalTheta t = empirical_extremal_coefficient(
              std::span(va.data(), n), std::span(vb.data(), n));
          csv << a << ',' << b << ',' << sites.ids[i] << ',' << sites.ids[j]
              << ','
              << format_double(distance(sites.sites[i], sites.sites[j]))
              << ',' << format_double(t.estimate) << ",empirical,"
              << format_double(t.ci_low) << ',' << format_double(t.ci_high)
              << '\n';
        }
    }
  }

  OutputSet out;
  out.dir = cfg.output_dir;
  out.add("extremal.csv", csv.str());
  nlohmann::json prov = base_provenance("extremal", in);
  if (!io.chain_path.empty()) prov["chain"] = io.chain_path;
  out.flush(std::move(prov));
  return kExitOk;
}

int cmd_diagnose(const CommandIo& io) {
  const Loaded in = load(io);
  if (io.chain_path.empty())
    throw std::invalid_argument("--chain is required for diagnose");
  const StoredChain chain = read_chain_csv(io.chain_path);

  OutputSet out;
  out.dir = in.cfg.output_dir;
  nlohmann::json summary = nlohmann::json::object();
  for (std::size_t p = 0; p < chain.names.size(); ++p) {
    std::string fname = chain.names[p];
    std::replace(fname.begin(), fname.end(), ';', '-');
    std::ostringstream trace, acf_os;
    export_trace(trace, acf_os, chain.iterations, chain.draws[p], 200);
    out.add("trace_" + fname + ".csv", trace.str());
    out.add("acf_" + fname + ".csv", acf_os.str());
    nlohmann::json e;
    if (chain.draws[p].size() >= 10) {
      const EssResult r = ess(chain.draws[p]);
      e["ess"] = r.ess;
      e["degenerate"] = r.degenerate;
    }
    e["length"] = chain.draws[p].size();
    e["median"] = median(chain.draws[p]);
    summary[chain.names[p]] = e;
  }
  out.add("ess.json", summary.dump(2) + "\n");
  nlohmann::json prov = base_provenance("diagnose", in);
  prov["chain"] = io.chain_path;
  out.flush(std::move(prov));
  return kExitOk;
}

int cmd_predict(const CommandIo& io) {
  const Loaded in = load(io);
  apply_workers(io.workers);
  const RunConfig& cfg = in.cfg;
  if (io.chain_path.empty())
    throw std::invalid_argument("--chain is required for predict");
  if (cfg.predict.p_grid.empty())
    throw std::invalid_argument("config: predict.p is empty");

  const DependenceTree tree = DependenceTree::build(cfg.tree);
  const KnotGrid grid = cfg.grid.make();
  const StoredChain chain = read_chain_csv(io.chain_path);
  const std::vector<ParameterDraw> draws =
      chain_draws(chain, tree, cfg.predict.max_draws);

  const SiteList all_sites = cfg.resolve_sites();
  std::vector<int> site_idx;
  if (cfg.predict.site_ids.empty()) {
    for (int i = 0; i < static_cast<int>(all_sites.ids.size()); ++i)
      site_idx.push_back(i);
  } else {
    for (const auto& id : cfg.predict.site_ids) {
      const auto it =
          std::find(all_sites.ids.begin(), all_sites.ids.end(), id);
      if (it == all_sites.ids.end())
        throw std::invalid_argument("predict: unknown site id \"" + id + "\"");
      site_idx.push_back(static_cast<int>(it - all_sites.ids.begin()));
    }
  }
  std::vector<Site> sites;
  std::vector<std::string> site_ids;
  for (int i : site_idx) {
    sites.push_back(all_sites.sites[i]);
    site_ids.push_back(all_sites.ids[i]);
  }

  std::vector<int> leaf_subset;
  if (cfg.predict.leaves.empty()) {
    for (int k = 0; k < tree.leaf_count(); ++k) leaf_subset.push_back(k);
  } else {
    for (const auto& id : cfg.predict.leaves)
      leaf_subset.push_back(tree.leaf_index(id));
  }

  std::vector<GevParams> margins;
  if (!io.margins_path.empty()) {
    const MarginsTable table = read_margins_csv(io.margins_path);
    for (int li : leaf_subset)
      for (const auto& id : site_ids) {
        const auto it = table.cells.find({tree.leaves()[li].id, id});
        if (it == table.cells.end())
          throw std::invalid_argument("predict: margins file lacks (" +
                                      tree.leaves()[li].id + ", " + id + ")");
        margins.push_back(it->second);
      }
  }

  const std::vector<QuantileRow> rows = posterior_predictive_max_quantile(
      draws, tree, grid, sites, leaf_subset, cfg.predict.p_grid,
      cfg.predict.labels, cfg.predict.n_sim, cfg.seed, margins);

  std::ostringstream csv;
  csv << "p,gumbel_coordinate,z_p,label\n";
  for (const auto& r : rows)
    csv << format_double(r.p) << ',' << format_double(r.gumbel) << ','
        << format_double(r.z) << ',' << r.label << '\n';

  OutputSet out;
  out.dir = cfg.output_dir;
  out.add("quantiles.csv", csv.str());
  nlohmann::json prov = base_provenance("predict", in);
  prov["chain"] = io.chain_path;
  if (!io.margins_path.empty()) prov["margins"] = io.margins_path;
  out.flush(std::move(prov));
  return kExitOk;
}

}  // namespace nestmax
