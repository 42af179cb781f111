#include "nestmax/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "nestmax/util.hpp"

namespace nestmax {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(std::string("data: cannot parse ") + what + " \"" + s +
                  "\"");
  }
}

}  // namespace

Site Projection::apply(double lon, double lat) const {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  return {kEarthRadiusKm * (lon - lon0) * kDegToRad *
              std::cos(lat0 * kDegToRad),
          kEarthRadiusKm * (lat - lat0) * kDegToRad};
}

MaximaDataset read_maxima_csv(std::istream& is,
                              const std::optional<Projection>& proj) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("data: empty CSV");
  const std::vector<std::string> header = split_csv_line(line);
  int c_site = -1, c_x = -1, c_y = -1, c_leaf = -1, c_rep = -1, c_val = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const std::string& h = header[i];
    if (h == "site_id" || h == "site") c_site = i;
    else if (h == "x" || h == "lon") c_x = i;
    else if (h == "y" || h == "lat") c_y = i;
    else if (h == "leaf" || h == "variable") c_leaf = i;
    else if (h == "replicate" || h == "replicate_index" || h == "rep")
      c_rep = i;
    else if (h == "value") c_val = i;
  }
  if (c_site < 0 || c_x < 0 || c_y < 0 || c_leaf < 0 || c_rep < 0 || c_val < 0)
    throw IoError(
        "data: header must provide site_id, x, y, leaf, replicate, value");

  struct Record {
    int site, leaf;
    long rep;
    double value;
  };
  std::vector<Record> records;
  std::vector<std::string> leaves, site_ids;
  std::vector<Site> sites;
  std::map<std::string, int> leaf_idx, site_idx;
  std::map<long, int> rep_idx;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() < header.size())
      throw IoError("data: short row at line " + std::to_string(line_no));
    const std::string& sid = f[c_site];
    const double cx = parse_double(f[c_x], "x");
    const double cy = parse_double(f[c_y], "y");
    Site s = proj ? proj->apply(cx, cy) : Site{cx, cy};
    auto [sit, fresh] = site_idx.try_emplace(
        sid, static_cast<int>(site_ids.size()));
    if (fresh) {
      site_ids.push_back(sid);
      sites.push_back(s);
    } else {
      const Site& prev = sites[sit->second];
      if (std::abs(prev.x - s.x) > 1e-9 || std::abs(prev.y - s.y) > 1e-9)
        throw std::invalid_argument("data: site \"" + sid +
                                    "\" has inconsistent coordinates");
    }
    auto [lit, lfresh] =
        leaf_idx.try_emplace(f[c_leaf], static_cast<int>(leaves.size()));
    if (lfresh) leaves.push_back(f[c_leaf]);
    long rep;
    try {
      rep = std::stol(f[c_rep]);
    } catch (const std::exception&) {
      throw IoError("data: bad replicate index at line " +
                    std::to_string(line_no));
    }
    rep_idx.try_emplace(rep, 0);
    const double value = is_missing(f[c_val]) ? kNaN
                                              : parse_double(f[c_val], "value");
    records.push_back({sit->second, lit->second, rep, value});
  }
  if (records.empty()) throw IoError("data: no records");

  int next = 0;
  for (auto& [rep, idx] : rep_idx) idx = next++;

  MaximaDataset ds;
  ds.leaves = std::move(leaves);
  ds.site_ids = std::move(site_ids);
  ds.sites = std::move(sites);
  ds.n_rep = next;
  ds.values.assign(static_cast<std::size_t>(ds.leaves.size()) *
                       ds.sites.size() * ds.n_rep,
                   kNaN);
  std::vector<bool> seen(ds.values.size(), false);
  for (const Record& rec : records) {
    const std::size_t idx =
        (static_cast<std::size_t>(rec.leaf) * ds.sites.size() + rec.site) *
            ds.n_rep +
        rep_idx.at(rec.rep);
    if (seen[idx])
      throw std::invalid_argument(
          "data: duplicate (site, leaf, replicate) record");
    seen[idx] = true;
    ds.values[idx] = rec.value;
  }
  for (double v : ds.values)
    if (std::isnan(v)) ++ds.missing_count;
  return ds;
}

void write_sample_csv(std::ostream& os, const MaxStableSample& sample) {
  os << "replicate,leaf,site_id,x,y,value,scale\n";
  const char* scale =
      sample.scale == SampleScale::frechet ? "frechet" : "gev";
  const int D = static_cast<int>(sample.sites.size());
  for (int li = 0; li < static_cast<int>(sample.leaves.size()); ++li)
    for (int d = 0; d < D; ++d)
      for (int r = 0; r < sample.n_rep; ++r) {
        const double v = sample.at(li, d, r);
        os << r << ',' << sample.leaves[li] << ',' << sample.site_ids[d]
           << ',' << format_double(sample.sites[d].x) << ','
           << format_double(sample.sites[d].y) << ','
           << (std::isnan(v) ? std::string("NA") : format_double(v)) << ','
           << scale << '\n';
      }
}

MaximaDataset dataset_from_sample(const MaxStableSample& sample) {
  MaximaDataset ds;
  ds.leaves = sample.leaves;
  ds.site_ids = sample.site_ids;
  ds.sites = sample.sites;
  ds.n_rep = sample.n_rep;
  ds.values = sample.values;
  for (double v : ds.values)
    if (std::isnan(v)) ++ds.missing_count;
  return ds;
}

FitData make_fit_data(const MaximaDataset& data, const DependenceTree& tree) {
  std::vector<std::string> tree_leaves, data_leaves = data.leaves;
  for (const auto& leaf : tree.leaves()) tree_leaves.push_back(leaf.id);
  std::vector<std::string> ts = tree_leaves, dsrt = data_leaves;
  std::sort(ts.begin(), ts.end());
  std::sort(dsrt.begin(), dsrt.end());
  if (ts != dsrt) {
    std::ostringstream os;
    os << "data leaves do not match tree leaves;";
    std::vector<std::string> only_tree, only_data;
    std::set_difference(ts.begin(), ts.end(), dsrt.begin(), dsrt.end(),
                        std::back_inserter(only_tree));
    std::set_difference(dsrt.begin(), dsrt.end(), ts.begin(), ts.end(),
                        std::back_inserter(only_data));
    os << " missing from data:";
    for (const auto& s : only_tree) os << ' ' << s;
    os << "; not in tree:";
    for (const auto& s : only_data) os << ' ' << s;
    throw std::invalid_argument(os.str());
  }

  FitData fit;
  fit.sites = data.sites;
  fit.n_leaves = static_cast<int>(tree_leaves.size());
  fit.n_sites = static_cast<int>(data.sites.size());
  fit.n_rep = data.n_rep;
  fit.values.resize(static_cast<std::size_t>(fit.n_leaves) * fit.n_sites *
                    fit.n_rep);
  for (int k = 0; k < fit.n_leaves; ++k) {
    const auto it = std::find(data_leaves.begin(), data_leaves.end(),
                              tree_leaves[k]);
    const int src = static_cast<int>(it - data_leaves.begin());
    for (int d = 0; d < fit.n_sites; ++d)
      for (int r = 0; r < fit.n_rep; ++r)
        fit.values[(static_cast<std::size_t>(k) * fit.n_sites + d) *
                       fit.n_rep +
                   r] = data.value(src, d, r);
  }
  return fit;
}

}  // namespace nestmax
