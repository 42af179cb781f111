#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nestmax/inference.hpp"
#include "nestmax/kernel.hpp"
#include "nestmax/simulate.hpp"
#include "nestmax/tree.hpp"

namespace nestmax {

// Long-format block-maxima records keyed by (site_id, leaf, replicate).
// Cells absent from the file, or with NA/NaN/empty values, are missing.
struct MaximaDataset {
  std::vector<std::string> leaves;    // first-appearance order
  std::vector<std::string> site_ids;  // first-appearance order
  std::vector<Site> sites;
  int n_rep = 0;
  std::vector<double> values;  // [(leaf*D + site)*n_rep + rep], NaN missing
  long missing_count = 0;

  double value(int leaf, int site, int rep) const {
    return values[(static_cast<std::size_t>(leaf) * sites.size() + site) *
                      n_rep +
                  rep];
  }
};

// Optional equirectangular projection applied at ingest when the data
// carries lon/lat coordinates.
struct Projection {
  double lon0 = 0.0, lat0 = 0.0;  // origin in degrees
  Site apply(double lon, double lat) const;
};

// Header-based CSV reader.  Recognizes the columns site_id, x, y, leaf,
// replicate (or replicate_index) and value; extra columns are ignored.
MaximaDataset read_maxima_csv(std::istream& is,
                              const std::optional<Projection>& proj = {});

// Simulated-sample CSV: columns replicate, leaf, site_id, x, y, value,
// scale; rows ordered leaf-major, then site, then replicate.
void write_sample_csv(std::ostream& os, const MaxStableSample& sample);

MaximaDataset dataset_from_sample(const MaxStableSample& sample);

// Reindex the dataset against the tree's canonical leaf order.  The leaf
// sets must match exactly; the error message lists the difference.
FitData make_fit_data(const MaximaDataset& data, const DependenceTree& tree);

}  // namespace nestmax
