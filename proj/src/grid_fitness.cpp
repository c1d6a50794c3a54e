#include "sdpso/grid_fitness.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace sdpso {

double combined_grid_fitness(const GroundTruthGrids& predicted, const GroundTruthGrids& truth, double w_topo,
                             double w_sed) {
  if (!(w_topo >= 0.0 && w_sed >= 0.0) || !(w_topo + w_sed > 0.0)) {
    throw ConfigError("grid fitness weights: must be >= 0 with positive sum");
  }
  double total = 0.0;
  if (w_topo > 0.0) total += w_topo * topo_fitness(predicted.final_topography, truth.final_topography);
  if (w_sed > 0.0) total += w_sed * sed_fitness(predicted.sediment_series, truth.sediment_series);
  return total;
}

Grid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof()) throw DataError(path.string() + ": non-numeric entry on row " + std::to_string(rows.size() + 1));
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path.string() + ": ragged row " + std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data");
  Grid grid(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (!std::isfinite(rows[r][c])) throw DataError(path.string() + ": non-finite value");
      grid(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return grid;
}

SedimentSeries load_sediment_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sediment file " + path.string());
  std::map<std::pair<long, long>, double> cells;
  std::map<long, int> times, locations;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string t, loc, val;
    if (!std::getline(ss, t, ',') || !std::getline(ss, loc, ',') || !std::getline(ss, val)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected time,location_id,value");
    }
    long ti, li;
    double v;
    try {
      ti = std::stol(t);
      li = std::stol(loc);
      v = std::stod(val);
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (!std::isfinite(v)) throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
    if (!cells.emplace(std::pair{ti, li}, v).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate (time, location)");
    }
    times[ti] = 0;
    locations[li] = 0;
  }
  if (cells.empty()) throw DataError(path.string() + ": no data");
  if (cells.size() != times.size() * locations.size()) {
    throw DataError(path.string() + ": location count differs between time steps");
  }
  int i = 0;
  for (auto& [k, idx] : times) idx = i++;
  i = 0;
  for (auto& [k, idx] : locations) idx = i++;
  SedimentSeries series(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(locations.size()));
  for (const auto& [key, v] : cells) series(times[key.first], locations[key.second]) = v;
  return series;
}

}  // namespace sdpso
