#pragma once

// Fitness measures comparing simulated landscape output with observations:
// final-topography RMSE and sediment erosion/deposition RMSE.

#include "sdpso/domain.hpp"

#include <cmath>
#include <filesystem>

namespace sdpso {

using Grid = Eigen::MatrixXd;

/// Sediment series, one row per time step and one column per observed location.
using SedimentSeries = Eigen::MatrixXd;

struct GroundTruthGrids {
  Grid final_topography;
  SedimentSeries sediment_series;
};

/// sqrt(mean((truth - predicted)^2)) over all N cells.
template <typename DerivedA, typename DerivedB>
double topo_fitness(const Eigen::MatrixBase<DerivedA>& predicted, const Eigen::MatrixBase<DerivedB>& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw DataError("topo_fitness: grid shapes differ");
  }
  if (predicted.size() == 0) throw DataError("topo_fitness: empty grid");
  return std::sqrt((truth - predicted).squaredNorm() / static_cast<double>(predicted.size()));
}

/// sqrt(sum_t sum_j (z - g)^2 / (T + J)) for T time steps and J locations.
template <typename DerivedA, typename DerivedB>
double sed_fitness(const Eigen::MatrixBase<DerivedA>& predicted, const Eigen::MatrixBase<DerivedB>& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw DataError("sed_fitness: series shapes differ (T or J mismatch)");
  }
  if (predicted.size() == 0) throw DataError("sed_fitness: empty series");
  return std::sqrt((truth - predicted).squaredNorm() / static_cast<double>(predicted.rows() + predicted.cols()));
}

double combined_grid_fitness(const GroundTruthGrids& predicted, const GroundTruthGrids& truth,
                             double w_topo = 0.5, double w_sed = 0.5);

/// Reads a whitespace-separated matrix, one row per line. Blank lines and
/// lines starting with '#' are skipped.
Grid load_grid(const std::filesystem::path& path);

/// Reads a CSV of (time, location_id, value) rows, with an optional header.
/// Time steps and location ids are ordered ascending; every (time, location)
/// pair must be present exactly once.
SedimentSeries load_sediment_csv(const std::filesystem::path& path);

}  // namespace sdpso
