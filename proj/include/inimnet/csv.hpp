#pragma once

#include "inimnet/core.hpp"
#include "inimnet/train.hpp"

#include <map>
#include <string>
#include <vector>

namespace inim {

/// Shortest decimal representation that round-trips the exact double.
std::string format_double(double v);
double parse_double(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::string emit_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// history.csv rows: epoch, depth (= p_min), loss, residual, seconds.
CsvTable history_table(const TrainResult& result, const DepthGrid& grid);

/// depth_profile.csv rows: epoch, depth, loss — one row per depth per epoch.
CsvTable depth_profile_table(const TrainResult& result, const DepthGrid& grid);

/// Adjoint dump rows: depth, Lambda components, residual norm, Lambda_t.
CsvTable adjoint_table(const AdjointBundle& adjoint,
                       const std::vector<double>& residuals);

/// Flat key=value config text; '#' comments and [section] headers are
/// skipped, later keys override earlier ones.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// TrainConfig from parsed keys; unrelated keys are left for the caller.
TrainConfig train_config_from(const std::map<std::string, std::string>& kv);

void save_checkpoint(const std::string& path, const TrainConfig& config,
                     const LayerParams& layers);
LayerParams load_checkpoint(const std::string& path, TrainConfig* config_out = nullptr);

}  // namespace inim
