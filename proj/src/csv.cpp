#include "inimnet/csv.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace inim {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) fail(ErrorCode::NonFinite, "format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    fail(ErrorCode::ConfigParseError, "not a number: '" + s + "'");
  }
  return v;
}

std::string emit_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c) out += ',';
    out += table.header[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      fail(ErrorCode::LengthMismatch, "csv row width != header width");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    out += '\n';
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      table.header = split(line);
      first = false;
      continue;
    }
    std::vector<std::string> cells = split(line);
    if (cells.size() != table.header.size()) {
      fail(ErrorCode::ConfigParseError, "csv row width != header width");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    table.rows.push_back(std::move(row));
  }
  if (first) fail(ErrorCode::ConfigParseError, "csv has no header");
  return table;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) fail(ErrorCode::IoError, "read failed: " + path);
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open for writing: " + path);
  out << content;
  if (!out.good()) fail(ErrorCode::IoError, "write failed: " + path);
}

CsvTable history_table(const TrainResult& result, const DepthGrid& grid) {
  CsvTable t;
  t.header = {"epoch", "depth", "loss", "residual", "seconds"};
  for (const EpochRecord& rec : result.history) {
    // Wall-clock timings stay out of the CSV so that seeded runs re-emit
    // byte-identical files; runtime is reported in summary.json instead.
    (void)rec.seconds;
    t.rows.push_back({static_cast<double>(rec.epoch), grid.p_min(), rec.loss,
                      rec.residual, 0.0});
  }
  return t;
}

CsvTable depth_profile_table(const TrainResult& result, const DepthGrid& grid) {
  CsvTable t;
  t.header = {"epoch", "depth", "loss"};
  for (const EpochRecord& rec : result.history) {
    for (std::size_t i = 0; i < rec.profile.size(); ++i) {
      t.rows.push_back({static_cast<double>(rec.epoch), grid[i], rec.profile[i]});
    }
  }
  return t;
}

CsvTable adjoint_table(const AdjointBundle& adjoint,
                       const std::vector<double>& residuals) {
  if (!residuals.empty() && residuals.size() != adjoint.size()) {
    fail(ErrorCode::LengthMismatch, "residual count != adjoint depth count");
  }
  CsvTable t;
  t.header = {"depth"};
  const Eigen::Index n_dim = adjoint.lambda.empty() ? 0 : adjoint.lambda.front().size();
  for (Eigen::Index j = 0; j < n_dim; ++j) {
    t.header.push_back("lambda_" + std::to_string(j));
  }
  t.header.push_back("residual");
  t.header.push_back("lambda_t");
  for (std::size_t i = 0; i < adjoint.size(); ++i) {
    std::vector<double> row;
    row.push_back(adjoint.depths[i]);
    for (Eigen::Index j = 0; j < n_dim; ++j) row.push_back(adjoint.lambda[i][j]);
    row.push_back(residuals.empty() ? 0.0 : residuals[i]);
    row.push_back(adjoint.augmented() && !adjoint.lambda_t.empty() ? adjoint.lambda_t[i]
                                                                   : 0.0);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') continue;  // section header
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigParseError,
           "line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      fail(ErrorCode::ConfigParseError, "line " + std::to_string(lineno) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

namespace {

long parse_long(const std::string& s, const std::string& key) {
  long v = 0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    fail(ErrorCode::ConfigParseError, key + ": not an integer: '" + s + "'");
  }
  return v;
}

}  // namespace

TrainConfig train_config_from(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("mode")) {
    if (*v == "ThroughSystem") {
      cfg.mode = TrainMode::ThroughSystem;
    } else if (*v == "AdjointUpdate") {
      cfg.mode = TrainMode::AdjointUpdate;
    } else {
      fail(ErrorCode::ConfigParseError, "mode: unknown value '" + *v + "'");
    }
  }
  if (auto* v = get("optimizer")) {
    if (*v == "SGD") {
      cfg.optimizer = OptimizerKind::SGD;
    } else if (*v == "Adam") {
      cfg.optimizer = OptimizerKind::Adam;
    } else {
      fail(ErrorCode::ConfigParseError, "optimizer: unknown value '" + *v + "'");
    }
  }
  if (auto* v = get("learning_rate")) cfg.learning_rate = parse_double(*v);
  if (auto* v = get("epochs")) cfg.epochs = static_cast<int>(parse_long(*v, "epochs"));
  if (auto* v = get("batch_size")) {
    cfg.batch_size = static_cast<int>(parse_long(*v, "batch_size"));
  }
  if (auto* v = get("parameter_sharing")) {
    if (*v == "Shared") {
      cfg.parameter_sharing = SharingMode::Shared;
    } else if (*v == "PerLayer") {
      cfg.parameter_sharing = SharingMode::PerLayer;
    } else {
      fail(ErrorCode::ConfigParseError, "parameter_sharing: unknown value '" + *v + "'");
    }
  }
  if (auto* v = get("scheme")) {
    auto mode = parse_jacobian_mode(*v);
    if (!mode) fail(ErrorCode::ConfigParseError, "scheme: unknown value '" + *v + "'");
    cfg.scheme.mode = *mode;
  }
  if (auto* v = get("lr_schedule")) {
    if (*v == "Constant") {
      cfg.lr_schedule = LrScheduleKind::Constant;
    } else if (*v == "ExpDecay") {
      cfg.lr_schedule = LrScheduleKind::ExpDecay;
    } else {
      fail(ErrorCode::ConfigParseError, "lr_schedule: unknown value '" + *v + "'");
    }
  }
  if (auto* v = get("lr_decay_factor")) cfg.lr_decay_factor = parse_double(*v);
  if (auto* v = get("lr_step_epochs")) {
    cfg.lr_step_epochs = static_cast<int>(parse_long(*v, "lr_step_epochs"));
  }
  if (auto* v = get("seed")) {
    cfg.seed = static_cast<std::uint64_t>(parse_long(*v, "seed"));
  }
  cfg.validate();
  return cfg;
}

namespace {

const char* to_string(TrainMode m) {
  return m == TrainMode::ThroughSystem ? "ThroughSystem" : "AdjointUpdate";
}
const char* to_string(OptimizerKind o) {
  return o == OptimizerKind::SGD ? "SGD" : "Adam";
}
const char* to_string(SharingMode s) {
  return s == SharingMode::Shared ? "Shared" : "PerLayer";
}
const char* to_string(LrScheduleKind k) {
  return k == LrScheduleKind::Constant ? "Constant" : "ExpDecay";
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainConfig& config,
                     const LayerParams& layers) {
  nlohmann::json j;
  j["config"] = {{"mode", to_string(config.mode)},
                 {"optimizer", to_string(config.optimizer)},
                 {"learning_rate", config.learning_rate},
                 {"epochs", config.epochs},
                 {"batch_size", config.batch_size},
                 {"parameter_sharing", to_string(config.parameter_sharing)},
                 {"scheme", inim::to_string(config.scheme.mode)},
                 {"lr_schedule", to_string(config.lr_schedule)},
                 {"lr_decay_factor", config.lr_decay_factor},
                 {"lr_step_epochs", config.lr_step_epochs},
                 {"seed", config.seed}};
  j["shared"] = layers.is_shared();
  nlohmann::json blocks = nlohmann::json::array();
  for (const Vec& b : layers.blocks()) {
    blocks.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  j["theta"] = std::move(blocks);
  write_text_file(path, j.dump(2) + "\n");
}

LayerParams load_checkpoint(const std::string& path, TrainConfig* config_out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigParseError, std::string("checkpoint: ") + e.what());
  }
  try {
    if (config_out) {
      std::map<std::string, std::string> kv;
      const auto& c = j.at("config");
      for (auto it = c.begin(); it != c.end(); ++it) {
        if (it->is_string()) {
          kv[it.key()] = it->get<std::string>();
        } else {
          kv[it.key()] = format_double(it->get<double>());
        }
      }
      *config_out = train_config_from(kv);
    }
    std::vector<Vec> blocks;
    for (const auto& b : j.at("theta")) {
      std::vector<double> vals = b.get<std::vector<double>>();
      blocks.push_back(Eigen::Map<const Vec>(vals.data(), vals.size()));
    }
    if (j.at("shared").get<bool>()) {
      if (blocks.size() != 1) {
        fail(ErrorCode::ConfigParseError, "checkpoint: shared layout needs one block");
      }
      return LayerParams::shared(blocks.front());
    }
    return LayerParams::per_layer(std::move(blocks));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigParseError, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace inim
