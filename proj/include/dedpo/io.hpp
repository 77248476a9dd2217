#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dedpo/denoiser.hpp"
#include "dedpo/trainer.hpp"
#include "dedpo/world.hpp"

namespace dedpo {

using Json = nlohmann::ordered_json;

// Shortest decimal that round-trips a double exactly.
std::string format_double(double v);

// Pair datasets as CSV with header id,c,x0_*,x1_*,r,z where r is the
// labeling indicator and z is empty on unlabeled rows.  Values use %.17g so a
// round trip reproduces every double bit for bit; lines end in LF.
void write_dataset_csv(const std::string& path, const Dataset& d);
Dataset read_dataset_csv(const std::string& path);

// Model parameters: 16-byte header (magic "DEDPO-NET", format version, data
// dimension, timestep count, zero padding) followed by the flat parameter
// vector as little-endian doubles.
void save_params(const std::string& path, const ToyDenoiser& model, int T);

struct LoadedParams {
  Vec theta;
  int data_dim = 0;
  int T = 0;
};

LoadedParams load_params(const std::string& path);

// Whitespace-separated "id score" lines for the table-driven annotator;
// blank lines and #-comments are skipped.
std::unordered_map<std::int64_t, double> read_fixed_table(
    const std::string& path);

Json run_report_json(const RunReport& r);
void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

void write_trace_csv(const std::string& path,
                     const std::vector<double>& trace);

struct SweepRow {
  std::string estimator;
  std::string annotator;
  double accuracy = 0.0;
  int n_l = 0;
  int n_u = 0;
  int seed = 0;
  double win_rate = 0.0;
  std::optional<double> param_error;
  std::string status = "ok";
};

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows);

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Small self-contained line chart; axes are scaled to the data ranges.
void write_line_svg(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<SvgSeries>& series);

}  // namespace dedpo
