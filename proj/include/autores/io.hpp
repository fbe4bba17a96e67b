#pragma once

// CSV and JSON output: 17 significant digits, '.' decimal separator, LF line
// endings.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autores/trajectory.hpp"

namespace autores::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// %.17g rendering; lossless for binary64.
[[nodiscard]] std::string format_double(double v);

/// Trajectory rows under the header "<time_label>,<label0>,<label1>".
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t);

/// Metadata sidecar: integrator, step or tolerance, seed, path index,
/// truncation flag and any extra fields.
[[nodiscard]] Json trajectory_meta_json(const Trajectory& t);
void write_trajectory(const std::filesystem::path& csv_path, const Trajectory& t,
                      const Json& extra = Json::object());

/// Generic table writer: header then rows of numbers or strings. close()
/// also writes a sidecar <stem>.json with the columns, row count and `meta`.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
            Json meta = Json::object());
  CsvWriter& cell(double v);
  CsvWriter& cell(const std::string& s);
  CsvWriter& cell(long long v);
  void end_row();
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::vector<std::string> header_;
  Json meta_;
  std::size_t rows_ = 0;
  bool first_ = true;
};

void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace autores::io
