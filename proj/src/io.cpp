#include "autores/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

namespace autores::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("io: cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t) {
  std::ofstream out = open_out(path);
  out << t.time_label << ',' << t.labels[0] << ',' << t.labels[1] << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << format_double(t.times[i]) << ',' << format_double(t.states[i][0]) << ','
        << format_double(t.states[i][1]) << '\n';
  }
  if (!out) throw std::runtime_error("io: write failed for " + path.string());
}

Json trajectory_meta_json(const Trajectory& t) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["columns"] = {t.time_label, t.labels[0], t.labels[1]};
  j["integrator"] = t.meta.integrator;
  j["step_or_tol"] = t.meta.step_or_tol;
  if (t.meta.seed) {
    j["seed"] = *t.meta.seed;
  } else {
    j["seed"] = "deterministic";
  }
  j["path_index"] = t.meta.path_index;
  j["truncated"] = t.meta.truncated;
  if (t.meta.truncated) j["truncated_at"] = t.meta.truncated_at;
  j["samples"] = t.size();
  return j;
}

void write_trajectory(const std::filesystem::path& csv_path, const Trajectory& t, const Json& extra) {
  write_trajectory_csv(csv_path, t);
  Json meta = trajectory_meta_json(t);
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  std::filesystem::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  write_json(sidecar, meta);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
                     Json meta)
    : path_(path), out_(open_out(path)), header_(header), meta_(std::move(meta)) {
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

CsvWriter& CsvWriter::cell(const std::string& s) {
  if (!first_) out_ << ',';
  out_ << s;
  first_ = false;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  ++rows_;
  first_ = true;
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw std::runtime_error("io: write failed for " + path_.string());
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["columns"] = header_;
  j["rows"] = rows_;
  for (const auto& [k, v] : meta_.items()) j[k] = v;
  std::filesystem::path sidecar = path_;
  sidecar.replace_extension(".json");
  write_json(sidecar, j);
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("io: write failed for " + path.string());
}

}  // namespace autores::io
