#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fwem/array3.hpp"
#include "fwem/inversion.hpp"
#include "fwem/survey.hpp"

namespace fwem {

/// Flat `key = value` settings. `#` starts a comment; `include = file`
/// reads another file in place, relative to the including file. Later
/// assignments override earlier ones.
class Config {
 public:
  [[nodiscard]] static Config load(const std::filesystem::path& path);
  [[nodiscard]] static Config parse(std::string_view text, const std::filesystem::path& base_dir = {});

  void set(const std::string& key, const std::string& value);
  [[nodiscard]] bool has(const std::string& key) const;

  /// Typed getters throw fwem::Error("missing_key") or ("bad_value").
  [[nodiscard]] std::string get(const std::string& key) const;
  [[nodiscard]] std::string get(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] int get_int(const std::string& key) const;
  [[nodiscard]] int get_int(const std::string& key, int fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
  /// Comma- or space-separated numbers.
  [[nodiscard]] std::vector<double> get_doubles(const std::string& key) const;
  [[nodiscard]] std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  /// Path value resolved against the directory of the file that set it.
  [[nodiscard]] std::filesystem::path get_path(const std::string& key) const;

 private:
  struct Entry {
    std::string value;
    std::filesystem::path dir;
  };
  void parse_into(std::string_view text, const std::filesystem::path& base_dir, int depth);
  const Entry& find(const std::string& key) const;

  std::map<std::string, Entry> entries_;
};

/// Float32 little-endian volume, x fastest, with a `<path>.hdr` sidecar
/// holding n1, n2, n3 and the format.
struct VolumeFile {
  Dims dims{};
  std::vector<double> values;
};
void write_volume(const std::filesystem::path& path, Dims dims, std::span<const double> values);
[[nodiscard]] VolumeFile read_volume(const std::filesystem::path& path);

/// Grid from nx/ny/nz, dx/dy/dz, optional x0/y0/z0, stretch_*, npml.
[[nodiscard]] GridSpec grid_spec_from_config(const Config& cfg);

/// Sources: id,x,y,z,dx,dy,dz,kind,moment with kind electric|magnetic.
/// Receivers: id,x,y,z,components with components like `Ex;Ey;Hz`.
[[nodiscard]] Survey read_survey(const std::filesystem::path& sources, const std::filesystem::path& receivers,
                                 std::vector<double> freqs);
void write_sources(std::ostream& os, const Survey& survey);
void write_receivers(std::ostream& os, const Survey& survey);

/// Data CSV: src_id,rcv_id,component,freq_hz,real,imag,weight.
void write_data(std::ostream& os, const Survey& survey, const Dataset& data);
[[nodiscard]] Dataset read_data(std::istream& is, const Survey& survey);
void write_data_file(const std::filesystem::path& path, const Survey& survey, const Dataset& data);
[[nodiscard]] Dataset read_data_file(const std::filesystem::path& path, const Survey& survey);

/// iteration,phi_d,phi_m,beta,normalized_misfit,step,restart,trials with
/// round-trip precision.
void write_iteration_log(std::ostream& os, const std::vector<IterationRecord>& log);

/// Exact decimal text of a double.
[[nodiscard]] std::string format_double(double v);

}  // namespace fwem
