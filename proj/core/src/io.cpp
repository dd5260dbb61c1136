#include "fwem/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include "fwem/error.hpp"

namespace fwem {

namespace {

constexpr int kMaxIncludeDepth = 16;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing_file", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_double(std::string_view s, const std::string& what) {
  s = trim(s);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error("bad_value", what + ": '" + std::string(s) + "' is not a number");
  }
  return v;
}

int parse_int(std::string_view s, const std::string& what) {
  s = trim(s);
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error("bad_value", what + ": '" + std::string(s) + "' is not an integer");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Rows of a CSV file with the given header; comment lines start with '#'.
std::vector<std::vector<std::string_view>> csv_rows(const std::string& text, const std::vector<std::string>& header,
                                                    const std::string& what) {
  std::vector<std::vector<std::string_view>> rows;
  bool seen_header = false;
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const std::string_view line =
        trim(std::string_view(text).substr(start, end == std::string::npos ? std::string::npos : end - start));
    start = end == std::string::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, ',');
    if (!seen_header) {
      if (fields.size() != header.size() || !std::equal(fields.begin(), fields.end(), header.begin())) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw Error("bad_csv", what + ": expected header '" + expected + "'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      throw Error("bad_csv", what + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                 " fields, expected " + std::to_string(header.size()));
    }
    rows.push_back(std::move(fields));
  }
  if (!seen_header) throw Error("bad_csv", what + ": missing header");
  return rows;
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
  Config c;
  const std::string text = read_text(path);
  c.parse_into(text, path.parent_path(), 0);
  return c;
}

Config Config::parse(std::string_view text, const std::filesystem::path& base_dir) {
  Config c;
  c.parse_into(text, base_dir, 0);
  return c;
}

void Config::parse_into(std::string_view text, const std::filesystem::path& base_dir, int depth) {
  if (depth > kMaxIncludeDepth) throw Error("include_depth", "config includes nest too deeply");
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("bad_config", "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw Error("bad_config", "line " + std::to_string(line_no) + ": empty key");
    if (key == "include") {
      const std::filesystem::path inc = base_dir / value;
      parse_into(read_text(inc), inc.parent_path(), depth + 1);
      continue;
    }
    entries_[key] = Entry{value, base_dir};
  }
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = Entry{value, {}}; }

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

const Config::Entry& Config::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw Error("missing_key", "config key '" + key + "' is required");
  return it->second;
}

std::string Config::get(const std::string& key) const { return find(key).value; }

std::string Config::get(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double Config::get_double(const std::string& key) const { return parse_double(get(key), key); }

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const { return parse_int(get(key), key); }

int Config::get_int(const std::string& key, int fallback) const { return has(key) ? get_int(key) : fallback; }

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("bad_value", key + ": '" + v + "' is not a boolean");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::string v = get(key);
  std::replace(v.begin(), v.end(), ',', ' ');
  std::vector<double> out;
  std::istringstream ss(v);
  std::string tok;
  while (ss >> tok) out.push_back(parse_double(tok, key));
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key, std::vector<double> fallback) const {
  return has(key) ? get_doubles(key) : fallback;
}

std::filesystem::path Config::get_path(const std::string& key) const {
  const Entry& e = find(key);
  const std::filesystem::path p(e.value);
  return p.is_absolute() || e.dir.empty() ? p : (e.dir / p).lexically_normal();
}

void write_volume(const std::filesystem::path& path, Dims dims, std::span<const double> values) {
  if (values.size() != dims.size()) throw Error("shape_mismatch", "volume size does not match its dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_failed", "cannot write " + path.string());
  for (double v : values) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  std::ofstream hdr(path.string() + ".hdr");
  if (!hdr) throw Error("write_failed", "cannot write " + path.string() + ".hdr");
  hdr << "n1 = " << dims.n1 << "\nn2 = " << dims.n2 << "\nn3 = " << dims.n3 << "\nformat = float32_le\n";
  if (!out || !hdr) throw Error("write_failed", "error writing " + path.string());
}

VolumeFile read_volume(const std::filesystem::path& path) {
  const Config hdr = Config::load(path.string() + ".hdr");
  if (hdr.get("format", "float32_le") != "float32_le") {
    throw Error("bad_volume", path.string() + ": unsupported format " + hdr.get("format"));
  }
  VolumeFile vf;
  vf.dims = {hdr.get_int("n1"), hdr.get_int("n2"), hdr.get_int("n3")};
  if (vf.dims.n1 <= 0 || vf.dims.n2 <= 0 || vf.dims.n3 <= 0) throw Error("bad_volume", "non-positive dimensions");
  const std::string raw = read_text(path);
  if (raw.size() != vf.dims.size() * sizeof(float)) {
    throw Error("bad_volume", path.string() + ": file holds " + std::to_string(raw.size() / sizeof(float)) +
                                  " values, header says " + std::to_string(vf.dims.size()));
  }
  vf.values.resize(vf.dims.size());
  for (std::size_t i = 0; i < vf.values.size(); ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, raw.data() + i * sizeof bits, sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    vf.values[i] = std::bit_cast<float>(bits);
  }
  return vf;
}

GridSpec grid_spec_from_config(const Config& cfg) {
  GridSpec gs;
  const char* axes[3] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    const std::string ax = axes[a];
    gs.axes[a].cells = cfg.get_int("n" + ax);
    gs.axes[a].spacing = cfg.get_double("d" + ax);
    gs.axes[a].stretch = cfg.get_double("stretch_" + ax, 1.0);
    gs.axes[a].stretch_start = cfg.get_int("stretch_start_" + ax, 0);
    gs.origin[a] = cfg.get_double(ax + "0", 0.0);
  }
  gs.npml = cfg.get_int("npml", gs.npml);
  return gs;
}

Survey read_survey(const std::filesystem::path& sources, const std::filesystem::path& receivers,
                   std::vector<double> freqs) {
  Survey sv;
  sv.freqs = std::move(freqs);
  const std::string stext = read_text(sources);
  for (const auto& row : csv_rows(stext, {"id", "x", "y", "z", "dx", "dy", "dz", "kind", "moment"},
                                  sources.string())) {
    Dipole d;
    sv.source_ids.push_back(parse_int(row[0], "source id"));
    for (int a = 0; a < 3; ++a) {
      d.pos[a] = parse_double(row[1 + a], "source position");
      d.orientation[a] = parse_double(row[4 + a], "source orientation");
    }
    if (row[7] == "electric") {
      d.kind = SourceKind::Electric;
    } else if (row[7] == "magnetic") {
      d.kind = SourceKind::Magnetic;
    } else {
      throw Error("bad_value", "source kind must be electric or magnetic, got '" + std::string(row[7]) + "'");
    }
    d.moment = parse_double(row[8], "source moment");
    sv.sources.push_back(d);
  }
  const std::string rtext = read_text(receivers);
  for (const auto& row : csv_rows(rtext, {"id", "x", "y", "z", "components"}, receivers.string())) {
    sv.receiver_ids.push_back(parse_int(row[0], "receiver id"));
    sv.receivers.push_back({parse_double(row[1], "receiver position"), parse_double(row[2], "receiver position"),
                            parse_double(row[3], "receiver position")});
    std::vector<Component> comps;
    for (auto name : split(row[4], ';')) {
      if (!name.empty()) comps.push_back(parse_component(name));
    }
    if (comps.empty()) throw Error("bad_value", "receiver without components");
    sv.receiver_comps.push_back(std::move(comps));
  }
  return sv;
}

void write_sources(std::ostream& os, const Survey& survey) {
  os << "id,x,y,z,dx,dy,dz,kind,moment\n";
  for (std::size_t s = 0; s < survey.sources.size(); ++s) {
    const Dipole& d = survey.sources[s];
    os << survey.source_ids[s];
    for (double v : d.pos) os << ',' << format_double(v);
    for (double v : d.orientation) os << ',' << format_double(v);
    os << ',' << (d.kind == SourceKind::Electric ? "electric" : "magnetic") << ',' << format_double(d.moment) << '\n';
  }
}

void write_receivers(std::ostream& os, const Survey& survey) {
  os << "id,x,y,z,components\n";
  for (std::size_t r = 0; r < survey.receivers.size(); ++r) {
    os << survey.receiver_ids[r];
    for (double v : survey.receivers[r]) os << ',' << format_double(v);
    os << ',';
    const std::vector<Component> comps =
        survey.receiver_comps.empty() ? std::vector<Component>{Component::Ex} : survey.receiver_comps[r];
    for (std::size_t i = 0; i < comps.size(); ++i) os << (i ? ";" : "") << component_name(comps[i]);
    os << '\n';
  }
}

void write_data(std::ostream& os, const Survey& survey, const Dataset& data) {
  os << "# frequency-domain fields, time dependence exp(-i omega t), per unit source moment\n";
  os << "src_id,rcv_id,component,freq_hz,real,imag,weight\n";
  for (const Datum& d : data) {
    os << survey.source_ids[d.src] << ',' << survey.receiver_ids[d.rcv] << ',' << component_name(d.comp) << ','
       << format_double(survey.freqs[d.freq]) << ',' << format_double(d.value.real()) << ','
       << format_double(d.value.imag()) << ',' << format_double(d.weight) << '\n';
  }
}

Dataset read_data(std::istream& is, const Survey& survey) {
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  Dataset out;
  for (const auto& row : csv_rows(text, {"src_id", "rcv_id", "component", "freq_hz", "real", "imag", "weight"},
                                  "data")) {
    Datum d;
    d.src = survey.source_index(parse_int(row[0], "src_id"));
    d.rcv = survey.receiver_index(parse_int(row[1], "rcv_id"));
    d.comp = parse_component(row[2]);
    d.freq = survey.freq_index(parse_double(row[3], "freq_hz"));
    d.value = {parse_double(row[4], "real"), parse_double(row[5], "imag")};
    d.weight = parse_double(row[6], "weight");
    if (!std::isfinite(d.value.real()) || !std::isfinite(d.value.imag())) throw Error("bad_data", "non-finite datum");
    if (!(d.weight >= 0.0)) throw Error("bad_data", "weights must be non-negative");
    out.push_back(d);
  }
  return out;
}

void write_data_file(const std::filesystem::path& path, const Survey& survey, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("write_failed", "cannot write " + path.string());
  write_data(out, survey, data);
}

Dataset read_data_file(const std::filesystem::path& path, const Survey& survey) {
  std::ifstream in(path);
  if (!in) throw Error("missing_file", "cannot open " + path.string());
  return read_data(in, survey);
}

void write_iteration_log(std::ostream& os, const std::vector<IterationRecord>& log) {
  os << "iteration,phi_d,phi_m,beta,normalized_misfit,step,restart,trials\n";
  for (const auto& r : log) {
    os << r.iteration << ',' << format_double(r.phi_d) << ',' << format_double(r.phi_m) << ','
       << format_double(r.beta) << ',' << format_double(r.normalized) << ',' << format_double(r.step) << ','
       << (r.restart ? 1 : 0) << ',' << r.trials << '\n';
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

}  // namespace fwem
