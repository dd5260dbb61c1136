#include "fwem/survey.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>

#include "fwem/error.hpp"

namespace fwem {

namespace {

std::size_t find_id(const std::vector<int>& ids, int id, const char* what) {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw Error("unknown_id", std::string("unknown ") + what + " id " + std::to_string(id));
  return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

std::size_t Survey::source_index(int id) const { return find_id(source_ids, id, "source"); }
std::size_t Survey::receiver_index(int id) const { return find_id(receiver_ids, id, "receiver"); }

std::size_t Survey::freq_index(double hz) const {
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (std::abs(freqs[k] - hz) <= 1e-9 * std::max(1.0, std::abs(hz))) return k;
  }
  throw Error("freq_mismatch", "frequency " + std::to_string(hz) + " Hz is not in the survey");
}

void validate_survey(const Survey& survey, const Grid3D& grid) {
  if (survey.freqs.empty()) throw Error("bad_survey", "no frequencies");
  for (std::size_t k = 0; k < survey.freqs.size(); ++k) {
    if (!(survey.freqs[k] > 0.0)) throw Error("bad_survey", "frequencies must be positive");
    if (k > 0 && !(survey.freqs[k] > survey.freqs[k - 1])) {
      throw Error("bad_survey", "frequencies must be sorted and distinct");
    }
  }
  if (survey.sources.size() != survey.source_ids.size() || survey.receivers.size() != survey.receiver_ids.size()) {
    throw Error("bad_survey", "id tables do not match the position tables");
  }
  if (!survey.receiver_comps.empty() && survey.receiver_comps.size() != survey.receivers.size()) {
    throw Error("bad_survey", "component table does not match the receivers");
  }
  auto unique = [](const std::vector<int>& ids, const char* what) {
    if (std::set<int>(ids.begin(), ids.end()).size() != ids.size()) {
      throw Error("bad_survey", std::string("duplicate ") + what + " id");
    }
  };
  unique(survey.source_ids, "source");
  unique(survey.receiver_ids, "receiver");
  for (std::size_t s = 0; s < survey.sources.size(); ++s) {
    const Dipole& d = survey.sources[s];
    if (!grid.inside_interior(d.pos)) {
      throw Error("outside_interior", "source " + std::to_string(survey.source_ids[s]) + " is outside the interior");
    }
    const double norm = std::sqrt(d.orientation[0] * d.orientation[0] + d.orientation[1] * d.orientation[1] +
                                  d.orientation[2] * d.orientation[2]);
    if (!(norm > 0.0)) throw Error("bad_survey", "source orientation must be non-zero");
  }
  for (std::size_t r = 0; r < survey.receivers.size(); ++r) {
    if (!grid.inside_interior(survey.receivers[r])) {
      throw Error("outside_interior",
                  "receiver " + std::to_string(survey.receiver_ids[r]) + " is outside the interior");
    }
  }
}

Dataset survey_dataset(const Survey& survey) {
  Dataset out;
  for (std::size_t s = 0; s < survey.sources.size(); ++s) {
    for (std::size_t r = 0; r < survey.receivers.size(); ++r) {
      const std::vector<Component> comps =
          survey.receiver_comps.empty() ? std::vector<Component>{Component::Ex} : survey.receiver_comps[r];
      for (Component c : comps) {
        for (std::size_t f = 0; f < survey.freqs.size(); ++f) out.push_back({s, r, c, f, cplx{}, 1.0});
      }
    }
  }
  return out;
}

void add_noise(Dataset& data, double eta, std::uint64_t seed) {
  if (!(eta >= 0.0)) throw Error("bad_noise", "noise level must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Datum& d : data) {
    const double g1 = normal(rng);
    const double g2 = normal(rng);
    d.value += eta * std::abs(d.value) * cplx(g1, g2) / std::sqrt(2.0);
  }
}

std::size_t Gather::slot_of(std::size_t rcv, Component c) const {
  for (std::size_t s = 0; s < slot_rcv.size(); ++s) {
    if (slot_rcv[s] == rcv && slot_comp[s] == c) return s;
  }
  throw Error("missing_slot", "receiver component not simulated");
}

namespace {

Gather build(const Survey& survey, const std::map<std::size_t, std::vector<Component>>& wanted) {
  Gather g;
  for (const auto& [rcv, comps] : wanted) {
    ReceiverSpec spec{survey.receivers[rcv], comps};
    for (Component c : comps) {
      g.slot_rcv.push_back(rcv);
      g.slot_comp.push_back(c);
    }
    g.specs.push_back(std::move(spec));
  }
  return g;
}

}  // namespace

Gather gather_for_source(const Survey& survey, const Dataset& data, std::size_t src) {
  std::map<std::size_t, std::vector<Component>> wanted;
  for (const Datum& d : data) {
    if (d.src != src) continue;
    auto& comps = wanted[d.rcv];
    if (std::find(comps.begin(), comps.end(), d.comp) == comps.end()) comps.push_back(d.comp);
  }
  for (auto& [rcv, comps] : wanted) std::sort(comps.begin(), comps.end());
  return build(survey, wanted);
}

Gather full_gather(const Survey& survey, const std::vector<Component>& comps) {
  std::map<std::size_t, std::vector<Component>> wanted;
  for (std::size_t r = 0; r < survey.receivers.size(); ++r) wanted[r] = comps;
  return build(survey, wanted);
}

double datum_offset(const Survey& survey, const Datum& d) {
  const Vec3& a = survey.sources[d.src].pos;
  const Vec3& b = survey.receivers[d.rcv];
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

std::pair<Survey, Dataset> apply_reciprocity(const Survey& survey, const Dataset& data) {
  Survey out;
  out.freqs = survey.freqs;
  // New sources: one per (old receiver, component) pair with data.
  std::map<std::pair<std::size_t, int>, std::size_t> new_src;
  std::map<std::size_t, std::size_t> new_rcv;
  Dataset swapped;
  for (const Datum& d : data) {
    if (!is_electric(d.comp) || survey.sources[d.src].kind != SourceKind::Electric) {
      throw Error("bad_reciprocity", "reciprocity swap supports electric sources and receivers only");
    }
    const auto key = std::make_pair(d.rcv, component_axis(d.comp));
    auto it = new_src.find(key);
    if (it == new_src.end()) {
      Dipole dp;
      dp.pos = survey.receivers[d.rcv];
      dp.orientation = {0.0, 0.0, 0.0};
      dp.orientation[component_axis(d.comp)] = 1.0;
      out.sources.push_back(dp);
      out.source_ids.push_back(survey.receiver_ids[d.rcv] * 10 + component_axis(d.comp));
      it = new_src.emplace(key, out.sources.size() - 1).first;
    }
    auto jt = new_rcv.find(d.src);
    if (jt == new_rcv.end()) {
      out.receivers.push_back(survey.sources[d.src].pos);
      out.receiver_ids.push_back(survey.source_ids[d.src]);
      out.receiver_comps.emplace_back();
      jt = new_rcv.emplace(d.src, out.receivers.size() - 1).first;
    }
    // The old source orientation becomes the recorded component; oblique
    // sources are not representable as a single component.
    const Vec3& o = survey.sources[d.src].orientation;
    int axis = -1;
    for (int a = 0; a < 3; ++a) {
      if (o[a] != 0.0) axis = axis < 0 ? a : 3;
    }
    if (axis < 0 || axis > 2) throw Error("bad_reciprocity", "reciprocity needs axis-aligned sources");
    Datum nd = d;
    nd.src = it->second;
    nd.rcv = jt->second;
    nd.comp = kEComps[axis];
    auto& comps = out.receiver_comps[jt->second];
    if (std::find(comps.begin(), comps.end(), nd.comp) == comps.end()) comps.push_back(nd.comp);
    nd.value = d.value / (survey.sources[d.src].moment * o[axis]);
    swapped.push_back(nd);
  }
  return {out, swapped};
}

}  // namespace fwem
