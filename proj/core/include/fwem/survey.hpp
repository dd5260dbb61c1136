#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fwem/fdtd.hpp"

namespace fwem {

struct Survey {
  std::vector<double> freqs;
  std::vector<Dipole> sources;
  std::vector<int> source_ids;
  std::vector<Vec3> receivers;
  std::vector<int> receiver_ids;
  /// Recorded components per receiver; used when synthesizing data.
  std::vector<std::vector<Component>> receiver_comps;

  [[nodiscard]] std::size_t source_index(int id) const;
  [[nodiscard]] std::size_t receiver_index(int id) const;
  [[nodiscard]] std::size_t freq_index(double hz) const;
};

/// Throws fwem::Error on duplicate ids, positions outside the interior,
/// unsorted or repeated frequencies, or mismatched table sizes.
void validate_survey(const Survey& survey, const Grid3D& grid);

/// One complex sample; indices refer to the survey tables.
struct Datum {
  std::size_t src = 0;
  std::size_t rcv = 0;
  Component comp = Component::Ex;
  std::size_t freq = 0;
  cplx value{};
  double weight = 1.0;
};

using Dataset = std::vector<Datum>;

/// Receivers and components simulated for one source. Slot s of a forward
/// run maps to (rcv[s], comp[s]).
struct Gather {
  std::vector<ReceiverSpec> specs;
  std::vector<std::size_t> slot_rcv;
  std::vector<Component> slot_comp;

  [[nodiscard]] std::size_t slot_of(std::size_t rcv, Component c) const;
};

/// Gather of source `src` covering every (receiver, component) with data.
[[nodiscard]] Gather gather_for_source(const Survey& survey, const Dataset& data, std::size_t src);
/// Gather covering all receivers with the given components.
[[nodiscard]] Gather full_gather(const Survey& survey, const std::vector<Component>& comps);

/// Every (source, receiver, recorded component, frequency) with zero value
/// and unit weight, ordered by source, receiver, component, frequency.
[[nodiscard]] Dataset survey_dataset(const Survey& survey);

/// Adds eta |d| (g1 + i g2) / sqrt(2), g ~ N(0, 1), drawn in data order from
/// a 64-bit Mersenne Twister seeded with `seed`.
void add_noise(Dataset& data, double eta, std::uint64_t seed);

/// Source-receiver distance of a datum.
[[nodiscard]] double datum_offset(const Survey& survey, const Datum& d);

/// Swaps electric sources and receivers: each source position becomes a
/// receiver and each receiver a source with the recording orientation.
/// Only electric-electric data are allowed.
[[nodiscard]] std::pair<Survey, Dataset> apply_reciprocity(const Survey& survey, const Dataset& data);

}  // namespace fwem
