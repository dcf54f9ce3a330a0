#pragma once

#include <ostream>
#include <string>

#include "btlab/bubbletree.hpp"

namespace btlab {

// JSON document with keys generations[], E_total, E_weak, defect,
// neck_energies[], separation_matrix and the supporting thresholds, notes and
// degree bookkeeping. Key order and number formatting are fixed.
std::string extraction_json(const ExtractionResult& result, int indent = 2);

// "k,t,Q" rows of the sampled concentration profiles.
void write_profile_csv(std::ostream& os, const SequenceSpec& spec, const ExtractionResult& result);
// "k,defect" rows.
void write_defect_csv(std::ostream& os, const ExtractionResult& result);

}  // namespace btlab
