#pragma once

// JSON form of a generated design, shared by the CLI and the BIBD policy
// loader:
//   {"n": 21, "r": 5, "lambda": 1, "residues": [...], "blocks": [[...], ...]}

#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "redsched/designs.hpp"

namespace redsched::io {

inline nlohmann::json design_to_json(const designs::DifferenceSet& ds,
                                     const designs::BlockDesign& design) {
  nlohmann::json j;
  j["n"] = design.points;
  j["r"] = ds.size();
  j["lambda"] = design.lambda;
  j["residues"] = ds.residues;
  j["blocks"] = design.blocks;
  return j;
}

struct LoadedDesign {
  designs::DifferenceSet difference_set;
  designs::BlockDesign design;
};

/// Parse a design file; throws std::invalid_argument on shape problems.
/// Whether the design itself is valid is verify_design's job.
inline LoadedDesign design_from_json(const nlohmann::json& j) {
  try {
    LoadedDesign out;
    out.design.points = j.at("n").get<int>();
    out.design.lambda = j.value("lambda", 1);
    out.design.blocks =
        j.at("blocks").get<std::vector<std::vector<int>>>();
    out.difference_set.modulus = out.design.points;
    out.difference_set.residues = j.at("residues").get<std::vector<int>>();
    const int r = j.at("r").get<int>();
    if (r != out.difference_set.size()) {
      throw std::invalid_argument(
          "design file: r does not match the residue count");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("design file: ") + e.what());
  }
}

} // namespace redsched::io
