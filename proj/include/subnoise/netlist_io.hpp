#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "subnoise/netlist.hpp"

namespace subnoise {

// Netlist JSON schema:
//
//   {
//     "ground": "0",
//     "nodes": [ {"name": "SUB", "kind": "interface"}, ... ],     // optional
//     "elements": [
//       {"name": "R1", "type": "resistor",  "nodes": ["a", "b"], "value": "1k"},
//       {"name": "C1", "type": "capacitor", "nodes": ["a", "0"], "value": "120f",
//        "path_label": "inductor"},
//       {"name": "L1", "type": "inductor",  "nodes": ["a", "b"], "value": "2n"},
//       {"name": "G1", "type": "vccs", "nodes": ["cp", "cn", "op", "on"], "value": "10m"},
//       {"name": "V1", "type": "vsource", "nodes": ["p", "n"], "value": 1, "ac": true},
//       {"name": "I1", "type": "isource", "nodes": ["p", "n"], "value": 1, "ac": true},
//       {"name": "M1", "type": "mos",
//        "nodes": {"gate": "g", "drain": "d", "source": "s", "bulk": "b"},
//        "gm": "20m", "gmb": "10m", "gds": "2.8m", "cdbj": "120f", "csbj": "200f"}
//     ]
//   }
//
// Nodes referenced by elements but absent from "nodes" are created with kind
// "circuit". Values accept engineering notation.
Netlist netlist_from_json(const nlohmann::json& j);
nlohmann::json netlist_to_json(const Netlist& netlist);

Netlist read_netlist(const std::filesystem::path& path);

// Reads and parses a JSON document; errors name the file and line.
nlohmann::json read_json_file(const std::filesystem::path& path);

// Writes via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace subnoise
