#pragma once

// JSON documents describing MDPs.
//
//   {
//     "states": ["A", "B"], "actions": ["l", "r"], "start": "A",
//     "transitions": [
//       {"state": "A", "action": "l",
//        "outcomes": [{"p": 1.0, "next": "B", "reward": 0.0}]},
//       {"state": "B", "action": "l",
//        "outcomes": [{"p": 1.0, "next": "TERMINAL", "reward": 1.0}]},
//       ...
//     ]
//   }
//
// "next" is a state label or "TERMINAL". Every (state, action) pair must be
// listed exactly once.

#include "apelab/mdp.hpp"

#include <filesystem>
#include <json.hpp>

namespace apelab {

Mdp mdp_from_json(const nlohmann::json& doc);
nlohmann::json mdp_to_json(const Mdp& mdp);
Mdp load_mdp(const std::filesystem::path& path);

}  // namespace apelab
