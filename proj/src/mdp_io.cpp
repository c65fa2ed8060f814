#include "apelab/mdp_io.hpp"

#include <fstream>

namespace apelab {

namespace {

constexpr const char* kTerminalLabel = "TERMINAL";

template <typename Lookup>
int resolve(const Lookup& lookup, const nlohmann::json& value, const char* what) {
  if (!value.is_string()) {
    throw std::invalid_argument(std::string(what) + " must be a label string");
  }
  const auto idx = lookup(value.get<std::string>());
  if (!idx) throw std::invalid_argument(std::string("unknown ") + what + " '" +
                                        value.get<std::string>() + "'");
  return *idx;
}

}  // namespace

Mdp mdp_from_json(const nlohmann::json& doc) {
  const auto states = doc.at("states").get<std::vector<std::string>>();
  const auto actions = doc.at("actions").get<std::vector<std::string>>();
  auto state_index = [&](const std::string& label) -> std::optional<int> {
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (states[i] == label) return static_cast<int>(i);
    }
    return std::nullopt;
  };
  auto action_index = [&](const std::string& label) -> std::optional<int> {
    for (std::size_t i = 0; i < actions.size(); ++i) {
      if (actions[i] == label) return static_cast<int>(i);
    }
    return std::nullopt;
  };

  Mdp::OutcomeTable table(states.size(),
                          std::vector<std::vector<Outcome>>(actions.size()));
  std::vector<std::vector<bool>> seen(states.size(), std::vector<bool>(actions.size(), false));
  for (const auto& entry : doc.at("transitions")) {
    const int s = resolve(state_index, entry.at("state"), "state");
    const int a = resolve(action_index, entry.at("action"), "action");
    if (seen[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]) {
      throw std::invalid_argument("duplicate transition entry for (" + states[static_cast<std::size_t>(s)] +
                                  ", " + actions[static_cast<std::size_t>(a)] + ")");
    }
    seen[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = true;
    auto& outs = table[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    for (const auto& o : entry.at("outcomes")) {
      const auto& next = o.at("next");
      const State next_index = (next.is_null() || next == kTerminalLabel)
                                   ? kTerminal
                                   : resolve(state_index, next, "successor state");
      outs.push_back(Outcome{o.value("p", 1.0), next_index, o.value("reward", 0.0)});
    }
  }
  for (std::size_t s = 0; s < states.size(); ++s) {
    for (std::size_t a = 0; a < actions.size(); ++a) {
      if (!seen[s][a]) {
        throw std::invalid_argument("missing transition entry for (" + states[s] + ", " +
                                    actions[a] + ")");
      }
    }
  }
  const int start = resolve(state_index, doc.at("start"), "start state");
  return Mdp(static_cast<int>(states.size()), static_cast<int>(actions.size()), start,
             std::move(table), states, actions);
}

nlohmann::json mdp_to_json(const Mdp& mdp) {
  nlohmann::json doc;
  doc["states"] = mdp.labels();
  doc["actions"] = mdp.action_labels();
  doc["start"] = mdp.label(mdp.start_state());
  auto& transitions = doc["transitions"] = nlohmann::json::array();
  for (State s = 0; s < mdp.num_states(); ++s) {
    for (Action a = 0; a < mdp.num_actions(); ++a) {
      nlohmann::json outs = nlohmann::json::array();
      for (const Outcome& o : mdp.outcomes(s, a)) {
        outs.push_back({{"p", o.probability},
                        {"next", o.next == kTerminal ? std::string(kTerminalLabel) : mdp.label(o.next)},
                        {"reward", o.reward}});
      }
      transitions.push_back(
          {{"state", mdp.label(s)}, {"action", mdp.action_label(a)}, {"outcomes", outs}});
    }
  }
  return doc;
}

Mdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open MDP file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return mdp_from_json(doc);
}

}  // namespace apelab
