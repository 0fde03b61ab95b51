#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/data/types.hpp"

namespace mol {

enum class DataFormat { csv, json };

inline DataFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return DataFormat::csv;
  if (ext == ".json") return DataFormat::json;
  throw DataError("cannot infer data format from '" + path.string() + "' (expected .csv or .json)");
}

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Distinct labels in a stable order: numeric when every label is an integer,
// lexicographic otherwise.
inline std::vector<std::string> ordered_labels(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& s) { return parse_int(s).has_value(); });
  if (numeric) {
    std::sort(labels.begin(), labels.end(),
              [](const std::string& a, const std::string& b) { return *parse_int(a) < *parse_int(b); });
  }
  return labels;
}

inline std::vector<std::string> resolve_action_set(const std::vector<std::string>& seen,
                                                   const std::optional<std::vector<std::string>>& declared) {
  if (!declared) return ordered_labels(seen);
  for (const auto& label : seen) {
    if (std::find(declared->begin(), declared->end(), label) == declared->end()) {
      throw DataError("action label '" + label + "' is not in the declared action set");
    }
  }
  return *declared;
}

inline int action_index(const std::vector<std::string>& action_set, const std::string& label) {
  auto it = std::find(action_set.begin(), action_set.end(), label);
  return static_cast<int>(it - action_set.begin());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// Parses the CSV layout `episode,t,a,r,o_1..o_d`. The row with the largest t
// of each episode carries the final observation and leaves `a` and `r` empty.
inline TrajectoryDataset parse_csv(std::string_view text,
                                   const std::optional<std::vector<std::string>>& declared_actions = std::nullopt) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: missing header row");
  auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("csv: missing required column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };
  const int c_episode = column("episode");
  const int c_t = column("t");
  const int c_a = column("a");
  const int c_r = column("r");
  std::vector<int> c_obs;
  for (int i = 1;; ++i) {
    auto it = std::find(header.begin(), header.end(), "o_" + std::to_string(i));
    if (it == header.end()) break;
    c_obs.push_back(static_cast<int>(it - header.begin()));
  }
  if (c_obs.empty()) throw DataError("csv: no observation columns o_1..o_d");
  const int d = static_cast<int>(c_obs.size());

  struct Row {
    long long t;
    std::string action;
    std::optional<double> reward;
    std::vector<double> obs;
    std::size_t line;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  std::vector<std::string> seen_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    auto where = "csv row " + std::to_string(line_no) + ": ";
    if (cells.size() != header.size()) throw DataError(where + "expected " + std::to_string(header.size()) + " fields");
    Row row;
    row.line = line_no;
    auto t = detail::parse_int(cells[c_t]);
    if (!t || *t < 0) throw DataError(where + "invalid time index '" + cells[c_t] + "'");
    row.t = *t;
    row.action = cells[c_a];
    if (!cells[c_r].empty()) {
      row.reward = detail::parse_double(cells[c_r]);
      if (!row.reward) throw DataError(where + "invalid reward '" + cells[c_r] + "'");
    }
    if (row.action.empty() != !row.reward.has_value()) {
      throw DataError(where + "action and reward must be both present or both empty");
    }
    for (int c : c_obs) {
      auto v = detail::parse_double(cells[c]);
      if (!v) throw DataError(where + "invalid observation value '" + cells[c] + "'");
      row.obs.push_back(*v);
    }
    if (!row.action.empty()) seen_labels.push_back(row.action);
    const auto& id = cells[c_episode];
    if (!rows.count(id)) order.push_back(id);
    rows[id].push_back(std::move(row));
  }
  if (order.empty()) throw DataError("csv: no data rows");

  auto action_set = detail::resolve_action_set(seen_labels, declared_actions);
  std::vector<Episode> episodes;
  for (const auto& id : order) {
    auto& rs = rows[id];
    std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    Episode ep;
    ep.id = id;
    const auto horizon = static_cast<int>(rs.size()) - 1;
    ep.observations.resize(horizon + 1, d);
    for (int i = 0; i <= horizon; ++i) {
      const auto& r = rs[i];
      auto where = "csv row " + std::to_string(r.line) + ": ";
      if (r.t != i) throw DataError(where + "episode '" + id + "' has non-contiguous time index " + std::to_string(r.t));
      for (int j = 0; j < d; ++j) ep.observations(i, j) = r.obs[j];
      if (i < horizon) {
        if (r.action.empty()) throw DataError(where + "missing action before the final time point");
        ep.actions.push_back(detail::action_index(action_set, r.action));
        ep.rewards.push_back(*r.reward);
      } else if (!r.action.empty()) {
        throw DataError(where + "final time point of episode '" + id + "' must leave action and reward empty");
      }
    }
    episodes.push_back(std::move(ep));
  }
  return TrajectoryDataset(std::move(episodes), std::move(action_set));
}

inline std::string to_csv(const TrajectoryDataset& ds) {
  std::string out = "episode,t,a,r";
  for (int j = 1; j <= ds.obs_dim(); ++j) out += ",o_" + std::to_string(j);
  out += '\n';
  for (std::size_t e = 0; e < ds.episode_count(); ++e) {
    const auto& ep = ds.episode(e);
    const auto id = ep.id.empty() ? std::to_string(e) : ep.id;
    for (int t = 0; t <= ep.horizon(); ++t) {
      out += id + ',' + std::to_string(t) + ',';
      if (t < ep.horizon()) {
        out += ds.action_set()[ep.actions[t]] + ',' + detail::format_double(ep.rewards[t]);
      } else {
        out += ',';
      }
      for (int j = 0; j < ds.obs_dim(); ++j) out += ',' + detail::format_double(ep.observations(t, j));
      out += '\n';
    }
  }
  return out;
}

// JSON layout: array of {id, obs: [[...]], actions: [...], rewards: [...]}.
inline TrajectoryDataset parse_json(const nlohmann::json& doc,
                                    const std::optional<std::vector<std::string>>& declared_actions = std::nullopt) {
  if (!doc.is_array()) throw DataError("json: expected an array of episodes");
  auto label_of = [](const nlohmann::json& a) -> std::string {
    if (a.is_string()) return a.get<std::string>();
    if (a.is_number_integer()) return std::to_string(a.get<long long>());
    throw DataError("json: actions must be strings or integers");
  };
  std::vector<std::string> seen;
  for (const auto& ep : doc) {
    if (!ep.is_object() || !ep.contains("actions")) throw DataError("json: episode without 'actions'");
    for (const auto& a : ep.at("actions")) seen.push_back(label_of(a));
  }
  auto action_set = detail::resolve_action_set(seen, declared_actions);
  std::vector<Episode> episodes;
  std::size_t index = 0;
  for (const auto& j : doc) {
    Episode ep;
    try {
      ep.id = j.contains("id") ? (j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump())
                               : std::to_string(index);
      const auto& obs = j.at("obs");
      const auto rows = static_cast<int>(obs.size());
      const auto d = rows > 0 ? static_cast<int>(obs.at(0).size()) : 0;
      ep.observations.resize(rows, d);
      for (int t = 0; t < rows; ++t) {
        if (static_cast<int>(obs.at(t).size()) != d) {
          throw DataError("json: episode '" + ep.id + "' has inconsistent observation dimension at t=" + std::to_string(t));
        }
        for (int c = 0; c < d; ++c) ep.observations(t, c) = obs.at(t).at(c).get<double>();
      }
      for (const auto& a : j.at("actions")) ep.actions.push_back(detail::action_index(action_set, label_of(a)));
      for (const auto& r : j.at("rewards")) ep.rewards.push_back(r.get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("json: episode " + std::to_string(index) + ": " + e.what());
    }
    episodes.push_back(std::move(ep));
    ++index;
  }
  return TrajectoryDataset(std::move(episodes), std::move(action_set));
}

inline nlohmann::json to_json(const TrajectoryDataset& ds) {
  bool numeric = std::all_of(ds.action_set().begin(), ds.action_set().end(),
                             [](const std::string& s) { return detail::parse_int(s).has_value(); });
  auto doc = nlohmann::json::array();
  for (std::size_t e = 0; e < ds.episode_count(); ++e) {
    const auto& ep = ds.episode(e);
    nlohmann::json j;
    j["id"] = ep.id.empty() ? std::to_string(e) : ep.id;
    auto obs = nlohmann::json::array();
    for (int t = 0; t < ep.observations.rows(); ++t) {
      auto row = nlohmann::json::array();
      for (int c = 0; c < ep.observations.cols(); ++c) row.push_back(ep.observations(t, c));
      obs.push_back(std::move(row));
    }
    j["obs"] = std::move(obs);
    auto actions = nlohmann::json::array();
    for (int a : ep.actions) {
      const auto& label = ds.action_set()[a];
      if (numeric) {
        actions.push_back(*detail::parse_int(label));
      } else {
        actions.push_back(label);
      }
    }
    j["actions"] = std::move(actions);
    j["rewards"] = ep.rewards;
    doc.push_back(std::move(j));
  }
  return doc;
}

inline TrajectoryDataset load_dataset(const std::filesystem::path& path, DataFormat format,
                                      const std::optional<std::vector<std::string>>& declared_actions = std::nullopt) {
  auto text = detail::read_file(path);
  if (format == DataFormat::csv) return parse_csv(text, declared_actions);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("json: " + std::string(e.what()));
  }
  return parse_json(doc, declared_actions);
}

inline TrajectoryDataset load_dataset(const std::filesystem::path& path) {
  return load_dataset(path, format_from_path(path));
}

inline void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path, DataFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  if (format == DataFormat::csv) {
    out << to_csv(ds);
  } else {
    out << to_json(ds).dump() << '\n';
  }
}

}  // namespace mol
