#include "causalslab/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "causalslab/errors.hpp"

namespace causalslab {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

struct NamedSpec {
  const char* name;
  const char* description;
  double b31;
  double c2;
  double c3;
};

constexpr NamedSpec kNamed[] = {
    {"a", "X1 instruments X2 -> X3; no hidden confounder", 0.0, 0.0, 0.0},
    {"b", "X1 instruments X2 -> X3; X2 and X3 share a hidden confounder", 0.0, 1.0, 1.0},
    {"c", "small direct X1 -> X3 edge (0.05); no hidden confounder", 0.05, 0.0, 0.0},
    {"d", "small direct X1 -> X3 edge (0.05); X2 and X3 confounded", 0.05, 1.0, 1.0},
    {"e", "unit direct X1 -> X3 edge; X2 and X3 confounded", 1.0, 1.0, 1.0},
    {"f", "unit direct X1 -> X3 edge; confounding cancels the X1-X3 partial correlation", 1.0, 1.0, 2.0},
};

int as_index(const nlohmann::json& v, int n, const char* what) {
  if (!v.is_number_integer()) invalid(std::string(what) + " must be an integer index");
  const int k = v.get<int>();
  if (k < 1 || k > n) {
    std::ostringstream os;
    os << what << " " << k << " out of range 1.." << n;
    invalid(os.str());
  }
  return k - 1;
}

}  // namespace

std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const auto& s : kNamed) out.emplace_back(s.name);
  return out;
}

Scenario named_scenario(std::string_view name) {
  for (const auto& s : kNamed) {
    if (name != s.name) continue;
    Scenario sc{s.name, s.description, {"X1", "X2", "X3"}, SemParameters::zeros(3),
                ConfounderLayout(3, {{1, 2}})};
    sc.params.B(1, 0) = 1.0;
    sc.params.B(2, 0) = s.b31;
    sc.params.B(2, 1) = 1.0;
    sc.params.confounder(1, 1, 2) = s.c2;
    sc.params.confounder(2, 1, 2) = s.c3;
    return sc;
  }
  invalid("unknown scenario '" + std::string(name) + "' (expected one of a, b, c, d, e, f)");
}

Scenario scenario_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) invalid("scenario document must be a JSON object");
    if (!doc.contains("n")) invalid("scenario document is missing 'n'");
    const int n = doc.at("n").get<int>();
    if (n < 1) invalid("'n' must be positive");

    Scenario sc{doc.value("name", std::string("custom")), doc.value("description", std::string()),
                {}, SemParameters::zeros(n), ConfounderLayout::all_pairs(n)};
    if (doc.contains("ordering")) {
      sc.variables = doc.at("ordering").get<std::vector<std::string>>();
      if (static_cast<int>(sc.variables.size()) != n) invalid("'ordering' must list n variable names");
      auto sorted = sc.variables;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        invalid("'ordering' has duplicate names");
      }
    } else {
      for (int k = 1; k <= n; ++k) sc.variables.push_back("X" + std::to_string(k));
    }

    for (const auto& entry : doc.value("B", nlohmann::json::array())) {
      if (!entry.is_array() || entry.size() != 3) invalid("each B entry must be [i, j, value]");
      const int i = as_index(entry[0], n, "B row");
      const int j = as_index(entry[1], n, "B column");
      if (j >= i) invalid("B entries need i > j (effect listed first)");
      sc.params.B(i, j) = entry[2].get<double>();
    }
    for (const auto& entry : doc.value("C", nlohmann::json::array())) {
      if (!entry.is_array() || entry.size() != 4) invalid("each C entry must be [pair_j, pair_i, row, value]");
      const int j = as_index(entry[0], n, "C pair");
      const int i = as_index(entry[1], n, "C pair");
      const int row = as_index(entry[2], n, "C row");
      if (j == i) invalid("C pair needs two distinct variables");
      if (row != j && row != i) invalid("C row must be one of the pair's variables");
      sc.params.confounder(row, j, i) = entry[3].get<double>();
    }
    if (doc.contains("V")) {
      const auto v = doc.at("V").get<std::vector<double>>();
      if (static_cast<int>(v.size()) != n) invalid("'V' must have n entries");
      for (int k = 0; k < n; ++k) sc.params.V(k) = v[k];
    }
    if (doc.contains("free_pairs")) {
      std::vector<VariablePair> pairs;
      for (const auto& entry : doc.at("free_pairs")) {
        if (!entry.is_array() || entry.size() != 2) invalid("each free_pairs entry must be [j, i]");
        pairs.push_back({as_index(entry[0], n, "free pair"), as_index(entry[1], n, "free pair")});
      }
      sc.free_pairs = ConfounderLayout(n, std::move(pairs));
    }
    sc.params.validate();
    return sc;
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed scenario document: ") + e.what());
  }
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scenario file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    invalid("scenario file '" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(doc);
}

Scenario resolve_scenario(const std::string& name_or_path) {
  const auto names = scenario_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return named_scenario(name_or_path);
  }
  return load_scenario_file(name_or_path);
}

nlohmann::json scenario_to_json(const Scenario& sc) {
  const int n = sc.params.n();
  nlohmann::json doc;
  doc["name"] = sc.name;
  if (!sc.description.empty()) doc["description"] = sc.description;
  doc["n"] = n;
  doc["ordering"] = sc.variables;
  auto b = nlohmann::json::array();
  for (int i = 1; i < n; ++i) {
    for (int j = 0; j < i; ++j) b.push_back({i + 1, j + 1, sc.params.B(i, j)});
  }
  doc["B"] = b;
  auto c = nlohmann::json::array();
  for (int col = 0; col < pair_count(n); ++col) {
    const VariablePair p = pair_at(n, col);
    for (int row : {p.first, p.second}) {
      if (sc.params.C(row, col) != 0.0) c.push_back({p.first + 1, p.second + 1, row + 1, sc.params.C(row, col)});
    }
  }
  doc["C"] = c;
  doc["V"] = std::vector<double>(sc.params.V.data(), sc.params.V.data() + n);
  auto free = nlohmann::json::array();
  for (const auto& p : sc.free_pairs.pairs()) free.push_back({p.first + 1, p.second + 1});
  doc["free_pairs"] = free;
  return doc;
}

ConfounderLayout parse_pairs(std::string_view text, int n) {
  if (text == "all") return ConfounderLayout::all_pairs(n);
  if (text == "none" || text.empty()) return ConfounderLayout(n, {});
  std::vector<VariablePair> pairs;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) invalid("pair '" + item + "' must look like j-i");
    try {
      const int j = std::stoi(item.substr(0, dash));
      const int i = std::stoi(item.substr(dash + 1));
      if (j < 1 || j > n || i < 1 || i > n) invalid("pair '" + item + "' out of range");
      pairs.push_back({j - 1, i - 1});
    } catch (const std::logic_error&) {
      invalid("pair '" + item + "' must look like j-i");
    }
  }
  return ConfounderLayout(n, std::move(pairs));
}

std::string format_pairs(const ConfounderLayout& layout) {
  if (layout.pairs().empty()) return "none";
  std::string out;
  for (const auto& p : layout.pairs()) {
    if (!out.empty()) out += ",";
    out += std::to_string(p.first + 1) + "-" + std::to_string(p.second + 1);
  }
  return out;
}

}  // namespace causalslab
