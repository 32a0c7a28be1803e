#include "ava/data/records.hpp"

#include <fstream>
#include <initializer_list>

#include <json.hpp>

#include "ava/errors.hpp"

namespace ava::data {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

// Parses one record line and checks it has exactly the expected string keys.
json parse_record(const std::string& text, std::size_t line, std::initializer_list<const char*> keys) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line_prefix(line) + "malformed JSON: " + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_prefix(line) + "expected a JSON object");
  for (const char* key : keys) {
    if (!obj.contains(key)) throw SchemaError(line_prefix(line) + "missing key \"" + key + "\"");
    if (!obj[key].is_string()) {
      throw SchemaError(line_prefix(line) + "key \"" + key + "\" must be a string");
    }
  }
  if (obj.size() != keys.size()) {
    for (const auto& [k, v] : obj.items()) {
      bool known = false;
      for (const char* key : keys) known = known || k == key;
      if (!known) throw SchemaError(line_prefix(line) + "unexpected key \"" + k + "\"");
    }
  }
  return obj;
}

template <typename F>
void for_each_line(const std::string& path, F&& f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (is_blank(text)) continue;
    f(text, line);
  }
}

void write_lines(const std::string& path, const std::vector<ordered_json>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  for (const auto& row : rows) out << row.dump() << '\n';
}

}  // namespace

std::vector<PreferencePair> load_preferences(const std::string& path) {
  std::vector<PreferencePair> out;
  for_each_line(path, [&](const std::string& text, std::size_t line) {
    const json obj = parse_record(text, line, {"prompt", "chosen", "rejected"});
    PreferencePair p{obj["prompt"].get<std::string>(), obj["chosen"].get<std::string>(),
                     obj["rejected"].get<std::string>()};
    if (p.chosen.empty() || p.rejected.empty()) {
      throw SchemaError(line_prefix(line) + "chosen and rejected must be non-empty");
    }
    if (p.chosen == p.rejected) throw SchemaError(line_prefix(line) + "chosen equals rejected");
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<Demonstration> load_demonstrations(const std::string& path) {
  std::vector<Demonstration> out;
  for_each_line(path, [&](const std::string& text, std::size_t line) {
    const json obj = parse_record(text, line, {"prompt", "response"});
    Demonstration d{obj["prompt"].get<std::string>(), obj["response"].get<std::string>()};
    if (d.response.empty()) throw SchemaError(line_prefix(line) + "response must be non-empty");
    out.push_back(std::move(d));
  });
  return out;
}

void save_preferences(const std::string& path, const std::vector<PreferencePair>& pairs) {
  std::vector<ordered_json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    ordered_json row;
    row["prompt"] = p.prompt;
    row["chosen"] = p.chosen;
    row["rejected"] = p.rejected;
    rows.push_back(std::move(row));
  }
  write_lines(path, rows);
}

void save_demonstrations(const std::string& path, const std::vector<Demonstration>& demos) {
  std::vector<ordered_json> rows;
  rows.reserve(demos.size());
  for (const auto& d : demos) {
    ordered_json row;
    row["prompt"] = d.prompt;
    row["response"] = d.response;
    rows.push_back(std::move(row));
  }
  write_lines(path, rows);
}

std::vector<Demonstration> chosen_halves(const std::vector<PreferencePair>& pairs) {
  std::vector<Demonstration> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.prompt, p.chosen});
  return out;
}

std::vector<std::string> corpus_texts(const std::vector<PreferencePair>& pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs) {
    out.push_back(p.prompt);
    out.push_back(p.chosen);
    out.push_back(p.rejected);
  }
  return out;
}

std::vector<std::string> corpus_texts(const std::vector<Demonstration>& demos) {
  std::vector<std::string> out;
  for (const auto& d : demos) {
    out.push_back(d.prompt);
    out.push_back(d.response);
  }
  return out;
}

std::vector<TokenSequence> tokenize_all(const std::vector<Demonstration>& demos, const Vocabulary& vocab) {
  std::vector<TokenSequence> out;
  out.reserve(demos.size());
  for (const auto& d : demos) out.push_back(tokenize(d.prompt, d.response, vocab));
  return out;
}

std::vector<SequencePair> tokenize_all(const std::vector<PreferencePair>& pairs, const Vocabulary& vocab) {
  std::vector<SequencePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({tokenize(p.prompt, p.chosen, vocab), tokenize(p.prompt, p.rejected, vocab)});
  }
  return out;
}

}  // namespace ava::data
