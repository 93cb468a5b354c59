#include "mmscope/scene_text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "mmscope/errors.hpp"

namespace mmscope {

namespace {

using json = nlohmann::ordered_json;

std::vector<std::string> tokenize(const std::string& caption) {
  std::string cleaned;
  cleaned.reserve(caption.size());
  for (char ch : caption) {
    const auto uch = static_cast<unsigned char>(ch);
    if (std::isalnum(uch) || ch == '\'' || ch == '-') {
      cleaned.push_back(static_cast<char>(std::tolower(uch)));
    } else {
      cleaned.push_back(' ');
    }
  }
  std::vector<std::string> tokens;
  std::istringstream is(cleaned);
  std::string tok;
  while (is >> tok) tokens.push_back(tok);
  return tokens;
}

bool ends_with(const std::string& s, const char* suffix) {
  const std::size_t n = std::char_traits<char>::length(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

}  // namespace

SceneLexicon SceneLexicon::defaults() {
  SceneLexicon lex;
  lex.stop_words = {
      "picture", "photo",  "image", "photograph", "shot", "taken", "is",
      "has",     "been",   "be",    "was",        "are",  "this",  "it",
      "there",   "of",     "and",   "very",       "that", "which", "with",
      "like",    "looks",  "seems", "appears",    "some", "where"};
  lex.determiners = {"a", "an", "the"};
  lex.prepositions = {"in", "at", "on", "inside", "near", "front"};
  lex.plural_exceptions = {{"people", "person"},   {"children", "child"},
                           {"men", "man"},         {"women", "woman"},
                           {"mice", "mouse"},      {"feet", "foot"},
                           {"teeth", "tooth"},     {"geese", "goose"},
                           {"buses", "bus"},       {"glasses", "glass"},
                           {"premises", "premises"}};
  return lex;
}

SceneLexicon SceneLexicon::from_json_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, std::string("lexicon: ") + e.what());
  }
  SceneLexicon lex;
  try {
    for (const json& w : j.at("stop_words")) {
      lex.stop_words.insert(w.get<std::string>());
    }
    for (const json& w : j.at("determiners")) {
      lex.determiners.insert(w.get<std::string>());
    }
    for (const json& w : j.at("prepositions")) {
      lex.prepositions.insert(w.get<std::string>());
    }
    if (j.contains("plural_exceptions")) {
      lex.plural_exceptions =
          j.at("plural_exceptions").get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, std::string("lexicon: ") + e.what());
  }
  if (!lex.stop_words.count("picture")) {
    fail(errc::invalid_input, "lexicon stop_words must contain 'picture'");
  }
  return lex;
}

std::string SceneLexicon::to_json() const {
  json j;
  j["stop_words"] = stop_words;
  j["determiners"] = determiners;
  j["prepositions"] = prepositions;
  j["plural_exceptions"] = plural_exceptions;
  return j.dump(2);
}

std::string lemmatize(const std::string& token, const SceneLexicon& lex) {
  const auto it = lex.plural_exceptions.find(token);
  if (it != lex.plural_exceptions.end()) return it->second;
  if (token.size() > 4 && ends_with(token, "ies")) {
    return token.substr(0, token.size() - 3) + "y";
  }
  if (token.size() > 3 &&
      (ends_with(token, "ches") || ends_with(token, "shes") ||
       ends_with(token, "xes") || ends_with(token, "zes") ||
       ends_with(token, "sses"))) {
    return token.substr(0, token.size() - 2);
  }
  if (token.size() > 2 && ends_with(token, "s") && !ends_with(token, "ss") &&
      !ends_with(token, "us") && !ends_with(token, "is")) {
    return token.substr(0, token.size() - 1);
  }
  return token;
}

std::optional<std::string> extract_scene_label(const std::string& caption,
                                               const SceneLexicon& lex) {
  const std::vector<std::string> tokens = tokenize(caption);
  if (tokens.empty()) return std::nullopt;

  auto is_content = [&](const std::string& t) {
    return !lex.stop_words.count(t) && !lex.determiners.count(t) &&
           !lex.prepositions.count(t);
  };

  // Rightmost locative preposition that is followed by a content token.
  for (std::size_t i = tokens.size(); i-- > 0;) {
    if (!lex.prepositions.count(tokens[i])) continue;
    std::string head;
    for (std::size_t j = i + 1; j < tokens.size(); ++j) {
      if (lex.prepositions.count(tokens[j])) break;  // next phrase starts
      if (is_content(tokens[j])) head = tokens[j];   // phrase head = last noun
    }
    if (!head.empty()) return lemmatize(head, lex);
  }

  // Fallback: last surviving content token.
  for (std::size_t i = tokens.size(); i-- > 0;) {
    if (is_content(tokens[i])) return lemmatize(tokens[i], lex);
  }
  return std::nullopt;
}

std::map<std::string, long> scene_frequencies(
    std::span<const std::string> captions, const SceneLexicon& lex) {
  std::map<std::string, long> counts;
  for (const std::string& caption : captions) {
    const auto label = extract_scene_label(caption, lex);
    if (label.has_value()) ++counts[*label];
  }
  return counts;
}

}  // namespace mmscope
