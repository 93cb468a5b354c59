#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>

namespace mmscope {

// Lexicon backing the pattern-based scene-label extractor. The shipped
// defaults are this toolkit's own list and can be replaced from a JSON
// file without code changes.
struct SceneLexicon {
  std::set<std::string> stop_words;   // always contains "picture"
  std::set<std::string> determiners;  // a, an, the
  std::set<std::string> prepositions; // in, at, on, inside, near, front
  std::map<std::string, std::string> plural_exceptions;

  static SceneLexicon defaults();
  static SceneLexicon from_json_file(const std::filesystem::path& path);
  std::string to_json() const;
};

// Suffix-rule plural stripping with the exception map applied first.
std::string lemmatize(const std::string& token, const SceneLexicon& lex);

// Lowercases and strips punctuation, then matches the rightmost
// <locative preposition> [determiner] <noun phrase> and returns the
// phrase head's lemma; falls back to the last non-stop-word token.
// Returns nullopt when no token survives.
std::optional<std::string> extract_scene_label(const std::string& caption,
                                               const SceneLexicon& lex);

// Counts of non-null extraction results.
std::map<std::string, long> scene_frequencies(
    std::span<const std::string> captions, const SceneLexicon& lex);

}  // namespace mmscope
